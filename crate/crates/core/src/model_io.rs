//! Model files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                                          |
//! |--------------|--------------------------------------------------|
//! | 4            | magic `DCNN`                                     |
//! | 4            | format version (`u32`)                           |
//! | 4            | header length in bytes (`u32`)                   |
//! | header len   | UTF-8 JSON header: input shape, class names, layer specs, payload scalar count |
//! | 4 × count    | `f32` parameters in layer order, weights then biases, row-major |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::LayerParams;
use crate::model::{Layer, LayerSpec, Model};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

pub const MAGIC: &[u8; 4] = b"DCNN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    input_shape: Shape,
    class_names: Vec<String>,
    layers: Vec<LayerSpec>,
    parameter_count: usize,
}

pub fn model_to_bytes<T: Scalar>(model: &Model<T>) -> Result<Vec<u8>> {
    let header = Header {
        input_shape: model.input_shape().clone(),
        class_names: model.class_names().to_vec(),
        layers: model.specs().cloned().collect(),
        parameter_count: model.stored_scalars(),
    };
    let text = serde_json::to_vec(&header).map_err(|e| Error::format("header", e.to_string()))?;
    let header_len = u32::try_from(text.len()).map_err(|_| Error::format("header length", "header exceeds 4 GiB"))?;

    let mut out = Vec::with_capacity(12 + text.len() + 4 * header.parameter_count);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&text);
    for p in model.params() {
        for &v in p.weights.data().iter().chain(p.biases.data()) {
            out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses a model file, validating every field before building anything.
pub fn model_from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Model<T>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format("magic", "not a model file (expected \"DCNN\")"));
    }
    let version = read_u32(bytes, 4, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::format(
            "version",
            format!("unsupported format version {version}, expected {FORMAT_VERSION}"),
        ));
    }
    let header_len = read_u32(bytes, 8, "header length")? as usize;
    let text = bytes
        .get(12..12 + header_len)
        .ok_or_else(|| Error::format("header length", format!("{header_len} bytes declared, file too short")))?;
    let header: Header = serde_json::from_slice(text).map_err(|e| Error::format("header", e.to_string()))?;

    let mut shape = header.input_shape.clone();
    let mut param_shapes = Vec::with_capacity(header.layers.len());
    for (i, spec) in header.layers.iter().enumerate() {
        param_shapes.push(spec.param_shapes(&shape));
        shape = spec
            .output_shape(&shape)
            .map_err(|e| Error::format("layers", format!("layer {i}: {e}")))?;
    }
    let expected: usize = param_shapes
        .iter()
        .flatten()
        .map(|(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
        .sum();
    if header.parameter_count != expected {
        return Err(Error::format(
            "parameter_count",
            format!("header declares {}, layers need {expected}", header.parameter_count),
        ));
    }
    let payload = &bytes[12 + header_len..];
    if payload.len() != 4 * expected {
        return Err(Error::format(
            "payload",
            format!(
                "{} bytes, expected {} for {expected} parameters",
                payload.len(),
                4 * expected
            ),
        ));
    }

    let mut values = payload
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64));
    let mut take = |dims: &[usize]| -> Result<Tensor<T>> {
        let n = dims.iter().product();
        Tensor::from_vec(dims, values.by_ref().take(n).collect())
    };
    let layers = header
        .layers
        .into_iter()
        .zip(param_shapes)
        .map(|(spec, shapes)| {
            let params = match shapes {
                Some((w, b)) => Some(LayerParams {
                    weights: take(&w)?,
                    biases: take(&b)?,
                }),
                None => None,
            };
            Ok(Layer { spec, params })
        })
        .collect::<Result<Vec<_>>>()?;
    Model::from_layers(header.input_shape, header.class_names, layers)
        .map_err(|e| Error::format("layers", e.to_string()))
}

fn read_u32(bytes: &[u8], at: usize, field: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format(field, "file too short"))
}

pub fn save_model<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(model)?)?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Model<T>> {
    model_from_bytes(&std::fs::read(path)?)
}
