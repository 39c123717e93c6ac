use super::{pool_output_shape, LayerParams, PoolSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// What the backward pass needs from a max-pool forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolCache<T> {
    pub input_shape: Shape,
    /// Flat input offset of the winning element for each output entry.
    pub argmax: Vec<usize>,
    /// The window maxima before any affine transform.
    pub maxima: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolGrads<T> {
    pub input: Tensor<T>,
    /// Coefficient and shift gradients when the pool is affine.
    pub params: Option<LayerParams<T>>,
}

fn check_params<T: Scalar>(spec: &PoolSpec, params: Option<&LayerParams<T>>, channels: usize) -> Result<()> {
    match (spec.trainable_affine, params) {
        (false, _) => Ok(()),
        (true, Some(p)) if p.weights.dims() == [channels] && p.biases.dims() == [channels] => Ok(()),
        (true, Some(p)) => Err(Error::Shape(format!(
            "pool affine parameters {} / {} do not match {channels} channels",
            p.weights.shape(),
            p.biases.shape()
        ))),
        (true, None) => Err(Error::Argument("affine pool called without parameters".into())),
    }
}

/// Per-channel window maxima. Ties go to the first element in row-major
/// scan order of the window.
pub fn maxpool_forward<T: Scalar>(
    input: &Tensor<T>,
    spec: &PoolSpec,
    params: Option<&LayerParams<T>>,
) -> Result<(Tensor<T>, PoolCache<T>)> {
    spec.validate()?;
    let &[h, w, c] = input.dims() else {
        return Err(Error::Shape(format!("pool input must be H×W×C, got {}", input.shape())));
    };
    check_params(spec, params, c)?;
    let out_shape = pool_output_shape(w, h, c, spec.extent, spec.stride)?;
    let (oh, ow) = (out_shape.dims()[0], out_shape.dims()[1]);
    let x = input.data();
    let n = oh * ow * c;
    let mut argmax = Vec::with_capacity(n);
    let mut maxima = Vec::with_capacity(n);

    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best_idx = ((oy * spec.stride) * w + ox * spec.stride) * c + ch;
                let mut best = x[best_idx];
                for ky in 0..spec.extent {
                    let row = (oy * spec.stride + ky) * w;
                    for kx in 0..spec.extent {
                        let idx = (row + ox * spec.stride + kx) * c + ch;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                argmax.push(best_idx);
                maxima.push(best);
            }
        }
    }

    let out: Vec<T> = match params.filter(|_| spec.trainable_affine) {
        Some(p) => {
            let (coeff, shift) = (p.weights.data(), p.biases.data());
            maxima
                .iter()
                .enumerate()
                .map(|(i, &m)| coeff[i % c] * m + shift[i % c])
                .collect()
        }
        None => maxima.clone(),
    };
    Ok((
        Tensor::from_vec(out_shape.dims(), out)?,
        PoolCache {
            input_shape: input.shape().clone(),
            argmax,
            maxima,
        },
    ))
}

/// Routes each output gradient to the input position that won its window.
pub fn maxpool_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &PoolCache<T>,
    spec: &PoolSpec,
    params: Option<&LayerParams<T>>,
) -> Result<PoolGrads<T>> {
    if grad_out.len() != cache.argmax.len() {
        return Err(Error::Shape(format!(
            "pool output gradient {} does not match the {} cached windows",
            grad_out.shape(),
            cache.argmax.len()
        )));
    }
    let c = *cache.input_shape.dims().last().expect("rank >= 1");
    check_params(spec, params, c)?;
    let mut gx = vec![T::zero(); cache.input_shape.numel()];
    let go = grad_out.data();

    let param_grads = match params.filter(|_| spec.trainable_affine) {
        Some(p) => {
            let coeff = p.weights.data();
            let mut gc = vec![T::zero(); c];
            let mut gs = vec![T::zero(); c];
            for (i, (&d, &idx)) in go.iter().zip(&cache.argmax).enumerate() {
                let ch = i % c;
                gc[ch] += d * cache.maxima[i];
                gs[ch] += d;
                gx[idx] += d * coeff[ch];
            }
            Some(LayerParams {
                weights: Tensor::from_vec(&[c], gc)?,
                biases: Tensor::from_vec(&[c], gs)?,
            })
        }
        None => {
            for (&d, &idx) in go.iter().zip(&cache.argmax) {
                gx[idx] += d;
            }
            None
        }
    };

    Ok(PoolGrads {
        input: Tensor::from_vec(cache.input_shape.dims(), gx)?,
        params: param_grads,
    })
}
