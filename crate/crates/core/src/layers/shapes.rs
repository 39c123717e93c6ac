//! Output-volume and parameter-count arithmetic.

use super::{Conv2DSpec, DenseSpec};
use crate::error::{Error, Result};
use crate::tensor::Shape;

/// Output volume of an `f × f × c` convolution with `n_f` filters applied to
/// an `h × w × c` input: `floor((h - f + 2p) / s) + 1` rows, likewise for
/// columns, and `n_f` channels. Windows that do not fit are dropped.
pub fn conv_output_shape(h: usize, w: usize, c: usize, f: usize, p: usize, s: usize, n_f: usize) -> Result<Shape> {
    if s == 0 || f == 0 || c == 0 || n_f == 0 {
        return Err(Error::Shape(format!(
            "convolution needs stride, kernel, channels and filters >= 1 (s={s}, f={f}, c={c}, n_f={n_f})"
        )));
    }
    let (ph, pw) = (h + 2 * p, w + 2 * p);
    if ph < f || pw < f {
        return Err(Error::Shape(format!("kernel {f}×{f} exceeds padded input {ph}×{pw}")));
    }
    Shape::new(&[(ph - f) / s + 1, (pw - f) / s + 1, n_f])
}

/// Output volume of pooling a `W1 × H1 × D1` input with extent `se` and
/// stride `sd`. The result is returned channels-last as `(H2, W2, D2)`.
pub fn pool_output_shape(w1: usize, h1: usize, d1: usize, se: usize, sd: usize) -> Result<Shape> {
    if se == 0 || sd == 0 {
        return Err(Error::Shape(format!(
            "pooling extent and stride must be >= 1 (SE={se}, SD={sd})"
        )));
    }
    if w1 < se || h1 < se {
        return Err(Error::Shape(format!("pooling extent {se} exceeds input {w1}×{h1}")));
    }
    Shape::new(&[(h1 - se) / sd + 1, (w1 - se) / sd + 1, d1])
}

/// Trainable scalars of a convolution: `(f·f·c + 1)·n_f` when fully
/// connected, otherwise each filter counts only its connected channels.
pub fn conv_param_count(spec: &Conv2DSpec) -> usize {
    let per_channel = spec.kernel * spec.kernel;
    (0..spec.filters)
        .map(|o| {
            let channels = (0..spec.in_channels).filter(|&c| spec.connected(o, c)).count();
            per_channel * channels + 1
        })
        .sum()
}

pub fn dense_param_count(spec: &DenseSpec, include_bias: bool) -> usize {
    let weights = spec.in_features * spec.out_features;
    if include_bias {
        weights + spec.out_features
    } else {
        weights
    }
}
