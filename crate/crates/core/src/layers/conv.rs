use std::borrow::Cow;

use super::{conv_output_shape, Conv2DSpec, LayerParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T> {
    /// `None` when the caller asked to skip the input gradient.
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub biases: Tensor<T>,
}

/// Geometry shared by the forward and backward loops.
struct Geometry {
    h: usize,
    w: usize,
    c: usize,
    f: usize,
    s: usize,
    p: usize,
    nf: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn new<T: Scalar>(input: &Tensor<T>, spec: &Conv2DSpec, params: &LayerParams<T>) -> Result<Self> {
        spec.validate()?;
        let &[h, w, c] = input.dims() else {
            return Err(Error::Shape(format!(
                "convolution input must be H×W×C, got {}",
                input.shape()
            )));
        };
        if c != spec.in_channels {
            return Err(Error::Shape(format!(
                "convolution expects {} input channels, got {c}",
                spec.in_channels
            )));
        }
        if params.weights.dims() != spec.weight_dims() || params.biases.dims() != [spec.filters] {
            return Err(Error::Shape(format!(
                "convolution parameters {} / {} do not match spec {:?}",
                params.weights.shape(),
                params.biases.shape(),
                spec.weight_dims()
            )));
        }
        let out = conv_output_shape(h, w, c, spec.kernel, spec.padding, spec.stride, spec.filters)?;
        Ok(Geometry {
            h,
            w,
            c,
            f: spec.kernel,
            s: spec.stride,
            p: spec.padding,
            nf: spec.filters,
            oh: out.dims()[0],
            ow: out.dims()[1],
        })
    }

    /// Input row for kernel row `ky` at output row `oy`, if inside the image.
    #[inline]
    fn input_row(&self, oy: usize, ky: usize) -> Option<usize> {
        (oy * self.s + ky).checked_sub(self.p).filter(|&iy| iy < self.h)
    }

    /// Kernel columns `[lo, hi)` landing inside the image at output column `ox`.
    #[inline]
    fn kernel_cols(&self, ox: usize) -> (usize, usize) {
        let x0 = ox * self.s;
        let lo = self.p.saturating_sub(x0);
        let hi = self.f.min((self.w + self.p).saturating_sub(x0));
        (lo, hi)
    }
}

/// Weights with disconnected channels forced to zero.
fn masked_weights<'a, T: Scalar>(spec: &Conv2DSpec, weights: &'a Tensor<T>) -> Cow<'a, [T]> {
    if spec.connectivity.is_none() {
        return Cow::Borrowed(weights.data());
    }
    let c = spec.in_channels;
    let per_filter = spec.kernel * spec.kernel * c;
    let masked = weights
        .data()
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            if spec.connected(i / per_filter, i % c) {
                w
            } else {
                T::zero()
            }
        })
        .collect();
    Cow::Owned(masked)
}

/// Zero-padded cross-correlation: each output is the bias plus the dot
/// product of the filter with its receptive field.
pub fn conv_forward<T: Scalar>(input: &Tensor<T>, spec: &Conv2DSpec, params: &LayerParams<T>) -> Result<Tensor<T>> {
    let g = Geometry::new(input, spec, params)?;
    let weights = masked_weights(spec, &params.weights);
    let x = input.data();
    let bias = params.biases.data();
    let mut out = vec![T::zero(); g.oh * g.ow * g.nf];

    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let base = (oy * g.ow + ox) * g.nf;
            let acc = &mut out[base..base + g.nf];
            acc.copy_from_slice(bias);
            let (lo, hi) = g.kernel_cols(ox);
            if lo >= hi {
                continue;
            }
            let span = (hi - lo) * g.c;
            let ix0 = ox * g.s + lo - g.p;
            for ky in 0..g.f {
                let Some(iy) = g.input_row(oy, ky) else { continue };
                let xs = &x[(iy * g.w + ix0) * g.c..][..span];
                for (o, a) in acc.iter_mut().enumerate() {
                    let ws = &weights[((o * g.f + ky) * g.f + lo) * g.c..][..span];
                    *a += dot(ws, xs);
                }
            }
        }
    }
    Tensor::from_vec(&[g.oh, g.ow, g.nf], out)
}

/// Gradients of a scalar loss with respect to the input, weights and biases
/// given the loss gradient at the convolution output.
pub fn conv_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cached_input: &Tensor<T>,
    spec: &Conv2DSpec,
    params: &LayerParams<T>,
) -> Result<ConvGrads<T>> {
    conv_backward_with(grad_out, cached_input, spec, params, true)
}

/// As [`conv_backward`]; `need_input` = false skips the input gradient, which
/// the first layer of a network never uses.
pub(crate) fn conv_backward_with<T: Scalar>(
    grad_out: &Tensor<T>,
    cached_input: &Tensor<T>,
    spec: &Conv2DSpec,
    params: &LayerParams<T>,
    need_input: bool,
) -> Result<ConvGrads<T>> {
    let g = Geometry::new(cached_input, spec, params)?;
    if grad_out.dims() != [g.oh, g.ow, g.nf] {
        return Err(Error::Shape(format!(
            "convolution output gradient {} does not match output ({},{},{})",
            grad_out.shape(),
            g.oh,
            g.ow,
            g.nf
        )));
    }
    let weights = masked_weights(spec, &params.weights);
    let x = cached_input.data();
    let go = grad_out.data();
    let mut gw = vec![T::zero(); weights.len()];
    let mut gb = vec![T::zero(); g.nf];
    let mut gx = if need_input {
        vec![T::zero(); x.len()]
    } else {
        Vec::new()
    };

    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let gos = &go[(oy * g.ow + ox) * g.nf..][..g.nf];
            for (b, &d) in gb.iter_mut().zip(gos) {
                *b += d;
            }
            let (lo, hi) = g.kernel_cols(ox);
            if lo >= hi {
                continue;
            }
            let span = (hi - lo) * g.c;
            let ix0 = ox * g.s + lo - g.p;
            for ky in 0..g.f {
                let Some(iy) = g.input_row(oy, ky) else { continue };
                let xoff = (iy * g.w + ix0) * g.c;
                let xs = &x[xoff..][..span];
                for (o, &d) in gos.iter().enumerate() {
                    if d == T::zero() {
                        continue;
                    }
                    let woff = ((o * g.f + ky) * g.f + lo) * g.c;
                    axpy(d, xs, &mut gw[woff..][..span]);
                    if need_input {
                        axpy(d, &weights[woff..][..span], &mut gx[xoff..][..span]);
                    }
                }
            }
        }
    }

    if spec.connectivity.is_some() {
        let per_filter = g.f * g.f * g.c;
        for (i, w) in gw.iter_mut().enumerate() {
            if !spec.connected(i / per_filter, i % g.c) {
                *w = T::zero();
            }
        }
    }

    Ok(ConvGrads {
        input: if need_input {
            Some(Tensor::from_vec(cached_input.dims(), gx)?)
        } else {
            None
        },
        weights: Tensor::from_vec(&spec.weight_dims(), gw)?,
        biases: Tensor::from_vec(&[g.nf], gb)?,
    })
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
