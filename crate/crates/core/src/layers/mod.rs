//! Layer definitions with forward and backward passes.
//!
//! Every pass is a pure function of its input and the layer parameters.
//! Activations are single examples laid out height × width × channels.

mod activation;
mod conv;
mod dense;
mod pool;
mod shapes;

pub use activation::{flatten, relu_backward, relu_forward, softmax, softmax_backward, unflatten};
pub(crate) use conv::conv_backward_with;
pub use conv::{conv_backward, conv_forward, ConvGrads};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use pool::{maxpool_backward, maxpool_forward, PoolCache, PoolGrads};
pub use shapes::{conv_output_shape, conv_param_count, dense_param_count, pool_output_shape};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A 2-D convolution over channels-last input.
///
/// `connectivity[o][c]` says whether filter `o` reads input channel `c`;
/// `None` means every filter sees every channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv2DSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_channels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity: Option<Vec<Vec<bool>>>,
}

impl Conv2DSpec {
    pub fn new(filters: usize, kernel: usize, in_channels: usize) -> Self {
        Conv2DSpec {
            filters,
            kernel,
            stride: 1,
            padding: 0,
            in_channels,
            connectivity: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters == 0 || self.kernel == 0 || self.stride == 0 || self.in_channels == 0 {
            return Err(Error::Argument(format!(
                "convolution needs filters, kernel, stride and in_channels >= 1: {self:?}"
            )));
        }
        if let Some(table) = &self.connectivity {
            if table.len() != self.filters {
                return Err(Error::Argument(format!(
                    "connectivity table has {} rows for {} filters",
                    table.len(),
                    self.filters
                )));
            }
            for (o, row) in table.iter().enumerate() {
                if row.len() != self.in_channels {
                    return Err(Error::Argument(format!(
                        "connectivity row {o} has {} entries for {} input channels",
                        row.len(),
                        self.in_channels
                    )));
                }
                if !row.iter().any(|&b| b) {
                    return Err(Error::Argument(format!(
                        "connectivity row {o} connects filter {o} to no channel"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether filter `o` reads channel `c`.
    #[inline]
    pub fn connected(&self, o: usize, c: usize) -> bool {
        self.connectivity.as_ref().is_none_or(|t| t[o][c])
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.filters, self.kernel, self.kernel, self.in_channels]
    }

    /// He-normal weights (std = sqrt(2 / fan_in)), zero biases. Weights of
    /// disconnected channels are zero.
    pub fn init_params<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LayerParams<T>> {
        self.validate()?;
        let fan_in = self.kernel * self.kernel * self.in_channels;
        let mut weights = Tensor::from_vec(
            &self.weight_dims(),
            he_normal(rng, fan_in, self.weight_dims().iter().product()),
        )?;
        if self.connectivity.is_some() {
            let c = self.in_channels;
            let per_filter = self.kernel * self.kernel * c;
            for (i, w) in weights.data_mut().iter_mut().enumerate() {
                if !self.connected(i / per_filter, i % c) {
                    *w = T::zero();
                }
            }
        }
        Ok(LayerParams {
            weights,
            biases: Tensor::zeros(&[self.filters])?,
        })
    }
}

/// Max pooling with spatial extent `extent` and stride `stride`.
///
/// With `trainable_affine`, each channel's maxima are scaled by a trainable
/// coefficient and shifted by a trainable bias.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub extent: usize,
    pub stride: usize,
    #[serde(default)]
    pub trainable_affine: bool,
}

impl PoolSpec {
    pub fn new(extent: usize, stride: usize) -> Self {
        PoolSpec {
            extent,
            stride,
            trainable_affine: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.extent == 0 || self.stride == 0 {
            return Err(Error::Argument(format!(
                "pooling extent and stride must be >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn param_count(&self, channels: usize) -> usize {
        if self.trainable_affine {
            2 * channels
        } else {
            0
        }
    }

    /// Coefficients start at one and biases at zero, so a fresh affine pool
    /// behaves exactly like a plain one.
    pub fn init_params<T: Scalar>(&self, channels: usize) -> Result<Option<LayerParams<T>>> {
        self.validate()?;
        if !self.trainable_affine {
            return Ok(None);
        }
        Ok(Some(LayerParams {
            weights: Tensor::new(crate::tensor::Shape::new(&[channels])?, T::one())?,
            biases: Tensor::zeros(&[channels])?,
        }))
    }
}

/// A fully connected layer computing `W·x + b` with `W` of shape (out, in).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub in_features: usize,
    pub out_features: usize,
}

impl DenseSpec {
    pub fn new(in_features: usize, out_features: usize) -> Self {
        DenseSpec {
            in_features,
            out_features,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_features == 0 || self.out_features == 0 {
            return Err(Error::Argument(format!(
                "dense layer needs positive feature counts: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn init_params<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LayerParams<T>> {
        self.validate()?;
        let n = self.in_features * self.out_features;
        Ok(LayerParams {
            weights: Tensor::from_vec(
                &[self.out_features, self.in_features],
                he_normal(rng, self.in_features, n),
            )?,
            biases: Tensor::zeros(&[self.out_features])?,
        })
    }
}

/// Trainable tensors of one layer.
///
/// For convolutions `weights` is (filters, kernel, kernel, channels) and
/// `biases` is (filters). For dense layers `weights` is (out, in). For affine
/// pooling `weights` holds the per-channel coefficients and `biases` the
/// per-channel shifts.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub weights: Tensor<T>,
    pub biases: Tensor<T>,
}

impl<T: Scalar> LayerParams<T> {
    pub fn zeros_like(&self) -> Self {
        LayerParams {
            weights: Tensor::new(self.weights.shape().clone(), T::zero()).expect("existing shape"),
            biases: Tensor::new(self.biases.shape().clone(), T::zero()).expect("existing shape"),
        }
    }

    /// Total scalar entries across both tensors.
    pub fn numel(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

fn he_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, fan_in: usize, n: usize) -> Vec<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("finite positive std");
    (0..n).map(|_| T::of(dist.sample(rng))).collect()
}
