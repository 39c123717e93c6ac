//! A framework-free convolutional network engine for handwritten character
//! recognition.
//!
//! The core is generic over the element type ([`Scalar`]): training and
//! model files use `f32`, gradient checks use `f64`. Concrete aliases for
//! both live at the crate root.

pub mod data;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod model_io;
pub mod pgm;
pub mod preprocess;
pub mod scalar;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use data::{
    batches, load_dataset, split_dataset, split_indices, Dataset, DatasetSplit, LabeledExample, LoadReport,
};
pub use error::{Error, Result};
pub use layers::{
    conv_output_shape, conv_param_count, dense_param_count, pool_output_shape, Conv2DSpec, DenseSpec, LayerParams,
    PoolSpec,
};
pub use metrics::{evaluate, ConfusionMatrix, EvalReport};
pub use model::{assemble_reference_model, Architecture, LayerSpec, Model};
pub use model_io::{load_model, save_model};
pub use preprocess::{preprocess, RawImage};
pub use scalar::Scalar;
pub use tensor::{Shape, Tensor};
pub use train::{cross_entropy_loss, log_to_csv, sgd_step, train, EpochRecord, TrainConfig};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Model32 = Model<f32>;
pub type Model64 = Model<f64>;
pub type LabeledExample32 = LabeledExample<f32>;
pub type LabeledExample64 = LabeledExample<f64>;
