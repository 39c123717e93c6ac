//! Layer stacks, shape chaining and whole-network forward/backward passes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    self, conv_output_shape, conv_param_count, dense_param_count, pool_output_shape, Conv2DSpec, DenseSpec,
    LayerParams, PoolCache, PoolSpec,
};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

pub const DEFAULT_CLASS_COUNT: usize = 36;
pub const INPUT_SIDE: usize = 32;

/// One layer of a network, without its parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d(Conv2DSpec),
    Relu,
    MaxPool(PoolSpec),
    Flatten,
    Dense(DenseSpec),
    Softmax,
}

impl LayerSpec {
    /// Output shape for a given input shape; errors when the layer cannot
    /// accept that input.
    pub fn output_shape(&self, input: &Shape) -> Result<Shape> {
        match self {
            LayerSpec::Conv2d(spec) => {
                spec.validate()?;
                let &[h, w, c] = input.dims() else {
                    return Err(Error::Shape(format!("convolution needs H×W×C input, got {input}")));
                };
                if c != spec.in_channels {
                    return Err(Error::Shape(format!(
                        "convolution expects {} channels, previous layer gives {c}",
                        spec.in_channels
                    )));
                }
                conv_output_shape(h, w, c, spec.kernel, spec.padding, spec.stride, spec.filters)
            }
            LayerSpec::MaxPool(spec) => {
                let &[h, w, c] = input.dims() else {
                    return Err(Error::Shape(format!("pooling needs H×W×C input, got {input}")));
                };
                pool_output_shape(w, h, c, spec.extent, spec.stride)
            }
            LayerSpec::Relu => Ok(input.clone()),
            LayerSpec::Flatten => Shape::new(&[input.numel()]),
            LayerSpec::Dense(spec) => {
                spec.validate()?;
                if input.dims() != [spec.in_features] {
                    return Err(Error::Shape(format!(
                        "dense layer expects ({}), previous layer gives {input}",
                        spec.in_features
                    )));
                }
                Shape::new(&[spec.out_features])
            }
            LayerSpec::Softmax => {
                if input.rank() != 1 {
                    return Err(Error::Shape(format!("softmax needs a vector, got {input}")));
                }
                Ok(input.clone())
            }
        }
    }

    /// Number of trainable scalars, given the layer's input shape.
    pub fn param_count(&self, input: &Shape) -> usize {
        match self {
            LayerSpec::Conv2d(spec) => conv_param_count(spec),
            LayerSpec::Dense(spec) => dense_param_count(spec, true),
            LayerSpec::MaxPool(spec) => spec.param_count(*input.dims().last().unwrap_or(&0)),
            LayerSpec::Relu | LayerSpec::Flatten | LayerSpec::Softmax => 0,
        }
    }

    /// Shapes of the (weights, biases) tensors this layer stores, if any.
    pub fn param_shapes(&self, input: &Shape) -> Option<(Vec<usize>, Vec<usize>)> {
        match self {
            LayerSpec::Conv2d(spec) => Some((spec.weight_dims().to_vec(), vec![spec.filters])),
            LayerSpec::Dense(spec) => Some((vec![spec.out_features, spec.in_features], vec![spec.out_features])),
            LayerSpec::MaxPool(spec) if spec.trainable_affine => {
                let c = *input.dims().last().expect("rank >= 1");
                Some((vec![c], vec![c]))
            }
            _ => None,
        }
    }
}

/// Widths of the two-stage convolutional network. Defaults give
/// conv 6@5×5 → pool 2/2 → conv 16@5×5 → pool 2/2 → dense 128 → dense classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub hidden: usize,
    pub pool_affine: bool,
    /// `c2_connectivity[o][c]`: whether second-stage filter `o` reads
    /// first-stage map `c`. Absent means full connectivity.
    pub c2_connectivity: Option<Vec<Vec<bool>>>,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            conv1_filters: 6,
            conv2_filters: 16,
            kernel: 5,
            pool: 2,
            hidden: 128,
            pool_affine: false,
            c2_connectivity: None,
        }
    }
}

impl Architecture {
    /// Layer specs for a `side × side × 1` input and `class_count` outputs.
    pub fn layers(&self, side: usize, class_count: usize) -> Result<Vec<LayerSpec>> {
        let pool = PoolSpec {
            extent: self.pool,
            stride: self.pool,
            trainable_affine: self.pool_affine,
        };
        let c1 = Conv2DSpec::new(self.conv1_filters, self.kernel, 1);
        let mut c2 = Conv2DSpec::new(self.conv2_filters, self.kernel, self.conv1_filters);
        c2.connectivity = self.c2_connectivity.clone();

        let mut specs = vec![
            LayerSpec::Conv2d(c1),
            LayerSpec::Relu,
            LayerSpec::MaxPool(pool.clone()),
            LayerSpec::Conv2d(c2),
            LayerSpec::Relu,
            LayerSpec::MaxPool(pool),
            LayerSpec::Flatten,
        ];
        let mut shape = Shape::new(&[side, side, 1])?;
        for spec in &specs {
            shape = spec.output_shape(&shape)?;
        }
        let features = shape.numel();
        specs.extend([
            LayerSpec::Dense(DenseSpec::new(features, self.hidden)),
            LayerSpec::Relu,
            LayerSpec::Dense(DenseSpec::new(self.hidden, class_count)),
            LayerSpec::Softmax,
        ]);
        Ok(specs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    pub params: Option<LayerParams<T>>,
}

/// A validated layer stack ending in softmax over `class_names.len()` classes.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    input_shape: Shape,
    class_names: Vec<String>,
    layers: Vec<Layer<T>>,
    /// Input shape of every layer, plus the final output shape.
    shapes: Vec<Shape>,
}

/// Per-layer row for a model summary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSummary {
    pub name: String,
    pub output_shape: Shape,
    pub params: usize,
}

/// Cached activations from a forward pass, consumed by the backward pass.
struct Trace<T> {
    inputs: Vec<Tensor<T>>,
    pools: Vec<Option<PoolCache<T>>>,
    output: Tensor<T>,
}

/// Gradients for every layer, aligned with [`Model::layers`].
pub type Gradients<T> = Vec<Option<LayerParams<T>>>;

pub fn default_class_names(count: usize) -> Vec<String> {
    (0..count).map(|i| format!("class_{i}")).collect()
}

/// The 36-class reference network on 32×32×1 input with seeded He weights.
pub fn assemble_reference_model<T: Scalar>(seed: u64) -> Model<T> {
    Model::from_architecture(&Architecture::default(), default_class_names(DEFAULT_CLASS_COUNT), seed)
        .expect("reference architecture chains")
}

impl<T: Scalar> Model<T> {
    /// Builds a model with freshly initialised parameters.
    pub fn new(input_shape: Shape, class_names: Vec<String>, specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let shapes = chain_shapes(&input_shape, &specs, class_names.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .into_iter()
            .zip(&shapes)
            .map(|(spec, input)| {
                let params = match &spec {
                    LayerSpec::Conv2d(s) => Some(s.init_params(&mut rng)?),
                    LayerSpec::Dense(s) => Some(s.init_params(&mut rng)?),
                    LayerSpec::MaxPool(s) => s.init_params(*input.dims().last().expect("rank >= 1"))?,
                    _ => None,
                };
                Ok(Layer { spec, params })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Model {
            input_shape,
            class_names,
            layers,
            shapes,
        })
    }

    pub fn from_architecture(arch: &Architecture, class_names: Vec<String>, seed: u64) -> Result<Self> {
        let specs = arch.layers(INPUT_SIDE, class_names.len())?;
        Self::new(Shape::new(&[INPUT_SIDE, INPUT_SIDE, 1])?, class_names, specs, seed)
    }

    /// Builds a model around existing parameters, validating every shape.
    pub fn from_layers(input_shape: Shape, class_names: Vec<String>, layers: Vec<Layer<T>>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec.clone()).collect();
        let shapes = chain_shapes(&input_shape, &specs, class_names.len())?;
        for (i, (layer, input)) in layers.iter().zip(&shapes).enumerate() {
            let expected = layer.spec.param_shapes(input);
            let actual = layer
                .params
                .as_ref()
                .map(|p| (p.weights.dims().to_vec(), p.biases.dims().to_vec()));
            if expected != actual {
                return Err(Error::Shape(format!(
                    "layer {i} parameters {actual:?} do not match expected {expected:?}"
                )));
            }
        }
        Ok(Model {
            input_shape,
            class_names,
            layers,
            shapes,
        })
    }

    pub fn input_shape(&self) -> &Shape {
        &self.input_shape
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn set_class_names(&mut self, names: Vec<String>) -> Result<()> {
        if names.len() != self.class_count() {
            return Err(Error::Argument(format!(
                "{} class names given for a {}-class model",
                names.len(),
                self.class_count()
            )));
        }
        self.class_names = names;
        Ok(())
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn specs(&self) -> impl Iterator<Item = &LayerSpec> {
        self.layers.iter().map(|l| &l.spec)
    }

    /// Trainable scalars across all layers.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .zip(&self.shapes)
            .map(|(l, s)| l.spec.param_count(s))
            .sum()
    }

    /// Scalars stored in parameter tensors. Exceeds [`Self::param_count`]
    /// only when partial connectivity leaves masked weight slots.
    pub fn stored_scalars(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.params.as_ref())
            .map(LayerParams::numel)
            .sum()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut LayerParams<T>> {
        self.layers.iter_mut().filter_map(|l| l.params.as_mut())
    }

    pub fn params(&self) -> impl Iterator<Item = &LayerParams<T>> {
        self.layers.iter().filter_map(|l| l.params.as_ref())
    }

    /// One row per layer. Convolutions and pools are named C1, S1, C2, S2…
    /// in order; dense layers FC1, FC2…
    pub fn summary(&self) -> Vec<LayerSummary> {
        let (mut convs, mut pools, mut denses) = (0, 0, 0);
        self.layers
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                let name = match &layer.spec {
                    LayerSpec::Conv2d(_) => {
                        convs += 1;
                        format!("C{convs}")
                    }
                    LayerSpec::MaxPool(_) => {
                        pools += 1;
                        format!("S{pools}")
                    }
                    LayerSpec::Dense(_) => {
                        denses += 1;
                        format!("FC{denses}")
                    }
                    LayerSpec::Relu => "ReLU".to_string(),
                    LayerSpec::Flatten => "Flatten".to_string(),
                    LayerSpec::Softmax => "Softmax".to_string(),
                };
                LayerSummary {
                    name,
                    output_shape: self.shapes[i + 1].clone(),
                    params: layer.spec.param_count(&self.shapes[i]),
                }
            })
            .collect()
    }

    /// Class probabilities for one input.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = apply(layer, &x)?.0;
        }
        Ok(x)
    }

    fn trace(&self, input: &Tensor<T>) -> Result<Trace<T>> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pools = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (y, cache) = apply(layer, &x)?;
            inputs.push(x);
            pools.push(cache);
            x = y;
        }
        Ok(Trace {
            inputs,
            pools,
            output: x,
        })
    }

    /// Cross-entropy loss, class probabilities, and the loss gradient for
    /// every layer's parameters.
    pub fn loss_and_gradients(&self, input: &Tensor<T>, class_index: usize) -> Result<(T, Tensor<T>, Gradients<T>)> {
        let trace = self.trace(input)?;
        let probs = trace.output;
        let loss = crate::train::cross_entropy_loss(&probs, class_index)?;
        let mut grads: Gradients<T> = vec![None; self.layers.len()];

        // Softmax and cross-entropy combine to probs − one_hot at the logits.
        let mut grad = crate::train::softmax_cross_entropy_grad(&probs, class_index)?;

        let last = self.layers.len() - 1;
        for i in (0..last).rev() {
            let layer = &self.layers[i];
            let x = &trace.inputs[i];
            let need_input = i > 0;
            grad = match &layer.spec {
                LayerSpec::Conv2d(spec) => {
                    let params = layer.params.as_ref().expect("conv has params");
                    let g = layers::conv_backward_with(&grad, x, spec, params, need_input)?;
                    grads[i] = Some(LayerParams {
                        weights: g.weights,
                        biases: g.biases,
                    });
                    match g.input {
                        Some(gi) => gi,
                        None => break,
                    }
                }
                LayerSpec::Dense(spec) => {
                    let params = layer.params.as_ref().expect("dense has params");
                    let g = layers::dense_backward(&grad, x, spec, params)?;
                    grads[i] = Some(LayerParams {
                        weights: g.weights,
                        biases: g.biases,
                    });
                    g.input
                }
                LayerSpec::MaxPool(spec) => {
                    let cache = trace.pools[i].as_ref().expect("pool cache recorded");
                    let g = layers::maxpool_backward(&grad, cache, spec, layer.params.as_ref())?;
                    grads[i] = g.params;
                    g.input
                }
                LayerSpec::Relu => layers::relu_backward(&grad, x)?,
                LayerSpec::Flatten => layers::unflatten(&grad, x.dims())?,
                LayerSpec::Softmax => layers::softmax_backward(&grad, &layers::softmax(x)?)?,
            };
        }
        Ok((loss, probs, grads))
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        if input.shape() != &self.input_shape {
            return Err(Error::Shape(format!(
                "model expects input {}, got {}",
                self.input_shape,
                input.shape()
            )));
        }
        Ok(())
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            input_shape: self.input_shape.clone(),
            class_names: self.class_names.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec.clone(),
                    params: l.params.as_ref().map(|p| LayerParams {
                        weights: p.weights.cast(),
                        biases: p.biases.cast(),
                    }),
                })
                .collect(),
            shapes: self.shapes.clone(),
        }
    }
}

fn apply<T: Scalar>(layer: &Layer<T>, x: &Tensor<T>) -> Result<(Tensor<T>, Option<PoolCache<T>>)> {
    Ok(match &layer.spec {
        LayerSpec::Conv2d(spec) => (
            layers::conv_forward(x, spec, layer.params.as_ref().expect("conv has params"))?,
            None,
        ),
        LayerSpec::Dense(spec) => (
            layers::dense_forward(x, spec, layer.params.as_ref().expect("dense has params"))?,
            None,
        ),
        LayerSpec::MaxPool(spec) => {
            let (y, cache) = layers::maxpool_forward(x, spec, layer.params.as_ref())?;
            (y, Some(cache))
        }
        LayerSpec::Relu => (layers::relu_forward(x), None),
        LayerSpec::Flatten => (layers::flatten(x), None),
        LayerSpec::Softmax => (layers::softmax(x)?, None),
    })
}

/// Validates that each layer accepts the previous layer's output and that
/// the stack ends in a softmax over `class_count` outputs.
fn chain_shapes(input: &Shape, specs: &[LayerSpec], class_count: usize) -> Result<Vec<Shape>> {
    if class_count == 0 {
        return Err(Error::Argument("a model needs at least one class".into()));
    }
    if specs.last() != Some(&LayerSpec::Softmax) {
        return Err(Error::Argument("the last layer must be softmax".into()));
    }
    let mut shapes = vec![input.clone()];
    for (i, spec) in specs.iter().enumerate() {
        let next = spec
            .output_shape(shapes.last().expect("non-empty"))
            .map_err(|e| Error::Shape(format!("layer {i} ({spec:?}): {e}")))?;
        shapes.push(next);
    }
    let out = shapes.last().expect("non-empty");
    if out.dims() != [class_count] {
        return Err(Error::Shape(format!(
            "network output {out} does not match {class_count} classes"
        )));
    }
    Ok(shapes)
}
