//! Cross-entropy loss, SGD with momentum and the epoch loop.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{batches, sequential_batches, LabeledExample};
use crate::error::{Error, Result};
use crate::layers::LayerParams;
use crate::metrics::evaluate;
use crate::model::Model;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `−ln p[true_class]`.
pub fn cross_entropy_loss<T: Scalar>(probs: &Tensor<T>, true_class: usize) -> Result<T> {
    let p = *probs.data().get(true_class).ok_or_else(|| {
        Error::Argument(format!(
            "class index {true_class} out of range for {} classes",
            probs.len()
        ))
    })?;
    // NaN must survive the clamp so divergence is detected.
    let floor = T::of(PROB_FLOOR);
    Ok(-(if p < floor { floor } else { p }).ln())
}

/// Gradient of cross-entropy-after-softmax with respect to the logits.
pub fn softmax_cross_entropy_grad<T: Scalar>(probs: &Tensor<T>, true_class: usize) -> Result<Tensor<T>> {
    if true_class >= probs.len() {
        return Err(Error::Argument(format!(
            "class index {true_class} out of range for {} classes",
            probs.len()
        )));
    }
    let mut g = probs.clone();
    g.data_mut()[true_class] -= T::one();
    Ok(g)
}

/// `v ← momentum·v − lr·g; p ← p + v`.
pub fn sgd_step<T: Scalar>(
    param: &mut Tensor<T>,
    grad: &Tensor<T>,
    velocity: &mut Tensor<T>,
    lr: T,
    momentum: T,
) -> Result<()> {
    param.check_same_shape(grad, "sgd gradient")?;
    param.check_same_shape(velocity, "sgd velocity")?;
    for ((p, &g), v) in param.data_mut().iter_mut().zip(grad.data()).zip(velocity.data_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 0,
            shuffle_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be at least 1".into()));
        }
        // lr = 0 is allowed so a run can be checked to leave weights untouched.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Argument(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// Metrics after one epoch, both computed with the end-of-epoch weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

pub const CSV_HEADER: &str = "epoch,train_loss,train_acc,test_loss,test_acc";

/// The per-epoch log as CSV with six decimals per value.
pub fn log_to_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6}",
            r.epoch, r.train_loss, r.train_acc, r.test_loss, r.test_acc
        )
        .expect("writing to a String");
    }
    out
}

/// Momentum buffers matching a model's parameters.
pub struct Sgd<T> {
    velocity: Vec<LayerParams<T>>,
    lr: T,
    momentum: T,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(model: &Model<T>, lr: f64, momentum: f64) -> Self {
        Sgd {
            velocity: model.params().map(LayerParams::zeros_like).collect(),
            lr: T::of(lr),
            momentum: T::of(momentum),
        }
    }

    /// Applies one update; `grads` must be aligned with the model's
    /// parameterised layers.
    pub fn step(&mut self, model: &mut Model<T>, grads: &[LayerParams<T>]) -> Result<()> {
        for ((p, g), v) in model.params_mut().zip(grads).zip(&mut self.velocity) {
            sgd_step(&mut p.weights, &g.weights, &mut v.weights, self.lr, self.momentum)?;
            sgd_step(&mut p.biases, &g.biases, &mut v.biases, self.lr, self.momentum)?;
        }
        Ok(())
    }
}

/// Mean loss and mean parameter gradients over a batch.
pub fn batch_gradients<T: Scalar>(
    model: &Model<T>,
    examples: &[LabeledExample<T>],
    batch: &[usize],
) -> Result<(f64, Vec<LayerParams<T>>)> {
    let mut total: Vec<LayerParams<T>> = model.params().map(LayerParams::zeros_like).collect();
    let mut loss = 0.0;
    for &i in batch {
        let ex = &examples[i];
        let (l, _, grads) = model.loss_and_gradients(&ex.image, ex.class_index)?;
        loss += l.to_f64_lossy();
        for (acc, g) in total.iter_mut().zip(grads.into_iter().flatten()) {
            add_assign(acc.weights.data_mut(), g.weights.data());
            add_assign(acc.biases.data_mut(), g.biases.data());
        }
    }
    let scale = T::one() / T::of(batch.len() as f64);
    for acc in &mut total {
        acc.weights.data_mut().iter_mut().for_each(|v| *v *= scale);
        acc.biases.data_mut().iter_mut().for_each(|v| *v *= scale);
    }
    Ok((loss / batch.len() as f64, total))
}

fn add_assign<T: Scalar>(acc: &mut [T], x: &[T]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// Trains with mini-batch SGD and returns the final model and one record
/// per epoch. All randomness comes from `config.seed`.
pub fn train<T: Scalar>(
    model: Model<T>,
    train_set: &[LabeledExample<T>],
    test_set: &[LabeledExample<T>],
    config: &TrainConfig,
) -> Result<(Model<T>, Vec<EpochRecord>)> {
    train_with_progress(model, train_set, test_set, config, |_| {})
}

/// As [`train`], calling `on_epoch` after each epoch's evaluation.
pub fn train_with_progress<T: Scalar>(
    mut model: Model<T>,
    train_set: &[LabeledExample<T>],
    test_set: &[LabeledExample<T>],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Model<T>, Vec<EpochRecord>)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    if test_set.is_empty() {
        return Err(Error::Argument("test set is empty".into()));
    }
    let mut sgd = Sgd::new(&model, config.learning_rate, config.momentum);
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let order = if config.shuffle_each_epoch {
            batches(train_set.len(), config.batch_size, config.seed, epoch)?
        } else {
            sequential_batches((0..train_set.len()).collect(), config.batch_size)
        };
        for (b, batch) in order.iter().enumerate() {
            let (loss, grads) = batch_gradients(&model, train_set, batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss,
                });
            }
            sgd.step(&mut model, &grads)?;
        }
        let on_train = evaluate(&model, train_set)?;
        let on_test = evaluate(&model, test_set)?;
        if !on_train.loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: order.len(),
                loss: on_train.loss,
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss: on_train.loss,
            train_acc: on_train.accuracy,
            test_loss: on_test.loss,
            test_acc: on_test.accuracy,
        };
        on_epoch(&record);
        log.push(record);
    }
    Ok((model, log))
}
