//! Classification metrics: mean cross-entropy, accuracy, macro precision and
//! recall, and the confusion matrix.

use crate::data::LabeledExample;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::train::cross_entropy_loss;

/// Counts indexed `[true class][predicted class]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.classes..(truth + 1) * self.classes]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    /// Adds another matrix's counts; partial evaluations merge this way.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes, "merging matrices of different sizes");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    fn column_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    /// TP / (TP + FP) per class, 0 for a class that is never predicted.
    pub fn precision(&self, k: usize) -> f64 {
        ratio(self.get(k, k), self.column_sum(k))
    }

    /// TP / (TP + FN) per class, 0 for a class that never occurs.
    pub fn recall(&self, k: usize) -> f64 {
        ratio(self.get(k, k), self.row(k).iter().sum())
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub loss: f64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    /// Builds a report from per-example losses and a filled confusion matrix.
    ///
    /// Losses are summed in ascending order so the result does not depend on
    /// the order the examples were visited in.
    pub fn from_parts(mut losses: Vec<f64>, confusion: ConfusionMatrix) -> Result<Self> {
        let n = confusion.total();
        if n == 0 || losses.len() as u64 != n {
            return Err(Error::Argument(format!(
                "{} losses for {n} confusion entries",
                losses.len()
            )));
        }
        losses.sort_by(f64::total_cmp);
        let loss = losses.iter().sum::<f64>() / n as f64;
        let k = confusion.classes();
        let macro_precision = (0..k).map(|c| confusion.precision(c)).sum::<f64>() / k as f64;
        let macro_recall = (0..k).map(|c| confusion.recall(c)).sum::<f64>() / k as f64;
        Ok(EvalReport {
            loss,
            accuracy: confusion.trace() as f64 / n as f64,
            macro_precision,
            macro_recall,
            confusion,
        })
    }

    /// A report from hard predictions alone, with zero loss.
    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Argument(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut confusion = ConfusionMatrix::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::Argument(format!(
                    "class index out of range for {classes} classes"
                )));
            }
            confusion.record(t, p);
        }
        Self::from_parts(vec![0.0; truth.len()], confusion)
    }
}

/// Index of the largest probability; the first one wins ties.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Predicts every example and summarises the results.
pub fn evaluate<T: Scalar>(model: &Model<T>, examples: &[LabeledExample<T>]) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::Argument("cannot evaluate on an empty dataset".into()));
    }
    let mut confusion = ConfusionMatrix::new(model.class_count());
    let mut losses = Vec::with_capacity(examples.len());
    for ex in examples {
        let probs = model.forward(&ex.image)?;
        losses.push(cross_entropy_loss(&probs, ex.class_index)?.to_f64_lossy());
        confusion.record(ex.class_index, argmax(probs.data()));
    }
    EvalReport::from_parts(losses, confusion)
}
