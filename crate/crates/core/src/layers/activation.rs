use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Element-wise `max(0, x)`.
pub fn relu_forward<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// Passes the gradient where the cached input was positive.
pub fn relu_backward<T: Scalar>(grad_out: &Tensor<T>, cached_input: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.check_same_shape(cached_input, "relu backward")?;
    let data = grad_out
        .data()
        .iter()
        .zip(cached_input.data())
        .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(grad_out.dims(), data)
}

/// Row-major flattening to a vector.
pub fn flatten<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.clone().reshape(&[input.len()]).expect("same element count")
}

/// Inverse of [`flatten`]; also the flatten backward pass.
pub fn unflatten<T: Scalar>(flat: &Tensor<T>, dims: &[usize]) -> Result<Tensor<T>> {
    flat.clone().reshape(dims)
}

/// Probabilities from logits, computed after subtracting the maximum logit.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.dims().len() != 1 {
        return Err(Error::Shape(format!(
            "softmax expects a vector, got {}",
            logits.shape()
        )));
    }
    let max = logits.data().iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let exps: Vec<T> = logits.data().iter().map(|&x| (x - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Tensor::from_vec(logits.dims(), exps.into_iter().map(|e| e / total).collect())
}

/// Vector-Jacobian product of softmax: `p ⊙ (g − ⟨g, p⟩)`.
pub fn softmax_backward<T: Scalar>(grad_out: &Tensor<T>, probs: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.check_same_shape(probs, "softmax backward")?;
    let inner: T = grad_out.data().iter().zip(probs.data()).map(|(&g, &p)| g * p).sum();
    let data = grad_out
        .data()
        .iter()
        .zip(probs.data())
        .map(|(&g, &p)| p * (g - inner))
        .collect();
    Tensor::from_vec(probs.dims(), data)
}
