use super::{DenseSpec, LayerParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub biases: Tensor<T>,
}

fn check<T: Scalar>(input: &Tensor<T>, spec: &DenseSpec, params: &LayerParams<T>) -> Result<()> {
    spec.validate()?;
    if input.dims() != [spec.in_features] {
        return Err(Error::Shape(format!(
            "dense layer expects a vector of {} features, got {}",
            spec.in_features,
            input.shape()
        )));
    }
    if params.weights.dims() != [spec.out_features, spec.in_features] || params.biases.dims() != [spec.out_features] {
        return Err(Error::Shape(format!(
            "dense parameters {} / {} do not match {}→{}",
            params.weights.shape(),
            params.biases.shape(),
            spec.in_features,
            spec.out_features
        )));
    }
    Ok(())
}

/// `W·x + b`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, spec: &DenseSpec, params: &LayerParams<T>) -> Result<Tensor<T>> {
    check(input, spec, params)?;
    let x = input.data();
    let out = params
        .weights
        .data()
        .chunks_exact(spec.in_features)
        .zip(params.biases.data())
        .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi))
        .collect();
    Tensor::from_vec(&[spec.out_features], out)
}

pub fn dense_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cached_input: &Tensor<T>,
    spec: &DenseSpec,
    params: &LayerParams<T>,
) -> Result<DenseGrads<T>> {
    check(cached_input, spec, params)?;
    if grad_out.dims() != [spec.out_features] {
        return Err(Error::Shape(format!(
            "dense output gradient {} does not match {} outputs",
            grad_out.shape(),
            spec.out_features
        )));
    }
    let x = cached_input.data();
    let n_in = spec.in_features;
    let mut gx = vec![T::zero(); n_in];
    let mut gw = vec![T::zero(); n_in * spec.out_features];
    for ((&d, wrow), gwrow) in grad_out
        .data()
        .iter()
        .zip(params.weights.data().chunks_exact(n_in))
        .zip(gw.chunks_exact_mut(n_in))
    {
        for i in 0..n_in {
            gwrow[i] = d * x[i];
            gx[i] += d * wrow[i];
        }
    }
    Ok(DenseGrads {
        input: Tensor::from_vec(&[n_in], gx)?,
        weights: Tensor::from_vec(&[spec.out_features, n_in], gw)?,
        biases: grad_out.clone(),
    })
}
