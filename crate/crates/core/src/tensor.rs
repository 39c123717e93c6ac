//! Dense row-major tensors of rank 1 to 4.
//!
//! Images and activations are laid out height × width × channels, with the
//! last dimension varying fastest. There is no broadcasting: every binary
//! operation requires exactly matching shapes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_RANK: usize = 4;

/// Validated tensor dimensions.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_RANK {
            return Err(Error::Shape(format!(
                "rank must be between 1 and {MAX_RANK}, got {}",
                dims.len()
            )));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Shape(format!("dimension {pos} of {dims:?} is zero")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Size(format!("element count of {dims:?} overflows usize")))?;
        Ok(Shape(dims.to_vec()))
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.0.len()
    }

    /// Number of elements (product of dims).
    #[inline]
    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Row-major flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.0.len() {
            return Err(Error::Shape(format!(
                "index {index:?} has rank {}, shape {self} has rank {}",
                index.len(),
                self.rank()
            )));
        }
        let mut flat = 0;
        for (&i, &d) in index.iter().zip(&self.0) {
            if i >= d {
                return Err(Error::Shape(format!("index {index:?} out of bounds for {self}")));
            }
            flat = flat * d + i;
        }
        Ok(flat)
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::new(&dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(shape: Shape) -> Self {
        shape.0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A dense tensor with an explicit shape.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// A tensor with every entry equal to `fill`.
    pub fn new(shape: Shape, fill: T) -> Result<Self> {
        let n = shape.numel();
        let bytes = n.checked_mul(std::mem::size_of::<T>());
        if bytes.is_none_or(|b| b > isize::MAX as usize) {
            return Err(Error::Size(format!("{shape} is too large to allocate")));
        }
        Ok(Tensor {
            shape,
            data: vec![fill; n],
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::new(Shape::new(dims)?, T::zero())
    }

    pub fn from_vec(dims: &[usize], data: Vec<T>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != data.len() {
            return Err(Error::Shape(format!("{} values cannot fill shape {shape}", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut t = Self::zeros(&[n, n])?;
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        Ok(t)
    }

    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Result<T> {
        Ok(self.data[self.shape.offset(index)?])
    }

    /// Same data under a new shape with equal element count.
    pub fn reshape(self, dims: &[usize]) -> Result<Self> {
        Self::from_vec(dims, self.data)
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        let (m, k) = as_matrix(self)?;
        let (k2, n) = as_matrix(rhs)?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions differ: {} × {}",
                self.shape, rhs.shape
            )));
        }
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for (p, &a) in self.data[i * k..(i + 1) * k].iter().enumerate() {
                for (o, &b) in row.iter_mut().zip(&rhs.data[p * n..(p + 1) * n]) {
                    *o += a * b;
                }
            }
        }
        Self::from_vec(&[m, n], out)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Element-wise conversion to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| U::of(x.to_f64_lossy())).collect(),
        }
    }

    pub(crate) fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{what}: shape {} does not match {}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }
}

fn as_matrix<T>(t: &Tensor<T>) -> Result<(usize, usize)> {
    match t.shape.dims() {
        &[m, n] => Ok((m, n)),
        _ => Err(Error::Shape(format!("expected a matrix, got shape {}", t.shape))),
    }
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}
