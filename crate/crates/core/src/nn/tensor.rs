use serde::{Deserialize, Serialize};

use super::Scalar;

/// Dense row-major tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    /// Panics if the shape does not match the data length; shapes are wired
    /// by the model code, so a mismatch is a programming error.
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Self {
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            data.len(),
            "tensor shape {:?} does not match {} values",
            shape,
            data.len()
        );
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![F::zero(); numel],
        }
    }

    pub fn vector(data: Vec<F>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn scalar(v: F) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: vec![F::zero(); self.data.len()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows and columns of a 2-d tensor.
    pub fn dims2(&self) -> (usize, usize) {
        assert_eq!(self.shape.len(), 2, "expected 2-d tensor, got {:?}", self.shape);
        (self.shape[0], self.shape[1])
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Row `r` of a 2-d tensor.
    pub fn row(&self, r: usize) -> &[F] {
        let (rows, cols) = self.dims2();
        assert!(r < rows, "row {r} out of range for {rows} rows");
        &self.data[r * cols..(r + 1) * cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        let (rows, cols) = self.dims2();
        assert!(r < rows, "row {r} out of range for {rows} rows");
        &mut self.data[r * cols..(r + 1) * cols]
    }

    pub fn fill(&mut self, v: F) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}
