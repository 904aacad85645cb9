//! Dense row-major f64 tensors.
//!
//! Everything the style subsystem computes fits in small dense tensors of
//! rank 1–4, so the representation is a shape vector plus a flat buffer.
//! Arithmetic lives on the tape (see the `tape` module), which needs to
//! know every operation for differentiation; `Tensor` itself only stores,
//! indexes, and initializes.

use rand::Rng;

/// A dense row-major tensor of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a shape and its row-major data.
    ///
    /// Panics if the data length does not match the shape's element count.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Self {
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            data.len(),
            "shape {shape:?} holds {numel} elements, got {}",
            data.len()
        );
        Self { shape: shape.to_vec(), data }
    }

    /// All-zero tensor.
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    /// 1×1 tensor holding one value.
    pub fn scalar(value: f64) -> Self {
        Self::new(&[1, 1], vec![value])
    }

    /// Uniform random tensor on `(-limit, limit)`.
    pub fn uniform(shape: &[usize], limit: f64, rng: &mut impl Rng) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| rng.random_range(-limit..limit)).collect();
        Self { shape: shape.to_vec(), data }
    }

    /// The shape vector.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of elements.
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Flat row-major data.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable flat row-major data.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row count of a rank-2 tensor.
    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "rows() needs rank 2, got {:?}", self.shape);
        self.shape[0]
    }

    /// Column count of a rank-2 tensor.
    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() needs rank 2, got {:?}", self.shape);
        self.shape[1]
    }

    /// Element of a rank-2 tensor.
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    /// One row of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.cols();
        &self.data[i * cols..(i + 1) * cols]
    }

    /// The single value of a 1×1 tensor.
    pub fn scalar_value(&self) -> f64 {
        assert_eq!(self.numel(), 1, "scalar_value() needs one element, got {:?}", self.shape);
        self.data[0]
    }

    /// Whether every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
