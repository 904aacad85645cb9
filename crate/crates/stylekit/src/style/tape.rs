//! Reverse-mode automatic differentiation on a flat tape.
//!
//! The style subsystem is small enough that a hand-rolled tape beats a
//! framework: every operation the models need is one enum variant with an
//! explicit forward value and an explicit adjoint rule, which keeps the
//! finite-difference gradient checks honest — there is no fused kernel or
//! hidden rewrite between what runs and what the checks differentiate.
//!
//! Values are computed eagerly as operations are recorded; `backward` walks
//! the tape once in reverse, accumulating adjoints. Shape agreement between
//! operations is an internal invariant (public model APIs validate their
//! inputs first), so shape violations panic rather than returning errors.
//!
//! Two rules matter for correctness elsewhere:
//!
//! - `stop_grad` copies a value and propagates nothing, which implements
//!   the freeze of the L1 target exactly (not approximately).
//! - `logsumexp_rows` is evaluated in shifted form. Entries of `-1e30`
//!   (used to mask self-similarities in the contrastive loss) underflow to
//!   an exact 0 contribution in both the value and the adjoint, so masking
//!   by additive constant is exact, not merely numerically negligible.

use super::tensor::Tensor;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Var(usize);

enum Op {
    Leaf,
    StopGrad,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    Tanh(Var),
    Abs(Var),
    SoftmaxRows(Var),
    L2NormalizeRows(Var),
    LogSumExpRows(Var),
    RowSums(Var),
    MeanAll(Var),
    MeanRows(Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize, usize),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    Conv2d { input: Var, weight: Var, stride: usize },
    AddChannelBias(Var, Var),
    ChwToSeq(Var),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Adjoints produced by one backward pass.
pub(crate) struct Gradients(Vec<Option<Tensor>>);

impl Gradients {
    /// Removes and returns a variable's adjoint.
    pub(crate) fn take(&mut self, var: Var) -> Option<Tensor> {
        self.0[var.0].take()
    }
}

/// A forward computation recorded for differentiation.
pub(crate) struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub(crate) fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Value of a variable.
    pub(crate) fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Records an input (parameter or data) tensor.
    pub(crate) fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    /// Copies a value and blocks gradient flow through it.
    pub(crate) fn stop_grad(&mut self, a: Var) -> Var {
        let value = self.value(a).clone();
        self.push(Op::StopGrad, value)
    }

    /// Elementwise sum of two same-shape tensors.
    pub(crate) fn add(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "add shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(ta.shape(), data);
        self.push(Op::Add(a, b), value)
    }

    /// Elementwise difference.
    pub(crate) fn sub(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "sub shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x - y).collect();
        let value = Tensor::new(ta.shape(), data);
        self.push(Op::Sub(a, b), value)
    }

    /// Elementwise product.
    pub(crate) fn mul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "mul shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(ta.shape(), data);
        self.push(Op::Mul(a, b), value)
    }

    /// Multiplication by a constant.
    pub(crate) fn scale(&mut self, a: Var, factor: f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x * factor).collect();
        let value = Tensor::new(ta.shape(), data);
        self.push(Op::Scale(a, factor), value)
    }

    /// Adds a `[1 × c]` row vector to every row of an `[r × c]` matrix.
    pub(crate) fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (ta, tr) = (self.value(a), self.value(row));
        assert_eq!(tr.rows(), 1, "add_row needs a [1 x c] row");
        assert_eq!(ta.cols(), tr.cols(), "add_row width mismatch");
        let cols = ta.cols();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(k, x)| x + tr.data()[k % cols])
            .collect();
        let value = Tensor::new(ta.shape(), data);
        self.push(Op::AddRow(a, row), value)
    }

    /// Matrix product `[m × k] · [k × n]`.
    pub(crate) fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.cols(), tb.rows(), "matmul inner dimension mismatch");
        let value = matmul_values(ta, tb);
        self.push(Op::MatMul(a, b), value)
    }

    /// Matrix transpose.
    pub(crate) fn transpose(&mut self, a: Var) -> Var {
        let value = transpose_values(self.value(a));
        self.push(Op::Transpose(a), value)
    }

    /// Elementwise hyperbolic tangent.
    pub(crate) fn tanh(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x.tanh()).collect();
        let value = Tensor::new(ta.shape(), data);
        self.push(Op::Tanh(a), value)
    }

    /// Elementwise absolute value.
    pub(crate) fn abs(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x.abs()).collect();
        let value = Tensor::new(ta.shape(), data);
        self.push(Op::Abs(a), value)
    }

    /// Row-wise softmax (numerically stable shifted form).
    pub(crate) fn softmax_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (rows, cols) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            let row = ta.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in 0..cols {
                let e = (row[j] - max).exp();
                data[i * cols + j] = e;
                total += e;
            }
            for j in 0..cols {
                data[i * cols + j] /= total;
            }
        }
        let value = Tensor::new(ta.shape(), data);
        self.push(Op::SoftmaxRows(a), value)
    }

    /// Scales every row to unit Euclidean norm.
    ///
    /// Panics on a zero-norm row; callers validate inputs first.
    pub(crate) fn l2_normalize_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (rows, cols) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            let norm = row_norm(ta.row(i));
            assert!(norm > 0.0, "l2_normalize_rows: zero-norm row {i}");
            for j in 0..cols {
                data[i * cols + j] = ta.at2(i, j) / norm;
            }
        }
        let value = Tensor::new(ta.shape(), data);
        self.push(Op::L2NormalizeRows(a), value)
    }

    /// Row-wise `log Σ exp`, shifted by the row maximum; result `[r × 1]`.
    pub(crate) fn logsumexp_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let rows = ta.rows();
        let mut data = vec![0.0; rows];
        for i in 0..rows {
            let row = ta.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|x| (x - max).exp()).sum();
            data[i] = max + sum.ln();
        }
        let value = Tensor::new(&[rows, 1], data);
        self.push(Op::LogSumExpRows(a), value)
    }

    /// Row sums; result `[r × 1]`.
    pub(crate) fn row_sums(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let rows = ta.rows();
        let data = (0..rows).map(|i| ta.row(i).iter().sum()).collect();
        let value = Tensor::new(&[rows, 1], data);
        self.push(Op::RowSums(a), value)
    }

    /// Mean of all entries; result `[1 × 1]`.
    pub(crate) fn mean_all(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let mean = ta.data().iter().sum::<f64>() / ta.numel() as f64;
        self.push(Op::MeanAll(a), Tensor::scalar(mean))
    }

    /// Column-wise mean over rows; result `[1 × c]`.
    pub(crate) fn mean_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (rows, cols) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; cols];
        for i in 0..rows {
            for j in 0..cols {
                data[j] += ta.at2(i, j);
            }
        }
        for d in &mut data {
            *d /= rows as f64;
        }
        let value = Tensor::new(&[1, cols], data);
        self.push(Op::MeanRows(a), value)
    }

    /// Rows `r0..r1` of a matrix.
    pub(crate) fn slice_rows(&mut self, a: Var, r0: usize, r1: usize) -> Var {
        let ta = self.value(a);
        assert!(r0 < r1 && r1 <= ta.rows(), "slice_rows range {r0}..{r1} of {}", ta.rows());
        let cols = ta.cols();
        let data = ta.data()[r0 * cols..r1 * cols].to_vec();
        let value = Tensor::new(&[r1 - r0, cols], data);
        self.push(Op::SliceRows(a, r0), value)
    }

    /// Columns `c0..c1` of a matrix.
    pub(crate) fn slice_cols(&mut self, a: Var, c0: usize, c1: usize) -> Var {
        let ta = self.value(a);
        assert!(c0 < c1 && c1 <= ta.cols(), "slice_cols range {c0}..{c1} of {}", ta.cols());
        let (rows, cols) = (ta.rows(), ta.cols());
        let mut data = Vec::with_capacity(rows * (c1 - c0));
        for i in 0..rows {
            data.extend_from_slice(&ta.data()[i * cols + c0..i * cols + c1]);
        }
        let value = Tensor::new(&[rows, c1 - c0], data);
        self.push(Op::SliceCols(a, c0, c1), value)
    }

    /// Vertical concatenation of equal-width matrices.
    pub(crate) fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let cols = self.value(parts[0]).cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for &part in parts {
            let tp = self.value(part);
            assert_eq!(tp.cols(), cols, "concat_rows width mismatch");
            rows += tp.rows();
            data.extend_from_slice(tp.data());
        }
        let value = Tensor::new(&[rows, cols], data);
        self.push(Op::ConcatRows(parts.to_vec()), value)
    }

    /// Horizontal concatenation of equal-height matrices.
    pub(crate) fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let rows = self.value(parts[0]).rows();
        let total_cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total_cols);
        for i in 0..rows {
            for &part in parts {
                let tp = self.value(part);
                assert_eq!(tp.rows(), rows, "concat_cols height mismatch");
                data.extend_from_slice(tp.row(i));
            }
        }
        let value = Tensor::new(&[rows, total_cols], data);
        self.push(Op::ConcatCols(parts.to_vec()), value)
    }

    /// Stacks the given rows of a matrix, in index order (repeats allowed).
    pub(crate) fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Var {
        let ta = self.value(a);
        assert!(!indices.is_empty(), "gather_rows of nothing");
        let cols = ta.cols();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &idx in indices {
            assert!(idx < ta.rows(), "gather_rows index {idx} of {}", ta.rows());
            data.extend_from_slice(ta.row(idx));
        }
        let value = Tensor::new(&[indices.len(), cols], data);
        self.push(Op::GatherRows(a, indices.to_vec()), value)
    }

    /// Valid (no padding) strided 2-D convolution.
    ///
    /// Input `[C_in × H × W]`, weight `[C_out × C_in × kh × kw]`, output
    /// `[C_out × H' × W']` with `H' = (H − kh)/stride + 1` (floor).
    pub(crate) fn conv2d(&mut self, input: Var, weight: Var, stride: usize) -> Var {
        let (ti, tw) = (self.value(input), self.value(weight));
        let value = conv2d_values(ti, tw, stride);
        self.push(Op::Conv2d { input, weight, stride }, value)
    }

    /// Adds a per-channel bias `[C]` to a `[C × H × W]` tensor.
    pub(crate) fn add_channel_bias(&mut self, a: Var, bias: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(bias));
        assert_eq!(ta.shape().len(), 3, "add_channel_bias needs rank 3");
        assert_eq!(tb.shape(), [ta.shape()[0]], "bias length mismatch");
        let plane = ta.shape()[1] * ta.shape()[2];
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(k, x)| x + tb.data()[k / plane])
            .collect();
        let value = Tensor::new(ta.shape(), data);
        self.push(Op::AddChannelBias(a, bias), value)
    }

    /// Reshapes `[C × H × W]` into a `[H × C·W]` sequence: one row per time
    /// step `H`, features ordered channel-major then width.
    pub(crate) fn chw_to_seq(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        assert_eq!(ta.shape().len(), 3, "chw_to_seq needs rank 3");
        let (c, h, w) = (ta.shape()[0], ta.shape()[1], ta.shape()[2]);
        let mut data = vec![0.0; c * h * w];
        for ci in 0..c {
            for hi in 0..h {
                for wi in 0..w {
                    data[hi * (c * w) + ci * w + wi] = ta.data()[ci * h * w + hi * w + wi];
                }
            }
        }
        let value = Tensor::new(&[h, c * w], data);
        self.push(Op::ChwToSeq(a), value)
    }

    /// Backpropagates from a scalar root, returning all adjoints.
    pub(crate) fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.value(root).numel(), 1, "backward needs a scalar root");
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::new(self.value(root).shape(), vec![1.0]));

        for idx in (0..self.nodes.len()).rev() {
            let Some(grad) = grads[idx].take() else { continue };
            // Re-store the adjoint so callers can read intermediate grads.
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf | Op::StopGrad => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, grad.clone());
                    accumulate(&mut grads, *b, grad.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, grad.clone());
                    let neg = map_new(&grad, |g| -g);
                    accumulate(&mut grads, *b, neg);
                }
                Op::Mul(a, b) => {
                    let ga = zip_new(&grad, self.value(*b), |g, y| g * y);
                    let gb = zip_new(&grad, self.value(*a), |g, x| g * x);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, factor) => {
                    accumulate(&mut grads, *a, map_new(&grad, |g| g * factor));
                }
                Op::AddRow(a, row) => {
                    accumulate(&mut grads, *a, grad.clone());
                    let cols = self.value(*row).cols();
                    let mut row_grad = vec![0.0; cols];
                    for (k, g) in grad.data().iter().enumerate() {
                        row_grad[k % cols] += g;
                    }
                    accumulate(&mut grads, *row, Tensor::new(&[1, cols], row_grad));
                }
                Op::MatMul(a, b) => {
                    let bt = transpose_values(self.value(*b));
                    let at = transpose_values(self.value(*a));
                    accumulate(&mut grads, *a, matmul_values(&grad, &bt));
                    accumulate(&mut grads, *b, matmul_values(&at, &grad));
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads, *a, transpose_values(&grad));
                }
                Op::Tanh(a) => {
                    let gx = zip_new(&grad, &node.value, |g, y| g * (1.0 - y * y));
                    accumulate(&mut grads, *a, gx);
                }
                Op::Abs(a) => {
                    let gx = zip_new(&grad, self.value(*a), |g, x| g * sign(x));
                    accumulate(&mut grads, *a, gx);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let (rows, cols) = (y.rows(), y.cols());
                    let mut gx = vec![0.0; rows * cols];
                    for i in 0..rows {
                        let dot: f64 = (0..cols)
                            .map(|j| grad.at2(i, j) * y.at2(i, j))
                            .sum();
                        for j in 0..cols {
                            gx[i * cols + j] = y.at2(i, j) * (grad.at2(i, j) - dot);
                        }
                    }
                    accumulate(&mut grads, *a, Tensor::new(y.shape(), gx));
                }
                Op::L2NormalizeRows(a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let (rows, cols) = (y.rows(), y.cols());
                    let mut gx = vec![0.0; rows * cols];
                    for i in 0..rows {
                        let norm = row_norm(x.row(i));
                        let dot: f64 = (0..cols)
                            .map(|j| grad.at2(i, j) * y.at2(i, j))
                            .sum();
                        for j in 0..cols {
                            gx[i * cols + j] =
                                (grad.at2(i, j) - dot * y.at2(i, j)) / norm;
                        }
                    }
                    accumulate(&mut grads, *a, Tensor::new(x.shape(), gx));
                }
                Op::LogSumExpRows(a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let (rows, cols) = (x.rows(), x.cols());
                    let mut gx = vec![0.0; rows * cols];
                    for i in 0..rows {
                        for j in 0..cols {
                            // softmax weight; underflows to exact 0 for
                            // heavily masked entries.
                            gx[i * cols + j] =
                                grad.at2(i, 0) * (x.at2(i, j) - y.at2(i, 0)).exp();
                        }
                    }
                    accumulate(&mut grads, *a, Tensor::new(x.shape(), gx));
                }
                Op::RowSums(a) => {
                    let x = self.value(*a);
                    let (rows, cols) = (x.rows(), x.cols());
                    let mut gx = vec![0.0; rows * cols];
                    for i in 0..rows {
                        for j in 0..cols {
                            gx[i * cols + j] = grad.at2(i, 0);
                        }
                    }
                    accumulate(&mut grads, *a, Tensor::new(x.shape(), gx));
                }
                Op::MeanAll(a) => {
                    let x = self.value(*a);
                    let g = grad.scalar_value() / x.numel() as f64;
                    accumulate(&mut grads, *a, Tensor::new(x.shape(), vec![g; x.numel()]));
                }
                Op::MeanRows(a) => {
                    let x = self.value(*a);
                    let (rows, cols) = (x.rows(), x.cols());
                    let mut gx = vec![0.0; rows * cols];
                    for i in 0..rows {
                        for j in 0..cols {
                            gx[i * cols + j] = grad.at2(0, j) / rows as f64;
                        }
                    }
                    accumulate(&mut grads, *a, Tensor::new(x.shape(), gx));
                }
                Op::SliceRows(a, r0) => {
                    let x = self.value(*a);
                    let cols = x.cols();
                    let mut gx = Tensor::zeros(x.shape());
                    let offset = r0 * cols;
                    gx.data_mut()[offset..offset + grad.numel()]
                        .copy_from_slice(grad.data());
                    accumulate(&mut grads, *a, gx);
                }
                Op::SliceCols(a, c0, c1) => {
                    let x = self.value(*a);
                    let (rows, cols) = (x.rows(), x.cols());
                    let width = c1 - c0;
                    let mut gx = Tensor::zeros(x.shape());
                    for i in 0..rows {
                        for j in 0..width {
                            gx.data_mut()[i * cols + c0 + j] = grad.at2(i, j);
                        }
                    }
                    accumulate(&mut grads, *a, gx);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &part in parts {
                        let tp = self.value(part);
                        let span = tp.numel();
                        let slice = grad.data()[offset..offset + span].to_vec();
                        accumulate(&mut grads, part, Tensor::new(tp.shape(), slice));
                        offset += span;
                    }
                }
                Op::ConcatCols(parts) => {
                    let rows = node.value.rows();
                    let mut col_offset = 0;
                    for &part in parts {
                        let tp = self.value(part);
                        let width = tp.cols();
                        let mut gp = Vec::with_capacity(rows * width);
                        for i in 0..rows {
                            for j in 0..width {
                                gp.push(grad.at2(i, col_offset + j));
                            }
                        }
                        accumulate(&mut grads, part, Tensor::new(tp.shape(), gp));
                        col_offset += width;
                    }
                }
                Op::GatherRows(a, indices) => {
                    let x = self.value(*a);
                    let cols = x.cols();
                    let mut gx = Tensor::zeros(x.shape());
                    for (k, &idx) in indices.iter().enumerate() {
                        for j in 0..cols {
                            gx.data_mut()[idx * cols + j] += grad.at2(k, j);
                        }
                    }
                    accumulate(&mut grads, *a, gx);
                }
                Op::Conv2d { input, weight, stride } => {
                    let (gi, gw) =
                        conv2d_backward(self.value(*input), self.value(*weight), *stride, &grad);
                    accumulate(&mut grads, *input, gi);
                    accumulate(&mut grads, *weight, gw);
                }
                Op::AddChannelBias(a, bias) => {
                    accumulate(&mut grads, *a, grad.clone());
                    let shape = self.value(*a).shape().to_vec();
                    let plane = shape[1] * shape[2];
                    let mut gb = vec![0.0; shape[0]];
                    for (k, g) in grad.data().iter().enumerate() {
                        gb[k / plane] += g;
                    }
                    accumulate(&mut grads, *bias, Tensor::new(&[shape[0]], gb));
                }
                Op::ChwToSeq(a) => {
                    let x = self.value(*a);
                    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                    let mut gx = vec![0.0; c * h * w];
                    for ci in 0..c {
                        for hi in 0..h {
                            for wi in 0..w {
                                gx[ci * h * w + hi * w + wi] =
                                    grad.data()[hi * (c * w) + ci * w + wi];
                            }
                        }
                    }
                    accumulate(&mut grads, *a, Tensor::new(x.shape(), gx));
                }
            }
            grads[idx] = Some(grad);
        }
        Gradients(grads)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn map_new(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(t.shape(), t.data().iter().map(|&x| f(x)).collect())
}

fn zip_new(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    assert_eq!(a.shape(), b.shape(), "zip shape mismatch");
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape(), data)
}

fn matmul_values(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    assert_eq!(k, b.rows(), "matmul inner dimension mismatch");
    let mut data = vec![0.0; m * n];
    for i in 0..m {
        for l in 0..k {
            let left = a.at2(i, l);
            if left == 0.0 {
                continue;
            }
            for j in 0..n {
                data[i * n + j] += left * b.at2(l, j);
            }
        }
    }
    Tensor::new(&[m, n], data)
}

fn transpose_values(a: &Tensor) -> Tensor {
    let (rows, cols) = (a.rows(), a.cols());
    let mut data = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            data[j * rows + i] = a.at2(i, j);
        }
    }
    Tensor::new(&[cols, rows], data)
}

fn conv2d_values(input: &Tensor, weight: &Tensor, stride: usize) -> Tensor {
    assert!(stride > 0, "conv2d stride must be positive");
    assert_eq!(input.shape().len(), 3, "conv2d input must be [C x H x W]");
    assert_eq!(weight.shape().len(), 4, "conv2d weight must be [O x C x kh x kw]");
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (c_out, wc, kh, kw) =
        (weight.shape()[0], weight.shape()[1], weight.shape()[2], weight.shape()[3]);
    assert_eq!(c_in, wc, "conv2d channel mismatch");
    assert!(h >= kh && w >= kw, "conv2d input {h}x{w} smaller than kernel {kh}x{kw}");
    let h_out = (h - kh) / stride + 1;
    let w_out = (w - kw) / stride + 1;
    let mut data = vec![0.0; c_out * h_out * w_out];
    for o in 0..c_out {
        for oh in 0..h_out {
            for ow in 0..w_out {
                let mut acc = 0.0;
                for c in 0..c_in {
                    for dh in 0..kh {
                        for dw in 0..kw {
                            let iv = input.data()
                                [c * h * w + (oh * stride + dh) * w + (ow * stride + dw)];
                            let wv = weight.data()
                                [o * c_in * kh * kw + c * kh * kw + dh * kw + dw];
                            acc += iv * wv;
                        }
                    }
                }
                data[o * h_out * w_out + oh * w_out + ow] = acc;
            }
        }
    }
    Tensor::new(&[c_out, h_out, w_out], data)
}

fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    stride: usize,
    grad: &Tensor,
) -> (Tensor, Tensor) {
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (c_out, kh, kw) = (weight.shape()[0], weight.shape()[2], weight.shape()[3]);
    let (h_out, w_out) = (grad.shape()[1], grad.shape()[2]);
    let mut gi = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weight.shape());
    for o in 0..c_out {
        for oh in 0..h_out {
            for ow in 0..w_out {
                let g = grad.data()[o * h_out * w_out + oh * w_out + ow];
                if g == 0.0 {
                    continue;
                }
                for c in 0..c_in {
                    for dh in 0..kh {
                        for dw in 0..kw {
                            let i_idx =
                                c * h * w + (oh * stride + dh) * w + (ow * stride + dw);
                            let w_idx =
                                o * c_in * kh * kw + c * kh * kw + dh * kw + dw;
                            gi.data_mut()[i_idx] += g * weight.data()[w_idx];
                            gw.data_mut()[w_idx] += g * input.data()[i_idx];
                        }
                    }
                }
            }
        }
    }
    (gi, gw)
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, tensor: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => {
            assert_eq!(existing.shape(), tensor.shape(), "gradient shape mismatch");
            for (e, t) in existing.data_mut().iter_mut().zip(tensor.data()) {
                *e += t;
            }
        }
        slot @ None => *slot = Some(tensor),
    }
}
