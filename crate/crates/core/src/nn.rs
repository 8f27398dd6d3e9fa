//! Single dense layer, losses and plain SGD.
//!
//! These are the exact-gradient pieces: the baseline trainer uses them
//! directly and the approximate trainers use them for everything except the
//! weight-gradient product.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `output = x · w + b`, with `w` shaped `input_dim × output_dim`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub w: Matrix,
    pub b: Vec<f64>,
    cached_input: Option<Matrix>,
}

/// Exact gradients of one backward pass.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(w: Matrix, b: Vec<f64>) -> Result<Self> {
        if b.len() != w.cols() {
            return Err(Error::dims(
                "DenseLayer::new",
                format!("bias has {} entries for {} outputs", b.len(), w.cols()),
            ));
        }
        if !w.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters"));
        }
        Ok(Self {
            w,
            b,
            cached_input: None,
        })
    }

    /// Glorot-uniform weights in `±√(6 / (n + p))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (input_dim + output_dim) as f64).sqrt();
        let w = Matrix::from_fn(input_dim, output_dim, |_, _| rng.random_range(-limit..limit));
        Self {
            w,
            b: vec![0.0; output_dim],
            cached_input: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn has_cached_input(&self) -> bool {
        self.cached_input.is_some()
    }

    /// Forward pass without touching the cache.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::dims(
                "dense_forward",
                format!("input has {} features, layer expects {}", x.cols(), self.input_dim()),
            ));
        }
        let mut out = x.matmul(&self.w)?;
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(&self.b) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Forward pass that keeps `x` for the backward pass.
    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let out = self.predict(x)?;
        self.cached_input = Some(x.clone());
        Ok(out)
    }

    fn check_grad(&self, g_out: &Matrix, op: &'static str) -> Result<()> {
        if g_out.cols() != self.output_dim() {
            return Err(Error::dims(
                op,
                format!("gradient has {} columns, layer has {} outputs", g_out.cols(), self.output_dim()),
            ));
        }
        Ok(())
    }

    /// `g_out · wᵀ`, the gradient handed to a preceding layer.
    pub fn backprop_input_grad(&self, g_out: &Matrix) -> Result<Matrix> {
        self.check_grad(g_out, "backprop_input_grad")?;
        g_out.matmul(&self.w.transpose())
    }

    /// `xᵀ · g_out` using the cached forward input.
    pub fn backprop_weight_grad(&self, g_out: &Matrix) -> Result<Matrix> {
        self.check_grad(g_out, "backprop_weight_grad")?;
        let x = self.cached_input.as_ref().ok_or(Error::NoCachedInput)?;
        if x.rows() != g_out.rows() {
            return Err(Error::dims(
                "backprop_weight_grad",
                format!("{} cached rows vs {} gradient rows", x.rows(), g_out.rows()),
            ));
        }
        x.transpose().matmul(g_out)
    }

    pub fn bias_grad(&self, g_out: &Matrix) -> Result<Vec<f64>> {
        self.check_grad(g_out, "bias_grad")?;
        Ok(g_out.col_sums())
    }

    /// Exact backward pass; consumes the cached input.
    pub fn backward(&mut self, g_out: &Matrix) -> Result<LayerGrads> {
        let weight = self.backprop_weight_grad(g_out)?;
        let bias = self.bias_grad(g_out)?;
        self.cached_input = None;
        Ok(LayerGrads { weight, bias })
    }

    /// Hands out the cached input and clears it, for trainers that form the
    /// weight gradient themselves.
    pub fn take_input(&mut self) -> Result<Matrix> {
        self.cached_input.take().ok_or(Error::NoCachedInput)
    }

    pub fn apply_bias_step(&mut self, bias_grad: &[f64], eta: f64) {
        for (b, g) in self.b.iter_mut().zip(bias_grad) {
            *b -= eta * g;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    MeanSquaredError,
    SoftmaxCrossEntropy,
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn one_hot_label(row: &[f64]) -> Option<usize> {
    let mut label = None;
    for (j, &v) in row.iter().enumerate() {
        if v == 1.0 {
            if label.is_some() {
                return None;
            }
            label = Some(j);
        } else if v != 0.0 {
            return None;
        }
    }
    label
}

/// Mean-reduced loss and its gradient with respect to `output`.
///
/// For cross-entropy, `output` holds logits; the softmax is applied here.
pub fn loss_and_output_grad(kind: LossKind, output: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if output.shape() != target.shape() {
        return Err(Error::dims(
            "loss_and_output_grad",
            format!(
                "output {}x{} vs target {}x{}",
                output.rows(),
                output.cols(),
                target.rows(),
                target.cols()
            ),
        ));
    }
    let (m, p) = output.shape();
    match kind {
        LossKind::MeanSquaredError => {
            let n = (m * p) as f64;
            let diff = output.sub(target)?;
            let loss = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / n;
            Ok((loss, diff.scale(2.0 / n)))
        }
        LossKind::SoftmaxCrossEntropy => {
            let mut labels = Vec::with_capacity(m);
            for i in 0..m {
                labels.push(one_hot_label(target.row(i)).ok_or_else(|| {
                    Error::InvalidArgument(format!("cross-entropy target row {i} is not one-hot"))
                })?);
            }
            let mut loss = 0.0;
            for (i, &y) in labels.iter().enumerate() {
                let row = output.row(i);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
                loss += lse - row[y];
            }
            let mut grad = softmax_rows(output);
            for (i, &y) in labels.iter().enumerate() {
                grad.row_mut(i)[y] -= 1.0;
            }
            Ok((loss / m as f64, grad.scale(1.0 / m as f64)))
        }
    }
}

/// `w − eta · grad`.
pub fn sgd_update(w: &Matrix, grad: &Matrix, eta: f64) -> Result<Matrix> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {eta}")));
    }
    let mut out = w.clone();
    out.axpy(-eta, grad)?;
    Ok(out)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Fraction of rows whose argmax agrees with the target's argmax. Ties go to
/// the smallest index.
pub fn accuracy(output: &Matrix, target: &Matrix) -> Result<f64> {
    if output.shape() != target.shape() {
        return Err(Error::dims(
            "accuracy",
            format!(
                "output {}x{} vs target {}x{}",
                output.rows(),
                output.cols(),
                target.rows(),
                target.cols()
            ),
        ));
    }
    let correct = (0..output.rows())
        .filter(|&i| argmax(output.row(i)) == argmax(target.row(i)))
        .count();
    Ok(correct as f64 / output.rows() as f64)
}
