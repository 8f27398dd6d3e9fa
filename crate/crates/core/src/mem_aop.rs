//! Approximate outer-product gradient descent with memory.
//!
//! For a dense layer the weight gradient is `Xᵀ G = Σ_m X[m, :]ᵀ ⊗ G[m, :]`,
//! one outer product per batch sample. Each step evaluates only `K` of them.
//! The rows that were not evaluated are kept in two memory matrices and added
//! back (error feedback) on the next step:
//!
//! ```text
//! X̂ = m_X + √η X        Ĝ = m_G + √η G
//! 𝒦 = select(X̂, Ĝ)
//! W ← W − Σ_{k∈𝒦} X̂[k, :]ᵀ ⊗ Ĝ[k, :]
//! m_X[k] ← X̂[k], m_G[k] ← Ĝ[k]   for k ∉ 𝒦   (rows in 𝒦 are cleared)
//! ```
//!
//! The learning rate enters through `√η` on both factors, so the update
//! carries no further `η`.

use rand::Rng;

use crate::approx_matmul::{
    outer_product_weights, sampled_outer_matmul, IndexSet, Selection, SelectionPolicy,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemAopConfig {
    pub policy: SelectionPolicy,
    pub learning_rate: f64,
    pub use_memory: bool,
}

impl MemAopConfig {
    pub fn new(policy: SelectionPolicy, learning_rate: f64, use_memory: bool) -> Result<Self> {
        if !learning_rate.is_finite() || learning_rate <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            policy,
            learning_rate,
            use_memory,
        })
    }
}

/// Memory-augmented batch matrices `(X̂, Ĝ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPair {
    pub x_hat: Matrix,
    pub g_hat: Matrix,
}

/// What one [`MemAopState::step`] did.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub selection: IndexSet,
    /// The applied update `Ŵ*` (already includes the learning rate).
    pub update: Matrix,
    /// Distinct outer products evaluated.
    pub outer_products: usize,
}

/// Per-layer memory. The batch size is fixed for the lifetime of the state.
#[derive(Debug, Clone)]
pub struct MemAopState {
    mem_x: Matrix,
    mem_g: Matrix,
    t: u64,
}

impl MemAopState {
    /// Zeroed memories for batches of `batch_size` rows.
    pub fn new(batch_size: usize, input_dim: usize, output_dim: usize) -> Self {
        Self {
            mem_x: Matrix::zeros(batch_size, input_dim),
            mem_g: Matrix::zeros(batch_size, output_dim),
            t: 0,
        }
    }

    pub fn mem_x(&self) -> &Matrix {
        &self.mem_x
    }

    pub fn mem_g(&self) -> &Matrix {
        &self.mem_g
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    pub fn batch_size(&self) -> usize {
        self.mem_x.rows()
    }

    fn check_batch(&self, x: &Matrix, g: &Matrix) -> Result<()> {
        if x.shape() != self.mem_x.shape() || g.shape() != self.mem_g.shape() {
            return Err(Error::dims(
                "mem_aop",
                format!(
                    "state expects X {}x{} and G {}x{}, got X {}x{} and G {}x{}",
                    self.mem_x.rows(),
                    self.mem_x.cols(),
                    self.mem_g.rows(),
                    self.mem_g.cols(),
                    x.rows(),
                    x.cols(),
                    g.rows(),
                    g.cols()
                ),
            ));
        }
        Ok(())
    }

    /// `(m_X + √η X, m_G + √η G)`; the state is not modified.
    pub fn augment(&self, x: &Matrix, g: &Matrix, eta: f64) -> Result<AugmentedPair> {
        self.check_batch(x, g)?;
        if eta.is_nan() || eta <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {eta}"
            )));
        }
        let s = eta.sqrt();
        let mut x_hat = self.mem_x.clone();
        x_hat.axpy(s, x)?;
        let mut g_hat = self.mem_g.clone();
        g_hat.axpy(s, g)?;
        Ok(AugmentedPair { x_hat, g_hat })
    }

    /// One update of `w` from batch input `x` and output gradient `g`.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        config: &MemAopConfig,
        w: &mut Matrix,
        x: &Matrix,
        g: &Matrix,
        rng: &mut R,
    ) -> Result<StepReport> {
        self.check_batch(x, g)?;
        if w.shape() != (x.cols(), g.cols()) {
            return Err(Error::dims(
                "mem_aop step",
                format!(
                    "weights are {}x{} but the batch implies {}x{}",
                    w.rows(),
                    w.cols(),
                    x.cols(),
                    g.cols()
                ),
            ));
        }
        let pair = self.augment(x, g, config.learning_rate)?;
        let x_hat_t = pair.x_hat.transpose();
        let weights = outer_product_weights(&x_hat_t, &pair.g_hat)?;
        let Selection { set, scaling } = config.policy.select(&weights, rng)?;
        let update = sampled_outer_matmul(&x_hat_t, &pair.g_hat, &set, scaling.as_deref())?;
        w.axpy(-1.0, &update)?;

        if config.use_memory {
            let AugmentedPair {
                mut x_hat,
                mut g_hat,
            } = pair;
            for &k in set.indices() {
                x_hat.fill_row(k, 0.0);
                g_hat.fill_row(k, 0.0);
            }
            self.mem_x = x_hat;
            self.mem_g = g_hat;
        }
        self.t += 1;

        Ok(StepReport {
            outer_products: set.len(),
            selection: set,
            update,
        })
    }
}

/// `Σ_{k∈sel} X̂[k, :]ᵀ ⊗ Ĝ[k, :]`, optionally importance-scaled.
pub fn sampled_gradient(
    pair: &AugmentedPair,
    sel: &IndexSet,
    scaling: Option<&[f64]>,
) -> Result<Matrix> {
    if pair.x_hat.rows() != pair.g_hat.rows() {
        return Err(Error::dims(
            "sampled_gradient",
            format!(
                "X̂ has {} rows, Ĝ has {}",
                pair.x_hat.rows(),
                pair.g_hat.rows()
            ),
        ));
    }
    sampled_outer_matmul(&pair.x_hat.transpose(), &pair.g_hat, sel, scaling)
}

/// Keeps the `k` largest-magnitude entries of `m`; ties go to the lower
/// row-major position.
pub fn comp_k(m: &Matrix, k: usize) -> Result<Matrix> {
    let n = m.as_slice().len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "comp_k needs 1 <= k <= {n}, got {k}"
        )));
    }
    let vals = m.as_slice();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("comp_k input"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].abs().total_cmp(&vals[i].abs()));
    let mut out = Matrix::zeros(m.rows(), m.cols());
    let data = out.as_mut_slice();
    for &i in &order[..k] {
        data[i] = vals[i];
    }
    Ok(out)
}

/// Sparsified SGD with memory: returns `(comp_k(memory + grad), memory + grad − that)`.
pub fn comp_k_memsgd_step(memory: &Matrix, grad: &Matrix, k: usize) -> Result<(Matrix, Matrix)> {
    let acc = memory.add(grad)?;
    let sparse = comp_k(&acc, k)?;
    let next = acc.sub(&sparse)?;
    Ok((sparse, next))
}

/// Stateful wrapper around [`comp_k_memsgd_step`].
#[derive(Debug, Clone)]
pub struct MemSgdState {
    memory: Matrix,
    k: usize,
}

impl MemSgdState {
    pub fn new(rows: usize, cols: usize, k: usize) -> Result<Self> {
        if k == 0 || k > rows * cols {
            return Err(Error::InvalidArgument(format!(
                "comp_k needs 1 <= k <= {}, got {k}",
                rows * cols
            )));
        }
        Ok(Self {
            memory: Matrix::zeros(rows, cols),
            k,
        })
    }

    pub fn memory(&self) -> &Matrix {
        &self.memory
    }

    /// Returns the sparsified gradient to apply.
    pub fn step(&mut self, grad: &Matrix) -> Result<Matrix> {
        let (sparse, next) = comp_k_memsgd_step(&self.memory, grad, self.k)?;
        self.memory = next;
        Ok(sparse)
    }
}
