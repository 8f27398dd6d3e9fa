//! Approximate outer-product gradient descent with memory.
//!
//! A dense layer's weight gradient `Xᵀ G` is a sum of `M` outer products,
//! one per batch sample. [`mem_aop`] evaluates only `K` of them, chosen by a
//! [`SelectionPolicy`], and carries the skipped rows forward in memory
//! matrices so no gradient information is discarded.
//!
//! ```
//! use memaop::{approx_outer_matmul, exact_outer_matmul, frobenius_error, Matrix, PolicyKind, SelectionPolicy};
//! use rand::SeedableRng;
//!
//! let a = Matrix::from_fn(4, 6, |i, j| (i + j) as f64);
//! let b = Matrix::from_fn(6, 3, |i, j| (i * j) as f64 - 1.0);
//! let policy = SelectionPolicy::without_replacement(PolicyKind::TopK, 6).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let (c, picked) = approx_outer_matmul(&a, &b, &policy, &mut rng).unwrap();
//! assert_eq!(picked.len(), 6);
//! assert!(frobenius_error(&exact_outer_matmul(&a, &b).unwrap(), &c).unwrap() < 1e-12);
//! ```

pub mod approx_matmul;
pub mod data;
mod error;
pub mod experiment;
mod matrix;
pub mod mem_aop;
pub mod nn;
pub mod seed;

pub use approx_matmul::{
    approx_outer_matmul, exact_outer_matmul, frobenius_error, outer_product_weights, IndexSet,
    PolicyKind, Selection, SelectionPolicy,
};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use mem_aop::{MemAopConfig, MemAopState, MemSgdState};
pub use nn::{DenseLayer, LossKind};
