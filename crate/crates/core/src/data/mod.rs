//! Datasets, preprocessing and mini-batching.

mod batch;
mod energy;
mod mnist;

pub use batch::{BatchPlan, Batches};
pub use energy::{load_energy, EnergyOptions, ENERGY_FEATURES};
pub use mnist::{load_mnist, parse_idx_images, parse_idx_labels, IdxImages, MNIST_CLASSES, MNIST_PIXELS};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

/// Features and targets with one row per sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub targets: Matrix,
    pub split: Split,
}

impl Dataset {
    pub fn new(features: Matrix, targets: Matrix, split: Split) -> Result<Self> {
        if features.rows() != targets.rows() {
            return Err(Error::dims(
                "Dataset::new",
                format!(
                    "{} feature rows vs {} target rows",
                    features.rows(),
                    targets.rows()
                ),
            ));
        }
        if !features.is_finite() || !targets.is_finite() {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Self {
            features,
            targets,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn target_dim(&self) -> usize {
        self.targets.cols()
    }
}
