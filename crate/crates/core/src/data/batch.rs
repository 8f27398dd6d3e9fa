use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::derive_seed;

/// Fixed-size mini-batching with a per-epoch shuffle. The trailing partial
/// batch is always dropped, so every batch has exactly `batch_size` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub seed: u64,
}

impl BatchPlan {
    pub fn new(batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(Self { batch_size, seed })
    }

    pub fn drop_last(&self) -> bool {
        true
    }

    pub fn batches_per_epoch(&self, samples: usize) -> usize {
        samples / self.batch_size
    }

    /// Row order for `epoch`, keyed by `(seed, epoch)`.
    pub fn order(&self, samples: usize, epoch: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..samples).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, epoch as u64));
        idx.shuffle(&mut rng);
        idx
    }

    pub fn batches<'a>(&self, ds: &'a Dataset, epoch: usize) -> Result<Batches<'a>> {
        if ds.is_empty() {
            return Err(Error::InvalidArgument("cannot batch an empty dataset".into()));
        }
        if self.batch_size > ds.len() {
            return Err(Error::InvalidArgument(format!(
                "batch size {} exceeds the {} available samples",
                self.batch_size,
                ds.len()
            )));
        }
        Ok(Batches {
            ds,
            order: self.order(ds.len(), epoch),
            batch_size: self.batch_size,
            next: 0,
            count: self.batches_per_epoch(ds.len()),
        })
    }
}

/// Iterator over `(x, y)` batches of one epoch.
#[derive(Debug)]
pub struct Batches<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    next: usize,
    count: usize,
}

impl Iterator for Batches<'_> {
    type Item = (Matrix, Matrix);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.count {
            return None;
        }
        let rows = &self.order[self.next * self.batch_size..(self.next + 1) * self.batch_size];
        self.next += 1;
        Some((
            self.ds.features.select_rows(rows),
            self.ds.targets.select_rows(rows),
        ))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.count - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Batches<'_> {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    fn toy(n: usize) -> Dataset {
        Dataset::new(
            Matrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64),
            Matrix::from_fn(n, 1, |i, _| i as f64),
            Split::Train,
        )
        .unwrap()
    }

    #[test]
    fn batch_counts() {
        let plan = BatchPlan::new(144, 0).unwrap();
        assert_eq!(plan.batches_per_epoch(576), 4);
        let plan = BatchPlan::new(64, 0).unwrap();
        assert_eq!(plan.batches_per_epoch(60_000), 937);
        assert_eq!(60_000 - 937 * 64, 32);

        let ds = toy(10);
        let plan = BatchPlan::new(3, 9).unwrap();
        let batches: Vec<_> = plan.batches(&ds, 0).unwrap().collect();
        assert_eq!(batches.len(), 3);
        assert!(batches.iter().all(|(x, y)| x.rows() == 3 && y.rows() == 3));
    }

    #[test]
    fn rows_unique_within_epoch() {
        let ds = toy(50);
        let plan = BatchPlan::new(7, 3).unwrap();
        let mut seen = [false; 50];
        for (_, y) in plan.batches(&ds, 2).unwrap() {
            for i in 0..y.rows() {
                let id = y.get(i, 0) as usize;
                assert!(!std::mem::replace(&mut seen[id], true));
            }
        }
    }

    #[test]
    fn deterministic_per_seed_and_epoch() {
        let plan = BatchPlan::new(4, 42).unwrap();
        assert_eq!(plan.order(100, 3), plan.order(100, 3));
        assert_ne!(plan.order(100, 3), plan.order(100, 4));
        assert_ne!(plan.order(100, 3), BatchPlan::new(4, 43).unwrap().order(100, 3));
    }

    #[test]
    fn rejects_oversized_batch() {
        let ds = toy(5);
        assert!(BatchPlan::new(6, 0).unwrap().batches(&ds, 0).is_err());
        assert!(BatchPlan::new(0, 0).is_err());
    }
}
