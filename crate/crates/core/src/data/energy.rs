//! UCI energy-efficiency data (768 simulated buildings).
//!
//! Expected CSV layout: a header row, then `X1..X8, Y1[, Y2]` per row.
//!
//! | column | meaning                    | encoding              |
//! |--------|----------------------------|-----------------------|
//! | X1     | relative compactness       | standardized          |
//! | X2     | surface area               | standardized          |
//! | X3     | wall area                  | standardized          |
//! | X4     | roof area                  | standardized          |
//! | X5     | overall height             | standardized          |
//! | X6     | orientation (2..=5)        | one-hot, 4 columns    |
//! | X7     | glazing area               | standardized          |
//! | X8     | glazing distribution (0..=5) | one-hot, 6 columns  |
//! | Y1     | heating load               | regression target     |
//! | Y2     | cooling load               | ignored               |
//!
//! Standardization statistics come from the training rows only.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const ENERGY_FEATURES: usize = 16;

const CONTINUOUS: [usize; 6] = [0, 1, 2, 3, 4, 6];
const ORIENTATION: usize = 5;
const GLAZING_DIST: usize = 7;
const HEATING: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnergyOptions {
    /// Seed of the shuffle that precedes the train/validation split.
    pub split_seed: u64,
    /// Standardize the heating-load target with training statistics.
    pub standardize_targets: bool,
}


fn read_rows(path: &Path) -> Result<Vec<[f64; 9]>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::data(path, e.to_string()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::data(path, e.to_string()))?;
        let mut fields: Vec<&str> = record.iter().collect();
        while fields.last().is_some_and(|f| f.is_empty()) {
            fields.pop();
        }
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 9 && fields.len() != 10 {
            return Err(Error::data(
                path,
                format!(
                    "row {}: expected 8 features and 1 or 2 targets, found {} columns",
                    line + 2,
                    fields.len()
                ),
            ));
        }
        let mut row = [0.0; 9];
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = fields[j].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::data(
                    path,
                    format!("row {}, column {}: '{}' is not a number", line + 2, j + 1, fields[j]),
                )
            })?;
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::data(path, "need at least two data rows"));
    }
    Ok(rows)
}

fn category(path: &Path, value: f64, lo: i64, hi: i64, what: &str) -> Result<usize> {
    let v = value.round();
    if (v - value).abs() > 1e-9 || (v as i64) < lo || (v as i64) > hi {
        return Err(Error::data(
            path,
            format!("{what} value {value} outside {lo}..={hi}"),
        ));
    }
    Ok((v as i64 - lo) as usize)
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

/// Loads, encodes and splits the dataset: seeded shuffle, then the first
/// three quarters (576 of 768 rows) become the training split.
pub fn load_energy(path: impl AsRef<Path>, opts: &EnergyOptions) -> Result<(Dataset, Dataset)> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::data(path, "energy CSV not found"));
    }
    let rows = read_rows(path)?;

    let mut encoded = Vec::with_capacity(rows.len());
    for row in &rows {
        let orient = category(path, row[ORIENTATION], 2, 5, "orientation")?;
        let dist = category(path, row[GLAZING_DIST], 0, 5, "glazing distribution")?;
        encoded.push((row, orient, dist));
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.split_seed));
    let n_train = rows.len() * 3 / 4;
    let (train_idx, val_idx) = order.split_at(n_train);

    let stats: Vec<(f64, f64)> = CONTINUOUS
        .iter()
        .map(|&c| mean_std(train_idx.iter().map(|&i| rows[i][c])))
        .collect();
    let target_stats = if opts.standardize_targets {
        mean_std(train_idx.iter().map(|&i| rows[i][HEATING]))
    } else {
        (0.0, 1.0)
    };

    let build = |idx: &[usize], split: Split| -> Result<Dataset> {
        let mut features = Matrix::zeros(idx.len(), ENERGY_FEATURES);
        let mut targets = Matrix::zeros(idx.len(), 1);
        for (r, &i) in idx.iter().enumerate() {
            let (row, orient, dist) = encoded[i];
            let out = features.row_mut(r);
            for (j, (&c, &(mean, std))) in CONTINUOUS.iter().zip(&stats).enumerate() {
                out[j] = (row[c] - mean) / std;
            }
            out[6 + orient] = 1.0;
            out[10 + dist] = 1.0;
            targets.set(r, 0, (row[HEATING] - target_stats.0) / target_stats.1);
        }
        Dataset::new(features, targets, split)
    };

    Ok((build(train_idx, Split::Train)?, build(val_idx, Split::Validation)?))
}
