use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ensure_dir, Method, RunConfig, Task, BATCH_STREAM, INIT_STREAM, SPLIT_STREAM};
use crate::data::{load_energy, load_mnist, BatchPlan, Dataset, EnergyOptions};
use crate::error::{Error, Result};
use crate::mem_aop::{MemAopConfig, MemAopState, MemSgdState};
use crate::nn::{accuracy, loss_and_output_grad, sgd_update, DenseLayer, LossKind};
use crate::seed::derive_seed;

pub const CSV_SCHEMA: &str = "memaop-metrics v1";
pub const CSV_HEADER: &str = "epoch,train_loss,val_loss,val_accuracy,outer_products,wall_seconds";

/// Metrics after one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub val_loss: f64,
    /// `None` for regression.
    pub val_accuracy: Option<f64>,
    /// Cumulative outer products spent on weight gradients.
    pub outer_products: u64,
    pub wall_seconds: f64,
}

impl MetricsRecord {
    fn csv_line(&self) -> String {
        let acc = self.val_accuracy.map(|a| a.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.train_loss, self.val_loss, acc, self.outer_products, self.wall_seconds
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<MetricsRecord>,
    /// Epoch and reason, when a loss went non-finite. The record of that
    /// epoch is the last one in `records`.
    pub diverged: Option<(usize, String)>,
    pub model: DenseLayer,
}

/// Train and validation splits for `config.task`.
pub fn load_task_data(config: &RunConfig) -> Result<(Dataset, Dataset)> {
    match config.task {
        Task::Mnist => load_mnist(config.mnist_dir()),
        Task::Energy => load_energy(
            config.energy_csv(),
            &EnergyOptions {
                split_seed: derive_seed(config.seed, SPLIT_STREAM),
                standardize_targets: config.standardize_targets,
            },
        ),
    }
}

#[allow(clippy::large_enum_variant)]
enum Updater {
    Exact,
    MemSgd(MemSgdState),
    Aop(MemAopConfig, MemAopState, ChaCha8Rng),
}

fn evaluate(layer: &DenseLayer, loss: LossKind, ds: &Dataset) -> Result<(f64, Option<f64>)> {
    let out = layer.predict(&ds.features)?;
    let (l, _) = loss_and_output_grad(loss, &out, &ds.targets)?;
    let acc = match loss {
        LossKind::SoftmaxCrossEntropy => Some(accuracy(&out, &ds.targets)?),
        LossKind::MeanSquaredError => None,
    };
    Ok((l, acc))
}

/// Trains a single dense layer with the configured update rule and
/// evaluates on `val` after every epoch. Divergence stops training but is
/// reported in the outcome rather than as an error.
pub fn train(config: &RunConfig, train: &Dataset, val: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    if train.feature_dim() != val.feature_dim() || train.target_dim() != val.target_dim() {
        return Err(Error::dims(
            "train",
            format!(
                "train split is {}->{}, validation split is {}->{}",
                train.feature_dim(),
                train.target_dim(),
                val.feature_dim(),
                val.target_dim()
            ),
        ));
    }
    let (n, p) = (train.feature_dim(), train.target_dim());
    let m = config.batch_size;
    let eta = config.learning_rate;
    let loss = config.task.loss();

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, INIT_STREAM));
    let mut layer = DenseLayer::glorot(n, p, &mut init_rng);
    let plan = BatchPlan::new(m, derive_seed(config.seed, BATCH_STREAM))?;

    let mut updater = match config.method {
        Method::Exact => Updater::Exact,
        Method::MemSgd => {
            let keep = ((n * p * config.k) as f64 / m as f64).round().max(1.0) as usize;
            Updater::MemSgd(MemSgdState::new(n, p, keep.min(n * p))?)
        }
        Method::Aop(_) => {
            let policy = config
                .policy()
                .ok_or_else(|| Error::InvalidArgument("missing selection policy".into()))?;
            policy.validate_for(m)?;
            Updater::Aop(
                MemAopConfig::new(policy, eta, config.use_memory)?,
                MemAopState::new(m, n, p),
                ChaCha8Rng::seed_from_u64(config.resolved_selection_seed()),
            )
        }
    };

    let start = Instant::now();
    let mut records = Vec::with_capacity(config.epochs);
    let mut outer_products: u64 = 0;

    for epoch in 1..=config.epochs {
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for (x, y) in plan.batches(train, epoch)? {
            let out = layer.forward(&x)?;
            let (l, g) = loss_and_output_grad(loss, &out, &y)?;
            loss_sum += l;
            steps += 1;
            if !l.is_finite() || !g.is_finite() {
                break;
            }
            let bias_grad = layer.bias_grad(&g)?;
            let step = match &mut updater {
                Updater::Exact => layer.backward(&g).and_then(|grads| {
                    layer.w = sgd_update(&layer.w, &grads.weight, eta)?;
                    Ok(m)
                }),
                Updater::MemSgd(state) => layer.backward(&g).and_then(|grads| {
                    let sparse = state.step(&grads.weight.scale(eta))?;
                    layer.w.axpy(-1.0, &sparse)?;
                    Ok(m)
                }),
                Updater::Aop(cfg, state, rng) => layer.take_input().and_then(|x| {
                    state
                        .step(cfg, &mut layer.w, &x, &g, rng)
                        .map(|r| r.outer_products)
                }),
            };
            match step {
                Ok(count) => outer_products += count as u64,
                // overflowing memories or weights: report as divergence below
                Err(Error::NonFinite(_)) => {
                    loss_sum = f64::NAN;
                    break;
                }
                Err(e) => return Err(e),
            }
            layer.apply_bias_step(&bias_grad, eta);
        }
        let train_loss = loss_sum / steps.max(1) as f64;
        let (val_loss, val_accuracy) = evaluate(&layer, loss, val)?;
        let wall_seconds = if config.record_timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        records.push(MetricsRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
            outer_products,
            wall_seconds,
        });
        if !train_loss.is_finite() || !val_loss.is_finite() || !layer.w.is_finite() {
            let reason = format!("non-finite loss (train {train_loss}, validation {val_loss})");
            return Ok(TrainOutcome {
                records,
                diverged: Some((epoch, reason)),
                model: layer,
            });
        }
    }
    Ok(TrainOutcome {
        records,
        diverged: None,
        model: layer,
    })
}

/// Renders records in the versioned CSV format.
pub fn metrics_csv(config: &RunConfig, records: &[MetricsRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {CSV_SCHEMA} {}", config.describe());
    let _ = writeln!(s, "{CSV_HEADER}");
    for r in records {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

pub fn write_metrics(path: &Path, config: &RunConfig, records: &[MetricsRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    fs::write(path, metrics_csv(config, records))?;
    Ok(())
}

/// Reads a metrics CSV back. Empty accuracy cells become `None`.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::data(path, e.to_string()))?;
    let parse = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::data(path, format!("bad {what} value '{s}'")))
    };
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::data(path, e.to_string()))?;
        if rec.len() != 6 {
            return Err(Error::data(path, format!("expected 6 columns, found {}", rec.len())));
        }
        out.push(MetricsRecord {
            epoch: parse(&rec[0], "epoch")? as usize,
            train_loss: parse(&rec[1], "train_loss")?,
            val_loss: parse(&rec[2], "val_loss")?,
            val_accuracy: if rec[3].is_empty() {
                None
            } else {
                Some(parse(&rec[3], "val_accuracy")?)
            },
            outer_products: parse(&rec[4], "outer_products")? as u64,
            wall_seconds: parse(&rec[5], "wall_seconds")?,
        });
    }
    Ok(out)
}

/// Trains on already loaded data and writes `config.csv_path()`. A diverged
/// run still writes its records, then returns [`Error::Diverged`].
pub fn run_with_data(config: &RunConfig, train_ds: &Dataset, val_ds: &Dataset) -> Result<Vec<MetricsRecord>> {
    let outcome = train(config, train_ds, val_ds)?;
    write_metrics(&config.csv_path(), config, &outcome.records)?;
    match outcome.diverged {
        Some((epoch, reason)) => Err(Error::Diverged { epoch, reason }),
        None => Ok(outcome.records),
    }
}

/// Loads the task data, trains, and writes the metrics CSV.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<MetricsRecord>> {
    config.validate()?;
    let (train_ds, val_ds) = load_task_data(config)?;
    run_with_data(config, &train_ds, &val_ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx_matmul::PolicyKind;
    use crate::data::Split;
    use crate::matrix::Matrix;

    fn toy(rows: usize, seed: u64) -> (Dataset, Dataset) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Matrix::from_fn(5, 3, |i, j| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        let make = |n: usize, rng: &mut ChaCha8Rng, split| {
            let x = Matrix::from_fn(n, 5, |_, _| rng.random_range(-1.0..1.0));
            let z = x.matmul(&w).unwrap();
            let mut y = Matrix::zeros(n, 3);
            for i in 0..n {
                let r = z.row(i);
                let best = (0..3).fold(0, |b, j| if r[j] > r[b] { j } else { b });
                y.set(i, best, 1.0);
            }
            Dataset::new(x, y, split).unwrap()
        };
        (make(rows, &mut rng, Split::Train), make(rows / 2, &mut rng, Split::Validation))
    }

    fn cfg(method: Method, k: usize, mem: bool) -> RunConfig {
        let mut c = RunConfig::defaults(Task::Mnist).with_method(method, k, mem);
        c.epochs = 3;
        c.batch_size = 16;
        c.learning_rate = 0.1;
        c.record_timing = false;
        c
    }

    #[test]
    fn accounting_matches_k_times_batches() {
        let (tr, va) = toy(100, 1);
        let out = train(&cfg(Method::Aop(PolicyKind::TopK), 4, true), &tr, &va).unwrap();
        let per_epoch = (100 / 16) as u64;
        for r in &out.records {
            assert_eq!(r.outer_products, 4 * per_epoch * r.epoch as u64);
            assert!(r.val_accuracy.is_some());
        }
        let exact = train(&cfg(Method::Exact, 16, false), &tr, &va).unwrap();
        assert_eq!(exact.records[2].outer_products, 16 * per_epoch * 3);
    }

    #[test]
    fn full_k_matches_exact() {
        let (tr, va) = toy(96, 2);
        let exact = train(&cfg(Method::Exact, 16, false), &tr, &va).unwrap();
        for kind in PolicyKind::ALL {
            let aop = train(&cfg(Method::Aop(kind), 16, true), &tr, &va).unwrap();
            for (a, b) in aop.records.iter().zip(&exact.records) {
                assert!(((a.train_loss - b.train_loss) / b.train_loss).abs() < 1e-9);
                assert!(((a.val_loss - b.val_loss) / b.val_loss).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_and_learns() {
        let (tr, va) = toy(200, 3);
        let c = cfg(Method::Aop(PolicyKind::WeightedK), 6, true);
        let a = train(&c, &tr, &va).unwrap();
        let b = train(&c, &tr, &va).unwrap();
        assert_eq!(metrics_csv(&c, &a.records), metrics_csv(&c, &b.records));
        assert!(a.records[2].train_loss < a.records[0].train_loss);
        let ms = train(&cfg(Method::MemSgd, 8, true), &tr, &va).unwrap();
        assert!(ms.diverged.is_none());
    }

    #[test]
    fn divergence_is_reported() {
        let (tr, va) = toy(64, 4);
        let mut c = cfg(Method::Exact, 16, false);
        c.task = Task::Energy;
        c.learning_rate = 1e200;
        let ys = Matrix::from_fn(64, 3, |i, _| 1e100 * i as f64);
        let tr = Dataset::new(tr.features, ys.clone(), Split::Train).unwrap();
        let va = Dataset::new(va.features, Matrix::from_fn(32, 3, |_, _| 1.0), Split::Validation).unwrap();
        let out = train(&c, &tr, &va).unwrap();
        let (epoch, _) = out.diverged.expect("should diverge");
        assert_eq!(out.records.len(), epoch);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(Method::Exact, 16, false);
        let recs = vec![
            MetricsRecord {
                epoch: 1,
                train_loss: 0.5,
                val_loss: 0.25,
                val_accuracy: Some(0.75),
                outer_products: 96,
                wall_seconds: 0.0,
            },
            MetricsRecord {
                epoch: 2,
                train_loss: 0.1,
                val_loss: 0.2,
                val_accuracy: None,
                outer_products: 192,
                wall_seconds: 1.5,
            },
        ];
        let path = dir.path().join("x.csv");
        write_metrics(&path, &c, &recs).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# memaop-metrics v1 task=mnist"));
        assert_eq!(text.lines().nth(1), Some(CSV_HEADER));
        assert_eq!(read_metrics(&path).unwrap(), recs);
    }
}
