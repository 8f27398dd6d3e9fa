use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::approx_matmul::{PolicyKind, SelectionPolicy};
use crate::error::{Error, Result};
use crate::nn::LossKind;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Energy,
    Mnist,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Energy => "energy",
            Task::Mnist => "mnist",
        }
    }

    pub fn loss(self) -> LossKind {
        match self {
            Task::Energy => LossKind::MeanSquaredError,
            Task::Mnist => LossKind::SoftmaxCrossEntropy,
        }
    }

    /// K values of the reference grids.
    pub fn default_k_values(self) -> Vec<usize> {
        match self {
            Task::Energy => vec![18, 9, 3],
            Task::Mnist => vec![32, 16, 8],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "energy" => Ok(Task::Energy),
            "mnist" => Ok(Task::Mnist),
            other => Err(Error::InvalidArgument(format!(
                "unknown task '{other}' (expected energy or mnist)"
            ))),
        }
    }
}

/// How the weight gradient is formed and applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Exact `Xᵀ G` and plain SGD.
    Exact,
    /// Exact `Xᵀ G`, then top-k entry sparsification with error feedback.
    MemSgd,
    /// Sampled outer products with optional memory.
    Aop(PolicyKind),
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MemSgd => "memsgd",
            Method::Aop(kind) => kind.as_str(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "baseline" | "exact-baseline" => Ok(Method::Exact),
            "memsgd" | "memsgd-baseline" => Ok(Method::MemSgd),
            other => other.parse().map(Method::Aop),
        }
    }
}

// RNG stream tags; each consumer of randomness gets its own derived seed.
pub(crate) const INIT_STREAM: u64 = 1;
pub(crate) const BATCH_STREAM: u64 = 2;
pub(crate) const SPLIT_STREAM: u64 = 3;
const SELECTION_STREAM: u64 = 4;

/// One training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub method: Method,
    /// Outer products per step for AOP runs. For `MemSgd` the kept fraction
    /// of gradient entries is `k / batch_size`. Ignored by `Exact`.
    pub k: usize,
    pub with_replacement: bool,
    pub use_memory: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Drives weight init, the data split and the batch order.
    pub seed: u64,
    /// Seed of the outer-product selection RNG. `None` derives it from
    /// `seed` and the run label.
    pub selection_seed: Option<u64>,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Energy task only: standardize the heating-load target.
    pub standardize_targets: bool,
    /// Write measured wall time; when off the column is zero so reruns are
    /// byte-identical.
    pub record_timing: bool,
}

impl RunConfig {
    /// Reference hyperparameters: energy 100 epochs / batch 144, MNIST
    /// 30 epochs / batch 64, both SGD at 0.01.
    pub fn defaults(task: Task) -> Self {
        let (epochs, batch_size) = match task {
            Task::Energy => (100, 144),
            Task::Mnist => (30, 64),
        };
        Self {
            task,
            method: Method::Exact,
            k: batch_size,
            with_replacement: false,
            use_memory: true,
            epochs,
            batch_size,
            learning_rate: 0.01,
            seed: 0,
            selection_seed: None,
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("runs"),
            standardize_targets: false,
            record_timing: true,
        }
    }

    pub fn with_method(mut self, method: Method, k: usize, use_memory: bool) -> Self {
        self.method = method;
        self.k = k;
        self.use_memory = use_memory;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.method != Method::Exact {
            if self.k == 0 {
                return Err(Error::InvalidArgument("k must be at least 1".into()));
            }
            if self.k > self.batch_size && !self.with_replacement {
                return Err(Error::InvalidArgument(format!(
                    "k = {} exceeds the batch size {}",
                    self.k, self.batch_size
                )));
            }
        }
        if let Method::Aop(kind) = self.method {
            SelectionPolicy::new(kind, self.k, self.with_replacement)?;
        }
        Ok(())
    }

    /// Selection policy for AOP runs.
    pub fn policy(&self) -> Option<SelectionPolicy> {
        match self.method {
            Method::Aop(kind) => SelectionPolicy::new(kind, self.k, self.with_replacement).ok(),
            _ => None,
        }
    }

    /// `k` as reported in names and summaries; exact runs use the full batch.
    pub fn effective_k(&self) -> usize {
        match self.method {
            Method::Exact => self.batch_size,
            _ => self.k,
        }
    }

    /// Memory flag as reported; only AOP and memSGD runs carry memory.
    pub fn effective_memory(&self) -> bool {
        match self.method {
            Method::Exact => false,
            Method::MemSgd => true,
            Method::Aop(_) => self.use_memory,
        }
    }

    /// `task_policy_kK_memFLAG_seedS`
    pub fn run_label(&self) -> String {
        let mut policy = self.method.as_str().to_string();
        if self.with_replacement && matches!(self.method, Method::Aop(_)) {
            policy.push_str("-wr");
        }
        format!(
            "{}_{}_k{}_mem{}_seed{}",
            self.task,
            policy,
            self.effective_k(),
            u8::from(self.effective_memory()),
            self.seed
        )
    }

    pub fn csv_file_name(&self) -> String {
        format!("{}.csv", self.run_label())
    }

    pub fn csv_path(&self) -> PathBuf {
        self.out_dir.join(self.csv_file_name())
    }

    pub fn resolved_selection_seed(&self) -> u64 {
        self.selection_seed.unwrap_or_else(|| {
            let label = format!(
                "{}_{}_k{}_mem{}",
                self.task,
                self.method,
                self.effective_k(),
                u8::from(self.effective_memory())
            );
            derive_seed(self.seed, SELECTION_STREAM ^ fnv1a(label.as_bytes()))
        })
    }

    pub(crate) fn mnist_dir(&self) -> PathBuf {
        let nested = self.data_dir.join("mnist");
        if nested.is_dir() {
            nested
        } else {
            self.data_dir.clone()
        }
    }

    pub(crate) fn energy_csv(&self) -> PathBuf {
        const NAMES: [&str; 3] = ["ENB2012_data.csv", "energy_efficiency.csv", "energy.csv"];
        let dirs = [self.data_dir.join("energy"), self.data_dir.clone()];
        dirs.iter()
            .flat_map(|d| NAMES.iter().map(move |n| d.join(n)))
            .find(|p| p.is_file())
            .unwrap_or_else(|| dirs[0].join(NAMES[0]))
    }

    /// One-line description written into the CSV header comment.
    pub(crate) fn describe(&self) -> String {
        format!(
            "task={} policy={} k={} memory={} with_replacement={} epochs={} batch_size={} lr={} seed={} selection_seed={} standardize_targets={}",
            self.task,
            self.method,
            self.effective_k(),
            u8::from(self.effective_memory()),
            u8::from(self.with_replacement),
            self.epochs,
            self.batch_size,
            self.learning_rate,
            self.seed,
            self.resolved_selection_seed(),
            u8::from(self.standardize_targets),
        )
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_reference_table() {
        let e = RunConfig::defaults(Task::Energy);
        assert_eq!((e.epochs, e.batch_size, e.learning_rate), (100, 144, 0.01));
        assert_eq!(e.task.loss(), LossKind::MeanSquaredError);
        let m = RunConfig::defaults(Task::Mnist);
        assert_eq!((m.epochs, m.batch_size, m.learning_rate), (30, 64, 0.01));
        assert_eq!(m.task.loss(), LossKind::SoftmaxCrossEntropy);
    }

    #[test]
    fn validation() {
        let base = RunConfig::defaults(Task::Mnist);
        assert!(base.validate().is_ok());
        let too_big = base.clone().with_method(Method::Aop(PolicyKind::TopK), 65, true);
        assert!(too_big.validate().is_err());
        let zero = base.clone().with_method(Method::Aop(PolicyKind::RandK), 0, true);
        assert!(zero.validate().is_err());
        let mut lr = base.clone();
        lr.learning_rate = -1.0;
        assert!(lr.validate().is_err());
        let mut topk_wr = base.with_method(Method::Aop(PolicyKind::TopK), 8, true);
        topk_wr.with_replacement = true;
        assert!(topk_wr.validate().is_err());
    }

    #[test]
    fn labels_are_deterministic() {
        let c = RunConfig::defaults(Task::Mnist).with_method(Method::Aop(PolicyKind::WeightedK), 16, false);
        assert_eq!(c.csv_file_name(), "mnist_weightedk_k16_mem0_seed0.csv");
        let b = RunConfig::defaults(Task::Energy);
        assert_eq!(b.csv_file_name(), "energy_exact_k144_mem0_seed0.csv");
        assert_eq!(c.resolved_selection_seed(), c.clone().resolved_selection_seed());
        let other = c.clone().with_method(Method::Aop(PolicyKind::WeightedK), 8, false);
        assert_ne!(c.resolved_selection_seed(), other.resolved_selection_seed());
    }

    #[test]
    fn parses_methods() {
        assert_eq!("exact".parse::<Method>().unwrap(), Method::Exact);
        assert_eq!("memsgd-baseline".parse::<Method>().unwrap(), Method::MemSgd);
        assert_eq!("topk".parse::<Method>().unwrap(), Method::Aop(PolicyKind::TopK));
        assert!("nope".parse::<Method>().is_err());
        assert!("cifar".parse::<Task>().is_err());
    }
}
