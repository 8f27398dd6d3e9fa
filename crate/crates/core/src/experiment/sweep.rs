use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ensure_dir, Method, RunConfig};
use super::run::{load_task_data, run_with_data};
use crate::approx_matmul::PolicyKind;
use crate::data::Dataset;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const MANIFEST_HEADER: &str =
    "run,task,policy,k,batch_size,memory,seed,selection_seed,csv,status,message";

/// Grid of runs around a base configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub k_values: Vec<usize>,
    pub policies: Vec<PolicyKind>,
    pub memory_flags: Vec<bool>,
    /// Add the comp_k memSGD baseline once per `k`.
    pub include_memsgd: bool,
}

impl SweepSpec {
    /// Reference grid for the base task: its K values, all three policies,
    /// memory on and off.
    pub fn reference(base: RunConfig) -> Self {
        Self {
            k_values: base.task.default_k_values(),
            base,
            policies: PolicyKind::ALL.to_vec(),
            memory_flags: vec![true, false],
            include_memsgd: false,
        }
    }

    /// Exact baseline first, then `k × policy × memory` in that nesting
    /// order, then optional memSGD runs.
    pub fn configs(&self) -> Vec<RunConfig> {
        let mut out = vec![self.base.clone().with_method(Method::Exact, self.base.batch_size, false)];
        for &k in &self.k_values {
            for &policy in &self.policies {
                for &mem in &self.memory_flags {
                    out.push(self.base.clone().with_method(Method::Aop(policy), k, mem));
                }
            }
        }
        if self.include_memsgd {
            for &k in &self.k_values {
                out.push(self.base.clone().with_method(Method::MemSgd, k, true));
            }
        }
        out
    }

    /// Checks every grid point before any training starts.
    pub fn validate(&self) -> Result<()> {
        for c in self.configs() {
            c.validate()
                .map_err(|e| Error::InvalidArgument(format!("{}: {e}", c.run_label())))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Diverged,
    Failed,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged => "diverged",
            RunStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub config: RunConfig,
    pub csv: PathBuf,
    pub status: RunStatus,
    pub message: String,
}

fn clean(s: &str) -> String {
    s.replace([',', '\n', '\r'], " ")
}

pub fn manifest_csv(entries: &[ManifestEntry]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MANIFEST_HEADER}");
    for e in entries {
        let c = &e.config;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.run_label(),
            c.task,
            c.method,
            c.effective_k(),
            c.batch_size,
            u8::from(c.effective_memory()),
            c.seed,
            c.resolved_selection_seed(),
            e.csv.file_name().map(|f| f.to_string_lossy()).unwrap_or_default(),
            e.status.as_str(),
            clean(&e.message)
        );
    }
    s
}

fn run_one(config: &RunConfig, train: &Dataset, val: &Dataset) -> ManifestEntry {
    let (status, message) = match run_with_data(config, train, val) {
        Ok(_) => (RunStatus::Ok, String::new()),
        Err(e @ Error::Diverged { .. }) => (RunStatus::Diverged, e.to_string()),
        Err(e) => (RunStatus::Failed, e.to_string()),
    };
    ManifestEntry {
        config: config.clone(),
        csv: config.csv_path(),
        status,
        message,
    }
}

/// Runs the grid in parallel on already loaded data and writes
/// `out_dir/manifest.csv`. A failing run is recorded in the manifest and the
/// others continue. Returns the entries in grid order.
pub fn sweep_with_data(spec: &SweepSpec, train: &Dataset, val: &Dataset) -> Result<Vec<ManifestEntry>> {
    spec.validate()?;
    ensure_dir(&spec.base.out_dir)?;
    let entries: Vec<ManifestEntry> = spec
        .configs()
        .par_iter()
        .map(|c| run_one(c, train, val))
        .collect();
    write_manifest(&spec.base.out_dir.join(MANIFEST_FILE), &entries)?;
    Ok(entries)
}

/// Like [`sweep_with_data`], loading the task data once from
/// `base.data_dir`. Missing data is an error before any run starts.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<ManifestEntry>> {
    spec.validate()?;
    let (train, val) = load_task_data(&spec.base)?;
    sweep_with_data(spec, &train, &val)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    fs::write(path, manifest_csv(entries))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::Task;

    #[test]
    fn reference_grid_sizes() {
        let spec = SweepSpec::reference(RunConfig::defaults(Task::Mnist));
        assert_eq!(spec.configs().len(), 19);
        let mut names: Vec<String> = spec.configs().iter().map(|c| c.csv_file_name()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 19);

        let empty = SweepSpec {
            k_values: vec![],
            ..spec.clone()
        };
        assert_eq!(empty.configs().len(), 1);
        assert_eq!(empty.configs()[0].method, Method::Exact);

        let with_memsgd = SweepSpec {
            include_memsgd: true,
            ..spec
        };
        assert_eq!(with_memsgd.configs().len(), 22);
    }

    #[test]
    fn invalid_grid_point_rejected() {
        let mut spec = SweepSpec::reference(RunConfig::defaults(Task::Energy));
        spec.k_values.push(500);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn manifest_escapes_messages() {
        let c = RunConfig::defaults(Task::Mnist);
        let e = ManifestEntry {
            csv: c.csv_path(),
            config: c,
            status: RunStatus::Failed,
            message: "a,b\nc".into(),
        };
        let text = manifest_csv(&[e]);
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line.split(',').count(), 11);
        assert!(line.ends_with("failed,a b c"));
    }
}
