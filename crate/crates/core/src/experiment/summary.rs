use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::run::read_metrics;
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: &str =
    "run,policy,k,batch_size,memory,reduction_ratio,epochs,train_loss,val_loss,val_accuracy,outer_products,status";

#[derive(Debug, Deserialize)]
struct ManifestRow {
    run: String,
    policy: String,
    k: usize,
    batch_size: usize,
    memory: u8,
    csv: String,
    status: String,
}

/// Final-epoch metrics of one manifest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub run: String,
    pub policy: String,
    pub k: usize,
    pub batch_size: usize,
    pub memory: bool,
    /// `R = K/M`: the fraction of outer products computed per step. Exact
    /// and memSGD runs compute all of them.
    pub reduction_ratio: f64,
    pub epochs: usize,
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub outer_products: Option<u64>,
    /// Manifest status, or `missing` / `unreadable` when the CSV could not
    /// be used.
    pub status: String,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SummaryRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.run,
            self.policy,
            self.k,
            self.batch_size,
            u8::from(self.memory),
            self.reduction_ratio,
            self.epochs,
            opt(self.train_loss),
            opt(self.val_loss),
            opt(self.val_accuracy),
            opt(self.outer_products),
            self.status
        )
    }
}

fn reduction_ratio(policy: &str, k: usize, batch_size: usize) -> f64 {
    match policy {
        "exact" | "memsgd" => 1.0,
        _ => k as f64 / batch_size as f64,
    }
}

/// Reads `manifest` and the metrics CSVs it lists (resolved next to the
/// manifest). A missing or unreadable CSV yields a flagged row.
pub fn summarize(manifest: &Path) -> Result<Vec<SummaryRow>> {
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(manifest).map_err(|e| Error::data(manifest, e.to_string()))?;
    let mut rows = Vec::new();
    for row in reader.deserialize::<ManifestRow>() {
        let row = row.map_err(|e| Error::data(manifest, e.to_string()))?;
        let path = dir.join(&row.csv);
        let mut out = SummaryRow {
            reduction_ratio: reduction_ratio(&row.policy, row.k, row.batch_size),
            run: row.run,
            policy: row.policy,
            k: row.k,
            batch_size: row.batch_size,
            memory: row.memory != 0,
            epochs: 0,
            train_loss: None,
            val_loss: None,
            val_accuracy: None,
            outer_products: None,
            status: row.status,
        };
        if !path.is_file() {
            out.status = "missing".into();
        } else {
            match read_metrics(&path) {
                Ok(records) => {
                    if let Some(last) = records.last() {
                        out.epochs = last.epoch;
                        out.train_loss = Some(last.train_loss);
                        out.val_loss = Some(last.val_loss);
                        out.val_accuracy = last.val_accuracy;
                        out.outer_products = Some(last.outer_products);
                    }
                }
                Err(_) => out.status = "unreadable".into(),
            }
        }
        rows.push(out);
    }
    Ok(rows)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{SUMMARY_HEADER}");
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// Fixed-width table for terminals.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<36} {:>6} {:>12} {:>12} {:>8} {:>10}",
        "run", "R", "train_loss", "val_loss", "val_acc", "status"
    );
    let num = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    for r in rows {
        let _ = writeln!(
            s,
            "{:<36} {:>6.3} {:>12} {:>12} {:>8} {:>10}",
            r.run,
            r.reduction_ratio,
            num(r.train_loss),
            num(r.val_loss),
            r.val_accuracy.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into()),
            r.status
        );
    }
    s
}

/// Summarizes and writes `summary.csv` next to the manifest.
pub fn write_summary(manifest: &Path) -> Result<Vec<SummaryRow>> {
    let rows = summarize(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    fs::write(dir.join(SUMMARY_FILE), summary_csv(&rows))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios() {
        assert_eq!(reduction_ratio("exact", 64, 64), 1.0);
        assert_eq!(reduction_ratio("topk", 8, 64), 0.125);
        assert_eq!(reduction_ratio("memsgd", 8, 64), 1.0);
    }

    #[test]
    fn missing_csv_is_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("manifest.csv");
        fs::write(
            &manifest,
            "run,task,policy,k,batch_size,memory,seed,selection_seed,csv,status,message\n\
             mnist_topk_k8_mem1_seed0,mnist,topk,8,64,1,0,1,gone.csv,ok,\n",
        )
        .unwrap();
        let rows = summarize(&manifest).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].status, "missing");
        assert_eq!(rows[0].reduction_ratio, 0.125);
        assert!(format_table(&rows).contains("missing"));
    }
}
