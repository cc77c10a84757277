//! Per-model metric rows and their JSON and CSV renderings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    /// Epoch for neural models, tree index for boosted ensembles.
    pub epoch: usize,
    pub seconds: Option<f64>,
    pub train_loss: f64,
    pub val_mre: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub status: Status,
    pub error: Option<String>,
    /// Fraction; `mre_percent` is the same value × 100.
    pub mre: Option<f64>,
    pub mre_percent: Option<f64>,
    /// Feature precompute plus training, excluding ground-truth labeling.
    pub pt_seconds: Option<f64>,
    /// Part of `pt_seconds` spent on shared work (skip-gram tables) that
    /// sits outside the training budget.
    pub pretrain_seconds: Option<f64>,
    pub qt_mean_us: Option<f64>,
    pub qt_std_us: Option<f64>,
    pub qt_batch_us: Option<f64>,
    pub ms_bytes: Option<u64>,
    pub epochs: Option<usize>,
    pub best_val_mre: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
    pub curve: Vec<CurveRow>,
}

impl MetricReport {
    pub fn failed(model: &str, error: String, seed: u64, config_hash: &str) -> Self {
        MetricReport {
            model: model.to_string(),
            status: Status::Failed,
            error: Some(error),
            mre: None,
            mre_percent: None,
            pt_seconds: None,
            pretrain_seconds: None,
            qt_mean_us: None,
            qt_std_us: None,
            qt_batch_us: None,
            ms_bytes: None,
            epochs: None,
            best_val_mre: None,
            seed,
            config_hash: config_hash.to_string(),
            curve: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    /// Copy without wall-clock fields, which are the only values that
    /// differ between identical seeded runs.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.pt_seconds = None;
        r.pretrain_seconds = None;
        r.qt_mean_us = None;
        r.qt_std_us = None;
        r.qt_batch_us = None;
        for p in &mut r.curve {
            p.seconds = None;
        }
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub n: usize,
    pub m: usize,
    pub content_hash: String,
    /// Vertices dropped by the largest-component pass.
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_hash: String,
    pub seed: u64,
    pub graph: GraphSummary,
    pub train_queries: usize,
    pub test_queries: usize,
    /// How checkpoints were selected during training.
    pub model_selection: String,
    /// Present when timings live in a side file.
    pub timings_file: Option<String>,
    pub reports: Vec<MetricReport>,
    /// Successful models, lowest MRE first.
    pub ranking: Vec<String>,
}

impl BenchReport {
    pub fn all_ok(&self) -> bool {
        self.reports.iter().all(MetricReport::is_ok)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// One row per model in the report's order, all four metrics.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "model",
            "status",
            "mre_percent",
            "pt_seconds",
            "qt_mean_us",
            "qt_std_us",
            "qt_batch_us",
            "ms_bytes",
            "epochs",
            "error",
        ])?;
        let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.reports {
            w.write_record([
                r.model.clone(),
                if r.is_ok() { "ok".into() } else { "failed".into() },
                f(r.mre_percent),
                f(r.pt_seconds),
                f(r.qt_mean_us),
                f(r.qt_std_us),
                f(r.qt_batch_us),
                r.ms_bytes.map(|b| b.to_string()).unwrap_or_default(),
                r.epochs.map(|e| e.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn ranking(reports: &[MetricReport]) -> Vec<String> {
    let mut ok: Vec<(&str, f64)> =
        reports.iter().filter_map(|r| r.mre.filter(|_| r.is_ok()).map(|m| (r.model.as_str(), m))).collect();
    ok.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    ok.into_iter().map(|(n, _)| n.to_string()).collect()
}
