//! CSV summaries and JSON sidecars for experiment reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiment::{LrtReport, SimReport};
use crate::error::{Error, Result};

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Experiment(format!("writing {}: {e}", path.display()))
}

fn fmt_p(p: Option<f64>) -> String {
    p.map(|p| p.to_string()).unwrap_or_default()
}

/// One row per estimator and pilot fraction.
pub fn estimation_csv(report: &SimReport) -> Result<String> {
    let cfg = &report.config;
    let d = cfg.beta_true.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> =
        ["family", "sharding", "N", "K", "B", "base_seed", "estimator", "pilot_fraction", "armse"].map(String::from).to_vec();
    header.extend((1..=d).map(|j| format!("rmse_{j}")));
    header.extend(["successes".to_string(), "failures".to_string()]);
    w.write_record(&header).map_err(|e| Error::Experiment(e.to_string()))?;
    for s in &report.summary {
        let mut row = vec![
            cfg.family.to_string(),
            cfg.sharding.to_string(),
            cfg.n_total.to_string(),
            cfg.workers.to_string(),
            cfg.replications.to_string(),
            cfg.base_seed.to_string(),
            s.estimator.label().to_string(),
            fmt_p(s.pilot_fraction),
            format!("{:.6}", s.armse),
        ];
        row.extend(s.rmse.iter().map(|r| format!("{r:.6}")));
        row.extend([s.successes.to_string(), s.failures.to_string()]);
        w.write_record(&row).map_err(|e| Error::Experiment(e.to_string()))?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Experiment(e.to_string()))?)
        .map_err(|e| Error::Experiment(e.to_string()))
}

/// One row per test method and pilot fraction.
pub fn lrt_csv(report: &LrtReport) -> Result<String> {
    let cfg = &report.config;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "family", "sharding", "N", "K", "B", "base_seed", "beta_alt", "alpha", "method", "pilot_fraction", "size", "power",
        "null_failures", "alt_failures",
    ])
    .map_err(|e| Error::Experiment(e.to_string()))?;
    for s in &report.summary {
        w.write_record([
            cfg.sim.family.to_string(),
            cfg.sim.sharding.to_string(),
            cfg.sim.n_total.to_string(),
            cfg.sim.workers.to_string(),
            cfg.sim.replications.to_string(),
            cfg.sim.base_seed.to_string(),
            cfg.beta_alt.to_string(),
            cfg.alpha.to_string(),
            s.method.label().to_string(),
            fmt_p(s.pilot_fraction),
            format!("{:.4}", s.size),
            format!("{:.4}", s.power),
            s.null_failures.to_string(),
            s.alt_failures.to_string(),
        ])
        .map_err(|e| Error::Experiment(e.to_string()))?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Experiment(e.to_string()))?)
        .map_err(|e| Error::Experiment(e.to_string()))
}

fn write_pair(dir: &Path, stem: &str, csv: &str, json: &impl Serialize) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&csv_path, csv).map_err(|e| io_err(&csv_path, e))?;
    let body = serde_json::to_string_pretty(json).map_err(|e| io_err(&json_path, e))?;
    fs::write(&json_path, body + "\n").map_err(|e| io_err(&json_path, e))?;
    Ok((csv_path, json_path))
}

/// Writes `<stem>.csv` and the raw-record sidecar `<stem>.json` into `dir`.
pub fn write_estimation_report(report: &SimReport, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    write_pair(dir, stem, &estimation_csv(report)?, report)
}

pub fn write_lrt_report(report: &LrtReport, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    write_pair(dir, stem, &lrt_csv(report)?, report)
}
