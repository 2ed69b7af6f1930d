//! Experiment configurations and reports on disk.

use std::fmt::Write as _;

use std::path::Path;

use serde::{Deserialize, Serialize};
use vca_core::sim::{ExperimentConfig, ExperimentReport};

use crate::error::{Error, Result};
use crate::fsio;

pub const REPORT_VERSION: u32 = 1;

pub fn parse_config(path: &Path, text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
    cfg.validate()
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(path, &fsio::read_to_string(path)?)
}

#[derive(Serialize)]
struct ReportOut<'a> {
    version: u32,
    #[serde(flatten)]
    report: &'a ExperimentReport,
}

#[derive(Deserialize)]
struct ReportIn {
    version: u32,
    #[serde(flatten)]
    report: ExperimentReport,
}

pub fn report_json(report: &ExperimentReport) -> String {
    let mut s = serde_json::to_string_pretty(&ReportOut {
        version: REPORT_VERSION,
        report,
    })
    .expect("report serializes");
    s.push('\n');
    s
}

pub fn save_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    fsio::write_bytes(path, report_json(report).as_bytes())
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    let r: ReportIn = serde_json::from_str(&fsio::read_to_string(path)?)
        .map_err(|e| Error::format(path, e.to_string()))?;
    if r.version != REPORT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported report version {}", r.version),
        ));
    }
    Ok(r.report)
}

/// One row per (arm, K) with the mean over seeds, then one row per seed.
pub fn report_csv(report: &ExperimentReport) -> String {
    let mut s = String::from("arm,k,seed_index,eer,min_dcf\n");
    for a in &report.aggregates {
        let _ = writeln!(
            s,
            "{},{},mean,{:.6},{:.6}",
            a.arm.as_str(),
            a.k,
            a.mean_eer,
            a.mean_min_dcf
        );
    }
    for seed in &report.seeds {
        for r in &seed.results {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6}",
                r.arm.as_str(),
                r.k,
                seed.seed_index,
                r.eer,
                r.min_dcf
            );
        }
    }
    s
}

pub fn save_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    fsio::write_atomic(path, |w| w.write_all(report_csv(report).as_bytes()))
}
