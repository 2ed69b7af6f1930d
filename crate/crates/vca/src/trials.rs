//! Trial lists, score files and evaluation reports.
//!
//! Trial lines are `<0|1> <utt_a> <utt_b>`; score lines are
//! `<utt_a> <utt_b> <score>` with six fractional digits.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vca_core::{EvalReport, Trial};

use crate::error::{Error, Result};
use crate::fsio;

pub fn parse_trials(path: &Path, text: &str) -> Result<Vec<Trial>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [label, a, b] => {
                let target = match *label {
                    "1" => true,
                    "0" => false,
                    other => {
                        return Err(Error::line(
                            path,
                            i + 1,
                            format!("label must be 0 or 1, got {other:?}"),
                        ))
                    }
                };
                out.push(Trial::new(target, *a, *b));
            }
            _ => {
                return Err(Error::line(
                    path,
                    i + 1,
                    format!("expected 3 fields, found {}", fields.len()),
                ))
            }
        }
    }
    Ok(out)
}

pub fn load_trials(path: &Path) -> Result<Vec<Trial>> {
    parse_trials(path, &fsio::read_to_string(path)?)
}

pub fn save_trials(trials: &[Trial], path: &Path) -> Result<()> {
    fsio::write_atomic(path, |w| {
        for t in trials {
            writeln!(w, "{} {} {}", u8::from(t.target), t.utt_a, t.utt_b)?;
        }
        Ok(())
    })
}

pub fn save_scores(trials: &[Trial], scores: &[f64], path: &Path) -> Result<()> {
    fsio::write_atomic(path, |w| {
        for (t, s) in trials.iter().zip(scores) {
            writeln!(w, "{} {} {:.6}", t.utt_a, t.utt_b, s)?;
        }
        Ok(())
    })
}

pub const REPORT_VERSION: u32 = 1;

/// Evaluation report as written to disk. An infinite EER threshold is
/// written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: u32,
    pub n_trials: usize,
    pub eer: f64,
    pub min_dcf: f64,
    pub p_target: f64,
    pub c_miss: f64,
    pub c_fa: f64,
    pub threshold_at_eer: Option<f64>,
}

impl From<&EvalReport> for ReportFile {
    fn from(r: &EvalReport) -> Self {
        Self {
            version: REPORT_VERSION,
            n_trials: r.n_trials,
            eer: r.eer,
            min_dcf: r.min_dcf,
            p_target: r.p_target,
            c_miss: r.c_miss,
            c_fa: r.c_fa,
            threshold_at_eer: r.threshold_at_eer.is_finite().then_some(r.threshold_at_eer),
        }
    }
}

pub fn save_report(report: &EvalReport, path: &Path) -> Result<()> {
    let file = ReportFile::from(report);
    fsio::write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, &file)?;
        w.write_all(b"\n")
    })
}

pub fn load_report(path: &Path) -> Result<ReportFile> {
    let r: ReportFile = serde_json::from_str(&fsio::read_to_string(path)?)
        .map_err(|e| Error::format(path, e.to_string()))?;
    if r.version != REPORT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported report version {}", r.version),
        ));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_trials() {
        let t = parse_trials(Path::new("t"), "1 a b\n\n0  a   c\n").unwrap();
        assert_eq!(
            t,
            vec![Trial::new(true, "a", "b"), Trial::new(false, "a", "c")]
        );
        let e = parse_trials(Path::new("t"), "1 a b\n2 a b\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains(":2:"), "{e}");
        assert!(parse_trials(Path::new("t"), "1 a\n").is_err());
    }

    #[test]
    fn score_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s");
        save_scores(&[Trial::new(true, "a", "b")], &[0.123_456_78], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a b 0.123457\n");
    }
}
