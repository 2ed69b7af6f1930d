//! Utterance manifests and external result manifests (JSON Lines).
//!
//! Manifest lines carry exactly the keys `utt_id`, `speaker_id`,
//! `audio_path`, `origin`, `source_utt`, `target_utt` and `k_index`. Result
//! manifests use the same schema plus an optional `status` (`"ok"` or
//! `"failed:<reason>"`).

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};
use vca_core::UtteranceRecord;

use crate::error::{Error, Result};
use crate::fsio;

pub const KEYS: [&str; 7] = [
    "utt_id",
    "speaker_id",
    "audio_path",
    "origin",
    "source_utt",
    "target_utt",
    "k_index",
];

/// Non-empty lines of a JSON Lines file as (1-based line number, object).
pub(crate) fn json_lines<'a>(
    path: &'a Path,
    text: &'a str,
) -> impl Iterator<Item = Result<(usize, Map<String, Value>)>> + 'a {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(move |(i, l)| match serde_json::from_str::<Value>(l) {
            Ok(Value::Object(m)) => Ok((i + 1, m)),
            Ok(_) => Err(Error::line(path, i + 1, "expected a JSON object")),
            Err(e) => Err(Error::line(path, i + 1, format!("malformed JSON: {e}"))),
        })
}

pub(crate) fn check_keys(
    path: &Path,
    line: usize,
    obj: &Map<String, Value>,
    required: &[&str],
    optional: &[&str],
) -> Result<()> {
    if let Some(k) = required.iter().find(|k| !obj.contains_key(**k)) {
        return Err(Error::line(path, line, format!("missing key {k:?}")));
    }
    if let Some(k) = obj
        .keys()
        .find(|k| !required.contains(&k.as_str()) && !optional.contains(&k.as_str()))
    {
        return Err(Error::line(path, line, format!("unexpected key {k:?}")));
    }
    Ok(())
}

fn parse_record(path: &Path, line: usize, obj: Map<String, Value>) -> Result<UtteranceRecord> {
    let rec: UtteranceRecord = serde_json::from_value(Value::Object(obj))
        .map_err(|e| Error::line(path, line, format!("bad record: {e}")))?;
    rec.validate()
        .map_err(|e| Error::line(path, line, e.to_string()))?;
    Ok(rec)
}

fn check_unique(
    path: &Path,
    seen: &mut HashMap<String, usize>,
    id: &str,
    line: usize,
) -> Result<()> {
    if let Some(first) = seen.insert(id.to_string(), line) {
        return Err(Error::line(
            path,
            line,
            format!("duplicate utt_id {id:?} (first on line {first})"),
        ));
    }
    Ok(())
}

pub fn parse_manifest(path: &Path, text: &str) -> Result<Vec<UtteranceRecord>> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for item in json_lines(path, text) {
        let (line, obj) = item?;
        check_keys(path, line, &obj, &KEYS, &[])?;
        let rec = parse_record(path, line, obj)?;
        check_unique(path, &mut seen, &rec.utt_id, line)?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<UtteranceRecord>> {
    parse_manifest(path, &fsio::read_to_string(path)?)
}

pub fn write_records(w: &mut dyn Write, records: &[UtteranceRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_manifest(records: &[UtteranceRecord], path: &Path) -> Result<()> {
    fsio::write_atomic(path, |w| write_records(w, records))
}

/// One line of a result manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultEntry {
    pub record: UtteranceRecord,
    pub status: Option<String>,
}

impl ResultEntry {
    /// Absent status counts as success.
    pub fn is_ok(&self) -> bool {
        self.status.as_deref().is_none_or(|s| s == "ok")
    }
}

pub fn parse_results(path: &Path, text: &str) -> Result<Vec<ResultEntry>> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for item in json_lines(path, text) {
        let (line, mut obj) = item?;
        check_keys(path, line, &obj, &KEYS, &["status"])?;
        let status = match obj.remove("status") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => return Err(Error::line(path, line, "status must be a string")),
        };
        let record = parse_record(path, line, obj)?;
        check_unique(path, &mut seen, &record.utt_id, line)?;
        out.push(ResultEntry { record, status });
    }
    Ok(out)
}

pub fn load_results(path: &Path) -> Result<Vec<ResultEntry>> {
    parse_results(path, &fsio::read_to_string(path)?)
}

pub fn save_results(entries: &[ResultEntry], path: &Path) -> Result<()> {
    fsio::write_atomic(path, |w| {
        for e in entries {
            let mut v = serde_json::to_value(&e.record)?;
            if let (Value::Object(m), Some(s)) = (&mut v, &e.status) {
                m.insert("status".into(), Value::String(s.clone()));
            }
            serde_json::to_writer(&mut *w, &v)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}
