//! Plan files (JSON Lines).
//!
//! The first line is a header `{"version", "strategy", "K", "seed",
//! "phi_tag"}`; each following line is one conversion job with the keys
//! `job_id`, `target_utt`, `source_utt`, `assigned_speaker`, `k_index` and
//! `pseudo_utt_id`, in canonical order. Plans emitted for an external
//! converter also carry `target_audio_path` and `source_audio_path`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vca_core::{AugmentationPlan, ConversionJob, Strategy, UtteranceRecord};

use crate::error::{Error, Result};
use crate::fsio;
use crate::manifest::{check_keys, json_lines};

pub const VERSION: u32 = 1;

const HEADER_KEYS: [&str; 5] = ["version", "strategy", "K", "seed", "phi_tag"];
const JOB_KEYS: [&str; 6] = [
    "job_id",
    "target_utt",
    "source_utt",
    "assigned_speaker",
    "k_index",
    "pseudo_utt_id",
];
const AUDIO_KEYS: [&str; 2] = ["target_audio_path", "source_audio_path"];

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    strategy: Strategy,
    #[serde(rename = "K")]
    k: usize,
    seed: Option<u64>,
    phi_tag: Option<String>,
}

#[derive(Serialize)]
struct EmittedJob<'a> {
    #[serde(flatten)]
    job: &'a ConversionJob,
    target_audio_path: Option<&'a str>,
    source_audio_path: Option<&'a str>,
}

/// Audio paths of the endpoints of a job, as parsed from an emitted plan.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JobAudio {
    pub target: Option<String>,
    pub source: Option<String>,
}

fn write_header(w: &mut dyn Write, plan: &AugmentationPlan) -> std::io::Result<()> {
    let header = Header {
        version: VERSION,
        strategy: plan.strategy,
        k: plan.k,
        seed: plan.seed,
        phi_tag: plan.phi_tag.clone(),
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")
}

pub fn write_plan(w: &mut dyn Write, plan: &AugmentationPlan) -> std::io::Result<()> {
    write_header(w, plan)?;
    for job in &plan.jobs {
        serde_json::to_writer(&mut *w, job)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_plan(plan: &AugmentationPlan, path: &Path) -> Result<()> {
    fsio::write_atomic(path, |w| write_plan(w, plan))
}

/// Writes `plan` for an external converter, adding the audio path of each
/// job's target and source as found in `records` (null when unknown).
pub fn emit_external_jobs(
    plan: &AugmentationPlan,
    records: &[UtteranceRecord],
    path: &Path,
) -> Result<()> {
    let audio: BTreeMap<&str, &str> = records
        .iter()
        .filter_map(|r| Some((r.utt_id.as_str(), r.audio_path.as_deref()?)))
        .collect();
    fsio::write_atomic(path, |w| {
        write_header(w, plan)?;
        for job in &plan.jobs {
            let line = EmittedJob {
                job,
                target_audio_path: audio.get(job.target_utt.as_str()).copied(),
                source_audio_path: audio.get(job.source_utt.as_str()).copied(),
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Parses a plan file. Audio paths are returned per job when present.
pub fn parse_plan(path: &Path, text: &str) -> Result<(AugmentationPlan, Vec<JobAudio>)> {
    let mut lines = json_lines(path, text);
    let Some(first) = lines.next() else {
        return Err(Error::format(path, "empty plan file (missing header)"));
    };
    let (line, obj) = first?;
    check_keys(path, line, &obj, &HEADER_KEYS, &[])?;
    let header: Header = serde_json::from_value(Value::Object(obj))
        .map_err(|e| Error::line(path, line, format!("bad plan header: {e}")))?;
    if header.version != VERSION {
        return Err(Error::line(
            path,
            line,
            format!(
                "unsupported plan version {} (supported: {VERSION})",
                header.version
            ),
        ));
    }
    let mut jobs = Vec::new();
    let mut audio = Vec::new();
    for item in lines {
        let (line, mut obj) = item?;
        check_keys(path, line, &obj, &JOB_KEYS, &AUDIO_KEYS)?;
        let mut take = |key: &str| -> Result<Option<String>> {
            match obj.remove(key) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s)),
                Some(_) => Err(Error::line(
                    path,
                    line,
                    format!("{key} must be a string or null"),
                )),
            }
        };
        let a = JobAudio {
            target: take("target_audio_path")?,
            source: take("source_audio_path")?,
        };
        let job: ConversionJob = serde_json::from_value(Value::Object(obj))
            .map_err(|e| Error::line(path, line, format!("bad job: {e}")))?;
        let expected = ConversionJob::new(
            &job.target_utt,
            &job.source_utt,
            &job.assigned_speaker,
            job.k_index,
        );
        if job != expected {
            return Err(Error::line(
                path,
                line,
                format!(
                    "job {:?} has non-canonical job_id or pseudo_utt_id",
                    job.job_id
                ),
            ));
        }
        jobs.push(job);
        audio.push(a);
    }
    if jobs.len() % header.k.max(1) != 0 || (header.k == 0 && !jobs.is_empty()) {
        return Err(Error::format(
            path,
            format!("{} jobs is not a multiple of K={}", jobs.len(), header.k),
        ));
    }
    let plan = AugmentationPlan::from_jobs(
        header.strategy,
        header.k,
        jobs.clone(),
        header.seed,
        header.phi_tag,
    );
    if plan.jobs != jobs {
        return Err(Error::format(path, "jobs are not in canonical order"));
    }
    Ok((plan, audio))
}

pub fn load_plan(path: &Path) -> Result<AugmentationPlan> {
    Ok(parse_plan(path, &fsio::read_to_string(path)?)?.0)
}

pub fn load_emitted(path: &Path) -> Result<(AugmentationPlan, Vec<JobAudio>)> {
    parse_plan(path, &fsio::read_to_string(path)?)
}
