//! Scenario directories: `targets.jsonl`, `sources.jsonl` (manifest
//! schema), `scenario.json` (kind, configuration and seed) and
//! `truth.jsonl` (held-out labels of unlabelled sources, one
//! `{"utt_id", "speaker_id"}` object per line).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vca_core::{HeldOutTruth, Scenario, ScenarioConfig, ScenarioKind};

use crate::error::{Error, Result};
use crate::fsio;
use crate::manifest::{check_keys, json_lines, load_manifest, save_manifest};

pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    version: u32,
    kind: ScenarioKind,
    config: ScenarioConfig,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct TruthLine {
    utt_id: String,
    speaker_id: String,
}

pub fn save_scenario(scenario: &Scenario, truth: &HeldOutTruth, dir: &Path) -> Result<()> {
    fsio::write_dir_atomic(dir, |tmp| {
        save_manifest(&scenario.targets, &tmp.join("targets.jsonl"))?;
        save_manifest(&scenario.sources, &tmp.join("sources.jsonl"))?;
        let meta = Meta {
            version: VERSION,
            kind: scenario.kind(),
            config: scenario.config.clone(),
            seed: scenario.config.seed,
        };
        fsio::write_atomic(&tmp.join("scenario.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, &meta)?;
            w.write_all(b"\n")
        })?;
        fsio::write_atomic(&tmp.join("truth.jsonl"), |w| {
            for (utt_id, speaker_id) in truth.iter() {
                let line = TruthLine {
                    utt_id: utt_id.into(),
                    speaker_id: speaker_id.into(),
                };
                serde_json::to_writer(&mut *w, &line)?;
                w.write_all(b"\n")?;
            }
            Ok(())
        })
    })
}

pub fn load_scenario(dir: &Path) -> Result<(Scenario, HeldOutTruth)> {
    let meta_path = dir.join("scenario.json");
    let meta: Meta = serde_json::from_str(&fsio::read_to_string(&meta_path)?)
        .map_err(|e| Error::format(&meta_path, e.to_string()))?;
    if meta.version != VERSION {
        return Err(Error::format(
            &meta_path,
            format!("unsupported scenario version {}", meta.version),
        ));
    }
    if meta.kind != meta.config.kind || meta.seed != meta.config.seed {
        return Err(Error::format(&meta_path, "kind/seed disagree with config"));
    }
    let scenario = Scenario {
        config: meta.config,
        targets: load_manifest(&dir.join("targets.jsonl"))?,
        sources: load_manifest(&dir.join("sources.jsonl"))?,
    };
    let truth_path = dir.join("truth.jsonl");
    let text = fsio::read_to_string(&truth_path)?;
    let mut truth = BTreeMap::new();
    for item in json_lines(&truth_path, &text) {
        let (line, obj) = item?;
        check_keys(&truth_path, line, &obj, &["utt_id", "speaker_id"], &[])?;
        let t: TruthLine = serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| Error::line(&truth_path, line, e.to_string()))?;
        if truth.insert(t.utt_id.clone(), t.speaker_id).is_some() {
            return Err(Error::line(
                &truth_path,
                line,
                format!("duplicate utt_id {:?}", t.utt_id),
            ));
        }
    }
    Ok((scenario, HeldOutTruth::new(truth)))
}
