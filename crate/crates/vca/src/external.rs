//! Exchange with an external voice-conversion system.
//!
//! The converter receives an emitted plan (see [`crate::plan`]) and returns
//! a result manifest plus a VCAE file holding one embedding per successful
//! pseudo utterance.

use std::path::Path;

use vca_core::convert::merge_external;
use vca_core::{AugmentationPlan, AugmentedCorpus, EmbeddingStore, UtteranceRecord};

use crate::error::{Error, Result};
use crate::manifest::load_results;
use crate::vcae::load_store;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnFailed {
    /// Any failed job is an error.
    #[default]
    Abort,
    /// Failed jobs are left out of the augmented corpus.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub corpus: AugmentedCorpus,
    /// Pseudo ids and statuses of the failed jobs that were skipped.
    pub failed: Vec<(String, String)>,
}

pub fn ingest_external_results(
    plan: &AugmentationPlan,
    result_manifest: &Path,
    result_store: &Path,
    base: &[UtteranceRecord],
    store: &EmbeddingStore,
    on_failed: OnFailed,
) -> Result<Ingested> {
    let entries = load_results(result_manifest)?;
    let mut ok = Vec::with_capacity(entries.len());
    let mut failed = Vec::new();
    for e in entries {
        if e.is_ok() {
            ok.push(e.record);
            continue;
        }
        let status = e.status.unwrap_or_default();
        if on_failed == OnFailed::Abort {
            return Err(Error::format(
                result_manifest,
                format!(
                    "job for {:?} failed with status {status:?}",
                    e.record.utt_id
                ),
            ));
        }
        failed.push((e.record.utt_id, status));
    }
    let results = if ok.is_empty() && !result_store.exists() {
        EmbeddingStore::new(store.dim())
    } else {
        load_store(result_store)?
    };
    let corpus = merge_external(plan, base, store, &ok, &results)?;
    Ok(Ingested { corpus, failed })
}
