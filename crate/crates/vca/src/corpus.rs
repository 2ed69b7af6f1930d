//! Corpus directories: `manifest.jsonl` plus `embeddings.vcae`.

use std::collections::BTreeSet;
use std::path::Path;

use vca_core::{EmbeddingStore, UtteranceRecord};

use crate::error::{Error, Result};
use crate::fsio;
use crate::manifest::{load_manifest, save_manifest};
use crate::vcae::{load_store, save_store};

pub const MANIFEST: &str = "manifest.jsonl";
pub const EMBEDDINGS: &str = "embeddings.vcae";

/// Checks that every record has an embedding and returns the store
/// restricted to the manifest's ids.
pub fn join(
    records: &[UtteranceRecord],
    store: &EmbeddingStore,
    store_path: &Path,
) -> Result<EmbeddingStore> {
    let ids: BTreeSet<&str> = records.iter().map(|r| r.utt_id.as_str()).collect();
    if let Some(missing) = ids.iter().find(|id| !store.contains(id)) {
        return Err(Error::format(
            store_path,
            format!("no embedding for manifest record {missing:?}"),
        ));
    }
    let mut out = EmbeddingStore::new(store.dim());
    for (id, v) in store.iter().filter(|(id, _)| ids.contains(id)) {
        out.insert_f32(id, v.to_vec())?;
    }
    let dropped = store.len() - out.len();
    if dropped > 0 {
        log::warn!(
            "{}: {dropped} embeddings have no manifest record and were dropped",
            store_path.display()
        );
    }
    Ok(out)
}

pub fn save_corpus(records: &[UtteranceRecord], store: &EmbeddingStore, dir: &Path) -> Result<()> {
    fsio::write_dir_atomic(dir, |tmp| {
        save_manifest(records, &tmp.join(MANIFEST))?;
        save_store(store, &tmp.join(EMBEDDINGS))
    })
}

pub fn load_corpus(dir: &Path) -> Result<(Vec<UtteranceRecord>, EmbeddingStore)> {
    let records = load_manifest(&dir.join(MANIFEST))?;
    let store = load_store(&dir.join(EMBEDDINGS))?;
    Ok((records, store))
}
