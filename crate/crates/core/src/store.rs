//! Id-indexed embedding vectors.
//!
//! Vectors are held as `f32` (the on-disk precision) so that a store
//! round-trips through its file form bit-exactly; every consumer widens to
//! `f64` before doing arithmetic. Entries are kept in ascending id order,
//! which is also the canonical serialisation order.

use alloc::collections::btree_map::{self, BTreeMap};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingStore {
    dim: usize,
    entries: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    /// An empty store. A zero `dim` is representable so that loaders and
    /// writers can report it, but no entry can be inserted into it.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, utt_id: &str) -> bool {
        self.entries.contains_key(utt_id)
    }

    /// Inserts an `f32` vector as-is.
    pub fn insert_f32(&mut self, utt_id: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let utt_id = utt_id.into();
        if self.dim == 0 {
            return Err(Error::ZeroDim);
        }
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(utt_id));
        }
        match self.entries.entry(utt_id) {
            btree_map::Entry::Occupied(e) => Err(Error::DuplicateId(e.key().clone())),
            btree_map::Entry::Vacant(e) => {
                e.insert(vector);
                Ok(())
            }
        }
    }

    /// Inserts a working-precision vector, rounding each component to `f32`.
    pub fn insert(&mut self, utt_id: impl Into<String>, vector: &[f64]) -> Result<()> {
        let utt_id = utt_id.into();
        let narrowed: Vec<f32> = vector.iter().map(|&v| v as f32).collect();
        if vector
            .iter()
            .zip(&narrowed)
            .any(|(w, n)| w.is_finite() != n.is_finite())
        {
            return Err(Error::NonFinite(utt_id));
        }
        self.insert_f32(utt_id, narrowed)
    }

    pub fn get(&self, utt_id: &str) -> Result<&[f32]> {
        self.entries
            .get(utt_id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownId(utt_id.to_string()))
    }

    /// The stored vector widened to `f64`.
    pub fn get_f64(&self, utt_id: &str) -> Result<Vec<f64>> {
        Ok(widen(self.get(utt_id)?))
    }

    /// Like [`get_f64`](Self::get_f64) but reports the id as a missing
    /// embedding rather than an unknown id.
    pub fn embedding(&self, utt_id: &str) -> Result<Vec<f64>> {
        self.entries
            .get(utt_id)
            .map(|v| widen(v))
            .ok_or_else(|| Error::MissingEmbedding(utt_id.to_string()))
    }

    /// Entries in ascending id order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Adds every entry of `other`. Fails without modifying `self` on a
    /// dimension mismatch or an id collision.
    pub fn merge(&mut self, other: &EmbeddingStore) -> Result<()> {
        if other.is_empty() {
            return Ok(());
        }
        if other.dim != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if let Some(id) = other.entries.keys().find(|k| self.entries.contains_key(*k)) {
            return Err(Error::DuplicateId(id.clone()));
        }
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
        Ok(())
    }

    /// Builds a new store by mapping every vector (widened to `f64`) through
    /// `f`, which must return vectors of dimension `out_dim`.
    pub fn map_vectors<F>(&self, out_dim: usize, mut f: F) -> Result<EmbeddingStore>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut out = EmbeddingStore::new(out_dim);
        for (id, v) in self.iter() {
            out.insert(id, &f(&widen(v))?)?;
        }
        Ok(out)
    }
}

pub fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}
