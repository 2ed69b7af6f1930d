//! VCAE embedding files.
//!
//! Little-endian layout: magic `VCAE`, `u32` version (1), `u32` dim, `u64`
//! count, then `count` records of `{u32 id length, UTF-8 id, dim × f32}`.
//! Records are written in ascending id order, so equal stores produce equal
//! bytes.

use std::path::Path;

use vca_core::EmbeddingStore;

use crate::error::{Error, Result};
use crate::fsio;

pub const MAGIC: [u8; 4] = *b"VCAE";
pub const VERSION: u32 = 1;

pub fn encode(store: &EmbeddingStore) -> Result<Vec<u8>, String> {
    if store.dim() == 0 {
        return Err("refusing to write a store with dim 0".into());
    }
    let dim = u32::try_from(store.dim()).map_err(|_| "dim exceeds u32")?;
    let mut out = Vec::with_capacity(20 + store.len() * (8 + 4 * store.dim()));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(store.len() as u64).to_le_bytes());
    for (id, v) in store.iter() {
        let len = u32::try_from(id.len()).map_err(|_| format!("id {id:?} too long"))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!(
                "truncated payload: {what} needs {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )),
        }
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn string(&mut self, what: &str) -> Result<String, String> {
        let len = self.u32(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| format!("{what} is not valid UTF-8"))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn magic(&mut self, magic: &[u8; 4]) -> Result<(), String> {
        let m = self.take(4, "magic")?;
        if m != magic {
            return Err(format!("bad magic {m:02x?}, expected {magic:02x?}"));
        }
        Ok(())
    }

    pub(crate) fn version(&mut self, supported: u32) -> Result<(), String> {
        let v = self.u32("version")?;
        if v != supported {
            return Err(format!("unsupported version {v} (supported: {supported})"));
        }
        Ok(())
    }
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingStore, String> {
    let mut c = Cursor::new(bytes);
    c.magic(&MAGIC)?;
    c.version(VERSION)?;
    let dim = c.u32("dim")? as usize;
    let count = c.u64("count")?;
    if dim == 0 {
        return Err("header dim is 0".into());
    }
    let mut store = EmbeddingStore::new(dim);
    for i in 0..count {
        let id = c.string(&format!("id of record {i}"))?;
        let raw = c.take(4 * dim, &format!("vector of record {i} ({id:?})"))?;
        let v: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        store
            .insert_f32(id.as_str(), v)
            .map_err(|e| format!("record {i}: {e}"))?;
    }
    if c.remaining() != 0 {
        return Err(format!(
            "{} trailing bytes after {count} records",
            c.remaining()
        ));
    }
    Ok(store)
}

pub fn load_store(path: &Path) -> Result<EmbeddingStore> {
    decode(&fsio::read(path)?).map_err(|m| Error::format(path, m))
}

pub fn save_store(store: &EmbeddingStore, path: &Path) -> Result<()> {
    let bytes = encode(store).map_err(|m| Error::format(path, m))?;
    fsio::write_bytes(path, &bytes)
}
