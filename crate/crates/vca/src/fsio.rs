//! Whole-file reads and atomic writes.
//!
//! Writers go to a temporary file in the destination directory which is
//! renamed over the target only after the payload is complete, so a failed
//! run never leaves partial output behind.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::{Error, Result};

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Streams `write` into a temporary sibling of `path`, then renames it into
/// place. If `write` fails the destination is left untouched.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = parent_dir(path);
    let tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |w| w.write_all(bytes))
}

/// Builds a directory by filling a temporary sibling and renaming it over
/// `path`. An existing directory at `path` is replaced.
pub fn write_dir_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let dir = parent_dir(path);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::Builder::new()
        .prefix(".vca-")
        .tempdir_in(dir)
        .map_err(|e| Error::io(path, e))?;
    fill(tmp.path())?;
    if path.is_dir() {
        fs::remove_dir_all(path).map_err(|e| Error::io(path, e))?;
    }
    let tmp_path = tmp.keep();
    fs::rename(&tmp_path, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_write_leaves_target_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_bytes(&p, b"old").unwrap();
        let err = write_atomic(&p, |w| {
            w.write_all(b"partial")?;
            Err(io::Error::other("boom"))
        });
        assert!(err.is_err());
        assert_eq!(fs::read(&p).unwrap(), b"old");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn dir_write_replaces_existing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d");
        write_dir_atomic(&p, |d| write_bytes(&d.join("a"), b"1")).unwrap();
        write_dir_atomic(&p, |d| write_bytes(&d.join("b"), b"2")).unwrap();
        assert!(!p.join("a").exists());
        assert_eq!(fs::read(p.join("b")).unwrap(), b"2");
        let failed = write_dir_atomic(&p, |_| Err(Error::Usage("no".into())));
        assert!(failed.is_err());
        assert!(p.join("b").exists());
    }
}
