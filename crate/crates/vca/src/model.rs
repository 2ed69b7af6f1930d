//! VCAM model checkpoints.
//!
//! Little-endian layout: magic `VCAM`, `u32` version (1), `u32` d, `u32`
//! n_classes, A (d×d, row-major f64), C (n_classes×d, row-major f64), then
//! n_classes entries of `{u32 length, UTF-8 speaker id}` in row order.

use std::path::Path;

use vca_core::LinearSpeakerModel;

use crate::error::{Error, Result};
use crate::fsio;
use crate::vcae::Cursor;

pub const MAGIC: [u8; 4] = *b"VCAM";
pub const VERSION: u32 = 1;

pub fn encode(model: &LinearSpeakerModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(model.n_classes() as u32).to_le_bytes());
    for x in model.a().iter().chain(model.c()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for c in model.classes() {
        out.extend_from_slice(&(c.len() as u32).to_le_bytes());
        out.extend_from_slice(c.as_bytes());
    }
    out
}

fn f64s(c: &mut Cursor<'_>, n: usize, what: &str) -> Result<Vec<f64>, String> {
    let bytes = n.checked_mul(8).ok_or("matrix size overflows")?;
    Ok(c.take(bytes, what)?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

pub fn decode(bytes: &[u8]) -> Result<LinearSpeakerModel, String> {
    let mut c = Cursor::new(bytes);
    c.magic(&MAGIC)?;
    c.version(VERSION)?;
    let d = c.u32("d")? as usize;
    let n = c.u32("n_classes")? as usize;
    let a = f64s(&mut c, d.checked_mul(d).ok_or("d overflows")?, "matrix A")?;
    let cm = f64s(
        &mut c,
        n.checked_mul(d).ok_or("n_classes overflows")?,
        "matrix C",
    )?;
    let classes = (0..n)
        .map(|i| c.string(&format!("class {i}")))
        .collect::<Result<Vec<_>, _>>()?;
    if c.remaining() != 0 {
        return Err(format!("{} trailing bytes", c.remaining()));
    }
    LinearSpeakerModel::from_parts(d, a, cm, classes).map_err(|e| e.to_string())
}

pub fn load_model(path: &Path) -> Result<LinearSpeakerModel> {
    decode(&fsio::read(path)?).map_err(|m| Error::format(path, m))
}

pub fn save_model(model: &LinearSpeakerModel, path: &Path) -> Result<()> {
    fsio::write_bytes(path, &encode(model))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> LinearSpeakerModel {
        LinearSpeakerModel::from_parts(
            2,
            vec![1.0, 0.5, -0.25, 2.0],
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let bytes = encode(&m);
        assert_eq!(bytes.len(), 16 + 8 * (4 + 6) + 3 * 5);
        assert_eq!(decode(&bytes).unwrap(), m);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode(&model());
        assert!(decode(&bytes[..bytes.len() - 1])
            .unwrap_err()
            .contains("truncated"));
        let mut b = bytes.clone();
        b.push(0);
        assert!(decode(&b).unwrap_err().contains("trailing"));
        let mut b = bytes.clone();
        b[4] = 9;
        assert!(decode(&b).unwrap_err().contains("version"));
        let mut b = bytes;
        b[16..24].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode(&b).is_err());
    }
}
