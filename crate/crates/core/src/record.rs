//! Utterance manifest records.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Origin {
    Real,
    Pseudo,
}

/// One utterance: identity, optional speaker label and, for pseudo
/// utterances, the conversion job that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UtteranceRecord {
    pub utt_id: String,
    pub speaker_id: Option<String>,
    pub audio_path: Option<String>,
    pub origin: Origin,
    pub source_utt: Option<String>,
    pub target_utt: Option<String>,
    pub k_index: Option<u32>,
}

impl UtteranceRecord {
    pub fn real(utt_id: impl Into<String>, speaker_id: Option<&str>) -> Self {
        Self {
            utt_id: utt_id.into(),
            speaker_id: speaker_id.map(ToString::to_string),
            audio_path: None,
            origin: Origin::Real,
            source_utt: None,
            target_utt: None,
            k_index: None,
        }
    }

    pub fn is_labelled(&self) -> bool {
        self.speaker_id.is_some()
    }

    /// Checks the origin/provenance invariant.
    pub fn validate(&self) -> Result<()> {
        let provenance = [
            self.source_utt.is_some(),
            self.target_utt.is_some(),
            self.k_index.is_some(),
        ];
        let reason = match self.origin {
            Origin::Pseudo if !provenance.iter().all(|&p| p) => {
                "pseudo record missing provenance (source_utt, target_utt, k_index)"
            }
            Origin::Real if provenance.iter().any(|&p| p) => {
                "real record carries provenance fields"
            }
            _ if self.utt_id.is_empty() => "empty utt_id",
            _ => return Ok(()),
        };
        Err(Error::InvalidRecord {
            id: self.utt_id.clone(),
            reason: reason.to_string(),
        })
    }
}

/// Validates a record list: every record on its own, then id uniqueness.
/// On a duplicate, the error names the id and the 1-based position of the
/// second occurrence.
pub fn validate_records(records: &[UtteranceRecord]) -> Result<()> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        rec.validate()?;
        if let Some(first) = seen.insert(rec.utt_id.as_str(), i + 1) {
            return Err(Error::InvalidRecord {
                id: rec.utt_id.clone(),
                reason: format!(
                    "duplicate utt_id {:?} at position {} (first at {})",
                    rec.utt_id,
                    i + 1,
                    first
                ),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pseudo(id: &str) -> UtteranceRecord {
        UtteranceRecord {
            utt_id: id.into(),
            speaker_id: Some("s".into()),
            audio_path: None,
            origin: Origin::Pseudo,
            source_utt: Some("a".into()),
            target_utt: Some("b".into()),
            k_index: Some(0),
        }
    }

    #[test]
    fn provenance_rules() {
        assert!(pseudo("p").validate().is_ok());
        let mut p = pseudo("p");
        p.k_index = None;
        assert!(p.validate().is_err());
        let mut r = UtteranceRecord::real("r", None);
        assert!(r.validate().is_ok());
        r.source_utt = Some("x".into());
        assert!(r.validate().is_err());
    }

    #[test]
    fn duplicate_names_id_and_position() {
        let recs = vec![
            UtteranceRecord::real("u1", Some("a")),
            UtteranceRecord::real("u2", Some("a")),
            UtteranceRecord::real("u1", Some("b")),
        ];
        let err = validate_records(&recs).unwrap_err().to_string();
        assert!(err.contains("\"u1\""), "{err}");
        assert!(err.contains("position 3"), "{err}");
    }
}
