//! Executing augmentation plans.
//!
//! The synthetic backend models voice conversion directly in embedding
//! space: the pseudo embedding sits on the target utterance, drifts towards
//! the source in proportion to their mismatch, and picks up noise that also
//! grows with the mismatch. The external backend merges embeddings produced
//! by a real conversion system.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::record::{Origin, UtteranceRecord};
use crate::seed::rng_for;
use crate::select::{dot, norm, AugmentationPlan, ConversionJob};
use crate::store::EmbeddingStore;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SyntheticVcParams {
    pub sigma_base: f64,
    pub lambda_noise: f64,
    pub lambda_drift: f64,
    pub seed: u64,
}

impl Default for SyntheticVcParams {
    fn default() -> Self {
        Self {
            sigma_base: 0.05,
            lambda_noise: 0.5,
            lambda_drift: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticVcParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_base.is_finite()
            && self.lambda_noise.is_finite()
            && self.sigma_base >= 0.0
            && self.lambda_noise >= 0.0
            && (0.0..=1.0).contains(&self.lambda_drift);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid synthetic VC parameters {self:?}"
            )))
        }
    }
}

/// The manifest record of the pseudo utterance a job produces.
pub fn pseudo_record(job: &ConversionJob) -> UtteranceRecord {
    UtteranceRecord {
        utt_id: job.pseudo_utt_id.clone(),
        speaker_id: Some(job.assigned_speaker.clone()),
        audio_path: None,
        origin: Origin::Pseudo,
        source_utt: Some(job.source_utt.clone()),
        target_utt: Some(job.target_utt.clone()),
        k_index: Some(job.k_index),
    }
}

fn unit(v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    let n = norm(&v);
    if n == 0.0 {
        return Err(Error::ZeroNorm(what.to_string()));
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

/// Source–target mismatch `d = (1 - cos)/2` of two unit vectors, in [0, 1].
pub fn mismatch(source_unit: &[f64], target_unit: &[f64]) -> f64 {
    if source_unit == target_unit {
        return 0.0;
    }
    (1.0 - dot(source_unit, target_unit).clamp(-1.0, 1.0)) / 2.0
}

/// Synthesises the pseudo embedding for one job:
/// `normalize(t + λ_drift·d·(s − t) + σ·g)` with `σ = σ_base + λ_noise·d`,
/// `t`, `s` the unit target/source embeddings and `g ~ N(0, I)` drawn from
/// the sub-stream keyed by the job id.
pub fn convert_synthetic(
    job: &ConversionJob,
    store: &EmbeddingStore,
    params: &SyntheticVcParams,
) -> Result<(UtteranceRecord, Vec<f64>)> {
    let t = unit(store.embedding(&job.target_utt)?, &job.target_utt)?;
    let s = unit(store.embedding(&job.source_utt)?, &job.source_utt)?;
    let d = mismatch(&s, &t);
    let sigma = params.sigma_base + params.lambda_noise * d;
    let drift = params.lambda_drift * d;

    let vector = if sigma == 0.0 && drift == 0.0 {
        t
    } else {
        let mut rng = rng_for(params.seed, &job.job_id);
        let y: Vec<f64> = t
            .iter()
            .zip(&s)
            .map(|(ti, si)| {
                let g: f64 = StandardNormal.sample(&mut rng);
                ti + drift * (si - ti) + sigma * g
            })
            .collect();
        unit(y, &job.pseudo_utt_id)?
    };
    Ok((pseudo_record(job), vector))
}

/// A training corpus after augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCorpus {
    pub records: Vec<UtteranceRecord>,
    pub store: EmbeddingStore,
}

/// How pseudo embeddings are obtained.
#[derive(Debug, Clone)]
pub enum Backend {
    Synthetic(SyntheticVcParams),
    /// Results returned by an external conversion system.
    External {
        records: Vec<UtteranceRecord>,
        store: EmbeddingStore,
    },
}

/// Runs `plan` and returns `base` followed by the pseudo records, together
/// with `store` extended by the pseudo embeddings.
pub fn apply_plan(
    plan: &AugmentationPlan,
    base: &[UtteranceRecord],
    store: &EmbeddingStore,
    backend: &Backend,
) -> Result<AugmentedCorpus> {
    match backend {
        Backend::Synthetic(params) => {
            params.validate()?;
            let pseudo = plan
                .jobs
                .iter()
                .map(|job| convert_synthetic(job, store, params))
                .collect::<Result<Vec<_>>>()?;
            assemble(base, store, pseudo)
        }
        Backend::External {
            records,
            store: results,
        } => merge_external(plan, base, store, records, results),
    }
}

/// Appends converted outputs (in the given order) to `base` and `store`.
pub fn assemble(
    base: &[UtteranceRecord],
    store: &EmbeddingStore,
    pseudo: Vec<(UtteranceRecord, Vec<f64>)>,
) -> Result<AugmentedCorpus> {
    let mut merged = store.clone();
    let mut records = base.to_vec();
    records.reserve(pseudo.len());
    for (rec, v) in pseudo {
        merged.insert(rec.utt_id.as_str(), &v)?;
        records.push(rec);
    }
    Ok(AugmentedCorpus {
        records,
        store: merged,
    })
}

/// Validates externally produced pseudo records against the plan and merges
/// them. Records with no speaker label take the job's assigned speaker.
pub fn merge_external(
    plan: &AugmentationPlan,
    base: &[UtteranceRecord],
    store: &EmbeddingStore,
    results: &[UtteranceRecord],
    result_store: &EmbeddingStore,
) -> Result<AugmentedCorpus> {
    if !results.is_empty() && result_store.dim() != store.dim() {
        return Err(Error::DimMismatch {
            expected: store.dim(),
            found: result_store.dim(),
        });
    }
    let jobs: BTreeMap<&str, &ConversionJob> = plan
        .jobs
        .iter()
        .map(|j| (j.pseudo_utt_id.as_str(), j))
        .collect();
    let mut pseudo = Vec::with_capacity(results.len());
    for rec in results {
        rec.validate()?;
        let job = jobs
            .get(rec.utt_id.as_str())
            .ok_or_else(|| Error::UnknownId(rec.utt_id.clone()))?;
        let expected = pseudo_record(job);
        let speaker_ok = rec.speaker_id.is_none() || rec.speaker_id == expected.speaker_id;
        if rec.origin != Origin::Pseudo
            || rec.source_utt != expected.source_utt
            || rec.target_utt != expected.target_utt
            || rec.k_index != expected.k_index
            || !speaker_ok
        {
            return Err(Error::InvalidRecord {
                id: rec.utt_id.clone(),
                reason: "result provenance disagrees with the plan".into(),
            });
        }
        let v = result_store.embedding(&rec.utt_id)?;
        let mut out = expected;
        out.audio_path = rec.audio_path.clone();
        pseudo.push((out, v));
    }
    assemble(base, store, pseudo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::{cosine, Strategy};
    use alloc::vec;

    fn store_with(t: &[f64], s: &[f64]) -> EmbeddingStore {
        let mut st = EmbeddingStore::new(t.len());
        st.insert("t", t).unwrap();
        st.insert("s", s).unwrap();
        st
    }

    fn job() -> ConversionJob {
        ConversionJob::new("t", "s", "T", 0)
    }

    #[test]
    fn identical_source_is_a_fixed_point() {
        let v = [0.3, -0.4, 1.2];
        let st = store_with(&v, &v);
        let p = SyntheticVcParams {
            sigma_base: 0.0,
            ..Default::default()
        };
        let (rec, out) = convert_synthetic(&job(), &st, &p).unwrap();
        let t = unit(st.get_f64("t").unwrap(), "t").unwrap();
        assert_eq!(out, t);
        assert_eq!(rec.utt_id, "t#vca0");
        assert_eq!(rec.speaker_id.as_deref(), Some("T"));
        assert_eq!(rec.origin, Origin::Pseudo);
    }

    #[test]
    fn noiseless_limit_returns_target() {
        let st = store_with(&[1.0, 2.0, 0.0], &[-3.0, 0.5, 1.0]);
        let p = SyntheticVcParams {
            sigma_base: 0.0,
            lambda_noise: 0.0,
            lambda_drift: 0.0,
            seed: 9,
        };
        let (_, out) = convert_synthetic(&job(), &st, &p).unwrap();
        assert_eq!(out, unit(st.get_f64("t").unwrap(), "t").unwrap());
    }

    #[test]
    fn deterministic_per_job() {
        let st = store_with(&[1.0, 2.0, 0.0], &[-3.0, 0.5, 1.0]);
        let p = SyntheticVcParams::default();
        let a = convert_synthetic(&job(), &st, &p).unwrap();
        let b = convert_synthetic(&job(), &st, &p).unwrap();
        assert_eq!(a, b);
        let other = convert_synthetic(&ConversionJob::new("t", "s", "T", 1), &st, &p).unwrap();
        assert_ne!(a.1, other.1);
        assert!(cosine(&a.1, &st.get_f64("t").unwrap()).unwrap() > 0.0);
    }

    #[test]
    fn missing_and_zero_inputs() {
        let st = store_with(&[1.0, 0.0], &[0.0, 0.0]);
        let p = SyntheticVcParams::default();
        assert!(matches!(
            convert_synthetic(&job(), &st, &p),
            Err(Error::ZeroNorm(_))
        ));
        let j = ConversionJob::new("t", "ghost", "T", 0);
        assert_eq!(
            convert_synthetic(&j, &st, &p).err(),
            Some(Error::MissingEmbedding("ghost".into()))
        );
    }

    #[test]
    fn external_merge_rules() {
        let st = store_with(&[1.0, 0.0], &[0.0, 1.0]);
        let base = vec![UtteranceRecord::real("t", Some("T"))];
        let plan = AugmentationPlan::from_jobs(Strategy::Rs, 1, vec![job()], Some(1), None);

        let empty = merge_external(&plan, &base, &st, &[], &EmbeddingStore::new(2)).unwrap();
        assert_eq!(empty.records, base);
        assert_eq!(empty.store, st);

        let mut res = EmbeddingStore::new(2);
        res.insert("t#vca0", &[0.5, 0.5]).unwrap();
        let mut r = pseudo_record(&job());
        r.speaker_id = None;
        let out = merge_external(&plan, &base, &st, &[r.clone()], &res).unwrap();
        assert_eq!(out.store.len(), st.len() + 1);
        assert_eq!(out.records[1].speaker_id.as_deref(), Some("T"));

        let mut stranger = r.clone();
        stranger.utt_id = "zzz".into();
        assert_eq!(
            merge_external(&plan, &base, &st, &[stranger], &res).err(),
            Some(Error::UnknownId("zzz".into()))
        );
        assert!(matches!(
            merge_external(&plan, &base, &st, &[r], &EmbeddingStore::new(3)),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn pseudo_id_colliding_with_real_id_is_rejected() {
        let mut st = store_with(&[1.0, 0.0], &[0.0, 1.0]);
        st.insert("t#vca0", &[1.0, 1.0]).unwrap();
        let plan = AugmentationPlan::from_jobs(Strategy::Rs, 1, vec![job()], Some(1), None);
        let mut res = EmbeddingStore::new(2);
        res.insert("t#vca0", &[0.5, 0.5]).unwrap();
        assert_eq!(
            merge_external(&plan, &[], &st, &[pseudo_record(&job())], &res).err(),
            Some(Error::DuplicateId("t#vca0".into()))
        );
    }
}
