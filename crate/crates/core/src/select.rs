//! Source selection for voice-conversion augmentation.
//!
//! `rs` draws each target's sources uniformly at random from the eligible
//! source pool; `nn` takes the K eligible sources with the highest cosine
//! similarity to the target in the Φ embedding space. A source is eligible
//! for a target when it is not the target utterance itself and, where both
//! labels are known, belongs to a different speaker.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::record::UtteranceRecord;
use crate::scenario::Scenario;
use crate::seed::rng_for;
use crate::store::EmbeddingStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Strategy {
    Rs,
    Nn,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Rs => "rs",
            Strategy::Nn => "nn",
        }
    }
}

/// One (target, source) conversion. The pseudo utterance inherits the
/// target's speaker label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConversionJob {
    pub job_id: String,
    pub target_utt: String,
    pub source_utt: String,
    pub assigned_speaker: String,
    pub k_index: u32,
    pub pseudo_utt_id: String,
}

impl ConversionJob {
    pub fn new(target_utt: &str, source_utt: &str, assigned_speaker: &str, k_index: u32) -> Self {
        Self {
            job_id: format!("job:{target_utt}:{k_index}"),
            target_utt: target_utt.to_string(),
            source_utt: source_utt.to_string(),
            assigned_speaker: assigned_speaker.to_string(),
            k_index,
            pseudo_utt_id: pseudo_utt_id(target_utt, k_index),
        }
    }
}

pub fn pseudo_utt_id(target_utt: &str, k_index: u32) -> String {
    format!("{target_utt}#vca{k_index}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentationPlan {
    pub strategy: Strategy,
    /// Generation coefficient: pseudo utterances per target.
    pub k: usize,
    pub jobs: Vec<ConversionJob>,
    pub seed: Option<u64>,
    pub phi_tag: Option<String>,
}

impl AugmentationPlan {
    /// Assembles a plan, putting jobs in canonical (target, k) order.
    pub fn from_jobs(
        strategy: Strategy,
        k: usize,
        mut jobs: Vec<ConversionJob>,
        seed: Option<u64>,
        phi_tag: Option<String>,
    ) -> Self {
        jobs.sort_by(|a, b| {
            a.target_utt
                .cmp(&b.target_utt)
                .then(a.k_index.cmp(&b.k_index))
        });
        Self {
            strategy,
            k,
            jobs,
            seed,
            phi_tag,
        }
    }

    /// Checks every job invariant against the scenario the plan was built
    /// for.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let fail = |id: &str, reason: String| {
            Err(Error::InvalidRecord {
                id: id.to_string(),
                reason,
            })
        };
        let targets: BTreeMap<&str, &UtteranceRecord> = scenario
            .targets
            .iter()
            .map(|r| (r.utt_id.as_str(), r))
            .collect();
        let sources: BTreeSet<&str> = scenario.sources.iter().map(|r| r.utt_id.as_str()).collect();
        if self.jobs.len() != self.k * targets.len() {
            return Err(Error::Config(format!(
                "plan has {} jobs, expected K*|T| = {}",
                self.jobs.len(),
                self.k * targets.len()
            )));
        }
        for (i, chunk) in self.jobs.chunks(self.k.max(1)).enumerate() {
            let target = chunk[0].target_utt.as_str();
            let Some(trec) = targets.get(target) else {
                return fail(target, "target not in scenario target set".into());
            };
            if i > 0 && self.jobs[i * self.k - 1].target_utt.as_str() >= target {
                return fail(target, "jobs not in canonical order".into());
            }
            let mut used = BTreeSet::new();
            for (k, job) in chunk.iter().enumerate() {
                if job.target_utt != target || job.k_index as usize != k {
                    return fail(
                        &job.job_id,
                        format!("expected k_index {k} for target {target}"),
                    );
                }
                if !sources.contains(job.source_utt.as_str()) {
                    return fail(&job.job_id, "source not in scenario source set".into());
                }
                if job.source_utt == job.target_utt || !used.insert(job.source_utt.as_str()) {
                    return fail(&job.job_id, "source repeats or equals the target".into());
                }
                if trec.speaker_id.as_deref() != Some(job.assigned_speaker.as_str()) {
                    return fail(
                        &job.job_id,
                        "assigned speaker differs from target label".into(),
                    );
                }
                if job.pseudo_utt_id != pseudo_utt_id(target, job.k_index) {
                    return fail(&job.job_id, "malformed pseudo_utt_id".into());
                }
            }
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Cosine with precomputed norms. Every similarity in this crate goes
/// through here, so values computed with or without cached norms agree
/// bit for bit.
#[inline]
pub(crate) fn cosine_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0) + 0.0
}

/// Cosine similarity `a·b / (‖a‖‖b‖)`, clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm("cosine operand".into()));
    }
    Ok(cosine_with_norms(a, b, na, nb))
}

/// A candidate's similarity. Orders so that the *worse* candidate compares
/// greater: lower similarity, then larger id.
#[derive(Debug, Clone, Copy)]
struct Ranked<'a> {
    sim: f64,
    id: &'a str,
}

impl Ord for Ranked<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .sim
            .total_cmp(&self.sim)
            .then_with(|| self.id.cmp(other.id))
    }
}

impl PartialOrd for Ranked<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ranked<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked<'_> {}

/// Bounded best-K collector: a max-heap of the kept candidates keyed on
/// "worseness", so the root is the one to evict.
struct BestK<'a> {
    k: usize,
    heap: BinaryHeap<Ranked<'a>>,
}

impl<'a> BestK<'a> {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, cand: Ranked<'a>) {
        if self.heap.len() < self.k {
            self.heap.push(cand);
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if cand < *worst {
                *worst = cand;
            }
        }
    }

    /// Best first.
    fn into_sorted(self) -> Vec<Ranked<'a>> {
        self.heap.into_sorted_vec()
    }
}

/// The `k` candidates most cosine-similar to `target`, best first, ties
/// broken by ascending id. Candidates listed in `excluded`, of the wrong
/// dimension, or with zero norm are skipped. Runs in O(n·d + n log k).
pub fn top_k<'a, I>(
    target: &[f64],
    candidates: I,
    k: usize,
    excluded: &BTreeSet<&str>,
) -> Vec<String>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let nt = norm(target);
    if k == 0 || nt == 0.0 {
        return Vec::new();
    }
    let mut best = BestK::new(k);
    for (id, v) in candidates {
        if v.len() != target.len() || excluded.contains(id) {
            continue;
        }
        let nv = norm(v);
        if nv == 0.0 {
            continue;
        }
        best.offer(Ranked {
            sim: cosine_with_norms(target, v, nt, nv),
            id,
        });
    }
    best.into_sorted()
        .into_iter()
        .map(|r| r.id.to_string())
        .collect()
}

fn is_eligible(target: &UtteranceRecord, source: &UtteranceRecord) -> bool {
    if source.utt_id == target.utt_id {
        return false;
    }
    match (&target.speaker_id, &source.speaker_id) {
        (Some(t), Some(s)) => t != s,
        _ => true,
    }
}

fn target_speaker(target: &UtteranceRecord) -> Result<&str> {
    target
        .speaker_id
        .as_deref()
        .ok_or_else(|| Error::Unlabelled(target.utt_id.clone()))
}

/// Sources of a scenario in ascending id order, for random selection.
pub struct RsPool<'a> {
    sources: Vec<&'a UtteranceRecord>,
    seed: u64,
}

impl<'a> RsPool<'a> {
    pub fn new(scenario: &'a Scenario, seed: u64) -> Self {
        let mut sources: Vec<&UtteranceRecord> = scenario.sources.iter().collect();
        sources.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
        Self { sources, seed }
    }

    /// Jobs for one target: `k` distinct eligible sources drawn without
    /// replacement from the sub-stream keyed by the target id.
    pub fn plan_target(&self, target: &UtteranceRecord, k: usize) -> Result<Vec<ConversionJob>> {
        let speaker = target_speaker(target)?;
        let eligible: Vec<&UtteranceRecord> = self
            .sources
            .iter()
            .copied()
            .filter(|s| is_eligible(target, s))
            .collect();
        if eligible.len() < k {
            return Err(Error::EligiblePool {
                target: target.utt_id.clone(),
                pool: eligible.len(),
                k,
            });
        }
        let mut rng = rng_for(self.seed, &target.utt_id);
        Ok(index::sample(&mut rng, eligible.len(), k)
            .into_iter()
            .enumerate()
            .map(|(ki, i)| {
                ConversionJob::new(&target.utt_id, &eligible[i].utt_id, speaker, ki as u32)
            })
            .collect())
    }
}

/// Random-selection plan.
pub fn plan_rs(scenario: &Scenario, k: usize, seed: u64) -> Result<AugmentationPlan> {
    let pool = RsPool::new(scenario, seed);
    let mut jobs = Vec::with_capacity(k * scenario.targets.len());
    for t in &scenario.targets {
        jobs.extend(pool.plan_target(t, k)?);
    }
    Ok(AugmentationPlan::from_jobs(
        Strategy::Rs,
        k,
        jobs,
        Some(seed),
        None,
    ))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NnOptions {
    /// Identifies the Φ embeddings the plan was computed in.
    pub phi_tag: String,
    /// Candidates with cosine below this are not eligible.
    pub min_similarity: Option<f64>,
}

struct Candidate<'a> {
    rec: &'a UtteranceRecord,
    vec: Vec<f64>,
    norm: f64,
}

/// Source embeddings of a scenario, widened and with cached norms.
pub struct NnIndex<'a> {
    candidates: Vec<Candidate<'a>>,
    phi: &'a EmbeddingStore,
}

impl<'a> NnIndex<'a> {
    pub fn new(scenario: &'a Scenario, phi: &'a EmbeddingStore) -> Result<Self> {
        let candidates = scenario
            .sources
            .iter()
            .map(|rec| {
                let vec = phi.embedding(&rec.utt_id)?;
                let n = norm(&vec);
                if n == 0.0 {
                    return Err(Error::ZeroNorm(rec.utt_id.clone()));
                }
                Ok(Candidate { rec, vec, norm: n })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { candidates, phi })
    }

    /// Jobs for one target: the top-`k` eligible sources, `k_index` in order
    /// of descending similarity.
    pub fn plan_target(
        &self,
        target: &UtteranceRecord,
        k: usize,
        min_similarity: Option<f64>,
    ) -> Result<Vec<ConversionJob>> {
        let speaker = target_speaker(target)?;
        let tv = self.phi.embedding(&target.utt_id)?;
        let tn = norm(&tv);
        if tn == 0.0 {
            return Err(Error::ZeroNorm(target.utt_id.clone()));
        }
        let mut best = BestK::new(k);
        let mut pool = 0usize;
        for c in &self.candidates {
            if !is_eligible(target, c.rec) {
                continue;
            }
            let sim = cosine_with_norms(&tv, &c.vec, tn, c.norm);
            if min_similarity.is_some_and(|tau| sim < tau) {
                continue;
            }
            pool += 1;
            best.offer(Ranked {
                sim,
                id: &c.rec.utt_id,
            });
        }
        if pool < k {
            return Err(Error::EligiblePool {
                target: target.utt_id.clone(),
                pool,
                k,
            });
        }
        Ok(best
            .into_sorted()
            .into_iter()
            .enumerate()
            .map(|(ki, r)| ConversionJob::new(&target.utt_id, r.id, speaker, ki as u32))
            .collect())
    }
}

/// Nearest-neighbour plan in the Φ space given by `phi`.
pub fn plan_nn(
    scenario: &Scenario,
    k: usize,
    phi: &EmbeddingStore,
    opts: &NnOptions,
) -> Result<AugmentationPlan> {
    let index = NnIndex::new(scenario, phi)?;
    let mut jobs = Vec::with_capacity(k * scenario.targets.len());
    for t in &scenario.targets {
        jobs.extend(index.plan_target(t, k, opts.min_similarity)?);
    }
    Ok(AugmentationPlan::from_jobs(
        Strategy::Nn,
        k,
        jobs,
        None,
        Some(opts.phi_tag.clone()),
    ))
}
