//! Defective-dataset scenarios: semi-supervised, small-scale and imbalanced
//! partitions of a labelled corpus into a target set and a source set.
//!
//! Speakers are sorted by id and utterances by utt id before any sampling,
//! so a scenario depends only on the corpus content and the seed, never on
//! the corpus order. Each sampling step has its own seed sub-stream.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::record::{validate_records, UtteranceRecord};
use crate::seed::rng_for;
use crate::store::EmbeddingStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ScenarioKind {
    Semi,
    Small,
    #[cfg_attr(feature = "serde", serde(alias = "imb"))]
    Imbalanced,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Semi => "semi",
            ScenarioKind::Small => "small",
            ScenarioKind::Imbalanced => "imbalanced",
        }
    }
}

/// Scenario construction parameters. For the imbalanced kind the
/// `*_labelled_*` fields describe the majority part.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub n_labelled_speakers: usize,
    pub utts_per_labelled_speaker: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub n_unlabelled_utts: Option<usize>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub n_minority_speakers: Option<usize>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub utts_per_minority_speaker: Option<usize>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn semi(speakers: usize, utts: usize, unlabelled: usize, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Semi,
            n_labelled_speakers: speakers,
            utts_per_labelled_speaker: utts,
            n_unlabelled_utts: Some(unlabelled),
            n_minority_speakers: None,
            utts_per_minority_speaker: None,
            seed,
        }
    }

    pub fn small(speakers: usize, utts: usize, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Small,
            n_labelled_speakers: speakers,
            utts_per_labelled_speaker: utts,
            n_unlabelled_utts: None,
            n_minority_speakers: None,
            utts_per_minority_speaker: None,
            seed,
        }
    }

    pub fn imbalanced(
        majority_speakers: usize,
        utts_per_majority: usize,
        minority_speakers: usize,
        utts_per_minority: usize,
        seed: u64,
    ) -> Self {
        Self {
            kind: ScenarioKind::Imbalanced,
            n_labelled_speakers: majority_speakers,
            utts_per_labelled_speaker: utts_per_majority,
            n_unlabelled_utts: None,
            n_minority_speakers: Some(minority_speakers),
            utts_per_minority_speaker: Some(utts_per_minority),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_labelled_speakers == 0 || self.utts_per_labelled_speaker == 0 {
            return bad("labelled speaker and utterance counts must be positive");
        }
        match self.kind {
            ScenarioKind::Semi if self.n_unlabelled_utts.is_none() => {
                bad("semi scenario requires n_unlabelled_utts")
            }
            ScenarioKind::Imbalanced => match (self.n_minority_speakers, self.utts_per_minority_speaker) {
                (Some(s), Some(u)) if s > 0 && u > 0 => Ok(()),
                _ => bad("imbalanced scenario requires positive n_minority_speakers and utts_per_minority_speaker"),
            },
            _ => Ok(()),
        }
    }

    /// Number of target utterances this configuration yields.
    pub fn target_count(&self) -> usize {
        match self.kind {
            ScenarioKind::Imbalanced => {
                self.n_minority_speakers.unwrap_or(0) * self.utts_per_minority_speaker.unwrap_or(0)
            }
            _ => self.n_labelled_speakers * self.utts_per_labelled_speaker,
        }
    }
}

/// Target and source sets of one scenario. Stripped labels are not part of
/// this type; they live in the separate [`HeldOutTruth`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub targets: Vec<UtteranceRecord>,
    pub sources: Vec<UtteranceRecord>,
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        self.config.kind
    }

    /// The labelled training records: targets for semi and small, both parts
    /// for imbalanced. Sorted by utt id.
    pub fn labelled_records(&self) -> Vec<UtteranceRecord> {
        let mut out = self.targets.clone();
        if self.kind() == ScenarioKind::Imbalanced {
            out.extend(self.sources.iter().cloned());
            out.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
        }
        out
    }
}

/// True labels of the semi-supervised source pool. Only evaluation code
/// should read this.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HeldOutTruth(BTreeMap<String, String>);

impl HeldOutTruth {
    pub fn new(map: BTreeMap<String, String>) -> Self {
        Self(map)
    }

    pub fn speaker_of(&self, utt_id: &str) -> Option<&str> {
        self.0.get(utt_id).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn build_scenario(
    corpus: &[UtteranceRecord],
    store: &EmbeddingStore,
    cfg: &ScenarioConfig,
) -> Result<(Scenario, HeldOutTruth)> {
    match cfg.kind {
        ScenarioKind::Semi => build_semi(corpus, store, cfg),
        ScenarioKind::Small => {
            build_small(corpus, store, cfg).map(|s| (s, HeldOutTruth::default()))
        }
        ScenarioKind::Imbalanced => {
            build_imbalanced(corpus, store, cfg).map(|s| (s, HeldOutTruth::default()))
        }
    }
}

pub fn build_semi(
    corpus: &[UtteranceRecord],
    store: &EmbeddingStore,
    cfg: &ScenarioConfig,
) -> Result<(Scenario, HeldOutTruth)> {
    check_kind(cfg, ScenarioKind::Semi)?;
    let by_speaker = index_corpus(corpus, store)?;
    let n_unlabelled = cfg.n_unlabelled_utts.unwrap_or(0);

    let labelled = pick_speakers(
        &by_speaker,
        |_| true,
        cfg.utts_per_labelled_speaker,
        cfg.n_labelled_speakers,
        cfg.seed,
        "speakers/labelled",
    )?;
    let targets = pick_utterances(
        &by_speaker,
        &labelled,
        cfg.utts_per_labelled_speaker,
        cfg.seed,
    );

    let mut pool: Vec<&UtteranceRecord> = by_speaker
        .iter()
        .filter(|(spk, _)| labelled.binary_search(spk).is_err())
        .flat_map(|(_, utts)| utts.iter().copied())
        .collect();
    pool.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    if pool.len() < n_unlabelled {
        return Err(Error::Insufficient {
            what: "utterances from non-labelled speakers for the unlabelled pool".into(),
            needed: n_unlabelled,
            available: pool.len(),
        });
    }
    let mut rng = rng_for(cfg.seed, "unlabelled");
    let mut chosen: Vec<usize> = index::sample(&mut rng, pool.len(), n_unlabelled).into_vec();
    chosen.sort_unstable();

    let mut truth = BTreeMap::new();
    let sources = chosen
        .into_iter()
        .map(|i| {
            let mut rec = pool[i].clone();
            if let Some(spk) = rec.speaker_id.take() {
                truth.insert(rec.utt_id.clone(), spk);
            }
            rec
        })
        .collect();

    Ok((
        Scenario {
            config: cfg.clone(),
            targets,
            sources,
        },
        HeldOutTruth(truth),
    ))
}

pub fn build_small(
    corpus: &[UtteranceRecord],
    store: &EmbeddingStore,
    cfg: &ScenarioConfig,
) -> Result<Scenario> {
    check_kind(cfg, ScenarioKind::Small)?;
    let by_speaker = index_corpus(corpus, store)?;
    let speakers = pick_speakers(
        &by_speaker,
        |_| true,
        cfg.utts_per_labelled_speaker,
        cfg.n_labelled_speakers,
        cfg.seed,
        "speakers/labelled",
    )?;
    let targets = pick_utterances(
        &by_speaker,
        &speakers,
        cfg.utts_per_labelled_speaker,
        cfg.seed,
    );
    Ok(Scenario {
        config: cfg.clone(),
        sources: targets.clone(),
        targets,
    })
}

pub fn build_imbalanced(
    corpus: &[UtteranceRecord],
    store: &EmbeddingStore,
    cfg: &ScenarioConfig,
) -> Result<Scenario> {
    check_kind(cfg, ScenarioKind::Imbalanced)?;
    let by_speaker = index_corpus(corpus, store)?;
    let minority_utts = cfg.utts_per_minority_speaker.unwrap_or(0);
    let minority_count = cfg.n_minority_speakers.unwrap_or(0);

    let majority = pick_speakers(
        &by_speaker,
        |_| true,
        cfg.utts_per_labelled_speaker,
        cfg.n_labelled_speakers,
        cfg.seed,
        "speakers/majority",
    )?;
    let minority = pick_speakers(
        &by_speaker,
        |spk| majority.binary_search(&spk).is_err(),
        minority_utts,
        minority_count,
        cfg.seed,
        "speakers/minority",
    )?;
    let sources = pick_utterances(
        &by_speaker,
        &majority,
        cfg.utts_per_labelled_speaker,
        cfg.seed,
    );
    let targets = pick_utterances(&by_speaker, &minority, minority_utts, cfg.seed);
    Ok(Scenario {
        config: cfg.clone(),
        targets,
        sources,
    })
}

type SpeakerIndex<'a> = BTreeMap<&'a str, Vec<&'a UtteranceRecord>>;

fn check_kind(cfg: &ScenarioConfig, want: ScenarioKind) -> Result<()> {
    cfg.validate()?;
    if cfg.kind != want {
        return Err(Error::Config(format!(
            "expected a {} configuration, got {}",
            want.as_str(),
            cfg.kind.as_str()
        )));
    }
    Ok(())
}

fn index_corpus<'a>(
    corpus: &'a [UtteranceRecord],
    store: &EmbeddingStore,
) -> Result<SpeakerIndex<'a>> {
    validate_records(corpus)?;
    let mut by_speaker: SpeakerIndex<'a> = BTreeMap::new();
    for rec in corpus {
        let spk = rec
            .speaker_id
            .as_deref()
            .ok_or_else(|| Error::Unlabelled(rec.utt_id.clone()))?;
        if !store.contains(&rec.utt_id) {
            return Err(Error::MissingEmbedding(rec.utt_id.clone()));
        }
        by_speaker.entry(spk).or_default().push(rec);
    }
    for utts in by_speaker.values_mut() {
        utts.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    }
    Ok(by_speaker)
}

/// Samples `n` speakers (returned sorted) among those passing `allow` with at
/// least `min_utts` utterances.
fn pick_speakers<'a>(
    by_speaker: &SpeakerIndex<'a>,
    allow: impl Fn(&'a str) -> bool,
    min_utts: usize,
    n: usize,
    seed: u64,
    tag: &str,
) -> Result<Vec<&'a str>> {
    let eligible: Vec<&'a str> = by_speaker
        .iter()
        .filter(|(spk, utts)| utts.len() >= min_utts && allow(spk))
        .map(|(spk, _)| *spk)
        .collect();
    if eligible.len() < n {
        return Err(Error::Insufficient {
            what: format!("speakers with at least {min_utts} utterances ({tag})"),
            needed: n,
            available: eligible.len(),
        });
    }
    let mut rng = rng_for(seed, tag);
    let mut picked: Vec<&'a str> = index::sample(&mut rng, eligible.len(), n)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Samples `per_speaker` utterances from each speaker; output sorted by utt id.
fn pick_utterances(
    by_speaker: &SpeakerIndex<'_>,
    speakers: &[&str],
    per_speaker: usize,
    seed: u64,
) -> Vec<UtteranceRecord> {
    let mut out = Vec::with_capacity(speakers.len() * per_speaker);
    for spk in speakers {
        let utts = &by_speaker[spk];
        let mut rng = rng_for(seed, &format!("utts/{spk}"));
        out.extend(
            index::sample(&mut rng, utts.len(), per_speaker)
                .into_iter()
                .map(|i| utts[i].clone()),
        );
    }
    out.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    out
}
