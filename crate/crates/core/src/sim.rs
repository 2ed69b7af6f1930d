//! Synthetic speaker universes and paired augmentation experiments.
//!
//! Each speaker has a unit identity vector drawn from a normalised isotropic
//! Gaussian; each utterance is `normalize(v + σ_within·g)` with
//! `g ~ N(0, I)`. Training speakers and evaluation speakers are disjoint.
//! Within one seed every arm sees the same universe, scenario and trials.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::convert::{apply_plan, Backend, SyntheticVcParams};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, DcfParams, Trial};
use crate::record::UtteranceRecord;
use crate::scenario::{build_scenario, ScenarioConfig};
use crate::seed::{derive_seed, rng_for};
use crate::select::{norm, plan_nn, plan_rs, AugmentationPlan, NnOptions};
use crate::store::EmbeddingStore;
use crate::train::{train, train_phi, PhiMode, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct UniverseConfig {
    pub n_train_speakers: usize,
    pub n_eval_speakers: usize,
    pub dim: usize,
    pub sigma_within: f64,
    pub utts_per_train_speaker: usize,
    pub utts_per_eval_speaker: usize,
    /// Rank of the shared session/channel subspace.
    pub nuisance_rank: usize,
    /// Extra within-speaker spread along the nuisance subspace, relative to
    /// the isotropic part.
    pub nuisance_scale: f64,
    pub master_seed: u64,
}

impl Default for UniverseConfig {
    fn default() -> Self {
        Self {
            n_train_speakers: 60,
            n_eval_speakers: 40,
            dim: 32,
            sigma_within: 0.3,
            utts_per_train_speaker: 10,
            utts_per_eval_speaker: 6,
            nuisance_rank: 0,
            nuisance_scale: 0.0,
            master_seed: 0,
        }
    }
}

impl UniverseConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_train_speakers > 0
            && self.n_eval_speakers >= 2
            && self.dim > 0
            && self.utts_per_train_speaker > 0
            && self.utts_per_eval_speaker >= 2
            && self.sigma_within.is_finite()
            && self.sigma_within >= 0.0
            && self.nuisance_rank <= self.dim
            && self.nuisance_scale.is_finite()
            && self.nuisance_scale >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid universe configuration {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Universe {
    /// Labelled utterances of the training speakers.
    pub corpus: Vec<UtteranceRecord>,
    /// Utterances of the evaluation speakers.
    pub eval: Vec<UtteranceRecord>,
    /// Embeddings of both.
    pub store: EmbeddingStore,
    pub trials: Vec<Trial>,
}

fn gaussian(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Orthonormal basis of the nuisance subspace (Gram–Schmidt on Gaussian
/// draws).
fn nuisance_basis(cfg: &UniverseConfig) -> Vec<Vec<f64>> {
    let mut rng = rng_for(cfg.master_seed, "nuisance");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cfg.nuisance_rank);
    while basis.len() < cfg.nuisance_rank {
        let mut v = gaussian(&mut rng, cfg.dim);
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        if norm(&v) > 1e-6 {
            basis.push(normalized(v));
        }
    }
    basis
}

fn speaker_utterances(
    cfg: &UniverseConfig,
    nuisance: &[Vec<f64>],
    speaker: &str,
    n_utts: usize,
    store: &mut EmbeddingStore,
) -> Result<Vec<UtteranceRecord>> {
    let mut rng = rng_for(cfg.master_seed, &format!("speaker/{speaker}"));
    let identity = normalized(gaussian(&mut rng, cfg.dim));
    (0..n_utts)
        .map(|u| {
            let id = format!("{speaker}-u{u:03}");
            let mut rng = rng_for(cfg.master_seed, &format!("utt/{id}"));
            let mut g = gaussian(&mut rng, cfg.dim);
            for b in nuisance {
                let h: f64 = StandardNormal.sample(&mut rng);
                g.iter_mut()
                    .zip(b)
                    .for_each(|(x, y)| *x += cfg.nuisance_scale * h * y);
            }
            let v: Vec<f64> = identity
                .iter()
                .zip(g)
                .map(|(c, g)| c + cfg.sigma_within * g)
                .collect();
            store.insert(id.as_str(), &normalized(v))?;
            Ok(UtteranceRecord::real(id, Some(speaker)))
        })
        .collect()
}

/// Builds the training corpus, evaluation utterances and trial list.
/// Every evaluation speaker contributes all of its same-speaker pairs as
/// target trials and as many seeded cross-speaker pairs as nontargets.
pub fn generate_universe(cfg: &UniverseConfig) -> Result<Universe> {
    cfg.validate()?;
    let mut store = EmbeddingStore::new(cfg.dim);
    let nuisance = nuisance_basis(cfg);
    let mut corpus = Vec::new();
    for s in 0..cfg.n_train_speakers {
        corpus.extend(speaker_utterances(
            cfg,
            &nuisance,
            &format!("trn{s:04}"),
            cfg.utts_per_train_speaker,
            &mut store,
        )?);
    }
    let mut by_speaker: Vec<Vec<UtteranceRecord>> = Vec::with_capacity(cfg.n_eval_speakers);
    for s in 0..cfg.n_eval_speakers {
        by_speaker.push(speaker_utterances(
            cfg,
            &nuisance,
            &format!("evl{s:04}"),
            cfg.utts_per_eval_speaker,
            &mut store,
        )?);
    }

    let mut trials = Vec::new();
    let n_spk = by_speaker.len();
    for (s, utts) in by_speaker.iter().enumerate() {
        let mut pairs = 0usize;
        for a in 0..utts.len() {
            for b in a + 1..utts.len() {
                trials.push(Trial::new(
                    true,
                    utts[a].utt_id.as_str(),
                    utts[b].utt_id.as_str(),
                ));
                pairs += 1;
            }
        }
        let mut rng = rng_for(cfg.master_seed, &format!("nontarget/{s}"));
        for _ in 0..pairs {
            let own = &utts[rng.random_range(0..utts.len())];
            let other_spk = (s + rng.random_range(1..n_spk)) % n_spk;
            let others = &by_speaker[other_spk];
            let other = &others[rng.random_range(0..others.len())];
            trials.push(Trial::new(
                false,
                own.utt_id.as_str(),
                other.utt_id.as_str(),
            ));
        }
    }
    Ok(Universe {
        corpus,
        eval: by_speaker.into_iter().flatten().collect(),
        store,
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Arm {
    Baseline,
    Rs,
    Nn,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Rs => "rs",
            Arm::Nn => "nn",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ExperimentConfig {
    pub universe: UniverseConfig,
    /// The scenario seed is replaced by one derived from each run's seed.
    pub scenario: ScenarioConfig,
    pub arms: Vec<Arm>,
    /// Generation coefficients for the augmented arms; `0` is the baseline.
    pub ks: Vec<usize>,
    pub n_seeds: usize,
    pub train: TrainConfig,
    pub phi: PhiMode,
    pub vc: SyntheticVcParams,
    pub dcf: DcfParams,
    pub min_similarity: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            universe: UniverseConfig::default(),
            scenario: ScenarioConfig::imbalanced(20, 10, 40, 1, 0),
            arms: alloc::vec![Arm::Baseline, Arm::Rs, Arm::Nn],
            ks: alloc::vec![9],
            n_seeds: 10,
            train: TrainConfig::default(),
            phi: PhiMode::Trained,
            vc: SyntheticVcParams::default(),
            dcf: DcfParams::default(),
            min_similarity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArmResult {
    pub arm: Arm,
    pub k: usize,
    pub eer: f64,
    pub min_dcf: f64,
    pub train_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeedReport {
    pub seed_index: usize,
    pub seed: u64,
    pub n_trials: usize,
    pub results: Vec<ArmResult>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Aggregate {
    pub arm: Arm,
    pub k: usize,
    pub mean_eer: f64,
    pub mean_min_dcf: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedReport>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentReport {
    pub fn aggregate(&self, arm: Arm, k: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.arm == arm && a.k == k)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.universe.validate()?;
        self.scenario.validate()?;
        self.train.validate()?;
        self.vc.validate()?;
        self.dcf.validate()?;
        if self.arms.is_empty() || self.n_seeds == 0 {
            return Err(Error::Config(
                "experiment needs at least one arm and one seed".into(),
            ));
        }
        if self.arms.iter().any(|a| *a != Arm::Baseline) && self.ks.is_empty() {
            return Err(Error::Config("augmented arms need at least one K".into()));
        }
        Ok(())
    }

    /// The seed of run `index`, derived from the universe master seed.
    pub fn run_seed(&self, index: usize) -> u64 {
        derive_seed(self.universe.master_seed, &format!("run/{index}"))
    }
}

/// One paired run: every arm on the same universe, scenario and trials.
pub fn run_seed(cfg: &ExperimentConfig, index: usize) -> Result<SeedReport> {
    cfg.validate()?;
    let seed = cfg.run_seed(index);
    let universe = generate_universe(&UniverseConfig {
        master_seed: seed,
        ..cfg.universe.clone()
    })?;
    let scenario_cfg = ScenarioConfig {
        seed: derive_seed(seed, "scenario"),
        ..cfg.scenario.clone()
    };
    let (scenario, _truth) = build_scenario(&universe.corpus, &universe.store, &scenario_cfg)?;
    let labelled = scenario.labelled_records();
    let train_cfg = TrainConfig {
        seed: derive_seed(seed, "train"),
        ..cfg.train.clone()
    };

    let run_arm = |corpus: &[UtteranceRecord], store: &EmbeddingStore| -> Result<(f64, f64)> {
        let model = train(corpus, store, &train_cfg)?;
        let (_, report) = evaluate(&universe.trials, &model, store, &cfg.dcf)?;
        Ok((report.eer, report.min_dcf))
    };

    let (base_eer, base_dcf) = run_arm(&labelled, &universe.store)?;
    let baseline = |arm| ArmResult {
        arm,
        k: 0,
        eer: base_eer,
        min_dcf: base_dcf,
        train_size: labelled.len(),
    };

    let needs_phi = cfg.arms.contains(&Arm::Nn) && cfg.ks.iter().any(|&k| k > 0);
    let phi_store = if needs_phi {
        let phi_cfg = TrainConfig {
            seed: derive_seed(seed, "phi"),
            ..cfg.train.clone()
        };
        let phi = train_phi(&scenario, &universe.store, &phi_cfg, cfg.phi)?;
        Some(phi.embed_store(&universe.store)?)
    } else {
        None
    };
    let vc = SyntheticVcParams {
        seed: derive_seed(seed, "vc"),
        ..cfg.vc
    };

    let mut results = Vec::new();
    for &arm in &cfg.arms {
        if arm == Arm::Baseline {
            results.push(baseline(arm));
            continue;
        }
        for &k in &cfg.ks {
            if k == 0 {
                results.push(baseline(arm));
                continue;
            }
            let plan: AugmentationPlan = match arm {
                Arm::Rs => plan_rs(&scenario, k, derive_seed(seed, "plan/rs"))?,
                _ => {
                    let opts = NnOptions {
                        phi_tag: String::from(match cfg.phi {
                            PhiMode::Identity => "identity",
                            PhiMode::Trained => "trained",
                        }),
                        min_similarity: cfg.min_similarity,
                    };
                    plan_nn(
                        &scenario,
                        k,
                        phi_store.as_ref().expect("phi computed"),
                        &opts,
                    )?
                }
            };
            let augmented = apply_plan(&plan, &labelled, &universe.store, &Backend::Synthetic(vc))?;
            let expected = labelled.len() + k * scenario.targets.len();
            if augmented.records.len() != expected {
                return Err(Error::Config(format!(
                    "augmented training set has {} records, expected {expected}",
                    augmented.records.len()
                )));
            }
            let (eer, min_dcf) = run_arm(&augmented.records, &augmented.store)?;
            results.push(ArmResult {
                arm,
                k,
                eer,
                min_dcf,
                train_size: expected,
            });
        }
    }
    Ok(SeedReport {
        seed_index: index,
        seed,
        n_trials: universe.trials.len(),
        results,
    })
}

/// Means over seeds for every (arm, K) row, in first-seen order.
pub fn aggregate(seeds: &[SeedReport]) -> Vec<Aggregate> {
    let mut out: Vec<(Aggregate, usize)> = Vec::new();
    for r in seeds.iter().flat_map(|s| &s.results) {
        match out.iter_mut().find(|(a, _)| a.arm == r.arm && a.k == r.k) {
            Some((a, n)) => {
                a.mean_eer += r.eer;
                a.mean_min_dcf += r.min_dcf;
                *n += 1;
            }
            None => out.push((
                Aggregate {
                    arm: r.arm,
                    k: r.k,
                    mean_eer: r.eer,
                    mean_min_dcf: r.min_dcf,
                    n_seeds: 0,
                },
                1,
            )),
        }
    }
    out.into_iter()
        .map(|(mut a, n)| {
            a.mean_eer /= n as f64;
            a.mean_min_dcf /= n as f64;
            a.n_seeds = n;
            a
        })
        .collect()
}

/// Assembles a report from per-seed results (in any order).
pub fn report_from_seeds(cfg: &ExperimentConfig, mut seeds: Vec<SeedReport>) -> ExperimentReport {
    seeds.sort_by_key(|s| s.seed_index);
    ExperimentReport {
        config: cfg.clone(),
        aggregates: aggregate(&seeds),
        seeds,
    }
}

/// Runs every seed sequentially.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let seeds = (0..cfg.n_seeds)
        .map(|i| run_seed(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from_seeds(cfg, seeds))
}
