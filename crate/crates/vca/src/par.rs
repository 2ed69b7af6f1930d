//! Thread-pooled versions of the per-target, per-job and per-seed loops.
//! Results are collected in input order, so every output equals its
//! sequential counterpart regardless of the worker count.

use rayon::prelude::*;
use vca_core::convert::{assemble, convert_synthetic};
use vca_core::select::{NnIndex, RsPool};
use vca_core::sim::{report_from_seeds, run_seed, ExperimentConfig, ExperimentReport};
use vca_core::{
    AugmentationPlan, AugmentedCorpus, EmbeddingStore, NnOptions, Scenario, Strategy,
    SyntheticVcParams, UtteranceRecord,
};

use crate::error::{Error, Result};

/// Worker count from `--threads`, else `VCA_THREADS`, else rayon's default.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("VCA_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map(Some).map_err(|_| {
            Error::Usage(format!("VCA_THREADS must be a positive integer, got {v:?}"))
        }),
        _ => Ok(None),
    }
}

/// Runs `f` on a pool of `threads` workers (rayon's default when `None`).
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    if threads == Some(0) {
        return Err(Error::Usage("thread count must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn plan_rs(scenario: &Scenario, k: usize, seed: u64) -> Result<AugmentationPlan> {
    let pool = RsPool::new(scenario, seed);
    let jobs = scenario
        .targets
        .par_iter()
        .map(|t| pool.plan_target(t, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AugmentationPlan::from_jobs(
        Strategy::Rs,
        k,
        jobs.into_iter().flatten().collect(),
        Some(seed),
        None,
    ))
}

pub fn plan_nn(
    scenario: &Scenario,
    k: usize,
    phi: &EmbeddingStore,
    opts: &NnOptions,
) -> Result<AugmentationPlan> {
    let index = NnIndex::new(scenario, phi)?;
    let jobs = scenario
        .targets
        .par_iter()
        .map(|t| index.plan_target(t, k, opts.min_similarity))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AugmentationPlan::from_jobs(
        Strategy::Nn,
        k,
        jobs.into_iter().flatten().collect(),
        None,
        Some(opts.phi_tag.clone()),
    ))
}

/// Synthetic conversion of every job in `plan`, appended to `base`.
pub fn convert(
    plan: &AugmentationPlan,
    base: &[UtteranceRecord],
    store: &EmbeddingStore,
    params: &SyntheticVcParams,
) -> Result<AugmentedCorpus> {
    params.validate()?;
    let pseudo = plan
        .jobs
        .par_iter()
        .map(|job| convert_synthetic(job, store, params))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(base, store, pseudo)?)
}

/// All seeds of an experiment, run concurrently.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let seeds = (0..cfg.n_seeds)
        .into_par_iter()
        .map(|i| {
            log::debug!("seed {i} started");
            run_seed(cfg, i)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(report_from_seeds(cfg, seeds))
}
