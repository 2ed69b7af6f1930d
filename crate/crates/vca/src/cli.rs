//! The `vca` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};
use serde::de::DeserializeOwned;
use vca_core::sim::ExperimentConfig;
use vca_core::{
    build_scenario, evaluate, train, train_phi, DcfParams, NnOptions, PhiMode, ScenarioConfig,
    ScenarioKind, SyntheticVcParams, TrainConfig,
};

use crate::corpus::{join, save_corpus};
use crate::error::{Error, Result};
use crate::external::{ingest_external_results, OnFailed};
use crate::manifest::load_manifest;
use crate::model::{load_model, save_model};
use crate::plan::{emit_external_jobs, load_plan, save_plan};
use crate::scenario_dir::{load_scenario, save_scenario};
use crate::trials::{load_trials, save_report, save_scores};
use crate::vcae::load_store;
use crate::{experiment, fsio, par};

#[derive(Debug, Parser)]
#[command(
    name = "vca",
    version,
    about = "Voice-conversion augmentation for speaker recognition on defective datasets",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Master seed; overrides the seed of any configuration file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// One of off, error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    /// Worker threads (falls back to VCA_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a manifest against a VCAE store and write a corpus directory.
    Ingest(IngestArgs),
    /// Partition a labelled corpus into target and source sets.
    Scenario(ScenarioArgs),
    /// Select conversion sources for every target.
    Plan(PlanArgs),
    /// Execute a plan, or exchange it with an external converter.
    Convert(ConvertArgs),
    /// Train the linear speaker model.
    Train(TrainArgs),
    /// Score a trial list and compute EER and minDCF.
    Eval(EvalArgs),
    /// Run a seeded synthetic-universe experiment.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Output corpus directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Semi,
    Small,
    Imb,
}

impl From<KindArg> for ScenarioKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Semi => ScenarioKind::Semi,
            KindArg::Small => ScenarioKind::Small,
            KindArg::Imb => ScenarioKind::Imbalanced,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Scenario configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Labelled corpus manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Output scenario directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Rs,
    Nn,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PhiArg {
    Identity,
    Trained,
}

impl From<PhiArg> for PhiMode {
    fn from(p: PhiArg) -> Self {
        match p {
            PhiArg::Identity => PhiMode::Identity,
            PhiArg::Trained => PhiMode::Trained,
        }
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    #[arg(long)]
    pub k: usize,
    /// Scenario directory.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Embeddings of the scenario's utterances (required for nn).
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Similarity space for nn.
    #[arg(long, value_enum, default_value = "trained")]
    pub phi: PhiArg,
    /// Training configuration (JSON) for a trained Φ.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    /// Drop nn candidates whose cosine is below this value.
    #[arg(long)]
    pub min_similarity: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Synthetic,
    ExternalEmit,
    ExternalIngest,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, value_enum)]
    pub backend: BackendArg,
    #[arg(long)]
    pub plan: PathBuf,
    /// Scenario directory the plan was made for.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Embeddings of the scenario's utterances.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Synthetic conversion parameters (JSON).
    #[arg(long)]
    pub vc_config: Option<PathBuf>,
    /// Result manifest from the external converter.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// VCAE file of the external converter's pseudo embeddings.
    #[arg(long)]
    pub result_store: Option<PathBuf>,
    /// Leave failed external jobs out instead of aborting.
    #[arg(long)]
    pub skip_failed: bool,
    /// Corpus directory, or the emitted plan file for external-emit.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled manifest.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    /// Training configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Also write per-trial scores.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub p_target: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_miss: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_fa: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Also write a CSV table of the results.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&fsio::read_to_string(path)?)
        .map_err(|e| Error::format(path, e.to_string()))
}

fn require<'a>(flag: &'a Option<PathBuf>, name: &str, why: &str) -> Result<&'a Path> {
    flag.as_deref()
        .ok_or_else(|| Error::Usage(format!("--{name} is required {why}")))
}

fn run_ingest(a: &IngestArgs) -> Result<()> {
    let records = load_manifest(&a.manifest)?;
    let store = load_store(&a.embeddings)?;
    let store = join(&records, &store, &a.embeddings)?;
    save_corpus(&records, &store, &a.out)?;
    info!("ingested {} records (dim {})", records.len(), store.dim());
    Ok(())
}

fn run_scenario(cli: &Cli, a: &ScenarioArgs) -> Result<()> {
    let kind: ScenarioKind = a.kind.into();
    let mut value: serde_json::Value = load_json(&a.config)?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert("kind".into(), kind.as_str().into());
        obj.entry("seed").or_insert(0.into());
    }
    let mut cfg: ScenarioConfig =
        serde_json::from_value(value).map_err(|e| Error::format(&a.config, e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()
        .map_err(|e| Error::format(&a.config, e.to_string()))?;
    let records = load_manifest(&a.manifest)?;
    let store = load_store(&a.embeddings)?;
    let (scenario, truth) = build_scenario(&records, &store, &cfg)?;
    save_scenario(&scenario, &truth, &a.out)?;
    info!(
        "{} scenario: {} targets, {} sources",
        cfg.kind.as_str(),
        scenario.targets.len(),
        scenario.sources.len()
    );
    Ok(())
}

fn run_plan(cli: &Cli, a: &PlanArgs, threads: Option<usize>) -> Result<()> {
    if let Some(tau) = a.min_similarity {
        if !(-1.0..=1.0).contains(&tau) {
            return Err(Error::Usage("--min-similarity must lie in [-1, 1]".into()));
        }
        if matches!(a.strategy, StrategyArg::Rs) {
            return Err(Error::Usage(
                "--min-similarity applies to --strategy nn only".into(),
            ));
        }
    }
    let (scenario, _) = load_scenario(&a.scenario)?;
    let plan = match a.strategy {
        StrategyArg::Rs => {
            let seed = cli.seed.unwrap_or(0);
            par::with_threads(threads, || par::plan_rs(&scenario, a.k, seed))??
        }
        StrategyArg::Nn => {
            let store_path = require(&a.store, "store", "for --strategy nn")?;
            let store = load_store(store_path)?;
            let mut tcfg: TrainConfig = match &a.train_config {
                Some(p) => load_json(p)?,
                None => TrainConfig::default(),
            };
            if let Some(seed) = cli.seed {
                tcfg.seed = seed;
            }
            let phi = train_phi(&scenario, &store, &tcfg, a.phi.into())?;
            let phi_store = phi.embed_store(&store)?;
            let opts = NnOptions {
                phi_tag: match a.phi {
                    PhiArg::Identity => "identity".into(),
                    PhiArg::Trained => format!("trained:seed={}", tcfg.seed),
                },
                min_similarity: a.min_similarity,
            };
            par::with_threads(threads, || par::plan_nn(&scenario, a.k, &phi_store, &opts))??
        }
    };
    save_plan(&plan, &a.out)?;
    info!(
        "plan with {} jobs written to {}",
        plan.jobs.len(),
        a.out.display()
    );
    Ok(())
}

fn run_convert(cli: &Cli, a: &ConvertArgs, threads: Option<usize>) -> Result<()> {
    let plan = load_plan(&a.plan)?;
    let (scenario, _) = load_scenario(&a.scenario)?;
    plan.validate(&scenario)?;
    match a.backend {
        BackendArg::ExternalEmit => {
            let mut records = scenario.targets.clone();
            records.extend(scenario.sources.iter().cloned());
            emit_external_jobs(&plan, &records, &a.out)?;
        }
        BackendArg::Synthetic => {
            let store = load_store(require(&a.store, "store", "for the synthetic backend")?)?;
            let mut params: SyntheticVcParams = match &a.vc_config {
                Some(p) => load_json(p)?,
                None => SyntheticVcParams::default(),
            };
            if let Some(seed) = cli.seed {
                params.seed = seed;
            }
            let base = scenario.labelled_records();
            let out = par::with_threads(threads, || par::convert(&plan, &base, &store, &params))??;
            let store = join(&out.records, &out.store, &a.out)?;
            save_corpus(&out.records, &store, &a.out)?;
        }
        BackendArg::ExternalIngest => {
            let store = load_store(require(&a.store, "store", "for external-ingest")?)?;
            let results = require(&a.results, "results", "for external-ingest")?;
            let result_store = require(&a.result_store, "result-store", "for external-ingest")?;
            let policy = if a.skip_failed {
                OnFailed::Skip
            } else {
                OnFailed::Abort
            };
            let base = scenario.labelled_records();
            let ingested =
                ingest_external_results(&plan, results, result_store, &base, &store, policy)?;
            for (id, status) in &ingested.failed {
                log::warn!("skipped failed job {id}: {status}");
            }
            let c = &ingested.corpus;
            let store = join(&c.records, &c.store, &a.out)?;
            save_corpus(&c.records, &store, &a.out)?;
        }
    }
    Ok(())
}

fn run_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => load_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let records = load_manifest(&a.corpus)?;
    let store = load_store(&a.store)?;
    let model = train(&records, &store, &cfg)?;
    save_model(&model, &a.out)?;
    info!(
        "trained on {} records, {} classes",
        records.len(),
        model.n_classes()
    );
    Ok(())
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    let dcf = DcfParams {
        p_target: a.p_target,
        c_miss: a.c_miss,
        c_fa: a.c_fa,
    };
    dcf.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let trials = load_trials(&a.trials)?;
    let model = load_model(&a.model)?;
    let store = load_store(&a.store)?;
    let (scores, report) = evaluate(&trials, &model, &store, &dcf)?;
    if let Some(p) = &a.scores {
        save_scores(&trials, &scores, p)?;
    }
    save_report(&report, &a.report)?;
    info!("EER {:.4}, minDCF {:.4}", report.eer, report.min_dcf);
    Ok(())
}

fn run_simulate(cli: &Cli, a: &SimulateArgs, threads: Option<usize>) -> Result<()> {
    let mut cfg: ExperimentConfig = experiment::load_config(&a.config)?;
    if let Some(seed) = cli.seed {
        cfg.universe.master_seed = seed;
    }
    let report = par::with_threads(threads, || par::run_experiment(&cfg))??;
    experiment::save_report(&report, &a.report)?;
    if let Some(p) = &a.csv {
        experiment::save_csv(&report, p)?;
    }
    for agg in &report.aggregates {
        info!(
            "{} K={}: mean EER {:.4}, mean minDCF {:.4}",
            agg.arm.as_str(),
            agg.k,
            agg.mean_eer,
            agg.mean_min_dcf
        );
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let threads = par::resolve_threads(cli.threads)?;
    match &cli.command {
        Command::Ingest(a) => run_ingest(a),
        Command::Scenario(a) => run_scenario(cli, a),
        Command::Plan(a) => run_plan(cli, a, threads),
        Command::Convert(a) => run_convert(cli, a, threads),
        Command::Train(a) => run_train(cli, a),
        Command::Eval(a) => run_eval(a),
        Command::Simulate(a) => run_simulate(cli, a, threads),
    }
}

fn init_logging(level: &str) -> Result<()> {
    let filter = LevelFilter::from_str(level)
        .map_err(|_| Error::Usage(format!("unknown log level {level:?}")))?;
    let _ = env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .try_init();
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = init_logging(&cli.log_level).and_then(|()| run(&cli));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
