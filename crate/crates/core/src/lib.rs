//! Voice-conversion augmentation (VCA) for speaker recognition on defective
//! datasets.
//!
//! This crate holds the allocation-only algorithmic core: scenario
//! construction, random and nearest-neighbour source selection, the synthetic
//! embedding-space conversion backend, the linear desk trainer, verification
//! metrics and the synthetic-universe experiment harness. File formats, the
//! CLI and thread pools live in the `vca` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod convert;
pub mod error;
pub mod metrics;
pub mod record;
pub mod scenario;
pub mod seed;
pub mod select;
pub mod sim;
pub mod store;
pub mod train;

pub use convert::{apply_plan, convert_synthetic, AugmentedCorpus, SyntheticVcParams};
pub use error::{Error, Result};
pub use metrics::{eer, evaluate, min_dcf, score_trials, DcfParams, EerPoint, EvalReport, Trial};
pub use record::{Origin, UtteranceRecord};
pub use scenario::{
    build_imbalanced, build_scenario, build_semi, build_small, HeldOutTruth, Scenario,
    ScenarioConfig, ScenarioKind,
};
pub use select::{
    cosine, plan_nn, plan_rs, top_k, AugmentationPlan, ConversionJob, NnOptions, Strategy,
};
pub use store::EmbeddingStore;
pub use train::{embed, train, train_phi, LinearSpeakerModel, PhiMode, TrainConfig};
