#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vca::core::sim::{generate_universe, Universe, UniverseConfig};

pub fn small_universe(seed: u64) -> Universe {
    generate_universe(&UniverseConfig {
        n_train_speakers: 16,
        n_eval_speakers: 6,
        dim: 8,
        utts_per_train_speaker: 6,
        utts_per_eval_speaker: 3,
        master_seed: seed,
        ..Default::default()
    })
    .unwrap()
}

pub fn vca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vca"))
        .args(args)
        .env_remove("VCA_THREADS")
        .output()
        .unwrap()
}

pub fn vca_ok(args: &[&str]) -> Output {
    let out = vca(args);
    assert!(
        out.status.success(),
        "vca {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}
