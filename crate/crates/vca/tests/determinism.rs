mod common;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vca::core::convert::Backend;
use vca::core::sim::{run_experiment as run_sequential, ExperimentConfig, UniverseConfig};
use vca::core::{
    apply_plan, build_scenario, plan_nn, plan_rs, train, NnOptions, Scenario, ScenarioConfig,
    SyntheticVcParams, TrainConfig,
};
use vca::{experiment, model, par, plan, vcae};

fn scenario(seed: u64) -> (Scenario, vca::core::EmbeddingStore) {
    let u = common::small_universe(seed);
    let (s, _) =
        build_scenario(&u.corpus, &u.store, &ScenarioConfig::semi(4, 6, 30, seed)).unwrap();
    (s, u.store)
}

fn plan_bytes(p: &vca::core::AugmentationPlan) -> Vec<u8> {
    let mut buf = Vec::new();
    plan::write_plan(&mut buf, p).unwrap();
    buf
}

#[test]
fn plans_ignore_input_order_and_worker_count() {
    let (s, store) = scenario(4);
    let opts = NnOptions {
        phi_tag: "identity".into(),
        min_similarity: None,
    };
    let rs = plan_bytes(&plan_rs(&s, 5, 9).unwrap());
    let nn = plan_bytes(&plan_nn(&s, 5, &store, &opts).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for threads in [1, 2, 7] {
        let mut shuffled = s.clone();
        shuffled.targets.shuffle(&mut rng);
        shuffled.sources.shuffle(&mut rng);
        let got_rs = par::with_threads(Some(threads), || par::plan_rs(&shuffled, 5, 9))
            .unwrap()
            .unwrap();
        let got_nn = par::with_threads(Some(threads), || par::plan_nn(&shuffled, 5, &store, &opts))
            .unwrap()
            .unwrap();
        assert_eq!(plan_bytes(&got_rs), rs);
        assert_eq!(plan_bytes(&got_nn), nn);
    }
}

#[test]
fn parallel_conversion_matches_sequential() {
    let (s, store) = scenario(8);
    let p = plan_rs(&s, 4, 2).unwrap();
    let base = s.labelled_records();
    let params = SyntheticVcParams {
        seed: 99,
        ..Default::default()
    };
    let seq = apply_plan(&p, &base, &store, &Backend::Synthetic(params)).unwrap();
    for threads in [1, 3] {
        let got = par::with_threads(Some(threads), || par::convert(&p, &base, &store, &params))
            .unwrap()
            .unwrap();
        assert_eq!(got, seq);
        assert_eq!(
            vcae::encode(&got.store).unwrap(),
            vcae::encode(&seq.store).unwrap()
        );
    }
}

#[test]
fn training_and_model_files_repeat_exactly() {
    let u = common::small_universe(5);
    let cfg = TrainConfig {
        seed: 3,
        epochs: 5,
        ..Default::default()
    };
    let a = model::encode(&train(&u.corpus, &u.store, &cfg).unwrap());
    let mut shuffled = u.corpus.clone();
    shuffled.reverse();
    let b = model::encode(&train(&shuffled, &u.store, &cfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn experiments_ignore_worker_count() {
    let cfg = ExperimentConfig {
        universe: UniverseConfig {
            n_train_speakers: 16,
            n_eval_speakers: 6,
            dim: 8,
            utts_per_train_speaker: 6,
            utts_per_eval_speaker: 3,
            ..Default::default()
        },
        scenario: ScenarioConfig::imbalanced(5, 6, 10, 1, 0),
        ks: vec![0, 3],
        n_seeds: 4,
        ..Default::default()
    };
    let seq = experiment::report_json(&run_sequential(&cfg).unwrap());
    for threads in [1, 4] {
        let got = par::with_threads(Some(threads), || par::run_experiment(&cfg))
            .unwrap()
            .unwrap();
        assert_eq!(experiment::report_json(&got), seq);
    }
}

#[test]
fn report_json_round_trips() {
    let cfg = ExperimentConfig {
        universe: UniverseConfig {
            n_train_speakers: 12,
            n_eval_speakers: 4,
            dim: 6,
            utts_per_train_speaker: 4,
            utts_per_eval_speaker: 3,
            ..Default::default()
        },
        scenario: ScenarioConfig::small(6, 4, 0),
        n_seeds: 2,
        ..Default::default()
    };
    let r = run_sequential(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    experiment::save_report(&r, &path).unwrap();
    assert_eq!(experiment::load_report(&path).unwrap(), r);
}
