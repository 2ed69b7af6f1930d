//! Linear desk trainer: `logits = C·(A·x)`, softmax cross-entropy, plain
//! mini-batch gradient descent. `A` is the feature transform used for
//! verification scoring and as the Φ space for nearest-neighbour selection.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::record::{validate_records, UtteranceRecord};
use crate::scenario::Scenario;
use crate::seed::rng_for;
use crate::store::EmbeddingStore;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch: 64,
            lr: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!(
                "invalid training configuration {self:?}"
            )));
        }
        Ok(())
    }
}

/// How the Φ space for nearest-neighbour selection is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PhiMode {
    /// Raw embeddings, no training.
    Identity,
    /// A model trained on the scenario's labelled records.
    #[default]
    Trained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSpeakerModel {
    dim: usize,
    /// `dim × dim`, row-major.
    a: Vec<f64>,
    /// `n_classes × dim`, row-major.
    c: Vec<f64>,
    /// Row `i` of `C` belongs to `classes[i]`; sorted ascending.
    classes: Vec<String>,
}

impl LinearSpeakerModel {
    /// `A = I` and no classes.
    pub fn identity(dim: usize) -> Self {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        Self {
            dim,
            a,
            c: Vec::new(),
            classes: Vec::new(),
        }
    }

    pub fn from_parts(dim: usize, a: Vec<f64>, c: Vec<f64>, classes: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDim);
        }
        if a.len() != dim * dim || c.len() != classes.len() * dim {
            return Err(Error::Config(
                "model matrix sizes do not match dim/classes".into(),
            ));
        }
        if a.iter().chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model".into()));
        }
        if classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "class table must be strictly ascending".into(),
            ));
        }
        Ok(Self { dim, a, c, classes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_index(&self, speaker: &str) -> Option<usize> {
        self.classes
            .binary_search_by(|c| c.as_str().cmp(speaker))
            .ok()
    }

    /// `A·x`.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.transform(x))
    }

    fn transform(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
            .collect()
    }

    /// Maps every vector of `store` through `A`.
    pub fn embed_store(&self, store: &EmbeddingStore) -> Result<EmbeddingStore> {
        store.map_vectors(self.dim, |x| self.embed(x))
    }
}

pub fn embed(model: &LinearSpeakerModel, x: &[f64]) -> Result<Vec<f64>> {
    model.embed(x)
}

/// Gradients of the mean cross-entropy, laid out like the model matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
}

/// Mean softmax cross-entropy over `(xs[i], ys[i])` and its gradient with
/// respect to `A` and `C`.
pub fn loss_and_grad(model: &LinearSpeakerModel, xs: &[&[f64]], ys: &[usize]) -> Gradients {
    let d = model.dim;
    let n = model.n_classes();
    let mut ga = vec![0.0; d * d];
    let mut gc = vec![0.0; n * d];
    let mut loss = 0.0;
    let mut logits = vec![0.0; n];
    let mut h = vec![0.0; d];
    for (x, &y) in xs.iter().zip(ys) {
        let z = model.transform(x);
        for (k, l) in logits.iter_mut().enumerate() {
            *l = model.c[k * d..(k + 1) * d]
                .iter()
                .zip(&z)
                .map(|(c, z)| c * z)
                .sum();
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for l in logits.iter_mut() {
            *l = libm::exp(*l - max);
            sum += *l;
        }
        loss += libm::log(sum) - libm::log(logits[y]);
        // logits now hold p_k·sum; turn them into g = p - onehot(y).
        h.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..n {
            let g = logits[k] / sum - if k == y { 1.0 } else { 0.0 };
            let row = &model.c[k * d..(k + 1) * d];
            for j in 0..d {
                gc[k * d + j] += g * z[j];
                h[j] += g * row[j];
            }
        }
        for i in 0..d {
            for j in 0..d {
                ga[i * d + j] += h[i] * x[j];
            }
        }
    }
    let m = xs.len().max(1) as f64;
    ga.iter_mut().chain(gc.iter_mut()).for_each(|v| *v /= m);
    Gradients {
        loss: loss / m,
        a: ga,
        c: gc,
    }
}

/// Training data resolved from records: vectors, class indices, and the
/// class table.
struct Dataset<'a> {
    records: Vec<&'a UtteranceRecord>,
    xs: Vec<Vec<f64>>,
    ys: Vec<usize>,
    classes: Vec<String>,
}

fn dataset<'a>(corpus: &'a [UtteranceRecord], store: &EmbeddingStore) -> Result<Dataset<'a>> {
    validate_records(corpus)?;
    let mut records: Vec<&UtteranceRecord> = corpus.iter().collect();
    records.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    let mut classes = BTreeSet::new();
    for r in &records {
        let spk = r
            .speaker_id
            .as_deref()
            .ok_or_else(|| Error::Unlabelled(r.utt_id.clone()))?;
        classes.insert(spk);
    }
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let classes: Vec<String> = classes.into_iter().map(String::from).collect();
    let xs = records
        .iter()
        .map(|r| store.embedding(&r.utt_id))
        .collect::<Result<Vec<_>>>()?;
    let ys = records
        .iter()
        .map(|r| {
            let spk = r.speaker_id.as_deref().unwrap_or_default();
            classes
                .binary_search_by(|c| c.as_str().cmp(spk))
                .unwrap_or(0)
        })
        .collect();
    Ok(Dataset {
        records,
        xs,
        ys,
        classes,
    })
}

/// Trains on labelled records. Deterministic for fixed inputs: records are
/// ordered by id, `C` is initialised from `N(0, 0.01²)` and batches are
/// shuffled from seed sub-streams.
pub fn train(
    corpus: &[UtteranceRecord],
    store: &EmbeddingStore,
    cfg: &TrainConfig,
) -> Result<LinearSpeakerModel> {
    train_observed(corpus, store, cfg, |_| {})
}

/// [`train`], calling `observe` with the records of every mini-batch before
/// its gradient step.
pub fn train_observed<F>(
    corpus: &[UtteranceRecord],
    store: &EmbeddingStore,
    cfg: &TrainConfig,
    mut observe: F,
) -> Result<LinearSpeakerModel>
where
    F: FnMut(&[&UtteranceRecord]),
{
    cfg.validate()?;
    let data = dataset(corpus, store)?;
    let dim = store.dim();
    let n = data.classes.len();

    let mut model = LinearSpeakerModel::identity(dim);
    let mut init = rng_for(cfg.seed, "init");
    let normal = Normal::new(0.0, 0.01).map_err(|_| Error::Config("init scale".into()))?;
    model.c = (0..n * dim).map(|_| normal.sample(&mut init)).collect();
    model.classes = data.classes.clone();

    let mut shuffle = rng_for(cfg.seed, "shuffle");
    let mut order: Vec<usize> = (0..data.xs.len()).collect();
    let mut batch_recs = Vec::with_capacity(cfg.batch);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(cfg.batch) {
            batch_recs.clear();
            batch_recs.extend(chunk.iter().map(|&i| data.records[i]));
            observe(&batch_recs);
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| data.xs[i].as_slice()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| data.ys[i]).collect();
            let g = loss_and_grad(&model, &xs, &ys);
            model
                .a
                .iter_mut()
                .zip(&g.a)
                .for_each(|(w, d)| *w -= cfg.lr * d);
            model
                .c
                .iter_mut()
                .zip(&g.c)
                .for_each(|(w, d)| *w -= cfg.lr * d);
        }
    }
    if model.a.iter().chain(&model.c).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("trained model (diverged)".into()));
    }
    Ok(model)
}

/// Mean cross-entropy of `model` over labelled records.
pub fn corpus_loss(
    model: &LinearSpeakerModel,
    corpus: &[UtteranceRecord],
    store: &EmbeddingStore,
) -> Result<f64> {
    let data = dataset(corpus, store)?;
    let ys = data
        .records
        .iter()
        .map(|r| {
            let spk = r.speaker_id.as_deref().unwrap_or_default();
            model
                .class_index(spk)
                .ok_or_else(|| Error::Config(format!("speaker {spk:?} unknown to the model")))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<&[f64]> = data.xs.iter().map(Vec::as_slice).collect();
    Ok(loss_and_grad(model, &xs, &ys).loss)
}

/// Fraction of labelled records whose arg-max class is their own speaker.
pub fn accuracy(
    model: &LinearSpeakerModel,
    corpus: &[UtteranceRecord],
    store: &EmbeddingStore,
) -> Result<f64> {
    let d = model.dim;
    let mut hits = 0usize;
    for r in corpus {
        let z = model.embed(&store.embedding(&r.utt_id)?)?;
        let best = (0..model.n_classes())
            .map(|k| {
                let s: f64 = model.c[k * d..(k + 1) * d]
                    .iter()
                    .zip(&z)
                    .map(|(c, z)| c * z)
                    .sum();
                (k, s)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k);
        if best.is_some() && best == r.speaker_id.as_deref().and_then(|s| model.class_index(s)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / corpus.len().max(1) as f64)
}

/// Stage-1 Φ: a model trained only on the scenario's labelled records, or
/// the identity transform.
pub fn train_phi(
    scenario: &Scenario,
    store: &EmbeddingStore,
    cfg: &TrainConfig,
    mode: PhiMode,
) -> Result<LinearSpeakerModel> {
    match mode {
        PhiMode::Identity => Ok(LinearSpeakerModel::identity(store.dim())),
        PhiMode::Trained => train(&scenario.labelled_records(), store, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ScenarioConfig, ScenarioKind};
    use alloc::string::ToString;
    use rand::Rng;

    fn fixture(
        speakers: usize,
        per: usize,
        dim: usize,
        spread: f64,
        seed: u64,
    ) -> (Vec<UtteranceRecord>, EmbeddingStore) {
        let mut rng = rng_for(seed, "fixture");
        let mut store = EmbeddingStore::new(dim);
        let mut recs = Vec::new();
        for s in 0..speakers {
            let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            for u in 0..per {
                let id = format!("s{s}-{u}");
                let v: Vec<f64> = center
                    .iter()
                    .map(|c| c + spread * rng.random_range(-1.0..1.0))
                    .collect();
                store.insert(id.as_str(), &v).unwrap();
                recs.push(UtteranceRecord::real(id, Some(&format!("s{s}"))));
            }
        }
        (recs, store)
    }

    #[test]
    fn zero_epochs_leaves_identity() {
        let (recs, store) = fixture(3, 4, 5, 0.1, 1);
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let m = train(&recs, &store, &cfg).unwrap();
        assert_eq!(m.a(), LinearSpeakerModel::identity(5).a());
        let x = [1.0, -2.0, 0.5, 3.0, 0.0];
        assert_eq!(m.embed(&x).unwrap(), x);
    }

    #[test]
    fn separable_pair_is_learned() {
        let (recs, store) = fixture(2, 10, 4, 0.05, 2);
        let cfg = TrainConfig {
            epochs: 50,
            batch: 4,
            ..Default::default()
        };
        let m = train(&recs, &store, &cfg).unwrap();
        assert_eq!(accuracy(&m, &recs, &store).unwrap(), 1.0);
    }

    #[test]
    fn bit_identical_reruns() {
        let (recs, store) = fixture(4, 6, 6, 0.3, 3);
        let cfg = TrainConfig {
            seed: 11,
            ..Default::default()
        };
        let a = train(&recs, &store, &cfg).unwrap();
        let mut shuffled = recs.clone();
        shuffled.reverse();
        let b = train(&shuffled, &store, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_corpora() {
        let (mut recs, store) = fixture(2, 2, 3, 0.1, 4);
        let cfg = TrainConfig::default();
        assert_eq!(train(&recs[..2], &store, &cfg), Err(Error::SingleClass(1)));
        recs.push(UtteranceRecord::real("ghost", Some("s0")));
        assert_eq!(
            train(&recs, &store, &cfg),
            Err(Error::MissingEmbedding("ghost".into()))
        );
        recs.pop();
        recs[0].speaker_id = None;
        assert!(matches!(
            train(&recs, &store, &cfg),
            Err(Error::Unlabelled(_))
        ));
    }

    #[test]
    fn embed_is_linear_and_checks_dim() {
        let (recs, store) = fixture(3, 5, 4, 0.4, 5);
        let m = train(&recs, &store, &TrainConfig::default()).unwrap();
        let x = [0.3, -0.7, 1.1, 0.2];
        let ax: Vec<f64> = x.iter().map(|v| v * 2.5).collect();
        let lhs = m.embed(&ax).unwrap();
        let rhs: Vec<f64> = m.embed(&x).unwrap().iter().map(|v| v * 2.5).collect();
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).abs() <= 1e-12 * r.abs().max(1.0));
        }
        assert!(matches!(m.embed(&[1.0]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn full_batch_loss_never_increases() {
        let (recs, store) = fixture(3, 8, 6, 0.5, 6);
        let mut prev = f64::INFINITY;
        for epochs in 0..30 {
            let cfg = TrainConfig {
                epochs,
                batch: recs.len(),
                ..Default::default()
            };
            let m = train(&recs, &store, &cfg).unwrap();
            let l = corpus_loss(&m, &recs, &store).unwrap();
            assert!(l <= prev + 1e-9, "epoch {epochs}: {l} > {prev}");
            prev = l;
        }
    }

    #[test]
    fn only_labelled_records_reach_gradient_steps() {
        let (recs, store) = fixture(3, 4, 3, 0.2, 7);
        let mut seen = 0usize;
        train_observed(&recs, &store, &TrainConfig::default(), |batch| {
            assert!(batch.iter().all(|r| r.speaker_id.is_some()));
            seen += batch.len();
        })
        .unwrap();
        assert_eq!(seen, recs.len() * 20);
    }

    #[test]
    fn phi_uses_only_labelled_part() {
        let (recs, store) = fixture(6, 3, 3, 0.2, 8);
        let mut sources: Vec<UtteranceRecord> = recs[9..].to_vec();
        sources.iter_mut().for_each(|r| r.speaker_id = None);
        let scenario = Scenario {
            config: ScenarioConfig::semi(3, 3, 9, 0),
            targets: recs[..9].to_vec(),
            sources,
        };
        assert_eq!(scenario.kind(), ScenarioKind::Semi);
        assert_eq!(scenario.labelled_records().len(), 9);
        let phi = train_phi(&scenario, &store, &TrainConfig::default(), PhiMode::Trained).unwrap();
        assert_eq!(phi.classes(), ["s0", "s1", "s2"].map(|s| s.to_string()));
        let id = train_phi(
            &scenario,
            &store,
            &TrainConfig::default(),
            PhiMode::Identity,
        )
        .unwrap();
        assert_eq!(id, LinearSpeakerModel::identity(3));
    }
}
