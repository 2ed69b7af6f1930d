//! Verification scoring, equal error rate and minimum detection cost.
//!
//! A trial is accepted iff `score >= θ`. Thresholds swept are −∞, every
//! distinct score, and +∞, giving `Pmiss(θ)` = fraction of target trials
//! scoring below θ and `Pfa(θ)` = fraction of nontarget trials scoring at or
//! above θ.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::select::{cosine_with_norms, norm};
use crate::store::EmbeddingStore;
use crate::train::LinearSpeakerModel;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trial {
    /// `true` for a same-speaker (target) trial.
    pub target: bool,
    pub utt_a: String,
    pub utt_b: String,
}

impl Trial {
    pub fn new(target: bool, utt_a: impl Into<String>, utt_b: impl Into<String>) -> Self {
        Self {
            target,
            utt_a: utt_a.into(),
            utt_b: utt_b.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DcfParams {
    pub p_target: f64,
    pub c_miss: f64,
    pub c_fa: f64,
}

impl Default for DcfParams {
    fn default() -> Self {
        Self {
            p_target: 0.01,
            c_miss: 1.0,
            c_fa: 1.0,
        }
    }
}

impl DcfParams {
    pub fn validate(&self) -> Result<()> {
        let p = self.p_target;
        if !(p > 0.0 && p < 1.0)
            || !(self.c_miss.is_finite() && self.c_miss > 0.0)
            || !(self.c_fa.is_finite() && self.c_fa > 0.0)
        {
            return Err(Error::Config(format!("invalid DCF parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerPoint {
    pub eer: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub n_trials: usize,
    pub eer: f64,
    pub min_dcf: f64,
    pub p_target: f64,
    pub c_miss: f64,
    pub c_fa: f64,
    pub threshold_at_eer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OperatingPoint {
    threshold: f64,
    p_miss: f64,
    p_fa: f64,
}

/// Operating points in order of increasing threshold (−∞, distinct scores,
/// +∞). `Pmiss` is non-decreasing and `Pfa` non-increasing along the list.
fn operating_points(scores: &[f64], labels: &[bool]) -> Result<Vec<OperatingPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    let n_tar = labels.iter().filter(|&&l| l).count();
    let n_non = labels.len() - n_tar;
    if n_tar == 0 || n_non == 0 {
        return Err(Error::SingleClassTrials);
    }
    let mut order: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (nt, nn) = (n_tar as f64, n_non as f64);
    let mut points = Vec::with_capacity(order.len() + 2);
    points.push(OperatingPoint {
        threshold: f64::NEG_INFINITY,
        p_miss: 0.0,
        p_fa: 1.0,
    });
    let (mut tar_below, mut non_below) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = order[i].0;
        points.push(OperatingPoint {
            threshold: s,
            p_miss: tar_below as f64 / nt,
            p_fa: (n_non - non_below) as f64 / nn,
        });
        while i < order.len() && order[i].0 == s {
            if order[i].1 {
                tar_below += 1;
            } else {
                non_below += 1;
            }
            i += 1;
        }
    }
    points.push(OperatingPoint {
        threshold: f64::INFINITY,
        p_miss: 1.0,
        p_fa: 0.0,
    });
    Ok(points)
}

/// Locates where `Pmiss` meets `Pfa` on the swept operating points. An exact
/// meeting point is returned as is; otherwise the two adjacent points that
/// bracket the crossing are joined by a straight line.
fn crossing(points: &[OperatingPoint]) -> EerPoint {
    // points[0] has Pmiss = 0 < Pfa = 1 and the last has Pmiss = 1 > Pfa = 0.
    let i = points
        .iter()
        .position(|p| p.p_miss >= p.p_fa)
        .unwrap_or(points.len() - 1);
    let hi = points[i];
    if hi.p_miss == hi.p_fa {
        return EerPoint {
            eer: hi.p_miss,
            threshold: hi.threshold,
        };
    }
    let lo = points[i - 1];
    let gap_lo = lo.p_fa - lo.p_miss;
    let gap_hi = hi.p_miss - hi.p_fa;
    let t = gap_lo / (gap_lo + gap_hi);
    let eer = lo.p_miss + t * (hi.p_miss - lo.p_miss);
    let threshold = match (lo.threshold.is_finite(), hi.threshold.is_finite()) {
        (true, true) => lo.threshold + t * (hi.threshold - lo.threshold),
        (true, false) => lo.threshold,
        _ => hi.threshold,
    };
    EerPoint { eer, threshold }
}

/// Equal error rate and the threshold at which it occurs. Labels are `true`
/// for target trials.
pub fn eer(scores: &[f64], labels: &[bool]) -> Result<EerPoint> {
    Ok(crossing(&operating_points(scores, labels)?))
}

/// Minimum normalised detection cost over all swept thresholds.
pub fn min_dcf(scores: &[f64], labels: &[bool], params: &DcfParams) -> Result<f64> {
    params.validate()?;
    let points = operating_points(scores, labels)?;
    Ok(dcf_min(&points, params))
}

fn dcf_min(points: &[OperatingPoint], params: &DcfParams) -> f64 {
    let w_miss = params.c_miss * params.p_target;
    let w_fa = params.c_fa * (1.0 - params.p_target);
    let norm = w_miss.min(w_fa);
    points
        .iter()
        .map(|p| (w_miss * p.p_miss + w_fa * p.p_fa) / norm)
        .fold(f64::INFINITY, f64::min)
}

/// Cosine score of each trial in the model's `A` space, in trial order.
pub fn score_trials(
    trials: &[Trial],
    model: &LinearSpeakerModel,
    store: &EmbeddingStore,
) -> Result<Vec<f64>> {
    let mut cache: BTreeMap<&str, (Vec<f64>, f64)> = BTreeMap::new();
    let mut scores = Vec::with_capacity(trials.len());
    for t in trials {
        for id in [t.utt_a.as_str(), t.utt_b.as_str()] {
            if !cache.contains_key(id) {
                let z = model.embed(&store.embedding(id)?)?;
                let n = norm(&z);
                if n == 0.0 {
                    return Err(Error::ZeroNorm(id.into()));
                }
                cache.insert(id, (z, n));
            }
        }
        let (a, na) = &cache[t.utt_a.as_str()];
        let (b, nb) = &cache[t.utt_b.as_str()];
        scores.push(cosine_with_norms(a, b, *na, *nb));
    }
    Ok(scores)
}

/// Scores the trial list and summarises it.
pub fn evaluate(
    trials: &[Trial],
    model: &LinearSpeakerModel,
    store: &EmbeddingStore,
    params: &DcfParams,
) -> Result<(Vec<f64>, EvalReport)> {
    params.validate()?;
    let scores = score_trials(trials, model, store)?;
    let labels: Vec<bool> = trials.iter().map(|t| t.target).collect();
    let points = operating_points(&scores, &labels)?;
    let e = crossing(&points);
    let report = EvalReport {
        n_trials: trials.len(),
        eer: e.eer,
        min_dcf: dcf_min(&points, params),
        p_target: params.p_target,
        c_miss: params.c_miss,
        c_fa: params.c_fa,
        threshold_at_eer: e.threshold,
    };
    Ok((scores, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn split(targets: &[f64], nontargets: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let mut s = targets.to_vec();
        s.extend_from_slice(nontargets);
        let mut l = vec![true; targets.len()];
        l.extend(vec![false; nontargets.len()]);
        (s, l)
    }

    #[test]
    fn worked_example() {
        let (s, l) = split(&[0.9, 0.8, 0.7], &[0.75, 0.6, 0.2]);
        let e = eer(&s, &l).unwrap();
        assert!((e.eer - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.threshold, 0.75);
        let d = min_dcf(&s, &l, &DcfParams::default()).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn separated_and_inverted() {
        let (s, l) = split(&[0.9, 0.8], &[0.1, 0.2, 0.3]);
        assert_eq!(eer(&s, &l).unwrap().eer, 0.0);
        assert_eq!(min_dcf(&s, &l, &DcfParams::default()).unwrap(), 0.0);
        let inv: Vec<bool> = l.iter().map(|x| !x).collect();
        assert_eq!(eer(&s, &inv).unwrap().eer, 1.0);
    }

    #[test]
    fn all_equal_scores() {
        let (s, l) = split(&[0.5, 0.5], &[0.5, 0.5, 0.5]);
        assert_eq!(min_dcf(&s, &l, &DcfParams::default()).unwrap(), 1.0);
        assert_eq!(eer(&s, &l).unwrap().eer, 0.5);
    }

    #[test]
    fn interpolates_between_points() {
        // θ=0.5: (Pmiss, Pfa) = (1/3, 1/2); θ=0.6: (1/3, 0). The line between
        // them meets the diagonal a third of the way along.
        let (s, l) = split(&[0.2, 0.6, 0.9], &[0.1, 0.5]);
        let e = eer(&s, &l).unwrap();
        assert!((e.eer - 1.0 / 3.0).abs() < 1e-15);
        assert!((e.threshold - (0.5 + 0.1 / 3.0)).abs() < 1e-12);
        // θ=0.5: (0, 1/2); θ=0.6: (1, 1/2); crossing halfway.
        let (s, l) = split(&[0.5], &[0.4, 0.6]);
        assert_eq!(eer(&s, &l).unwrap().eer, 0.5);
    }

    #[test]
    fn input_errors() {
        assert_eq!(
            eer(&[0.1, 0.2], &[true, true]).err(),
            Some(Error::SingleClassTrials)
        );
        assert!(matches!(
            eer(&[0.1], &[true, false]),
            Err(Error::LengthMismatch { .. })
        ));
        let bad = DcfParams {
            p_target: 1.0,
            ..Default::default()
        };
        assert!(min_dcf(&[0.1, 0.2], &[true, false], &bad).is_err());
    }

    #[test]
    fn scoring_basics() {
        let mut st = EmbeddingStore::new(2);
        st.insert("u", &[3.0, 4.0]).unwrap();
        st.insert("x", &[1.0, 0.0]).unwrap();
        st.insert("y", &[0.0, 2.0]).unwrap();
        let m = LinearSpeakerModel::identity(2);
        let trials = [Trial::new(true, "u", "u"), Trial::new(false, "x", "y")];
        let s = score_trials(&trials, &m, &st).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15);
        assert_eq!(s[1], 0.0);
        let ghost = [Trial::new(true, "u", "ghost")];
        assert_eq!(
            score_trials(&ghost, &m, &st).err(),
            Some(Error::MissingEmbedding("ghost".into()))
        );
    }

    proptest! {
        #[test]
        fn monotone_transform_invariance(
            scores in proptest::collection::vec(-1.0f64..1.0, 2..200),
            labels in proptest::collection::vec(any::<bool>(), 200),
        ) {
            let labels = &labels[..scores.len()];
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let warped: Vec<f64> = scores.iter().map(|s| libm::exp(3.0 * s) + 7.0).collect();
            let p = DcfParams::default();
            prop_assert_eq!(eer(&scores, labels).unwrap().eer, eer(&warped, labels).unwrap().eer);
            prop_assert_eq!(min_dcf(&scores, labels, &p).unwrap(), min_dcf(&warped, labels, &p).unwrap());
            let e = eer(&scores, labels).unwrap().eer;
            prop_assert!((0.0..=1.0).contains(&e));
            let d = min_dcf(&scores, labels, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
