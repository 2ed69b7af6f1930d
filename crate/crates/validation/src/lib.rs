//! Slow, obviously-correct reference implementations used to check the
//! optimised code paths in `vca-core`.

use vca_core::cosine;

/// Top-`k` ids by full sort: descending similarity, then ascending id,
/// excluded ids removed first.
pub fn top_k_by_sort(
    target: &[f64],
    candidates: &[(String, Vec<f64>)],
    k: usize,
    excluded: &[&str],
) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = candidates
        .iter()
        .filter(|(id, _)| !excluded.contains(&id.as_str()))
        .map(|(id, v)| (cosine(target, v).unwrap(), id.as_str()))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored
        .into_iter()
        .take(k)
        .map(|(_, id)| id.to_string())
        .collect()
}

/// Miss and false-alarm rates at threshold `theta` (accept iff score ≥ θ),
/// counted over every trial.
pub fn rates_at(scores: &[f64], labels: &[bool], theta: f64) -> (f64, f64) {
    let (mut miss, mut fa, mut nt, mut nn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &t) in scores.iter().zip(labels) {
        if t {
            nt += 1;
            miss += usize::from(s < theta);
        } else {
            nn += 1;
            fa += usize::from(s >= theta);
        }
    }
    (miss as f64 / nt as f64, fa as f64 / nn as f64)
}

fn thresholds(scores: &[f64]) -> Vec<f64> {
    let mut t = vec![f64::NEG_INFINITY];
    t.extend_from_slice(scores);
    t.push(f64::INFINITY);
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// EER by an O(n²) sweep: rates are recounted from scratch at every
/// candidate threshold, the first point with Pmiss ≥ Pfa is the crossing,
/// and a strict crossing is interpolated linearly with the point before.
pub fn eer_brute(scores: &[f64], labels: &[bool]) -> f64 {
    let pts: Vec<(f64, f64)> = thresholds(scores)
        .into_iter()
        .map(|t| rates_at(scores, labels, t))
        .collect();
    let i = pts.iter().position(|(m, f)| m >= f).unwrap();
    let (m1, f1) = pts[i];
    if m1 == f1 {
        return m1;
    }
    let (m0, f0) = pts[i - 1];
    let t = (f0 - m0) / ((f0 - m0) + (m1 - f1));
    m0 + t * (m1 - m0)
}

/// Normalised minDCF by an O(n²) sweep over every score under both the
/// `≥` and `>` acceptance conventions, plus the two infinite thresholds.
pub fn min_dcf_brute(
    scores: &[f64],
    labels: &[bool],
    p_target: f64,
    c_miss: f64,
    c_fa: f64,
) -> f64 {
    let w_miss = c_miss * p_target;
    let w_fa = c_fa * (1.0 - p_target);
    let norm = w_miss.min(w_fa);
    let cost = |(m, f): (f64, f64)| (w_miss * m + w_fa * f) / norm;
    let mut best = cost(rates_at(scores, labels, f64::NEG_INFINITY)).min(cost(rates_at(
        scores,
        labels,
        f64::INFINITY,
    )));
    for &s in scores {
        best = best.min(cost(rates_at(scores, labels, s)));
        // Accepting iff score > s is the same as accepting iff score ≥ next_up(s).
        best = best.min(cost(rates_at(scores, labels, next_up(s))));
    }
    best
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    f64::from_bits(if x > 0.0 { bits + 1 } else { bits - 1 })
}

/// Ranks (1-based, average rank for ties).
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of the ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let scores = [0.9, 0.8, 0.7, 0.75, 0.6, 0.2];
        let labels = [true, true, true, false, false, false];
        assert!((eer_brute(&scores, &labels) - 1.0 / 3.0).abs() < 1e-15);
        assert!((min_dcf_brute(&scores, &labels, 0.01, 1.0, 1.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_extremes() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 5.0, 9.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sort_oracle_breaks_ties_by_id() {
        let c = vec![
            ("b".to_string(), vec![1.0, 0.0]),
            ("a".to_string(), vec![2.0, 0.0]),
            ("c".to_string(), vec![0.0, 1.0]),
        ];
        assert_eq!(top_k_by_sort(&[1.0, 0.0], &c, 2, &[]), ["a", "b"]);
        assert_eq!(top_k_by_sort(&[1.0, 0.0], &c, 2, &["a"]), ["b", "c"]);
    }
}
