//! Labeling metrics and Monte Carlo summaries.

use crate::discriminant::rank_order;
use crate::error::{Error, Result};

/// Pearson correlation of the `+1/-1` encodings, maximized over swapping the
/// predicted classes (so it equals `|r|`). A constant prediction scores 0.
pub fn pearson_correlation(predicted: &[bool], truth: &[bool]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), actual: predicted.len() });
    }
    let n = truth.len() as f64;
    let enc = |b: bool| if b { 1.0 } else { -1.0 };
    let mean = |xs: &[bool]| xs.iter().map(|&b| enc(b)).sum::<f64>() / n;
    if truth.iter().all(|&t| t) || truth.iter().all(|&t| !t) {
        return Err(Error::invalid("true labeling needs both classes"));
    }
    let (mp, mt) = (mean(predicted), mean(truth));
    let (mut cov, mut vp, mut vt) = (0.0, 0.0, 0.0);
    for (&p, &t) in predicted.iter().zip(truth) {
        let (dp, dt) = (enc(p) - mp, enc(t) - mt);
        cov += dp * dt;
        vp += dp * dp;
        vt += dt * dt;
    }
    if vp == 0.0 {
        return Ok(0.0);
    }
    Ok((cov / (vp * vt).sqrt()).abs().min(1.0))
}

/// Node order by descending score with the seeds first (in id order); ties by id.
pub fn seeded_order(scores: &[f64], seeds: &[usize]) -> Vec<usize> {
    let mut is_seed = vec![false; scores.len()];
    for &s in seeds {
        is_seed[s] = true;
    }
    let mut order: Vec<usize> = (0..scores.len()).filter(|&v| is_seed[v]).collect();
    order.extend(rank_order(scores).into_iter().filter(|&v| !is_seed[v]));
    order
}

/// Marks the first `count` nodes of `order` as in-class.
pub fn top_labeling(order: &[usize], count: usize) -> Vec<bool> {
    let mut labels = vec![false; order.len()];
    for &v in order.iter().take(count) {
        labels[v] = true;
    }
    labels
}

/// `recall[m - 1] = |top-m ∩ in-class| / |in-class|` for `m = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecallCurve {
    pub recall: Vec<f64>,
}

impl RecallCurve {
    /// Recall of the first `m` returned nodes, `m >= 1`.
    pub fn at(&self, m: usize) -> f64 {
        self.recall[m - 1]
    }
}

pub fn recall_curve(scores: &[f64], truth: &[bool], seeds: &[usize]) -> Result<RecallCurve> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), actual: scores.len() });
    }
    if let Some(&s) = seeds.iter().find(|&&s| s >= scores.len()) {
        return Err(Error::invalid(format!("seed {s} out of range")));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    if positives == 0 {
        return Err(Error::invalid("in-class is empty"));
    }
    let mut hits = 0usize;
    let recall = seeded_order(scores, seeds)
        .into_iter()
        .map(|v| {
            hits += truth[v] as usize;
            hits as f64 / positives as f64
        })
        .collect();
    Ok(RecallCurve { recall })
}

/// Nearest-rank quantile of sorted data: the `ceil(level * n)`-th smallest value.
pub fn nearest_rank(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let rank = ((level * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBand {
    pub levels: (f64, f64),
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QuantileBand {
    pub fn contains(&self, k: usize, x: f64) -> bool {
        self.lower[k] <= x && x <= self.upper[k]
    }
}

/// Pointwise bands over realizations; `samples[m][k]` is realization `m` at step `k`.
pub fn quantile_bands(samples: &[Vec<f64>], levels: (f64, f64)) -> Result<QuantileBand> {
    if samples.len() < 2 {
        return Err(Error::invalid("quantile bands need at least two samples"));
    }
    if !(0.0..=1.0).contains(&levels.0) || !(levels.0..=1.0).contains(&levels.1) {
        return Err(Error::invalid("levels must satisfy 0 <= lo <= hi <= 1"));
    }
    let k = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, actual: bad.len() });
    }
    let mut lower = Vec::with_capacity(k);
    let mut upper = Vec::with_capacity(k);
    for j in 0..k {
        let mut col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        col.sort_by(f64::total_cmp);
        lower.push(nearest_rank(&col, levels.0));
        upper.push(nearest_rank(&col, levels.1));
    }
    Ok(QuantileBand { levels, lower, upper })
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
