//! Method-of-moments estimates of `p_in` and `p_out` for a two-block
//! affiliation model with known block sizes.
//!
//! The size moments are used as proportions, `s2 = (n_a^2 + n_b^2) / n^2`
//! and `s3 = (n_a^3 + n_b^3) / n^3`, so they live on the same scale as the
//! edge moments; with raw counts the `p_out` formula is not consistent.
//!
//! With `a = n_a / n` the coefficient of `m3` in the `p_out` formula is
//! proportional to `a b (a - b)^2`, so the formula carries no triangle
//! information for equal blocks and collapses to `p_out = m1`. Near balance
//! the estimator instead uses the identity `m3 - m1^3 = ((p_in - p_out) / 2)^3`,
//! exact in expectation for equal blocks.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sbm::Graph;

/// Block-proportion gap `|n_a - n_b| / n` below which the balanced
/// estimator is used.
pub const BALANCE_TOL: f64 = 0.05;
const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorMoments {
    pub s2: f64,
    pub s3: f64,
    /// Edge density over ordered pairs.
    pub m1: f64,
    /// Two-star density over ordered distinct triples.
    pub m2: f64,
    /// Triangle density over ordered distinct triples.
    pub m3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMethod {
    /// Closed form in `m1`, `m2`, `m3` for unequal blocks.
    Unbalanced,
    /// Cube-root identity for (near) equal blocks.
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatedParams {
    /// Clipped to `[0, 1]`.
    pub p_in_hat: f64,
    pub p_out_hat: f64,
    /// `(p_in - p_out) / (p_in + p_out)` from the clipped estimates; `None`
    /// when both are zero.
    pub alpha_est: Option<f64>,
    pub p_in_raw: f64,
    pub p_out_raw: f64,
    pub m: [f64; 3],
    /// `(m1^2 - m2)(2 s2^3 - 3 s3 s2 + s3)`.
    pub denominator: f64,
    pub method: EstimatorMethod,
}

impl EstimatedParams {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Edge, two-star and triangle densities of an undirected graph (self-loops
/// ignored), with size moments from `(n_a, n_b)`.
pub fn moments(graph: &Graph, n_a: usize, n_b: usize) -> Result<EstimatorMoments> {
    let n = graph.n();
    if n < 3 {
        return Err(Error::invalid(format!("moments need at least 3 nodes, got {n}")));
    }
    if graph.is_directed() {
        return Err(Error::invalid("moment estimator needs an undirected graph"));
    }
    if n_a + n_b != n {
        return Err(Error::invalid(format!("block sizes {n_a} + {n_b} do not add up to n = {n}")));
    }
    let neighbors = |u: usize| graph.out_neighbors(u).iter().map(|&v| v as usize).filter(move |&v| v != u);

    let (degree_sum, wedge_sum, triangles) = (0..n)
        .into_par_iter()
        .map(|u| {
            let d = neighbors(u).count() as f64;
            let mut tri = 0u64;
            for v in neighbors(u).filter(|&v| v > u) {
                tri += count_common_above(graph.out_neighbors(u), graph.out_neighbors(v), v);
            }
            (d, d * (d - 1.0), tri)
        })
        .reduce(|| (0.0, 0.0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));

    let nf = n as f64;
    let pairs = nf * (nf - 1.0);
    let triples = pairs * (nf - 2.0);
    let (a, b) = (n_a as f64 / nf, n_b as f64 / nf);
    Ok(EstimatorMoments {
        s2: a * a + b * b,
        s3: a * a * a + b * b * b,
        m1: degree_sum / pairs,
        m2: wedge_sum / triples,
        m3: 6.0 * triangles as f64 / triples,
    })
}

/// `|{w in x ∩ y : w > floor}|` for sorted lists.
fn count_common_above(x: &[u32], y: &[u32], floor: usize) -> u64 {
    let start = |s: &[u32]| s.partition_point(|&w| w as usize <= floor);
    let (mut i, mut j) = (start(x), start(y));
    let mut count = 0;
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

pub fn estimate(graph: &Graph, n_a: usize, n_b: usize) -> Result<EstimatedParams> {
    let mo = moments(graph, n_a, n_b)?;
    estimate_from_moments(&mo, n_a, n_b)
}

pub fn estimate_from_moments(mo: &EstimatorMoments, n_a: usize, n_b: usize) -> Result<EstimatedParams> {
    let EstimatorMoments { s2, s3, m1, m2, m3 } = *mo;
    let denominator = (m1 * m1 - m2) * (2.0 * s2.powi(3) - 3.0 * s3 * s2 + s3);
    let gap = (n_a as f64 - n_b as f64).abs() / (n_a + n_b) as f64;
    let (p_in_raw, p_out_raw, method) = if gap <= BALANCE_TOL {
        let diff = 2.0 * (m3 - m1 * m1 * m1).cbrt();
        (m1 + diff / 2.0, m1 - diff / 2.0, EstimatorMethod::Balanced)
    } else {
        if denominator.abs() < SINGULAR_TOL {
            return Err(Error::NearSingularEstimator { denominator });
        }
        let numerator = (s3 - s2 * s3) * m1.powi(3) + (s2.powi(3) - s3) * m2 * m1 + (s3 * s2 - s2.powi(3)) * m3;
        let p_out = numerator / denominator;
        ((m1 + (s2 - 1.0) * p_out) / s2, p_out, EstimatorMethod::Unbalanced)
    };
    let p_in_hat = p_in_raw.clamp(0.0, 1.0);
    let p_out_hat = p_out_raw.clamp(0.0, 1.0);
    let total = p_in_hat + p_out_hat;
    Ok(EstimatedParams {
        p_in_hat,
        p_out_hat,
        alpha_est: (total > 0.0).then(|| (p_in_hat - p_out_hat) / total),
        p_in_raw,
        p_out_raw,
        m: [m1, m2, m3],
        denominator,
        method,
    })
}
