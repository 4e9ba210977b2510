//! Class moments of landing profiles estimated from simulated block models.

use rand::seq::index::sample;
use rayon::prelude::*;

use super::{ClassMoments, DEFAULT_COND_CAP};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};
use crate::sbm::{generate, SbmParams};
use crate::walk::{landing_probabilities, WalkConfig};

/// Streaming mean and scatter matrix (Welford), mergeable in any grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    count: usize,
    mean: Vec<f64>,
    /// Row-major sum of outer products of deviations.
    scatter: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        MomentAccumulator { count: 0, mean: vec![0.0; dim], scatter: vec![0.0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.dim();
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, dx) in self.mean.iter_mut().zip(&delta) {
            *m += dx / n;
        }
        for i in 0..d {
            let after_i = x[i] - self.mean[i];
            for j in 0..d {
                self.scatter[i * d + j] += delta[j] * after_i;
            }
        }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &MomentAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let d = self.dim();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..d {
            for j in 0..d {
                self.scatter[i * d + j] += other.scatter[i * d + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (m, dx) in self.mean.iter_mut().zip(&delta) {
            *m += dx * nb / n;
        }
        self.count += other.count;
    }

    /// Unbiased sample covariance; needs at least two rows.
    pub fn covariance(&self) -> Option<Vec<Vec<f64>>> {
        if self.count < 2 {
            return None;
        }
        let d = self.dim();
        let c = (self.count - 1) as f64;
        Some(
            (0..d)
                .map(|i| (0..d).map(|j| 0.5 * (self.scatter[i * d + j] + self.scatter[j * d + i]) / c).collect())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentConfig {
    /// Number of simulated graphs `M`.
    pub realizations: usize,
    /// Distinct in-class seeds per graph; each contributes its own single-seed walk.
    pub seeds_per_graph: usize,
    pub k_max: usize,
    pub cond_cap: f64,
    pub rng_seed: u64,
}

impl Default for MomentConfig {
    fn default() -> Self {
        MomentConfig { realizations: 100, seeds_per_graph: 1, k_max: 10, cond_cap: DEFAULT_COND_CAP, rng_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    /// Moments truncated to the selected `K`.
    pub moments: ClassMoments,
    /// Moments at `k_max`, before selection.
    pub full: ClassMoments,
    pub cond_a: f64,
    pub cond_b: f64,
}

impl MomentEstimate {
    pub fn k(&self) -> usize {
        self.moments.k()
    }
}

/// Simulates `M` graphs, walks from random in-class seeds and pools the
/// non-seed profile rows of each class. Realization `m` uses seed
/// `derive_seed(rng_seed, m)`, so the result does not depend on thread count.
pub fn estimate_moments(params: &SbmParams, in_blocks: &[usize], cfg: &MomentConfig) -> Result<MomentEstimate> {
    params.validate()?;
    if cfg.realizations < 2 {
        return Err(Error::invalid("need at least two realizations"));
    }
    if cfg.k_max == 0 || cfg.seeds_per_graph == 0 {
        return Err(Error::invalid("k_max and seeds_per_graph must be positive"));
    }
    let c = params.num_blocks();
    if in_blocks.is_empty() || in_blocks.iter().any(|&b| b >= c) || (0..c).all(|b| in_blocks.contains(&b)) {
        return Err(Error::invalid("in-class must be a nonempty proper subset of the blocks"));
    }
    let labels = params.labels();
    let in_nodes: Vec<usize> = (0..params.n).filter(|&v| in_blocks.contains(&labels[v])).collect();
    if cfg.seeds_per_graph > in_nodes.len() {
        return Err(Error::invalid("more seeds per graph than in-class nodes"));
    }

    let parts: Vec<(MomentAccumulator, MomentAccumulator)> = (0..cfg.realizations)
        .into_par_iter()
        .map(|m| {
            let trial = derive_seed(cfg.rng_seed, m as u64);
            let graph = generate(params, derive_seed(trial, 0))?;
            let mut rng = stream(derive_seed(trial, 1), 0);
            let mut acc_a = MomentAccumulator::new(cfg.k_max);
            let mut acc_b = MomentAccumulator::new(cfg.k_max);
            for idx in sample(&mut rng, in_nodes.len(), cfg.seeds_per_graph) {
                let seed = in_nodes[idx];
                let profile = landing_probabilities(&graph, &WalkConfig::single(seed, cfg.k_max))?;
                for (v, row) in profile.rows().enumerate() {
                    if v == seed {
                        continue;
                    }
                    if in_blocks.contains(&labels[v]) {
                        acc_a.push(row);
                    } else {
                        acc_b.push(row);
                    }
                }
            }
            Ok((acc_a, acc_b))
        })
        .collect::<Result<_>>()?;

    let mut acc_a = MomentAccumulator::new(cfg.k_max);
    let mut acc_b = MomentAccumulator::new(cfg.k_max);
    for (a, b) in &parts {
        acc_a.merge(a);
        acc_b.merge(b);
    }
    let (Some(sigma_a), Some(sigma_b)) = (acc_a.covariance(), acc_b.covariance()) else {
        return Err(Error::DegenerateMoments("too few profile rows in a class".into()));
    };
    let full = ClassMoments {
        a: acc_a.mean().to_vec(),
        b: acc_b.mean().to_vec(),
        sigma_a,
        sigma_b,
        pi_a: in_nodes.len() as f64 / params.n as f64,
        count_a: acc_a.count(),
        count_b: acc_b.count(),
    };
    let moments = full.select_k(cfg.k_max, cfg.cond_cap)?;
    let (cond_a, cond_b) = moments.condition_numbers();
    Ok(MomentEstimate { moments, full, cond_a, cond_b })
}
