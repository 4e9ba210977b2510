//! Landing probabilities of a uniform random walk rooted at a seed set.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::sbm::Graph;

const ORACLE_MAX_NODES: usize = 12;
const ORACLE_MAX_STEPS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    /// Start nodes; the walk starts at one of them chosen uniformly.
    pub seeds: Vec<usize>,
    /// Number of steps `K`.
    pub steps: usize,
}

impl WalkConfig {
    pub fn new(seeds: Vec<usize>, steps: usize) -> Self {
        WalkConfig { seeds, steps }
    }

    pub fn single(seed: usize, steps: usize) -> Self {
        WalkConfig { seeds: vec![seed], steps }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("seed set is empty"));
        }
        if let Some(&s) = self.seeds.iter().find(|&&s| s >= n) {
            return Err(Error::invalid(format!("seed {s} is not a node of a {n}-node graph")));
        }
        if self.steps == 0 {
            return Err(Error::invalid("walk length K must be at least 1"));
        }
        Ok(())
    }

    fn start_distribution(&self, n: usize) -> Vec<f64> {
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        let mut p = vec![0.0; n];
        let w = 1.0 / seeds.len() as f64;
        for s in seeds {
            p[s] = w;
        }
        p
    }
}

/// `n x K` matrix whose entry `(v, k)` is the probability that the walk
/// sits at `v` after exactly `k` steps, `k = 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingProfile {
    n: usize,
    steps: usize,
    data: Vec<f64>,
}

impl LandingProfile {
    pub fn zeros(n: usize, steps: usize) -> Self {
        LandingProfile { n, steps, data: vec![0.0; n * steps] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let steps = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != steps) {
            return Err(Error::DimensionMismatch { expected: steps, actual: bad.len() });
        }
        Ok(LandingProfile { n: rows.len(), steps, data: rows.concat() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `r_k^v` with `k` counted from 1.
    pub fn get(&self, v: usize, k: usize) -> f64 {
        self.data[v * self.steps + (k - 1)]
    }

    fn set(&mut self, v: usize, k: usize, x: f64) {
        self.data[v * self.steps + (k - 1)] = x;
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.steps..(v + 1) * self.steps]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.steps.max(1)).take(self.n)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|v| self.get(v, k)).collect()
    }

    /// Keeps the first `steps` columns.
    pub fn truncated(&self, steps: usize) -> Result<Self> {
        if steps == 0 || steps > self.steps {
            return Err(Error::invalid(format!(
                "cannot truncate a {}-step profile to {steps} steps",
                self.steps
            )));
        }
        let data = self.rows().flat_map(|r| r[..steps].iter().copied()).collect();
        Ok(LandingProfile { n: self.n, steps, data })
    }

    /// Same profile with rows reordered so that new row `perm[v]` is old row `v`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = LandingProfile::zeros(self.n, self.steps);
        for v in 0..self.n {
            let dst = perm[v];
            out.data[dst * self.steps..(dst + 1) * self.steps].copy_from_slice(self.row(v));
        }
        out
    }

    /// CSV with header `node,k1,...,kK`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.steps).map(|k| format!("k{k}")).collect();
        writeln!(out, "node,{}", header.join(","))?;
        for (v, row) in self.rows().enumerate() {
            let cells: Vec<String> = row.iter().map(|&x| sig17(x)).collect();
            writeln!(out, "{v},{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Exact landing probabilities by repeated sparse transition steps.
///
/// Mass at a node with no out-neighbors stays in place (an implicit
/// self-loop), so every column sums to one.
pub fn landing_probabilities(graph: &Graph, cfg: &WalkConfig) -> Result<LandingProfile> {
    let n = graph.n();
    cfg.validate(n)?;
    let mut profile = LandingProfile::zeros(n, cfg.steps);
    let mut current = cfg.start_distribution(n);
    let mut next = vec![0.0; n];
    for k in 1..=cfg.steps {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (u, &mass) in current.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let nbrs = graph.out_neighbors(u);
            if nbrs.is_empty() {
                next[u] += mass;
                continue;
            }
            let share = mass / nbrs.len() as f64;
            for &v in nbrs {
                next[v as usize] += share;
            }
        }
        for (v, &x) in next.iter().enumerate() {
            profile.set(v, k, x);
        }
        std::mem::swap(&mut current, &mut next);
    }
    Ok(profile)
}

/// Test oracle: enumerates every walk of length up to `K` from every seed and
/// adds the product of `1 / out-degree` along it. Exponential cost, so the
/// graph and walk length are capped.
pub fn walk_enumeration_oracle(graph: &Graph, cfg: &WalkConfig) -> Result<LandingProfile> {
    let n = graph.n();
    cfg.validate(n)?;
    if n > ORACLE_MAX_NODES || cfg.steps > ORACLE_MAX_STEPS {
        return Err(Error::Refused(format!(
            "walk enumeration is limited to n <= {ORACLE_MAX_NODES} and K <= {ORACLE_MAX_STEPS} (got n = {n}, K = {})",
            cfg.steps
        )));
    }

    fn extend(graph: &Graph, node: usize, depth: usize, weight: f64, profile: &mut LandingProfile) {
        if depth == profile.steps {
            return;
        }
        let nbrs = graph.out_neighbors(node);
        if nbrs.is_empty() {
            let k = depth + 1;
            profile.set(node, k, profile.get(node, k) + weight);
            extend(graph, node, k, weight, profile);
            return;
        }
        let w = weight / nbrs.len() as f64;
        for &v in nbrs {
            let v = v as usize;
            let k = depth + 1;
            profile.set(v, k, profile.get(v, k) + w);
            extend(graph, v, k, w, profile);
        }
    }

    let start = cfg.start_distribution(n);
    let mut profile = LandingProfile::zeros(n, cfg.steps);
    for (s, &w) in start.iter().enumerate() {
        if w > 0.0 {
            extend(graph, s, 0, w, &mut profile);
        }
    }
    Ok(profile)
}

/// Centroids `(a, b)` of the profile rows whose block lies in `in_blocks`
/// versus all other rows. Seed rows are included.
pub fn class_mean_profiles(profile: &LandingProfile, labels: &[usize], in_blocks: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    if labels.len() != profile.n() {
        return Err(Error::DimensionMismatch { expected: profile.n(), actual: labels.len() });
    }
    let k = profile.steps();
    let mut a = vec![0.0; k];
    let mut b = vec![0.0; k];
    let (mut na, mut nb) = (0usize, 0usize);
    for (row, label) in profile.rows().zip(labels) {
        let (acc, count) = if in_blocks.contains(label) { (&mut a, &mut na) } else { (&mut b, &mut nb) };
        *count += 1;
        for (x, &r) in acc.iter_mut().zip(row) {
            *x += r;
        }
    }
    if na == 0 || nb == 0 {
        return Err(Error::invalid("both classes need at least one node"));
    }
    a.iter_mut().for_each(|x| *x /= na as f64);
    b.iter_mut().for_each(|x| *x /= nb as f64);
    Ok((a, b))
}
