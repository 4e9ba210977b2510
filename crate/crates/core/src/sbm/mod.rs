//! Stochastic block model parameters and graph realizations.
//!
//! Nodes are laid out block-contiguously: block 0 occupies the first
//! `n_0` node ids, block 1 the next `n_1`, and so on. Block ids are
//! 0-based in memory and 1-based in label files.
//!
//! Direction convention: `P[i][j]` is the probability that a node of
//! block `j` has an arc into a given node of block `i`. A walker at a node
//! of block `j` therefore sees on average `n_i * P[i][j]` successors in
//! block `i`, which is the transition structure of the landing-probability
//! recurrences in [`crate::theory`]. For undirected models `P` is symmetric
//! and the convention is moot.

mod graph;
pub mod io;

pub use graph::Graph;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const PI_SUM_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

/// Parameters of the generative model `G(n, pi, P)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n: usize,
    pub pi: Vec<f64>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub self_loops: bool,
}

impl SbmParams {
    pub fn num_blocks(&self) -> usize {
        self.pi.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        let c = self.pi.len();
        if c == 0 {
            return Err(Error::invalid("pi must name at least one block"));
        }
        for (i, &x) in self.pi.iter().enumerate() {
            if !(x > 0.0 && x <= 1.0) {
                return Err(Error::invalid(format!("pi[{i}] = {x} is outside (0, 1]")));
            }
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > PI_SUM_TOL {
            return Err(Error::invalid(format!("pi sums to {total}, not 1")));
        }
        if self.p.len() != c || self.p.iter().any(|row| row.len() != c) {
            return Err(Error::invalid(format!("P must be a {c}x{c} matrix")));
        }
        for (i, row) in self.p.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::invalid(format!("P[{i}][{j}] = {x} is outside [0, 1]")));
                }
            }
        }
        if !self.directed {
            for i in 0..c {
                for j in 0..i {
                    if (self.p[i][j] - self.p[j][i]).abs() > SYMMETRY_TOL {
                        return Err(Error::invalid(format!(
                            "undirected model needs symmetric P, but P[{i}][{j}] != P[{j}][{i}]"
                        )));
                    }
                }
            }
        }
        if let Some(i) = self.block_sizes().iter().position(|&s| s == 0) {
            return Err(Error::invalid(format!("block {} would be empty at n = {}", i + 1, self.n)));
        }
        Ok(())
    }

    /// `n_i = floor(pi_i * n)`, with the leftover nodes handed out one per
    /// block in index order.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self
            .pi
            .iter()
            .map(|&x| (x * self.n as f64 + 1e-9).floor().max(0.0) as usize)
            .collect();
        let assigned: usize = sizes.iter().sum();
        let mut remainder = self.n.saturating_sub(assigned);
        let c = sizes.len();
        let mut i = 0;
        while remainder > 0 && c > 0 {
            sizes[i % c] += 1;
            remainder -= 1;
            i += 1;
        }
        sizes
    }

    /// Block-contiguous label vector for the realized block sizes.
    pub fn labels(&self) -> Vec<usize> {
        self.block_sizes()
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat(b).take(s))
            .collect()
    }

    /// Expected number of edges (arcs when directed) of a realization.
    pub fn expected_edge_count(&self) -> f64 {
        let sizes: Vec<f64> = self.block_sizes().iter().map(|&s| s as f64).collect();
        let c = sizes.len();
        let mut total = 0.0;
        for i in 0..c {
            for j in 0..c {
                if !self.directed && j < i {
                    continue;
                }
                let pairs = if i == j {
                    let loops = if self.self_loops { sizes[i] } else { 0.0 };
                    if self.directed {
                        sizes[i] * (sizes[i] - 1.0) + loops
                    } else {
                        sizes[i] * (sizes[i] - 1.0) / 2.0 + loops
                    }
                } else {
                    sizes[i] * sizes[j]
                };
                total += pairs * self.p[i][j];
            }
        }
        total
    }
}

/// The two-block affiliation model: `p_in` inside both blocks, `p_out` across.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffiliationParams {
    pub n_a: usize,
    pub n_b: usize,
    pub p_in: f64,
    pub p_out: f64,
}

impl AffiliationParams {
    pub fn balanced(n: usize, p_in: f64, p_out: f64) -> Self {
        AffiliationParams { n_a: n / 2, n_b: n - n / 2, p_in, p_out }
    }

    /// Balanced model from the scaled affinities `c = (n/2) p` used to
    /// describe the degree sweeps: `(c_in + c_out) / 2 = mean_affinity` and
    /// `c_out / c_in = ratio`.
    pub fn balanced_from_ratio(n: usize, mean_affinity: f64, ratio: f64) -> Self {
        let half = n as f64 / 2.0;
        let c_in = 2.0 * mean_affinity / (1.0 + ratio);
        let c_out = ratio * c_in;
        AffiliationParams::balanced(n, c_in / half, c_out / half)
    }

    pub fn n(&self) -> usize {
        self.n_a + self.n_b
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        if self.n() == 0 {
            return Err(Error::invalid("affiliation model needs at least one node"));
        }
        Ok(())
    }

    /// `(c_in, c_out) = (N p_in, N p_out)` with `N = n / 2`.
    pub fn scaled_affinities(&self) -> (f64, f64) {
        let half = self.n() as f64 / 2.0;
        (half * self.p_in, half * self.p_out)
    }

    pub fn to_sbm(&self) -> SbmParams {
        let n = self.n();
        SbmParams {
            n,
            pi: vec![self.n_a as f64 / n as f64, self.n_b as f64 / n as f64],
            p: vec![vec![self.p_in, self.p_out], vec![self.p_out, self.p_in]],
            directed: false,
            self_loops: false,
        }
    }

    /// Inverse of [`AffiliationParams::to_sbm`] for two-block models with affiliation structure.
    pub fn from_sbm(params: &SbmParams) -> Option<Self> {
        if params.num_blocks() != 2 {
            return None;
        }
        let p = &params.p;
        if p[0][0] != p[1][1] || p[0][1] != p[1][0] {
            return None;
        }
        let sizes = params.block_sizes();
        Some(AffiliationParams { n_a: sizes[0], n_b: sizes[1], p_in: p[0][0], p_out: p[0][1] })
    }
}

/// Expected degree of a node in block `a`: `n_a p_in + n_b p_out`.
pub fn expected_degree(params: &AffiliationParams) -> f64 {
    params.n_a as f64 * params.p_in + params.n_b as f64 * params.p_out
}

/// Draws one realization of `G(n, pi, P)`.
///
/// Row `u` of the adjacency structure is sampled from its own ChaCha
/// stream, so the result depends only on `(params, seed)` regardless of
/// how rows are scheduled across threads.
pub fn generate(params: &SbmParams, seed: u64) -> Result<Graph> {
    params.validate()?;
    let n = params.n;
    if n > u32::MAX as usize {
        return Err(Error::invalid("node count exceeds u32 range"));
    }
    let sizes = params.block_sizes();
    let mut starts = Vec::with_capacity(sizes.len() + 1);
    starts.push(0usize);
    for &s in &sizes {
        starts.push(starts.last().unwrap() + s);
    }
    let labels = params.labels();

    let rows: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|u| sample_row(params, &starts, &labels, u, seed))
        .collect();

    Ok(Graph::from_sorted_rows(n, params.directed, rows, labels))
}

fn sample_row(params: &SbmParams, starts: &[usize], labels: &[usize], u: usize, seed: u64) -> Vec<u32> {
    let mut rng = rng::stream(seed, u as u64);
    let bu = labels[u];
    let lo = if params.directed {
        0
    } else if params.self_loops {
        u
    } else {
        u + 1
    };
    let mut row = Vec::new();
    for j in 0..params.num_blocks() {
        let start = starts[j].max(lo);
        let end = starts[j + 1];
        if start >= end {
            continue;
        }
        // Arc u -> v for v in block j: v's block receives from u's block.
        let p = if params.directed { params.p[j][bu] } else { params.p[bu][j] };
        sample_range(&mut rng, p, start, end, |v| {
            if v != u || params.self_loops {
                row.push(v as u32);
            }
        });
    }
    row
}

/// Visits each index of `start..end` independently with probability `p`,
/// jumping between hits with geometric gaps.
fn sample_range<R: Rng>(rng: &mut R, p: f64, start: usize, end: usize, mut visit: impl FnMut(usize)) {
    if p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        (start..end).for_each(visit);
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut pos = start as f64 - 1.0;
    let end_f = end as f64;
    loop {
        let r: f64 = rng.gen();
        let gap = ((1.0 - r).ln() / log_q).floor();
        pos += 1.0 + gap;
        if pos >= end_f {
            break;
        }
        visit(pos as usize);
    }
}
