//! Expected walk-count recurrences on block models and the prediction vector
//! `Psi` they imply for the geometric discriminant.
//!
//! Walk counts grow like `(expected degree)^k`, so every solver stores
//! normalized values together with a per-step natural-log scale:
//! the raw value at step `k` is `stored[k] * exp(log_scale[k])`. Every
//! derived quantity (`Psi`, centroids) depends only on ratios within a step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sbm::SbmParams;

const HOMOGENEITY_TOL: f64 = 1e-9;
const IDENTICAL_TOL: f64 = 1e-12;
/// Below this `phi / ||d||_1` the 2x2 eigenbasis is too ill-conditioned to use.
const NEAR_DEFECTIVE: f64 = 1e-6;

/// Solution of `A_k = N (p_in A_{k-1} + p_out B_{k-1})`,
/// `B_k = N (p_out A_{k-1} + p_in B_{k-1})`, `A_0 = 1`, `B_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBlockRecurrence {
    pub half_size: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub log_scale: Vec<f64>,
}

impl TwoBlockRecurrence {
    pub fn steps(&self) -> usize {
        self.a.len() - 1
    }

    /// Unnormalized `(A_k, B_k)`; overflows to infinity for large `N^k`.
    pub fn raw(&self, k: usize) -> (f64, f64) {
        let s = self.log_scale[k].exp();
        (self.a[k] * s, self.b[k] * s)
    }
}

fn check_two_block(p_in: f64, p_out: f64, half_size: f64, steps: usize) -> Result<()> {
    if !(p_in >= 0.0 && p_out >= 0.0 && p_in + p_out > 0.0) {
        return Err(Error::invalid(format!("need p_in, p_out >= 0 with positive sum (got {p_in}, {p_out})")));
    }
    if !(half_size >= 1.0) {
        return Err(Error::invalid(format!("half size N = {half_size} must be at least 1")));
    }
    if steps == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if p_in == 0.0 || p_out == 0.0 {
        log::warn!("zero block probability: the asymptotic equivalence needs p_in, p_out > 0");
    }
    Ok(())
}

/// Direct iteration, renormalizing `A + B` to one after every step.
pub fn solve_two_block_iterative(p_in: f64, p_out: f64, half_size: f64, steps: usize) -> Result<TwoBlockRecurrence> {
    check_two_block(p_in, p_out, half_size, steps)?;
    let mut a = vec![1.0];
    let mut b = vec![0.0];
    let mut log_scale = vec![0.0];
    for k in 1..=steps {
        let next_a = half_size * (p_in * a[k - 1] + p_out * b[k - 1]);
        let next_b = half_size * (p_out * a[k - 1] + p_in * b[k - 1]);
        let total = next_a + next_b;
        a.push(next_a / total);
        b.push(next_b / total);
        log_scale.push(log_scale[k - 1] + total.ln());
    }
    Ok(TwoBlockRecurrence { half_size, p_in, p_out, a, b, log_scale })
}

/// Closed form via the eigenvalues `N (p_in - p_out)` and `N (p_in + p_out)`:
/// `A_k = (l1^k + l2^k) / 2`, `B_k = (l2^k - l1^k) / 2`.
pub fn solve_two_block_closed(p_in: f64, p_out: f64, half_size: f64, steps: usize) -> Result<TwoBlockRecurrence> {
    check_two_block(p_in, p_out, half_size, steps)?;
    let lambda2 = half_size * (p_in + p_out);
    let ratio = (p_in - p_out) / (p_in + p_out);
    let mut a = Vec::with_capacity(steps + 1);
    let mut b = Vec::with_capacity(steps + 1);
    let mut log_scale = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let (plus, minus) = one_plus_minus_power(ratio, k);
        a.push(plus / 2.0);
        b.push(minus / 2.0);
        log_scale.push(k as f64 * lambda2.ln());
    }
    Ok(TwoBlockRecurrence { half_size, p_in, p_out, a, b, log_scale })
}

/// `(1 + x^k, 1 - x^k)` for `|x| <= 1`, using `expm1` where the
/// subtraction would cancel.
fn one_plus_minus_power(x: f64, k: usize) -> (f64, f64) {
    if k == 0 {
        return (2.0, 0.0);
    }
    if x == 0.0 {
        return (1.0, 1.0);
    }
    let m = x.abs().powi(k as i32);
    let close_to_one = -(k as f64 * x.abs().ln()).exp_m1(); // 1 - |x|^k
    let negative = x < 0.0 && k % 2 == 1;
    if negative {
        (close_to_one, 1.0 + m)
    } else {
        (1.0 + m, close_to_one)
    }
}

/// Prediction vector and optimal PageRank parameter for the equal-halves
/// affiliation model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheorySolution {
    /// `Psi_1..Psi_K`.
    pub psi: Vec<f64>,
    /// Optimal PageRank parameter, reported only when the blocks are identical.
    pub alpha_star: Option<f64>,
    /// Predicted in-class centroid `a_1..a_K`.
    pub centroid_a: Vec<f64>,
    /// Predicted out-class centroid `b_1..b_K`.
    pub centroid_b: Vec<f64>,
    pub homogeneity_violation: f64,
}

impl TheorySolution {
    /// Builds `Psi` and the centroids from per-step class masses (any common
    /// scale per step), skipping step 0.
    fn from_class_masses(f: &[f64], g: &[f64], n_in: f64, n_out: f64) -> Result<TheorySolution> {
        let mut psi = Vec::with_capacity(f.len() - 1);
        let mut centroid_a = Vec::with_capacity(f.len() - 1);
        let mut centroid_b = Vec::with_capacity(f.len() - 1);
        for k in 1..f.len() {
            let total = f[k] + g[k];
            if !(total > 0.0) || !total.is_finite() {
                return Err(Error::DegenerateParameters(format!("total walk mass vanishes at step {k}")));
            }
            let a = f[k] / (total * n_in);
            let b = g[k] / (total * n_out);
            centroid_a.push(a);
            centroid_b.push(b);
            psi.push(a - b);
        }
        Ok(TheorySolution { psi, alpha_star: None, centroid_a, centroid_b, homogeneity_violation: 0.0 })
    }
}

/// `Psi_k = (A_k - B_k) / (N (A_k + B_k))` with `alpha* = (p_in - p_out) / (p_in + p_out)`.
pub fn psi_two_block(p_in: f64, p_out: f64, half_size: f64, steps: usize) -> Result<TheorySolution> {
    let rec = solve_two_block_iterative(p_in, p_out, half_size, steps)?;
    let mut sol = TheorySolution::from_class_masses(&rec.a, &rec.b, half_size, half_size)?;
    sol.alpha_star = Some((p_in - p_out) / (p_in + p_out));
    Ok(sol)
}

/// `x_ik = sum_j n_i p_ij x_{j,k-1}` started from the seed block.
#[derive(Debug, Clone, PartialEq)]
pub struct CBlockRecurrence {
    pub params: SbmParams,
    pub seed_block: usize,
    /// `x[k][i]`, normalized to sum to one at every step.
    pub x: Vec<Vec<f64>>,
    pub log_scale: Vec<f64>,
}

impl CBlockRecurrence {
    pub fn steps(&self) -> usize {
        self.x.len() - 1
    }

    /// Class masses `(sum_{i in S} x_ik, sum_{i in T} x_ik)` at the stored scale.
    pub fn class_masses(&self, in_blocks: &[usize]) -> (Vec<f64>, Vec<f64>) {
        self.x
            .iter()
            .map(|xk| {
                xk.iter().enumerate().fold((0.0, 0.0), |(f, g), (i, &v)| {
                    if in_blocks.contains(&i) {
                        (f + v, g)
                    } else {
                        (f, g + v)
                    }
                })
            })
            .unzip()
    }
}

pub fn solve_c_block(params: &SbmParams, seed_block: usize, steps: usize) -> Result<CBlockRecurrence> {
    params.validate()?;
    let c = params.num_blocks();
    if seed_block >= c {
        return Err(Error::invalid(format!("seed block {seed_block} is not one of the {c} blocks")));
    }
    if steps == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if params.p.iter().flatten().any(|&p| p == 0.0) {
        log::warn!("P has zero entries: the concentration guarantees assume p_ij > 0");
    }
    let sizes: Vec<f64> = params.block_sizes().iter().map(|&s| s as f64).collect();
    let mut x0 = vec![0.0; c];
    x0[seed_block] = 1.0;
    let mut x = vec![x0];
    let mut log_scale = vec![0.0];
    for k in 1..=steps {
        let prev = &x[k - 1];
        let mut next: Vec<f64> = (0..c)
            .map(|i| (0..c).map(|j| sizes[i] * params.p[i][j] * prev[j]).sum())
            .collect();
        let total: f64 = next.iter().sum();
        if total > 0.0 {
            next.iter_mut().for_each(|v| *v /= total);
        }
        log_scale.push(log_scale[k - 1] + total.ln());
        x.push(next);
    }
    Ok(CBlockRecurrence { params: params.clone(), seed_block, x, log_scale })
}

/// Aggregate degrees `d_IJ = sum_{i in I} n_i p_ij` and how far they are
/// from being independent of the choice of `j in J`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityReport {
    /// `d[I][J]` with index 0 for the in-class `S` and 1 for `T`; each entry
    /// is the mean over `j in J`.
    pub d: [[f64; 2]; 2],
    /// `max_{I,J} max_{j,k in J} |sum_{i in I} n_i (p_ij - p_ik)|`.
    pub violation: f64,
    pub holds: bool,
}

fn split_blocks(c: usize, in_blocks: &[usize]) -> Result<[Vec<usize>; 2]> {
    if let Some(&b) = in_blocks.iter().find(|&&b| b >= c) {
        return Err(Error::invalid(format!("block {b} is not one of the {c} blocks")));
    }
    let s: Vec<usize> = (0..c).filter(|b| in_blocks.contains(b)).collect();
    let t: Vec<usize> = (0..c).filter(|b| !in_blocks.contains(b)).collect();
    if s.is_empty() || t.is_empty() {
        return Err(Error::invalid("in-class and out-class must both contain a block"));
    }
    Ok([s, t])
}

pub fn check_homogeneity(params: &SbmParams, in_blocks: &[usize]) -> Result<HomogeneityReport> {
    let classes = split_blocks(params.num_blocks(), in_blocks)?;
    let sizes: Vec<f64> = params.block_sizes().iter().map(|&s| s as f64).collect();
    let mut d = [[0.0; 2]; 2];
    let mut violation: f64 = 0.0;
    for (ci, rows) in classes.iter().enumerate() {
        for (cj, cols) in classes.iter().enumerate() {
            let sums: Vec<f64> = cols
                .iter()
                .map(|&j| rows.iter().map(|&i| sizes[i] * params.p[i][j]).sum())
                .collect();
            let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            violation = violation.max(hi - lo);
            d[ci][cj] = sums.iter().sum::<f64>() / sums.len() as f64;
        }
    }
    Ok(HomogeneityReport { d, violation, holds: violation <= HOMOGENEITY_TOL })
}

/// Diagonalization `M U = U diag(lambda1, lambda2)` of the aggregate matrix
/// `M = [[d11, d12], [d21, d22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenSolution {
    /// `(d11 + d22 - phi) / 2`
    pub lambda1: f64,
    /// `(d11 + d22 + phi) / 2`
    pub lambda2: f64,
    /// Columns are unit eigenvectors.
    pub u: [[f64; 2]; 2],
    /// `sqrt((d11 - d22)^2 + 4 d12 d21)`
    pub phi: f64,
}

impl EigenSolution {
    /// `None` when the matrix is defective or too close to it.
    pub fn new(d: [[f64; 2]; 2]) -> Option<EigenSolution> {
        let [[d11, d12], [d21, d22]] = d;
        let disc = (d11 - d22).powi(2) + 4.0 * d12 * d21;
        if disc < 0.0 {
            return None;
        }
        let phi = disc.sqrt();
        let scale = d11.abs() + d12.abs() + d21.abs() + d22.abs();
        if !(phi > NEAR_DEFECTIVE * scale) {
            return None;
        }
        let lambda1 = 0.5 * (d11 + d22 - phi);
        let lambda2 = 0.5 * (d11 + d22 + phi);
        let column = |lambda: f64| -> [f64; 2] {
            // Two valid eigenvector forms; keep the better scaled one.
            let v1 = [lambda - d22, d21];
            let v2 = [d12, lambda - d11];
            let n1 = v1[0].hypot(v1[1]);
            let n2 = v2[0].hypot(v2[1]);
            if n1 >= n2 {
                [v1[0] / n1, v1[1] / n1]
            } else {
                [v2[0] / n2, v2[1] / n2]
            }
        };
        let c1 = column(lambda1);
        let c2 = column(lambda2);
        if !(c1[0].is_finite() && c2[0].is_finite()) {
            return None;
        }
        Some(EigenSolution { lambda1, lambda2, u: [[c1[0], c2[0]], [c1[1], c2[1]]], phi })
    }

    /// `U diag(lambda) U^-1`.
    pub fn reconstruct(&self) -> [[f64; 2]; 2] {
        let u = self.u;
        let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
        let inv = [[u[1][1] / det, -u[0][1] / det], [-u[1][0] / det, u[0][0] / det]];
        let ud = [[u[0][0] * self.lambda1, u[0][1] * self.lambda2], [u[1][0] * self.lambda1, u[1][1] * self.lambda2]];
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = ud[i][0] * inv[0][j] + ud[i][1] * inv[1][j];
            }
        }
        m
    }
}

/// Two-dimensional recurrence `(f_k, g_k) = M (f_{k-1}, g_{k-1})` on the
/// class masses.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecurrence {
    pub d: [[f64; 2]; 2],
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub log_scale: Vec<f64>,
    /// The eigenbasis used, or `None` if the matrix was (near) defective and
    /// the values come from direct iteration.
    pub eigen: Option<EigenSolution>,
}

impl AggregateRecurrence {
    /// `(f_k, g_k)` expressed at scale `exp(log_scale)`.
    pub fn at_scale(&self, k: usize, log_scale: f64) -> (f64, f64) {
        let s = (self.log_scale[k] - log_scale).exp();
        (self.f[k] * s, self.g[k] * s)
    }
}

pub fn solve_aggregate(d: [[f64; 2]; 2], f0: f64, g0: f64, steps: usize) -> Result<AggregateRecurrence> {
    if d.iter().flatten().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid("aggregate degrees must be finite and non-negative"));
    }
    let eigen = EigenSolution::new(d).filter(|e| e.lambda2 > 0.0);
    let (f, g, log_scale) = match eigen {
        Some(e) => aggregate_closed(&e, f0, g0, steps),
        None => aggregate_iterative(d, f0, g0, steps),
    };
    Ok(AggregateRecurrence { d, f, g, log_scale, eigen })
}

fn aggregate_closed(e: &EigenSolution, f0: f64, g0: f64, steps: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let u = e.u;
    let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    // coefficients of the initial vector in the eigenbasis
    let c1 = (u[1][1] * f0 - u[0][1] * g0) / det;
    let c2 = (-u[1][0] * f0 + u[0][0] * g0) / det;
    let ratio = e.lambda1 / e.lambda2;
    let mut f = vec![f0];
    let mut g = vec![g0];
    let mut log_scale = vec![0.0];
    for k in 1..=steps {
        let r = ratio.powi(k as i32);
        f.push(u[0][0] * c1 * r + u[0][1] * c2);
        g.push(u[1][0] * c1 * r + u[1][1] * c2);
        log_scale.push(k as f64 * e.lambda2.ln());
    }
    (f, g, log_scale)
}

fn aggregate_iterative(d: [[f64; 2]; 2], f0: f64, g0: f64, steps: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut f = vec![f0];
    let mut g = vec![g0];
    let mut log_scale = vec![0.0];
    for k in 1..=steps {
        let nf = d[0][0] * f[k - 1] + d[0][1] * g[k - 1];
        let ng = d[1][0] * f[k - 1] + d[1][1] * g[k - 1];
        let total = nf.abs() + ng.abs();
        let (nf, ng, ls) = if total > 0.0 { (nf / total, ng / total, total.ln()) } else { (0.0, 0.0, 0.0) };
        f.push(nf);
        g.push(ng);
        log_scale.push(log_scale[k - 1] + ls);
    }
    (f, g, log_scale)
}

fn identical_blocks(params: &SbmParams) -> Option<(f64, f64)> {
    let sizes = params.block_sizes();
    if sizes.iter().any(|&s| s != sizes[0]) {
        return None;
    }
    let c = params.num_blocks();
    let p_in = params.p[0][0];
    let p_out = if c > 1 { params.p[0][1] } else { 0.0 };
    for i in 0..c {
        for j in 0..c {
            let want = if i == j { p_in } else { p_out };
            if (params.p[i][j] - want).abs() > IDENTICAL_TOL {
                return None;
            }
        }
    }
    Some((p_in, p_out))
}

/// `Psi_k = (f_k / n_S - g_k / n_T) / (f_k + g_k)` from the C-block solution,
/// where `f` and `g` are the in-class and out-class masses.
///
/// For identical blocks `alpha* = (p_in - p_out) / (C p_out + p_in - p_out)`
/// and `n_S Psi_k = alpha*^k`; otherwise `alpha_star` is `None`.
pub fn psi_c_block(rec: &CBlockRecurrence, in_blocks: &[usize]) -> Result<TheorySolution> {
    let params = &rec.params;
    let c = params.num_blocks();
    let report = check_homogeneity(params, in_blocks)?;
    let sizes = params.block_sizes();
    let n_in: usize = (0..c).filter(|b| in_blocks.contains(b)).map(|b| sizes[b]).sum();
    let n_out = params.n - n_in;
    let (f, g) = rec.class_masses(in_blocks);
    let mut sol = TheorySolution::from_class_masses(&f, &g, n_in as f64, n_out as f64)?;
    sol.homogeneity_violation = report.violation;
    sol.alpha_star = identical_blocks(params).and_then(|(p_in, p_out)| {
        let denom = c as f64 * p_out + (p_in - p_out);
        (denom != 0.0).then(|| (p_in - p_out) / denom)
    });
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::AffiliationParams;

    fn rel(a: f64, b: f64) -> f64 {
        let m = a.abs().max(b.abs());
        if m == 0.0 {
            0.0
        } else {
            (a - b).abs() / m
        }
    }

    fn identical(c: usize, block: usize, p_in: f64, p_out: f64) -> SbmParams {
        SbmParams {
            n: c * block,
            pi: vec![1.0 / c as f64; c],
            p: (0..c).map(|i| (0..c).map(|j| if i == j { p_in } else { p_out }).collect()).collect(),
            directed: false,
            self_loops: false,
        }
    }

    #[test]
    fn decoupled_blocks() {
        let r = solve_two_block_iterative(1.0, 0.0, 1.0, 5).unwrap();
        for k in 0..=5 {
            assert_eq!(r.raw(k), (1.0, 0.0));
        }
    }

    #[test]
    fn symmetric_collapse() {
        let r = solve_two_block_iterative(0.2, 0.2, 10.0, 6).unwrap();
        for k in 1..=6 {
            let (a, b) = r.raw(k);
            assert!(rel(a, b) < 1e-14);
        }
        let c = solve_two_block_closed(0.2, 0.2, 10.0, 6).unwrap();
        for k in 1..=6 {
            let (a, b) = c.raw(k);
            let half = 4f64.powi(k as i32) / 2.0;
            assert!(rel(a, half) < 1e-14 && rel(b, half) < 1e-14);
        }
        assert_eq!(c.raw(0), (1.0, 0.0));
    }

    #[test]
    fn closed_form_matches_iteration() {
        for &(p_in, p_out, n) in &[(0.3, 0.2, 64.0), (0.05, 0.9, 1000.0), (0.5, 0.5, 3.0), (0.99, 0.01, 1e4)] {
            let it = solve_two_block_iterative(p_in, p_out, n, 20).unwrap();
            let cl = solve_two_block_closed(p_in, p_out, n, 20).unwrap();
            for k in 0..=20 {
                assert!(rel(it.a[k], cl.a[k]) < 1e-10, "{k}");
                assert!(rel(it.b[k], cl.b[k]) < 1e-10, "{k}");
                assert!(rel(it.log_scale[k], cl.log_scale[k]) < 1e-12);
            }
        }
    }

    #[test]
    fn figure_two_alpha() {
        let sol = psi_two_block(0.3, 0.2, 64.0, 6).unwrap();
        let alpha = sol.alpha_star.unwrap();
        assert!((alpha - 0.2).abs() < 1e-15);
        for (k, psi) in sol.psi.iter().enumerate() {
            assert!((64.0 * psi - 0.2f64.powi(k as i32 + 1)).abs() < 1e-12);
        }
        let flat = psi_two_block(0.25, 0.25, 64.0, 4).unwrap();
        assert_eq!(flat.alpha_star, Some(0.0));
        assert!(flat.psi.iter().all(|&x| x == 0.0));
        let dis = psi_two_block(0.2, 0.3, 64.0, 4).unwrap();
        assert!((dis.alpha_star.unwrap() + 0.2).abs() < 1e-15);
        assert!(dis.psi[0] < 0.0 && dis.psi[1] > 0.0 && dis.psi[2] < 0.0);
    }

    #[test]
    fn c_block_collapses() {
        let er = SbmParams { n: 50, pi: vec![1.0], p: vec![vec![0.1]], directed: false, self_loops: false };
        let rec = solve_c_block(&er, 0, 5).unwrap();
        for k in 0..=5 {
            assert!(rel(rec.x[k][0] * rec.log_scale[k].exp(), 5f64.powi(k as i32)) < 1e-12);
        }

        let two = AffiliationParams::balanced(100, 0.3, 0.1).to_sbm();
        let rec = solve_c_block(&two, 0, 8).unwrap();
        let tb = solve_two_block_iterative(0.3, 0.1, 50.0, 8).unwrap();
        for k in 0..=8 {
            assert!(rel(rec.x[k][0], tb.a[k]) < 1e-12);
            assert!(rel(rec.x[k][1], tb.b[k]) < 1e-12);
        }
        let c2 = psi_c_block(&rec, &[0]).unwrap();
        let p1 = psi_two_block(0.3, 0.1, 50.0, 8).unwrap();
        for (x, y) in c2.psi.iter().zip(&p1.psi) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((c2.alpha_star.unwrap() - p1.alpha_star.unwrap()).abs() < 1e-15);
    }

    #[test]
    fn identical_four_blocks() {
        let params = identical(4, 25, 0.4, 0.1);
        let rec = solve_c_block(&params, 0, 6).unwrap();
        for s in [vec![0], vec![0, 1], vec![0, 2, 3]] {
            let sol = psi_c_block(&rec, &s).unwrap();
            let alpha = sol.alpha_star.unwrap();
            assert!((alpha - 3.0 / 7.0).abs() < 1e-15);
            let n_s = 25.0 * s.len() as f64;
            for (k, psi) in sol.psi.iter().enumerate() {
                assert!((n_s * psi - alpha.powi(k as i32 + 1)).abs() < 1e-10, "{s:?} {k}");
            }
        }
        let flat = psi_c_block(&solve_c_block(&identical(3, 10, 0.2, 0.2), 0, 4).unwrap(), &[0]).unwrap();
        assert!(flat.psi.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn non_identical_blocks_have_no_alpha() {
        let mut params = identical(3, 20, 0.4, 0.1);
        params.p[2][2] = 0.35;
        let sol = psi_c_block(&solve_c_block(&params, 0, 3).unwrap(), &[0]).unwrap();
        assert_eq!(sol.alpha_star, None);
    }

    #[test]
    fn homogeneity_reports() {
        let r = check_homogeneity(&identical(4, 10, 0.3, 0.1), &[0, 1]).unwrap();
        assert!(r.holds && r.violation < 1e-12);
        assert!((r.d[0][0] - 10.0 * (0.3 + 0.1)).abs() < 1e-12);
        assert!((r.d[0][1] - 10.0 * 0.2).abs() < 1e-12);
        let mut p = AffiliationParams { n_a: 10, n_b: 30, p_in: 0.5, p_out: 0.1 }.to_sbm();
        p.p[1][1] = 0.7;
        assert_eq!(check_homogeneity(&p, &[0]).unwrap().violation, 0.0);
        assert!(check_homogeneity(&p, &[0, 1]).is_err());
        assert!(check_homogeneity(&p, &[]).is_err());
    }

    #[test]
    fn decoupled_aggregate() {
        let agg = solve_aggregate([[3.0, 0.0], [0.0, 2.0]], 1.5, 0.5, 6).unwrap();
        for k in 0..=6 {
            let (f, g) = agg.at_scale(k, 0.0);
            assert!(rel(f, 1.5 * 3f64.powi(k as i32)) < 1e-12);
            assert!(rel(g, 0.5 * 2f64.powi(k as i32)) < 1e-12);
        }
    }

    #[test]
    fn equal_degree_aggregate_closed_form() {
        // Equal column sums d11 + d21 = d12 + d22 give the simplified solution.
        let (d11, d12, d21, d22) = (30.0, 12.0, 8.0, 26.0);
        let l1 = d12 + d22;
        let l2 = d22 - d21;
        let agg = solve_aggregate([[d11, d12], [d21, d22]], 1.0, 0.0, 10).unwrap();
        assert!(agg.eigen.is_some());
        for k in 1..=10 {
            let (f, g) = agg.at_scale(k, 0.0);
            let kf = k as i32;
            let want_f = (d12 * l1.powi(kf) + d21 * l2.powi(kf)) / (d12 + d21);
            let want_g = d21 * (l1.powi(kf) - l2.powi(kf)) / (d12 + d21);
            assert!(rel(f, want_f) < 1e-12, "{k}");
            assert!(rel(g, want_g) < 1e-12, "{k}");
        }
    }

    #[test]
    fn eigen_reconstruction() {
        for d in [[[3.0, 1.0], [2.0, 5.0]], [[1.0, 0.0], [4.0, 2.0]], [[0.5, 7.0], [0.0, 3.0]], [[9.0, 1e-3], [2.0, 1.0]]] {
            let e = EigenSolution::new(d).unwrap();
            let phi2 = (d[0][0] - d[1][1]).powi(2) + 4.0 * d[0][1] * d[1][0];
            assert!(rel(e.phi * e.phi, phi2) < 1e-10);
            let m = e.reconstruct();
            let scale = d.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((m[i][j] - d[i][j]).abs() <= 1e-10 * scale, "{d:?}");
                }
            }
        }
    }

    #[test]
    fn defective_matrix_falls_back_to_iteration() {
        let d = [[2.0, 1.0], [0.0, 2.0]];
        let agg = solve_aggregate(d, 1.0, 1.0, 5).unwrap();
        assert!(agg.eigen.is_none());
        // M^k (1,1) = (2^k + k 2^(k-1), 2^k)
        for k in 1..=5 {
            let (f, g) = agg.at_scale(k, 0.0);
            let kf = k as i32;
            assert!(rel(f, 2f64.powi(kf) + k as f64 * 2f64.powi(kf - 1)) < 1e-12);
            assert!(rel(g, 2f64.powi(kf)) < 1e-12);
        }
    }
}
