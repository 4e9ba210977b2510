//! Scoring rules over landing profiles: PageRank and heat-kernel weights, the
//! geometric discriminant, and the two covariance-adjusted discriminants.

mod moments;

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::walk::LandingProfile;

pub use moments::{estimate_moments, MomentAccumulator, MomentConfig, MomentEstimate};

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
/// Eigenvalues below `trace * EIGEN_CLIP` are raised to it before inverting.
const EIGEN_CLIP: f64 = 1e-14;
pub const DEFAULT_COND_CAP: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminantKind {
    Ppr,
    HeatKernel,
    Geometric,
    LinSbmrank,
    QuadSbmrank,
}

impl DiscriminantKind {
    pub fn is_linear(self) -> bool {
        self != DiscriminantKind::QuadSbmrank
    }
}

/// `score(r) = w^T r + r^T W r + w0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantModel {
    pub kind: DiscriminantKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub w: Vec<f64>,
    /// Row-major `W`; `None` for linear kinds.
    #[serde(rename = "W")]
    pub quad: Option<Vec<Vec<f64>>>,
    pub w0: f64,
}

impl DiscriminantModel {
    pub fn linear(kind: DiscriminantKind, w: Vec<f64>) -> Self {
        DiscriminantModel { kind, k: w.len(), w, quad: None, w0: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, actual: self.w.len() });
        }
        match (&self.quad, self.kind.is_linear()) {
            (Some(_), true) => return Err(Error::invalid("linear discriminants carry no quadratic term")),
            (Some(q), false) => {
                if q.len() != self.k || q.iter().any(|row| row.len() != self.k) {
                    return Err(Error::invalid(format!("W must be {0}x{0}", self.k)));
                }
                for i in 0..self.k {
                    for j in 0..i {
                        if (q[i][j] - q[j][i]).abs() > SYMMETRY_TOL * (1.0 + q[i][j].abs()) {
                            return Err(Error::invalid("W is not symmetric"));
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Multiplies `w`, `W` and `w0` by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.w.iter_mut().for_each(|x| *x *= c);
        if let Some(q) = m.quad.as_mut() {
            q.iter_mut().flatten().for_each(|x| *x *= c);
        }
        m.w0 *= c;
        m
    }

    pub fn score_row(&self, r: &[f64]) -> f64 {
        let mut s = self.w0 + self.w.iter().zip(r).map(|(w, x)| w * x).sum::<f64>();
        if let Some(q) = &self.quad {
            for (i, row) in q.iter().enumerate() {
                s += r[i] * row.iter().zip(r).map(|(w, x)| w * x).sum::<f64>();
            }
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `w_k = alpha^k`.
pub fn ppr_weights(alpha: f64, steps: usize) -> Result<DiscriminantModel> {
    if !(alpha.abs() < 1.0) {
        return Err(Error::invalid(format!("PageRank parameter must lie in (-1, 1), got {alpha}")));
    }
    check_steps(steps)?;
    let w = (1..=steps as i32).map(|k| alpha.powi(k)).collect();
    Ok(DiscriminantModel::linear(DiscriminantKind::Ppr, w))
}

/// `w_k = e^-t t^k / k!`.
pub fn heat_kernel_weights(t: f64, steps: usize) -> Result<DiscriminantModel> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("heat kernel time must be positive, got {t}")));
    }
    check_steps(steps)?;
    let mut w = Vec::with_capacity(steps);
    let mut term = (-t).exp();
    for k in 1..=steps {
        term *= t / k as f64;
        w.push(term);
    }
    Ok(DiscriminantModel::linear(DiscriminantKind::HeatKernel, w))
}

/// `w = a - b`.
pub fn geometric_model(a: &[f64], b: &[f64]) -> Result<DiscriminantModel> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    check_steps(a.len())?;
    let w = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(DiscriminantModel::linear(DiscriminantKind::Geometric, w))
}

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    Ok(())
}

/// Class centroids and covariances in landing-probability space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMoments {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub sigma_a: Vec<Vec<f64>>,
    pub sigma_b: Vec<Vec<f64>>,
    /// Prior probability of the in-class.
    pub pi_a: f64,
    /// Number of rows behind `a` / `sigma_a`; zero when unknown.
    #[serde(default)]
    pub count_a: usize,
    #[serde(default)]
    pub count_b: usize,
}

impl ClassMoments {
    pub fn new(a: Vec<f64>, b: Vec<f64>, sigma_a: Vec<Vec<f64>>, sigma_b: Vec<Vec<f64>>, pi_a: f64) -> Result<Self> {
        let m = ClassMoments { a, b, sigma_a, sigma_b, pi_a, count_a: 0, count_b: 0 };
        m.validate()?;
        Ok(m)
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        check_steps(k)?;
        if self.b.len() != k {
            return Err(Error::DimensionMismatch { expected: k, actual: self.b.len() });
        }
        if !(self.pi_a > 0.0 && self.pi_a < 1.0) {
            return Err(Error::invalid(format!("pi_a = {} must lie in (0, 1)", self.pi_a)));
        }
        for (name, s) in [("sigma_a", &self.sigma_a), ("sigma_b", &self.sigma_b)] {
            if s.len() != k || s.iter().any(|r| r.len() != k) {
                return Err(Error::invalid(format!("{name} must be {k}x{k}")));
            }
            let m = to_matrix(s);
            if (&m - m.transpose()).amax() > SYMMETRY_TOL {
                return Err(Error::invalid(format!("{name} is not symmetric")));
            }
            let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
            if min < -PSD_TOL * m.trace().abs() {
                return Err(Error::invalid(format!("{name} is not positive semidefinite (eigenvalue {min:e})")));
            }
        }
        Ok(())
    }

    /// Leading `k` steps only.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k() {
            return Err(Error::invalid(format!("cannot truncate {} steps to {k}", self.k())));
        }
        let cut = |s: &Vec<Vec<f64>>| s[..k].iter().map(|r| r[..k].to_vec()).collect();
        Ok(ClassMoments {
            a: self.a[..k].to_vec(),
            b: self.b[..k].to_vec(),
            sigma_a: cut(&self.sigma_a),
            sigma_b: cut(&self.sigma_b),
            ..self.clone()
        })
    }

    /// `(kappa(sigma_a), kappa(sigma_b))`, infinite when singular.
    pub fn condition_numbers(&self) -> (f64, f64) {
        (condition_number(&to_matrix(&self.sigma_a)), condition_number(&to_matrix(&self.sigma_b)))
    }

    /// `((n_a - 1) sigma_a + (n_b - 1) sigma_b) / (n_a + n_b - 2)`, or the plain
    /// average when the row counts are unknown.
    pub fn pooled_covariance(&self) -> Vec<Vec<f64>> {
        let (wa, wb) = if self.count_a + self.count_b > 2 && self.count_a > 0 && self.count_b > 0 {
            let total = (self.count_a + self.count_b - 2) as f64;
            ((self.count_a - 1) as f64 / total, (self.count_b - 1) as f64 / total)
        } else {
            (0.5, 0.5)
        };
        self.sigma_a
            .iter()
            .zip(&self.sigma_b)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| wa * x + wb * y).collect())
            .collect()
    }

    /// Largest `K <= k_max` whose leading covariance blocks both have
    /// condition number below `cap`.
    pub fn select_k(&self, k_max: usize, cap: f64) -> Result<ClassMoments> {
        for k in (1..=k_max.min(self.k())).rev() {
            let m = self.truncated(k)?;
            let (ca, cb) = m.condition_numbers();
            if ca < cap && cb < cap {
                return Ok(m);
            }
        }
        Err(Error::DegenerateMoments(format!("no K <= {k_max} keeps both condition numbers below {cap:e}")))
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let k = rows.len();
    DMatrix::from_fn(k, k, |i, j| rows[i][j])
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Inverse and log-determinant of a symmetric PSD matrix after clipping its
/// spectrum from below at `trace * EIGEN_CLIP`.
fn clipped_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let trace = m.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::DegenerateMoments(format!("covariance trace is {trace}")));
    }
    let eig = SymmetricEigen::new(m.clone());
    let floor = trace * EIGEN_CLIP;
    let clipped = eig.eigenvalues.map(|l| l.max(floor));
    let logdet = clipped.iter().map(|l| l.ln()).sum();
    let v = &eig.eigenvectors;
    let inv = v * DMatrix::from_diagonal(&clipped.map(|l| 1.0 / l)) * v.transpose();
    // restore exact symmetry lost to rounding
    let inv = (&inv + inv.transpose()) * 0.5;
    Ok((inv, logdet))
}

/// `w = Sigma^-1 (a - b)` with the pooled covariance.
pub fn lin_sbmrank(moments: &ClassMoments) -> Result<DiscriminantModel> {
    moments.validate()?;
    let (inv, _) = clipped_inverse(&to_matrix(&moments.pooled_covariance()))?;
    let diff = DVector::from_iterator(moments.k(), moments.a.iter().zip(&moments.b).map(|(x, y)| x - y));
    let w = inv * diff;
    Ok(DiscriminantModel::linear(DiscriminantKind::LinSbmrank, w.iter().copied().collect()))
}

/// Gaussian log-likelihood ratio: `w = Sa^-1 a - Sb^-1 b`,
/// `W = (Sb^-1 - Sa^-1) / 2`, and
/// `w0 = (b^T Sb^-1 b - a^T Sa^-1 a + ln|Sb| - ln|Sa|) / 2 + ln(pi_a / (1 - pi_a))`.
/// The offset does not affect rankings.
pub fn quad_sbmrank(moments: &ClassMoments) -> Result<DiscriminantModel> {
    moments.validate()?;
    let k = moments.k();
    let (inv_a, logdet_a) = clipped_inverse(&to_matrix(&moments.sigma_a))?;
    let (inv_b, logdet_b) = clipped_inverse(&to_matrix(&moments.sigma_b))?;
    let a = DVector::from_column_slice(&moments.a);
    let b = DVector::from_column_slice(&moments.b);
    let ia = &inv_a * &a;
    let ib = &inv_b * &b;
    let w = &ia - &ib;
    let quad = (&inv_b - &inv_a) * 0.5;
    let w0 = 0.5 * (b.dot(&ib) - a.dot(&ia) + logdet_b - logdet_a) + (moments.pi_a / (1.0 - moments.pi_a)).ln();
    Ok(DiscriminantModel {
        kind: DiscriminantKind::QuadSbmrank,
        k,
        w: w.iter().copied().collect(),
        quad: Some(from_matrix(&quad)),
        w0,
    })
}

pub fn score(model: &DiscriminantModel, profile: &LandingProfile) -> Result<Vec<f64>> {
    model.validate()?;
    if model.k != profile.steps() {
        return Err(Error::DimensionMismatch { expected: model.k, actual: profile.steps() });
    }
    Ok(profile.rows().map(|r| model.score_row(r)).collect())
}

/// Nodes by descending score, ties by ascending node id. NaN sorts last.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let key = |x: f64| if x.is_nan() { f64::NEG_INFINITY } else { x };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&u, &v| key(scores[v]).total_cmp(&key(scores[u])).then(u.cmp(&v)));
    order
}

/// `node,score,rank` with 1-based ranks, rows in node order.
pub fn write_scores_csv<W: Write>(scores: &[f64], mut out: W) -> Result<()> {
    let mut rank = vec![0; scores.len()];
    for (pos, v) in rank_order(scores).into_iter().enumerate() {
        rank[v] = pos + 1;
    }
    writeln!(out, "node,score,rank")?;
    for (v, s) in scores.iter().enumerate() {
        writeln!(out, "{v},{},{}", sig17(*s), rank[v])?;
    }
    Ok(())
}
