//! The figure suites: trial loops, metrics and CSV artifacts.
//!
//! Randomness is addressed by position: parameter point `i` gets
//! `derive_seed(rng_seed, i)`, and trial `t` at that point gets
//! `derive_seed(point_seed, t)`. Trials run in parallel and are collected in
//! index order, so outputs do not depend on the thread count.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use seedrank_core::bp::{self, BpParams};
use seedrank_core::discriminant::{
    estimate_moments, heat_kernel_weights, lin_sbmrank, ppr_weights, quad_sbmrank, score, DiscriminantModel,
    MomentConfig,
};
use seedrank_core::estimate::estimate;
use seedrank_core::eval::{mean_std, pearson_correlation, quantile_bands, recall_curve, seeded_order, top_labeling};
use seedrank_core::fmt::sig17;
use seedrank_core::rng::{derive_seed, stream};
use seedrank_core::sbm::{generate, AffiliationParams, Graph, SbmParams};
use seedrank_core::theory::{psi_c_block, solve_c_block};
use seedrank_core::walk::{class_mean_profiles, landing_probabilities, WalkConfig};

use crate::config::{ExperimentConfig, ExperimentId, Method};
use crate::error::{core_exit_code, CliError};

const MOMENTS_INDEX: u64 = u64::MAX;
const ALPHA_LIMIT: f64 = 1.0 - 1e-9;

/// A trial or parameter point that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub point: usize,
    pub trial: Option<usize>,
    pub method: Option<Method>,
    pub error: String,
    #[serde(skip)]
    pub exit_code: i32,
}

impl Failure {
    fn new(point: usize, trial: Option<usize>, method: Option<Method>, e: &seedrank_core::Error) -> Self {
        Failure { point, trial, method, error: e.to_string(), exit_code: core_exit_code(e) }
    }
}

/// Models that are fixed for a parameter point and shared by its trials.
pub struct PointSetup {
    pub params: AffiliationParams,
    pub sbm: SbmParams,
    pub alpha_star: f64,
    pub lin: Option<DiscriminantModel>,
    pub quad: Option<DiscriminantModel>,
    /// Steps kept by the condition-number rule, when moments were estimated.
    pub selected_k: Option<usize>,
}

impl PointSetup {
    /// Estimates class moments by simulation when a covariance-adjusted
    /// method is requested; a failure there is returned separately so the
    /// other methods still run.
    pub fn new(params: AffiliationParams, cfg: &ExperimentConfig, point_seed: u64) -> (Self, Option<seedrank_core::Error>) {
        let sbm = params.to_sbm();
        let alpha_star = (params.p_in - params.p_out) / (params.p_in + params.p_out);
        let mut setup = PointSetup { params, sbm, alpha_star, lin: None, quad: None, selected_k: None };
        if !cfg.methods.iter().any(|m| m.needs_moments()) {
            return (setup, None);
        }
        let mcfg = MomentConfig {
            realizations: cfg.moment_realizations,
            seeds_per_graph: cfg.seeds_per_graph,
            k_max: cfg.k_max,
            cond_cap: cfg.cond_cap,
            rng_seed: derive_seed(point_seed, MOMENTS_INDEX),
        };
        let built = estimate_moments(&setup.sbm, &[0], &mcfg).and_then(|est| {
            let lin = lin_sbmrank(&est.moments)?;
            let quad = quad_sbmrank(&est.moments)?;
            Ok((est.k(), lin, quad))
        });
        match built {
            Ok((k, lin, quad)) => {
                setup.selected_k = Some(k);
                setup.lin = Some(lin);
                setup.quad = Some(quad);
                (setup, None)
            }
            Err(e) => (setup, Some(e)),
        }
    }
}

/// Per-method outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    /// Pearson correlation of the recovered split with the truth.
    pub r: f64,
    /// Cumulative recall for `m = 1..=n`.
    pub recall: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub results: Vec<MethodResult>,
    pub failures: Vec<Failure>,
}

impl TrialResult {
    pub fn get(&self, method: Method) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.method == method)
    }
}

/// A realization with node ids shuffled (so id tie-breaking carries no
/// block information) and one seed drawn from block 0.
pub fn seeded_realization(params: &SbmParams, trial_seed: u64) -> seedrank_core::Result<(Graph, usize)> {
    let graph = generate(params, derive_seed(trial_seed, 0))?;
    let mut rng = stream(derive_seed(trial_seed, 1), 0);
    let mut perm: Vec<usize> = (0..graph.n()).collect();
    perm.shuffle(&mut rng);
    let graph = graph.permuted(&perm)?;
    let in_class: Vec<usize> = (0..graph.n()).filter(|&v| graph.labels()[v] == 0).collect();
    let seed = in_class[rng.gen_range(0..in_class.len())];
    Ok((graph, seed))
}

fn method_scores(
    method: Method,
    setup: &PointSetup,
    cfg: &ExperimentConfig,
    graph: &Graph,
    seed: usize,
    profile: &seedrank_core::walk::LandingProfile,
    trial_seed: u64,
) -> seedrank_core::Result<(Vec<f64>, Option<Vec<bool>>)> {
    let linear = |model: DiscriminantModel| -> seedrank_core::Result<(Vec<f64>, Option<Vec<bool>>)> {
        let profile = profile.truncated(model.k)?;
        Ok((score(&model, &profile)?, None))
    };
    let missing = || seedrank_core::Error::DegenerateMoments("class moments unavailable at this point".into());
    match method {
        Method::PprAlphaStar => linear(ppr_weights(setup.alpha_star.clamp(-ALPHA_LIMIT, ALPHA_LIMIT), cfg.k_max)?),
        Method::PprAlphaEst => {
            let est = estimate(graph, setup.params.n_a, setup.params.n_b)?;
            let alpha = est.alpha_est.ok_or_else(|| seedrank_core::Error::DegenerateParameters("estimated p_in + p_out is zero".into()))?;
            linear(ppr_weights(alpha.clamp(-ALPHA_LIMIT, ALPHA_LIMIT), cfg.k_max)?)
        }
        Method::PprFixed => linear(ppr_weights(cfg.ppr_alpha, cfg.k_max)?),
        Method::HeatKernel => linear(heat_kernel_weights(cfg.heat_t, cfg.k_max)?),
        Method::LinSbmrank => linear(setup.lin.clone().ok_or_else(missing)?),
        Method::QuadSbmrank => linear(setup.quad.clone().ok_or_else(missing)?),
        Method::Bp => {
            let mut params = BpParams::from_sbm(&setup.sbm)?;
            params.tol = cfg.bp_tol;
            params.max_iters = cfg.bp_max_iters;
            params.field_schedule = cfg.bp_field_schedule;
            let out = bp::run(graph, &params, &[seed], 0, derive_seed(trial_seed, 2))?;
            let scores = out.state.beliefs().map(|b| b[0]).collect();
            let labels = out.labeling.iter().map(|&c| c == 0).collect();
            Ok((scores, Some(labels)))
        }
    }
}

/// One trial of a two-block suite: every requested method sees the same
/// graph, seed and walk.
pub fn run_trial(setup: &PointSetup, cfg: &ExperimentConfig, point: usize, trial: usize, trial_seed: u64) -> TrialResult {
    let mut out = TrialResult { trial, results: Vec::new(), failures: Vec::new() };
    let prepared = seeded_realization(&setup.sbm, trial_seed).and_then(|(g, seed)| {
        let profile = landing_probabilities(&g, &WalkConfig::single(seed, cfg.k_max))?;
        Ok((g, seed, profile))
    });
    let (graph, seed, profile) = match prepared {
        Ok(x) => x,
        Err(e) => {
            out.failures.push(Failure::new(point, Some(trial), None, &e));
            return out;
        }
    };
    let truth: Vec<bool> = graph.labels().iter().map(|&l| l == 0).collect();
    for &method in &cfg.methods {
        let evaluated = method_scores(method, setup, cfg, &graph, seed, &profile, trial_seed).and_then(|(scores, labels)| {
            let labels = labels.unwrap_or_else(|| top_labeling(&seeded_order(&scores, &[seed]), setup.params.n_a));
            let r = pearson_correlation(&labels, &truth)?;
            let recall = recall_curve(&scores, &truth, &[seed])?.recall;
            Ok(MethodResult { method, r, recall })
        });
        match evaluated {
            Ok(res) => out.results.push(res),
            Err(e) => out.failures.push(Failure::new(point, Some(trial), Some(method), &e)),
        }
    }
    out
}

/// All trials at one parameter point; setup failures are reported once.
pub fn run_point(params: AffiliationParams, cfg: &ExperimentConfig, point: usize) -> (PointSetup, Vec<TrialResult>, Vec<Failure>) {
    let point_seed = derive_seed(cfg.rng_seed, point as u64);
    let (setup, err) = PointSetup::new(params, cfg, point_seed);
    let mut failures = Vec::new();
    if let Some(e) = err {
        failures.push(Failure::new(point, None, None, &e));
    }
    let trials: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(&setup, cfg, point, t, derive_seed(point_seed, t as u64)))
        .collect();
    for t in &trials {
        failures.extend(t.failures.iter().cloned());
    }
    (setup, trials, failures)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub point: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub alpha_star: f64,
    pub selected_k: Option<usize>,
}

/// In-memory result of a suite, before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: ExperimentId,
    /// `(file name, contents)`.
    pub files: Vec<(String, String)>,
    pub points: Vec<PointSummary>,
    pub failures: Vec<Failure>,
    /// Per-point trial results for the two-block suites.
    pub trials: Vec<Vec<TrialResult>>,
}

fn summary(point: usize, setup: &PointSetup) -> PointSummary {
    PointSummary {
        point,
        p_in: setup.params.p_in,
        p_out: setup.params.p_out,
        alpha_star: setup.alpha_star,
        selected_k: setup.selected_k,
    }
}

pub fn run_correlation(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut csv = String::from("trial,method,ratio,r\n");
    let mut report = empty_report(cfg);
    for (i, &ratio) in cfg.ratios.iter().enumerate() {
        let params = AffiliationParams::balanced_from_ratio(cfg.n, cfg.mean_degree, ratio);
        params.validate()?;
        let (setup, trials, failures) = run_point(params, cfg, i);
        for t in &trials {
            for res in &t.results {
                csv.push_str(&format!("{},{},{},{}\n", t.trial, res.method, sig17(ratio), sig17(res.r)));
            }
        }
        report.points.push(summary(i, &setup));
        report.failures.extend(failures);
        report.trials.push(trials);
    }
    report.files.push(("correlation.csv".into(), csv));
    Ok(report)
}

pub fn run_recall(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let params = AffiliationParams::balanced(cfg.n, cfg.p_in, cfg.p_out);
    params.validate()?;
    let mut report = empty_report(cfg);
    let (setup, trials, failures) = run_point(params, cfg, 0);
    let mut csv = String::from("method,m,recall_mean,recall_std\n");
    for &method in &cfg.methods {
        let curves: Vec<&Vec<f64>> = trials.iter().filter_map(|t| t.get(method)).map(|r| &r.recall).collect();
        if curves.is_empty() {
            continue;
        }
        for m in 0..cfg.n {
            let column: Vec<f64> = curves.iter().map(|c| c[m]).collect();
            let (mean, std) = mean_std(&column);
            csv.push_str(&format!("{method},{},{},{}\n", m + 1, sig17(mean), sig17(std)));
        }
    }
    report.points.push(summary(0, &setup));
    report.failures.extend(failures);
    report.trials.push(trials);
    report.files.push(("recall.csv".into(), csv));
    Ok(report)
}

pub fn run_heatmap(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut report = empty_report(cfg);
    let mut csv = String::from("p_in,p_out,method,trials,r_mean\n");
    let mut point = 0;
    for &p_in in &cfg.grid {
        for &p_out in &cfg.grid {
            let params = AffiliationParams::balanced(cfg.n, p_in, p_out);
            params.validate()?;
            let (setup, trials, failures) = run_point(params, cfg, point);
            for &method in &cfg.methods {
                let rs: Vec<f64> = trials.iter().filter_map(|t| t.get(method)).map(|r| r.r).collect();
                let mean = if rs.is_empty() { f64::NAN } else { mean_std(&rs).0 };
                csv.push_str(&format!("{},{},{method},{},{}\n", sig17(p_in), sig17(p_out), rs.len(), sig17(mean)));
            }
            report.points.push(summary(point, &setup));
            report.failures.extend(failures);
            point += 1;
        }
    }
    report.files.push(("heatmap.csv".into(), csv));
    Ok(report)
}

/// Empirical centroids `(a, b)` of one realization, seed row included.
pub fn empirical_centroids(
    params: &SbmParams,
    in_blocks: &[usize],
    seed_block: usize,
    steps: usize,
    trial_seed: u64,
) -> seedrank_core::Result<(Vec<f64>, Vec<f64>)> {
    let graph = generate(params, derive_seed(trial_seed, 0))?;
    let mut rng = stream(derive_seed(trial_seed, 1), 0);
    let block: Vec<usize> = (0..graph.n()).filter(|&v| graph.labels()[v] == seed_block).collect();
    let seed = block[rng.gen_range(0..block.len())];
    let profile = landing_probabilities(&graph, &WalkConfig::single(seed, steps))?;
    class_mean_profiles(&profile, graph.labels(), in_blocks)
}

/// Per-realization centroids together with the block-model prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidStudy {
    pub samples_a: Vec<Vec<f64>>,
    pub samples_b: Vec<Vec<f64>>,
    /// `(a - b) - Psi` per realization.
    pub samples_diff: Vec<Vec<f64>>,
    pub theory_a: Vec<f64>,
    pub theory_b: Vec<f64>,
    pub homogeneity_violation: f64,
}

pub fn centroid_study(cfg: &ExperimentConfig) -> Result<CentroidStudy, CliError> {
    let params = cfg.params.clone().ok_or_else(|| CliError::Usage("centroids-fig1 needs params".into()))?;
    params.validate()?;
    let c = params.num_blocks();
    let zero_based = |b: usize| -> Result<usize, CliError> {
        if b == 0 || b > c {
            Err(CliError::Usage(format!("block {b} is not in 1..={c}")))
        } else {
            Ok(b - 1)
        }
    };
    let in_blocks = cfg.in_blocks.iter().map(|&b| zero_based(b)).collect::<Result<Vec<_>, _>>()?;
    let seed_block = zero_based(cfg.seed_block)?;
    let theory = psi_c_block(&solve_c_block(&params, seed_block, cfg.k_max)?, &in_blocks)?;
    let point_seed = derive_seed(cfg.rng_seed, 0);
    let samples = (0..cfg.trials)
        .into_par_iter()
        .map(|t| empirical_centroids(&params, &in_blocks, seed_block, cfg.k_max, derive_seed(point_seed, t as u64)))
        .collect::<seedrank_core::Result<Vec<_>>>()?;
    let (samples_a, samples_b): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
    let samples_diff = samples_a
        .iter()
        .zip(&samples_b)
        .map(|(a, b)| (0..cfg.k_max).map(|k| a[k] - b[k] - theory.psi[k]).collect())
        .collect();
    Ok(CentroidStudy {
        samples_a,
        samples_b,
        samples_diff,
        theory_a: theory.centroid_a,
        theory_b: theory.centroid_b,
        homogeneity_violation: theory.homogeneity_violation,
    })
}

pub fn run_centroids(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let study = centroid_study(cfg)?;
    let zeros = vec![0.0; cfg.k_max];
    let mut csv = String::from("class,k,lo,hi,empirical_mean,theory\n");
    for (class, samples, theory) in [
        ("a", &study.samples_a, &study.theory_a),
        ("b", &study.samples_b, &study.theory_b),
        ("w_minus_psi", &study.samples_diff, &zeros),
    ] {
        let band = quantile_bands(samples, cfg.levels)?;
        for k in 0..cfg.k_max {
            let col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            let (mean, _) = mean_std(&col);
            csv.push_str(&format!(
                "{class},{},{},{},{},{}\n",
                k + 1,
                sig17(band.lower[k]),
                sig17(band.upper[k]),
                sig17(mean),
                sig17(theory[k])
            ));
        }
    }
    let mut report = empty_report(cfg);
    report.files.push(("bands.csv".into(), csv));
    Ok(report)
}

fn empty_report(cfg: &ExperimentConfig) -> Report {
    Report { experiment: cfg.experiment, files: Vec::new(), points: Vec::new(), failures: Vec::new(), trials: Vec::new() }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentId::CentroidsFig1 => run_centroids(cfg),
        ExperimentId::CorrelationFig2 => run_correlation(cfg),
        ExperimentId::RecallFig2 => run_recall(cfg),
        ExperimentId::HeatmapFigS1 => run_heatmap(cfg),
    }
}

/// Runs a suite, writes its CSVs and `manifest.json` into `out`, and fails
/// with the first failure's exit code if any trial failed.
pub fn run_and_write(cfg: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let start = Instant::now();
    let report = run_experiment(cfg)?;
    let wall = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for (name, contents) in &report.files {
        write_file(&out.join(name), contents.as_bytes())?;
    }
    let manifest = json!({
        "experiment": cfg.experiment.to_string(),
        "config": cfg,
        "wall_time_s": wall,
        "versions": { "seedrank": env!("CARGO_PKG_VERSION") },
        "outputs": report.files.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "points": report.points,
        "failures": report.failures,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(seedrank_core::Error::from)?;
    write_file(&out.join("manifest.json"), text.as_bytes())?;
    if let Some(first) = report.failures.first() {
        return Err(CliError::TrialsFailed { failed: report.failures.len(), code: first.exit_code });
    }
    Ok(report)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}
