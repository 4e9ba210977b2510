use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use seedrank_core::bp::FieldSchedule;
use seedrank_core::sbm::SbmParams;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    CentroidsFig1,
    CorrelationFig2,
    RecallFig2,
    #[serde(rename = "heatmap-figS1")]
    #[value(name = "heatmap-figS1")]
    HeatmapFigS1,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentId::CentroidsFig1 => "centroids-fig1",
            ExperimentId::CorrelationFig2 => "correlation-fig2",
            ExperimentId::RecallFig2 => "recall-fig2",
            ExperimentId::HeatmapFigS1 => "heatmap-figS1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bp,
    PprAlphaStar,
    PprAlphaEst,
    PprFixed,
    HeatKernel,
    LinSbmrank,
    QuadSbmrank,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bp => "bp",
            Method::PprAlphaStar => "ppr-alpha-star",
            Method::PprAlphaEst => "ppr-alpha-est",
            Method::PprFixed => "ppr-fixed",
            Method::HeatKernel => "heat-kernel",
            Method::LinSbmrank => "lin-sbmrank",
            Method::QuadSbmrank => "quad-sbmrank",
        }
    }

    pub fn needs_moments(self) -> bool {
        matches!(self, Method::LinSbmrank | Method::QuadSbmrank)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every knob of every suite. Fields a suite does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub rng_seed: u64,
    /// Trials per parameter point (graphs per point for centroids-fig1).
    pub trials: usize,
    pub methods: Vec<Method>,
    pub n: usize,
    /// Walk length; the covariance-adjusted methods may select fewer steps.
    pub k_max: usize,
    pub cond_cap: f64,
    /// Simulated graphs behind each covariance estimate.
    pub moment_realizations: usize,
    pub seeds_per_graph: usize,
    pub heat_t: f64,
    pub ppr_alpha: f64,
    pub bp_tol: f64,
    pub bp_max_iters: usize,
    pub bp_field_schedule: FieldSchedule,
    /// correlation-fig2: `<d> = (c_in + c_out) / 2` with `c = (n / 2) p`.
    pub mean_degree: f64,
    /// correlation-fig2: values of `c_out / c_in`.
    pub ratios: Vec<f64>,
    /// recall-fig2
    pub p_in: f64,
    pub p_out: f64,
    /// heatmap-figS1: probabilities used on both axes.
    pub grid: Vec<f64>,
    /// centroids-fig1
    pub params: Option<SbmParams>,
    /// centroids-fig1: 1-based block ids of the in-class.
    pub in_blocks: Vec<usize>,
    /// centroids-fig1: 1-based block the seed is drawn from.
    pub seed_block: usize,
    pub levels: (f64, f64),
}

pub fn figure_one_params() -> SbmParams {
    SbmParams {
        n: 2048,
        pi: [491.0, 532.0, 471.0, 554.0].iter().map(|x| x / 2048.0).collect(),
        p: vec![
            vec![0.4, 0.15, 0.08, 0.04],
            vec![0.15, 0.38, 0.04, 0.08],
            vec![0.06, 0.08, 0.37, 0.16],
            vec![0.06, 0.04, 0.18, 0.36],
        ],
        directed: true,
        self_loops: false,
    }
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentId) -> Self {
        let base = ExperimentConfig {
            experiment,
            rng_seed: 1,
            trials: 100,
            methods: Vec::new(),
            n: 128,
            k_max: 10,
            cond_cap: 1e10,
            moment_realizations: 100,
            seeds_per_graph: 1,
            heat_t: 2.0,
            ppr_alpha: 0.7,
            bp_tol: 1e-6,
            bp_max_iters: 1000,
            bp_field_schedule: FieldSchedule::PerNode,
            mean_degree: 16.0,
            ratios: (1..=9).map(|i| i as f64 / 10.0).collect(),
            p_in: 0.3125,
            p_out: 0.1875,
            grid: (0..10).map(|i| 0.05 + 0.1 * i as f64).collect(),
            params: None,
            in_blocks: vec![1, 2],
            seed_block: 1,
            levels: (0.0015, 0.9985),
        };
        use Method::*;
        match experiment {
            ExperimentId::CentroidsFig1 => {
                ExperimentConfig { trials: 200, n: 2048, k_max: 6, params: Some(figure_one_params()), ..base }
            }
            ExperimentId::CorrelationFig2 => {
                ExperimentConfig { methods: vec![Bp, PprAlphaStar, HeatKernel, LinSbmrank, QuadSbmrank], ..base }
            }
            ExperimentId::RecallFig2 => ExperimentConfig {
                trials: 500,
                methods: vec![PprAlphaStar, PprAlphaEst, HeatKernel, LinSbmrank, QuadSbmrank],
                ..base
            },
            ExperimentId::HeatmapFigS1 => {
                ExperimentConfig { trials: 20, methods: vec![PprFixed, PprAlphaStar, LinSbmrank, QuadSbmrank], ..base }
            }
        }
    }

    /// Defaults for the experiment named in `overrides`, with every key of
    /// `overrides` replacing the default.
    pub fn from_json_value(overrides: Value) -> Result<Self, CliError> {
        let Value::Object(map) = overrides else {
            return Err(CliError::Usage("experiment config must be a JSON object".into()));
        };
        let id = map
            .get("experiment")
            .ok_or_else(|| CliError::Usage("experiment config needs an \"experiment\" field".into()))?;
        let id: ExperimentId = serde_json::from_value(id.clone())
            .map_err(|e| CliError::Usage(format!("field \"experiment\": {e}")))?;
        let mut merged = serde_json::to_value(ExperimentConfig::defaults(id)).expect("config serializes");
        let target = merged.as_object_mut().expect("config is an object");
        for (k, v) in map {
            target.insert(k, v);
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(merged).map_err(|e| CliError::Usage(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_json_value(value)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: &str| Err(CliError::Usage(format!("experiment config: {m}")));
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        if self.k_max == 0 {
            return fail("k_max must be at least 1");
        }
        if self.moment_realizations < 2 && self.methods.iter().any(|m| m.needs_moments()) {
            return fail("moment_realizations must be at least 2");
        }
        if self.experiment != ExperimentId::CentroidsFig1 && self.methods.is_empty() {
            return fail("methods must not be empty");
        }
        if self.n < 4 || self.n % 2 == 1 && self.experiment != ExperimentId::CentroidsFig1 {
            return fail("n must be an even number of at least 4");
        }
        if self.experiment == ExperimentId::CentroidsFig1 && self.params.is_none() {
            return fail("centroids-fig1 needs params");
        }
        Ok(())
    }
}
