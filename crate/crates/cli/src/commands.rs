use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use seedrank_core::bp::{self, BpParams, FieldSchedule};
use seedrank_core::discriminant::{
    estimate_moments, geometric_model, heat_kernel_weights, lin_sbmrank, ppr_weights, quad_sbmrank, score,
    write_scores_csv, ClassMoments, DiscriminantModel, MomentConfig,
};
use seedrank_core::estimate::estimate;
use seedrank_core::sbm::{generate, io, AffiliationParams, Graph, SbmParams};
use seedrank_core::theory::{check_homogeneity, psi_c_block, solve_c_block};
use seedrank_core::walk::{landing_probabilities, WalkConfig};

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::CliError;
use crate::experiment::{run_and_write, write_file};

#[derive(Debug, Parser)]
#[command(name = "seedrank", version, about = "Seed set expansion on stochastic block models")]
pub struct Cli {
    /// JSON config: experiment settings, or block-model params for `generate`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a graph from block-model params.
    Generate(GenerateArgs),
    /// Landing probabilities of a walk from a seed set.
    Walk(WalkArgs),
    /// Expected-walk prediction of the class centroids.
    Centroids(CentroidsArgs),
    /// Score and rank nodes with a discriminant.
    Rank(RankArgs),
    /// Estimate p_in and p_out from a two-block graph.
    Estimate(EstimateArgs),
    /// Belief propagation with a clamped seed set.
    Bp(BpArgs),
    /// Run a figure suite.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Edge list, one `u<TAB>v` per line (0-based nodes).
    #[arg(long)]
    pub edges: PathBuf,
    /// Labels, one `node<TAB>block` per line (1-based blocks).
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub directed: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Params JSON; falls back to --config.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<usize>,
    #[arg(long, default_value_t = 6)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct ModelSource {
    /// Block-model params JSON.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Two equal blocks: node count.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p_in: Option<f64>,
    #[arg(long)]
    pub p_out: Option<f64>,
}

impl ModelSource {
    fn load(&self) -> Result<Option<SbmParams>, CliError> {
        match (&self.params, self.n, self.p_in, self.p_out) {
            (Some(path), None, None, None) => Ok(Some(read_params(path)?)),
            (None, Some(n), Some(p_in), Some(p_out)) => {
                let a = AffiliationParams::balanced(n, p_in, p_out);
                a.validate()?;
                Ok(Some(a.to_sbm()))
            }
            (None, None, None, None) => Ok(None),
            _ => Err(CliError::Usage("give either --params or all of --n, --p-in, --p-out".into())),
        }
    }
}

#[derive(Debug, Args)]
pub struct CentroidsArgs {
    #[command(flatten)]
    pub model: ModelSource,
    /// 1-based blocks forming the in-class.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub in_blocks: Vec<usize>,
    /// 1-based block of the seed.
    #[arg(long, default_value_t = 1)]
    pub seed_block: usize,
    #[arg(long, default_value_t = 6)]
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankMethod {
    Ppr,
    HeatKernel,
    Geometric,
    LinSbmrank,
    QuadSbmrank,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum)]
    pub method: RankMethod,
    /// 0-based seed node.
    #[arg(long)]
    pub seed_node: usize,
    /// Walk length for PageRank, heat kernel and theory-based geometric models.
    #[arg(long, default_value_t = 6)]
    pub steps: usize,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Class moments JSON for geometric, lin-sbmrank and quad-sbmrank.
    #[arg(long)]
    pub moments: Option<PathBuf>,
    /// Block model for theory centroids (geometric) or simulated moments.
    #[command(flatten)]
    pub model: ModelSource,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub in_blocks: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed_block: usize,
    /// Simulated graphs when moments come from --params.
    #[arg(long, default_value_t = 100)]
    pub realizations: usize,
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    #[arg(long, default_value_t = 1e10)]
    pub cond_cap: f64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Block sizes; taken from the label file when omitted.
    #[arg(long, requires = "n_b")]
    pub n_a: Option<usize>,
    #[arg(long, requires = "n_a")]
    pub n_b: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BpArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelSource,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<usize>,
    /// 1-based class of the seeds.
    #[arg(long, default_value_t = 1)]
    pub seed_class: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    /// Refresh the field after every node or once per sweep.
    #[arg(long, value_parser = ["per-node", "per-sweep"], default_value = "per-node")]
    pub field_schedule: String,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Suite to run with default settings when no --config is given.
    #[arg(long, value_enum)]
    pub name: Option<ExperimentId>,
    #[arg(long)]
    pub trials: Option<usize>,
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    Ok((path, BufWriter::new(f)))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn read_params(path: &Path) -> Result<SbmParams, CliError> {
    Ok(io::read_params(open(path)?)?)
}

fn read_graph(args: &GraphArgs) -> Result<Graph, CliError> {
    Ok(io::read_graph(open(&args.edges)?, open(&args.labels)?, args.directed)?)
}

fn to_zero_based(blocks: &[usize], c: usize) -> Result<Vec<usize>, CliError> {
    blocks
        .iter()
        .map(|&b| if b >= 1 && b <= c { Ok(b - 1) } else { Err(CliError::Usage(format!("block {b} is not in 1..={c}"))) })
        .collect()
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(seedrank_core::Error::from)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_file(&dir.join(name), text.as_bytes())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(1);
    let out = cli.out.as_path();
    match cli.command {
        Command::Generate(args) => {
            let path = args.params.or(cli.config).ok_or_else(|| CliError::Usage("generate needs --params".into()))?;
            let params = read_params(&path)?;
            let graph = generate(&params, seed)?;
            let (p, mut w) = create(out, "edges.tsv")?;
            io::write_edge_list(&graph, &mut w)?;
            finish(&p, w)?;
            let (p, mut w) = create(out, "labels.tsv")?;
            io::write_labels(&graph, &mut w)?;
            finish(&p, w)?;
            let (p, mut w) = create(out, "params.json")?;
            io::write_params(&params, &mut w)?;
            finish(&p, w)?;
            log::info!("{} nodes, {} edges", graph.n(), graph.num_edges());
        }
        Command::Walk(args) => {
            let graph = read_graph(&args.graph)?;
            let profile = landing_probabilities(&graph, &WalkConfig::new(args.seeds, args.steps))?;
            let (p, mut w) = create(out, "profile.csv")?;
            profile.write_csv(&mut w)?;
            finish(&p, w)?;
        }
        Command::Centroids(args) => {
            let params = args.model.load()?.ok_or_else(|| CliError::Usage("centroids needs a block model".into()))?;
            let c = params.num_blocks();
            let in_blocks = to_zero_based(&args.in_blocks, c)?;
            let seed_block = to_zero_based(&[args.seed_block], c)?[0];
            let solution = psi_c_block(&solve_c_block(&params, seed_block, args.steps)?, &in_blocks)?;
            let homogeneity = check_homogeneity(&params, &in_blocks)?;
            if !homogeneity.holds {
                log::warn!("aggregate degrees differ across blocks by up to {}", homogeneity.violation);
            }
            write_json(out, "theory.json", &json!({ "solution": solution, "homogeneity": homogeneity }))?;
        }
        Command::Rank(args) => {
            let graph = read_graph(&args.graph)?;
            let model = rank_model(&args, seed)?;
            let profile = landing_probabilities(&graph, &WalkConfig::single(args.seed_node, model.k))?;
            let scores = score(&model, &profile)?;
            let (p, mut w) = create(out, "scores.csv")?;
            write_scores_csv(&scores, &mut w)?;
            finish(&p, w)?;
            write_json(out, "model.json", &model)?;
        }
        Command::Estimate(args) => {
            let graph = read_graph(&args.graph)?;
            let (n_a, n_b) = match (args.n_a, args.n_b) {
                (Some(a), Some(b)) => (a, b),
                _ => match graph.block_sizes() {
                    [a, b] => (*a, *b),
                    sizes => return Err(CliError::Usage(format!("label file has {} blocks; pass --n-a and --n-b", sizes.len()))),
                },
            };
            let est = estimate(&graph, n_a, n_b)?;
            write_json(out, "estimate.json", &est)?;
        }
        Command::Bp(args) => {
            let graph = read_graph(&args.graph)?;
            let params = args.model.load()?.ok_or_else(|| CliError::Usage("bp needs a block model".into()))?;
            let mut bp_params = BpParams::from_sbm(&params)?;
            bp_params.tol = args.tol;
            bp_params.max_iters = args.max_iters;
            bp_params.field_schedule =
                if args.field_schedule == "per-sweep" { FieldSchedule::PerSweep } else { FieldSchedule::PerNode };
            let class = to_zero_based(&[args.seed_class], params.num_blocks())?[0];
            let outcome = bp::run(&graph, &bp_params, &args.seeds, class, seed)?;
            if !outcome.converged {
                log::warn!("belief propagation did not converge in {} sweeps", outcome.sweeps);
            }
            let (p, mut w) = create(out, "beliefs.csv")?;
            outcome.state.write_beliefs_csv(&mut w)?;
            finish(&p, w)?;
            write_json(out, "bp.json", &outcome)?;
        }
        Command::Experiment(args) => {
            let mut cfg = match (&cli.config, args.name) {
                (Some(path), _) => ExperimentConfig::from_file(path)?,
                (None, Some(id)) => ExperimentConfig::defaults(id),
                (None, None) => return Err(CliError::Usage("experiment needs --config or --name".into())),
            };
            if let Some(s) = cli.seed {
                cfg.rng_seed = s;
            }
            if let Some(t) = args.trials {
                cfg.trials = t;
            }
            let report = run_and_write(&cfg, out)?;
            log::info!("{} finished with {} output file(s)", cfg.experiment, report.files.len());
        }
    }
    Ok(())
}

fn load_moments(path: &Path) -> Result<ClassMoments, CliError> {
    let m: ClassMoments = serde_json::from_reader(open(path)?).map_err(seedrank_core::Error::from)?;
    m.validate()?;
    Ok(m)
}

fn rank_model(args: &RankArgs, seed: u64) -> Result<DiscriminantModel, CliError> {
    let need = |what: &str| CliError::Usage(format!("{:?} needs {what}", args.method));
    let simulated = |params: &SbmParams| -> Result<ClassMoments, CliError> {
        let in_blocks = to_zero_based(&args.in_blocks, params.num_blocks())?;
        let cfg = MomentConfig {
            realizations: args.realizations,
            k_max: args.k_max,
            cond_cap: args.cond_cap,
            rng_seed: seed,
            ..MomentConfig::default()
        };
        Ok(estimate_moments(params, &in_blocks, &cfg)?.moments)
    };
    let moments = || -> Result<ClassMoments, CliError> {
        match (&args.moments, args.model.load()?) {
            (Some(path), None) => load_moments(path),
            (None, Some(params)) => simulated(&params),
            _ => Err(need("exactly one of --moments or a block model")),
        }
    };
    Ok(match args.method {
        RankMethod::Ppr => ppr_weights(args.alpha.ok_or_else(|| need("--alpha"))?, args.steps)?,
        RankMethod::HeatKernel => heat_kernel_weights(args.t.ok_or_else(|| need("--t"))?, args.steps)?,
        RankMethod::Geometric => match (&args.moments, args.model.load()?) {
            (Some(path), None) => {
                let m = load_moments(path)?;
                geometric_model(&m.a, &m.b)?
            }
            (None, Some(params)) => {
                let c = params.num_blocks();
                let in_blocks = to_zero_based(&args.in_blocks, c)?;
                let seed_block = to_zero_based(&[args.seed_block], c)?[0];
                let theory = psi_c_block(&solve_c_block(&params, seed_block, args.steps)?, &in_blocks)?;
                geometric_model(&theory.centroid_a, &theory.centroid_b)?
            }
            _ => return Err(need("exactly one of --moments or a block model")),
        },
        RankMethod::LinSbmrank => lin_sbmrank(&moments()?)?,
        RankMethod::QuadSbmrank => quad_sbmrank(&moments()?)?,
    })
}
