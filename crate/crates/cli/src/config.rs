//! Experiment configuration: a JSON config file carries any subset of the
//! options, command-line flags override file values, and the seed falls
//! back to the `MIXBOUND_SEED` environment variable before the built-in
//! default.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use mixbound::graph::{build_grid_graph, GridScheme, NeighborhoodGraph};
use mixbound::model::ModelParams;

pub const SEED_ENV_VAR: &str = "MIXBOUND_SEED";
pub const DEFAULT_SEED: u64 = 20_240_101;

/// Everything a config file may carry. Unknown keys are rejected so typos
/// fail loudly.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub scheme: Option<GridScheme>,
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    /// Constant observed image y ≡ value (grid models).
    pub y_const: Option<f64>,
    /// Path to a ModelParams JSON ({"gamma":…,"sigma":…,"y":[…]}).
    pub params_file: Option<PathBuf>,
    /// Path to a graph JSON ({"num_sites":…,"edges":[[i,j],…]}).
    pub graph_file: Option<PathBuf>,
    pub epsilon: Option<f64>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    pub max_steps: Option<u64>,
    pub record_every: Option<u64>,
    pub threads: Option<usize>,
    pub levels: Option<usize>,
    pub num_sites: Option<usize>,
    pub draws: Option<usize>,
    pub trials: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flag > config file > environment > default, for the master seed.
pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Some(seed) = file.seed {
        return Ok(seed);
    }
    if let Ok(text) = std::env::var(SEED_ENV_VAR) {
        return text
            .parse()
            .with_context(|| format!("{SEED_ENV_VAR}={text} is not a u64"));
    }
    Ok(DEFAULT_SEED)
}

/// Generic flag-over-file resolution.
pub fn pick<T: Copy>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn pick_required<T: Copy>(flag: Option<T>, file: Option<T>, what: &str) -> Result<T> {
    flag.or(file)
        .with_context(|| format!("missing required option: {what}"))
}

/// A fully resolved model: parameters plus neighbourhood graph.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub params: ModelParams,
    pub graph: NeighborhoodGraph,
    /// Grid shape when the model came from one (image-shaped output).
    pub shape: Option<(usize, usize)>,
}

/// Model flags as they appear on most subcommands.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct ModelArgs {
    /// Grid width in pixels.
    #[arg(long)]
    pub width: Option<usize>,
    /// Grid height in pixels.
    #[arg(long)]
    pub height: Option<usize>,
    /// Neighbourhood scheme: n4 (orthogonal) or n8 (with diagonals).
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<GridScheme>,
    /// Smoothing strength gamma (>= 0).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Noise standard deviation sigma (> 0).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Constant observed image y = value at every site.
    #[arg(long)]
    pub y_const: Option<f64>,
    /// Model parameters JSON file (overrides gamma/sigma/y flags).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Graph JSON file (edge list; otherwise a grid is built).
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

pub fn parse_scheme(s: &str) -> std::result::Result<GridScheme, String> {
    match s.to_ascii_lowercase().as_str() {
        "n4" => Ok(GridScheme::N4),
        "n8" => Ok(GridScheme::N8),
        other => Err(format!("unknown scheme {other:?} (use n4 or n8)")),
    }
}

/// Resolves the model from flags and config file. Either a params file
/// (with a graph file or grid dimensions), or a grid with
/// gamma/sigma/y_const.
pub fn resolve_model(args: &ModelArgs, file: &FileConfig) -> Result<ModelBundle> {
    let params_path = args.params.clone().or_else(|| file.params_file.clone());
    let graph_path = args.graph.clone().or_else(|| file.graph_file.clone());

    let width = args.width.or(file.width);
    let height = args.height.or(file.height);
    let scheme = pick(args.scheme, file.scheme, GridScheme::N4);

    let (graph, shape) = if let Some(path) = graph_path {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading graph {}", path.display()))?;
        (
            NeighborhoodGraph::from_json_str(&text)
                .with_context(|| format!("parsing graph {}", path.display()))?,
            None,
        )
    } else {
        let width = width.context("missing required option: width (or a graph file)")?;
        let height = height.context("missing required option: height (or a graph file)")?;
        (
            build_grid_graph(width, height, scheme)?,
            Some((width, height)),
        )
    };

    let params = if let Some(path) = params_path {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading params {}", path.display()))?;
        ModelParams::from_json_str(&text)
            .with_context(|| format!("parsing params {}", path.display()))?
    } else {
        let gamma = pick_required(args.gamma, file.gamma, "gamma")?;
        let sigma = pick_required(args.sigma, file.sigma, "sigma")?;
        let y_const = pick(args.y_const, file.y_const, 0.5);
        ModelParams::new(gamma, sigma, vec![y_const; graph.num_sites()])?
    };

    if params.y.len() != graph.num_sites() {
        bail!(
            "model has {} observations but the graph has {} sites",
            params.y.len(),
            graph.num_sites()
        );
    }
    Ok(ModelBundle {
        params,
        graph,
        shape,
    })
}
