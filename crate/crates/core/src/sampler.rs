//! The random-scan Gibbs chain.
//!
//! One iteration = one site update: select a site uniformly at random
//! (one uniform variate), then draw the new value from the site's full
//! conditional by inverse CDF (one more variate). The time index counts
//! these single-site updates; a "sweep" of `N` updates never appears in
//! the algorithm itself.

use rand::Rng;

use crate::graph::NeighborhoodGraph;
use crate::model::{full_conditional_unchecked, ModelParams};
use crate::normal::norm_quantile;
use crate::rng::{uniform_open01, uniform_site};
use crate::{Error, Result};

pub use crate::truncated::sample_truncated_normal;

/// A point of the chain: `x` in `[0,1]^N` plus the iteration count.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub t: u64,
}

impl ChainState {
    /// A state at time 0; rejects coordinates outside `[0,1]`.
    pub fn new(x: Vec<f64>) -> Result<Self> {
        for (site, &value) in x.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutsideStateSpace { site, value });
            }
        }
        Ok(ChainState { x, t: 0 })
    }

    /// Constant state `value^N`.
    pub fn constant(value: f64, num_sites: usize) -> Result<Self> {
        ChainState::new(vec![value; num_sites])
    }
}

/// Advances the chain by one site update.
///
/// Consumes exactly one site-selection variate and one conditional-draw
/// variate; every coordinate except the selected one is unchanged.
pub fn gibbs_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    params: &ModelParams,
    graph: &NeighborhoodGraph,
    rng: &mut R,
) {
    debug_assert_eq!(state.x.len(), graph.num_sites());
    let site = uniform_site(rng, graph.num_sites());
    let fc = full_conditional_unchecked(params, graph, &state.x, site);
    let u = uniform_open01(rng);
    state.x[site] = sample_truncated_normal(fc.mean, fc.variance, u)
        .expect("u is interior and conditional variance positive");
    state.t += 1;
}

/// A recorded trajectory: snapshots plus the running coordinate-wise mean
/// of all post-update states (the ergodic average used as the posterior
/// mean restoration).
#[derive(Debug, Clone)]
pub struct ChainTrace {
    /// `(t, x)` snapshots: the initial state, every `record_every`-th
    /// state, and the final state.
    pub snapshots: Vec<(u64, Vec<f64>)>,
    /// Ergodic average over the `steps` post-update states (equals the
    /// initial state when `steps == 0`).
    pub mean: Vec<f64>,
    pub steps: u64,
}

/// Runs `steps` single-site updates from `init`, recording snapshots every
/// `record_every` steps (`record_every == 0` records only init and final).
pub fn run_chain<R: Rng + ?Sized>(
    init: ChainState,
    steps: u64,
    params: &ModelParams,
    graph: &NeighborhoodGraph,
    rng: &mut R,
    record_every: u64,
) -> ChainTrace {
    let n = init.x.len();
    let mut state = init;
    let mut snapshots = vec![(state.t, state.x.clone())];
    let mut mean_acc = vec![0.0f64; n];

    for step in 1..=steps {
        gibbs_step(&mut state, params, graph, rng);
        for (acc, &v) in mean_acc.iter_mut().zip(&state.x) {
            *acc += v;
        }
        let record = record_every != 0 && step % record_every == 0;
        if record || step == steps {
            snapshots.push((state.t, state.x.clone()));
        }
    }

    let mean = if steps == 0 {
        snapshots[0].1.clone()
    } else {
        mean_acc.iter().map(|&s| s / steps as f64).collect()
    };
    ChainTrace {
        snapshots,
        mean,
        steps,
    }
}

/// Degrades a clean image: `y_i = x_i + sigma * Z_i` with i.i.d. standard
/// normal `Z_i`. The output is real-valued and deliberately NOT clamped.
pub fn degrade<R: Rng + ?Sized>(
    x_true: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::Domain("noise sigma must be positive"));
    }
    for (site, &value) in x_true.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutsideStateSpace { site, value });
        }
    }
    Ok(x_true
        .iter()
        .map(|&x| x + sigma * norm_quantile(uniform_open01(rng)))
        .collect())
}
