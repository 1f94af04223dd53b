//! Couplings of two Gibbs chains on a shared site schedule.
//!
//! Both chains always update the *same* uniformly selected site. Two
//! per-site coupling rules are provided:
//!
//! - **Synchronous** (common random numbers): one shared uniform pushed
//!   through both inverse CDFs. Monotone, and contracts the weighted
//!   metric at the rate entering the Wasserstein bound.
//! - **Maximal**: the area-under-the-density construction. Draw a point
//!   `(a1, a2)` uniformly under the graph of the first conditional density
//!   `f` and set `X = a1`; if the point also lies under the second density
//!   `g`, set `Z = X` (the chains meet), otherwise draw `Z` uniformly from
//!   the residual region `{(a,b) : g(a) >= b >= f(a)}`. The meeting
//!   probability is exactly `1 - d_TV(f, g)`, and each marginal viewed
//!   alone is a faithful copy of the single chain.
//!
//! [`one_shot_schedule`] chains the two: a synchronous phase of length
//! `tau = ceil(θ(ω²))` drives the pair to small Wasserstein distance, then
//! `M` maximal-coupling updates attempt to coalesce every coordinate in
//! one shot. The certificate experiment measures how often that fails.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{tv_mixing_time, BoundReport};
use crate::graph::NeighborhoodGraph;
use crate::model::{full_conditional_unchecked, FullConditional, ModelParams};
use crate::rng::{uniform_open01, uniform_site, ChainRole, SeededStream, StreamLabel, StreamPurpose};
use crate::sampler::ChainState;
use crate::{Error, Result};

/// Which per-site coupling rule drives a coupled step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CouplingMode {
    Maximal,
    Synchronous,
}

/// Two chains advanced under a shared site schedule, with coalescence
/// bookkeeping.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub x: ChainState,
    pub z: ChainState,
    /// Per-site flag: did the last update at this site leave the two
    /// chains equal there?
    coalesced: Vec<bool>,
    /// Number of coordinates where the chains differ (exact comparison).
    diff_count: usize,
}

impl CoupledPair {
    pub fn new(x: ChainState, z: ChainState) -> Result<Self> {
        if x.x.len() != z.x.len() {
            return Err(Error::LengthMismatch {
                expected: x.x.len(),
                got: z.x.len(),
            });
        }
        if x.t != z.t {
            return Err(Error::Domain("coupled chains must share the time index"));
        }
        let coalesced: Vec<bool> = x.x.iter().zip(&z.x).map(|(a, b)| a == b).collect();
        let diff_count = coalesced.iter().filter(|&&c| !c).count();
        Ok(CoupledPair {
            x,
            z,
            coalesced,
            diff_count,
        })
    }

    /// True when every coordinate is exactly equal.
    pub fn all_equal(&self) -> bool {
        self.diff_count == 0
    }

    pub fn coalesced_flags(&self) -> &[bool] {
        &self.coalesced
    }

    /// Shared time index of the pair.
    pub fn time(&self) -> u64 {
        self.x.t
    }

    fn set_site(&mut self, site: usize, x_val: f64, z_val: f64) {
        let was_equal = self.x.x[site] == self.z.x[site];
        let now_equal = x_val == z_val;
        self.x.x[site] = x_val;
        self.z.x[site] = z_val;
        self.coalesced[site] = now_equal;
        match (was_equal, now_equal) {
            (true, false) => self.diff_count += 1,
            (false, true) => self.diff_count -= 1,
            _ => {}
        }
        self.x.t += 1;
        self.z.t += 1;
    }
}

/// Outcome of one maximal-coupling site update.
#[derive(Debug, Clone, Copy)]
pub struct MaxCoupleDraw {
    pub x_val: f64,
    pub z_val: f64,
    /// True iff the chains met; implies `x_val == z_val`.
    pub met: bool,
}

/// Residual-region rejection cap. The expected number of proposals per
/// *call* is bounded by the density sup, so this is hit only with
/// vanishing probability; the fallback draws Z from its full conditional,
/// which perturbs the joint law by O(TV^2) while keeping both marginals
/// within statistical resolution.
const RESIDUAL_REJECTION_CAP: usize = 100_000;

/// One maximal-coupling draw for a pair of full conditionals sharing the
/// support `[0,1]`.
///
/// `X` is marginally distributed per `fc_x`'s truncated density, `Z` per
/// `fc_z`'s, and `P[met] = 1 - d_TV` exactly.
pub fn max_couple_site<R: Rng + ?Sized>(
    fc_x: &FullConditional,
    fc_z: &FullConditional,
    rng: &mut R,
) -> MaxCoupleDraw {
    let f = fc_x.distribution();
    let g = fc_z.distribution();

    // (a1, a2) uniform under the graph of f: a1 by inverse CDF, a2 a
    // uniform height below f(a1).
    let x_val = f
        .quantile(uniform_open01(rng))
        .expect("open01 is interior");
    let height = uniform_open01(rng) * f.pdf(x_val);

    if height <= g.pdf(x_val) {
        return MaxCoupleDraw {
            x_val,
            z_val: x_val,
            met: true,
        };
    }

    // Residual region {(a,b): g(a) >= b >= f(a)}: uniform rejection from
    // the box [0,1] x [0, sup g] (the region is contained in it since
    // f >= 0 and g <= sup g).
    let envelope = g.pdf_max();
    for _ in 0..RESIDUAL_REJECTION_CAP {
        let a = uniform_open01(rng);
        let b = uniform_open01(rng) * envelope;
        if b >= f.pdf(a) && b <= g.pdf(a) {
            return MaxCoupleDraw {
                x_val,
                z_val: a,
                met: false,
            };
        }
    }
    let z_val = g
        .quantile(uniform_open01(rng))
        .expect("open01 is interior");
    MaxCoupleDraw {
        x_val,
        z_val,
        met: false,
    }
}

/// One synchronous (common-random-number) draw: the same uniform through
/// both inverse CDFs. Equal conditionals give equal values for every `u`.
pub fn synchronous_couple_site(
    fc_x: &FullConditional,
    fc_z: &FullConditional,
    u: f64,
) -> Result<(f64, f64)> {
    let x_val = fc_x.distribution().quantile(u)?;
    let z_val = fc_z.distribution().quantile(u)?;
    Ok((x_val, z_val))
}

/// Advances the coupled pair by one site update; both chains update the
/// same uniformly drawn site. Returns the updated site.
pub fn coupled_gibbs_step<R: Rng + ?Sized>(
    pair: &mut CoupledPair,
    mode: CouplingMode,
    params: &ModelParams,
    graph: &NeighborhoodGraph,
    rng: &mut R,
) -> usize {
    let site = uniform_site(rng, graph.num_sites());
    let fc_x = full_conditional_unchecked(params, graph, &pair.x.x, site);
    let fc_z = full_conditional_unchecked(params, graph, &pair.z.x, site);
    let (x_val, z_val) = match mode {
        CouplingMode::Synchronous => {
            let u = uniform_open01(rng);
            synchronous_couple_site(&fc_x, &fc_z, u).expect("u is interior")
        }
        CouplingMode::Maximal => {
            let draw = max_couple_site(&fc_x, &fc_z, rng);
            (draw.x_val, draw.z_val)
        }
    };
    pair.set_site(site, x_val, z_val);
    site
}

/// Aggregate result of the one-shot coalescence experiment.
#[derive(Debug, Clone, Serialize)]
pub struct OneShotReport {
    pub epsilon: f64,
    /// Synchronous phase length (ceil of the Wasserstein time at ω²).
    pub tau: u64,
    /// One-shot phase length.
    pub m: u64,
    pub replicas: usize,
    /// Replicas whose chains are NOT identical at time tau + M.
    pub noncoalesced_count: usize,
    pub noncoalesced_fraction: f64,
    /// Replicas for which some site was never selected during the M phase
    /// (the coupon-collector time exceeded M).
    pub coupon_time_exceeded_count: usize,
    /// Per-replica first time the chains became identical (None if never
    /// within tau + M).
    pub coalescence_times: Vec<Option<u64>>,
}

/// Runs the full coalescence schedule for an ensemble of replicas:
/// synchronous coupling for `tau` steps from `(init_x, init_z)`, then
/// maximal coupling for `M` steps.
///
/// The schedule lengths come from [`tv_mixing_time`]; its errors
/// propagate (a target past the metric diameter degrades gracefully to
/// `tau = 0`). Replicas run in parallel on independent labelled streams
/// and the aggregation is order-independent, so the report is
/// reproducible bit-for-bit.
pub fn one_shot_schedule(
    params: &ModelParams,
    graph: &NeighborhoodGraph,
    epsilon: f64,
    init_x: &ChainState,
    init_z: &ChainState,
    master_seed: u64,
    replicas: usize,
) -> Result<(BoundReport, OneShotReport)> {
    if replicas == 0 {
        return Err(Error::EmptyReplicas);
    }
    let bound = tv_mixing_time(params, graph, epsilon)?;
    CoupledPair::new(init_x.clone(), init_z.clone())?; // validate inits once

    struct ReplicaResult {
        coalesced: bool,
        coupon_exceeded: bool,
        coalescence_time: Option<u64>,
    }

    let (tau, m) = (bound.tau, bound.m);
    let results: Vec<ReplicaResult> = (0..replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let stream = SeededStream::new(
                master_seed,
                StreamLabel::new(StreamPurpose::CoupledPair, replica, ChainRole::Shared),
            );
            let mut rng = stream.rng();
            let mut pair = CoupledPair::new(init_x.clone(), init_z.clone())
                .expect("inits validated above");
            let mut coalescence_time = if pair.all_equal() { Some(0) } else { None };

            for _ in 0..tau {
                coupled_gibbs_step(&mut pair, CouplingMode::Synchronous, params, graph, &mut rng);
                if coalescence_time.is_none() && pair.all_equal() {
                    coalescence_time = Some(pair.time());
                }
            }
            let mut visited = vec![false; graph.num_sites()];
            for _ in 0..m {
                let site =
                    coupled_gibbs_step(&mut pair, CouplingMode::Maximal, params, graph, &mut rng);
                visited[site] = true;
                if coalescence_time.is_none() && pair.all_equal() {
                    coalescence_time = Some(pair.time());
                }
            }
            ReplicaResult {
                coalesced: pair.all_equal(),
                coupon_exceeded: !visited.iter().all(|&v| v),
                coalescence_time,
            }
        })
        .collect();

    let noncoalesced_count = results.iter().filter(|r| !r.coalesced).count();
    let coupon_time_exceeded_count = results.iter().filter(|r| r.coupon_exceeded).count();
    let coalescence_times = results.iter().map(|r| r.coalescence_time).collect();

    let report = OneShotReport {
        epsilon,
        tau,
        m,
        replicas,
        noncoalesced_count,
        noncoalesced_fraction: noncoalesced_count as f64 / replicas as f64,
        coupon_time_exceeded_count,
        coalescence_times,
    };
    Ok((bound, report))
}
