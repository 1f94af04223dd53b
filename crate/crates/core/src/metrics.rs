//! Metrics on `[0,1]^N` and their Monte Carlo estimators over replica
//! ensembles.
//!
//! The mixing analysis runs in the degree-weighted metric
//! `d(x,z) = Σ_i n_i |x_i - z_i|`, which sandwiches against the taxicab
//! metric `d^(x,z) = Σ_i |x_i - z_i|` via
//! `n_min d^ <= d <= n_max d^`. Replica means of `d`, `d^` and the
//! indicator `x != z` are upper-bound estimators for the Wasserstein
//! distances and total variation respectively, because every concrete
//! coupling dominates the defining infimum.

use serde::Serialize;

use crate::coupling::CoupledPair;
use crate::graph::NeighborhoodGraph;
use crate::{Error, Result};

/// Degree-weighted L1 distance `Σ_i n_i |x_i - z_i|`.
///
/// Sites of degree zero contribute nothing, so on graphs with isolated
/// sites this is a pseudometric.
pub fn weighted_l1(x: &[f64], z: &[f64], graph: &NeighborhoodGraph) -> Result<f64> {
    if x.len() != z.len() || x.len() != graph.num_sites() {
        return Err(Error::LengthMismatch {
            expected: graph.num_sites(),
            got: if x.len() != graph.num_sites() {
                x.len()
            } else {
                z.len()
            },
        });
    }
    Ok(x.iter()
        .zip(z)
        .zip(graph.degrees())
        .map(|((a, b), &n)| n as f64 * (a - b).abs())
        .sum())
}

/// Taxicab distance `Σ_i |x_i - z_i|`.
pub fn taxicab_l1(x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: z.len(),
        });
    }
    Ok(x.iter().zip(z).map(|(a, b)| (a - b).abs()).sum())
}

/// Replica-ensemble summary: sample means and standard errors of the
/// weighted distance, the taxicab distance and the non-coalescence
/// indicator. Standard errors are `None` for a single replica.
#[derive(Debug, Clone, Serialize)]
pub struct PairSummary {
    pub mean_weighted_d: f64,
    pub se_weighted_d: Option<f64>,
    pub mean_taxicab: f64,
    pub se_taxicab: Option<f64>,
    pub noncoalesced_fraction: f64,
    pub se_fraction: Option<f64>,
    pub replica_count: usize,
}

fn mean_and_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Summarizes an ensemble of coupled pairs. Errors on an empty list.
pub fn summarize_pairs(pairs: &[CoupledPair], graph: &NeighborhoodGraph) -> Result<PairSummary> {
    if pairs.is_empty() {
        return Err(Error::EmptyReplicas);
    }
    let mut d = Vec::with_capacity(pairs.len());
    let mut d_hat = Vec::with_capacity(pairs.len());
    let mut neq = Vec::with_capacity(pairs.len());
    for pair in pairs {
        d.push(weighted_l1(&pair.x.x, &pair.z.x, graph)?);
        d_hat.push(taxicab_l1(&pair.x.x, &pair.z.x)?);
        neq.push(if pair.all_equal() { 0.0 } else { 1.0 });
    }
    let (mean_weighted_d, se_weighted_d) = mean_and_se(&d);
    let (mean_taxicab, se_taxicab) = mean_and_se(&d_hat);
    let (noncoalesced_fraction, se_fraction) = mean_and_se(&neq);
    Ok(PairSummary {
        mean_weighted_d,
        se_weighted_d,
        mean_taxicab,
        se_taxicab,
        noncoalesced_fraction,
        se_fraction,
        replica_count: pairs.len(),
    })
}

/// Distances implied by a total-variation value and a taxicab-Wasserstein
/// value on a bounded state space:
/// `d_W^ <= N tv`, `d_W <= n_max N tv`, and the degree sandwich
/// `n_min d_W^ <= d_W <= n_max d_W^`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricConversionBounds {
    pub d_hat_w_from_tv: f64,
    pub d_w_from_tv: f64,
    pub d_w_lower_from_d_hat: f64,
    pub d_w_upper_from_d_hat: f64,
}

pub fn metric_conversion_bounds(
    tv: f64,
    d_hat_w: f64,
    graph: &NeighborhoodGraph,
) -> MetricConversionBounds {
    let n = graph.num_sites() as f64;
    MetricConversionBounds {
        d_hat_w_from_tv: n * tv,
        d_w_from_tv: graph.n_max() as f64 * n * tv,
        d_w_lower_from_d_hat: graph.n_min() as f64 * d_hat_w,
        d_w_upper_from_d_hat: graph.n_max() as f64 * d_hat_w,
    }
}

/// Wilson score upper confidence limit for a binomial proportion; unlike
/// the Wald interval it stays informative at zero counts (upper limit
/// ~z²/n instead of collapsing to 0).
pub fn wilson_upper(successes: usize, n: usize, z: f64) -> f64 {
    assert!(n > 0, "wilson_upper needs at least one trial");
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let center = p + z2 / (2.0 * nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center + half) / (1.0 + z2 / nf)).min(1.0)
}

/// One point of a decay time series.
#[derive(Debug, Clone, Copy)]
pub struct RatePoint {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
}

/// A fitted geometric decay: `mean(t) ~ C * rate^t`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FittedRate {
    /// Per-step decay factor `e^slope`.
    pub rate: f64,
    pub log_slope: f64,
    /// OLS standard error of the slope, mapped to the rate scale.
    pub rate_se: f64,
    pub points_used: usize,
}

/// Least-squares fit of `log mean` against `t`, restricted to the window
/// where the estimate exceeds 10x its standard error (points below that
/// are noise floor and would bias the slope).
///
/// Returns `None` when fewer than 3 usable points remain (e.g. the
/// degenerate all-coalesced series).
pub fn fit_decay_rate(points: &[RatePoint]) -> Option<FittedRate> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.mean > 0.0 && p.mean > 10.0 * p.se)
        .map(|p| (p.t, p.mean.ln()))
        .collect();
    if usable.len() < 3 {
        return None;
    }
    let n = usable.len() as f64;
    let mean_t = usable.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mean_y = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|(t, _)| (t - mean_t).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = usable
        .iter()
        .map(|(t, y)| (t - mean_t) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let residual_ss: f64 = usable
        .iter()
        .map(|(t, y)| {
            let fit = mean_y + slope * (t - mean_t);
            (y - fit).powi(2)
        })
        .sum();
    let slope_se = if usable.len() > 2 {
        (residual_ss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let rate = slope.exp();
    Some(FittedRate {
        rate,
        log_slope: slope,
        rate_se: rate * slope_se,
        points_used: usable.len(),
    })
}
