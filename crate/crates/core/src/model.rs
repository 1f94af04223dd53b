//! The probabilistic model: smoothing prior, Gaussian-noise posterior, the
//! per-site full conditionals the Gibbs sampler draws from, and the model
//! constants entering the total-variation mixing bound.
//!
//! Densities live on `[0,1]^N`:
//!
//! ```text
//! prior      pi(x)   ∝ exp{ -Σ_<i,j> 1/2 [γ (x_i - x_j)]^2 }
//! posterior  pi(x|y) ∝ exp{ -Σ_i (x_i - y_i)^2 / (2σ^2) } * pi(x)
//! ```
//!
//! and the full conditional at site `i` is a normal with
//!
//! ```text
//! variance  σ~_i^2 = (σ^-2 + n_i γ^2)^-1
//! mean      m_i    = σ~_i^2 (σ^-2 y_i + γ^2 Σ_{j~i} x_j)
//! ```
//!
//! restricted to `[0,1]`.

use serde::{Deserialize, Serialize};

use crate::graph::NeighborhoodGraph;
use crate::truncated::TruncatedUnitNormal;
use crate::{Error, Result};

/// Model parameters: smoothing strength, noise level and the observed image.
///
/// `y` is the noisy observation and is real-valued (it is *not* restricted
/// to `[0,1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub sigma: f64,
    pub y: Vec<f64>,
}

impl ModelParams {
    pub fn new(gamma: f64, sigma: f64, y: Vec<f64>) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Domain("gamma must be finite and nonnegative"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain("sigma must be finite and positive"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("observed image must be finite"));
        }
        Ok(ModelParams { gamma, sigma, y })
    }

    /// Checks that `y` matches the graph size.
    pub fn check_against(&self, graph: &NeighborhoodGraph) -> Result<()> {
        if self.y.len() != graph.num_sites() {
            return Err(Error::LengthMismatch {
                expected: graph.num_sites(),
                got: self.y.len(),
            });
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ModelParams = serde_json::from_str(s)?;
        ModelParams::new(raw.gamma, raw.sigma, raw.y)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("model params serialize")
    }
}

/// Parameters of the full conditional at one site: a
/// `Normal(mean, variance)` restricted to `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullConditional {
    pub site: usize,
    pub mean: f64,
    pub variance: f64,
}

impl FullConditional {
    /// The truncated distribution itself (support `[0,1]`).
    pub fn distribution(&self) -> TruncatedUnitNormal {
        TruncatedUnitNormal::new(self.mean, self.variance)
            .expect("full conditional has positive variance")
    }
}

/// Constants of the total-variation mixing bound:
/// `ζ_i = (σ^-2 + n_i γ^2)^-1 (σ^-2 y_i + γ^2 n_max)`, `ζ = max |ζ_i|`,
/// the conditional variances `σ~_i^2` and `σ~ = min σ~_i`.
///
/// `zeta_safe` additionally tracks the largest conditional-mean magnitude
/// attainable at neighbour-sum zero, `max_i |σ~_i^2 σ^-2 y_i|`, which can
/// exceed `ζ` when some `y_i` is negative. It is reported as a warning flag
/// only; it does not alter any bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermoConstants {
    pub zeta_i: Vec<f64>,
    pub zeta: f64,
    pub sigma_tilde_sq_i: Vec<f64>,
    /// min_i σ~_i (a standard deviation, not a variance).
    pub sigma_tilde: f64,
    /// min_i σ~_i^2.
    pub sigma_tilde_sq: f64,
    pub zeta_safe: f64,
}

/// Full-conditional parameters at site `i` given the current state `x`.
///
/// Pure function of `(y_i, neighbour values of x, gamma, sigma, n_i)`.
pub fn full_conditional(
    params: &ModelParams,
    graph: &NeighborhoodGraph,
    x: &[f64],
    site: usize,
) -> Result<FullConditional> {
    params.check_against(graph)?;
    if x.len() != graph.num_sites() {
        return Err(Error::LengthMismatch {
            expected: graph.num_sites(),
            got: x.len(),
        });
    }
    if site >= graph.num_sites() {
        return Err(Error::SiteOutOfRange {
            site,
            num_sites: graph.num_sites(),
        });
    }
    Ok(full_conditional_unchecked(params, graph, x, site))
}

/// As [`full_conditional`] without the precondition checks; used on the hot
/// path of the sampler where the state is maintained valid.
#[inline]
pub(crate) fn full_conditional_unchecked(
    params: &ModelParams,
    graph: &NeighborhoodGraph,
    x: &[f64],
    site: usize,
) -> FullConditional {
    let inv_sigma_sq = 1.0 / (params.sigma * params.sigma);
    let gamma_sq = params.gamma * params.gamma;
    let precision = inv_sigma_sq + graph.degree(site) as f64 * gamma_sq;
    let variance = 1.0 / precision;
    let mean = variance * (inv_sigma_sq * params.y[site] + gamma_sq * graph.neighbor_sum(x, site));
    FullConditional {
        site,
        mean,
        variance,
    }
}

/// Unnormalized log density of the prior (`include_likelihood = false`) or
/// the posterior (`include_likelihood = true`) at `x`. Returns `-inf`
/// outside `[0,1]^N`.
pub fn log_density_unnormalized(
    params: &ModelParams,
    graph: &NeighborhoodGraph,
    x: &[f64],
    include_likelihood: bool,
) -> Result<f64> {
    params.check_against(graph)?;
    if x.len() != graph.num_sites() {
        return Err(Error::LengthMismatch {
            expected: graph.num_sites(),
            got: x.len(),
        });
    }
    if x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Ok(f64::NEG_INFINITY);
    }
    let gamma_sq = params.gamma * params.gamma;
    let mut log_density = 0.0;
    for (i, adj) in (0..graph.num_sites()).map(|i| (i, graph.neighbors(i))) {
        for &j in adj {
            if i < j {
                let d = x[i] - x[j];
                log_density -= 0.5 * gamma_sq * d * d;
            }
        }
    }
    if include_likelihood {
        let inv_two_sigma_sq = 0.5 / (params.sigma * params.sigma);
        for (xi, yi) in x.iter().zip(&params.y) {
            let d = xi - yi;
            log_density -= inv_two_sigma_sq * d * d;
        }
    }
    Ok(log_density)
}

/// Computes the bound constants ζ_i, ζ, σ~_i^2, σ~ and `zeta_safe`.
pub fn thermo_constants(
    params: &ModelParams,
    graph: &NeighborhoodGraph,
) -> Result<ThermoConstants> {
    params.check_against(graph)?;
    let inv_sigma_sq = 1.0 / (params.sigma * params.sigma);
    let gamma_sq = params.gamma * params.gamma;
    let n_max = graph.n_max() as f64;

    let mut zeta_i = Vec::with_capacity(graph.num_sites());
    let mut sigma_tilde_sq_i = Vec::with_capacity(graph.num_sites());
    let mut zeta = 0.0f64;
    let mut zeta_safe = 0.0f64;
    let mut sigma_tilde_sq = f64::INFINITY;

    for i in 0..graph.num_sites() {
        let variance = 1.0 / (inv_sigma_sq + graph.degree(i) as f64 * gamma_sq);
        let z = variance * (inv_sigma_sq * params.y[i] + gamma_sq * n_max);
        let mean_at_zero = variance * inv_sigma_sq * params.y[i];
        zeta = zeta.max(z.abs());
        zeta_safe = zeta_safe.max(z.abs()).max(mean_at_zero.abs());
        sigma_tilde_sq = sigma_tilde_sq.min(variance);
        zeta_i.push(z);
        sigma_tilde_sq_i.push(variance);
    }

    Ok(ThermoConstants {
        zeta_i,
        zeta,
        sigma_tilde_sq_i,
        sigma_tilde: sigma_tilde_sq.sqrt(),
        sigma_tilde_sq,
        zeta_safe,
    })
}
