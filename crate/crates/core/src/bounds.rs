//! Closed-form convergence bounds for the random-scan Gibbs chain.
//!
//! Two certificates are computed. The Wasserstein one: in the weighted
//! metric `d(x,z) = Σ n_i |x_i - z_i|`, `d_W(X^t, Z^t) <= ε` whenever
//!
//! ```text
//! t > θ(ε) = log(ε / (n_max N)) / log(1 - N^-1 (1 + n_max γ^2 σ^2)^-1)
//! ```
//!
//! The total-variation one chains a synchronous phase with a per-site
//! "one shot" coalescence phase: `d_TV(X^t, Z^t) <= ε` whenever
//! `t > θ(ω^2) + M`, with
//!
//! ```text
//! M  = ceil(N log N + N log(2/ε))          (coupon-collector budget)
//! ε~ = 1 - (1 - ε/2)^(1/M)                 (per-update miss budget)
//! ω  = ε~ / (1 + exp((ζ+1)^2 / (2 σ~^2)))  (Wasserstein target)
//! ```
//!
//! where ζ and σ~ come from [`crate::model::thermo_constants`]. Natural
//! logarithms throughout: the ratio in θ is base-invariant, and the
//! coupon-collector tail bound `P[θ_cc > ceil(N ln N + cN)] <= e^-c`
//! needs `ln` for the `ε/2` guarantee to be exact.
//!
//! Supporting inequalities used in the derivation are exposed as well:
//! the same-variance normal TV bound `|Δμ| / sqrt(2π σ^2)`, the
//! conditioned-distribution TV quotient, the truncation-mass lower bound
//! `(2πσ^2)^(-1/2) exp(-(|ζ_i|+1)^2 / (2σ^2))`, and the per-site
//! non-coalescence bound. Quantities that can overflow (`exp` of the
//! mean-shift term) are carried in log space; vacuous values (> 1
//! probabilities, targets past the metric diameter) are returned as-is
//! rather than clamped, with degenerate cases flagged.

use serde::Serialize;

use crate::graph::NeighborhoodGraph;
use crate::model::{thermo_constants, ModelParams};
use crate::normal::{erf, normal_interval_mass};
use crate::{Error, Result};

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// All quantities of the total-variation certificate in one record.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Target total-variation distance.
    pub epsilon: f64,
    /// Real-valued Wasserstein time θ(ω²).
    pub theta_wasserstein: f64,
    /// Integer synchronous-phase length ceil(θ(ω²)).
    pub tau: u64,
    /// One-shot phase length M.
    pub m: u64,
    /// Per-update miss budget ε~.
    pub epsilon_tilde: f64,
    /// Wasserstein target ω (0 if it underflows; see `log_omega`).
    pub omega: f64,
    /// ln ω, always finite; the authoritative value for sharp models where
    /// ω underflows double precision.
    pub log_omega: f64,
    /// ζ = max_i |ζ_i|.
    pub zeta: f64,
    /// σ~ = min_i σ~_i (standard deviation).
    pub sigma_tilde: f64,
    /// σ~² = min_i σ~_i².
    pub sigma_tilde_sq: f64,
    /// θ(ω²) + M.
    pub total_time: f64,
    /// Set when the conditional mean can exceed ζ in magnitude (possible
    /// with negative observations); informational only.
    pub zeta_safe_warning: bool,
}

/// Per-step contraction factor `1 - N^-1 (1 + n_max γ^2 σ^2)^-1` of the
/// synchronous coupling in the weighted metric.
pub fn contraction_factor(num_sites: usize, n_max: usize, gamma: f64, sigma: f64) -> f64 {
    let n = num_sites as f64;
    1.0 - 1.0 / (n * (1.0 + n_max as f64 * gamma * gamma * sigma * sigma))
}

fn wasserstein_time_from_log(
    log_eps: f64,
    num_sites: usize,
    n_max: usize,
    gamma: f64,
    sigma: f64,
) -> Result<f64> {
    if num_sites == 0 {
        return Err(Error::Domain("need at least one site"));
    }
    if n_max == 0 {
        return Err(Error::DegenerateGraph);
    }
    let diameter = n_max as f64 * num_sites as f64;
    let numerator = log_eps - diameter.ln();
    if numerator >= 0.0 {
        // Target at or above the metric diameter: the bound is vacuous.
        return Ok(0.0);
    }
    let n = num_sites as f64;
    let rate = 1.0 / (n * (1.0 + n_max as f64 * gamma * gamma * sigma * sigma));
    let denominator = (-rate).ln_1p(); // ln(1 - rate), accurate for small rate
    Ok(numerator / denominator)
}

/// Iterations after which `d_W(X^t, Z^t) <= eps` in the weighted metric:
/// `ln(eps / (n_max N)) / ln(1 - N^-1 (1 + n_max γ²σ²)^-1)`.
///
/// Returns 0 when `eps >= n_max N` (at or above the metric diameter).
/// Errors on `n_max = 0`: the weighted metric is then identically zero and
/// the decoupled single-site analysis applies instead.
pub fn wasserstein_mixing_time(
    num_sites: usize,
    n_max: usize,
    gamma: f64,
    sigma: f64,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain("wasserstein target eps must be positive"));
    }
    wasserstein_time_from_log(eps.ln(), num_sites, n_max, gamma, sigma)
}

/// Coupon-collector budget `M = ceil(N ln N + N ln(2/eps))`, at least 1.
///
/// Requires `0 < eps < 2` (at `eps >= 2` the per-update budget ε~ is
/// undefined).
pub fn coupon_collector_m(num_sites: usize, eps: f64) -> Result<u64> {
    if num_sites == 0 {
        return Err(Error::Domain("need at least one site"));
    }
    if !(eps > 0.0 && eps < 2.0) {
        return Err(Error::Domain("coupon-collector eps must lie in (0,2)"));
    }
    let n = num_sites as f64;
    let m = (n * n.ln() + n * (2.0 / eps).ln()).ceil();
    Ok((m.max(1.0)) as u64)
}

/// Total variation between two same-variance normals.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalTv {
    /// Exact value `2 Φ(|μ1-μ2| / (2σ)) - 1`.
    pub exact: f64,
    /// The linear bound `|μ1-μ2| / sqrt(2π σ²)`; always >= `exact`.
    pub bound: f64,
}

/// Exact TV and its linear-in-mean-gap upper bound for
/// `Normal(mu1, sigma²)` vs `Normal(mu2, sigma²)`.
pub fn normal_tv(mu1: f64, mu2: f64, sigma: f64) -> NormalTv {
    debug_assert!(sigma > 0.0);
    let delta = (mu1 - mu2).abs();
    // 2 Φ(z) - 1 = erf(z / sqrt 2), exact and cancellation-free near 0
    let exact = erf(delta / (2.0 * sigma) * FRAC_1_SQRT_2);
    let bound = delta / (2.0 * PI * sigma * sigma).sqrt();
    NormalTv { exact, bound }
}

/// TV between two conditioned distributions in terms of the unconditioned
/// TV: `tv / min(mass1, mass2)`.
pub fn truncated_tv_bound(tv_untruncated: f64, mass1: f64, mass2: f64) -> Result<f64> {
    if !(mass1 > 0.0 && mass2 > 0.0) {
        return Err(Error::Domain("conditioning masses must be positive"));
    }
    Ok(tv_untruncated / mass1.min(mass2))
}

/// Mass that `Normal(zeta_i, sigma_sq)` puts on `[0,1]`, together with its
/// closed-form lower bound `(2π σ²)^(-1/2) exp(-(|ζ_i|+1)² / (2σ²))`.
///
/// The contract `mass >= lower_bound` holds for every input.
pub fn truncated_mass_lower_bound(zeta_i: f64, sigma_sq: f64) -> (f64, f64) {
    debug_assert!(sigma_sq > 0.0);
    let sd = sigma_sq.sqrt();
    let mass = normal_interval_mass(zeta_i, sd, 0.0, 1.0);
    let shift = zeta_i.abs() + 1.0;
    let log_lower = -shift * shift / (2.0 * sigma_sq) - 0.5 * (2.0 * PI * sigma_sq).ln();
    (mass, log_lower.exp())
}

/// Upper bound on the probability that one maximal-coupling update at site
/// `i` fails to coalesce:
/// `exp((|ζ_i|+1)² / (2σ~_i²)) σ~_i² γ² Σ_{j~i} |X_j - Z_j|`.
///
/// May exceed 1 (vacuous) and, for very sharp models, overflow to
/// infinity; it is returned unclamped either way.
pub fn per_site_noncoalescence_bound(
    zeta_i: f64,
    sigma_sq_i: f64,
    gamma: f64,
    neighbor_l1_diff: f64,
) -> f64 {
    debug_assert!(sigma_sq_i > 0.0);
    debug_assert!(neighbor_l1_diff >= 0.0);
    if gamma == 0.0 || neighbor_l1_diff == 0.0 {
        return 0.0;
    }
    let shift = zeta_i.abs() + 1.0;
    let log_value = shift * shift / (2.0 * sigma_sq_i)
        + sigma_sq_i.ln()
        + 2.0 * gamma.ln()
        + neighbor_l1_diff.ln();
    log_value.exp()
}

/// `ln(1 + e^a)` without overflow.
fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

/// The full total-variation certificate for a model: computes M, ε~, ω and
/// the Wasserstein time θ(ω²), all in one auditable record.
///
/// Requires `0 < eps < 1`.
pub fn tv_mixing_time(
    params: &ModelParams,
    graph: &NeighborhoodGraph,
    eps: f64,
) -> Result<BoundReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain("tv target eps must lie in (0,1)"));
    }
    let tc = thermo_constants(params, graph)?;
    let num_sites = graph.num_sites();
    let m = coupon_collector_m(num_sites, eps)?;

    // ε~ = 1 - (1 - ε/2)^(1/M), formed via expm1/ln_1p to keep precision
    // when M is large.
    let epsilon_tilde = -((-eps / 2.0).ln_1p() / m as f64).exp_m1();

    // ω = ε~ / (1 + exp((ζ+1)²/(2σ~²))); the exponential can overflow for
    // sharp models, so ω is carried in log space.
    let shift = tc.zeta + 1.0;
    let exponent = shift * shift / (2.0 * tc.sigma_tilde_sq);
    let log_omega = epsilon_tilde.ln() - softplus(exponent);
    let omega = log_omega.exp();

    let theta_wasserstein = wasserstein_time_from_log(
        2.0 * log_omega,
        num_sites,
        graph.n_max(),
        params.gamma,
        params.sigma,
    )?;

    Ok(BoundReport {
        epsilon: eps,
        theta_wasserstein,
        tau: theta_wasserstein.ceil() as u64,
        m,
        epsilon_tilde,
        omega,
        log_omega,
        zeta: tc.zeta,
        sigma_tilde: tc.sigma_tilde,
        sigma_tilde_sq: tc.sigma_tilde_sq,
        total_time: theta_wasserstein + m as f64,
        zeta_safe_warning: tc.zeta_safe > tc.zeta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_grid_graph, GridScheme};

    fn golden_model() -> (ModelParams, NeighborhoodGraph) {
        let graph = build_grid_graph(2, 2, GridScheme::N4).unwrap();
        let params = ModelParams::new(1.0, 1.0, vec![0.5; 4]).unwrap();
        (params, graph)
    }

    #[test]
    fn wasserstein_time_golden() {
        // ln(0.1/8) / ln(11/12)
        let t = wasserstein_mixing_time(4, 2, 1.0, 1.0, 0.1).unwrap();
        assert!((t - 50.36).abs() < 0.01, "t = {t}");
        let direct = (0.1f64 / 8.0).ln() / (11.0f64 / 12.0).ln();
        assert!((t - direct).abs() < 1e-9);
    }

    #[test]
    fn wasserstein_time_vacuous_at_diameter() {
        assert_eq!(wasserstein_mixing_time(4, 2, 1.0, 1.0, 8.0).unwrap(), 0.0);
        assert_eq!(wasserstein_mixing_time(4, 2, 1.0, 1.0, 9.0).unwrap(), 0.0);
        assert!(wasserstein_mixing_time(4, 2, 1.0, 1.0, 7.9).unwrap() > 0.0);
    }

    #[test]
    fn wasserstein_time_gamma_zero_rate() {
        // contraction factor (1 - 1/N) at gamma = 0
        let t = wasserstein_mixing_time(4, 2, 0.0, 1.0, 0.1).unwrap();
        let expect = (0.1f64 / 8.0).ln() / (1.0f64 - 0.25).ln();
        assert!((t - expect).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_time_rejects_isolated_graph() {
        assert!(matches!(
            wasserstein_mixing_time(4, 0, 1.0, 1.0, 0.1),
            Err(Error::DegenerateGraph)
        ));
    }

    #[test]
    fn contraction_factor_golden() {
        assert!((contraction_factor(4, 2, 1.0, 1.0) - 11.0 / 12.0).abs() < 1e-15);
        assert!((contraction_factor(4, 2, 0.0, 1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn coupon_collector_m_examples() {
        assert_eq!(coupon_collector_m(1, 0.1).unwrap(), 3); // ceil(ln 20)
        assert_eq!(coupon_collector_m(4, 0.1).unwrap(), 18);
        // eps -> 2: only the N ln N term remains
        assert_eq!(coupon_collector_m(4, 2.0 - 1e-12).unwrap(), 6);
        assert!(coupon_collector_m(4, 2.0).is_err());
        assert!(coupon_collector_m(4, 0.0).is_err());
    }

    #[test]
    fn normal_tv_reference() {
        let zero = normal_tv(0.7, 0.7, 1.3);
        assert_eq!(zero.exact, 0.0);
        assert_eq!(zero.bound, 0.0);

        let tv = normal_tv(0.0, 0.2, 1.0);
        assert!((tv.exact - 0.079_656).abs() < 1e-5, "exact {}", tv.exact);
        assert!((tv.bound - 0.079_788).abs() < 1e-5, "bound {}", tv.bound);
        assert!(tv.exact <= tv.bound);

        // far apart: exact saturates at 1, the linear bound does not
        let far = normal_tv(0.0, 100.0, 1.0);
        assert!((far.exact - 1.0).abs() < 1e-12);
        assert!(far.bound > 1.0);
    }

    #[test]
    fn truncated_tv_bound_arithmetic() {
        assert_eq!(truncated_tv_bound(0.0, 0.5, 0.8).unwrap(), 0.0);
        assert!((truncated_tv_bound(0.1, 0.5, 0.8).unwrap() - 0.2).abs() < 1e-15);
        assert!(truncated_tv_bound(0.1, 0.0, 0.8).is_err());
    }

    #[test]
    fn mass_lower_bound_golden() {
        let (mass, lower) = truncated_mass_lower_bound(0.833_333, 1.0 / 3.0);
        assert!((mass - 0.5391).abs() < 1e-4, "mass {mass}");
        assert!((lower - 4.466e-3).abs() < 1e-5, "lower {lower}");
        assert!(mass >= lower);

        // concentration inside the support
        let (mass, lower) = truncated_mass_lower_bound(0.5, 1e-8);
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(lower < 1e-300);

        // far outside: tiny but still dominated
        let (mass, lower) = truncated_mass_lower_bound(-5.0, 1.0);
        assert!(mass < 1e-5 && mass >= lower, "mass {mass} lower {lower}");
    }

    #[test]
    fn per_site_bound_examples() {
        assert_eq!(per_site_noncoalescence_bound(0.8, 0.5, 1.0, 0.0), 0.0);
        assert_eq!(per_site_noncoalescence_bound(0.8, 0.5, 0.0, 3.0), 0.0);
        let v = per_site_noncoalescence_bound(0.833_333, 1.0 / 3.0, 1.0, 0.1);
        assert!((v - 5.158).abs() < 2e-3, "v = {v}"); // vacuous (> 1) but returned
    }

    #[test]
    fn tv_mixing_time_golden_chain() {
        let (params, graph) = golden_model();
        let r = tv_mixing_time(&params, &graph, 0.1).unwrap();
        assert_eq!(r.m, 18);
        assert!((r.epsilon_tilde - 2.8456e-3).abs() < 1e-6);
        assert!((r.zeta - 0.833_333).abs() < 1e-6);
        assert!((r.sigma_tilde_sq - 1.0 / 3.0).abs() < 1e-6);
        assert!((r.omega - 1.827e-5).abs() < 1e-7, "omega {}", r.omega);
        assert!((r.theta_wasserstein - 274.7).abs() < 0.15, "theta {}", r.theta_wasserstein);
        assert!((r.total_time - 292.7).abs() < 0.2);
        assert_eq!(r.tau, 275);
        assert!(!r.zeta_safe_warning);
        // report invariants
        assert!(r.epsilon_tilde > 0.0 && r.epsilon_tilde < 1.0);
        assert!(r.omega > 0.0 && r.omega < r.epsilon_tilde);
        assert!(r.m >= 1);
        assert!(r.total_time >= r.m as f64);
    }

    #[test]
    fn tv_mixing_time_gamma_zero_well_defined() {
        let graph = build_grid_graph(2, 2, GridScheme::N4).unwrap();
        let params = ModelParams::new(0.0, 1.0, vec![0.2, -0.4, 0.9, 0.5]).unwrap();
        let r = tv_mixing_time(&params, &graph, 0.1).unwrap();
        assert!((r.zeta - 0.9).abs() < 1e-12); // max |y_i| at gamma = 0
        assert!((r.sigma_tilde - 1.0).abs() < 1e-12);
        assert!(r.total_time.is_finite());
        assert!(r.zeta_safe_warning == false);
    }

    #[test]
    fn tv_mixing_time_monotone_in_eps() {
        let (params, graph) = golden_model();
        let tight = tv_mixing_time(&params, &graph, 0.1).unwrap();
        let loose = tv_mixing_time(&params, &graph, 0.2).unwrap();
        assert!(tight.total_time > loose.total_time);
    }

    #[test]
    fn tv_mixing_time_log_omega_survives_sharp_models() {
        // gamma large makes the exponent huge; omega underflows but
        // log_omega and theta stay finite.
        let graph = build_grid_graph(2, 2, GridScheme::N4).unwrap();
        let params = ModelParams::new(30.0, 1.0, vec![0.5; 4]).unwrap();
        let r = tv_mixing_time(&params, &graph, 0.1).unwrap();
        assert!(r.log_omega.is_finite());
        assert!(r.theta_wasserstein.is_finite() && r.theta_wasserstein > 0.0);
    }

    #[test]
    fn tv_mixing_time_rejects_bad_eps() {
        let (params, graph) = golden_model();
        assert!(tv_mixing_time(&params, &graph, 0.0).is_err());
        assert!(tv_mixing_time(&params, &graph, 1.0).is_err());
    }

    #[test]
    fn zeta_safe_warning_propagates() {
        let graph = build_grid_graph(2, 2, GridScheme::N4).unwrap();
        let params = ModelParams::new(1.0, 1.0, vec![-5.0, 0.5, 0.5, 0.5]).unwrap();
        let r = tv_mixing_time(&params, &graph, 0.1).unwrap();
        assert!(r.zeta_safe_warning);
    }
}
