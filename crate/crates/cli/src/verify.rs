//! Batch verification: the randomized inequality suites, sampler and
//! coupling distribution tests, and the coupon-collector comparison, all
//! emitted as a machine-readable pass/fail report. Failures are report
//! content, not errors.

use serde::Serialize;

use mixbound::bounds::{
    coupon_collector_m, normal_tv, per_site_noncoalescence_bound, truncated_mass_lower_bound,
    truncated_tv_bound,
};
use mixbound::coupling::max_couple_site;
use mixbound::graph::{build_grid_graph, GridScheme};
use mixbound::model::{full_conditional, thermo_constants, FullConditional, ModelParams};
use mixbound::oracle::{
    coupon_collector_tail, ks_critical, ks_statistic, numeric_tv_normal, numeric_tv_truncated,
};
use mixbound::rng::{uniform_open01, uniform_site, ChainRole, SeededStream, StreamLabel, StreamPurpose};
use mixbound::truncated::{sample_truncated_normal, TruncatedUnitNormal};

/// Result of one suite: how many cases ran, how many violated their
/// property, and the first violation for diagnosis.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub passed: bool,
    pub first_failure: Option<String>,
}

impl SuiteResult {
    fn from_failures(name: &str, cases: usize, failures: Vec<String>) -> Self {
        SuiteResult {
            name: name.to_string(),
            cases,
            failures: failures.len(),
            passed: failures.is_empty(),
            first_failure: failures.into_iter().next(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub draws: usize,
    pub trials: usize,
    pub skipped: bool,
    pub suites: Vec<SuiteResult>,
    pub all_passed: bool,
}

fn verify_rng(seed: u64, replica: u64) -> mixbound::rng::ChaCha8Rng {
    SeededStream::new(
        seed,
        StreamLabel::new(StreamPurpose::Verify, replica, ChainRole::Shared),
    )
    .rng()
}

/// Draw ranges for the randomized inequality suites: means in [-2, 3],
/// variances in [0.01, 5].
fn draw_mean_variance(rng: &mut impl rand::Rng) -> (f64, f64) {
    (
        -2.0 + 5.0 * uniform_open01(rng),
        0.01 + 4.99 * uniform_open01(rng),
    )
}

/// Truncation-mass lower bound, with the bound function injectable so a
/// deliberately corrupted implementation is detectable (mutation check in
/// the tests).
pub(crate) fn mass_lower_bound_suite_with(
    lower_bound_fn: impl Fn(f64, f64) -> (f64, f64),
    draws: usize,
    seed: u64,
) -> SuiteResult {
    let mut rng = verify_rng(seed, 1);
    let mut failures = Vec::new();
    for case in 0..draws {
        let (mean, variance) = draw_mean_variance(&mut rng);
        let (mass, lower) = lower_bound_fn(mean, variance);
        if !(mass >= lower) {
            failures.push(format!(
                "case {case}: mass {mass} < lower bound {lower} (mean {mean}, variance {variance})"
            ));
        }
    }
    SuiteResult::from_failures("truncation_mass_lower_bound", draws, failures)
}

fn conditioned_tv_quotient_suite(draws: usize, seed: u64) -> SuiteResult {
    let mut rng = verify_rng(seed, 2);
    let mut failures = Vec::new();
    for case in 0..draws {
        let (mean1, variance) = draw_mean_variance(&mut rng);
        let mean2 = -2.0 + 5.0 * uniform_open01(&mut rng);
        let fc1 = FullConditional { site: 0, mean: mean1, variance };
        let fc2 = FullConditional { site: 0, mean: mean2, variance };
        let mass1 = TruncatedUnitNormal::new(mean1, variance).unwrap().mass();
        let mass2 = TruncatedUnitNormal::new(mean2, variance).unwrap().mass();
        let untruncated = normal_tv(mean1, mean2, variance.sqrt()).exact;
        let quotient = truncated_tv_bound(untruncated, mass1, mass2).unwrap();
        let truncated = numeric_tv_truncated(&fc1, &fc2, 2048);
        if !(truncated <= quotient + 1e-9) {
            failures.push(format!(
                "case {case}: truncated tv {truncated} above quotient {quotient}"
            ));
        }
    }
    SuiteResult::from_failures("conditioned_tv_quotient", draws, failures)
}

fn normal_tv_linear_bound_suite(draws: usize, seed: u64) -> SuiteResult {
    let mut rng = verify_rng(seed, 3);
    let mut failures = Vec::new();
    for case in 0..draws {
        let (mean1, variance) = draw_mean_variance(&mut rng);
        let mean2 = -2.0 + 5.0 * uniform_open01(&mut rng);
        let tv = normal_tv(mean1, mean2, variance.sqrt());
        if !(tv.exact <= tv.bound + 1e-15) {
            failures.push(format!(
                "case {case}: exact {} above linear bound {}",
                tv.exact, tv.bound
            ));
        }
    }
    SuiteResult::from_failures("normal_tv_linear_bound", draws, failures)
}

fn normal_tv_quadrature_suite(draws: usize, seed: u64) -> SuiteResult {
    let mut rng = verify_rng(seed, 4);
    let cases = draws.clamp(1, 50); // quadrature-grade, a modest batch is plenty
    let mut failures = Vec::new();
    for case in 0..cases {
        let (mean1, variance) = draw_mean_variance(&mut rng);
        let mean2 = -2.0 + 5.0 * uniform_open01(&mut rng);
        let sigma = variance.sqrt();
        let exact = normal_tv(mean1, mean2, sigma).exact;
        let numeric = numeric_tv_normal(mean1, mean2, sigma);
        if (exact - numeric).abs() > 1e-9 {
            failures.push(format!(
                "case {case}: exact {exact} vs quadrature {numeric}"
            ));
        }
    }
    SuiteResult::from_failures("normal_tv_exact_vs_quadrature", cases, failures)
}

fn sampler_ks_suite(trials: usize, seed: u64) -> SuiteResult {
    let mut rng = verify_rng(seed, 5);
    let mut failures = Vec::new();
    let cases = [(0.833_333, 1.0 / 3.0), (0.2, 0.05), (1.4, 0.8)];
    for (mean, variance) in cases {
        let d = TruncatedUnitNormal::new(mean, variance).unwrap();
        let mut samples: Vec<f64> = (0..trials)
            .map(|_| sample_truncated_normal(mean, variance, uniform_open01(&mut rng)).unwrap())
            .collect();
        let stat = ks_statistic(&mut samples, |x| d.cdf(x));
        let crit = ks_critical(trials, 0.001);
        if stat >= crit {
            failures.push(format!(
                "({mean},{variance}): KS {stat} >= {crit}"
            ));
        }
    }
    SuiteResult::from_failures("sampler_ks", cases.len(), failures)
}

fn coupling_marginal_suite(trials: usize, seed: u64) -> SuiteResult {
    let mut rng = verify_rng(seed, 6);
    let fc_x = FullConditional { site: 0, mean: 0.4, variance: 1.0 / 3.0 };
    let fc_z = FullConditional { site: 0, mean: 0.6, variance: 0.2 };
    let mut xs = Vec::with_capacity(trials);
    let mut zs = Vec::with_capacity(trials);
    for _ in 0..trials {
        let draw = max_couple_site(&fc_x, &fc_z, &mut rng);
        xs.push(draw.x_val);
        zs.push(draw.z_val);
    }
    let crit = ks_critical(trials, 0.001);
    let dx = fc_x.distribution();
    let dz = fc_z.distribution();
    let mut failures = Vec::new();
    let stat_x = ks_statistic(&mut xs, |v| dx.cdf(v));
    if stat_x >= crit {
        failures.push(format!("x marginal KS {stat_x} >= {crit}"));
    }
    let stat_z = ks_statistic(&mut zs, |v| dz.cdf(v));
    if stat_z >= crit {
        failures.push(format!("z marginal KS {stat_z} >= {crit}"));
    }
    SuiteResult::from_failures("coupling_marginals_ks", 2, failures)
}

fn met_rate_suite(trials: usize, seed: u64) -> SuiteResult {
    let mut rng = verify_rng(seed, 7);
    let pairs = 6;
    let mut failures = Vec::new();
    for case in 0..pairs {
        let fc_x = FullConditional {
            site: 0,
            mean: -0.5 + 2.0 * uniform_open01(&mut rng),
            variance: 0.05 + 1.5 * uniform_open01(&mut rng),
        };
        let fc_z = FullConditional {
            site: 0,
            mean: -0.5 + 2.0 * uniform_open01(&mut rng),
            variance: 0.05 + 1.5 * uniform_open01(&mut rng),
        };
        let tv = numeric_tv_truncated(&fc_x, &fc_z, 4096);
        let met = (0..trials)
            .filter(|_| max_couple_site(&fc_x, &fc_z, &mut rng).met)
            .count();
        let met_rate = met as f64 / trials as f64;
        let expect = 1.0 - tv;
        let tolerance = 5.0 * (expect * (1.0 - expect) / trials as f64).sqrt().max(1e-4);
        if (met_rate - expect).abs() > tolerance {
            failures.push(format!(
                "pair {case}: met rate {met_rate} vs 1 - tv {expect}"
            ));
        }
    }
    SuiteResult::from_failures("maximal_coupling_met_rate", pairs, failures)
}

fn per_site_bound_suite(trials: usize, seed: u64) -> SuiteResult {
    let mut rng = verify_rng(seed, 8);
    let graph = build_grid_graph(2, 2, GridScheme::N4).unwrap();
    let params = ModelParams::new(1.0, 1.0, vec![0.5; 4]).unwrap();
    let tc = thermo_constants(&params, &graph).unwrap();
    let cases = 10;
    let mut failures = Vec::new();
    for case in 0..cases {
        let x: Vec<f64> = (0..4).map(|_| uniform_open01(&mut rng)).collect();
        let z: Vec<f64> = (0..4).map(|_| uniform_open01(&mut rng)).collect();
        let site = uniform_site(&mut rng, 4);
        let fc_x = full_conditional(&params, &graph, &x, site).unwrap();
        let fc_z = full_conditional(&params, &graph, &z, site).unwrap();
        let neighbor_diff: f64 = graph
            .neighbors(site)
            .iter()
            .map(|&j| (x[j] - z[j]).abs())
            .sum();
        let bound = per_site_noncoalescence_bound(
            tc.zeta_i[site],
            tc.sigma_tilde_sq_i[site],
            params.gamma,
            neighbor_diff,
        );
        let missed = (0..trials)
            .filter(|_| !max_couple_site(&fc_x, &fc_z, &mut rng).met)
            .count();
        let miss_rate = missed as f64 / trials as f64;
        let se = (miss_rate * (1.0 - miss_rate) / trials as f64).sqrt();
        if miss_rate > bound.min(1.0) + 4.0 * se + 1e-3 {
            failures.push(format!(
                "case {case}: miss rate {miss_rate} above bound {bound}"
            ));
        }
    }
    SuiteResult::from_failures("per_site_noncoalescence_bound", cases, failures)
}

fn coupon_comparison_suite(trials: usize, seed: u64) -> SuiteResult {
    let mut failures = Vec::new();
    let mut cases = 0;
    for (idx, num_sites) in [4usize, 16, 64].into_iter().enumerate() {
        // simulate the cover time once per replica, reuse for both targets
        let mut rng = verify_rng(seed, 9 + idx as u64);
        let thetas: Vec<u64> = (0..trials)
            .map(|_| {
                let mut seen = vec![false; num_sites];
                let mut remaining = num_sites;
                let mut draws = 0u64;
                while remaining > 0 {
                    let site = uniform_site(&mut rng, num_sites);
                    draws += 1;
                    if !seen[site] {
                        seen[site] = true;
                        remaining -= 1;
                    }
                }
                draws
            })
            .collect();
        for epsilon in [0.1, 0.01] {
            cases += 1;
            let m = coupon_collector_m(num_sites, epsilon).unwrap();
            let exact = coupon_collector_tail(num_sites, m).unwrap();
            let sim =
                thetas.iter().filter(|&&theta| theta > m).count() as f64 / trials as f64;
            let se = (exact * (1.0 - exact) / trials as f64).sqrt();
            if exact > epsilon / 2.0 {
                failures.push(format!(
                    "N={num_sites} eps={epsilon}: exact tail {exact} above eps/2"
                ));
            }
            if (sim - exact).abs() > 3.0 * se {
                failures.push(format!(
                    "N={num_sites} eps={epsilon}: simulated {sim} vs exact {exact} (se {se})"
                ));
            }
        }
    }
    SuiteResult::from_failures("coupon_collector_exact_vs_simulated", cases, failures)
}

/// Runs all suites. `draws` controls the randomized-inequality batch
/// sizes, `trials` the Monte Carlo sample sizes; zero for either yields an
/// empty report with skipped status.
pub fn verify_suite(draws: usize, trials: usize, seed: u64) -> VerifyReport {
    if draws == 0 || trials == 0 {
        return VerifyReport {
            seed,
            draws,
            trials,
            skipped: true,
            suites: Vec::new(),
            all_passed: true,
        };
    }
    let suites = vec![
        mass_lower_bound_suite_with(truncated_mass_lower_bound, draws, seed),
        conditioned_tv_quotient_suite(draws, seed),
        normal_tv_linear_bound_suite(draws, seed),
        normal_tv_quadrature_suite(draws / 10, seed),
        sampler_ks_suite(trials, seed),
        coupling_marginal_suite(trials, seed),
        met_rate_suite(trials / 2, seed),
        per_site_bound_suite(trials / 5, seed),
        coupon_comparison_suite(trials, seed),
    ];
    let all_passed = suites.iter().all(|s| s.passed);
    VerifyReport {
        seed,
        draws,
        trials,
        skipped: false,
        suites,
        all_passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn default_suite_passes() {
        let report = verify_suite(150, 8_000, 99);
        assert!(!report.skipped);
        for suite in &report.suites {
            assert!(
                suite.passed,
                "{}: {:?}",
                suite.name, suite.first_failure
            );
        }
        assert!(report.all_passed);
    }

    #[test]
    fn zero_iterations_is_skipped() {
        let report = verify_suite(0, 1_000, 1);
        assert!(report.skipped);
        assert!(report.suites.is_empty());
        assert!(report.all_passed);
    }

    #[test]
    fn corrupted_lower_bound_is_caught() {
        // mutation check: negate the exponent of the lower bound; the suite
        // must fail
        let corrupted = |zeta: f64, sigma_sq: f64| {
            let mass = mixbound::normal::normal_interval_mass(zeta, sigma_sq.sqrt(), 0.0, 1.0);
            let shift = zeta.abs() + 1.0;
            let lower = (shift * shift / (2.0 * sigma_sq)).exp()
                / (2.0 * PI * sigma_sq).sqrt();
            (mass, lower)
        };
        let result = mass_lower_bound_suite_with(corrupted, 200, 99);
        assert!(!result.passed);
        assert!(result.failures > 0);
        assert!(result.first_failure.is_some());
    }
}
