//! Independent verification machinery.
//!
//! Nothing in here shares code paths with the quantities it is used to
//! check: total variation between truncated conditionals is done by
//! quadrature on the densities, the coupon-collector tail by
//! inclusion-exclusion, and tiny models get an exactly discretized chain
//! whose transition law is a genuine stochastic matrix (cell probabilities
//! are CDF differences, so total variation between powered distributions
//! is exactly monotone, not approximately).
//!
//! The discretized chain approximates the continuous one; it is meant for
//! qualitative domination checks and distribution-shape tests, never for
//! tight numeric equality with the continuous chain.

use serde::Serialize;

use crate::graph::NeighborhoodGraph;
use crate::model::{FullConditional, ModelParams};
use crate::normal::{norm_pdf, norm_quantile};
use crate::truncated::TruncatedUnitNormal;
use crate::{Error, Result};

/// Composite Simpson of `|f - g|` over `[0,1]` with `panels` subintervals.
fn simpson_abs_diff(f: &TruncatedUnitNormal, g: &TruncatedUnitNormal, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = 1.0 / n as f64;
    let eval = |x: f64| (f.pdf(x) - g.pdf(x)).abs();
    let mut sum = eval(0.0) + eval(1.0);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * eval(k as f64 * h);
    }
    sum * h / 3.0
}

/// `1/2 ∫_0^1 |f - g|` for two truncated conditional densities, by
/// composite Simpson quadrature with the densities normalized by their
/// exact truncation masses.
///
/// `grid_points` is the starting resolution (minimum 1024); the grid is
/// doubled until the value moves by less than 1e-10, which holds the
/// absolute error near 1e-9 even for sharply spiked densities.
pub fn numeric_tv_truncated(
    fc1: &FullConditional,
    fc2: &FullConditional,
    grid_points: usize,
) -> f64 {
    let f = fc1.distribution();
    let g = fc2.distribution();
    if f.is_degenerate() || g.is_degenerate() {
        // A degenerate window is a point mass at an endpoint.
        return if f.is_degenerate() && g.is_degenerate() {
            if f.mean_parameter().signum() == g.mean_parameter().signum() {
                0.0
            } else {
                1.0
            }
        } else {
            1.0
        };
    }
    let mut n = grid_points.max(1024);
    let mut prev = simpson_abs_diff(&f, &g, n);
    loop {
        n *= 2;
        let cur = simpson_abs_diff(&f, &g, n);
        if (cur - prev).abs() < 1e-10 || n >= (1 << 21) {
            return 0.5 * cur;
        }
        prev = cur;
    }
}

/// `1/2 ∫ |N(mu1, sigma²) - N(mu2, sigma²)|` over the real line by the
/// same refined Simpson scheme (integration window `±12σ` around the
/// means, where the omitted tails are < 1e-32).
pub fn numeric_tv_normal(mu1: f64, mu2: f64, sigma: f64) -> f64 {
    let lo = mu1.min(mu2) - 12.0 * sigma;
    let hi = mu1.max(mu2) + 12.0 * sigma;
    let width = hi - lo;
    let eval = |x: f64| {
        (norm_pdf((x - mu1) / sigma) - norm_pdf((x - mu2) / sigma)).abs() / sigma
    };
    let simpson = |panels: usize| {
        let n = panels + panels % 2;
        let h = width / n as f64;
        let mut sum = eval(lo) + eval(hi);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * eval(lo + k as f64 * h);
        }
        sum * h / 3.0
    };
    let mut n = 4096;
    let mut prev = simpson(n);
    loop {
        n *= 2;
        let cur = simpson(n);
        if (cur - prev).abs() < 1e-10 || n >= (1 << 21) {
            return 0.5 * cur;
        }
        prev = cur;
    }
}

/// Exact tail `P[θ > M]` of the coupon-collector time for `N` coupons by
/// inclusion-exclusion:
///
/// ```text
/// P[θ > M] = Σ_{k=1}^{N-1} (-1)^(k+1) C(N,k) (1 - k/N)^M
/// ```
///
/// Binomial coefficients are carried in log space. When the alternating
/// series is ill-conditioned in doubles (terms above ~1e13, which only
/// happens for `M` well below `N ln N`), the value is computed instead by
/// the exact collected-count recursion, which uses only nonnegative
/// numbers.
pub fn coupon_collector_tail(num_coupons: usize, draws: u64) -> Result<f64> {
    if num_coupons == 0 {
        return Err(Error::Domain("need at least one coupon"));
    }
    if draws == 0 {
        return Ok(1.0);
    }
    if num_coupons == 1 {
        return Ok(0.0);
    }
    let n = num_coupons as f64;
    let m = draws as f64;

    // log C(N,k) built incrementally; find the largest term first.
    let mut log_binom = 0.0f64;
    let mut max_log_term = f64::NEG_INFINITY;
    for k in 1..num_coupons {
        log_binom += ((n - (k as f64 - 1.0)) / k as f64).ln();
        let log_term = log_binom + m * (1.0 - k as f64 / n).ln();
        max_log_term = max_log_term.max(log_term);
    }

    if max_log_term > 30.0 {
        // alternating cancellation would eat the result; use the recursion
        return Ok(coupon_tail_by_recursion(num_coupons, draws));
    }

    let mut sum = 0.0f64;
    let mut log_binom = 0.0f64;
    for k in 1..num_coupons {
        log_binom += ((n - (k as f64 - 1.0)) / k as f64).ln();
        let term = (log_binom + m * (1.0 - k as f64 / n).ln()).exp();
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// `P[θ > M]` via the distribution of the number of distinct coupons
/// collected after each draw. O(N·M), no cancellation.
fn coupon_tail_by_recursion(num_coupons: usize, draws: u64) -> f64 {
    let n = num_coupons as f64;
    let mut p = vec![0.0f64; num_coupons + 1];
    p[0] = 1.0;
    for _ in 0..draws {
        for j in (1..=num_coupons).rev() {
            p[j] = p[j] * (j as f64 / n) + p[j - 1] * ((n - (j as f64 - 1.0)) / n);
        }
        p[0] = 0.0;
    }
    (1.0 - p[num_coupons]).clamp(0.0, 1.0)
}

/// Random-scan Gibbs chain on the grid `{0,...,L-1}^N`: each site update
/// redistributes the site's cell according to the exact truncated-normal
/// cell masses given the neighbours' cell midpoints. Rows are sparse
/// (`N·L` entries); the chain is a true Markov chain, so powered
/// distributions have exactly monotone total variation.
#[derive(Debug, Clone)]
pub struct DiscretizedChain {
    num_sites: usize,
    levels: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

/// Hard cap on the discretized state-space size.
pub const MAX_DISCRETE_STATES: usize = 100_000;

impl DiscretizedChain {
    /// Builds the transition structure. Requires `num_sites <= 3` and
    /// `levels^num_sites <= 1e5`.
    pub fn build(
        params: &ModelParams,
        graph: &NeighborhoodGraph,
        levels: usize,
    ) -> Result<Self> {
        params.check_against(graph)?;
        let num_sites = graph.num_sites();
        if num_sites == 0 || num_sites > 3 {
            return Err(Error::Domain("discretized oracle supports 1..=3 sites"));
        }
        if levels < 2 {
            return Err(Error::Domain("need at least 2 levels"));
        }
        let num_states = levels.checked_pow(num_sites as u32).ok_or(
            Error::StateSpaceTooLarge {
                states: usize::MAX,
                cap: MAX_DISCRETE_STATES,
            },
        )?;
        if num_states > MAX_DISCRETE_STATES {
            return Err(Error::StateSpaceTooLarge {
                states: num_states,
                cap: MAX_DISCRETE_STATES,
            });
        }

        let inv_sigma_sq = 1.0 / (params.sigma * params.sigma);
        let gamma_sq = params.gamma * params.gamma;
        let l = levels as f64;
        let site_weight = 1.0 / num_sites as f64;

        let mut strides = vec![1usize; num_sites];
        for i in 1..num_sites {
            strides[i] = strides[i - 1] * levels;
        }

        let mut rows = Vec::with_capacity(num_states);
        let mut cells = vec![0usize; num_sites];
        for state in 0..num_states {
            let mut rem = state;
            for c in cells.iter_mut() {
                *c = rem % levels;
                rem /= levels;
            }
            let mut row: Vec<(u32, f64)> = Vec::with_capacity(num_sites * levels);
            for i in 0..num_sites {
                let neighbor_sum: f64 = graph
                    .neighbors(i)
                    .iter()
                    .map(|&j| (cells[j] as f64 + 0.5) / l)
                    .sum();
                let precision = inv_sigma_sq + graph.degree(i) as f64 * gamma_sq;
                let variance = 1.0 / precision;
                let mean = variance * (inv_sigma_sq * params.y[i] + gamma_sq * neighbor_sum);
                let dist = TruncatedUnitNormal::new(mean, variance)?;
                // exact cell masses, renormalized against rounding
                let mut masses: Vec<f64> = (0..levels)
                    .map(|k| dist.interval_mass(k as f64 / l, (k + 1) as f64 / l))
                    .collect();
                let total: f64 = masses.iter().sum();
                if total > 0.0 {
                    for mass in &mut masses {
                        *mass /= total;
                    }
                }
                let base = state - cells[i] * strides[i];
                for (k, &mass) in masses.iter().enumerate() {
                    if mass > 0.0 {
                        row.push(((base + k * strides[i]) as u32, site_weight * mass));
                    }
                }
            }
            row.sort_by_key(|&(s, _)| s);
            row.dedup_by(|later, earlier| {
                if later.0 == earlier.0 {
                    earlier.1 += later.1;
                    true
                } else {
                    false
                }
            });
            rows.push(row);
        }
        Ok(DiscretizedChain {
            num_sites,
            levels,
            rows,
        })
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn row_sum(&self, state: usize) -> f64 {
        self.rows[state].iter().map(|&(_, p)| p).sum()
    }

    /// Cell index of a continuous point.
    pub fn state_of(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.num_sites {
            return Err(Error::LengthMismatch {
                expected: self.num_sites,
                got: x.len(),
            });
        }
        let l = self.levels as f64;
        let mut state = 0usize;
        let mut stride = 1usize;
        for &v in x {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain("point outside [0,1]^N"));
            }
            let cell = ((v * l) as usize).min(self.levels - 1);
            state += cell * stride;
            stride *= self.levels;
        }
        Ok(state)
    }

    /// Midpoint of site `i`'s cell in `state`.
    pub fn cell_midpoint(&self, state: usize, site: usize) -> f64 {
        let cell = (state / self.levels.pow(site as u32)) % self.levels;
        (cell as f64 + 0.5) / self.levels as f64
    }

    /// One application of the kernel to a distribution.
    pub fn step_distribution(&self, dist: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0f64; self.rows.len()];
        for (state, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for &(target, p) in &self.rows[state] {
                next[target as usize] += mass * p;
            }
        }
        next
    }

    /// Stationary distribution by power iteration (L1 residual below
    /// `tol`, at most `max_iter` sweeps).
    pub fn stationary(&self, tol: f64, max_iter: usize) -> Vec<f64> {
        let n = self.rows.len();
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..max_iter {
            let next = self.step_distribution(&pi);
            let residual: f64 = next
                .iter()
                .zip(&pi)
                .map(|(a, b)| (a - b).abs())
                .sum();
            pi = next;
            if residual < tol {
                break;
            }
        }
        pi
    }
}

/// A `(t, tv)` series from powering two point masses through the
/// discretized kernel.
#[derive(Debug, Clone, Serialize)]
pub struct TvSeries {
    pub t: Vec<u64>,
    pub tv: Vec<f64>,
}

/// Exact total variation `1/2 ||μ1^t - μ2^t||_1` between the discretized
/// laws started from the cells containing `init1` and `init2`, for
/// `t = 0..=t_max`.
pub fn discretized_chain_exact_tv(
    params: &ModelParams,
    graph: &NeighborhoodGraph,
    levels: usize,
    init1: &[f64],
    init2: &[f64],
    t_max: u64,
) -> Result<TvSeries> {
    let chain = DiscretizedChain::build(params, graph, levels)?;
    let mut mu1 = vec![0.0; chain.num_states()];
    let mut mu2 = vec![0.0; chain.num_states()];
    mu1[chain.state_of(init1)?] = 1.0;
    mu2[chain.state_of(init2)?] = 1.0;

    let tv_of = |a: &[f64], b: &[f64]| -> f64 {
        0.5 * a
            .iter()
            .zip(b)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
    };

    let mut t = Vec::with_capacity(t_max as usize + 1);
    let mut tv = Vec::with_capacity(t_max as usize + 1);
    t.push(0);
    tv.push(tv_of(&mu1, &mu2));
    for step in 1..=t_max {
        mu1 = chain.step_distribution(&mu1);
        mu2 = chain.step_distribution(&mu2);
        t.push(step);
        tv.push(tv_of(&mu1, &mu2));
    }
    Ok(TvSeries { t, tv })
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` (sorted in place)
/// against a CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - f).abs());
    }
    d
}

/// Asymptotic two-sided KS critical value `sqrt(ln(2/alpha)/2) / sqrt(n)`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Pearson chi-square statistic of observed counts against expected
/// counts (cells with zero expectation must have zero observations).
pub fn chi_square_statistic(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            if e <= 0.0 {
                debug_assert_eq!(o, 0);
                0.0
            } else {
                let d = o as f64 - e;
                d * d / e
            }
        })
        .sum()
}

/// Chi-square upper critical value by the Wilson-Hilferty cube
/// approximation (relative error ~1e-3 for df >= 3, plenty for test
/// thresholds).
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    let k = df as f64;
    let z = norm_quantile(1.0 - alpha);
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}
