//! Experiment drivers: each takes a resolved model and a small config,
//! runs replicas on labelled streams (parallel fan-out, indexed gather, so
//! outputs are bit-reproducible), and returns a serializable outcome with
//! an explicit verdict.

use rayon::prelude::*;
use serde::Serialize;

use mixbound::bounds::{
    contraction_factor, coupon_collector_m, tv_mixing_time, wasserstein_mixing_time, BoundReport,
};
use mixbound::coupling::{coupled_gibbs_step, one_shot_schedule, CoupledPair, CouplingMode, OneShotReport};
use mixbound::graph::{build_grid_graph, GridScheme};
use mixbound::metrics::{fit_decay_rate, wilson_upper, FittedRate, RatePoint};
use mixbound::model::ModelParams;
use mixbound::oracle::coupon_collector_tail;
use mixbound::rng::{uniform_site, ChainRole, SeededStream, StreamLabel, StreamPurpose};
use mixbound::sampler::{degrade, run_chain, ChainState, ChainTrace};

use crate::config::ModelBundle;
use crate::pgm::{NoisyImage, PgmImage};

use anyhow::{Context, Result};

/// Model identification echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct ModelEcho {
    pub num_sites: usize,
    pub n_max: usize,
    pub n_min: usize,
    pub gamma: f64,
    pub sigma: f64,
}

impl ModelEcho {
    pub fn of(bundle: &ModelBundle) -> Self {
        ModelEcho {
            num_sites: bundle.graph.num_sites(),
            n_max: bundle.graph.n_max(),
            n_min: bundle.graph.n_min(),
            gamma: bundle.params.gamma,
            sigma: bundle.params.sigma,
        }
    }
}

/// Output of the `bound` command: the plain Wasserstein time at the target
/// plus the full total-variation certificate.
#[derive(Debug, Clone, Serialize)]
pub struct BoundBundle {
    pub model: ModelEcho,
    pub epsilon: f64,
    /// θ(ε) in the weighted metric, directly at the target.
    pub wasserstein_theta: f64,
    pub tv: BoundReport,
}

pub fn bound_report(bundle: &ModelBundle, epsilon: f64) -> Result<BoundBundle> {
    let tv = tv_mixing_time(&bundle.params, &bundle.graph, epsilon)?;
    let wasserstein_theta = wasserstein_mixing_time(
        bundle.graph.num_sites(),
        bundle.graph.n_max(),
        bundle.params.gamma,
        bundle.params.sigma,
        epsilon,
    )?;
    Ok(BoundBundle {
        model: ModelEcho::of(bundle),
        epsilon,
        wasserstein_theta,
        tv,
    })
}

/// One row of the contraction time series.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionRow {
    pub t: u64,
    pub mean_d: f64,
    pub se_d: f64,
    pub mean_dhat: f64,
    pub se_dhat: f64,
    pub frac_neq: f64,
    pub se_frac: f64,
}

#[derive(Debug, Clone)]
pub struct ContractionConfig {
    pub replicas: usize,
    pub steps: u64,
    pub record_every: u64,
    pub seed: u64,
    /// When set, both chains start at this constant (degenerate check);
    /// otherwise extremal inits all-0 vs all-1.
    pub equal_init: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionOutcome {
    pub model: ModelEcho,
    pub seed: u64,
    pub replicas: usize,
    pub steps: u64,
    pub record_every: u64,
    /// Contraction factor of the Wasserstein bound.
    pub theory_rate: f64,
    pub fitted: Option<FittedRate>,
    /// "pass", "fail" or "degenerate".
    pub verdict: String,
    pub passed: bool,
    pub series: Vec<ContractionRow>,
}

/// Evolves an ensemble of synchronously coupled pairs and fits the decay
/// rate of the mean weighted distance against the bound's contraction
/// factor (pass margin 0.005, about two standard errors at 1e4 replicas).
pub fn run_contraction_experiment(
    bundle: &ModelBundle,
    cfg: &ContractionConfig,
) -> Result<ContractionOutcome> {
    let graph = &bundle.graph;
    let params = &bundle.params;
    let n = graph.num_sites();
    let record_every = cfg.record_every.max(1);
    // run whole recording chunks; a trailing remainder would be invisible
    // in the series anyway
    let chunks = (cfg.steps / record_every) as usize;
    let steps = chunks as u64 * record_every;
    let num_records = chunks + 1;

    let (init_x, init_z) = match cfg.equal_init {
        Some(v) => (ChainState::constant(v, n)?, ChainState::constant(v, n)?),
        None => (ChainState::constant(0.0, n)?, ChainState::constant(1.0, n)?),
    };

    // Each replica walks its own pair and reports (d, dhat, neq) at every
    // recorded time.
    let per_replica: Vec<Vec<(f64, f64, bool)>> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let mut rng = SeededStream::new(
                cfg.seed,
                StreamLabel::new(StreamPurpose::CoupledPair, replica, ChainRole::Shared),
            )
            .rng();
            let mut pair = CoupledPair::new(init_x.clone(), init_z.clone())
                .expect("inits share shape and time");
            let mut rows = Vec::with_capacity(num_records);
            let measure = |p: &CoupledPair| {
                let d = mixbound::metrics::weighted_l1(&p.x.x, &p.z.x, graph)
                    .expect("lengths match");
                let dhat =
                    mixbound::metrics::taxicab_l1(&p.x.x, &p.z.x).expect("lengths match");
                (d, dhat, !p.all_equal())
            };
            rows.push(measure(&pair));
            for _ in 0..chunks {
                for _ in 0..record_every {
                    coupled_gibbs_step(&mut pair, CouplingMode::Synchronous, params, graph, &mut rng);
                }
                rows.push(measure(&pair));
            }
            rows
        })
        .collect();

    let mut series = Vec::with_capacity(num_records);
    let mut points = Vec::with_capacity(num_records);
    let replicas_f = cfg.replicas as f64;
    for (k, t) in (0..num_records).map(|k| (k, k as u64 * record_every)) {
        let column = per_replica.iter().map(|rows| rows[k]);
        let mut sum = [0.0f64; 3];
        for (d, dhat, neq) in column.clone() {
            sum[0] += d;
            sum[1] += dhat;
            sum[2] += if neq { 1.0 } else { 0.0 };
        }
        let mean = [sum[0] / replicas_f, sum[1] / replicas_f, sum[2] / replicas_f];
        let mut var = [0.0f64; 3];
        for (d, dhat, neq) in column {
            var[0] += (d - mean[0]).powi(2);
            var[1] += (dhat - mean[1]).powi(2);
            var[2] += (if neq { 1.0 } else { 0.0 } - mean[2]).powi(2);
        }
        let se = |v: f64| {
            if cfg.replicas > 1 {
                (v / (replicas_f - 1.0) / replicas_f).sqrt()
            } else {
                f64::NAN
            }
        };
        series.push(ContractionRow {
            t,
            mean_d: mean[0],
            se_d: se(var[0]),
            mean_dhat: mean[1],
            se_dhat: se(var[1]),
            frac_neq: mean[2],
            se_frac: se(var[2]),
        });
        points.push(RatePoint {
            t: t as f64,
            mean: mean[0],
            se: if cfg.replicas > 1 { se(var[0]) } else { 0.0 },
        });
    }

    let theory_rate = contraction_factor(n, graph.n_max(), params.gamma, params.sigma);
    let fitted = fit_decay_rate(&points);
    let (verdict, passed) = match &fitted {
        None => ("degenerate".to_string(), true),
        Some(fit) => {
            if fit.rate <= theory_rate + 0.005 {
                ("pass".to_string(), true)
            } else {
                ("fail".to_string(), false)
            }
        }
    };
    Ok(ContractionOutcome {
        model: ModelEcho::of(bundle),
        seed: cfg.seed,
        replicas: cfg.replicas,
        steps,
        record_every,
        theory_rate,
        fitted,
        verdict,
        passed,
        series,
    })
}

#[derive(Debug, Clone)]
pub struct CertificateConfig {
    pub epsilon: f64,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateOutcome {
    pub model: ModelEcho,
    pub seed: u64,
    pub bound: BoundReport,
    pub one_shot: OneShotReport,
    /// One-sided 95% Wilson upper confidence limit on the noncoalesced
    /// fraction; None when the CI is unusable (fewer than 2 replicas).
    pub upper95: Option<f64>,
    pub ci_usable: bool,
    /// upper95 <= epsilon (None when the CI is unusable).
    pub epsilon_compliant: Option<bool>,
    pub passed: bool,
}

/// The empirical side of the total-variation certificate: computes the
/// bound, runs the one-shot schedule from extremal inits (all-0 vs all-1
/// — a surrogate for the equilibrium chain, which cannot be sampled
/// exactly; the schedule's argument applies to any two faithful copies
/// after the synchronous phase), and checks epsilon-compliance of the
/// noncoalesced fraction's confidence limit.
pub fn run_certificate_experiment(
    bundle: &ModelBundle,
    cfg: &CertificateConfig,
) -> Result<CertificateOutcome> {
    let n = bundle.graph.num_sites();
    let init_x = ChainState::constant(0.0, n)?;
    let init_z = ChainState::constant(1.0, n)?;
    let (bound, one_shot) = one_shot_schedule(
        &bundle.params,
        &bundle.graph,
        cfg.epsilon,
        &init_x,
        &init_z,
        cfg.seed,
        cfg.replicas,
    )?;
    let ci_usable = cfg.replicas >= 2;
    let upper95 = ci_usable.then(|| {
        wilson_upper(one_shot.noncoalesced_count, cfg.replicas, 1.644_853_626_951_472_7)
    });
    let epsilon_compliant = upper95.map(|u| u <= cfg.epsilon);
    let passed = epsilon_compliant.unwrap_or(false);
    Ok(CertificateOutcome {
        model: ModelEcho::of(bundle),
        seed: cfg.seed,
        bound,
        one_shot,
        upper95,
        ci_usable,
        epsilon_compliant,
        passed,
    })
}

/// Degrades a clean image with `Normal(0, sigma^2)` noise on a labelled
/// stream. The output is real-valued, never quantized.
pub fn degrade_image(img: &PgmImage, sigma: f64, seed: u64) -> Result<NoisyImage> {
    let mut rng = SeededStream::new(
        seed,
        StreamLabel::new(StreamPurpose::Degrade, 0, ChainRole::Shared),
    )
    .rng();
    let values = degrade(&img.pixels, sigma, &mut rng)?;
    Ok(NoisyImage::new(img.width, img.height, values)?)
}

#[derive(Debug, Clone)]
pub struct RestoreConfig {
    pub gamma: f64,
    pub sigma: f64,
    pub scheme: GridScheme,
    pub epsilon: f64,
    /// Cap on the chain length; the recommended length is the
    /// certificate's integer schedule tau + M.
    pub max_steps: u64,
    /// Snapshot interval for the returned trace (0: init and final only).
    pub record_every: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestoreDiagnostics {
    pub width: usize,
    pub height: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub recommended_steps: u64,
    pub steps_run: u64,
    pub capped: bool,
    pub bound: BoundReport,
}

/// Posterior-mean restoration: runs the Gibbs chain for the number of
/// steps the certificate recommends (capped), starting from the clamped
/// observation, and returns the ergodic average clamped to `[0,1]` for
/// display, along with the recorded trace.
pub fn restore_image(
    noisy: &NoisyImage,
    cfg: &RestoreConfig,
) -> Result<(PgmImage, RestoreDiagnostics, ChainTrace)> {
    let graph = build_grid_graph(noisy.width, noisy.height, cfg.scheme)?;
    let params = ModelParams::new(cfg.gamma, cfg.sigma, noisy.values.clone())?;
    let bound = tv_mixing_time(&params, &graph, cfg.epsilon)?;
    let recommended = bound.tau + bound.m;
    let steps = recommended.min(cfg.max_steps);

    let init = ChainState::new(
        noisy
            .values
            .iter()
            .map(|&v| v.clamp(0.0, 1.0))
            .collect(),
    )?;
    let mut rng = SeededStream::new(
        cfg.seed,
        StreamLabel::new(StreamPurpose::Chain, 0, ChainRole::Primary),
    )
    .rng();
    let trace = run_chain(init, steps, &params, &graph, &mut rng, cfg.record_every);

    let restored = PgmImage::new(
        noisy.width,
        noisy.height,
        trace.mean.iter().map(|&v| v.clamp(0.0, 1.0)).collect(),
    )?;
    let diagnostics = RestoreDiagnostics {
        width: noisy.width,
        height: noisy.height,
        gamma: cfg.gamma,
        sigma: cfg.sigma,
        epsilon: cfg.epsilon,
        seed: cfg.seed,
        recommended_steps: recommended,
        steps_run: steps,
        capped: steps < recommended,
        bound,
    };
    Ok((restored, diagnostics, trace))
}

#[derive(Debug, Clone)]
pub struct CollectorConfig {
    pub num_sites: usize,
    pub epsilons: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CollectorEntry {
    pub epsilon: f64,
    pub m: u64,
    pub exact_tail: f64,
    pub simulated_tail: f64,
    pub binomial_se: f64,
    /// |simulated - exact| <= 3 SE.
    pub within_3se: bool,
    /// exact tail <= epsilon / 2 (the budget's guarantee).
    pub exact_le_half_epsilon: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CollectorOutcome {
    pub num_sites: usize,
    pub replicas: usize,
    pub seed: u64,
    pub entries: Vec<CollectorEntry>,
    pub passed: bool,
}

/// Coupon-collector validation: simulates the cover time θ once per
/// replica and compares the empirical tail at each budget M against the
/// exact inclusion-exclusion tail.
pub fn run_collector(cfg: &CollectorConfig) -> Result<CollectorOutcome> {
    let thetas: Vec<u64> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let mut rng = SeededStream::new(
                cfg.seed,
                StreamLabel::new(StreamPurpose::Collector, replica, ChainRole::Shared),
            )
            .rng();
            let mut seen = vec![false; cfg.num_sites];
            let mut remaining = cfg.num_sites;
            let mut draws = 0u64;
            while remaining > 0 {
                let site = uniform_site(&mut rng, cfg.num_sites);
                draws += 1;
                if !seen[site] {
                    seen[site] = true;
                    remaining -= 1;
                }
            }
            draws
        })
        .collect();

    let mut entries = Vec::with_capacity(cfg.epsilons.len());
    for &epsilon in &cfg.epsilons {
        let m = coupon_collector_m(cfg.num_sites, epsilon)?;
        let exact = coupon_collector_tail(cfg.num_sites, m)?;
        let exceed = thetas.iter().filter(|&&theta| theta > m).count();
        let simulated = exceed as f64 / cfg.replicas as f64;
        let se = (exact * (1.0 - exact) / cfg.replicas as f64).sqrt();
        entries.push(CollectorEntry {
            epsilon,
            m,
            exact_tail: exact,
            simulated_tail: simulated,
            binomial_se: se,
            within_3se: (simulated - exact).abs() <= 3.0 * se,
            exact_le_half_epsilon: exact <= epsilon / 2.0,
        });
    }
    let passed = entries
        .iter()
        .all(|e| e.within_3se && e.exact_le_half_epsilon);
    Ok(CollectorOutcome {
        num_sites: cfg.num_sites,
        replicas: cfg.replicas,
        seed: cfg.seed,
        entries,
        passed,
    })
}

/// Runs a closure inside a rayon pool of the requested size (global pool
/// when `None`). Results stay bit-identical either way; the knob only
/// changes wall-clock time.
pub fn with_thread_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?;
            Ok(pool.install(job))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelBundle;
    use mixbound::graph::build_grid_graph;

    fn golden_bundle() -> ModelBundle {
        ModelBundle {
            params: ModelParams::new(1.0, 1.0, vec![0.5; 4]).unwrap(),
            graph: build_grid_graph(2, 2, GridScheme::N4).unwrap(),
            shape: Some((2, 2)),
        }
    }

    #[test]
    fn bound_bundle_reports_both_certificates() {
        let b = bound_report(&golden_bundle(), 0.1).unwrap();
        assert!((b.wasserstein_theta - 50.36).abs() < 0.01);
        assert_eq!(b.tv.m, 18);
    }

    #[test]
    fn contraction_degenerate_verdict_on_equal_inits() {
        let cfg = ContractionConfig {
            replicas: 50,
            steps: 40,
            record_every: 2,
            seed: 1,
            equal_init: Some(0.5),
        };
        let out = run_contraction_experiment(&golden_bundle(), &cfg).unwrap();
        assert_eq!(out.verdict, "degenerate");
        assert!(out.passed);
        assert!(out.series.iter().all(|r| r.mean_d == 0.0));
    }

    #[test]
    fn contraction_small_run_passes() {
        let cfg = ContractionConfig {
            replicas: 400,
            steps: 100,
            record_every: 2,
            seed: 2,
            equal_init: None,
        };
        let out = run_contraction_experiment(&golden_bundle(), &cfg).unwrap();
        assert_eq!(out.verdict, "pass", "fitted {:?}", out.fitted);
        assert!((out.theory_rate - 11.0 / 12.0).abs() < 1e-12);
        assert_eq!(out.series.len(), 51);
        assert_eq!(out.series[0].mean_d, 8.0);
    }

    #[test]
    fn contraction_gamma_zero_rate() {
        let bundle = ModelBundle {
            params: ModelParams::new(0.0, 1.0, vec![0.5; 4]).unwrap(),
            graph: build_grid_graph(2, 2, GridScheme::N4).unwrap(),
            shape: Some((2, 2)),
        };
        let cfg = ContractionConfig {
            replicas: 3_000,
            steps: 60,
            record_every: 1,
            seed: 3,
            equal_init: None,
        };
        let out = run_contraction_experiment(&bundle, &cfg).unwrap();
        let fit = out.fitted.expect("non-degenerate");
        // decoupled chains coalesce coordinate-wise at the site-selection
        // rate: 1 - 1/N = 0.75
        assert!(
            (fit.rate - 0.75).abs() < 2.0 * fit.rate_se + 0.01,
            "rate {} +- {}",
            fit.rate,
            fit.rate_se
        );
    }

    #[test]
    fn certificate_reproducible_and_monotone() {
        let bundle = golden_bundle();
        let run = |eps: f64| {
            run_certificate_experiment(
                &bundle,
                &CertificateConfig {
                    epsilon: eps,
                    replicas: 300,
                    seed: 4,
                },
            )
            .unwrap()
        };
        let a = run(0.1);
        let b = run(0.1);
        assert_eq!(
            a.one_shot.noncoalesced_count,
            b.one_shot.noncoalesced_count
        );
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        // larger target -> shorter schedule
        let loose = run(0.5);
        assert!(loose.bound.total_time < a.bound.total_time);
    }

    #[test]
    fn certificate_single_replica_ci_unusable() {
        let out = run_certificate_experiment(
            &golden_bundle(),
            &CertificateConfig {
                epsilon: 0.3,
                replicas: 1,
                seed: 5,
            },
        )
        .unwrap();
        assert!(!out.ci_usable);
        assert!(out.upper95.is_none());
        assert!(out.epsilon_compliant.is_none());
    }

    #[test]
    fn collector_matches_exact_tail() {
        let out = run_collector(&CollectorConfig {
            num_sites: 4,
            epsilons: vec![0.1],
            replicas: 30_000,
            seed: 6,
        })
        .unwrap();
        let e = &out.entries[0];
        assert_eq!(e.m, 18);
        assert!((e.exact_tail - 0.022_528).abs() < 1e-6);
        assert!(e.within_3se, "sim {} exact {}", e.simulated_tail, e.exact_tail);
        assert!(e.exact_le_half_epsilon);
        assert!(out.passed);
    }

    #[test]
    fn restore_gamma_zero_sigma_small_is_identity_up_to_quantization() {
        let pixels: Vec<f64> = (0..16).map(|i| (i as f64) / 15.0).collect();
        let img = PgmImage::new(4, 4, pixels).unwrap();
        let noisy = degrade_image(&img, 1e-4, 42).unwrap();
        let (restored, diag, _) = restore_image(
            &noisy,
            &RestoreConfig {
                gamma: 0.0,
                sigma: 1e-4,
                scheme: GridScheme::N4,
                epsilon: 0.2,
                max_steps: 30_000,
                record_every: 0,
                seed: 42,
            },
        )
        .unwrap();
        assert!(diag.steps_run > 0);
        for (a, b) in restored.pixels.iter().zip(&img.pixels) {
            assert!((a - b).abs() < 2.0 / 255.0, "{a} vs {b}");
        }
        // byte-identical after PGM quantization
        assert_eq!(restored.encode().len(), img.encode().len());
    }

    #[test]
    fn restore_gamma_zero_matches_truncated_mean_oracle() {
        // decoupled model: each restored pixel is the ergodic mean of the
        // truncated Normal(y_i, sigma^2), known in closed form
        let img = PgmImage::new(5, 5, vec![0.5; 25]).unwrap();
        let sigma = 0.5;
        let noisy = degrade_image(&img, sigma, 11).unwrap();
        let (restored, diag, _) = restore_image(
            &noisy,
            &RestoreConfig {
                gamma: 0.0,
                sigma,
                scheme: GridScheme::N4,
                epsilon: 0.2,
                max_steps: 500_000,
                record_every: 0,
                seed: 11,
            },
        )
        .unwrap();
        // ~steps/25 refreshes per pixel; sd of each draw < 0.3
        let per_pixel = diag.steps_run as f64 / 25.0;
        let tol = 4.0 * 0.3 / per_pixel.sqrt() + 0.002;
        for (i, (&value, &y)) in restored.pixels.iter().zip(&noisy.values).enumerate() {
            let expect = mixbound::truncated::TruncatedUnitNormal::new(y, sigma * sigma)
                .unwrap()
                .truncated_mean();
            assert!(
                (value - expect).abs() < tol,
                "pixel {i}: {value} vs {expect} (tol {tol})"
            );
        }
    }

    #[test]
    fn restore_is_deterministic() {
        let img = PgmImage::new(3, 3, vec![0.5; 9]).unwrap();
        let noisy = degrade_image(&img, 0.4, 7).unwrap();
        let cfg = RestoreConfig {
            gamma: 1.0,
            sigma: 0.4,
            scheme: GridScheme::N4,
            epsilon: 0.2,
            max_steps: 5_000,
            record_every: 0,
            seed: 7,
        };
        let (a, da, _) = restore_image(&noisy, &cfg).unwrap();
        let (b, db, _) = restore_image(&noisy, &cfg).unwrap();
        assert_eq!(a.encode(), b.encode());
        assert_eq!(
            serde_json::to_string(&da).unwrap(),
            serde_json::to_string(&db).unwrap()
        );
    }
}
