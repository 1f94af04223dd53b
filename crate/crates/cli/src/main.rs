use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use mixbound::graph::GridScheme;
use mixbound::oracle::discretized_chain_exact_tv;

use mixbound_cli::config::{
    parse_scheme, pick, pick_required, resolve_model, resolve_seed, FileConfig, ModelArgs,
};
use mixbound_cli::experiments::{
    bound_report, degrade_image, restore_image, run_certificate_experiment, run_collector,
    run_contraction_experiment, with_thread_pool, CertificateConfig, CollectorConfig,
    ContractionConfig, RestoreConfig,
};
use mixbound_cli::pgm::{NoisyImage, PgmImage};
use mixbound_cli::report;
use mixbound_cli::verify::verify_suite;

/// Gibbs-sampler image restoration with coupling-based convergence
/// certificates.
#[derive(Parser)]
#[command(name = "mixbound", version, about)]
struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (falls back to config file, then $MIXBOUND_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker pool size for replica fan-out (default: all cores).
    /// Results are identical regardless of this knob.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the Wasserstein and total-variation mixing-time bounds.
    Bound {
        #[command(flatten)]
        model: ModelArgs,
        /// Target distance epsilon in (0,1).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Write the report as JSON here ("-" for stdout).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Add Normal(0, sigma^2) noise to a clean PGM image.
    Degrade {
        /// Clean input image (PGM, P5 or P2).
        #[arg(long)]
        input: PathBuf,
        /// Noise standard deviation.
        #[arg(long)]
        sigma: Option<f64>,
        /// Output path for the real-valued observation file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Restore an image by posterior-mean Gibbs sampling.
    Restore {
        /// Clean PGM input: it is degraded first (see --noisy-out), then
        /// restored. Mutually exclusive with --noisy.
        #[arg(long, conflicts_with = "noisy")]
        input: Option<PathBuf>,
        /// Existing degraded observation file to restore.
        #[arg(long)]
        noisy: Option<PathBuf>,
        /// Where to store the intermediate observation when degrading.
        #[arg(long)]
        noisy_out: Option<PathBuf>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<GridScheme>,
        /// Certificate target used to size the run.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Cap on chain length.
        #[arg(long)]
        max_steps: Option<u64>,
        /// Restored image output (PGM).
        #[arg(long)]
        output: PathBuf,
        /// Diagnostics JSON output.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        /// Chain snapshot CSV (t, x_0..x_{N-1}); interval set by
        /// --record-every.
        #[arg(long)]
        trace_csv: Option<PathBuf>,
        /// Snapshot interval for --trace-csv (0: init and final only).
        #[arg(long)]
        record_every: Option<u64>,
    },
    /// Measure the synchronous-coupling contraction rate of the weighted
    /// metric and compare it to the bound's rate.
    Contraction {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        replicas: Option<usize>,
        /// Coupled steps to run.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        record_every: Option<u64>,
        /// Start both chains at this constant (degenerate-series check).
        #[arg(long)]
        equal_init: Option<f64>,
        /// Time-series CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the one-shot coalescence schedule and check the empirical
    /// noncoalesced fraction against epsilon.
    Certificate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Per-replica coalescence times CSV.
        #[arg(long)]
        times_csv: Option<PathBuf>,
    },
    /// Compare the exact coupon-collector tail at the budget M with a
    /// simulation.
    Collector {
        /// Number of coupons (sites).
        #[arg(long)]
        num_sites: Option<usize>,
        /// Targets to evaluate (repeatable).
        #[arg(long = "epsilon")]
        epsilons: Vec<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Exact TV decay of the discretized two/three-site oracle chain.
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        /// Grid levels per coordinate.
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        t_max: Option<u64>,
        /// TV-vs-t CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the randomized verification suites.
    Verify {
        /// Randomized inequality draws per suite.
        #[arg(long)]
        draws: Option<usize>,
        /// Monte Carlo trials per distributional test.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing report")?;
    if path.as_os_str() == "-" {
        println!("{text}");
        return Ok(());
    }
    fs::write(path, text.as_bytes())
        .with_context(|| format!("writing {}", path.display()))
}

fn write_text(text: &str, path: &Path) -> Result<()> {
    fs::write(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<bool> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = resolve_seed(cli.seed, &file)?;
    let threads = cli.threads.or(file.threads);

    match cli.command {
        Command::Bound {
            model,
            epsilon,
            json,
        } => {
            let bundle = resolve_model(&model, &file)?;
            let epsilon = pick(epsilon, file.epsilon, 0.1);
            let out = bound_report(&bundle, epsilon)?;
            print!("{}", report::render_bound_text(&out));
            if let Some(path) = json {
                write_json(&out, &path)?;
            }
            Ok(true)
        }
        Command::Degrade {
            input,
            sigma,
            output,
        } => {
            let sigma = pick_required(sigma, file.sigma, "sigma")?;
            let img = PgmImage::read(&input)?;
            let noisy = degrade_image(&img, sigma, seed)?;
            noisy.write(&output)?;
            println!(
                "degraded {}x{} image with sigma={sigma} -> {}",
                img.width,
                img.height,
                output.display()
            );
            Ok(true)
        }
        Command::Restore {
            input,
            noisy,
            noisy_out,
            gamma,
            sigma,
            scheme,
            epsilon,
            max_steps,
            output,
            diagnostics,
            trace_csv,
            record_every,
        } => {
            let sigma = pick_required(sigma, file.sigma, "sigma")?;
            let cfg = RestoreConfig {
                gamma: pick_required(gamma, file.gamma, "gamma")?,
                sigma,
                scheme: pick(scheme, file.scheme, GridScheme::N4),
                epsilon: pick(epsilon, file.epsilon, 0.1),
                max_steps: pick(max_steps, file.max_steps, 2_000_000),
                record_every: pick(record_every, file.record_every, 0),
                seed,
            };
            let observation = match (input, noisy) {
                (Some(path), None) => {
                    let img = PgmImage::read(&path)?;
                    let degraded = degrade_image(&img, sigma, seed)?;
                    if let Some(out) = &noisy_out {
                        degraded.write(out)?;
                    }
                    degraded
                }
                (None, Some(path)) => NoisyImage::read(&path)?,
                _ => anyhow::bail!("provide exactly one of --input or --noisy"),
            };
            let (restored, diag, trace) =
                with_thread_pool(threads, || restore_image(&observation, &cfg))??;
            restored.write(&output)?;
            if let Some(path) = diagnostics {
                write_json(&diag, &path)?;
            }
            if let Some(path) = trace_csv {
                write_text(&report::trace_csv(&trace), &path)?;
            }
            println!(
                "restored {}x{} image in {} steps (recommended {}{}) -> {}",
                diag.width,
                diag.height,
                diag.steps_run,
                diag.recommended_steps,
                if diag.capped { ", capped" } else { "" },
                output.display()
            );
            Ok(true)
        }
        Command::Contraction {
            model,
            replicas,
            steps,
            record_every,
            equal_init,
            csv,
            json,
        } => {
            let bundle = resolve_model(&model, &file)?;
            let cfg = ContractionConfig {
                replicas: pick(replicas, file.replicas, 10_000),
                steps: pick(steps, file.steps, 150),
                record_every: pick(record_every, file.record_every, 2),
                seed,
                equal_init,
            };
            let out = with_thread_pool(threads, || run_contraction_experiment(&bundle, &cfg))??;
            print!("{}", report::render_contraction_text(&out));
            if let Some(path) = csv {
                write_text(&report::contraction_series_csv(&out.series), &path)?;
            }
            if let Some(path) = json {
                write_json(&out, &path)?;
            }
            Ok(out.passed)
        }
        Command::Certificate {
            model,
            epsilon,
            replicas,
            json,
            times_csv,
        } => {
            let bundle = resolve_model(&model, &file)?;
            let cfg = CertificateConfig {
                epsilon: pick(epsilon, file.epsilon, 0.1),
                replicas: pick(replicas, file.replicas, 10_000),
                seed,
            };
            let out =
                with_thread_pool(threads, || run_certificate_experiment(&bundle, &cfg))??;
            print!("{}", report::render_certificate_text(&out));
            if let Some(path) = times_csv {
                write_text(&report::coalescence_times_csv(&out.one_shot), &path)?;
            }
            if let Some(path) = json {
                write_json(&out, &path)?;
            }
            Ok(out.passed || !out.ci_usable)
        }
        Command::Collector {
            num_sites,
            epsilons,
            replicas,
            json,
        } => {
            let epsilons = if epsilons.is_empty() {
                vec![file.epsilon.unwrap_or(0.1)]
            } else {
                epsilons
            };
            let cfg = CollectorConfig {
                num_sites: pick_required(num_sites, file.num_sites, "num-sites")?,
                epsilons,
                replicas: pick(replicas, file.replicas, 100_000),
                seed,
            };
            let out = with_thread_pool(threads, || run_collector(&cfg))??;
            print!("{}", report::render_collector_text(&out));
            if let Some(path) = json {
                write_json(&out, &path)?;
            }
            Ok(out.passed)
        }
        Command::Oracle {
            model,
            levels,
            t_max,
            csv,
        } => {
            let bundle = resolve_model(&model, &file)?;
            let levels = pick(levels, file.levels, 17);
            let t_max = pick(t_max, file.steps, 100);
            let n = bundle.graph.num_sites();
            let series = discretized_chain_exact_tv(
                &bundle.params,
                &bundle.graph,
                levels,
                &vec![0.5 / levels as f64; n],
                &vec![1.0 - 0.5 / levels as f64; n],
                t_max,
            )?;
            println!(
                "discretized chain: {} states, tv[0]={}, tv[{}]={:.6}",
                levels.pow(n as u32),
                series.tv[0],
                t_max,
                series.tv[t_max as usize]
            );
            if let Some(path) = csv {
                write_text(&report::tv_series_csv(&series), &path)?;
            }
            Ok(true)
        }
        Command::Verify { draws, trials, json } => {
            let draws = pick(draws, file.draws, 1_000);
            let trials = pick(trials, file.trials, 100_000);
            let out = with_thread_pool(threads, || verify_suite(draws, trials, seed))?;
            print!("{}", report::render_verify_text(&out));
            if let Some(path) = json {
                write_json(&out, &path)?;
            }
            Ok(out.all_passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: a verdict failed");
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
