//! Human-readable report rendering and CSV emission. Everything here is a
//! pure function of the outcome structs, so repeated runs with the same
//! seed produce byte-identical artifacts.

use std::fmt::Write as _;

use mixbound::coupling::OneShotReport;
use mixbound::oracle::TvSeries;
use mixbound::sampler::ChainTrace;

use crate::experiments::{
    BoundBundle, CertificateOutcome, CollectorOutcome, ContractionOutcome, ContractionRow,
};
use crate::verify::VerifyReport;

pub fn render_bound_text(bundle: &BoundBundle) -> String {
    let mut out = String::new();
    let tv = &bundle.tv;
    let _ = writeln!(
        out,
        "model: N={} sites, n_max={}, gamma={}, sigma={}",
        bundle.model.num_sites, bundle.model.n_max, bundle.model.gamma, bundle.model.sigma
    );
    let _ = writeln!(out, "target epsilon: {}", bundle.epsilon);
    let _ = writeln!(
        out,
        "wasserstein theta(eps):   {:.4} iterations",
        bundle.wasserstein_theta
    );
    let _ = writeln!(out, "tv certificate:");
    let _ = writeln!(out, "  M (one-shot budget):    {}", tv.m);
    let _ = writeln!(out, "  epsilon~ (miss budget): {:.6e}", tv.epsilon_tilde);
    let _ = writeln!(out, "  zeta:                   {:.6}", tv.zeta);
    let _ = writeln!(out, "  sigma~^2:               {:.6}", tv.sigma_tilde_sq);
    let _ = writeln!(out, "  omega:                  {:.6e}", tv.omega);
    let _ = writeln!(out, "  theta(omega^2):         {:.4}", tv.theta_wasserstein);
    let _ = writeln!(out, "  tau = ceil(theta):      {}", tv.tau);
    let _ = writeln!(
        out,
        "  total time:             {:.4} (integer schedule tau + M = {})",
        tv.total_time,
        tv.tau + tv.m
    );
    if tv.zeta_safe_warning {
        let _ = writeln!(
            out,
            "  warning: attainable conditional means exceed zeta (negative observations)"
        );
    }
    out
}

pub fn render_certificate_text(outcome: &CertificateOutcome) -> String {
    let mut out = String::new();
    let one_shot = &outcome.one_shot;
    let _ = writeln!(
        out,
        "certificate run: epsilon={}, replicas={}, seed={}",
        one_shot.epsilon, one_shot.replicas, outcome.seed
    );
    let _ = writeln!(
        out,
        "schedule: tau={} synchronous + M={} maximal = {} steps",
        one_shot.tau,
        one_shot.m,
        one_shot.tau + one_shot.m
    );
    let _ = writeln!(
        out,
        "noncoalesced: {}/{} = {:.5}",
        one_shot.noncoalesced_count, one_shot.replicas, one_shot.noncoalesced_fraction
    );
    let _ = writeln!(
        out,
        "coupon time exceeded in M phase: {}",
        one_shot.coupon_time_exceeded_count
    );
    match (outcome.upper95, outcome.epsilon_compliant) {
        (Some(upper), Some(ok)) => {
            let _ = writeln!(out, "95% upper confidence limit: {upper:.5}");
            let _ = writeln!(
                out,
                "verdict: {}",
                if ok {
                    "PASS (upper limit within epsilon)"
                } else {
                    "FAIL (upper limit above epsilon)"
                }
            );
        }
        _ => {
            let _ = writeln!(out, "verdict: confidence interval unusable (need >= 2 replicas)");
        }
    }
    out
}

pub fn render_contraction_text(outcome: &ContractionOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "contraction run: replicas={}, steps={}, seed={}",
        outcome.replicas, outcome.steps, outcome.seed
    );
    let _ = writeln!(out, "theoretical rate: {:.6}", outcome.theory_rate);
    match &outcome.fitted {
        Some(fit) => {
            let _ = writeln!(
                out,
                "fitted rate: {:.6} (se {:.2e}, {} points)",
                fit.rate, fit.rate_se, fit.points_used
            );
        }
        None => {
            let _ = writeln!(out, "fitted rate: skipped (series at zero)");
        }
    }
    let _ = writeln!(out, "verdict: {}", outcome.verdict);
    out
}

pub fn render_collector_text(outcome: &CollectorOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "coupon collector: N={}, replicas={}, seed={}",
        outcome.num_sites, outcome.replicas, outcome.seed
    );
    for e in &outcome.entries {
        let _ = writeln!(
            out,
            "  eps={}: M={}, exact tail={:.6}, simulated={:.6} ({}, {})",
            e.epsilon,
            e.m,
            e.exact_tail,
            e.simulated_tail,
            if e.exact_le_half_epsilon {
                "<= eps/2"
            } else {
                "ABOVE eps/2"
            },
            if e.within_3se { "within 3 SE" } else { "OUTSIDE 3 SE" },
        );
    }
    let _ = writeln!(out, "verdict: {}", if outcome.passed { "pass" } else { "fail" });
    out
}

pub fn render_verify_text(report: &VerifyReport) -> String {
    let mut out = String::new();
    if report.skipped {
        let _ = writeln!(out, "verify: skipped (zero iterations configured)");
        return out;
    }
    for suite in &report.suites {
        let _ = writeln!(
            out,
            "{:<40} {:>4} cases  {}",
            suite.name,
            suite.cases,
            if suite.passed {
                "pass".to_string()
            } else {
                format!(
                    "FAIL ({} failures; first: {})",
                    suite.failures,
                    suite.first_failure.as_deref().unwrap_or("?")
                )
            }
        );
    }
    let _ = writeln!(
        out,
        "verify: {}",
        if report.all_passed { "all suites passed" } else { "FAILURES" }
    );
    out
}

pub fn contraction_series_csv(series: &[ContractionRow]) -> String {
    let mut out = String::from("t,mean_d,se_d,mean_dhat,se_dhat,frac_neq,se_frac\n");
    for r in series {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t, r.mean_d, r.se_d, r.mean_dhat, r.se_dhat, r.frac_neq, r.se_frac
        );
    }
    out
}

pub fn coalescence_times_csv(report: &OneShotReport) -> String {
    let mut out = String::from("replica,coalesced,time\n");
    for (replica, time) in report.coalescence_times.iter().enumerate() {
        match time {
            Some(t) => {
                let _ = writeln!(out, "{replica},true,{t}");
            }
            None => {
                let _ = writeln!(out, "{replica},false,");
            }
        }
    }
    out
}

pub fn tv_series_csv(series: &TvSeries) -> String {
    let mut out = String::from("t,tv\n");
    for (t, tv) in series.t.iter().zip(&series.tv) {
        let _ = writeln!(out, "{t},{tv}");
    }
    out
}

pub fn trace_csv(trace: &ChainTrace) -> String {
    let n = trace.snapshots.first().map_or(0, |(_, x)| x.len());
    let mut out = String::from("t");
    for i in 0..n {
        let _ = write!(out, ",x_{i}");
    }
    out.push('\n');
    for (t, x) in &trace.snapshots {
        let _ = write!(out, "{t}");
        for v in x {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
