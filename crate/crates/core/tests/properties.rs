//! Property-based invariants across modules.

use proptest::prelude::*;

use mixbound::bounds::wasserstein_mixing_time;
use mixbound::graph::{build_custom_graph, build_grid_graph, GridScheme};
use mixbound::metrics::{taxicab_l1, weighted_l1};
use mixbound::model::{full_conditional, log_density_unnormalized, thermo_constants, ModelParams};
use mixbound::oracle::coupon_collector_tail;
use mixbound::truncated::TruncatedUnitNormal;

proptest! {
    #[test]
    fn grid_degree_sum_and_edge_count(w in 1usize..12, h in 1usize..12) {
        let g = build_grid_graph(w, h, GridScheme::N4).unwrap();
        let degree_sum: usize = g.degrees().iter().sum();
        prop_assert_eq!(degree_sum, 2 * g.num_edges());
        prop_assert_eq!(g.num_edges(), w * (h - 1) + h * (w - 1));
    }

    #[test]
    fn grid_rebuilds_from_edge_list(w in 1usize..10, h in 1usize..10, n8 in any::<bool>()) {
        let scheme = if n8 { GridScheme::N8 } else { GridScheme::N4 };
        let g = build_grid_graph(w, h, scheme).unwrap();
        let rebuilt = build_custom_graph(&g.edges(), g.num_sites()).unwrap();
        prop_assert_eq!(g.degrees(), rebuilt.degrees());
    }

    #[test]
    fn weighted_l1_is_a_pseudometric(
        x in prop::collection::vec(0.0f64..=1.0, 9),
        y in prop::collection::vec(0.0f64..=1.0, 9),
        z in prop::collection::vec(0.0f64..=1.0, 9),
    ) {
        let g = build_grid_graph(3, 3, GridScheme::N4).unwrap();
        let dxy = weighted_l1(&x, &y, &g).unwrap();
        let dyx = weighted_l1(&y, &x, &g).unwrap();
        prop_assert_eq!(dxy, dyx);
        prop_assert!(weighted_l1(&x, &x, &g).unwrap() == 0.0);
        let dxz = weighted_l1(&x, &z, &g).unwrap();
        let dzy = weighted_l1(&z, &y, &g).unwrap();
        prop_assert!(dxy <= dxz + dzy + 1e-12);
        // degree sandwich against the taxicab metric
        let taxi = taxicab_l1(&x, &y).unwrap();
        prop_assert!(g.n_min() as f64 * taxi <= dxy + 1e-12);
        prop_assert!(dxy <= g.n_max() as f64 * taxi + 1e-12);
    }

    #[test]
    fn quantile_cdf_roundtrip(
        mean in -3.0f64..4.0,
        variance in 1e-4f64..10.0,
        u in 1e-9f64..=0.999_999_999,
    ) {
        let d = TruncatedUnitNormal::new(mean, variance).unwrap();
        let x = d.quantile(u).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!((d.cdf(x) - u).abs() <= 1e-9, "m={} v={} u={} x={}", mean, variance, u, x);
    }

    #[test]
    fn quantile_is_monotone(
        mean in -2.0f64..3.0,
        variance in 1e-3f64..5.0,
        u1 in 1e-6f64..0.999_999,
        gap in 1e-6f64..0.4,
    ) {
        let u2 = (u1 + gap).min(0.999_999_9);
        let d = TruncatedUnitNormal::new(mean, variance).unwrap();
        prop_assert!(d.quantile(u1).unwrap() <= d.quantile(u2).unwrap());
    }

    #[test]
    fn conditional_mean_is_stationary_point(
        y in prop::collection::vec(-1.0f64..2.0, 4),
        x in prop::collection::vec(0.0f64..=1.0, 4),
        gamma in 0.0f64..2.0,
        sigma in 0.2f64..2.0,
        site in 0usize..4,
    ) {
        // The conditional mean solves d/dx_i log posterior = 0 when it is
        // unconstrained; verify by central finite difference where the
        // stencil stays inside the support.
        let g = build_grid_graph(2, 2, GridScheme::N4).unwrap();
        let params = ModelParams::new(gamma, sigma, y).unwrap();
        let fc = full_conditional(&params, &g, &x, site).unwrap();
        let h = 1e-5;
        if fc.mean > h && fc.mean < 1.0 - h {
            let mut lo = x.clone();
            let mut hi = x.clone();
            lo[site] = fc.mean - h;
            hi[site] = fc.mean + h;
            let f_lo = log_density_unnormalized(&params, &g, &lo, true).unwrap();
            let f_hi = log_density_unnormalized(&params, &g, &hi, true).unwrap();
            let derivative = (f_hi - f_lo) / (2.0 * h);
            prop_assert!(derivative.abs() < 1e-6, "derivative {}", derivative);
        }
    }

    #[test]
    fn likelihood_term_depends_only_on_residual(
        y in prop::collection::vec(-1.0f64..2.0, 4),
        x in prop::collection::vec(0.0f64..=1.0, 4),
        gamma in 0.0f64..2.0,
        sigma in 0.2f64..2.0,
    ) {
        let g = build_grid_graph(2, 2, GridScheme::N4).unwrap();
        let params = ModelParams::new(gamma, sigma, y.clone()).unwrap();
        let with = log_density_unnormalized(&params, &g, &x, true).unwrap();
        let without = log_density_unnormalized(&params, &g, &x, false).unwrap();
        let residual: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let expected = -residual / (2.0 * sigma * sigma);
        prop_assert!((with - without - expected).abs() < 1e-10);
    }

    #[test]
    fn thermo_constants_permutation_invariant(
        y in prop::collection::vec(-1.0f64..2.0, 4),
        gamma in 0.0f64..2.0,
        sigma in 0.2f64..2.0,
        swap in 0usize..4,
    ) {
        // relabel sites by a transposition (0 <-> swap) applied to both the
        // edges and the observations
        let g = build_grid_graph(2, 2, GridScheme::N4).unwrap();
        let perm = |i: usize| if i == 0 { swap } else if i == swap { 0 } else { i };
        let edges: Vec<(usize, usize)> = g.edges().iter().map(|&(a, b)| (perm(a), perm(b))).collect();
        let g2 = build_custom_graph(&edges, 4).unwrap();
        let mut y2 = y.clone();
        y2.swap(0, swap);
        let tc1 = thermo_constants(&ModelParams::new(gamma, sigma, y).unwrap(), &g).unwrap();
        let tc2 = thermo_constants(&ModelParams::new(gamma, sigma, y2).unwrap(), &g2).unwrap();
        prop_assert!((tc1.zeta - tc2.zeta).abs() < 1e-12);
        prop_assert!((tc1.sigma_tilde - tc2.sigma_tilde).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_time_zero_iff_diameter(
        n in 1usize..30,
        n_max in 1usize..8,
        gamma in 0.0f64..3.0,
        sigma in 0.1f64..3.0,
        eps in 0.01f64..500.0,
    ) {
        let t = wasserstein_mixing_time(n, n_max, gamma, sigma, eps).unwrap();
        let diameter = (n_max * n) as f64;
        if eps >= diameter {
            prop_assert_eq!(t, 0.0);
        } else {
            prop_assert!(t > 0.0);
        }
    }

    #[test]
    fn coupon_budget_meets_its_guarantee(n in 1usize..200, eps_milli in 1u64..1999) {
        let eps = eps_milli as f64 / 1000.0;
        let m = mixbound::bounds::coupon_collector_m(n, eps).unwrap();
        let tail = coupon_collector_tail(n, m).unwrap();
        prop_assert!(tail <= eps / 2.0 + 1e-12, "N={} eps={}: tail {} > {}", n, eps, tail, eps / 2.0);
    }
}
