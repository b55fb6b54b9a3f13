mod common;

use common::*;
use fitted_mpfa::analytic::{bvn_cdf, norm_cdf, rainbow_price, AnalyticVariant, BvnQuery};
use fitted_mpfa::error_metrics::rel_l2_error;
use fitted_mpfa::fitted::assemble_fitted;
use fitted_mpfa::grid::{build_graded, build_uniform};
use fitted_mpfa::linalg::SolverKind;
use fitted_mpfa::model::VelocityPoint;
use fitted_mpfa::mpfa::{assemble_diffusion, assemble_diffusion_with, LinearSystem, SkipFaces, UniformTensor};
use fitted_mpfa::timestepper::{step, ThetaScheme, ThetaStepper};
use fitted_mpfa::upwind::{assemble_upwind1, assemble_upwind2, deriv_coeffs_3pt, UpwindOptions, UpwindOrder};
use fitted_mpfa::{ModelParams, Tensor2, TensorGrid};
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (0.05..1.2f64, 0.05..1.2f64, -0.95..0.95f64, 0.0..0.5f64, 0.5..150.0f64, 0.05..2.0f64)
        .prop_map(|(sigma1, sigma2, rho, r, strike, maturity)| ModelParams { sigma1, sigma2, rho, r, strike, maturity })
}

fn grid_strategy() -> impl Strategy<Value = TensorGrid> {
    (3usize..14, 1.0..400.0f64, 0.1..0.9f64, 0.0..4.0f64, any::<bool>()).prop_map(|(n, x_max, f, s, graded)| {
        let ax = if graded { build_graded(n, x_max, f * x_max, s) } else { build_uniform(n, x_max) }.unwrap();
        TensorGrid::new(ax.clone(), ax).unwrap()
    })
}

fn row_sums(sys: &LinearSystem, grid: &TensorGrid) -> Vec<f64> {
    let ones = vec![1.0; grid.unknowns()];
    let bc = vec![1.0; grid.node_count()];
    let a = sys.op.matvec(&ones).unwrap();
    let b = sys.coupling.matvec(&bc).unwrap();
    a.iter().zip(&b).map(|(x, y)| x + y).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn axis_invariants(g in grid_strategy()) {
        let ax = &g.axis_x;
        let n = ax.n();
        prop_assert_eq!(ax.node(0), 0.0);
        prop_assert_eq!(ax.node(n + 1), ax.x_max());
        for i in 1..=n {
            prop_assert!(ax.face_lo(i) < ax.node(i) && ax.node(i) < ax.face_hi(i));
            prop_assert!((ax.width(i) - (ax.face_hi(i) - ax.face_lo(i))).abs() <= 1e-12 * ax.x_max());
        }
        let total: f64 = (1..=n).map(|i| ax.width(i)).sum();
        prop_assert!((total - (ax.face_hi(n) - ax.face_lo(1))).abs() <= 1e-12 * ax.x_max());
    }

    #[test]
    fn measures_tile_the_interior(g in grid_strategy()) {
        let n = g.n();
        let side = g.axis_x.face_hi(n) - g.axis_x.face_lo(1);
        let total: f64 = g.measures().iter().sum();
        prop_assert!((total - side * side).abs() <= 1e-11 * side * side);
        prop_assert!(g.measures().iter().all(|m| *m > 0.0));
    }

    #[test]
    fn three_point_stencil_exact_for_quadratics(h1 in 1e-3..10.0f64, h2 in 1e-3..10.0f64, c in prop::array::uniform3(-5.0..5.0f64)) {
        let s = deriv_coeffs_3pt(h1, h2).unwrap();
        let q = |t: f64| c[0] + c[1] * t + c[2] * t * t;
        let got = s.apply(q(0.0), q(h1), q(h1 + h2));
        let scale = (c[1].abs() + c[2].abs() * (h1 + h2)).max(1.0);
        prop_assert!((got - c[1]).abs() <= 1e-10 * scale);
    }

    #[test]
    fn diffusion_annihilates_constants(p in params_strategy(), g in grid_strategy()) {
        let sys = assemble_diffusion(&g, &p).unwrap();
        let worst = row_sums(&sys, &g).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        prop_assert!(worst <= 1e-11 * sys.op.norm_inf());
    }

    #[test]
    fn diagonal_tensors_give_symmetric_operators(a in 0.1..10.0f64, b in 0.1..10.0f64, g in grid_strategy()) {
        let sys = assemble_diffusion_with(&g, &UniformTensor(Tensor2::new(a, 0.0, b)), SkipFaces::default()).unwrap();
        let m = to_dense(&sys.op);
        prop_assert!((&m - m.transpose()).amax() <= 1e-12 * m.amax());
    }

    #[test]
    fn uncorrelated_black_scholes_operator_is_symmetric(p in params_strategy(), g in grid_strategy()) {
        let p = ModelParams { rho: 0.0, ..p };
        let m = to_dense(&assemble_diffusion(&g, &p).unwrap().op);
        prop_assert!((&m - m.transpose()).amax() <= 1e-12 * m.amax());
    }

    #[test]
    fn donor_convection_row_sums_equal_divergence(p in params_strategy(), g in grid_strategy()) {
        let opts = UpwindOptions { velocity: VelocityPoint::Midpoint, ..Default::default() };
        let sys = assemble_upwind1(&g, &p, opts).unwrap();
        let omega = p.coefficients().omega;
        let sums = row_sums(&sys, &g);
        let scale = omega.abs().max(1e-3) * g.axis_x.x_max() * g.axis_x.x_max();
        for (s, m) in sums.iter().zip(g.measures()) {
            prop_assert!((s - omega * m).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn second_order_rows_reproduce_linear_convection(p in params_strategy(), n in 5usize..12) {
        // on a uniform grid the interior rows are exact for U = x + 2y
        let g = TensorGrid::uniform(n, 10.0, 10.0).unwrap();
        let sys = assemble_upwind2(&g, &p, UpwindOptions::default()).unwrap();
        let c = p.coefficients();
        let u: Vec<f64> = g.centers().map(|(x, y)| x + 2.0 * y).collect();
        let bc: Vec<f64> = (0..g.node_count()).map(|k| g.axis_x.node(k / (n + 2)) + 2.0 * g.axis_y.node(k % (n + 2))).collect();
        let a = sys.op.matvec(&u).unwrap();
        let b = sys.coupling.matvec(&bc).unwrap();
        for i in 2..n {
            for j in 2..n {
                let k = g.unknown_index(i, j);
                let (x, y) = (g.axis_x.node(i), g.axis_y.node(j));
                let want = g.cell_measure(i, j).unwrap() * (c.p_coef * x + 2.0 * c.q_coef * y + c.omega * (x + 2.0 * y));
                prop_assert!((a[k] + b[k] - want).abs() <= 1e-10 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn fitted_rows_away_from_axes_are_unchanged(p in params_strategy(), first in any::<bool>()) {
        let g = TensorGrid::uniform(6, 3.0 * p.strike, 3.0 * p.strike).unwrap();
        let opts = UpwindOptions::default();
        let (order, plain_conv) = if first {
            (UpwindOrder::First, assemble_upwind1(&g, &p, opts).unwrap())
        } else {
            (UpwindOrder::Second, assemble_upwind2(&g, &p, opts).unwrap())
        };
        let fitted = assemble_fitted(&g, &p, opts, order).unwrap();
        let plain = LinearSystem::sum(&[&assemble_diffusion(&g, &p).unwrap(), &plain_conv]).unwrap();
        for (fm, pm) in [(&fitted.op, &plain.op), (&fitted.coupling, &plain.coupling)] {
            let (fd, pd) = (to_dense(fm), to_dense(pm));
            for i in 2..=6 {
                for j in 2..=6 {
                    let r = g.unknown_index(i, j);
                    for c in 0..fd.ncols() {
                        prop_assert!((fd[(r, c)] - pd[(r, c)]).abs() <= 1e-13 * pd[(r, c)].abs().max(1e-300));
                    }
                }
            }
        }
    }

    #[test]
    fn bvn_monotone_and_symmetric(a in -4.0..4.0f64, b in -4.0..4.0f64, da in 0.0..1.0f64, rho in -0.99..0.99f64) {
        let f = |a, b, rho| bvn_cdf(BvnQuery { a, b, rho });
        prop_assert!(f(a + da, b, rho) >= f(a, b, rho) - 1e-15);
        prop_assert!(f(a, b + da, rho) >= f(a, b, rho) - 1e-15);
        prop_assert!((f(a, b, rho) - f(b, a, rho)).abs() <= 1e-15);
        prop_assert!((f(a, b, rho) + f(a, -b, -rho) - norm_cdf(a)).abs() <= 1e-14);
        let v = f(a, b, rho);
        prop_assert!((0.0..=norm_cdf(a).min(norm_cdf(b)) + 1e-15).contains(&v));
    }

    #[test]
    fn rainbow_symmetric_in_assets(p in params_strategy(), x in 0.2..3.0f64, y in 0.2..3.0f64) {
        let (x, y) = (x * p.strike, y * p.strike);
        let swapped = ModelParams { sigma1: p.sigma2, sigma2: p.sigma1, ..p };
        let a = rainbow_price(&p, x, y, p.maturity, AnalyticVariant::Standard);
        let b = rainbow_price(&swapped, y, x, p.maturity, AnalyticVariant::Standard);
        prop_assert!((a - b).abs() <= 1e-12 * p.strike);
    }

    #[test]
    fn rainbow_decreasing_and_convex_in_strike(p in params_strategy(), x in 0.3..2.0f64, y in 0.3..2.0f64, dk in 0.02..0.3f64) {
        let k = p.strike;
        let price = |strike: f64| rainbow_price(&ModelParams { strike, ..p }, x * k, y * k, p.maturity, AnalyticVariant::Standard);
        let (lo, mid, hi) = (price(k * (1.0 - dk)), price(k), price(k * (1.0 + dk)));
        let tol = 1e-10 * k;
        prop_assert!(lo >= mid - tol && mid >= hi - tol);
        prop_assert!(lo + hi - 2.0 * mid >= -tol);
    }

    #[test]
    fn relative_error_scale_invariant(g in grid_strategy(), c in 0.01..100.0f64, seed in any::<u64>()) {
        let n2 = g.unknowns();
        let mut s = seed;
        let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 11) as f64 / (1u64 << 53) as f64 };
        let u: Vec<f64> = (0..n2).map(|_| next()).collect();
        let v: Vec<f64> = (0..n2).map(|_| 0.5 + next()).collect();
        let (cu, cv): (Vec<f64>, Vec<f64>) = (u.iter().map(|a| c * a).collect(), v.iter().map(|a| c * a).collect());
        let e1 = rel_l2_error(&u, &v, &g).unwrap();
        let e2 = rel_l2_error(&cu, &cv, &g).unwrap();
        prop_assert!((e1.rel_l2 - e2.rel_l2).abs() <= 1e-12 * e1.rel_l2.max(1e-300));
        prop_assert!((c * e1.max_abs - e2.max_abs).abs() <= 1e-12 * e2.max_abs.max(1e-300));
    }

    #[test]
    fn stepper_reuse_matches_fresh_steps(theta in 0.0..=1.0f64, dtau in 1e-3..0.1f64, n in 3usize..6) {
        let g = TensorGrid::uniform(n, 300.0, 300.0).unwrap();
        let p = equity(0.05);
        let sd = fitted_mpfa::timestepper::SemiDiscrete::new(
            fitted_mpfa::timestepper::Scheme::MpfaUp1, &g, &p, UpwindOptions::default()).unwrap();
        let ts = ThetaScheme::with_steps(theta, 3, 3.0 * dtau).unwrap();
        let stepper = ThetaStepper::new(&ts, &sd.a, SolverKind::Auto).unwrap();
        let f = vec![0.5; g.unknowns()];
        let mut reused: Vec<f64> = g.centers().map(|(x, y)| (x.max(y) - 100.0).max(0.0)).collect();
        let mut fresh = reused.clone();
        for _ in 0..3 {
            reused = stepper.step(&reused, &f, &f).unwrap().0;
            fresh = step(&ts, &sd.a, &fresh, &f, &f).unwrap();
        }
        for (a, b) in reused.iter().zip(&fresh) {
            prop_assert_eq!(a, b);
        }
    }
}
