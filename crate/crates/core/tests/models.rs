use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use semilab::analysis::fit::decay_rate_fit;
use semilab::error::Error;
use semilab::models::*;
use semilab::phase_symbols::Expr;

fn harmonic() -> Curve<f64> {
    Curve::new("x^2", |x| [x * x, 2.0 * x, 2.0])
}

fn bump_profile() -> Curve<f64> {
    Curve::from_expr(Expr::c(2.0) + Expr::y(0).cos()).unwrap()
}

fn full_circle() -> Domain1D<f64> {
    Domain1D::Circle { start: -PI, length: TAU }
}

fn even_about_zero() -> SolverOptions<f64> {
    SolverOptions {
        parity: Some(Parity { center: 0.0, even: true }),
        ..SolverOptions::default()
    }
}

fn node_index(entry: &FamilyEntry<f64>, x: f64) -> usize {
    entry
        .nodes
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().partial_cmp(&(b.1 - x).abs()).unwrap())
        .unwrap()
        .0
}

#[test]
fn harmonic_ground_state_matches_gaussian() {
    for h in [0.1, 0.05] {
        let prob = SchrodingerProblem1D::new(Domain1D::Interval { a: -8.0, b: 8.0 }, harmonic(), h, vec![h]).unwrap();
        let sol = solve_1d_eigen(&prob, h, &SolverOptions::default()).unwrap();
        assert!((sol.energy - h).abs() / h < 1e-6, "E = {} at h = {h}", sol.energy);
        let amp = (PI * h).powf(-0.25);
        for (x, v) in sol.nodes.iter().zip(&sol.values) {
            assert!((v - amp * (-x * x / (2.0 * h)).exp()).abs() < 1e-5, "x = {x}");
        }
    }
}

#[test]
fn free_circle_gives_nearest_plane_wave_energy() {
    let h = 0.13;
    let prob = SchrodingerProblem1D::new(Domain1D::Circle { start: 0.0, length: TAU }, Curve::constant(0.0), 1.0, vec![h]).unwrap();
    let sol = solve_1d_eigen(&prob, h, &SolverOptions::default()).unwrap();
    let expected = (8.0 * h) * (8.0 * h);
    assert!((sol.energy - expected).abs() < 1e-8, "{} vs {expected}", sol.energy);
    let (mut c, mut s) = (0.0, 0.0);
    for (x, v) in sol.nodes.iter().zip(&sol.values) {
        c += v * (8.0 * x).cos() * sol.dx / PI;
        s += v * (8.0 * x).sin() * sol.dx / PI;
    }
    for (x, v) in sol.nodes.iter().zip(&sol.values) {
        assert!((v - c * (8.0 * x).cos() - s * (8.0 * x).sin()).abs() < 1e-6);
    }
}

#[test]
fn harmonic_log_amplitude_decays_at_agmon_rate() {
    let agmon = 3f64.sqrt() - 0.5 * (2.0 + 3f64.sqrt()).ln();
    assert!((agmon - 1.0737).abs() < 2e-4);
    let hs: Vec<f64> = [10usize, 20, 40, 80].iter().map(|n| 1.0 / (2 * n + 1) as f64).collect();
    let prob = SchrodingerProblem1D::new(Domain1D::Interval { a: -4.0, b: 4.0 }, harmonic(), 1.0, hs.clone()).unwrap();
    let fam = schrodinger_family(&prob, &SolverOptions::default()).unwrap();
    let logs: Vec<Option<f64>> = fam.entries.iter().map(|e| Some(e.log_amplitude[node_index(e, 2.0)])).collect();
    for e in &fam.entries {
        assert!((e.energy - 1.0).abs() < 1e-6);
    }
    let fit = decay_rate_fit(&hs, &logs, None).unwrap();
    assert!((fit.rate - agmon).abs() < 0.05 * agmon, "rate {} vs {agmon}", fit.rate);
}

#[test]
fn warped_turning_points_solve_profile_equation() {
    let wp = WarpedProduct::new(bump_profile(), 1.0, full_circle(), vec![0.05]).unwrap();
    let turning = (2f64.sqrt() - 2.0).acos();
    assert!((turning - 2.198).abs() < 2e-3);
    let v = wp.potential();
    assert!((v.value(turning) - 0.5).abs() < 1e-12);
    assert!((v.value(-turning) - 0.5).abs() < 1e-12);
    assert!(v.value(0.0) < 0.5 && v.value(PI) > 0.5);
}

#[test]
fn warped_family_invariants() {
    let hs = vec![0.05, 0.04, 0.03, 0.025, 0.02];
    let wp = WarpedProduct::new(bump_profile(), 1.0, full_circle(), hs.clone()).unwrap();
    let fam = warped_eigenfamily(&wp, 0.5, &even_about_zero()).unwrap();
    assert_eq!(fam.entries.len(), hs.len());
    for (e, h) in fam.entries.iter().zip(&hs) {
        assert_eq!(e.h, *h);
        assert!((e.weighted_norm_sq() - 1.0).abs() < 1e-12);
        assert!(e.residual < 1e-8, "residual {}", e.residual);
        assert!(e.reconstruction_mismatch < 1e-3, "mismatch {}", e.reconstruction_mismatch);
        let fiber = e.fiber.as_ref().unwrap();
        assert!(fiber.drift <= h / 2.0 + 1e-15);
        assert!((fiber.lambda_h - fiber.m as f64 * h).abs() < 1e-15);
        for ((v, w), x) in e.values.iter().zip(&e.weight).zip(&e.nodes) {
            assert_eq!(v.im, 0.0);
            assert!((w - (2.0 + x.cos())).abs() < 1e-14);
        }
        let i = node_index(e, -PI);
        assert!((e.log_amplitude[i] - e.values[i].re.abs().ln()).abs() < 1e-3);
    }
    let json = fam.summary_json();
    assert_eq!(json["meta"]["kind"], "warped");
    assert_eq!(json["entries"].as_array().unwrap().len(), hs.len());
    let csv = fam.entry_csv(0);
    assert!(csv.starts_with("x,re_v,im_v,log_abs_v\n"));
    assert_eq!(csv.lines().count(), fam.entries[0].nodes.len() + 1);
}

#[test]
fn odd_states_vanish_on_the_symmetry_circle() {
    let wp = WarpedProduct::new(bump_profile(), 1.0, full_circle(), vec![0.04]).unwrap();
    let opts = SolverOptions {
        parity: Some(Parity { center: 0.0, even: false }),
        ..SolverOptions::default()
    };
    let fam = warped_eigenfamily(&wp, 0.5, &opts).unwrap();
    let e = &fam.entries[0];
    let i = node_index(e, -PI);
    let peak = e.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    assert!(e.values[i].norm() < 1e-12 * peak);
}

#[test]
fn parity_requires_a_symmetric_potential() {
    let v = Curve::new("x^2 + x^3/10", |x: f64| [x * x + x.powi(3) / 10.0, 2.0 * x + 0.3 * x * x, 2.0 + 0.6 * x]);
    let prob = SchrodingerProblem1D::new(Domain1D::Interval { a: -4.0, b: 4.0 }, v, 1.0, vec![0.1]).unwrap();
    let err = solve_1d_eigen(&prob, 0.1, &even_about_zero()).unwrap_err();
    assert!(matches!(err, Error::Domain(_)), "{err}");
}

#[test]
fn warped_grid_convergence() {
    let wp = WarpedProduct::new(bump_profile(), 1.0, full_circle(), vec![0.04]).unwrap();
    let coarse_opts = SolverOptions {
        points_per_h: Some(20.0),
        ..even_about_zero()
    };
    let coarse = warped_eigenfamily(&wp, 0.5, &coarse_opts).unwrap();
    let fine_opts = SolverOptions {
        points_per_h: Some(40.0),
        ..even_about_zero()
    };
    let fine = warped_eigenfamily(&wp, 0.5, &fine_opts).unwrap();
    let (a, b) = (&coarse.entries[0], &fine.entries[0]);
    assert_eq!(2 * a.nodes.len(), b.nodes.len());
    assert!((a.energy - b.energy).abs() < 1e-8, "{} vs {}", a.energy, b.energy);
    for x in [0.0, 1.0, 2.5, -PI] {
        let (i, j) = (node_index(a, x), node_index(b, x));
        assert!((a.nodes[i] - b.nodes[j]).abs() < 1e-12);
        assert!((a.log_amplitude[i] - b.log_amplitude[j]).abs() < 1e-4, "x = {x}");
    }
}

#[test]
fn product_metric_reduces_to_flat_torus() {
    let h = 0.07;
    let wp = WarpedProduct::new(Curve::constant(1.0), 1.0, Domain1D::Circle { start: 0.0, length: TAU }, vec![h]).unwrap();
    let opts = SolverOptions { window: Some(1.0), ..SolverOptions::default() };
    let fam = warped_eigenfamily(&wp, 2.0, &opts).unwrap();
    let e = &fam.entries[0];
    let lh = e.fiber.as_ref().unwrap().lambda_h;
    let nearest = (0..40)
        .map(|k| lh * lh + (k as f64 * h).powi(2))
        .min_by(|a, b| (a - 2.0).abs().partial_cmp(&(b - 2.0).abs()).unwrap())
        .unwrap();
    assert!((e.energy - nearest).abs() < 1e-8, "{} vs {nearest}", e.energy);
}

#[test]
fn profile_must_stay_positive() {
    let f = Curve::from_expr(Expr::c(0.5) + Expr::y(0).cos()).unwrap();
    assert!(matches!(WarpedProduct::new(f, 1.0, full_circle(), vec![0.1]), Err(Error::Domain(_))));
}

#[test]
fn degenerate_energy_is_rejected() {
    let prob = SchrodingerProblem1D::new(Domain1D::Interval { a: -4.0, b: 4.0 }, harmonic(), 0.0, vec![0.1]).unwrap();
    assert!(matches!(schrodinger_family(&prob, &SolverOptions::default()), Err(Error::Domain(_))));
}

#[test]
fn narrow_window_is_a_numerical_failure() {
    let prob = SchrodingerProblem1D::new(Domain1D::Interval { a: -8.0, b: 8.0 }, harmonic(), 0.15, vec![0.1]).unwrap();
    let opts = SolverOptions { window: Some(1e-3), ..SolverOptions::default() };
    match solve_1d_eigen(&prob, 0.1, &opts) {
        Err(Error::Numerical { stage, .. }) => assert_eq!(stage, "eigen-solve"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn energy_above_barrier_skips_reconstruction_with_notice() {
    let v = Curve::new("cos x", |x: f64| [x.cos(), -x.sin(), -x.cos()]);
    let prob = SchrodingerProblem1D::new(Domain1D::Circle { start: 0.0, length: TAU }, v, 2.0, vec![0.1]).unwrap();
    let sol = solve_1d_eigen(&prob, 0.1, &SolverOptions::default()).unwrap();
    assert!(sol.reconstruction.notice.is_some());
    assert!(sol.reconstruction.intervals.is_empty());
}

#[test]
fn torus_plane_waves() {
    let t = torus_joint_eigen(&[0.5, 0.25], 0.05).unwrap();
    assert_eq!(t.modes, vec![10, 5]);
    assert_eq!(t.joint_eigenvalues, vec![0.25, 0.0625]);
    let amp = 1.0 / TAU;
    for v in &t.values {
        assert!((v.norm() - amp).abs() < 1e-14);
    }
    assert!((t.grid.norm_sq(&t.values) - 1.0).abs() < 1e-12);
    for ell in [1.0, TAU] {
        assert!((t.line_norm(ell) - ell.sqrt() * amp).abs() < 1e-15);
    }
    assert!(matches!(torus_joint_eigen(&[0.5], 0.3), Err(Error::Domain(_))));
    let fam = torus_family(1.0f64, &[0.1, 0.05, 0.025]).unwrap();
    for e in &fam.entries {
        assert!((e.weighted_norm_sq() - 1.0).abs() < 1e-12);
        assert_eq!(e.energy, 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn warped_operator_is_weighted_symmetric(a in 1.5f64..3.0, b in 0.1f64..1.0, lambda in 0.5f64..1.5, seed in 0u64..1000) {
        let f = Curve::from_expr(Expr::c(a) + Expr::c(b) * Expr::y(0).cos()).unwrap();
        let wp = WarpedProduct::new(f, lambda, full_circle(), vec![0.1]).unwrap();
        let op = WarpedOperator::new(&wp, 0.1, 0.01).unwrap();
        let n = op.half_weight.len();
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let u: Vec<f64> = (0..n).map(|_| next()).collect();
        let w: Vec<f64> = (0..n).map(|_| next()).collect();
        let lhs = op.weighted_inner(&op.apply(&u), &w);
        let rhs = op.weighted_inner(&u, &op.apply(&w));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
    }
}
