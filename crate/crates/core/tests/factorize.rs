use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semilab::factorize::*;
use semilab::microlocal::quantize_apply;
use semilab::phase_symbols::*;
use semilab::Error;

type C = Complex<f64>;

fn field(e: Expr) -> FieldRef<f64> {
    Arc::new(ExprField::new(e, 1).unwrap())
}

fn q_model() -> SymbolExpansion<f64> {
    SymbolExpansion::from_exprs(0, 1, vec![Expr::xi(0) * Expr::xi(0) + Expr::c(1.0)]).unwrap()
}

fn sample_grid() -> PhaseGrid<f64> {
    PhaseGrid::uniform(vec![0.0, -3.0], vec![TAU, 3.0], 13).unwrap()
}

fn sin_b() -> FieldRef<f64> {
    field(Expr::c(2.0) + Expr::y(0).sin())
}

fn pool(count: usize) -> TestFunctionPool<f64> {
    TestFunctionPool {
        seed: 11,
        count,
        xi_max: 2.0,
        width: (0.15, 0.25),
        center_lo: vec![2.6],
        center_hi: vec![3.7],
    }
}

fn circle() -> PeriodicDomain<f64> {
    PeriodicDomain { origin: vec![0.0], lengths: vec![TAU] }
}

#[test]
fn a_minus_one_closed_form() {
    let f = factor_symbols(&q_model(), sin_b(), 2, &sample_grid()).unwrap();
    for &(x, xi) in &[(0.2, -2.0), (1.7, 0.3), (4.0, 1.9), (5.9, -0.7)] {
        let pt = PhasePoint::new(vec![x], vec![xi]).unwrap();
        let v = f.term_values(&pt, 0.05).unwrap();
        let d = C::new(xi, -(2.0 + f64::sin(x)));
        let b = 2.0 + f64::sin(x);
        assert!((v[0] - (xi * xi + 1.0) / d).norm() < 1e-14);
        let expected = f64::cos(x) * C::new(xi * xi - 1.0, -2.0 * b * xi) / (d * d * d);
        assert!((v[1] - expected).norm() < 1e-13, "{:?} vs {expected}", v[1]);
    }
}

#[test]
fn a_minus_one_operator_oracle() {
    let f = factor_symbols(&q_model(), sin_b(), 1, &sample_grid()).unwrap();
    let chi1 = plateau_cutoff(vec![0.8], vec![5.5], 0.5);
    let chi2 = plateau_cutoff(vec![1.5], vec![4.8], 0.5);
    let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let fits = residual_order_fit(&f, &circle(), &chi1, &chi2, &hs, &pool(2), &[0, 1]).unwrap();
    assert!(fits[0].slope.unwrap() > 0.8 && fits[0].slope.unwrap() < 1.3);
    assert!(fits[1].slope.unwrap() >= 1.7);
    for (r0, r1) in fits[0].trace.iter().zip(&fits[1].trace) {
        assert!(r1.1 < r0.1);
    }
}

#[test]
fn exact_factor_is_floor_limited() {
    let q = SymbolExpansion::from_exprs(0, 1, vec![Expr::xi(0) - Expr::Const(0.0, 1.5)]).unwrap();
    let f = factor_symbols(&q, field(Expr::c(1.5)), 2, &sample_grid()).unwrap();
    let chi1 = plateau_cutoff(vec![0.8], vec![5.5], 0.5);
    let chi2 = plateau_cutoff(vec![1.5], vec![4.8], 0.5);
    let fits = residual_order_fit(&f, &circle(), &chi1, &chi2, &[0.1, 0.05, 0.025], &pool(2), &[0, 2]).unwrap();
    for fit in fits {
        assert!(fit.floor_limited);
        assert!(fit.trace.iter().zip(&fit.floor).all(|((_, r), fl)| r <= fl));
    }
}

#[test]
fn cutoffs_must_nest() {
    let f = factor_symbols(&q_model(), sin_b(), 1, &sample_grid()).unwrap();
    let chi1 = plateau_cutoff(vec![1.5], vec![4.8], 0.5);
    let chi2 = plateau_cutoff(vec![0.8], vec![5.5], 0.5);
    let r = residual_order_fit(&f, &circle(), &chi1, &chi2, &[0.1], &pool(1), &[1]);
    assert!(matches!(r, Err(Error::Precondition(_))));
}

#[test]
fn truncation_beyond_computed_order() {
    let f = factor_symbols(&q_model(), sin_b(), 1, &sample_grid()).unwrap();
    let chi = plateau_cutoff(vec![0.8], vec![5.5], 0.5);
    let r = residual_order_fit(&f, &circle(), &chi, &chi, &[0.1], &pool(1), &[2]);
    assert!(matches!(r, Err(Error::Capability(_))));
}

#[test]
fn b_choice_is_not_unique() {
    let chi1 = plateau_cutoff(vec![0.8], vec![5.5], 0.5);
    let chi2 = plateau_cutoff(vec![1.5], vec![4.8], 0.5);
    let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let f1 = factor_symbols(&q_model(), sin_b(), 2, &sample_grid()).unwrap();
    let f2 = factor_symbols(&q_model(), field(Expr::c(3.0) + Expr::y(0).cos()), 2, &sample_grid()).unwrap();
    let pt = PhasePoint::new(vec![1.0], vec![0.5]).unwrap();
    let a1 = f1.term_values(&pt, 0.1).unwrap();
    let a2 = f2.term_values(&pt, 0.1).unwrap();
    assert!((a1[0] - a2[0]).norm() > 0.05);
    for f in [&f1, &f2] {
        let fit = &residual_order_fit(f, &circle(), &chi1, &chi2, &hs, &pool(2), &[2]).unwrap()[0];
        assert!(fit.slope.unwrap() >= 2.7, "{fit:?}");
    }
}

#[test]
fn too_few_derivatives() {
    let b: FieldRef<f64> = Arc::new(DerivedField::new(1, 1, "B", |_pt: &PhasePoint<f64>, _h, r| {
        let space = JetSpace::get(2, r);
        Ok(Jet::constant(&space, r, C::new(2.0, 0.0)))
    }));
    assert!(matches!(factor_symbols(&q_model(), b, 2, &sample_grid()), Err(Error::Capability(_))));
}

#[test]
fn parametrix_of_shifted_momentum() {
    let a = SymbolExpansion::from_exprs(0, 1, vec![Expr::xi(0) + Expr::Const(0.0, 1.0)])
        .unwrap()
        .with_region(PhaseBox::new(vec![0.0, -5.0], vec![TAU, 5.0]).unwrap())
        .unwrap();
    let g = PhaseGrid::uniform(vec![0.0, -5.0], vec![TAU, 5.0], 21).unwrap();
    let l = left_parametrix(&a, 2, &g).unwrap();
    for &xi in &[-5.0, -1.0, 0.0, 2.5, 5.0] {
        let pt = PhasePoint::new(vec![0.3], vec![xi]).unwrap();
        assert!((l.term(0).unwrap().value(&pt, 0.1).unwrap() - C::new(1.0, 0.0) / C::new(xi, 1.0)).norm() < 1e-15);
        assert!(l.term(1).unwrap().value(&pt, 0.1).unwrap().norm() < 1e-15);
    }
}

/// `|Op(l) Op(a) u - u|` against the Neumann-series order.
#[test]
fn parametrix_operator_order() {
    let a = SymbolExpansion::from_exprs(
        0,
        1,
        vec![Expr::xi(0) + Expr::Const(0.0, 1.0) + Expr::c(0.3) * Expr::y(0).cos()],
    )
    .unwrap();
    let l = left_parametrix(&a, 2, &sample_grid()).unwrap();
    let p = pool(1);
    let mut errs = Vec::new();
    let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    for &h in &hs {
        let grid = p.grid_for(&[0.0], &[TAU], h).unwrap();
        let u = &p.sample(&grid, h)[0];
        let au = quantize_apply(&a, &grid, u, h).unwrap();
        let lau = quantize_apply(&l, &grid, &au, h).unwrap();
        let diff: Vec<C> = lau.iter().zip(u).map(|(x, y)| x - y).collect();
        errs.push(grid.norm(&diff) / grid.norm(u));
    }
    let slope = (errs[0] / errs[2]).ln() / (hs[0] / hs[2]).ln();
    assert!(slope >= 2.7, "{errs:?} slope {slope}");
}

fn random_source(seed: u64, h: f64, top: f64, count: usize) -> TubeFunction<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..3.0), rng.gen_range(0.0..TAU)))
        .collect();
    let tan = TangentialGrid::circle(TAU, (TAU / (h / 8.0)).ceil() as usize).unwrap();
    TubeFunction::sample(tan, 0.0, top, count, h, |xp, xn| {
        let s: f64 = coef.iter().map(|(a, k, p)| a * (k * xn + p).cos()).sum();
        C::new(s * (1.0 + 0.5 * xp[0].sin()), s * 0.3 * xp[0].cos())
    })
    .unwrap()
}

#[test]
fn propagator_zero_source() {
    let t = TubeFunction::sample(TangentialGrid::point(), 0.0, 0.2, 41, 0.05, |_, _| C::new(0.0, 0.0)).unwrap();
    let ef = apply_propagator(&t, 1.0, 0.05).unwrap();
    assert!(ef.values.iter().all(|v| *v == C::new(0.0, 0.0)));
}

#[test]
fn propagator_requires_positive_b0() {
    let t = TubeFunction::sample(TangentialGrid::point(), 0.0, 0.2, 41, 0.05, |_, _| C::new(1.0, 0.0)).unwrap();
    assert!(matches!(apply_propagator(&t, 0.0, 0.05), Err(Error::Domain(_))));
}

#[test]
fn propagator_trace_and_ode() {
    let h = 0.04;
    for seed in 0..5 {
        let f = random_source(seed, h, 0.1, 41);
        let ef = apply_propagator(&f, 1.0, h).unwrap();
        assert!(ef.trace().unwrap().iter().all(|v| *v == C::new(0.0, 0.0)));
        assert!(propagator_ode_residual(&ef, &f, 1.0) < 1e-8);
    }
}

#[test]
fn propagator_smallness() {
    let j = 3;
    let hs = [0.08f64, 0.04, 0.02, 0.01];
    let mut norms = Vec::new();
    for &h in &hs {
        let count = (0.2 / (h / 8.0)).round() as usize + 1;
        let t = TubeFunction::sample(TangentialGrid::point(), 0.0, 0.2, count, h, |_, xn| {
            C::new(f64::powi(h, j) * (1.0 + xn).cos(), 0.0)
        })
        .unwrap();
        norms.push(apply_propagator(&t, 1.0, h).unwrap().norm_sq().sqrt());
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
    let slope = semilab::analysis::fit::loglog_slope(&xs, &ys).unwrap();
    assert!(slope >= j as f64 - 0.3, "{slope}");
}

#[test]
fn transport_commutes_with_tangential_multipliers() {
    let h = 0.05;
    let v = random_source(3, h, 0.1, 21);
    let psi = |x: &[f64]| C::new(x[0].cos(), 0.5 * x[0].sin());
    let one = v.multiply_tangential(psi).transport_operator(1.3);
    let two = v.transport_operator(1.3).multiply_tangential(psi);
    let vmax = v.values.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let term_scale = h / v.normal_spacing() * vmax * 4.0;
    let diff = one.values.iter().zip(&two.values).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    assert!(diff <= 64.0 * f64::EPSILON * term_scale, "{diff} {term_scale}");
}

fn decaying(b0: f64, h: f64, eps: f64, slope: f64) -> TubeFunction<f64> {
    let top = eps / 8.0;
    let count = (top / (h / 32.0)).round() as usize + 1;
    let tan = TangentialGrid::circle(TAU, (TAU / (h / 8.0)).ceil() as usize).unwrap();
    TubeFunction::sample(tan, 0.0, top, count, h, |xp, xn| {
        let g = C::new(1.0 + 0.5 * xp[0].cos(), 0.2 * xp[0].sin());
        g * ((-b0 * xn / h).exp() * (1.0 + slope * xn))
    })
    .unwrap()
}

#[test]
fn transport_kernel_and_ratio() {
    let (h, eps) = (0.02, 0.4);
    for b0 in [0.5, 1.0, 2.0] {
        let v = decaying(b0, h, eps, 0.0);
        let check = transport_identity_check(&v, b0, h, None).unwrap();
        assert!(check.relative_defect < 1e-8, "{}", check.relative_defect);
        let bound = tube_to_restriction_bound(&v, b0, eps, h).unwrap();
        assert!(bound.verdict);
        let expected = 1.0 / (1.0 - (-b0 * eps / (4.0 * h)).exp());
        assert!((bound.lhs / bound.rhs - expected).abs() < 1e-6 * expected);
    }
}

#[test]
fn transport_constant_slices_without_damping() {
    let tan = TangentialGrid::circle(TAU, 700).unwrap();
    let v = TubeFunction::sample(tan, 0.0, 0.05, 51, 0.08, |x, _| C::new(x[0].sin(), 1.0)).unwrap();
    let check = transport_identity_check(&v, 0.0, 0.08, None).unwrap();
    assert!(check.relative_defect < 1e-12);
}

#[test]
fn injected_forcing_shows_up_as_defect() {
    let (h, eps, b0, s) = (0.02, 0.4, 1.0, 1e-3);
    let v = decaying(b0, h, eps, s);
    let check = transport_identity_check(&v, b0, h, None).unwrap();
    for p in &check.profile {
        let expected = h * s * p.mass / (1.0 + s * p.x_n);
        assert!((p.defect - expected).abs() < 1e-8 * b0 * p.mass, "{} vs {expected}", p.defect);
    }
    let forcing = v.transport_operator(b0);
    let balanced = transport_identity_check(&v, b0, h, Some(&forcing)).unwrap();
    assert!(balanced.relative_defect < 1e-8);
}

#[test]
fn zero_tube_bound() {
    let tan = TangentialGrid::circle(TAU, 700).unwrap();
    let v = TubeFunction::sample(tan, 0.0, 0.05, 51, 0.08, |_, _| C::new(0.0, 0.0)).unwrap();
    let bound = tube_to_restriction_bound(&v, 1.0, 0.4, 0.08).unwrap();
    assert_eq!((bound.lhs, bound.rhs), (0.0, 0.0));
    assert!(bound.verdict);
}

#[test]
fn bound_requires_eps_over_eight() {
    let tan = TangentialGrid::circle(TAU, 700).unwrap();
    let v = TubeFunction::sample(tan, 0.0, 0.05, 51, 0.08, |_, _| C::new(1.0, 0.0)).unwrap();
    assert!(matches!(tube_to_restriction_bound(&v, 1.0, 0.8, 0.08), Err(Error::Precondition(_))));
}

#[test]
fn coarse_tube_rejected() {
    let tan = TangentialGrid::circle(TAU, 100).unwrap();
    let r = TubeFunction::sample(tan, 0.0, 0.05, 51, 0.08, |_, _| C::new(1.0, 0.0));
    assert!(matches!(r, Err(Error::Resolution(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_consistency(x in 0.0..TAU, xi in -3.0..3.0f64, amp in 0.1..1.5f64, base in 1.7..4.0f64) {
        let b = field(Expr::c(base) + Expr::c(amp) * Expr::y(0).sin());
        let q = SymbolExpansion::from_exprs(0, 1, vec![
            Expr::xi(0) * Expr::xi(0) + Expr::c(1.0) + Expr::y(0).cos() * Expr::c(0.5),
            Expr::xi(0) * Expr::y(0).sin(),
        ]).unwrap();
        let f = factor_symbols(&q, b, 4, &sample_grid()).unwrap();
        let pt = PhasePoint::new(vec![x], vec![xi]).unwrap();
        prop_assert!(f.recursion_residual(&pt, 0.1).unwrap() < 1e-10);
    }

    #[test]
    fn principal_quotient(x in 0.0..TAU, xi in -3.0..3.0f64) {
        let f = factor_symbols(&q_model(), sin_b(), 1, &sample_grid()).unwrap();
        let pt = PhasePoint::new(vec![x], vec![xi]).unwrap();
        let a0 = f.term_values(&pt, 0.1).unwrap()[0];
        let d = C::new(xi, -(2.0 + x.sin()));
        prop_assert!((a0 * d - (xi * xi + 1.0)).norm() < 1e-12);
        prop_assert!(d.norm() >= f.c0);
    }

    #[test]
    fn propagator_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let f = random_source(1, 0.05, 0.1, 17);
        let g = random_source(2, 0.05, 0.1, 17);
        let comb = f.with_values(f.values.iter().zip(&g.values).map(|(x, y)| x * a + y * b).collect()).unwrap();
        let lhs = apply_propagator(&comb, 0.7, 0.05).unwrap();
        let ef = apply_propagator(&f, 0.7, 0.05).unwrap();
        let eg = apply_propagator(&g, 0.7, 0.05).unwrap();
        for k in 0..lhs.values.len() {
            prop_assert!((lhs.values[k] - (ef.values[k] * a + eg.values[k] * b)).norm() < 1e-12);
        }
    }
}
