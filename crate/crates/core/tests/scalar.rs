use semilab::analysis::agmon::agmon_length;
use semilab::analysis::{restriction_report, HypersurfaceSpec};
use semilab::carleman::{bracket_margin, ScanSpec};
use semilab::models::{torus_family, Curve, Domain1D, SchrodingerProblem1D};
use semilab::phase_symbols::Expr;
use semilab::{Family32, SphereModel32, Weight32};

#[test]
fn single_precision_agmon_length() {
    let d = agmon_length(&|x: f32| x * x - 1.0, 1.0, 2.0).unwrap();
    let exact = 3f32.sqrt() - (2.0 + 3f32.sqrt()).ln() / 2.0;
    assert!((d - exact).abs() < 1e-5, "{d} vs {exact}");
}

#[test]
fn single_precision_plane_waves_do_not_decay() {
    let fam: Family32 = torus_family(1.0f32, &[0.25, 0.125, 0.0625]).unwrap();
    let report = restriction_report(&fam, &HypersurfaceSpec::at(0.5f32), 0.1, None, None).unwrap();
    assert!(report.r_h.unwrap().rate.abs() < 1e-3);
}

#[test]
fn single_precision_bracket_scan() {
    let model = SphereModel32::circle(1.0);
    let w = Weight32::new(1e-2, 5e-4, 3.0, 1.0).unwrap();
    let grid = ScanSpec::uniform(2, 2.0f32, 24).grid(&w).unwrap();
    let m = bracket_margin(&model, &w, &grid, None).unwrap().require_margin().unwrap();
    assert!(m > 0.0);
}

#[test]
fn single_precision_harmonic_problem_validates() {
    let potential = Curve::<f32>::from_expr(Expr::y(0) * Expr::y(0)).unwrap();
    let prob = SchrodingerProblem1D::new(Domain1D::Interval { a: -4.0f32, b: 4.0 }, potential, 1.0, vec![0.1, 0.05]);
    assert!(prob.is_ok());
}
