use std::sync::Arc;

use proptest::prelude::*;
use semilab::carleman::*;
use semilab::Error;

fn circle_weight(tau: f64) -> CarlemanWeight<f64> {
    CarlemanWeight::new(tau, 5e-5, 3.0, 1.0).unwrap()
}

#[test]
fn rho_flat_zones() {
    let rho = build_rho(0.05f64, 1.5).unwrap();
    assert_eq!(rho.value(&[0.05]), 0.0);
    assert_eq!(rho.value(&[0.75]), -1.0);
    assert_eq!(rho.value(&[-1.2]), -1.0);
}

#[test]
fn rho_gradient_bound_is_uniform_in_eps() {
    // the ramp falls by 1 over half of (c_Y/3 - 3 eps), so the slope is at most
    // 2 / (c_Y/3 - 3 eps), largest at eps = 0.1
    let bound = 2.0 / (0.5 - 0.3);
    let mut sups = Vec::new();
    for &eps in &[0.1, 0.05, 0.025] {
        let rho = build_rho(eps, 1.5).unwrap();
        let sup = (0..=20000)
            .map(|i| rho.gradient(&[1.5 * i as f64 / 20000.0])[0].abs())
            .fold(0.0, f64::max);
        sups.push(sup);
        assert!(sup <= bound * (1.0 + 1e-9), "eps {eps}: {sup}");
    }
    assert!(sups.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn rho_rejects_large_eps() {
    assert!(matches!(build_rho(0.2f64, 1.5), Err(Error::Geometry(_))));
}

#[test]
fn mollifier_has_unit_mass() {
    let n = 200000;
    let s: f64 = (0..n).map(|i| mollifier(-1.0 + 2.0 * (i as f64 + 0.5) / n as f64)).sum::<f64>() * 2.0 / n as f64;
    assert!((s - 1.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn rho_properties_hold(eps in 0.001f64..0.05, c_y in 1.0f64..3.0, r in 0.0f64..1.0) {
        let rho = build_rho(eps, c_y).unwrap();
        let x = r * c_y;
        let v = rho.value(&[x]);
        prop_assert!((-1.0..=0.0).contains(&v));
        if x <= 3.0 * eps {
            prop_assert_eq!(v, 0.0);
        }
        if x >= c_y / 3.0 {
            prop_assert_eq!(v, -1.0);
        }
        let bound = 2.0 / (c_y / 3.0 - 3.0 * eps);
        prop_assert!(rho.gradient(&[x])[0].abs() <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn weight_is_normal_coordinate_plus_cutoff(yt in -1.0f64..1.0, yn in -0.01f64..0.1) {
        let w = CarlemanWeight::new(0.05, 0.004, 3.0, 1.0).unwrap();
        let psi = w.psi(&[yt, yn]);
        prop_assert!((psi - (yn + 0.1 * w.rho.value(&[yt]))).abs() < 1e-15);
        prop_assert!(psi <= yn);
    }
}

#[test]
fn circle_bracket_approaches_eight() {
    let model = GeodesicSphereModel::circle(1.0f64);
    let w = circle_weight(1e-3);
    let grid = ScanSpec::uniform(2, 2.0, 40).grid(&w).unwrap();
    let scan = bracket_margin(&model, &w, &grid, None).unwrap();
    let m = scan.require_margin().unwrap();
    assert!((m - 8.0).abs() < 0.03 * 8.0, "margin {m}");
    assert!(scan.witness.is_some());
}

#[test]
fn concave_sphere_has_negative_margin() {
    let model = GeodesicSphereModel::concave_sphere(2, 1.0f64);
    let w = circle_weight(1e-3);
    let grid = ScanSpec::uniform(2, 2.0, 32).grid(&w).unwrap();
    let m = bracket_margin(&model, &w, &grid, None).unwrap().require_margin().unwrap();
    assert!(m < 0.0, "margin {m}");
}

#[test]
fn empty_characteristic_sample_is_reported() {
    // |xi| <= 0.5 never reaches a = 2
    let model = GeodesicSphereModel::circle(1.0f64);
    let w = circle_weight(1e-3);
    let grid = ScanSpec::uniform(2, 0.5, 16).grid(&w).unwrap();
    let scan = bracket_margin(&model, &w, &grid, Some(1e-3)).unwrap();
    assert!(!scan.found_characteristic_points());
    let err = scan.require_margin().unwrap_err().to_string();
    assert!(err.contains("no char points found"), "{err}");
}

#[test]
fn characteristic_set_hugs_the_unperturbed_sphere() {
    // a(y', xi') = 2 + E - V + O(tau) and xi_n = O(tau) on the sample
    let model = GeodesicSphereModel::circle(1.0f64);
    let mut ratios = Vec::new();
    for &tau in &[1e-3, 2e-3, 4e-3] {
        let w = CarlemanWeight::new(tau, 0.05 * tau, 3.0, 1.0).unwrap();
        let grid = ScanSpec::uniform(2, 2.0, 32).grid(&w).unwrap();
        let scan = bracket_margin(&model, &w, &grid, None).unwrap();
        let mut worst: f64 = 0.0;
        for s in scan.samples.iter().filter(|s| s.projected) {
            let y = &s.point.y;
            let xi = &s.point.xi;
            let z = [num_complex::Complex::new(xi[0], 0.0)];
            let a = model.tangential(y, &z).re;
            worst = worst.max((a - 2.0).abs()).max(xi[1].abs());
        }
        ratios.push(worst / tau);
    }
    let c = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(c < 20.0, "fitted constant {c}");
}

#[test]
fn schrodinger_verdicts_follow_curvature() {
    let grad_one: PotentialFn<f64> = Arc::new(|y: &[f64]| y[1]);
    let verdict = |r: f64| {
        let m = GeodesicSphereModel::circle(r).with_potential(grad_one.clone(), 0.0);
        let w = CarlemanWeight::new(1e-3, 5e-5, 3.0f64.min(3.0 * r), 1.0).unwrap();
        let grid = ScanSpec::uniform(2, 3.0, 32).grid(&w).unwrap();
        bracket_margin(&m, &w, &grid, None).unwrap().require_margin().unwrap()
    };
    assert!(verdict(0.25) > 0.0);
    assert!(verdict(10.0) <= 0.0);
}

#[test]
fn margin_varies_smoothly_in_tau() {
    let model = GeodesicSphereModel::circle(1.0f64);
    let taus = [1e-3, 1.5e-3, 2e-3, 2.5e-3];
    let margins: Vec<f64> = taus
        .iter()
        .map(|&t| {
            let w = CarlemanWeight::new(t, 0.05 * t, 3.0, 1.0).unwrap();
            let g = ScanSpec::uniform(2, 2.0, 24).grid(&w).unwrap();
            bracket_margin(&model, &w, &g, None).unwrap().require_margin().unwrap()
        })
        .collect();
    let steps: Vec<f64> = margins.windows(2).map(|m| (m[1] - m[0]).abs()).collect();
    let lipschitz = steps.iter().cloned().fold(0.0, f64::max) / 5e-4;
    for s in &steps {
        assert!(*s <= 2.0 * lipschitz * 5e-4);
    }
    assert!(lipschitz < 500.0, "{lipschitz}");
}

#[test]
fn tau_estimate_shrinks_with_radius() {
    let family = WeightFamily { beta: 1.0, c_y: 3.0, eps_ratio: 0.05 };
    let spec = ScanSpec::uniform(2, 2.0, 24);
    let small = max_tau_estimate(&GeodesicSphereModel::circle(1.0f64), &family, &spec, 1e-3, 1.0, 5).unwrap();
    let large = max_tau_estimate(&GeodesicSphereModel::circle(4.0f64), &family, &spec, 1e-3, 1.0, 5).unwrap();
    assert!(small.tau_y >= 0.05, "{}", small.tau_y);
    assert!(large.tau_y < small.tau_y);
    assert!(small.monotone);
}

#[test]
fn flat_model_is_inadmissible() {
    let family = WeightFamily { beta: 1.0, c_y: 3.0, eps_ratio: 0.05 };
    let spec = ScanSpec::uniform(2, 2.0, 16);
    let r = max_tau_estimate(&GeodesicSphereModel::flat(2), &family, &spec, 1e-3, 1.0, 3);
    assert!(matches!(r, Err(Error::Inadmissible(_))), "{r:?}");
}

fn partition() -> RegionPartition<f64> {
    region_partition(PartitionParams { tau_h: 0.05, eps: 0.004, c_y: 3.0, tau_y: 0.076, eps_y: 0.006 }).unwrap()
}

#[test]
fn cutoff_values() {
    let p = partition();
    assert_eq!(p.chi_eps(&[0.0, 0.0]), 1.0);
    assert_eq!(p.chi_eps(&[0.0, 0.05 + 3.0 * 0.004]), 0.0);
    for i in 0..64 {
        let th = std::f64::consts::TAU * i as f64 / 64.0;
        let y = [0.0008 * 0.999 * th.cos(), 0.0008 * 0.999 * th.sin()];
        assert_eq!(p.chi_eps(&y), 1.0);
    }
}

#[test]
fn cutoff_gradient_lives_in_the_three_regions() {
    let p = partition();
    assert!(p.gradient_support_violations(2, 10_000, 11).is_empty());
}

#[test]
fn partition_reports_each_failed_inequality() {
    let err = region_partition(PartitionParams { tau_h: 0.05, eps: 0.01, c_y: 3.0, tau_y: 0.05, eps_y: 0.006 })
        .unwrap_err()
        .to_string();
    assert!(err.contains("eps < eps_Y"), "{err}");
    assert!(err.contains("tau_H + 2 eps_Y < tau_Y"), "{err}");
    assert!(!err.contains("eps_Y < c_Y/10"), "{err}");
}

#[test]
fn envelopes_hold_and_detect_a_sign_fault() {
    let p = partition();
    let w = CarlemanWeight::new(0.05, 0.004, 3.0, 1.0).unwrap();
    let rep = weight_envelope_report(&w, &p, 2, 120).unwrap();
    assert!(rep.all(), "{rep:?}");
    let third = 1.0;
    let faulty = w.clone().with_rho(Rho::Custom(Arc::new(move |y: &[f64]| {
        if y[0].abs() > third {
            1.0
        } else {
            0.0
        }
    })));
    let rep = weight_envelope_report(&faulty, &p, 2, 120).unwrap();
    assert!(!rep.transition);
}

#[test]
fn circle_geometry_constants() {
    let k = ubb_inclusion_constant(1.0f64, 0.05, 0.004, 41);
    assert!(k > 1.0 && k < 3.0, "{k}");
    let c0 = control_ball_constant(1.0f64, 0.004, 256);
    assert!(c0 >= 0.19, "{c0}");
}

#[test]
fn sigma_min_resolution_guard() {
    let w = CarlemanWeight::new(0.6, 0.01, 0.375, 1.0).unwrap();
    let r = discrete_carleman_sigma_min(
        &GeodesicSphereModel::circle(1.0f64),
        &w,
        &[0.005],
        SigmaGrid { n_tan: 48, n_normal: 48 },
        1,
    );
    assert!(matches!(r, Err(Error::Resolution(_))));
}

#[test]
fn sigma_min_contrasts_convex_and_concave() {
    let zero: Rho<f64> = Rho::Custom(Arc::new(|_: &[f64]| 0.0));
    let w = CarlemanWeight::new(0.6, 0.01, 0.375, 1.0).unwrap().with_rho(zero);
    let grid = SigmaGrid { n_tan: 40, n_normal: 40 };
    let hs = [0.08, 0.04];
    let convex = discrete_carleman_sigma_min(&GeodesicSphereModel::circle(1.0f64), &w, &hs, grid, 3).unwrap();
    let concave = discrete_carleman_sigma_min(&GeodesicSphereModel::concave_sphere(2, 1.0f64), &w, &hs, grid, 3).unwrap();
    assert!(convex.slope < 1.0, "{}", convex.slope);
    assert!(concave.slope > 1.0, "{}", concave.slope);
}
