use std::f64::consts::PI;

use approx::assert_relative_eq;
use cellwave_core::bifurcation::{classify_branch, Classification};
use cellwave_core::model::{chi_star, circle, com_velocity, stationary_state, ActiveForce};
use cellwave_core::profile::{find_vmax, ShapeProfile, TiltSolution, DEFAULT_RESOLUTION};
use cellwave_core::solver::{export_boundary, solve_traveling_wave_with, zero_speed_state, SolveMode, WaveOptions};
use cellwave_core::specfun::{bessel_i, bessel_j, j_roots, jprime_roots};
use cellwave_core::spectrum::{eval_hm, real_eigenvalues, DispersionParams};
use cellwave_core::{Error, ModelParams};
use serde_json::json;

fn fixed_area() -> WaveOptions {
    WaveOptions {
        mode: SolveMode::FixedArea,
        ..Default::default()
    }
}

#[test]
fn bessel_zeros_are_zeros() {
    for m in 0..4 {
        for x in j_roots(m, 5).unwrap() {
            // Roots are bracketed to 1e-13; the series itself loses digits like I_m(x) eps.
            let floor = (1e-12f64).max(16.0 * f64::EPSILON * bessel_i(m, x).unwrap());
            assert!(bessel_j(m, x).unwrap().abs() <= floor, "J_{m}({x})");
        }
    }
    // J_0' = -J_1, so the derivative zeros of order 0 after the trivial one are zeros of J_1.
    let d = jprime_roots(0, 3).unwrap();
    let z = j_roots(1, 3).unwrap();
    for (a, b) in d.iter().zip(&z) {
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }
}

#[test]
fn params_round_trip_through_json() {
    let p = ModelParams::reference();
    let q = ModelParams::from_json(&p.to_json()).unwrap();
    assert_eq!(p.to_json(), q.to_json());
    assert_relative_eq!(chi_star(&q).unwrap(), 2.0, max_relative = 1e-14);
}

#[test]
fn missing_field_is_rejected() {
    let doc = json!({"chi": 2.5, "a": 1, "M": PI, "R0": 1, "force": {"kind": "hill", "L": 2, "alpha": 1}});
    assert!(matches!(ModelParams::from_json(&doc), Err(Error::Config(_) | Error::InvalidParameters(_))));
}

#[test]
fn stationary_pressure() {
    let p = ModelParams::reference();
    let s = stationary_state(&p).unwrap();
    assert_relative_eq!(s.c_tilde, 1.0, max_relative = 1e-14);
    assert_relative_eq!(s.p_tilde, 1.0 + 2.5, max_relative = 1e-14);
}

#[test]
fn resting_disk_does_not_move() {
    let p = ModelParams::reference();
    let b = circle([0.0, 0.0], p.r0, 512);
    let c = vec![p.c_tilde(); b.points.len()];
    let v = com_velocity(&b, &c, &p).unwrap();
    assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
}

#[test]
fn zero_speed_profile_is_a_disk() {
    let p = ModelParams::reference();
    let prof = ShapeProfile::build(&p, 0.0, 1.0, DEFAULT_RESOLUTION).unwrap();
    assert!(prof.g_value.abs() < 1e-10);
    assert_relative_eq!(prof.x_right, -prof.x_left, max_relative = 1e-10);
    assert!(prof.is_monotone());
    assert_relative_eq!(prof.area(), PI * prof.x_right * prof.x_right, max_relative = 1e-8);
}

#[test]
fn vmax_bounds_the_tilt() {
    let p = ModelParams::reference();
    let v_max = find_vmax(&p, p.c_tilde()).unwrap();
    assert!(TiltSolution::new(&p, 0.9 * v_max, p.c_tilde()).is_ok());
    assert!(TiltSolution::new(&p, 1.1 * v_max, p.c_tilde()).is_err());
}

#[test]
fn zero_speed_state_balances_pressure() {
    let s = zero_speed_state(&ModelParams::reference()).unwrap();
    assert_relative_eq!(s.c1 * PI * s.radius * s.radius, PI, max_relative = 1e-10);
}

#[test]
fn fixed_area_wave_near_threshold() {
    let p = ModelParams::reference().with_chi(2.1);
    let w = solve_traveling_wave_with(&p, &fixed_area()).unwrap();
    assert!(w.v > 0.0 && w.v < 1.5, "V = {}", w.v);
    assert!(w.diagnostics.passed(&Default::default()), "{:?}", w.diagnostics);
    assert_relative_eq!(w.area, PI, max_relative = 1e-8);
    let b = export_boundary(&w.profile, 256);
    assert_eq!(b.points.len(), 256);
    assert_relative_eq!(b.signed_area(), w.area, max_relative = 1e-3);
}

#[test]
fn below_threshold_has_no_wave() {
    let p = ModelParams::reference().with_chi(1.95);
    assert!(matches!(
        solve_traveling_wave_with(&p, &fixed_area()),
        Err(Error::NoTravelingWave { .. })
    ));
}

#[test]
fn dispersion_is_real_on_the_axis() {
    let dp = DispersionParams::new(2, 1.0, 1.0, 0.8).unwrap();
    for l in [-50.0, -3.0, 0.5, 7.0] {
        assert!(eval_hm(&dp, l).unwrap().is_finite());
    }
    let s = real_eigenvalues(&dp, [-200.0, 200.0], 50).unwrap();
    assert!(s.eigenvalues.iter().all(|&l| l < 0.0));
    assert!(s.eigenvalues.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn unstable_translation_mode_above_unit_activity() {
    let dp = DispersionParams::new(1, 1.0, 1.0, 1.3).unwrap();
    let s = real_eigenvalues(&dp, [-200.0, 200.0], 50).unwrap();
    assert!(s.leading.is_some_and(|l| l > 0.0));
}

#[test]
fn hill_forces_classify_by_alpha() {
    let at = |alpha| ModelParams {
        force: ActiveForce::hill(2.0, alpha),
        ..ModelParams::reference()
    };
    assert_eq!(classify_branch(&at(0.3)).unwrap().classification, Classification::Subcritical);
    assert_eq!(classify_branch(&at(2.0)).unwrap().classification, Classification::Supercritical);
}
