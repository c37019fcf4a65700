mod common;

use binls::constants::{self, GnEstimate};
use binls::model::{self, StatePair, SystemParams};
use binls::spectral::GridSpec;

fn mp_params(beta: f64) -> SystemParams {
    SystemParams { dimension: 2, alpha1: 1.0, alpha2: 1.0, beta, r1: 4.0, r2: 4.0, rho: 1.0 }
}

fn gn_1d(r: f64) -> GnEstimate {
    constants::gn_constant_estimate(1, r, &GridSpec::new(1, 512, 40.0).unwrap(), 1e-12, 3000).unwrap()
}

#[test]
fn exponent_plugs() {
    assert_eq!(constants::critical_exponents(4), (4.0, f64::INFINITY));
    assert_eq!(constants::critical_exponents(1), (10.0, f64::INFINITY));
    let (rb, tss) = constants::critical_exponents(5);
    assert!((rb - 3.6).abs() < 1e-15 && (tss - 10.0).abs() < 1e-15);
    assert!((constants::gamma_r(2, 4.0).unwrap() - 0.25).abs() < 1e-15);
    assert!((8.0 * constants::gamma_r(2, 8.0).unwrap() - 3.0).abs() < 1e-14);
    for n in 1..=6 {
        let (rb, _) = constants::critical_exponents(n);
        assert!((rb * constants::gamma_r(n, rb).unwrap() - 2.0).abs() < 1e-14);
    }
    assert!(constants::gamma_r(5, 10.0).is_err());
    assert!(constants::gamma_r(1, 2.0).is_err());
}

#[test]
fn borderline_plugs() {
    assert!(constants::borderline_check(1, 6.0));
    assert!(!constants::borderline_check(1, 4.5));
    assert!(constants::borderline_check(3, 4.0));
    assert!(!constants::borderline_check(1, 10.5));
}

#[test]
fn supercritical_threshold_plugs() {
    let p = mp_params(1.0);
    let th = constants::thresholds(&p, 0.4846938).unwrap();
    assert!(common::rel_err(th.c_star.unwrap(), 1.0 / (8.0 * th.d1 * th.d2)) < 1e-13);
    assert!(common::rel_err(th.c_lower_star.unwrap(), 6f64.sqrt() / (4.0 * th.d1)) < 1e-13);
    assert!(common::rel_err(th.mass_critical_cap, (1.0 / (2.0 * th.d1)).powf(0.25)) < 1e-13);
    let sub = SystemParams { r1: 2.0, r2: 2.0, ..p };
    assert!(constants::c_star(&sub, th.d1, th.d2).is_err());
    assert!(constants::c_lower_star(&sub, th.d1).is_err());
}

#[test]
fn threshold_monotonicity() {
    let p = mp_params(1.0);
    let a = constants::c_star(&p, 1e-3, 1.0).unwrap();
    assert!(constants::c_star(&p, 2e-3, 1.0).unwrap() < a);
    assert!(constants::c_star(&p, 1e-3, 1.5).unwrap() < a);
    let crit = SystemParams { dimension: 1, r1: 5.0, r2: 5.0, ..p };
    assert!(constants::mass_critical_cap(&crit.with_rho(1.0), 1e-3)
        > constants::mass_critical_cap(&SystemParams { beta: 2.0, ..crit }, 1e-3));
    let rs1 = constants::rho_star(&crit, 0.1);
    let rs2 = constants::rho_star(&crit, 0.2);
    assert!(rs2 < rs1);
    assert!(common::rel_err(rs1, (1.0f64 / (2.0 * 0.1)).powf(1.0 / 8.0)) < 1e-14);
}

#[test]
fn pointwise_coupling_constant_against_angle_scan() {
    // max of |a|^{r1}|b|^{r2} on a² + b² = 1, by brute force over the angle.
    for (r1, r2) in [(1.0, 1.0), (2.0, 2.0), (2.5, 1.5), (4.0, 3.0)] {
        let scan = (0..200_000)
            .map(|k| {
                let t = k as f64 / 200_000.0 * std::f64::consts::FRAC_PI_2;
                t.cos().powf(r1) * t.sin().powf(r2)
            })
            .fold(0.0, f64::max);
        let c = constants::pointwise_coupling_constant(r1, r2);
        assert!(c >= scan && c - scan < 1e-9, "({r1},{r2}): {c} vs {scan}");
    }
}

#[test]
fn gn_extremal_is_self_consistent() {
    let gn = gn_1d(6.0);
    let w = constants::weinstein_quotient(&gn.extremal, 6.0).unwrap();
    assert!(w >= 0.99 * gn.constant && w <= gn.constant * (1.0 + 1e-12));
    let grid = *gn.extremal.grid();
    let mut rng = common::rng(41);
    for _ in 0..50 {
        let p = common::random_localized_pair(&grid, 1.0, &mut rng);
        assert!(constants::weinstein_quotient(&p.u, 6.0).unwrap() <= gn.constant * (1.0 + 1e-6));
    }
}

#[test]
fn combined_coupling_bound_holds() {
    // ∫|u|^{r1}|v|^{r2} ≤ D₁ (‖u‖²+‖v‖²)^{r(1−γ)/2} (‖Δu‖²+‖Δv‖²)^{rγ/2}
    let params = common::params_1d(3.0, 3.0);
    let gn = gn_1d(6.0);
    let d1 = constants::d1(&params, gn.constant);
    let grid = *gn.extremal.grid();
    let mut rng = common::rng(43);
    let g = constants::gamma_r(1, 6.0).unwrap();
    for _ in 0..40 {
        let p = common::random_localized_pair(&grid, 1.0, &mut rng);
        let t = model::terms(&p, &params);
        let bound = d1 * t.total_mass().powf(6.0 * (1.0 - g) / 2.0) * t.bending.powf(6.0 * g / 2.0);
        assert!(t.coupling <= bound * (1.0 + 1e-10));
    }
}

#[test]
fn r_estimate_dominates_extremal_pair() {
    let params = SystemParams { r1: 5.0, r2: 5.0, ..common::params_1d(5.0, 5.0) };
    let gn = gn_1d(10.0);
    let grid = *gn.extremal.grid();
    let est = constants::estimate_r(&params, &grid, Some(&gn)).unwrap();
    let v = gn.extremal.scaled((params.r2 / params.r1).sqrt());
    let q_ext = model::quotient_q(&StatePair::new(gn.extremal.clone(), v).unwrap(), &params).unwrap();
    assert!(est.r_estimate >= q_ext);
    let d1 = constants::d1(&params, gn.constant);
    assert!(est.r_estimate > d1, "R = {} vs D1 = {d1}", est.r_estimate);
}

#[test]
fn r_divergence_flag_follows_borderline() {
    let grid = GridSpec::new(1, 512, 40.0).unwrap();
    let below = constants::estimate_r(&common::params_1d(2.25, 2.25), &grid, None).unwrap();
    assert!(below.r_diverging);
    let inside = constants::estimate_r(&common::params_1d(3.5, 3.5), &grid, None).unwrap();
    assert!(!inside.r_diverging);
    assert!(inside.r_estimate.is_finite() && inside.r_estimate > 0.0);
    assert!(constants::estimate_r(&mp_params(1.0), &GridSpec::new(2, 32, 10.0).unwrap(), None).is_err());
}

#[test]
fn threshold_json_shape() {
    let th = constants::thresholds(&common::params_1d(2.0, 2.0), 0.8).unwrap();
    let v = serde_json::to_value(&th).unwrap();
    assert_eq!(v["two_star_star"], "inf");
    assert!(v["c_star"].is_null() && v["C_gn"].as_f64() == Some(0.8));
    assert!(v.get("c_gn_extremal").is_none());
}
