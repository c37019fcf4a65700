mod common;

use binls::constants::{self, ThresholdSet};
use binls::model::{self, SystemParams};
use binls::mountain_pass::{self, SaddleConfig};
use binls::spectral::GridSpec;

fn setup(n: usize, l: f64) -> (SystemParams, GridSpec, ThresholdSet) {
    let grid = GridSpec::new(2, n, l).unwrap();
    let base = SystemParams { dimension: 2, alpha1: 1.0, alpha2: 1.0, beta: 1.0, r1: 4.0, r2: 4.0, rho: 1.0 };
    let gn = constants::gn_constant_estimate(2, 8.0, &grid, 1e-12, 3000).unwrap();
    let th = constants::thresholds(&base, gn.constant).unwrap();
    let beta = 0.5 * th.c_star.unwrap().min(th.c_lower_star.unwrap());
    let params = SystemParams { beta, ..base };
    let th = constants::thresholds(&params, gn.constant).unwrap();
    (params, grid, th)
}

#[test]
fn roots_and_endpoints() {
    let (params, grid, th) = setup(64, 16.0);
    let geo = mountain_pass::bracket_roots_h(&params, &th).unwrap();
    let (r0, r1) = (geo.r0.unwrap(), geo.r1.unwrap());
    assert!(0.0 < r0 && r0 < geo.t_bar && geo.t_bar < r1);
    for t in [r0, r1] {
        let h = mountain_pass::geometry_h(t, &params, &th).unwrap();
        assert!(h.abs() <= 1e-10 * (1.0 + t * t));
    }
    let profile = mountain_pass::coupled_gaussian_profile(&grid, &params, 1.0).unwrap();
    let ends = mountain_pass::build_endpoints(&params, &profile, &geo).unwrap();
    assert!(ends.bending_low < r0 * r0 && ends.energy_low < 0.0);
    assert!(ends.bending_high > r1 * r1 && ends.energy_high < 0.0);
    for e in [&ends.low, &ends.high] {
        assert!(common::rel_err(e.total_mass(), 1.0) < 1e-12);
    }
    // The dilation path between the endpoints peaks above zero, at a zero of P.
    let (s, value) = mountain_pass::dilation_path_critical(&profile, &params, ends.s_low, ends.s_high).unwrap();
    let p = model::pohozaev_p(&profile.dilate(s), &params);
    assert!(p.abs() <= 1e-8 * (1.0 + value.abs()));
    assert!(value > 0.0 && value >= ends.energy_low.max(ends.energy_high));
}

#[test]
fn geometry_is_lost_above_c_star() {
    let (params, _, th) = setup(32, 16.0);
    let big = SystemParams { beta: 1.05 * th.c_star.unwrap(), ..params };
    let th_big = constants::thresholds(&big, th.c_gn).unwrap();
    assert!(!mountain_pass::bracket_roots_h(&big, &th_big).unwrap().feasible);
    let grid = GridSpec::new(2, 32, 16.0).unwrap();
    assert!(mountain_pass::saddle_search(&big, &grid, &th_big, &SaddleConfig::default()).is_err());
}

#[test]
fn saddle_barrier_and_bending_bound() {
    let (params, grid, th) = setup(128, 16.0);
    let rep = mountain_pass::saddle_search(&params, &grid, &th, &SaddleConfig::default()).unwrap();
    assert!(rep.accepted, "{rep:?}");
    assert!(rep.level > 0.0 && rep.level <= rep.initial_path_max);
    assert!(rep.lambda_bound_ok && rep.coupling > 0.0);
    // Barrier: the fiber through the saddle crosses bending = t̄², where I ≥ h(t̄).
    let t = model::terms(&rep.state, &params);
    let tb = mountain_pass::t_bar(&params, &th);
    let s_cross = 0.25 * (tb * tb / t.bending).ln();
    let h_cross = mountain_pass::geometry_h(tb, &params, &th).unwrap();
    assert!(t.psi(&params, s_cross) >= h_cross - 1e-6);
    assert!(rep.level >= h_cross - 1e-6);
    assert!(rep.bending >= tb * tb * (1.0 - 0.05));
    assert!(rep.symmetry_drift.is_finite());
}
