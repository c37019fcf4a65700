mod common;

use binls::spectral::{self, GridSpec, RealField};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    (1usize..=2, prop::sample::select(vec![16usize, 32, 64]), 4.0f64..60.0)
        .prop_map(|(d, n, l)| GridSpec::new(d, n, l).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_matches_sample_sum(grid in grid_strategy(), seed in any::<u64>()) {
        let f = binls::ground_state::random_bandlimited(&grid, &mut common::rng(seed)).unwrap();
        let spec = spectral::spectrum(&f);
        let xi2 = grid.xi_squared();
        let spectral_mass = spectral::weighted_spectral_sum(&grid, &spec, &xi2, |_| 1.0);
        let direct: f64 = f.samples().iter().map(|x| x * x).sum::<f64>() * grid.cell_volume();
        prop_assert!((spectral_mass - direct).abs() <= 1e-12 * direct);
        prop_assert!((spectral::mass(&f) - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn interpolation_inequality(grid in grid_strategy(), seed in any::<u64>()) {
        let f = binls::ground_state::random_bandlimited(&grid, &mut common::rng(seed)).unwrap();
        let lhs = spectral::gradient_norm_sq(&f);
        let rhs = spectral::mass(&f).sqrt() * spectral::laplacian_norm_sq(&f).sqrt();
        prop_assert!(lhs <= rhs * (1.0 + 1e-10));
    }

    #[test]
    fn dilation_round_trip(grid in grid_strategy(), seed in any::<u64>(), s in -2.0f64..2.0) {
        let f = binls::ground_state::random_bandlimited(&grid, &mut common::rng(seed)).unwrap();
        let back = spectral::dilate(&spectral::dilate(&f, s), -s);
        prop_assert!((back.grid().box_length - grid.box_length).abs() <= 1e-13 * grid.box_length);
        for (a, b) in back.samples().iter().zip(f.samples()) {
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()));
        }
        let m0 = spectral::mass(&f);
        prop_assert!((spectral::mass(&spectral::dilate(&f, s)) - m0).abs() <= 1e-12 * m0);
    }
}

#[test]
fn cosine_mode_norms_in_3d() {
    // u = cos(k·x) with k = 2π(1,2,0)/L; ‖u‖² = L³/2, ‖∇u‖² = |k|²L³/2, ‖Δu‖² = |k|⁴L³/2.
    let l = 7.0;
    let g = GridSpec::new(3, 16, l).unwrap();
    let k = [2.0, 4.0, 0.0].map(|m| m * std::f64::consts::PI / l);
    let f = RealField::from_fn(g, |x| (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]).cos()).unwrap();
    let k2: f64 = k.iter().map(|c| c * c).sum();
    let vol = l.powi(3);
    assert!(common::rel_err(spectral::mass(&f), vol / 2.0) < 1e-12);
    assert!(common::rel_err(spectral::gradient_norm_sq(&f), k2 * vol / 2.0) < 1e-12);
    assert!(common::rel_err(spectral::laplacian_norm_sq(&f), k2 * k2 * vol / 2.0) < 1e-12);
}

#[test]
fn spectrum_round_trip() {
    let g = GridSpec::new(2, 32, 10.0).unwrap();
    let f = binls::ground_state::random_bandlimited(&g, &mut common::rng(5)).unwrap();
    let back = spectral::from_spectrum(g, spectral::spectrum(&f));
    for (a, b) in back.samples().iter().zip(f.samples()) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn lp_norm_of_constant() {
    let g = GridSpec::new(2, 16, 3.0).unwrap();
    let f = RealField::new(g, vec![2.0; g.len()]).unwrap();
    // ‖2‖_p = 2·|box|^{1/p}
    assert!(common::rel_err(spectral::lp_norm(&f, 6.0).unwrap(), 2.0 * 9f64.powf(1.0 / 6.0)) < 1e-13);
}
