#![allow(dead_code)]

use binls::ground_state::{project_to_sphere, random_bandlimited};
use binls::model::{StatePair, SystemParams};
use binls::spectral::{GridSpec, RealField};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn params_1d(r1: f64, r2: f64) -> SystemParams {
    SystemParams { dimension: 1, alpha1: 1.0, alpha2: 1.0, beta: 1.0, r1, r2, rho: 1.0 }
}

/// Random band-limited pair on S_ρ.
pub fn random_pair(grid: &GridSpec, rho: f64, rng: &mut ChaCha8Rng) -> StatePair {
    let u = random_bandlimited(grid, rng).unwrap();
    let v = random_bandlimited(grid, rng).unwrap();
    project_to_sphere(&StatePair::new(u, v).unwrap(), rho).unwrap()
}

/// Localized random pair: band-limited noise under a Gaussian envelope.
pub fn random_localized_pair(grid: &GridSpec, rho: f64, rng: &mut ChaCha8Rng) -> StatePair {
    let width = grid.box_length / rng.gen_range(8.0..16.0);
    let env: Vec<f64> = grid.radius_squared().iter().map(|x| (-x / (2.0 * width * width)).exp()).collect();
    let mut field = || {
        let f = random_bandlimited(grid, rng).unwrap();
        let s: Vec<f64> = f.samples().iter().zip(&env).map(|(a, e)| (1.5 + a) * e).collect();
        RealField::new(*grid, s).unwrap()
    };
    let (u, v) = (field(), field());
    project_to_sphere(&StatePair::new(u, v).unwrap(), rho).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
