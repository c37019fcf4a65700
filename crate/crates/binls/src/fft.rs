//! Multidimensional complex FFT over row-major cubes, with a shared plan cache.

use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = PLANNER
        .get_or_init(|| Mutex::new(FftPlanner::new()))
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Unnormalized in-place transform of an `n^dim` row-major array.
pub fn transform(data: &mut [Complex64], dim: usize, n: usize, inverse: bool) {
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        for block in data.chunks_exact_mut(stride * n) {
            for off in 0..stride {
                for (k, c) in line.iter_mut().enumerate() {
                    *c = block[off + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, c) in line.iter().enumerate() {
                    block[off + k * stride] = *c;
                }
            }
        }
    }
}

pub fn forward_real(samples: &[f64], dim: usize, n: usize) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    transform(&mut data, dim, n, false);
    data
}

/// Inverse transform returning the real part, normalized by `n^dim`.
pub fn inverse_real(mut spectrum: Vec<Complex64>, dim: usize, n: usize) -> Vec<f64> {
    transform(&mut spectrum, dim, n, true);
    let scale = 1.0 / spectrum.len() as f64;
    spectrum.iter().map(|c| c.re * scale).collect()
}
