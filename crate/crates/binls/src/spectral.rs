//! Periodic-box spectral discretization: grids, real fields, Fourier-multiplier
//! operators, quadrature and the exact mass-preserving dilation.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dimension: usize,
    pub points_per_axis: usize,
    pub box_length: f64,
}

impl GridSpec {
    pub fn new(dimension: usize, points_per_axis: usize, box_length: f64) -> Result<Self> {
        let g = GridSpec { dimension, points_per_axis, box_length };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Grid("dimension must be at least 1".into()));
        }
        let n = self.points_per_axis;
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Grid(format!("points_per_axis {n} must be a power of two >= 8")));
        }
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return Err(Error::Grid(format!("box_length {} must be positive", self.box_length)));
        }
        if self.dimension > 6 || n.checked_pow(self.dimension as u32).is_none() {
            return Err(Error::Grid("grid too large".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.points_per_axis as f64
    }

    /// Quadrature weight h^N.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.dimension as i32)
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Weight turning Σ|f̂|² of the unnormalized DFT into ∫f².
    pub fn parseval_weight(&self) -> f64 {
        self.cell_volume() / self.len() as f64
    }

    /// Wavenumbers 2πk/L in FFT order, k ∈ [−n/2, n/2).
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points_per_axis as i64;
        let scale = 2.0 * std::f64::consts::PI / self.box_length;
        (0..n).map(|j| if j < n / 2 { j } else { j - n }).map(|k| k as f64 * scale).collect()
    }

    /// Axis coordinates centered on the box, x_j = (j − n/2)h.
    pub fn coordinates(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        let h = self.spacing();
        (0..n).map(|j| (j as f64 - (n / 2) as f64) * h).collect()
    }

    /// |ξ|² for every mode, row-major FFT layout.
    pub fn xi_squared(&self) -> Vec<f64> {
        let k2: Vec<f64> = self.wavenumbers().iter().map(|k| k * k).collect();
        self.separable_sum(&k2)
    }

    /// |x|² at every sample using centered coordinates.
    pub fn radius_squared(&self) -> Vec<f64> {
        let x2: Vec<f64> = self.coordinates().iter().map(|x| x * x).collect();
        self.separable_sum(&x2)
    }

    /// Value of the first coordinate at every sample.
    pub fn first_coordinate(&self) -> Vec<f64> {
        let x = self.coordinates();
        let inner = self.len() / self.points_per_axis;
        (0..self.len()).map(|i| x[i / inner]).collect()
    }

    fn separable_sum(&self, axis_values: &[f64]) -> Vec<f64> {
        let n = self.points_per_axis;
        let mut out = vec![0.0; self.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let mut rem = i;
            for _ in 0..self.dimension {
                *o += axis_values[rem % n];
                rem /= n;
            }
        }
        out
    }

    /// Grid of the dilated field: same samples, box length e^{−s}L.
    pub fn dilated(&self, s: f64) -> GridSpec {
        GridSpec { box_length: self.box_length * (-s).exp(), ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealField {
    grid: GridSpec,
    samples: Vec<f64>,
}

impl RealField {
    pub fn new(grid: GridSpec, samples: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if samples.len() != grid.len() {
            return Err(Error::Grid(format!(
                "sample count {} does not match n^N = {}",
                samples.len(),
                grid.len()
            )));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("field samples".into()));
        }
        Ok(RealField { grid, samples })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        RealField { grid, samples: vec![0.0; grid.len()] }
    }

    /// Evaluate `f` at centered coordinates (row-major).
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let x = grid.coordinates();
        let n = grid.points_per_axis;
        let mut point = vec![0.0; grid.dimension];
        let mut samples = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let mut rem = i;
            for d in (0..grid.dimension).rev() {
                point[d] = x[rem % n];
                rem /= n;
            }
            samples.push(f(&point));
        }
        RealField::new(grid, samples)
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, samples: Vec<f64>) -> Self {
        RealField { grid, samples }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn scaled(&self, c: f64) -> RealField {
        RealField { grid: self.grid, samples: self.samples.iter().map(|x| x * c).collect() }
    }

    /// `self + c·other`, both on the same grid.
    pub fn axpy(&self, c: f64, other: &RealField) -> Result<RealField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + c * b).collect();
        Ok(RealField { grid: self.grid, samples })
    }
}

/// Unnormalized forward DFT of the samples.
pub fn spectrum(f: &RealField) -> Vec<Complex64> {
    fft::forward_real(&f.samples, f.grid.dimension, f.grid.points_per_axis)
}

pub fn from_spectrum(grid: GridSpec, spec: Vec<Complex64>) -> RealField {
    let samples = fft::inverse_real(spec, grid.dimension, grid.points_per_axis);
    RealField::from_parts_unchecked(grid, samples)
}

/// Σ w(|ξ|²)|f̂|² with the discrete Parseval weight.
pub fn weighted_spectral_sum(grid: &GridSpec, spec: &[Complex64], xi2: &[f64], w: impl Fn(f64) -> f64) -> f64 {
    let s: f64 = spec.iter().zip(xi2).map(|(c, &k2)| w(k2) * c.norm_sqr()).sum();
    s * grid.parseval_weight()
}

/// Apply the radial Fourier multiplier m(|ξ|²).
pub fn apply_multiplier(f: &RealField, m: impl Fn(f64) -> f64) -> RealField {
    let xi2 = f.grid.xi_squared();
    let mut spec = spectrum(f);
    for (c, k2) in spec.iter_mut().zip(&xi2) {
        *c *= m(*k2);
    }
    from_spectrum(f.grid, spec)
}

pub fn mass(f: &RealField) -> f64 {
    f.samples.iter().map(|x| x * x).sum::<f64>() * f.grid.cell_volume()
}

/// Quadrature inner product.
pub fn inner(f: &RealField, g: &RealField) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    Ok(f.samples.iter().zip(&g.samples).map(|(a, b)| a * b).sum::<f64>() * f.grid.cell_volume())
}

pub fn laplacian_norm_sq(f: &RealField) -> f64 {
    weighted_spectral_sum(&f.grid, &spectrum(f), &f.grid.xi_squared(), |k2| k2 * k2)
}

pub fn gradient_norm_sq(f: &RealField) -> f64 {
    weighted_spectral_sum(&f.grid, &spectrum(f), &f.grid.xi_squared(), |k2| k2)
}

pub fn lp_norm(f: &RealField, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("lp_norm needs p > 1, got {p}")));
    }
    let s: f64 = f.samples.iter().map(|x| x.abs().powf(p)).sum();
    Ok((s * f.grid.cell_volume()).powf(1.0 / p))
}

/// Point reflection x → −x about the box center.
pub fn reflect(f: &RealField) -> RealField {
    let g = f.grid;
    let n = g.points_per_axis;
    let samples = (0..g.len())
        .map(|i| {
            let (mut rem, mut j, mut stride) = (i, 0, 1);
            for _ in 0..g.dimension {
                j += ((n - rem % n) % n) * stride;
                rem /= n;
                stride *= n;
            }
            f.samples[j]
        })
        .collect();
    RealField { grid: g, samples }
}

pub fn apply_bilaplacian(f: &RealField) -> RealField {
    apply_multiplier(f, |k2| k2 * k2)
}

pub fn apply_laplacian(f: &RealField) -> RealField {
    apply_multiplier(f, |k2| -k2)
}

/// Exact representation of (s∗f)(x) = e^{Ns/2} f(e^s x): samples scaled, box shrunk by e^{−s}.
pub fn dilate(f: &RealField, s: f64) -> RealField {
    let c = (f.grid.dimension as f64 * s / 2.0).exp();
    RealField { grid: f.grid.dilated(s), samples: f.samples.iter().map(|x| x * c).collect() }
}
