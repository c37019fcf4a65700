//! Functionals, gradient and diagnostic identities of the coupled system.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, GridSpec, RealField};

/// Relative tolerance for membership in S_ρ.
pub const SPHERE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub dimension: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    pub r1: f64,
    pub r2: f64,
    pub rho: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta", self.beta),
            ("rho", self.rho),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Params(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dimension == 0 {
            return Err(Error::Params("dimension must be at least 1".into()));
        }
        if !(self.r1 > 1.0 && self.r2 > 1.0 && self.r1.is_finite() && self.r2.is_finite()) {
            return Err(Error::Params(format!("r1, r2 must exceed 1, got {}, {}", self.r1, self.r2)));
        }
        let tss = two_star_star(self.dimension);
        if self.r() >= tss {
            return Err(Error::Params(format!("r = {} is not below 2** = {tss}", self.r())));
        }
        Ok(())
    }

    pub fn r(&self) -> f64 {
        self.r1 + self.r2
    }

    /// γ_r = N(r−2)/(4r).
    pub fn gamma(&self) -> f64 {
        let r = self.r();
        self.dimension as f64 * (r - 2.0) / (4.0 * r)
    }

    /// r·γ_r = N(r−2)/4, the dilation exponent of the coupling over 2.
    pub fn r_gamma(&self) -> f64 {
        self.dimension as f64 * (self.r() - 2.0) / 4.0
    }

    pub fn max_alpha_sq(&self) -> f64 {
        self.alpha1.max(self.alpha2).powi(2)
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        SystemParams { rho, ..*self }
    }
}

/// 2N/(N−4) for N ≥ 5, +∞ otherwise.
pub fn two_star_star(n: usize) -> f64 {
    if n >= 5 {
        2.0 * n as f64 / (n as f64 - 4.0)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePair {
    pub u: RealField,
    pub v: RealField,
}

impl StatePair {
    pub fn new(u: RealField, v: RealField) -> Result<Self> {
        if u.grid() != v.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(StatePair { u, v })
    }

    pub fn grid(&self) -> &GridSpec {
        self.u.grid()
    }

    pub fn mass_u(&self) -> f64 {
        spectral::mass(&self.u)
    }

    pub fn mass_v(&self) -> f64 {
        spectral::mass(&self.v)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_u() + self.mass_v()
    }

    pub fn on_sphere(&self, rho: f64) -> bool {
        (self.total_mass() - rho * rho).abs() <= SPHERE_TOL * rho * rho
    }

    pub fn scaled(&self, c: f64) -> StatePair {
        StatePair { u: self.u.scaled(c), v: self.v.scaled(c) }
    }

    pub fn dilate(&self, s: f64) -> StatePair {
        StatePair { u: spectral::dilate(&self.u, s), v: spectral::dilate(&self.v, s) }
    }

    pub fn inner(&self, other: &StatePair) -> Result<f64> {
        Ok(spectral::inner(&self.u, &other.u)? + spectral::inner(&self.v, &other.v)?)
    }

    pub fn axpy(&self, c: f64, other: &StatePair) -> Result<StatePair> {
        Ok(StatePair { u: self.u.axpy(c, &other.u)?, v: self.v.axpy(c, &other.v)? })
    }
}

/// sign(a)|a|^e, zero at a = 0.
fn signed_pow(a: f64, e: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a.signum() * a.abs().powf(e)
    }
}

/// The scalar building blocks every functional is assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    /// ‖Δu‖² + ‖Δv‖².
    pub bending: f64,
    pub grad_u: f64,
    pub grad_v: f64,
    pub coupling: f64,
    pub mass_u: f64,
    pub mass_v: f64,
}

impl Terms {
    pub fn total_mass(&self) -> f64 {
        self.mass_u + self.mass_v
    }

    /// α₁‖∇u‖² + α₂‖∇v‖².
    pub fn weighted_gradient(&self, params: &SystemParams) -> f64 {
        params.alpha1 * self.grad_u + params.alpha2 * self.grad_v
    }

    pub fn energy_i(&self, params: &SystemParams) -> f64 {
        self.energy_j(params) - params.beta * self.coupling
    }

    pub fn energy_j(&self, params: &SystemParams) -> f64 {
        0.5 * self.bending - 0.5 * self.weighted_gradient(params)
    }

    pub fn pohozaev_p(&self, params: &SystemParams) -> f64 {
        2.0 * self.bending
            - self.weighted_gradient(params)
            - 2.0 * params.beta * params.r_gamma() * self.coupling
    }

    pub fn multiplier(&self, params: &SystemParams) -> Result<f64> {
        let m = self.total_mass();
        if m <= 0.0 {
            return Err(Error::ZeroState);
        }
        Ok((-self.bending + self.weighted_gradient(params) + params.beta * params.r() * self.coupling) / m)
    }

    pub fn pohozaev_identity_residual(&self, params: &SystemParams, lambda: f64) -> f64 {
        let n = params.dimension as f64;
        (n - 4.0) / 2.0 * self.bending - (n - 2.0) / 2.0 * self.weighted_gradient(params)
            + n / 2.0 * lambda * self.total_mass()
            - n * params.beta * self.coupling
    }

    /// −α₁‖∇u‖² − α₂‖∇v‖² + 2λM − β(N − r(N−4)/2)K, zero at any solution.
    pub fn combined_identity_residual(&self, params: &SystemParams, lambda: f64) -> f64 {
        let n = params.dimension as f64;
        -self.weighted_gradient(params) + 2.0 * lambda * self.total_mass()
            - params.beta * (n - params.r() * (n - 4.0) / 2.0) * self.coupling
    }

    /// Ψ(s) = I(s∗p) in closed form.
    pub fn psi(&self, params: &SystemParams, s: f64) -> f64 {
        0.5 * (4.0 * s).exp() * self.bending - 0.5 * (2.0 * s).exp() * self.weighted_gradient(params)
            - params.beta * (2.0 * params.r_gamma() * s).exp() * self.coupling
    }

    /// dΨ/ds = P(s∗p) in closed form.
    pub fn psi_derivative(&self, params: &SystemParams, s: f64) -> f64 {
        2.0 * (4.0 * s).exp() * self.bending - (2.0 * s).exp() * self.weighted_gradient(params)
            - 2.0 * params.r_gamma() * params.beta * (2.0 * params.r_gamma() * s).exp() * self.coupling
    }
}

/// A state together with its spectra and terms, shared by energy and gradient.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub state: StatePair,
    pub spec_u: Vec<Complex64>,
    pub spec_v: Vec<Complex64>,
    pub xi2: Vec<f64>,
    pub terms: Terms,
}

impl Evaluated {
    pub fn new(state: StatePair, params: &SystemParams) -> Self {
        let grid = *state.grid();
        let xi2 = grid.xi_squared();
        let spec_u = spectral::spectrum(&state.u);
        let spec_v = spectral::spectrum(&state.v);
        let bend = |k2: f64| k2 * k2;
        let terms = Terms {
            bending: spectral::weighted_spectral_sum(&grid, &spec_u, &xi2, bend)
                + spectral::weighted_spectral_sum(&grid, &spec_v, &xi2, bend),
            grad_u: spectral::weighted_spectral_sum(&grid, &spec_u, &xi2, |k2| k2),
            grad_v: spectral::weighted_spectral_sum(&grid, &spec_v, &xi2, |k2| k2),
            coupling: coupling_samples(&state, params),
            mass_u: state.mass_u(),
            mass_v: state.mass_v(),
        };
        Evaluated { state, spec_u, spec_v, xi2, terms }
    }

    /// ∇I = (Δ²u + α₁Δu − βr₁|u|^{r₁−2}u|v|^{r₂}, Δ²v + α₂Δv − βr₂|u|^{r₁}|v|^{r₂−2}v).
    pub fn gradient(&self, params: &SystemParams) -> StatePair {
        let grid = *self.state.grid();
        let lin = |spec: &[Complex64], alpha: f64| {
            let s: Vec<Complex64> = spec.iter().zip(&self.xi2).map(|(c, &k2)| c * (k2 * k2 - alpha * k2)).collect();
            spectral::from_spectrum(grid, s)
        };
        let mut gu = lin(&self.spec_u, params.alpha1).into_samples();
        let mut gv = lin(&self.spec_v, params.alpha2).into_samples();
        let (u, v) = (self.state.u.samples(), self.state.v.samples());
        let (b, r1, r2) = (params.beta, params.r1, params.r2);
        for i in 0..u.len() {
            let (a, c) = (u[i], v[i]);
            gu[i] -= b * r1 * signed_pow(a, r1 - 1.0) * c.abs().powf(r2);
            gv[i] -= b * r2 * a.abs().powf(r1) * signed_pow(c, r2 - 1.0);
        }
        StatePair {
            u: RealField::from_parts_unchecked(grid, gu),
            v: RealField::from_parts_unchecked(grid, gv),
        }
    }
}

fn coupling_samples(p: &StatePair, params: &SystemParams) -> f64 {
    let s: f64 = p
        .u
        .samples()
        .iter()
        .zip(p.v.samples())
        .map(|(a, b)| a.abs().powf(params.r1) * b.abs().powf(params.r2))
        .sum();
    s * p.grid().cell_volume()
}

pub fn terms(p: &StatePair, params: &SystemParams) -> Terms {
    Evaluated::new(p.clone(), params).terms
}

pub fn coupling_integral(p: &StatePair, params: &SystemParams) -> f64 {
    coupling_samples(p, params)
}

pub fn energy_i(p: &StatePair, params: &SystemParams) -> f64 {
    terms(p, params).energy_i(params)
}

pub fn energy_j(p: &StatePair, params: &SystemParams) -> f64 {
    terms(p, params).energy_j(params)
}

/// m^J(ρ) = −(max{α₁²,α₂²}/8)ρ².
pub fn mj_value(params: &SystemParams) -> f64 {
    -params.max_alpha_sq() / 8.0 * params.rho * params.rho
}

pub fn pohozaev_p(p: &StatePair, params: &SystemParams) -> f64 {
    terms(p, params).pohozaev_p(params)
}

pub fn l2_gradient_i(p: &StatePair, params: &SystemParams) -> StatePair {
    Evaluated::new(p.clone(), params).gradient(params)
}

pub fn multiplier_estimate(p: &StatePair, params: &SystemParams) -> Result<f64> {
    terms(p, params).multiplier(params)
}

pub fn pohozaev_identity_residual(p: &StatePair, params: &SystemParams, lambda: f64) -> f64 {
    terms(p, params).pohozaev_identity_residual(params, lambda)
}

/// ‖∇I(p) + λp‖₂.
pub fn euler_lagrange_residual(p: &StatePair, params: &SystemParams, lambda: f64) -> Result<f64> {
    let g = l2_gradient_i(p, params).axpy(lambda, p)?;
    Ok(g.inner(&g)?.max(0.0).sqrt())
}

/// ‖p − p(−·)‖/‖p‖: how far the pair has drifted from point symmetry about the box center.
pub fn symmetry_drift(p: &StatePair) -> Result<f64> {
    let mirrored = StatePair::new(spectral::reflect(&p.u), spectral::reflect(&p.v))?;
    let diff = p.axpy(-1.0, &mirrored)?;
    let norm = p.inner(p)?;
    if norm <= 0.0 {
        return Err(Error::ZeroState);
    }
    Ok((diff.inner(&diff)? / norm).sqrt())
}

/// Parts of Q with the α₁ ≥ α₂ convention applied by relabeling.
#[derive(Debug, Clone, Copy)]
pub struct QParts {
    pub coupling: f64,
    /// ‖(Δ+α₁/2)u‖² + ‖(Δ+α₂/2)v‖² + ((α₁²−α₂²)/4)‖v‖².
    pub denominator_core: f64,
    pub total_mass: f64,
}

impl QParts {
    pub fn quotient(&self, params: &SystemParams) -> f64 {
        self.coupling / (self.denominator_core * self.total_mass.powf(params.r() / 2.0 - 1.0))
    }
}

pub fn q_parts(p: &StatePair, params: &SystemParams) -> Result<QParts> {
    let total_mass = p.total_mass();
    if total_mass <= 0.0 {
        return Err(Error::ZeroState);
    }
    // Relabel so that the first component carries the larger α.
    let (first, second, a1, a2) = if params.alpha1 >= params.alpha2 {
        (&p.u, &p.v, params.alpha1, params.alpha2)
    } else {
        (&p.v, &p.u, params.alpha2, params.alpha1)
    };
    let grid = p.grid();
    let xi2 = grid.xi_squared();
    let shifted = |f: &RealField, a: f64| {
        spectral::weighted_spectral_sum(grid, &spectral::spectrum(f), &xi2, |k2| (k2 - a / 2.0).powi(2))
    };
    let denominator_core =
        shifted(first, a1) + shifted(second, a2) + (a1 * a1 - a2 * a2) / 4.0 * spectral::mass(second);
    Ok(QParts { coupling: coupling_integral(p, params), denominator_core, total_mass })
}

pub fn quotient_q(p: &StatePair, params: &SystemParams) -> Result<f64> {
    Ok(q_parts(p, params)?.quotient(params))
}

/// H = I − m^J.
pub fn gap_h(p: &StatePair, params: &SystemParams) -> f64 {
    energy_i(p, params) - mj_value(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> SystemParams {
        SystemParams { dimension: 1, alpha1: 1.0, alpha2: 1.0, beta: 1.0, r1: 2.0, r2: 2.0, rho: 1.0 }
    }

    fn cos_pair(amp: f64) -> StatePair {
        let g = GridSpec::new(1, 32, 2.0 * PI).unwrap();
        let f = RealField::from_fn(g, |x| amp * x[0].cos()).unwrap();
        StatePair::new(f.clone(), f).unwrap()
    }

    #[test]
    fn validation() {
        assert!(params().validate().is_ok());
        assert!(SystemParams { r1: 1.0, ..params() }.validate().is_err());
        assert!(SystemParams { beta: 0.0, ..params() }.validate().is_err());
        assert!(SystemParams { dimension: 5, r1: 5.0, r2: 5.0, ..params() }.validate().is_err());
        assert!(SystemParams { dimension: 5, r1: 2.0, r2: 2.0, ..params() }.validate().is_ok());
    }

    #[test]
    fn zero_pair() {
        let g = GridSpec::new(1, 16, 4.0).unwrap();
        let z = StatePair::new(RealField::zeros(g), RealField::zeros(g)).unwrap();
        let p = params();
        assert_eq!(energy_i(&z, &p), 0.0);
        assert_eq!(pohozaev_p(&z, &p), 0.0);
        assert!(multiplier_estimate(&z, &p).is_err());
        assert!(quotient_q(&z, &p).is_err());
        let gr = l2_gradient_i(&z, &p);
        assert!(gr.u.samples().iter().chain(gr.v.samples()).all(|x| *x == 0.0));
    }

    #[test]
    fn constant_coupling() {
        let g = GridSpec::new(2, 8, 3.0).unwrap();
        let c = RealField::new(g, vec![1.5; g.len()]).unwrap();
        let p = SystemParams { dimension: 2, r1: 2.5, r2: 1.5, ..params() };
        let k = coupling_integral(&StatePair::new(c.clone(), c).unwrap(), &p);
        assert!((k - 1.5f64.powf(4.0) * 9.0).abs() < 1e-12);
    }

    #[test]
    fn single_mode_energy_and_multiplier() {
        let pair = cos_pair(0.8);
        let m = spectral::mass(&pair.u);
        let p = SystemParams { beta: 0.0, ..params() };
        // α₁=α₂=1, β=0: each component contributes ½m − ½m.
        assert!(energy_j(&pair, &p).abs() < 1e-12);
        let p2 = SystemParams { alpha1: 3.0, alpha2: 3.0, ..p };
        let lam = multiplier_estimate(&pair, &p2).unwrap();
        assert!((lam - 2.0).abs() < 1e-12);
        let p3 = SystemParams { alpha1: 2.0, alpha2: 2.0, ..p };
        assert!(pohozaev_p(&pair, &p3).abs() < 1e-12 * m);
    }

    #[test]
    fn mj_arithmetic() {
        let p = SystemParams { alpha1: 2.0, alpha2: 1.0, ..params() };
        assert!((mj_value(&p) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn j_minus_i_is_coupling() {
        let g = GridSpec::new(1, 64, 12.0).unwrap();
        let u = RealField::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap();
        let v = RealField::from_fn(g, |x| (-(x[0] - 0.5).powi(2)).exp()).unwrap();
        let pair = StatePair::new(u, v).unwrap();
        let p = SystemParams { beta: 3.7, ..params() };
        let diff = energy_j(&pair, &p) - energy_i(&pair, &p);
        assert!((diff - 3.7 * coupling_integral(&pair, &p)).abs() < 1e-13);
    }

    #[test]
    fn q_vanishes_without_v_and_relabels() {
        let g = GridSpec::new(1, 64, 12.0).unwrap();
        let u = RealField::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap();
        let v = RealField::from_fn(g, |x| 0.5 * (-x[0] * x[0] / 2.0).exp()).unwrap();
        let p = params();
        let only_u = StatePair::new(u.clone(), RealField::zeros(g)).unwrap();
        assert_eq!(quotient_q(&only_u, &p).unwrap(), 0.0);
        let pq = SystemParams { alpha1: 2.0, alpha2: 0.5, r1: 2.5, r2: 1.5, ..p };
        let swapped = SystemParams { alpha1: 0.5, alpha2: 2.0, r1: 1.5, r2: 2.5, ..p };
        let a = quotient_q(&StatePair::new(u.clone(), v.clone()).unwrap(), &pq).unwrap();
        let b = quotient_q(&StatePair::new(v, u).unwrap(), &swapped).unwrap();
        assert!((a - b).abs() < 1e-14 * a);
    }

    #[test]
    fn two_star_star_values() {
        assert!(two_star_star(4).is_infinite());
        assert!((two_star_star(5) - 10.0).abs() < 1e-15);
    }
}
