//! Exponents, Gagliardo-Nirenberg constants, thresholds and the quotient supremum R.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{self, StatePair, SystemParams};
use crate::spectral::{self, GridSpec, RealField};

/// (r̄, 2**) with +∞ for 2** when N ≤ 4.
pub fn critical_exponents(n: usize) -> (f64, f64) {
    (2.0 + 8.0 / n as f64, model::two_star_star(n))
}

pub fn gamma_r(n: usize, r: f64) -> Result<f64> {
    let (_, tss) = critical_exponents(n);
    if !(r > 2.0 && r < tss) {
        return Err(Error::Domain(format!("gamma_r needs 2 < r < 2**, got r = {r} at N = {n}")));
    }
    Ok(n as f64 * (r - 2.0) / (4.0 * r))
}

/// max{4, 2+8/(N+1)} ≤ r ≤ 2+8/N.
pub fn borderline_check(n: usize, r: f64) -> bool {
    let lower = 4f64.max(2.0 + 8.0 / (n as f64 + 1.0));
    lower <= r && r <= 2.0 + 8.0 / n as f64
}

/// ‖u‖_r / (‖u‖₂^{1−γ}‖Δu‖₂^{γ}).
pub fn weinstein_quotient(u: &RealField, r: f64) -> Result<f64> {
    let gamma = gamma_r(u.grid().dimension, r)?;
    let m = spectral::mass(u);
    let a = spectral::laplacian_norm_sq(u);
    if m <= 0.0 || a <= 0.0 {
        return Err(Error::ZeroState);
    }
    Ok(spectral::lp_norm(u, r)? / (m.powf((1.0 - gamma) / 2.0) * a.powf(gamma / 2.0)))
}

#[derive(Debug, Clone)]
pub struct GnEstimate {
    pub constant: f64,
    /// Unit-mass maximizer found by the ascent.
    pub extremal: RealField,
    pub iterations: usize,
    pub converged: bool,
}

struct LogW {
    value: f64,
    mass: f64,
    bending: f64,
    lr: f64,
}

fn log_w(u: &RealField, r: f64, gamma: f64, xi2: &[f64]) -> (LogW, Vec<rustfft::num_complex::Complex64>) {
    let grid = u.grid();
    let spec = spectral::spectrum(u);
    let mass = spectral::mass(u);
    let bending = spectral::weighted_spectral_sum(grid, &spec, xi2, |k2| k2 * k2);
    let lr = u.samples().iter().map(|x| x.abs().powf(r)).sum::<f64>() * grid.cell_volume();
    let value = lr.ln() / r - (1.0 - gamma) / 2.0 * mass.ln() - gamma / 2.0 * bending.ln();
    (LogW { value, mass, bending, lr }, spec)
}

fn normalize_unit(u: RealField) -> RealField {
    let m = spectral::mass(&u);
    u.scaled(1.0 / m.sqrt())
}

/// Maximize the Weinstein quotient by preconditioned ascent on log W from a Gaussian seed.
pub fn gn_constant_estimate(n: usize, r: f64, grid: &GridSpec, tol: f64, max_iters: usize) -> Result<GnEstimate> {
    if grid.dimension != n {
        return Err(Error::Grid(format!("grid dimension {} differs from N = {n}", grid.dimension)));
    }
    let gamma = gamma_r(n, r)?;
    let xi2 = grid.xi_squared();
    let r2 = grid.radius_squared();
    let mut u = normalize_unit(RealField::new(*grid, r2.iter().map(|x| (-x / 2.0).exp()).collect())?);
    let (mut lw, mut spec) = log_w(&u, r, gamma, &xi2);
    let mut tau = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iters {
        iterations = it + 1;
        let bil: Vec<_> = spec.iter().zip(&xi2).map(|(c, k2)| c * (k2 * k2)).collect();
        let bil = spectral::from_spectrum(*grid, bil);
        let g: Vec<f64> = u
            .samples()
            .iter()
            .zip(bil.samples())
            .map(|(&x, &b)| {
                x.abs().powf(r - 2.0) * x / lw.lr - (1.0 - gamma) * x / lw.mass - gamma * b / lw.bending
            })
            .collect();
        let g = RealField::new(*grid, g)?;
        let d = spectral::apply_multiplier(&g, |k2| 1.0 / (1.0 + k2 * k2));
        let slope = spectral::inner(&g, &d)?;
        if slope < tol {
            converged = true;
            break;
        }
        tau *= 1.5;
        let (candidate, next) = loop {
            let un = normalize_unit(u.axpy(tau, &d)?);
            let (lwn, specn) = log_w(&un, r, gamma, &xi2);
            if lwn.value >= lw.value + 1e-4 * tau * slope || tau < 1e-14 {
                break (un, (lwn, specn));
            }
            tau *= 0.5;
        };
        if next.0.value < lw.value {
            converged = true;
            break;
        }
        u = candidate;
        lw = next.0;
        spec = next.1;
    }
    if !converged {
        log::warn!("GN ascent stopped after {max_iters} iterations without meeting tol {tol}");
    }
    Ok(GnEstimate { constant: lw.value.exp(), extremal: u, iterations, converged })
}

/// Sharp constant c in a^{r₁}b^{r₂} ≤ c(a²+b²)^{r/2}.
pub fn pointwise_coupling_constant(r1: f64, r2: f64) -> f64 {
    let r = r1 + r2;
    (r1 / r).powf(r1 / 2.0) * (r2 / r).powf(r2 / 2.0)
}

pub fn d1(params: &SystemParams, c_gn: f64) -> f64 {
    pointwise_coupling_constant(params.r1, params.r2) * c_gn.powf(params.r())
}

pub fn d2(params: &SystemParams) -> f64 {
    params.alpha1.max(params.alpha2)
}

fn require_supercritical(params: &SystemParams) -> Result<()> {
    let (r_bar, _) = critical_exponents(params.dimension);
    if params.r() <= r_bar {
        return Err(Error::Domain(format!("threshold needs r > r̄ = {r_bar}, got r = {}", params.r())));
    }
    Ok(())
}

/// c*(N,r) = [1/(2D₁(rγ−1))]·[(rγ−2)/((rγ−1)D₂)]^{rγ−2}.
pub fn c_star(params: &SystemParams, d1: f64, d2: f64) -> Result<f64> {
    require_supercritical(params)?;
    let k = params.r_gamma();
    Ok(1.0 / (2.0 * d1 * (k - 1.0)) * ((k - 2.0) / ((k - 1.0) * d2)).powf(k - 2.0))
}

/// c_*(N,r), two branches split at γ = 1/2.
pub fn c_lower_star(params: &SystemParams, d1: f64) -> Result<f64> {
    require_supercritical(params)?;
    let k = params.r_gamma();
    let gamma = params.gamma();
    let r = params.r();
    let base = if gamma > 0.5 {
        (1.0 - gamma) / gamma * 4.0 / params.max_alpha_sq()
    } else {
        (r - 2.0) / (2.0 * (k - 1.0)) * 4.0 / params.max_alpha_sq()
    };
    Ok(1.0 / (2.0 * d1 * (k - 1.0)) * base.powf((k - 2.0) / 2.0))
}

/// (1/(2D₁β))^{N/8}.
pub fn mass_critical_cap(params: &SystemParams, d1: f64) -> f64 {
    (1.0 / (2.0 * d1 * params.beta)).powf(params.dimension as f64 / 8.0)
}

/// ρ* = (1/(2βR))^{1/(r−2)}.
pub fn rho_star(params: &SystemParams, r_estimate: f64) -> f64 {
    (1.0 / (2.0 * params.beta * r_estimate)).powf(1.0 / (params.r() - 2.0))
}

fn ser_extended<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*x)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSet {
    pub gamma_r: f64,
    pub r_bar: f64,
    #[serde(serialize_with = "ser_extended")]
    pub two_star_star: f64,
    #[serde(rename = "C_gn")]
    pub c_gn: f64,
    #[serde(skip)]
    pub c_gn_extremal: Option<RealField>,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
    pub c_star: Option<f64>,
    pub c_lower_star: Option<f64>,
    #[serde(rename = "R_estimate")]
    pub r_estimate: Option<f64>,
    /// Evidence only: a growth heuristic, not a proof that R = ∞.
    #[serde(rename = "R_diverging")]
    pub r_diverging: Option<bool>,
    pub rho_star_estimate: Option<f64>,
    pub mass_critical_cap: f64,
}

pub fn thresholds(params: &SystemParams, c_gn: f64) -> Result<ThresholdSet> {
    if !(c_gn > 0.0 && c_gn.is_finite()) {
        return Err(Error::Domain(format!("C_gn must be positive, got {c_gn}")));
    }
    let n = params.dimension;
    let (r_bar, tss) = critical_exponents(n);
    let gamma = gamma_r(n, params.r())?;
    let d1 = d1(params, c_gn);
    let d2 = d2(params);
    let supercritical = params.r() > r_bar;
    Ok(ThresholdSet {
        gamma_r: gamma,
        r_bar,
        two_star_star: tss,
        c_gn,
        c_gn_extremal: None,
        d1,
        d2,
        c_star: if supercritical { Some(c_star(params, d1, d2)?) } else { None },
        c_lower_star: if supercritical { Some(c_lower_star(params, d1)?) } else { None },
        r_estimate: None,
        r_diverging: None,
        rho_star_estimate: None,
        mass_critical_cap: mass_critical_cap(params, d1),
    })
}

impl ThresholdSet {
    pub fn with_r_estimate(mut self, params: &SystemParams, est: &REstimate) -> Self {
        self.r_estimate = Some(est.r_estimate);
        self.r_diverging = Some(est.r_diverging);
        self.rho_star_estimate = Some(rho_star(params, est.r_estimate));
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub box_length: f64,
    pub width: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct REstimate {
    pub r_estimate: f64,
    pub r_diverging: bool,
    pub sweep: Vec<SweepPoint>,
    pub ascent_best: f64,
    pub extremal_family_best: Option<f64>,
}

/// Divergence flag threshold on the last-to-first sweep ratio.
pub const DIVERGENCE_RATIO: f64 = 10.0;
const Q_ASCENT_ITERS: usize = 60;

fn seed_pair(grid: &GridSpec, params: &SystemParams, width: f64, packet: bool) -> Result<StatePair> {
    let ratio = (params.r2 / params.r1).sqrt();
    let r2 = grid.radius_squared();
    let x1 = grid.first_coordinate();
    let (k1, k2) = ((params.alpha1 / 2.0).sqrt(), (params.alpha2 / 2.0).sqrt());
    // exp(−|x|²/σ²): at σ = L/4 the envelope is e^{−4} at the box edge.
    let env: Vec<f64> = r2.iter().map(|x| (-x / (width * width)).exp()).collect();
    let (u, v): (Vec<f64>, Vec<f64>) = env
        .iter()
        .zip(&x1)
        .map(|(e, x)| {
            if packet {
                (e * (k1 * x).cos(), ratio * e * (k2 * x).cos())
            } else {
                (*e, ratio * e)
            }
        })
        .unzip();
    StatePair::new(RealField::new(*grid, u)?, RealField::new(*grid, v)?)
}

/// Gradient of log Q, with the extra mass term on the component of smaller α.
fn log_q_gradient(p: &StatePair, params: &SystemParams) -> Result<(f64, StatePair)> {
    let parts = model::q_parts(p, params)?;
    let grid = *p.grid();
    let (extra_u, extra_v) = if params.alpha1 >= params.alpha2 {
        (0.0, (params.alpha1.powi(2) - params.alpha2.powi(2)) / 4.0)
    } else {
        ((params.alpha2.powi(2) - params.alpha1.powi(2)) / 4.0, 0.0)
    };
    let shifted = |f: &RealField, a: f64, extra: f64| {
        spectral::apply_multiplier(f, |k2| (k2 - a / 2.0).powi(2) + extra).into_samples()
    };
    let tu = shifted(&p.u, params.alpha1, extra_u);
    let tv = shifted(&p.v, params.alpha2, extra_v);
    let (k, d, m) = (parts.coupling, parts.denominator_core, parts.total_mass);
    let r = params.r();
    let (u, v) = (p.u.samples(), p.v.samples());
    let mut gu = Vec::with_capacity(u.len());
    let mut gv = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let (a, b) = (u[i], v[i]);
        let du = if a == 0.0 { 0.0 } else { params.r1 * a.abs().powf(params.r1 - 2.0) * a * b.abs().powf(params.r2) };
        let dv = if b == 0.0 { 0.0 } else { params.r2 * b.abs().powf(params.r2 - 2.0) * b * a.abs().powf(params.r1) };
        gu.push(du / k - 2.0 * tu[i] / d - (r - 2.0) * a / m);
        gv.push(dv / k - 2.0 * tv[i] / d - (r - 2.0) * b / m);
    }
    let g = StatePair::new(RealField::new(grid, gu)?, RealField::new(grid, gv)?)?;
    Ok((parts.quotient(params), g))
}

fn unit_mass(p: &StatePair) -> StatePair {
    p.scaled(1.0 / p.total_mass().sqrt())
}

/// Short preconditioned ascent of Q; returns the best value reached.
fn q_ascent(seed: StatePair, params: &SystemParams, iters: usize) -> Result<f64> {
    let mut p = unit_mass(&seed);
    let (mut q, mut g) = log_q_gradient(&p, params)?;
    let mut tau = 1.0;
    for _ in 0..iters {
        let prec = |f: &RealField| spectral::apply_multiplier(f, |k2| 1.0 / (1.0 + k2 * k2));
        let d = StatePair::new(prec(&g.u), prec(&g.v))?;
        let slope = g.inner(&d)?;
        if !(slope > 1e-14) {
            break;
        }
        tau *= 1.5;
        let mut accepted = None;
        while tau > 1e-12 {
            let cand = unit_mass(&p.axpy(tau, &d)?);
            let qn = model::quotient_q(&cand, params)?;
            if qn.is_finite() && qn.ln() >= q.ln() + 1e-4 * tau * slope {
                accepted = Some(cand);
                break;
            }
            tau *= 0.5;
        }
        match accepted {
            Some(c) => {
                p = c;
                (q, g) = log_q_gradient(&p, params)?;
            }
            None => break,
        }
    }
    Ok(q)
}

/// Lower-bound estimate of R = sup Q with a divergence flag from a fixed width/box sweep.
pub fn estimate_r(params: &SystemParams, grid: &GridSpec, gn: Option<&GnEstimate>) -> Result<REstimate> {
    let (r_bar, _) = critical_exponents(params.dimension);
    if !(params.r() > 2.0 && params.r() <= r_bar + 1e-12) {
        return Err(Error::Domain(format!("estimate_R needs 2 < r ≤ r̄ = {r_bar}, got {}", params.r())));
    }
    let big = GridSpec::new(grid.dimension, grid.points_per_axis * 4, grid.box_length * 4.0)?;
    let jobs: Vec<(GridSpec, f64)> = [*grid, big]
        .iter()
        .flat_map(|g| [32.0, 16.0, 8.0, 4.0].map(|d| (*g, g.box_length / d)))
        .collect();
    let evaluated: Vec<(SweepPoint, StatePair)> = jobs
        .par_iter()
        .map(|(g, width)| -> Result<(SweepPoint, StatePair)> {
            let mut best: Option<(f64, StatePair)> = None;
            for packet in [false, true] {
                let p = seed_pair(g, params, *width, packet)?;
                let q = model::quotient_q(&p, params)?;
                if best.as_ref().map_or(true, |(b, _)| q > *b) {
                    best = Some((q, p));
                }
            }
            let (q, p) = best.expect("two seeds evaluated");
            Ok((SweepPoint { box_length: g.box_length, width: *width, q }, p))
        })
        .collect::<Result<_>>()?;
    let first = evaluated.first().map(|e| e.0.q).unwrap_or(0.0);
    let last = evaluated.last().map(|e| e.0.q).unwrap_or(0.0);
    let r_diverging = first > 0.0 && last / first > DIVERGENCE_RATIO;

    // Ascent from the best seed on the base box.
    let base_best = evaluated[..4]
        .iter()
        .max_by(|a, b| a.0.q.total_cmp(&b.0.q))
        .map(|e| e.1.clone())
        .expect("sweep is nonempty");
    let ascent_best = q_ascent(base_best, params, Q_ASCENT_ITERS)?;

    let extremal_family_best = match gn {
        Some(est) => {
            let ratio = (params.r2 / params.r1).sqrt();
            let pair = StatePair::new(est.extremal.clone(), est.extremal.scaled(ratio))?;
            let mut best = f64::NEG_INFINITY;
            for i in 0..=12 {
                let s = 0.25 * i as f64;
                best = best.max(model::quotient_q(&pair.dilate(s), params)?);
            }
            Some(best)
        }
        None => None,
    };
    let mut r_estimate = evaluated.iter().map(|e| e.0.q).fold(ascent_best, f64::max);
    if let Some(b) = extremal_family_best {
        r_estimate = r_estimate.max(b);
    }
    Ok(REstimate {
        r_estimate,
        r_diverging,
        sweep: evaluated.into_iter().map(|e| e.0).collect(),
        ascent_best,
        extremal_family_best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, r1: f64, r2: f64) -> SystemParams {
        SystemParams { dimension: n, alpha1: 1.0, alpha2: 1.0, beta: 1.0, r1, r2, rho: 1.0 }
    }

    #[test]
    fn exponents() {
        assert_eq!(critical_exponents(4).0, 4.0);
        assert!(critical_exponents(4).1.is_infinite());
        assert_eq!(critical_exponents(1).0, 10.0);
        let (rb, tss) = critical_exponents(5);
        assert!((rb - 3.6).abs() < 1e-15 && (tss - 10.0).abs() < 1e-15);
        assert!((gamma_r(2, 4.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((gamma_r(2, 8.0).unwrap() - 0.375).abs() < 1e-15);
        assert!((6.0 * gamma_r(2, 6.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(gamma_r(5, 10.0).is_err());
        assert!(gamma_r(1, 2.0).is_err());
    }

    #[test]
    fn borderline() {
        assert!(borderline_check(1, 6.0));
        assert!(!borderline_check(1, 4.5));
        assert!(borderline_check(3, 4.0));
        assert!(borderline_check(1, 10.0));
        assert!(!borderline_check(1, 10.5));
    }

    #[test]
    fn thresholds_plugs() {
        let params = p(2, 4.0, 4.0);
        let t = thresholds(&params, 0.5).unwrap();
        assert!((t.c_star.unwrap() - 1.0 / (8.0 * t.d1 * t.d2)).abs() < 1e-12 * t.c_star.unwrap());
        let expected = 1.0 / (4.0 * t.d1) * 6f64.sqrt();
        assert!((t.c_lower_star.unwrap() - expected).abs() < 1e-12 * expected);
        assert!(c_star(&p(2, 2.0, 2.0), 1.0, 1.0).is_err());
        assert!(c_lower_star(&p(1, 3.0, 3.0), 1.0).is_err());
    }

    #[test]
    fn c_star_limit_at_critical() {
        // rγ → 2⁺ drives the bracket exponent to zero.
        let params = p(1, 5.0, 5.0 + 1e-9);
        let d1 = 0.3;
        let c = c_star(&params, d1, 1.0).unwrap();
        assert!((c - 1.0 / (2.0 * d1)).abs() < 1e-6);
    }

    #[test]
    fn gn_quotient_is_dilation_invariant() {
        let g = GridSpec::new(1, 256, 30.0).unwrap();
        let u = RealField::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp() * (1.0 + 0.3 * x[0])).unwrap();
        let w0 = weinstein_quotient(&u, 6.0).unwrap();
        for s in [-0.7, 0.2, 1.3] {
            let w = weinstein_quotient(&spectral::dilate(&u, s), 6.0).unwrap();
            assert!((w - w0).abs() < 1e-8 * w0);
        }
    }

    #[test]
    fn gn_estimate_dominates_gaussian() {
        let g = GridSpec::new(1, 256, 20.0).unwrap();
        let est = gn_constant_estimate(1, 6.0, &g, 1e-12, 500).unwrap();
        let gauss = RealField::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp()).unwrap();
        assert!(est.constant >= weinstein_quotient(&gauss, 6.0).unwrap());
        assert!(weinstein_quotient(&est.extremal, 6.0).unwrap() >= 0.99 * est.constant);
        assert!((spectral::mass(&est.extremal) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_and_rho_star_monotone() {
        let a = mass_critical_cap(&p(1, 5.0, 5.0), 0.1);
        let b = mass_critical_cap(&SystemParams { beta: 2.0, ..p(1, 5.0, 5.0) }, 0.1);
        assert!(b < a);
        let params = p(1, 3.5, 3.5);
        assert!(rho_star(&params, 2.0) < rho_star(&params, 1.0));
    }

    #[test]
    fn sharp_pointwise_constant() {
        let c = pointwise_coupling_constant(1.0, 1.0);
        assert!((c - 0.5).abs() < 1e-15);
        // Equality at a² : b² = r₁ : r₂.
        let (r1, r2) = (2.5, 1.5);
        let c = pointwise_coupling_constant(r1, r2);
        let (a, b) = ((r1 / 4.0f64).sqrt(), (r2 / 4.0f64).sqrt());
        assert!((a.powf(r1) * b.powf(r2) - c).abs() < 1e-15);
    }
}
