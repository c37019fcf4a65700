//! Mass-supercritical machinery: the geometry function h, its roots, endpoints
//! of the mountain-pass paths, fiber maximization of Ψ and the saddle search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{critical_exponents, ThresholdSet};
use crate::error::{Error, Result};
use crate::ground_state::{check_grid, project_to_sphere};
use crate::model::{self, Evaluated, StatePair, SystemParams, Terms};
use crate::spectral::{self, GridSpec, RealField};

fn require_supercritical(params: &SystemParams) -> Result<()> {
    let (r_bar, _) = critical_exponents(params.dimension);
    if params.r() <= r_bar {
        return Err(Error::Domain(format!("mountain-pass geometry needs r > r̄ = {r_bar}, got {}", params.r())));
    }
    Ok(())
}

/// h(t) = ½t² − ½D₂ρt − D₁βρ^{r(1−γ)}t^{rγ}.
pub fn geometry_h(t: f64, params: &SystemParams, th: &ThresholdSet) -> Result<f64> {
    require_supercritical(params)?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("geometry_h needs t >= 0, got {t}")));
    }
    Ok(h_unchecked(t, params, th))
}

fn h_unchecked(t: f64, params: &SystemParams, th: &ThresholdSet) -> f64 {
    let r = params.r();
    let rg = params.r_gamma();
    let rho = params.rho;
    0.5 * t * t - 0.5 * th.d2 * rho * t - th.d1 * params.beta * rho.powf(r * (1.0 - th.gamma_r)) * t.powf(rg)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeometryReport {
    #[serde(rename = "R0")]
    pub r0: Option<f64>,
    #[serde(rename = "R1")]
    pub r1: Option<f64>,
    pub t_bar: f64,
    pub h_max: f64,
    pub feasible: bool,
}

/// t̄ = [1/(2D₁βρ^{r(1−γ)}(rγ−1))]^{1/(rγ−2)}.
pub fn t_bar(params: &SystemParams, th: &ThresholdSet) -> f64 {
    let rg = params.r_gamma();
    let c = 2.0 * th.d1 * params.beta * params.rho.powf(params.r() * (1.0 - th.gamma_r)) * (rg - 1.0);
    (1.0 / c).powf(1.0 / (rg - 2.0))
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo_neg = f(lo) < 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < 0.0) == f_lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Return whichever end has the smaller residual.
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

pub fn bracket_roots_h(params: &SystemParams, th: &ThresholdSet) -> Result<GeometryReport> {
    require_supercritical(params)?;
    let tb = t_bar(params, th);
    let h = |t: f64| h_unchecked(t, params, th);
    let h_max = h(tb);
    if !(h_max > 0.0) {
        return Ok(GeometryReport { r0: None, r1: None, t_bar: tb, h_max, feasible: false });
    }
    // h(0) = 0 and h < 0 just above it, so start the bracket off the origin.
    let r0 = bisect(1e-9 * tb, tb, h);
    let mut hi = 2.0 * tb;
    while h(hi) >= 0.0 {
        hi *= 2.0;
    }
    let r1 = bisect(tb, hi, h);
    Ok(GeometryReport { r0: Some(r0), r1: Some(r1), t_bar: tb, h_max, feasible: true })
}

/// Gaussian pair with v = √(r₂/r₁)u on S_ρ, centered on the box.
pub fn coupled_gaussian_profile(grid: &GridSpec, params: &SystemParams, width: f64) -> Result<StatePair> {
    let u = RealField::new(*grid, grid.radius_squared().iter().map(|x| (-x / (2.0 * width * width)).exp()).collect())?;
    let v = u.scaled((params.r2 / params.r1).sqrt());
    project_to_sphere(&StatePair::new(u, v)?, params.rho)
}

#[derive(Debug, Clone)]
pub struct Endpoints {
    pub low: StatePair,
    pub high: StatePair,
    pub s_low: f64,
    pub s_high: f64,
    pub bending_low: f64,
    pub bending_high: f64,
    pub energy_low: f64,
    pub energy_high: f64,
}

/// Dilate a profile on S_ρ to s ≪ 0 (inside A_ρ) and s ≫ 0 (outside, beyond R₁), both with I < 0.
pub fn build_endpoints(params: &SystemParams, profile: &StatePair, geometry: &GeometryReport) -> Result<Endpoints> {
    let (Some(r0), Some(r1)) = (geometry.r0, geometry.r1) else {
        return Err(Error::Endpoint("geometry is infeasible".into()));
    };
    let p = project_to_sphere(profile, params.rho)?;
    let terms = model::terms(&p, params);
    let verify = |s: f64| {
        let q = p.dilate(s);
        let t = model::terms(&q, params);
        (q, t.bending, t.energy_i(params))
    };
    let mut low = None;
    for k in 1..=200 {
        let s = -0.25 * k as f64;
        if (4.0 * s).exp() * terms.bending < r0 * r0 && terms.psi(params, s) < 0.0 {
            let (q, b, e) = verify(s);
            if b < r0 * r0 && e < 0.0 {
                low = Some((q, s, b, e));
                break;
            }
        }
    }
    let mut high = None;
    for k in 0..=200 {
        let s = 0.25 * k as f64;
        if (4.0 * s).exp() * terms.bending > r1 * r1 && terms.psi(params, s) < 0.0 {
            let (q, b, e) = verify(s);
            if b > r1 * r1 && e < 0.0 {
                high = Some((q, s, b, e));
                break;
            }
        }
    }
    let (Some(low), Some(high)) = (low, high) else {
        return Err(Error::Endpoint(format!(
            "no dilation in [-50, 50] satisfies the endpoint checks (bending {:.6e}, R0 {r0:.6e}, R1 {r1:.6e})",
            terms.bending
        )));
    };
    Ok(Endpoints {
        low: low.0,
        high: high.0,
        s_low: low.1,
        s_high: high.1,
        bending_low: low.2,
        bending_high: high.2,
        energy_low: low.3,
        energy_high: high.3,
    })
}

/// Maximize Ψ(s) = I(s∗p) over [s_lo, s_hi] by bisection on dΨ/ds = P(s∗p).
pub fn dilation_path_critical(p: &StatePair, params: &SystemParams, s_lo: f64, s_hi: f64) -> Result<(f64, f64)> {
    let terms = model::terms(p, params);
    path_critical_from_terms(&terms, params, s_lo, s_hi)
}

pub fn path_critical_from_terms(terms: &Terms, params: &SystemParams, s_lo: f64, s_hi: f64) -> Result<(f64, f64)> {
    if !(s_lo < s_hi) {
        return Err(Error::Bracket { lo: s_lo, hi: s_hi });
    }
    let dpsi = |s: f64| terms.psi_derivative(params, s);
    // Last descending sign change of P along a fine sample of the interval: a local maximum of Ψ.
    const SAMPLES: usize = 512;
    let step = (s_hi - s_lo) / SAMPLES as f64;
    let mut bracket = None;
    let mut prev = dpsi(s_lo);
    for i in 1..=SAMPLES {
        let s = s_lo + step * i as f64;
        let cur = dpsi(s);
        if prev > 0.0 && cur <= 0.0 {
            bracket = Some((s - step, s));
        }
        prev = cur;
    }
    let (lo, hi) = bracket.ok_or(Error::Bracket { lo: s_lo, hi: s_hi })?;
    let s = bisect(lo, hi, |s| -dpsi(s));
    Ok((s, terms.psi(params, s)))
}

/// Global maximizer of Ψ on the fiber for r > r̄, from the larger root of the concave
/// function f(y) = 2Ay − B − 2rγβK y^{rγ−1}, y = e^{2s}. `None` when Ψ has no local maximum.
pub fn fiber_max(terms: &Terms, params: &SystemParams) -> Option<(f64, f64)> {
    let a = terms.bending;
    let b = terms.weighted_gradient(params);
    let rg = params.r_gamma();
    let c = 2.0 * rg * params.beta * terms.coupling;
    if !(a > 0.0 && c > 0.0 && rg > 2.0) {
        return None;
    }
    let f = |y: f64| 2.0 * a * y - b - c * y.powf(rg - 1.0);
    let y_peak = (2.0 * a / (c * (rg - 1.0))).powf(1.0 / (rg - 2.0));
    if !(f(y_peak) > 0.0) {
        return None;
    }
    let mut hi = 2.0 * y_peak;
    while f(hi) > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return None;
        }
    }
    let y = bisect(y_peak, hi, |y| -f(y));
    let s = 0.5 * y.ln();
    Some((s, terms.psi(params, s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaddleConfig {
    pub step_init: f64,
    pub armijo_c: f64,
    pub step_shrink: f64,
    pub step_growth: f64,
    pub step_max: f64,
    pub min_step: f64,
    /// Stop when ‖∇I + λp‖ ≤ tol·(1+|level|).
    pub tol: f64,
    /// Acceptance: el ≤ accept_tol·(1+|level|) and |P| ≤ accept_tol·(1+bending).
    pub accept_tol: f64,
    pub max_iters: usize,
    /// Floor of the shifted preconditioner.
    pub shift: f64,
    /// Width of a single initial coupled Gaussian; `None` runs the automatic width family.
    pub profile_width: Option<f64>,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        SaddleConfig {
            step_init: 1.0,
            armijo_c: 1e-4,
            step_shrink: 0.5,
            step_growth: 2.0,
            step_max: 1e3,
            min_step: 1e-14,
            tol: 1e-7,
            accept_tol: 1e-5,
            max_iters: 2000,
            shift: 0.05,
            profile_width: None,
        }
    }
}

impl SaddleConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step_init > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.step_shrink > 0.0
            && self.step_shrink < 1.0
            && self.step_growth >= 1.0
            && self.step_max >= self.step_init
            && self.min_step > 0.0
            && self.tol > 0.0
            && self.accept_tol > 0.0
            && self.max_iters > 0
            && self.shift > 0.0
            && self.profile_width.map_or(true, |w| w > 0.0 && w.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid saddle configuration".into()))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SaddleReport {
    pub level: f64,
    pub lambda: f64,
    pub pohozaev_residual: f64,
    pub el_residual: f64,
    /// Total dilation applied to the initial profile.
    pub s_star: f64,
    pub lambda_bound_ok: bool,
    pub accepted: bool,
    pub iterations: usize,
    pub stalled: bool,
    /// Ψ maximum along the fiber of the initial profile, an upper bound for the level.
    pub initial_path_max: f64,
    pub bending: f64,
    pub coupling: f64,
    pub box_length: f64,
    pub profile_width: f64,
    /// Symmetry is seeded, not enforced; this measures how far the search moved away from it.
    pub symmetry_drift: f64,
    pub level_history: Vec<f64>,
    #[serde(skip)]
    pub state: StatePair,
}

struct FiberPoint {
    ev: Evaluated,
    level: f64,
    s: f64,
}

/// Move p to the maximum of its fiber. The dilation only rescales samples and box length.
fn to_fiber_max(p: &StatePair, params: &SystemParams) -> Option<FiberPoint> {
    let terms = model::terms(p, params);
    let (s, level) = fiber_max(&terms, params)?;
    let q = p.dilate(s);
    Some(FiberPoint { ev: Evaluated::new(q, params), level, s })
}

fn shifted_precondition(f: &RealField, alpha: f64, lambda: f64, shift: f64) -> RealField {
    let floor = (lambda - alpha * alpha / 4.0).max(shift);
    spectral::apply_multiplier(f, |k2| 1.0 / ((k2 - alpha / 2.0).powi(2) + floor))
}

/// Alternate fiber maximization with preconditioned descent of F(p) = max_s Ψ(p, s) on S_ρ.
pub fn saddle_search(
    params: &SystemParams,
    grid: &GridSpec,
    th: &ThresholdSet,
    config: &SaddleConfig,
) -> Result<SaddleReport> {
    params.validate()?;
    check_grid(params, grid)?;
    config.validate()?;
    require_supercritical(params)?;
    let limit = th.c_star.unwrap_or(f64::NAN).min(th.c_lower_star.unwrap_or(f64::NAN));
    let size = params.beta * params.rho.powf(params.r() - 2.0);
    if !(size < limit) {
        return Err(Error::Domain(format!("beta*rho^(r-2) = {size} is not below min(c*, c_*) = {limit}")));
    }
    let widths = match config.profile_width {
        Some(w) => vec![w],
        None => auto_widths(grid, params)?,
    };
    let reports: Vec<SaddleReport> =
        widths.par_iter().map(|&w| search_from(params, grid, config, w)).collect::<Result<_>>()?;
    let scaled_el = |r: &SaddleReport| r.el_residual / (1.0 + r.level.abs());
    let best = reports
        .into_iter()
        .min_by(|a, b| b.accepted.cmp(&a.accepted).then(scaled_el(a).total_cmp(&scaled_el(b))))
        .expect("at least one profile");
    Ok(best)
}

/// Width whose fiber maximum keeps the box near its configured length, then two narrower boxes.
/// A profile that ends on a much smaller box picks up a slow drift from its periodic images.
fn auto_widths(grid: &GridSpec, params: &SystemParams) -> Result<Vec<f64>> {
    let probe = coupled_gaussian_profile(grid, params, 1.0)?;
    let (s, _) = fiber_max(&model::terms(&probe, params), params)
        .ok_or_else(|| Error::Domain("initial profile has no maximum along its dilation fiber".into()))?;
    let w = (-s).exp();
    Ok(vec![w, 1.2 * w, 1.44 * w])
}

fn search_from(params: &SystemParams, grid: &GridSpec, config: &SaddleConfig, width: f64) -> Result<SaddleReport> {
    let rho = params.rho;
    let profile = coupled_gaussian_profile(grid, params, width)?;
    let start = to_fiber_max(&profile, params)
        .ok_or_else(|| Error::Domain("initial profile has no maximum along its dilation fiber".into()))?;
    let initial_path_max = start.level;
    let mut s_total = start.s;
    let mut cur = start;
    let mut history = vec![cur.level];
    let mut tau = config.step_init / config.step_growth;
    let mut iterations = 0;
    let mut stalled = false;
    let (mut lambda, mut el);
    loop {
        lambda = cur.ev.terms.multiplier(params)?;
        let g = cur.ev.gradient(params).axpy(lambda, &cur.ev.state)?;
        el = g.inner(&g)?.max(0.0).sqrt();
        if el <= config.tol * (1.0 + cur.level.abs()) || iterations >= config.max_iters {
            break;
        }
        let p = &cur.ev.state;
        let pg = StatePair::new(
            shifted_precondition(&g.u, params.alpha1, lambda, config.shift),
            shifted_precondition(&g.v, params.alpha2, lambda, config.shift),
        )?;
        // L² tangent projection; projecting with the preconditioned p drifts along the flat dilation valley.
        let d = pg.axpy(-p.inner(&pg)? / p.inner(p)?, p)?;
        let slope = g.inner(&d)?;
        if !(slope > 0.0) {
            stalled = true;
            break;
        }
        tau = (tau * config.step_growth).min(config.step_max);
        let mut next = None;
        while tau >= config.min_step {
            let cand = project_to_sphere(&p.axpy(-tau, &d)?, rho)?;
            if let Some(fp) = to_fiber_max(&cand, params) {
                if fp.level <= cur.level - config.armijo_c * tau * slope {
                    next = Some(fp);
                    break;
                }
            }
            tau *= config.step_shrink;
        }
        let Some(fp) = next else {
            stalled = true;
            break;
        };
        s_total += fp.s;
        cur = fp;
        history.push(cur.level);
        iterations += 1;
    }
    let t = cur.ev.terms;
    let pohozaev = t.pohozaev_p(params);
    let lambda_bound_ok = lambda > params.max_alpha_sq() / 4.0;
    let accepted = el <= config.accept_tol * (1.0 + cur.level.abs())
        && pohozaev.abs() <= config.accept_tol * (1.0 + t.bending)
        && cur.level > 0.0
        && t.coupling > 0.0;
    if accepted && !lambda_bound_ok {
        log::warn!("accepted saddle violates the multiplier bound: lambda = {lambda}");
    }
    Ok(SaddleReport {
        level: cur.level,
        lambda,
        pohozaev_residual: pohozaev,
        el_residual: el,
        s_star: s_total,
        lambda_bound_ok,
        accepted,
        iterations,
        stalled,
        initial_path_max,
        bending: t.bending,
        coupling: t.coupling,
        box_length: cur.ev.state.grid().box_length,
        profile_width: width,
        symmetry_drift: model::symmetry_drift(&cur.ev.state)?,
        level_history: history,
        state: cur.ev.state,
    })
}
