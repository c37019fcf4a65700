//! Mass-constrained minimization of I over S_ρ with vanishing/compactness
//! classification, restarts and ρ scans.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{critical_exponents, ThresholdSet};
use crate::error::{Error, Result};
use crate::model::{self, Evaluated, StatePair, SystemParams};
use crate::spectral::{self, GridSpec, RealField};

/// Spectral preconditioner applied to the projected gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Preconditioner {
    None,
    /// (1+|ξ|⁴)⁻¹.
    Bilaplacian,
    /// ((|ξ|²−αᵢ/2)² + max{λ−αᵢ²/4, shift})⁻¹, the inverse of the shifted Hessian of each component.
    Shifted { shift: f64 },
}

impl Default for Preconditioner {
    fn default() -> Self {
        Preconditioner::Shifted { shift: 0.05 }
    }
}

impl Preconditioner {
    fn symbol(&self, k2: f64, alpha: f64, lambda: f64) -> f64 {
        match *self {
            Preconditioner::None => 1.0,
            Preconditioner::Bilaplacian => 1.0 / (1.0 + k2 * k2),
            Preconditioner::Shifted { shift } => {
                1.0 / ((k2 - alpha / 2.0).powi(2) + (lambda - alpha * alpha / 4.0).max(shift))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub step_init: f64,
    pub armijo_c: f64,
    pub step_shrink: f64,
    /// Converged when ‖∇I + λp‖ ≤ grad_tol·(1+|I|).
    pub grad_tol: f64,
    pub max_iters: usize,
    pub vanish_energy_eps: f64,
    pub vanish_coupling_eps: f64,
    pub seed: u64,
    pub preconditioner: Preconditioner,
    /// Trial step growth between iterations.
    pub step_growth: f64,
    pub step_max: f64,
    /// Backtracking below this step counts as a stall.
    pub min_step: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            step_init: 1.0,
            armijo_c: 1e-4,
            step_shrink: 0.5,
            grad_tol: 1e-6,
            max_iters: 20_000,
            vanish_energy_eps: 1e-4,
            vanish_coupling_eps: 1e-4,
            seed: 0,
            preconditioner: Preconditioner::default(),
            step_growth: 1.5,
            step_max: 1e4,
            min_step: 1e-14,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.step_init > 0.0) {
            return bad("step_init must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0,1)");
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad("step_shrink must lie in (0,1)");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.vanish_energy_eps > 0.0 && self.vanish_coupling_eps > 0.0) {
            return bad("vanish thresholds must be positive");
        }
        if !(self.step_growth >= 1.0 && self.step_max >= self.step_init && self.min_step > 0.0) {
            return bad("step_growth >= 1, step_max >= step_init and min_step > 0 required");
        }
        if let Preconditioner::Shifted { shift } = self.preconditioner {
            if !(shift > 0.0) {
                return bad("preconditioner shift must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    Vanishing,
    MaxIters,
    UnboundedBelow,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::Vanishing => "Vanishing",
            SolveStatus::MaxIters => "MaxIters",
            SolveStatus::UnboundedBelow => "UnboundedBelow",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub energy: f64,
    pub lambda: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub pohozaev_residual: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub mj_value: f64,
    pub bending: f64,
    pub coupling: f64,
    /// True when the line search could not decrease the energy any further.
    pub stalled: bool,
    pub energy_history: Vec<f64>,
    /// Guaranteed decrease c·τ·⟨g, d⟩ of every accepted step, aligned with energy_history[1..].
    #[serde(skip)]
    pub armijo_bounds: Vec<f64>,
    #[serde(skip)]
    pub final_state: StatePair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Coercivity {
    Coercive,
    CriticalCapExceeded,
    Supercritical,
}

pub fn is_mass_critical(params: &SystemParams) -> bool {
    let (r_bar, _) = critical_exponents(params.dimension);
    (params.r() - r_bar).abs() <= 1e-12 * r_bar
}

pub fn coercivity_guard(params: &SystemParams, thresholds: &ThresholdSet) -> Coercivity {
    let (r_bar, _) = critical_exponents(params.dimension);
    if is_mass_critical(params) {
        if params.rho >= thresholds.mass_critical_cap {
            Coercivity::CriticalCapExceeded
        } else {
            Coercivity::Coercive
        }
    } else if params.r() < r_bar {
        Coercivity::Coercive
    } else {
        Coercivity::Supercritical
    }
}

/// Scale both components by ρ/√M.
pub fn project_to_sphere(p: &StatePair, rho: f64) -> Result<StatePair> {
    let m = p.total_mass();
    if !(m > 0.0) {
        return Err(Error::ZeroState);
    }
    Ok(p.scaled(rho / m.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    CoupledGaussian,
    ModulatedPacket,
    RandomBandlimited,
}

impl InitStrategy {
    pub const ALL: [InitStrategy; 3] =
        [InitStrategy::CoupledGaussian, InitStrategy::ModulatedPacket, InitStrategy::RandomBandlimited];

    pub fn name(&self) -> &'static str {
        match self {
            InitStrategy::CoupledGaussian => "coupled-gaussian",
            InitStrategy::ModulatedPacket => "modulated-packet",
            InitStrategy::RandomBandlimited => "random-bandlimited",
        }
    }
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InitStrategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

const BANDLIMIT_MODES: i64 = 6;

pub fn init_strategies(grid: &GridSpec, params: &SystemParams, strategy: InitStrategy, seed: u64) -> Result<StatePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratio = (params.r2 / params.r1).sqrt();
    let r2 = grid.radius_squared();
    let envelope = |width: f64| -> Vec<f64> { r2.iter().map(|x| (-x / (2.0 * width * width)).exp()).collect() };
    let pair = match strategy {
        InitStrategy::CoupledGaussian => {
            let width = grid.box_length / 16.0 * 2f64.powf(rng.gen_range(-0.5..0.5));
            let u = RealField::new(*grid, envelope(width))?;
            let v = u.scaled(ratio);
            StatePair::new(u, v)?
        }
        InitStrategy::ModulatedPacket => {
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let env = envelope(grid.box_length / 8.0);
            let x1 = grid.first_coordinate();
            let (k1, k2) = ((params.alpha1 / 2.0).sqrt(), (params.alpha2 / 2.0).sqrt());
            let u = env.iter().zip(&x1).map(|(e, x)| e * (k1 * x + phase).cos()).collect();
            let v = env.iter().zip(&x1).map(|(e, x)| ratio * e * (k2 * x + phase).cos()).collect();
            StatePair::new(RealField::new(*grid, u)?, RealField::new(*grid, v)?)?
        }
        InitStrategy::RandomBandlimited => {
            let u = random_bandlimited(grid, &mut rng)?;
            let v = random_bandlimited(grid, &mut rng)?;
            StatePair::new(u, v)?
        }
    };
    project_to_sphere(&pair, params.rho)
}

/// Random real field whose spectrum lives on |k| ≤ BANDLIMIT_MODES along every axis.
pub fn random_bandlimited(grid: &GridSpec, rng: &mut impl Rng) -> Result<RealField> {
    use rustfft::num_complex::Complex64;
    let n = grid.points_per_axis;
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (i, c) in spec.iter_mut().enumerate() {
        let mut rem = i;
        let mut inside = true;
        for _ in 0..grid.dimension {
            let j = (rem % n) as i64;
            let k = if j < n as i64 / 2 { j } else { j - n as i64 };
            inside &= k.abs() <= BANDLIMIT_MODES;
            rem /= n;
        }
        if inside {
            *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    Ok(spectral::from_spectrum(*grid, spec))
}

fn precondition(f: &RealField, pre: Preconditioner, alpha: f64, lambda: f64) -> RealField {
    if pre == Preconditioner::None {
        return f.clone();
    }
    spectral::apply_multiplier(f, |k2| pre.symbol(k2, alpha, lambda))
}

struct Diagnostics {
    lambda: f64,
    residual: StatePair,
    el: f64,
}

fn diagnostics(ev: &Evaluated, params: &SystemParams) -> Result<Diagnostics> {
    let lambda = ev.terms.multiplier(params)?;
    let residual = ev.gradient(params).axpy(lambda, &ev.state)?;
    let el = residual.inner(&residual)?.max(0.0).sqrt();
    Ok(Diagnostics { lambda, residual, el })
}

fn build_report(
    status: SolveStatus,
    ev: Evaluated,
    diag: &Diagnostics,
    params: &SystemParams,
    iterations: usize,
    stalled: bool,
    history: Vec<f64>,
    bounds: Vec<f64>,
) -> SolveReport {
    let t = ev.terms;
    SolveReport {
        status,
        energy: t.energy_i(params),
        lambda: diag.lambda,
        mass_u: t.mass_u,
        mass_v: t.mass_v,
        pohozaev_residual: t.pohozaev_identity_residual(params, diag.lambda),
        el_residual: diag.el,
        iterations,
        mj_value: model::mj_value(params),
        bending: t.bending,
        coupling: t.coupling,
        stalled,
        energy_history: history,
        armijo_bounds: bounds,
        final_state: ev.state,
    }
}

/// Energy level below which the descent is declared unbounded.
const UNBOUNDED_LEVEL: f64 = -1e12;

/// Preconditioned projected gradient descent on S_ρ with Armijo backtracking.
pub fn descend(params: &SystemParams, init: StatePair, config: &SolveConfig) -> Result<SolveReport> {
    config.validate()?;
    let rho = params.rho;
    let rho_r = rho.powf(params.r());
    let mj = model::mj_value(params);
    let mut ev = Evaluated::new(project_to_sphere(&init, rho)?, params);
    let mut energy = ev.terms.energy_i(params);
    let mut history = vec![energy];
    let mut bounds = Vec::new();
    let mut tau = config.step_init / config.step_growth;
    let mut stalled = false;
    let mut diag = diagnostics(&ev, params)?;
    let mut iterations = 0;
    let status = loop {
        if (energy - mj).abs() <= config.vanish_energy_eps && ev.terms.coupling <= config.vanish_coupling_eps * rho_r {
            break SolveStatus::Vanishing;
        }
        if diag.el <= config.grad_tol * (1.0 + energy.abs()) {
            break SolveStatus::Converged;
        }
        if energy < UNBOUNDED_LEVEL {
            break SolveStatus::UnboundedBelow;
        }
        if iterations >= config.max_iters {
            break SolveStatus::MaxIters;
        }
        let pre = config.preconditioner;
        let lam = diag.lambda;
        let pr = StatePair::new(
            precondition(&diag.residual.u, pre, params.alpha1, lam),
            precondition(&diag.residual.v, pre, params.alpha2, lam),
        )?;
        let pp = StatePair::new(
            precondition(&ev.state.u, pre, params.alpha1, lam),
            precondition(&ev.state.v, pre, params.alpha2, lam),
        )?;
        // Tangent direction: ⟨p, d⟩ = 0.
        let mu = ev.state.inner(&pr)? / ev.state.inner(&pp)?;
        let d = pr.axpy(-mu, &pp)?;
        let slope = diag.residual.inner(&d)?;
        if !(slope > 0.0) {
            stalled = true;
            break SolveStatus::MaxIters;
        }
        tau = (tau * config.step_growth).min(config.step_max);
        let mut accepted = None;
        while tau >= config.min_step {
            let cand = project_to_sphere(&ev.state.axpy(-tau, &d)?, rho)?;
            let cev = Evaluated::new(cand, params);
            let e = cev.terms.energy_i(params);
            if e.is_finite() && e <= energy - config.armijo_c * tau * slope {
                accepted = Some((cev, e));
                break;
            }
            tau *= config.step_shrink;
        }
        let Some((cev, e)) = accepted else {
            stalled = true;
            break SolveStatus::MaxIters;
        };
        bounds.push(config.armijo_c * tau * slope);
        ev = cev;
        energy = e;
        history.push(e);
        diag = diagnostics(&ev, params)?;
        iterations += 1;
    };
    if stalled {
        log::debug!("descent stalled at iteration {iterations}, el = {:.3e}", diag.el);
    }
    Ok(build_report(status, ev, &diag, params, iterations, stalled, history, bounds))
}

/// Minimize I over S_ρ from one init strategy. Supercritical input is refused as UnboundedBelow.
pub fn minimize_ground_state(
    params: &SystemParams,
    grid: &GridSpec,
    config: &SolveConfig,
    strategy: InitStrategy,
) -> Result<SolveReport> {
    params.validate()?;
    check_grid(params, grid)?;
    let init = init_strategies(grid, params, strategy, config.seed)?;
    let (r_bar, _) = critical_exponents(params.dimension);
    if params.r() > r_bar && !is_mass_critical(params) {
        let ev = Evaluated::new(init, params);
        let diag = diagnostics(&ev, params)?;
        let e = ev.terms.energy_i(params);
        return Ok(build_report(SolveStatus::UnboundedBelow, ev, &diag, params, 0, false, vec![e], vec![]));
    }
    descend(params, init, config)
}

/// Minimize J (the coupling-free functional) over S_ρ; its infimum m^J is never attained.
pub fn minimize_auxiliary_j(
    params: &SystemParams,
    grid: &GridSpec,
    config: &SolveConfig,
    strategy: InitStrategy,
) -> Result<SolveReport> {
    check_grid(params, grid)?;
    let free = SystemParams { beta: 0.0, ..*params };
    let init = init_strategies(grid, &free, strategy, config.seed)?;
    descend(&free, init, config)
}

pub fn check_grid(params: &SystemParams, grid: &GridSpec) -> Result<()> {
    grid.validate()?;
    if grid.dimension != params.dimension {
        return Err(Error::Config(format!(
            "grid dimension {} differs from params dimension {}",
            grid.dimension, params.dimension
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub strategy: InitStrategy,
    pub seed: u64,
    pub status: SolveStatus,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartOutcome {
    pub best: SolveReport,
    pub strategy: InitStrategy,
    pub seed: u64,
    pub restarts: Vec<RestartSummary>,
}

pub const RESTART_SEEDS: u64 = 2;

/// Three strategies × two seeds; minimum energy wins, ties go to the lower seed.
pub fn best_of_restarts(params: &SystemParams, grid: &GridSpec, config: &SolveConfig) -> Result<RestartOutcome> {
    let jobs: Vec<(u64, InitStrategy)> = (0..RESTART_SEEDS)
        .flat_map(|k| InitStrategy::ALL.map(|s| (config.seed.wrapping_add(k), s)))
        .collect();
    let reports: Vec<(u64, InitStrategy, SolveReport)> = jobs
        .par_iter()
        .map(|&(seed, strategy)| {
            let cfg = SolveConfig { seed, ..*config };
            minimize_ground_state(params, grid, &cfg, strategy).map(|r| (seed, strategy, r))
        })
        .collect::<Result<_>>()?;
    let restarts = reports
        .iter()
        .map(|(seed, strategy, r)| RestartSummary { strategy: *strategy, seed: *seed, status: r.status, energy: r.energy })
        .collect();
    let mut best: Option<(u64, InitStrategy, SolveReport)> = None;
    for (seed, strategy, r) in reports {
        let better = match &best {
            None => true,
            Some((bs, _, br)) => r.energy < br.energy || (r.energy == br.energy && seed < *bs),
        };
        if better {
            best = Some((seed, strategy, r));
        }
    }
    let (seed, strategy, best) = best.expect("at least one restart");
    Ok(RestartOutcome { best, strategy, seed, restarts })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub rho: f64,
    pub status: SolveStatus,
    pub energy: f64,
    pub mj_value: f64,
    pub lambda: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub pohozaev_residual: f64,
    pub el_residual: f64,
    pub iterations: usize,
}

impl ScanRow {
    pub const HEADER: [&'static str; 10] = [
        "rho",
        "status",
        "energy",
        "mj_value",
        "lambda",
        "mass_u",
        "mass_v",
        "pohozaev_residual",
        "el_residual",
        "iterations",
    ];

    pub fn from_report(rho: f64, r: &SolveReport) -> Self {
        ScanRow {
            rho,
            status: r.status,
            energy: r.energy,
            mj_value: r.mj_value,
            lambda: r.lambda,
            mass_u: r.mass_u,
            mass_v: r.mass_v,
            pohozaev_residual: r.pohozaev_residual,
            el_residual: r.el_residual,
            iterations: r.iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubadditivityCheck {
    pub rho: f64,
    pub theta: f64,
    pub m_rho: f64,
    pub m_theta_rho: f64,
    /// m(θρ) < θ²·m(ρ).
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    pub subadditivity: Vec<SubadditivityCheck>,
    /// (largest Vanishing ρ, smallest Converged ρ above it) when the scan shows a transition.
    pub rho_star_bracket: Option<(f64, f64)>,
    #[serde(skip)]
    pub reports: Vec<SolveReport>,
}

pub const SUBADDITIVITY_THETA: f64 = 1.5;

pub fn dichotomy_scan(
    template: &SystemParams,
    rhos: &[f64],
    grid: &GridSpec,
    config: &SolveConfig,
    thresholds: &ThresholdSet,
) -> Result<ScanResult> {
    let mut rhos: Vec<f64> = rhos.to_vec();
    if rhos.is_empty() {
        return Err(Error::Config("scan needs at least one rho".into()));
    }
    rhos.sort_by(f64::total_cmp);
    rhos.dedup();
    for &rho in &rhos {
        let p = template.with_rho(rho);
        p.validate()?;
        let guard = coercivity_guard(&p, thresholds);
        if guard != Coercivity::Coercive {
            return Err(Error::Domain(format!("rho = {rho} fails the coercivity guard: {guard:?}")));
        }
    }
    let outcomes: Vec<RestartOutcome> = rhos
        .par_iter()
        .map(|&rho| best_of_restarts(&template.with_rho(rho), grid, config))
        .collect::<Result<_>>()?;
    let rows: Vec<ScanRow> = rhos.iter().zip(&outcomes).map(|(&rho, o)| ScanRow::from_report(rho, &o.best)).collect();

    let mut subadditivity = Vec::new();
    for a in &rows {
        let target = SUBADDITIVITY_THETA * a.rho;
        if let Some(b) = rows.iter().find(|b| (b.rho - target).abs() <= 1e-12 * target) {
            if a.status == SolveStatus::Converged && b.status == SolveStatus::Converged {
                let theta2 = SUBADDITIVITY_THETA * SUBADDITIVITY_THETA;
                subadditivity.push(SubadditivityCheck {
                    rho: a.rho,
                    theta: SUBADDITIVITY_THETA,
                    m_rho: a.energy,
                    m_theta_rho: b.energy,
                    holds: b.energy < theta2 * a.energy,
                });
            }
        }
    }
    let rho_star_bracket = rows
        .iter()
        .rposition(|r| r.status == SolveStatus::Vanishing)
        .and_then(|i| rows[i + 1..].iter().find(|r| r.status == SolveStatus::Converged).map(|c| (rows[i].rho, c.rho)));
    Ok(ScanResult { rows, subadditivity, rho_star_bracket, reports: outcomes.into_iter().map(|o| o.best).collect() })
}
