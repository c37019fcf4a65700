//! Command-line front end: argument model, dispatch, output formatting.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::constants::{self, ThresholdSet};
use crate::dump;
use crate::error::{Error, Result};
use crate::ground_state::{self, Coercivity, ScanRow, SolveReport};
use crate::model::{self, StatePair, SystemParams};
use crate::mountain_pass;
use crate::spectral;

#[derive(Debug, Parser)]
#[command(name = "binls", version, about = "Normalized solutions of a coupled biharmonic NLS system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Config file (key=value or JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides solve.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the Gagliardo-Nirenberg constant C_{N,r}.
    GnConstant,
    /// Exponents, D1/D2, c*, c_*, caps and the R estimate.
    Thresholds,
    /// Minimize I over the mass sphere.
    GroundState,
    /// Ground states over scan.rhos with the sub-additivity check.
    Scan,
    /// Saddle search in the mass-supercritical regime.
    MountainPass {
        /// Print the geometry report (R0, R1, t_bar) only.
        #[arg(long)]
        geometry: bool,
    },
    /// Diagnostics of a saved state pair.
    Check {
        /// Directory holding manifest.json, u.*, v.*.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

/// Output keys allowed to be null in JSON.
const OPTIONAL_KEYS: [&str; 8] =
    ["c_star", "c_lower_star", "R_estimate", "R_diverging", "rho_star_estimate", "R0", "R1", "extremal_family_best"];

pub fn run(cli: &Cli) -> i32 {
    let result = match cli.jobs {
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => Err(Error::Config(format!("thread pool: {e}"))),
        },
        None => dispatch(cli),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = if e.is_config() { EXIT_CONFIG } else { EXIT_COMPUTE };
            let kind = if code == EXIT_CONFIG { "config" } else { "compute" };
            let record = json!({ "error": kind, "exit_code": code, "message": e.to_string() });
            eprintln!("{record}");
            if code == EXIT_COMPUTE {
                if let Some(dir) = &cli.out {
                    let _ = std::fs::create_dir_all(dir)
                        .map_err(|e| Error::io(dir, e))
                        .and_then(|_| dump::write_atomic(&dir.join("error.json"), record.to_string().as_bytes()));
                }
            }
            code
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.solve.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Command::Check { input } = &cli.command {
        return check(cli, input.clone());
    }
    let cfg = load_config(cli)?;
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    match &cli.command {
        Command::GnConstant => gn_constant(cli, &cfg),
        Command::Thresholds => thresholds(cli, &cfg),
        Command::GroundState => ground_state(cli, &cfg),
        Command::Scan => scan(cli, &cfg),
        Command::MountainPass { geometry } => mountain_pass(cli, &cfg, *geometry),
        Command::Check { .. } => unreachable!("handled above"),
    }
}

fn compute_thresholds(cfg: &RunConfig, with_r: bool) -> Result<(ThresholdSet, constants::GnEstimate)> {
    let p = &cfg.params;
    let gn = constants::gn_constant_estimate(p.dimension, p.r(), &cfg.gn_grid()?, cfg.gn.tol, cfg.gn.max_iters)?;
    let mut th = constants::thresholds(p, gn.constant)?;
    let (r_bar, _) = constants::critical_exponents(p.dimension);
    if with_r && p.r() <= r_bar + 1e-12 {
        let est = constants::estimate_r(p, &cfg.grid_spec()?, Some(&gn))?;
        th = th.with_r_estimate(p, &est);
    }
    th.c_gn_extremal = Some(gn.extremal.clone());
    Ok((th, gn))
}

fn gn_constant(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let p = &cfg.params;
    let grid = cfg.gn_grid()?;
    let gn = constants::gn_constant_estimate(p.dimension, p.r(), &grid, cfg.gn.tol, cfg.gn.max_iters)?;
    let out = json!({
        "dimension": p.dimension,
        "r": p.r(),
        "C_gn": gn.constant,
        "iterations": gn.iterations,
        "converged": gn.converged,
        "points_per_axis": grid.points_per_axis,
        "box_length": grid.box_length,
    });
    if let Some(dir) = &cli.out {
        dump::write_field(dir, "gn_extremal", &gn.extremal)?;
    }
    emit_record(cli, "gn_constant", &out)
}

fn thresholds(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let (th, _) = compute_thresholds(cfg, cfg.thresholds.estimate_r)?;
    if let (Some(dir), Some(ext)) = (&cli.out, &th.c_gn_extremal) {
        dump::write_field(dir, "gn_extremal", ext)?;
    }
    emit_record(cli, "thresholds", &th)
}

fn guard(cfg: &RunConfig, p: &SystemParams) -> Result<Option<ThresholdSet>> {
    if !ground_state::is_mass_critical(p) {
        let (r_bar, _) = constants::critical_exponents(p.dimension);
        if p.r() > r_bar {
            return Err(Error::Domain(format!("coercivity guard: {:?}", Coercivity::Supercritical)));
        }
        return Ok(None);
    }
    let (th, _) = compute_thresholds(cfg, false)?;
    match ground_state::coercivity_guard(p, &th) {
        Coercivity::Coercive => Ok(Some(th)),
        other => Err(Error::Domain(format!(
            "coercivity guard: {other:?} (rho = {}, cap = {})",
            p.rho, th.mass_critical_cap
        ))),
    }
}

fn ground_state(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let p = &cfg.params;
    let grid = cfg.grid_spec()?;
    guard(cfg, p)?;
    let report: SolveReport = match cfg.ground_state.strategy {
        Some(s) => ground_state::minimize_ground_state(p, &grid, &cfg.solve, s)?,
        None => ground_state::best_of_restarts(p, &grid, &cfg.solve)?.best,
    };
    if let Some(dir) = &cli.out {
        dump::write_state(&dir.join("state"), &report.final_state, p)?;
    }
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(cli, "ground_state.json", &report),
        Format::Csv => {
            let row = ScanRow::from_report(p.rho, &report);
            emit_text(cli, "ground_state.csv", &scan_csv(std::slice::from_ref(&row))?)
        }
    }
}

fn scan(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let p = &cfg.params;
    let grid = cfg.grid_spec()?;
    let (th, _) = compute_thresholds(cfg, false)?;
    let result = ground_state::dichotomy_scan(p, &cfg.scan.rhos, &grid, &cfg.solve, &th)?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            if let Some(dir) = &cli.out {
                let mut text = String::new();
                csv_line(&mut text, &["rho", "theta", "m_rho", "m_theta_rho", "holds"].map(String::from));
                for c in &result.subadditivity {
                    csv_line(
                        &mut text,
                        &[num(c.rho)?, num(c.theta)?, num(c.m_rho)?, num(c.m_theta_rho)?, c.holds.to_string()],
                    );
                }
                dump::write_atomic(&dir.join("subadditivity.csv"), text.as_bytes())?;
            }
            emit_text(cli, "scan.csv", &scan_csv(&result.rows)?)
        }
        Format::Json => emit_json(cli, "scan.json", &result),
    }
}

fn mountain_pass(cli: &Cli, cfg: &RunConfig, geometry_only: bool) -> Result<()> {
    let p = &cfg.params;
    let (th, _) = compute_thresholds(cfg, false)?;
    let geometry = mountain_pass::bracket_roots_h(p, &th)?;
    if geometry_only {
        return emit_record(cli, "geometry", &geometry);
    }
    let grid = cfg.grid_spec()?;
    let report = mountain_pass::saddle_search(p, &grid, &th, &cfg.saddle)?;
    if let Some(dir) = &cli.out {
        dump::write_state(&dir.join("state"), &report.state, p)?;
    }
    emit_record(cli, "saddle", &report)
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub total_mass: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    #[serde(rename = "energy_I")]
    pub energy_i: f64,
    #[serde(rename = "energy_J")]
    pub energy_j: f64,
    pub lambda: f64,
    pub pohozaev_p: f64,
    pub pohozaev_identity_residual: f64,
    pub combined_identity_residual: f64,
    pub el_residual: f64,
    pub coupling_integral: f64,
    pub quotient_q: f64,
    pub gap_h: f64,
    /// √M·‖Δf‖ − ‖∇f‖² per component, nonnegative by the interpolation inequality.
    pub interpolation_slack_u: f64,
    pub interpolation_slack_v: f64,
}

pub fn check_report(p: &StatePair, params: &SystemParams) -> Result<CheckReport> {
    let t = model::terms(p, params);
    let lambda = t.multiplier(params)?;
    let slack = |f: &spectral::RealField| {
        spectral::mass(f).sqrt() * spectral::laplacian_norm_sq(f).sqrt() - spectral::gradient_norm_sq(f)
    };
    Ok(CheckReport {
        total_mass: t.total_mass(),
        mass_u: t.mass_u,
        mass_v: t.mass_v,
        energy_i: t.energy_i(params),
        energy_j: t.energy_j(params),
        lambda,
        pohozaev_p: t.pohozaev_p(params),
        pohozaev_identity_residual: t.pohozaev_identity_residual(params, lambda),
        combined_identity_residual: t.combined_identity_residual(params, lambda),
        el_residual: model::euler_lagrange_residual(p, params, lambda)?,
        coupling_integral: t.coupling,
        quotient_q: model::quotient_q(p, params)?,
        gap_h: t.energy_i(params) - model::mj_value(params),
        interpolation_slack_u: slack(&p.u),
        interpolation_slack_v: slack(&p.v),
    })
}

fn check(cli: &Cli, input: Option<PathBuf>) -> Result<()> {
    let cfg = match &cli.config {
        Some(_) => Some(load_config(cli)?),
        None => None,
    };
    let dir = input
        .or_else(|| cfg.as_ref().and_then(|c| c.check.input.clone()))
        .ok_or_else(|| Error::Config("check needs --input DIR or check.input".into()))?;
    let (pair, manifest) = dump::read_state(&dir)?;
    let params = manifest.params;
    params.validate()?;
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    emit_record(cli, "check", &check_report(&pair, &params)?)
}

/// 17 significant digits, '.' decimal separator.
pub fn num(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::NonFinite("numeric output".into()));
    }
    Ok(format!("{x:.16e}"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_line(out: &mut String, fields: &[String]) {
    let line: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
    out.push_str(&line.join(","));
    out.push_str("\r\n");
}

pub fn scan_csv(rows: &[ScanRow]) -> Result<String> {
    let mut out = String::new();
    csv_line(&mut out, &ScanRow::HEADER.map(String::from));
    for r in rows {
        csv_line(
            &mut out,
            &[
                num(r.rho)?,
                r.status.to_string(),
                num(r.energy)?,
                num(r.mj_value)?,
                num(r.lambda)?,
                num(r.mass_u)?,
                num(r.mass_v)?,
                num(r.pohozaev_residual)?,
                num(r.el_residual)?,
                r.iterations.to_string(),
            ],
        );
    }
    Ok(out)
}

/// Reject NaN/∞ that serde_json would silently turn into null.
fn ensure_finite(v: &Value, key: &str) -> Result<()> {
    match v {
        Value::Null if !OPTIONAL_KEYS.contains(&key) => Err(Error::NonFinite(key.to_string())),
        Value::Array(a) => a.iter().try_for_each(|x| ensure_finite(x, key)),
        Value::Object(m) => m.iter().try_for_each(|(k, x)| ensure_finite(x, k)),
        _ => Ok(()),
    }
}

fn emit_json<T: Serialize>(cli: &Cli, file: &str, value: &T) -> Result<()> {
    let v = serde_json::to_value(value)?;
    ensure_finite(&v, "")?;
    let text = format!("{}\n", serde_json::to_string_pretty(&v)?);
    emit_text(cli, file, &text)
}

/// JSON by default; `--format csv` flattens scalar fields into name,value rows.
fn emit_record<T: Serialize>(cli: &Cli, stem: &str, value: &T) -> Result<()> {
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(cli, &format!("{stem}.json"), value),
        Format::Csv => {
            let v = serde_json::to_value(value)?;
            ensure_finite(&v, "")?;
            let mut out = String::new();
            csv_line(&mut out, &["name".to_string(), "value".to_string()]);
            if let Value::Object(m) = v {
                for (k, x) in m {
                    let cell = match &x {
                        Value::Number(n) => match n.as_f64() {
                            Some(f) if !n.is_u64() && !n.is_i64() => num(f)?,
                            _ => n.to_string(),
                        },
                        Value::Bool(b) => b.to_string(),
                        Value::String(s) => s.clone(),
                        Value::Null => String::new(),
                        _ => continue,
                    };
                    csv_line(&mut out, &[k, cell]);
                }
            }
            emit_text(cli, &format!("{stem}.csv"), &out)
        }
    }
}

fn emit_text(cli: &Cli, file: &str, text: &str) -> Result<()> {
    print!("{text}");
    if let Some(dir) = &cli.out {
        dump::write_atomic(&Path::new(dir).join(file), text.as_bytes())?;
    }
    Ok(())
}
