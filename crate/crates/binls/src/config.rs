//! Run configuration: flat `key=value` files with dotted namespaces, or JSON.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::ground_state::{InitStrategy, SolveConfig};
use crate::model::SystemParams;
use crate::mountain_pass::SaddleConfig;
use crate::spectral::GridSpec;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dimension: Option<usize>,
    pub points_per_axis: usize,
    pub box_length: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub rhos: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnSection {
    pub points_per_axis: Option<usize>,
    pub box_length: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for GnSection {
    fn default() -> Self {
        GnSection { points_per_axis: None, box_length: None, tol: 1e-12, max_iters: 3000 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStateSection {
    /// Single strategy; the default runs all restarts.
    pub strategy: Option<InitStrategy>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub estimate_r: bool,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        ThresholdSection { estimate_r: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: SystemParams,
    pub grid: GridSection,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub saddle: SaddleConfig,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub gn: GnSection,
    #[serde(default)]
    pub ground_state: GroundStateSection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub thresholds: ThresholdSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON config: {e}")))?
        } else {
            parse_key_values(text)?
        };
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid_spec()?;
        self.gn_grid()?;
        self.solve.validate()?;
        self.saddle.validate()?;
        if self.scan.rhos.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("scan.rhos must be positive".into()));
        }
        if !(self.gn.tol > 0.0) || self.gn.max_iters == 0 {
            return Err(Error::Config("gn.tol must be positive and gn.max_iters at least 1".into()));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        if let Some(d) = self.grid.dimension {
            if d != self.params.dimension {
                return Err(Error::Config(format!(
                    "grid.dimension {d} differs from params.dimension {}",
                    self.params.dimension
                )));
            }
        }
        GridSpec::new(self.params.dimension, self.grid.points_per_axis, self.grid.box_length)
    }

    /// Grid for the GN ascent, defaulting to the main grid.
    pub fn gn_grid(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.params.dimension,
            self.gn.points_per_axis.unwrap_or(self.grid.points_per_axis),
            self.gn.box_length.unwrap_or(self.grid.box_length),
        )
    }
}

fn scalar(raw: &str) -> Value {
    let s = raw.trim();
    if s.starts_with('[') || s.starts_with('{') {
        if let Ok(v) = serde_json::from_str(s) {
            return v;
        }
    }
    if let Some(q) = s.strip_prefix('"').and_then(|t| t.strip_suffix('"')) {
        return Value::String(q.to_string());
    }
    match s {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(i) = s.parse::<u64>() {
        return Value::from(i);
    }
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(x) = s.parse::<f64>() {
        return Value::from(x);
    }
    if s.contains(',') {
        let parts: Vec<Value> = s.split(',').map(scalar).collect();
        return Value::Array(parts);
    }
    Value::String(s.to_string())
}

/// `a.b.c = value` lines into a nested JSON object. `#` starts a comment line.
pub fn parse_key_values(text: &str) -> Result<Value> {
    let mut root = Map::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
        let parts: Vec<&str> = key.trim().split('.').map(str::trim).collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("line {}: empty key segment in `{}`", lineno + 1, key.trim())));
        }
        let mut node = &mut root;
        for seg in &parts[..parts.len() - 1] {
            let entry = node.entry(seg.to_string()).or_insert_with(|| Value::Object(Map::new()));
            node = entry
                .as_object_mut()
                .ok_or_else(|| Error::Config(format!("line {}: `{seg}` is both a value and a section", lineno + 1)))?;
        }
        let last = parts[parts.len() - 1].to_string();
        if node.insert(last.clone(), scalar(raw)).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{}`", lineno + 1, key.trim())));
        }
    }
    Ok(Value::Object(root))
}

#[cfg(test)]
mod tests {
    use super::*;

    const KV: &str = "
# ground state instance
params.dimension = 1
params.alpha1 = 1
params.alpha2 = 1.0
params.beta = 1
params.r1 = 2
params.r2 = 2
params.rho = 1
grid.points_per_axis = 256
grid.box_length = 40
solve.seed = 42
solve.preconditioner.kind = bilaplacian
scan.rhos = 0.5, 1, 1.5
ground_state.strategy = coupled-gaussian
";

    #[test]
    fn key_value_config() {
        let c = RunConfig::parse(KV).unwrap();
        assert_eq!(c.params.dimension, 1);
        assert_eq!(c.solve.seed, 42);
        assert_eq!(c.scan.rhos, vec![0.5, 1.0, 1.5]);
        assert_eq!(c.ground_state.strategy, Some(InitStrategy::CoupledGaussian));
        assert_eq!(c.solve.preconditioner, crate::ground_state::Preconditioner::Bilaplacian);
        assert_eq!(c.grid_spec().unwrap().points_per_axis, 256);
    }

    #[test]
    fn json_equivalent() {
        let json = r#"{"params":{"dimension":1,"alpha1":1,"alpha2":1,"beta":1,"r1":2,"r2":2,"rho":1},
            "grid":{"points_per_axis":256,"box_length":40},"solve":{"seed":42}}"#;
        let c = RunConfig::parse(json).unwrap();
        assert_eq!(c.solve.seed, 42);
        assert_eq!(c.solve.grad_tol, SolveConfig::default().grad_tol);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("params.dimension 1").is_err());
        assert!(RunConfig::parse(&KV.replace("params.beta = 1", "params.beta = -1")).is_err());
        assert!(RunConfig::parse(&KV.replace("grid.points_per_axis = 256", "grid.points_per_axis = 100")).is_err());
        assert!(RunConfig::parse(&format!("{KV}\nsolve.unknown = 3")).is_err());
        assert!(RunConfig::parse(&format!("{KV}\nparams.rho = 2")).is_err());
        assert!(RunConfig::parse(&KV.replace("coupled-gaussian", "flat")).is_err());
    }
}
