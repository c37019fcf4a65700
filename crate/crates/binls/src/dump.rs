//! Field dumps (JSON header + raw little-endian f64) and StatePair manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, StatePair, SystemParams};
use crate::spectral::{GridSpec, RealField};

/// Write via a sibling temp file and rename, so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Config(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub dimension: usize,
    pub points_per_axis: usize,
    pub box_length: f64,
    pub dtype: String,
}

pub const DTYPE: &str = "f64-le";

/// Writes `<stem>.json` and `<stem>.bin` into `dir`.
pub fn write_field(dir: &Path, stem: &str, f: &RealField) -> Result<()> {
    let g = f.grid();
    let header = FieldHeader {
        dimension: g.dimension,
        points_per_axis: g.points_per_axis,
        box_length: g.box_length,
        dtype: DTYPE.to_string(),
    };
    let bytes: Vec<u8> = f.samples().iter().flat_map(|x| x.to_le_bytes()).collect();
    write_atomic(&dir.join(format!("{stem}.bin")), &bytes)?;
    write_atomic(&dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&header)?.as_bytes())
}

pub fn read_field(dir: &Path, stem: &str) -> Result<RealField> {
    let hpath = dir.join(format!("{stem}.json"));
    let text = fs::read_to_string(&hpath).map_err(|e| Error::io(&hpath, e))?;
    let header: FieldHeader = serde_json::from_str(&text)?;
    if header.dtype != DTYPE {
        return Err(Error::Config(format!("unsupported dtype {}", header.dtype)));
    }
    let grid = GridSpec::new(header.dimension, header.points_per_axis, header.box_length)?;
    let bpath = dir.join(format!("{stem}.bin"));
    let bytes = fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::Grid(format!("{} holds {} bytes, expected {}", bpath.display(), bytes.len(), grid.len() * 8)));
    }
    let samples = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    RealField::new(grid, samples)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub params: SystemParams,
    pub total_mass: f64,
    #[serde(rename = "energy_I")]
    pub energy_i: f64,
    pub lambda_estimate: f64,
}

pub const MANIFEST: &str = "manifest.json";

/// Writes `u.*`, `v.*` and `manifest.json` into `dir` (created if needed).
pub fn write_state(dir: &Path, p: &StatePair, params: &SystemParams) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_field(dir, "u", &p.u)?;
    write_field(dir, "v", &p.v)?;
    let t = model::terms(p, params);
    let manifest = Manifest {
        params: *params,
        total_mass: t.total_mass(),
        energy_i: t.energy_i(params),
        lambda_estimate: t.multiplier(params)?,
    };
    let path = dir.join(MANIFEST);
    write_atomic(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(path)
}

pub fn read_state(dir: &Path) -> Result<(StatePair, Manifest)> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let pair = StatePair::new(read_field(dir, "u")?, read_field(dir, "v")?)?;
    Ok((pair, manifest))
}
