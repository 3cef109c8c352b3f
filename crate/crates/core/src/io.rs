//! On-disk formats.
//!
//! * Field dump: `<stem>.bin` holds little-endian `f64` samples in row-major
//!   order (last axis fastest); `<stem>.meta` is a `key=value` text sidecar
//!   with `d`, `n` and `name`.
//! * Path archive: a directory of per-snapshot field dumps and a TOML manifest
//!   listing the times, seed, trajectory, mollifier scale and grid.
//! * Trajectory archive: a TOML manifest, per-snapshot dumps and
//!   `trajectory.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::TorusGrid;
use crate::solver::{Status, Trajectory};

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Write `<stem>.bin` and `<stem>.meta`.
pub fn write_field(stem: &Path, field: &Field, name: &str) -> Result<()> {
    if name.contains('\n') || name.contains('=') {
        return Err(Error::InvalidInput(format!("field name {name:?} may not contain '=' or newlines")));
    }
    let mut bytes = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(with_ext(stem, "bin"), bytes)?;
    let g = field.grid();
    fs::write(with_ext(stem, "meta"), format!("d={}\nn={}\nname={}\n", g.dim(), g.n(), name))?;
    Ok(())
}

/// Parse a `key=value` sidecar.
pub fn read_sidecar(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Read a dump written by [`write_field`]; samples come back bit-identical.
pub fn read_field(stem: &Path) -> Result<(Field, String)> {
    let meta_path = with_ext(stem, "meta");
    let meta = read_sidecar(&meta_path)?;
    let get = |k: &str| meta.get(k).ok_or_else(|| Error::InvalidInput(format!("{}: missing key `{k}`", meta_path.display())));
    let parse = |k: &str| -> Result<usize> {
        get(k)?.parse().map_err(|_| Error::InvalidInput(format!("{}: `{k}` is not an integer", meta_path.display())))
    };
    let grid = TorusGrid::new(parse("d")?, parse("n")?)?;
    let bytes = fs::read(with_ext(stem, "bin"))?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::InvalidInput(format!("expected {} bytes, found {}", grid.len() * 8, bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((Field::from_band_limited_values(grid, values)?, get("name")?.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub d: usize,
    pub n: usize,
}

impl From<TorusGrid> for GridInfo {
    fn from(g: TorusGrid) -> Self {
        Self { d: g.dim(), n: g.n() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathManifest {
    pub grid: GridInfo,
    pub seed: u64,
    pub trajectory: u64,
    pub eps: f64,
    pub times: Vec<f64>,
    /// Dump stem (relative to the archive) for each time.
    pub snapshots: Vec<String>,
}

/// Write snapshots `fields[k]` at `times[k]` into `dir`.
pub fn write_path_archive(dir: &Path, seed: u64, trajectory: u64, eps: f64, times: &[f64], fields: &[Field], name: &str) -> Result<PathManifest> {
    if times.len() != fields.len() || fields.is_empty() {
        return Err(Error::InvalidInput("need one field per time".into()));
    }
    fs::create_dir_all(dir)?;
    let mut snapshots = Vec::with_capacity(fields.len());
    for (k, f) in fields.iter().enumerate() {
        let stem = format!("{name}_{k:05}");
        write_field(&dir.join(&stem), f, name)?;
        snapshots.push(stem);
    }
    let m = PathManifest { grid: fields[0].grid().into(), seed, trajectory, eps, times: times.to_vec(), snapshots };
    write_toml(&dir.join("manifest.toml"), &m)?;
    Ok(m)
}

pub fn read_path_archive(dir: &Path) -> Result<(PathManifest, Vec<Field>)> {
    let m: PathManifest = read_toml(&dir.join("manifest.toml"))?;
    let fields = m.snapshots.iter().map(|s| Ok(read_field(&dir.join(s))?.0)).collect::<Result<_>>()?;
    Ok((m, fields))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub grid: GridInfo,
    pub alpha: f64,
    pub dt: f64,
    pub status: Status,
    pub windows: usize,
    pub max_contraction: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<String>,
}

/// Manifest, `trajectory.csv` and a dump for every `every`-th stored field (and the last).
pub fn write_trajectory_archive(dir: &Path, traj: &Trajectory, name: &str, every: usize) -> Result<TrajectoryManifest> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trajectory.csv"), traj.to_csv())?;
    let every = every.max(1);
    let last = traj.fields.len() - 1;
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    for (k, (t, f)) in traj.times.iter().zip(&traj.fields).enumerate() {
        if k % every == 0 || k == last {
            let stem = format!("{name}_{k:05}");
            write_field(&dir.join(&stem), f, name)?;
            times.push(*t);
            snapshots.push(stem);
        }
    }
    let m = TrajectoryManifest {
        grid: traj.last().grid().into(),
        alpha: traj.alpha,
        dt: traj.dt,
        status: traj.status,
        windows: traj.windows.len(),
        max_contraction: traj.max_contraction(),
        times,
        snapshots,
    };
    write_toml(&dir.join("manifest.toml"), &m)?;
    Ok(m)
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dump_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = TorusGrid::new(2, 16).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * 3.0 * x[1]).cos() + 0.1).unwrap();
        let stem = dir.path().join("f");
        write_field(&stem, &f, "sample").unwrap();
        let (h, name) = read_field(&stem).unwrap();
        assert_eq!(name, "sample");
        assert!(f.values().iter().zip(h.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let meta = fs::read_to_string(dir.path().join("f.meta")).unwrap();
        assert_eq!(meta, "d=2\nn=16\nname=sample\n");
        let bytes = fs::read(dir.path().join("f.bin")).unwrap();
        assert_eq!(&bytes[..8], &f.values()[0].to_le_bytes());
    }

    #[test]
    fn truncated_dump_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = TorusGrid::new(1, 8).unwrap();
        let stem = dir.path().join("f");
        write_field(&stem, &Field::constant(g, 1.0), "c").unwrap();
        fs::write(dir.path().join("f.bin"), [0u8; 12]).unwrap();
        assert!(read_field(&stem).is_err());
    }

    #[test]
    fn path_archive_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = TorusGrid::new(1, 16).unwrap();
        let fields = vec![Field::constant(g, 0.5), Field::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap()];
        write_path_archive(dir.path(), 3, 1, 0.2, &[0.0, 0.1], &fields, "x").unwrap();
        let (m, back) = read_path_archive(dir.path()).unwrap();
        assert_eq!(m.seed, 3);
        assert_eq!(m.times, vec![0.0, 0.1]);
        for (a, b) in back.iter().zip(&fields) {
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
