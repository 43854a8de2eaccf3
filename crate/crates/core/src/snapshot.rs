//! Snapshot files: one CSV per emission time, `#`-prefixed metadata header
//! (run configuration echo included) followed by a column-header row and one
//! row per cell. Floats are written with 17 significant digits so files
//! round-trip bit-exactly.

use crate::config::{parse_config, serialize, RunConfig};
use crate::grid::{build_grid, AveragedField, GridSpec};
use crate::model::SystemState;
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason} (line {line})")]
    Format { path: String, line: usize, reason: String },
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone)]
pub struct SnapshotRecord {
    pub t: f64,
    pub step: usize,
    pub version: String,
    pub config: RunConfig,
    pub grid: GridSpec,
    pub rho: AveragedField,
    pub c: AveragedField,
    pub i_int: AveragedField,
}

pub fn write_snapshot(
    path: &Path,
    config: &RunConfig,
    grid: &GridSpec,
    state: &SystemState,
    step: usize,
    t: f64,
) -> Result<(), SnapshotError> {
    let io_err = |source| SnapshotError::Io { path: path.display().to_string(), source };
    let mut out = String::new();
    out.push_str("# angio snapshot\n");
    out.push_str(&format!("# version: {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("# t: {}\n", format_float(t)));
    out.push_str(&format!("# step: {step}\n"));
    for line in serialize(config).lines() {
        out.push_str("# config: ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("i,j,x_center,y_center,rho,C,I\n");
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let (ii, jj) = (i as isize, j as isize);
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                i,
                j,
                format_float(grid.x_center(ii)),
                format_float(grid.y_center(jj)),
                format_float(state.rho.get(ii, jj)),
                format_float(state.c.get(ii, jj)),
                format_float(state.i_int.get(ii, jj)),
            ));
        }
    }
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(out.as_bytes()).map_err(io_err)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotRecord, SnapshotError> {
    let pd = path.display().to_string();
    let io_err = |source| SnapshotError::Io { path: pd.clone(), source };
    let fmt_err = |line: usize, reason: String| SnapshotError::Format {
        path: pd.clone(),
        line,
        reason,
    };
    let text = fs::read_to_string(path).map_err(io_err)?;

    let mut t: Option<f64> = None;
    let mut step: Option<usize> = None;
    let mut version = String::new();
    let mut config_text = String::new();
    let mut header_seen = false;
    let mut rows: Vec<(usize, usize, [f64; 5])> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            if let Some(v) = meta.strip_prefix("version:") {
                version = v.trim().to_string();
            } else if let Some(v) = meta.strip_prefix("t:") {
                t = Some(
                    v.trim()
                        .parse()
                        .map_err(|e| fmt_err(lineno, format!("bad t: {e}")))?,
                );
            } else if let Some(v) = meta.strip_prefix("step:") {
                step = Some(
                    v.trim()
                        .parse()
                        .map_err(|e| fmt_err(lineno, format!("bad step: {e}")))?,
                );
            } else if let Some(v) = meta.strip_prefix("config:") {
                config_text.push_str(v.trim());
                config_text.push('\n');
            }
            continue;
        }
        if !header_seen {
            if line != "i,j,x_center,y_center,rho,C,I" {
                return Err(fmt_err(lineno, format!("unexpected column header '{line}'")));
            }
            header_seen = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(fmt_err(lineno, format!("expected 7 columns, got {}", parts.len())));
        }
        let i: usize = parts[0]
            .parse()
            .map_err(|e| fmt_err(lineno, format!("bad i: {e}")))?;
        let j: usize = parts[1]
            .parse()
            .map_err(|e| fmt_err(lineno, format!("bad j: {e}")))?;
        let mut vals = [0.0; 5];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = parts[k + 2]
                .parse::<f64>()
                .map_err(|e| fmt_err(lineno, format!("bad float: {e}")))?;
            if !v.is_finite() {
                return Err(fmt_err(lineno, "non-finite value".into()));
            }
        }
        rows.push((i, j, vals));
    }

    let t = t.ok_or_else(|| fmt_err(0, "missing '# t:' metadata".into()))?;
    let step = step.ok_or_else(|| fmt_err(0, "missing '# step:' metadata".into()))?;
    let config = parse_config(&config_text)
        .map_err(|e| fmt_err(0, format!("config echo does not parse: {e}")))?;
    let grid = build_grid(config.x_len, config.y0, config.y1, config.nx, config.ny)
        .map_err(|e| fmt_err(0, e.to_string()))?;
    if rows.len() != grid.nx * grid.ny {
        return Err(fmt_err(
            0,
            format!("expected {} rows, found {}", grid.nx * grid.ny, rows.len()),
        ));
    }
    let mut rho = AveragedField::zeros(grid.nx, grid.ny);
    let mut c = AveragedField::zeros(grid.nx, grid.ny);
    let mut i_int = AveragedField::zeros(grid.nx, grid.ny);
    for (i, j, vals) in rows {
        if i >= grid.nx || j >= grid.ny {
            return Err(fmt_err(0, format!("cell index ({i},{j}) outside the mesh")));
        }
        rho.set(i as isize, j as isize, vals[2]);
        c.set(i as isize, j as isize, vals[3]);
        i_int.set(i as isize, j as isize, vals[4]);
    }
    Ok(SnapshotRecord { t, step, version, config, grid, rho, c, i_int })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_quadrature;
    use crate::model::initial_state;

    #[test]
    fn snapshot_round_trip() {
        let cfg = RunConfig::default();
        let grid = build_grid(cfg.x_len, cfg.y0, cfg.y1, 10, 12).unwrap();
        let mut cfg = cfg;
        cfg.nx = 10;
        cfg.ny = 12;
        let q = make_quadrature();
        let state = initial_state(&grid, &cfg.params, &q).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap_0000.csv");
        write_snapshot(&path, &cfg, &grid, &state, 17, 0.25).unwrap();
        let rec = read_snapshot(&path).unwrap();
        assert_eq!(rec.step, 17);
        assert_eq!(rec.t, 0.25);
        assert_eq!(rec.config, cfg);
        for i in 0..10 {
            for j in 0..12 {
                assert_eq!(rec.rho.get(i, j).to_bits(), state.rho.get(i, j).to_bits());
                assert_eq!(rec.c.get(i, j).to_bits(), state.c.get(i, j).to_bits());
            }
        }
    }

    #[test]
    fn reader_rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "# t: 0.1\n# step: 1\ni,j,x_center,y_center,rho,C,I\n1,2,3\n")
            .unwrap();
        assert!(matches!(read_snapshot(&path), Err(SnapshotError::Format { .. })));
    }
}
