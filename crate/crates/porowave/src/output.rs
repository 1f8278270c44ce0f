//! File formats of a run directory: field snapshots, the norms CSV, legacy
//! VTK structured points and the run manifest.
//!
//! All numeric output uses Rust's shortest round-trip decimal formatting, so
//! snapshot files reproduce the in-memory doubles bit-exactly on read-back
//! and reruns yield byte-identical files.

use porowave_core::grid::{Field, Grid, GridError};
use porowave_core::norms::TimeSeries;
use porowave_core::report::RunReport;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

/// Renders a snapshot: header `d nx [ny] hx [hy] t`, then row-major values.
pub fn snapshot_to_string(field: &Field, t: f64) -> String {
    let grid = field.grid();
    let mut out = String::new();
    if grid.dim() == 1 {
        let _ = writeln!(out, "1 {} {} {t}", grid.cells()[0], grid.spacing()[0]);
    } else {
        let _ = writeln!(
            out,
            "2 {} {} {} {} {t}",
            grid.cells()[0],
            grid.cells()[1],
            grid.spacing()[0],
            grid.spacing()[1]
        );
    }
    for v in field.values() {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// Parses a snapshot written by [`snapshot_to_string`].
pub fn snapshot_from_string(text: &str) -> Result<(Field, f64), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty snapshot")?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let parse_f =
        |s: &str| s.parse::<f64>().map_err(|_| format!("bad number {s:?} in header"));
    let parse_n =
        |s: &str| s.parse::<usize>().map_err(|_| format!("bad count {s:?} in header"));
    let (grid, t) = match tokens.as_slice() {
        [d, nx, hx, t] if *d == "1" => {
            let nx = parse_n(nx)?;
            let hx = parse_f(hx)?;
            let grid = Grid::new_1d(hx * nx as f64, nx).map_err(|e| format!("{e}"))?;
            (grid, parse_f(t)?)
        }
        [d, nx, ny, hx, hy, t] if *d == "2" => {
            let nx = parse_n(nx)?;
            let ny = parse_n(ny)?;
            let hx = parse_f(hx)?;
            let hy = parse_f(hy)?;
            let grid = Grid::new_2d([hx * nx as f64, hy * ny as f64], [nx, ny])
                .map_err(|e| format!("{e}"))?;
            (grid, parse_f(t)?)
        }
        _ => return Err(format!("malformed snapshot header {header:?}")),
    };
    let values: Result<Vec<f64>, String> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|_| format!("bad value {l:?}")))
        .collect();
    let field = Field::from_values(grid, values?)
        .map_err(|e: GridError| format!("{e}"))?;
    Ok((field, t))
}

pub fn write_snapshot(path: &Path, field: &Field, t: f64) -> io::Result<()> {
    std::fs::write(path, snapshot_to_string(field, t))
}

pub fn read_snapshot(path: &Path) -> io::Result<(Field, f64)> {
    let text = std::fs::read_to_string(path)?;
    snapshot_from_string(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Renders the per-step norms CSV; the `q` column carries the contraction
/// factors of fixed-point runs (row `j` gets `q_j`) and is empty otherwise.
pub fn norms_csv(report: &RunReport) -> String {
    let mut out = String::from("t,phi_inf,phi_min,phi_bv,u_inf,u_w12,q\n");
    for (i, row) in report.steps.iter().enumerate() {
        let q = report
            .contraction
            .get(i)
            .map(|q| q.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.t, row.phi_inf, row.phi_min, row.phi_bv, row.u_inf, row.u_w12, q
        );
    }
    out
}

/// Legacy VTK (ASCII STRUCTURED_POINTS) with `phi` and `u` as cell scalars.
pub fn vtk_structured_points(phi: &Field, u: &Field, title: &str) -> String {
    let grid = phi.grid();
    let [nx, ny] = grid.cells();
    let [hx, hy] = grid.spacing();
    let nz = 1;
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 2.0\n");
    let _ = writeln!(out, "{title}");
    out.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(out, "DIMENSIONS {nx} {ny} {nz}");
    let _ = writeln!(out, "ORIGIN {} {} 0", 0.5 * hx, if grid.dim() == 2 { 0.5 * hy } else { 0.0 });
    let _ = writeln!(out, "SPACING {hx} {} 1", if grid.dim() == 2 { hy } else { 1.0 });
    let _ = writeln!(out, "POINT_DATA {}", nx * ny * nz);
    for (name, field) in [("phi", phi), ("u", u)] {
        let _ = writeln!(out, "SCALARS {name} double 1");
        out.push_str("LOOKUP_TABLE default\n");
        for v in field.values() {
            let _ = writeln!(out, "{v}");
        }
    }
    out
}

/// Inventory entry plus writer state for the run manifest.
pub struct ManifestBuilder {
    lines: Vec<String>,
    inventory: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(config_echo_path: &Path, grid: Grid, threads: usize, seed: u64) -> ManifestBuilder {
        let mut lines = Vec::new();
        lines.push(format!("code-version = {}", env!("CARGO_PKG_VERSION")));
        lines.push(format!("config-echo = {}", config_echo_path.display()));
        let [nx, ny] = grid.cells();
        if grid.dim() == 1 {
            lines.push(format!("grid = 1D {nx} cells, extent {}", grid.extents()[0]));
        } else {
            lines.push(format!(
                "grid = 2D {nx}x{ny} cells, extents {} {}",
                grid.extents()[0],
                grid.extents()[1]
            ));
        }
        lines.push(format!("threads = {threads}"));
        lines.push(format!("seed = {seed}"));
        ManifestBuilder { lines, inventory: vec![config_echo_path.to_path_buf()] }
    }

    pub fn record_file(&mut self, path: &Path) {
        self.inventory.push(path.to_path_buf());
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.lines.push(format!("{key} = {value}"));
    }

    /// Writes the manifest exactly once; consumed on use.
    pub fn write(mut self, dir: &Path, termination: &str, wall_seconds: f64) -> io::Result<PathBuf> {
        self.lines.push(format!("termination = {termination}"));
        self.lines.push(format!("wall-seconds = {wall_seconds:.3}"));
        self.lines.push("inventory =".into());
        for file in &self.inventory {
            self.lines.push(format!("  {}", file.display()));
        }
        let path = dir.join("manifest.txt");
        std::fs::write(&path, self.lines.join("\n") + "\n")?;
        Ok(path)
    }
}

/// Writes snapshots of a series at the given stride (the final snapshot is
/// always included); returns the written paths.
pub fn write_series(
    dir: &Path,
    prefix: &str,
    series: &TimeSeries,
    stride: usize,
    vtk: bool,
) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let last = series.len() - 1;
    for k in 0..series.len() {
        if k % stride != 0 && k != last {
            continue;
        }
        let t = series.times()[k];
        let phi_path = dir.join(format!("{prefix}_phi_{k:06}.dat"));
        write_snapshot(&phi_path, series.phi_at(k), t)?;
        written.push(phi_path);
        let u_path = dir.join(format!("{prefix}_u_{k:06}.dat"));
        write_snapshot(&u_path, series.u_at(k), t)?;
        written.push(u_path);
        if vtk {
            let vtk_path = dir.join(format!("{prefix}_{k:06}.vtk"));
            std::fs::write(
                &vtk_path,
                vtk_structured_points(series.phi_at(k), series.u_at(k), &format!("t = {t}")),
            )?;
            written.push(vtk_path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use porowave_core::grid::Grid;

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let g = Grid::new_2d([1.0, 2.0], [4, 3]).unwrap();
        let f = Field::from_fn(g, |x| (x[0] * 7.3 + x[1] * 0.1).sin() / 3.0);
        let text = snapshot_to_string(&f, 0.125);
        let (back, t) = snapshot_from_string(&text).unwrap();
        assert_eq!(t, 0.125);
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid(), f.grid());
    }

    #[test]
    fn vtk_header_shape() {
        let g = Grid::new_1d(1.0, 4).unwrap();
        let f = Field::constant(g, 0.5);
        let text = vtk_structured_points(&f, &f, "t = 0");
        assert!(text.starts_with("# vtk DataFile Version 2.0\n"));
        assert!(text.contains("DATASET STRUCTURED_POINTS"));
        assert!(text.contains("DIMENSIONS 4 1 1"));
        assert!(text.contains("SCALARS phi double 1"));
    }
}
