use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hydro_pde::{FieldGrid, Grid, Levels, TrajectoryGrid};

/// Decimal notation with 17 significant digits; `inf`, `-inf` and `nan` for
/// non-finite values.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.0000000000000000".into();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (16 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

pub const SERIES_HEADER: &str = "run_count,t,x,value";
pub const FIELDS_HEADER: &str = "t,x,rho,qdot,kdot,g,h";

/// A `run_count,t,x,value` table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesTable {
    pub rows: Vec<(usize, f64, f64, f64)>,
}

impl SeriesTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SERIES_HEADER);
        out.push('\n');
        for &(count, t, x, v) in &self.rows {
            let _ = writeln!(out, "{count},{},{},{}", format_number(t), format_number(x), format_number(v));
        }
        out
    }
}

/// `fields.csv` for a trajectory with drifts. The bond current `qdot` is
/// written at the left node of its bond; the last node repeats the last bond.
pub fn fields_csv(traj: &TrajectoryGrid, g: &FieldGrid, h: &FieldGrid) -> String {
    let grid = traj.grid;
    let mut out = String::from(FIELDS_HEADER);
    out.push('\n');
    for n in 0..grid.levels() {
        let t = format_number(grid.t(n));
        for j in 0..grid.nodes() {
            let bond = j.min(grid.nx - 1);
            let _ = writeln!(
                out,
                "{t},{},{},{},{},{},{}",
                format_number(grid.x(j)),
                format_number(traj.rho.get(n, j)),
                format_number(traj.qdot.get(n, bond)),
                format_number(traj.kdot.get(n, j)),
                format_number(g.at(n, j)),
                format_number(h.at(n, j)),
            );
        }
    }
    out
}

fn parse_rows(text: &str, header: &str, path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("");
    if first.trim() != header {
        return Err(Error::Config(format!(
            "{}: expected header {header:?}, found {first:?}",
            path.display()
        )));
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != width {
                return Err(Error::Config(format!("{}: row {} has {} cells", path.display(), i + 2, cells.len())));
            }
            cells
                .iter()
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("{}: row {}: bad number {c:?}", path.display(), i + 2)))
                })
                .collect()
        })
        .collect()
}

/// Reads a trajectory and its drifts back from `fields.csv`.
pub fn read_fields_csv(path: &Path) -> Result<(TrajectoryGrid, FieldGrid, FieldGrid)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let rows = parse_rows(&text, FIELDS_HEADER, path)?;
    let Some(first) = rows.first() else {
        return Err(Error::Config(format!("{}: no data rows", path.display())));
    };
    let nodes = rows.iter().take_while(|r| r[0] == first[0]).count();
    if nodes < 3 || rows.len() % nodes != 0 {
        return Err(Error::Config(format!("{}: rows do not form a space-time grid", path.display())));
    }
    let levels = rows.len() / nodes;
    let t_final = rows[rows.len() - 1][0];
    let grid = Grid::new(nodes - 1, levels - 1, t_final).map_err(|e| Error::Config(e.to_string()))?;
    let column = |c: usize, cols: usize| -> Result<Levels> {
        Levels::from_rows(
            rows.chunks(nodes)
                .map(|chunk| chunk.iter().take(cols).map(|r| r[c]).collect())
                .collect(),
        )
    };
    for (i, r) in rows.iter().enumerate() {
        let (n, j) = (i / nodes, i % nodes);
        if (r[0] - grid.t(n)).abs() > 1e-9 * t_final.max(1.0) || (r[1] - grid.x(j)).abs() > 1e-9 {
            return Err(Error::Config(format!("{}: row {} is off the uniform grid", path.display(), i + 2)));
        }
    }
    let rho = column(2, nodes)?;
    let traj = TrajectoryGrid::from_rates(
        grid,
        rho.clone(),
        column(3, nodes - 1)?,
        column(4, nodes)?,
        rho.get(0, 0),
        rho.get(0, nodes - 1),
    )?;
    Ok((traj, FieldGrid::from_levels(grid, column(5, nodes)?)?, FieldGrid::from_levels(grid, column(6, nodes)?)?))
}

/// Reads a `t,x,value` field sampled on `grid`.
pub fn read_field_csv(path: &Path, grid: Grid) -> Result<FieldGrid> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let rows = parse_rows(&text, "t,x,value", path)?;
    if rows.len() != grid.levels() * grid.nodes() {
        return Err(Error::Config(format!(
            "{}: {} rows, expected {} for a {}x{} grid",
            path.display(),
            rows.len(),
            grid.levels() * grid.nodes(),
            grid.levels(),
            grid.nodes()
        )));
    }
    let values = Levels::from_rows(rows.chunks(grid.nodes()).map(|c| c.iter().map(|r| r[2]).collect()).collect())?;
    FieldGrid::from_levels(grid, values)
}

pub fn write_text(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}
