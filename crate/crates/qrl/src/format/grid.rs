//! CSV exports of distance tables.

use std::io::Write;

use anyhow::Result;
use qrl_core::env::DiscreteEnv;
use qrl_core::oracle::DistanceMatrix;

fn cell(x: f64) -> String {
    if x.is_infinite() && x > 0.0 {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

pub fn parse_cell(s: &str) -> Result<f64> {
    Ok(match s.trim() {
        "inf" => f64::INFINITY,
        other => other.parse()?,
    })
}

/// Per-state values laid out on the environment grid. For MountainCar rows
/// are position bins and columns are velocity bins; cells with no state are
/// left empty.
pub fn write_state_grid<W: Write>(w: W, env: &dyn DiscreteEnv, values: &[f64]) -> Result<()> {
    let (mut rows, mut cols) = (0, 0);
    for s in 0..env.num_states() {
        let (r, c) = env.grid_coords(s);
        rows = rows.max(r + 1);
        cols = cols.max(c + 1);
    }
    let mut grid = vec![vec![String::new(); cols]; rows];
    for (s, &v) in values.iter().enumerate().take(env.num_states()) {
        let (r, c) = env.grid_coords(s);
        grid[r][c] = cell(v);
    }
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in grid {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Rows are sources, columns are goals.
pub fn write_distance_matrix<W: Write>(w: W, d: &DistanceMatrix) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for r in 0..d.rows() {
        out.write_record(d.row(r).iter().map(|&x| cell(x)))?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a grid written by either writer; empty cells become `None`.
pub fn read_grid(text: &str) -> Result<Vec<Vec<Option<f64>>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(
            rec.iter()
                .map(|c| if c.is_empty() { Ok(None) } else { parse_cell(c).map(Some) })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(out)
}
