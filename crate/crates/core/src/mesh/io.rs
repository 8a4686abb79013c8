//! Grid-function files: one text header line `dim h dt nx [ny] nt x_lo [y_lo] t_lo`,
//! followed by little-endian `f64` values ordered by time level, then y, then x.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::field::GridFunction;
use super::grid::{SpaceTimeGrid, SpatialGrid};

fn header(grid: &SpaceTimeGrid) -> String {
    let sp = grid.space();
    let mut parts = vec![sp.dim().to_string(), sp.h().to_string(), grid.dt().to_string()];
    for a in 0..sp.dim() {
        parts.push(sp.count(a).to_string());
    }
    parts.push(grid.levels().to_string());
    for a in 0..sp.dim() {
        parts.push(sp.lo()[a].to_string());
    }
    parts.push(grid.t_lo().to_string());
    parts.join(" ")
}

/// In-memory form of the file written by [`write_grid_function`].
pub fn encode_grid_function(u: &GridFunction) -> Vec<u8> {
    let mut bytes = header(u.grid()).into_bytes();
    bytes.push(b'\n');
    bytes.reserve(u.values().len() * 8);
    for v in u.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

pub fn write_grid_function(path: &Path, u: &GridFunction) -> Result<()> {
    fs::write(path, encode_grid_function(u))?;
    Ok(())
}

fn parse_header(line: &str) -> Result<SpaceTimeGrid> {
    let bad = |m: &str| Error::Parse(format!("grid header: {m}"));
    let tok: Vec<&str> = line.split_whitespace().collect();
    let dim: usize = tok.first().and_then(|t| t.parse().ok()).ok_or_else(|| bad("dimension"))?;
    if !(1..=2).contains(&dim) || tok.len() != 5 + 2 * dim {
        return Err(bad("field count"));
    }
    let f = |i: usize| tok[i].parse::<f64>().map_err(|_| bad(tok[i]));
    let n = |i: usize| tok[i].parse::<usize>().map_err(|_| bad(tok[i]));
    let h = f(1)?;
    let dt = f(2)?;
    let counts: Vec<usize> = (0..dim).map(|a| n(3 + a)).collect::<Result<_>>()?;
    let nt = n(3 + dim)?;
    let lo: Vec<f64> = (0..dim).map(|a| f(4 + dim + a)).collect::<Result<_>>()?;
    let t_lo = f(4 + 2 * dim)?;
    let space = SpatialGrid::from_counts(h, &lo, &counts)?;
    SpaceTimeGrid::new(space, dt, t_lo, nt)
}

pub fn read_grid_function(path: &Path) -> Result<GridFunction> {
    let bytes = fs::read(path)?;
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Parse("missing header".into()))?;
    let line = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Parse("header is not UTF-8".into()))?;
    let grid = parse_header(line)?;
    let body = &bytes[nl + 1..];
    if body.len() != grid.len() * 8 {
        return Err(Error::Parse(format!("expected {} values, found {} bytes", grid.len(), body.len())));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    GridFunction::new(grid, values)
}

/// CSV with columns `x[,y],t,value`.
pub fn export_csv(path: &Path, u: &GridFunction) -> Result<()> {
    let grid = u.grid();
    let dim = grid.dim();
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", if dim == 1 { "x,t,value" } else { "x,y,t,value" })?;
    for node in 0..grid.len() {
        let p = grid.point(node);
        if dim == 1 {
            writeln!(out, "{},{},{}", p.x[0], p.t, u.at(node))?;
        } else {
            writeln!(out, "{},{},{},{}", p.x[0], p.x[1], p.t, u.at(node))?;
        }
    }
    out.flush()?;
    Ok(())
}
