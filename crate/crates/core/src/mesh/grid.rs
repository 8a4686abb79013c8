use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Space-time point; unused spatial coordinates are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: [f64; 2],
    pub t: f64,
}

impl Point {
    pub fn new(x: &[f64], t: f64) -> Self {
        let mut c = [0.0; 2];
        c[..x.len().min(2)].copy_from_slice(&x[..x.len().min(2)]);
        Self { x: c, t }
    }

    pub fn origin() -> Self {
        Self { x: [0.0; 2], t: 0.0 }
    }
}

/// `max{|x1 - x2|, |t1 - t2|^(1/2)}`.
pub fn parabolic_distance(a: &Point, b: &Point) -> f64 {
    let dx = ((a.x[0] - b.x[0]).powi(2) + (a.x[1] - b.x[1]).powi(2)).sqrt();
    dx.max((a.t - b.t).abs().sqrt())
}

/// Uniform tensor grid in one or two space dimensions. Nodes sit at `lo + i h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    dim: usize,
    h: f64,
    lo: [f64; 2],
    n: [usize; 2],
}

impl SpatialGrid {
    /// Grid covering `[lo_i, hi_i]` per axis; each extent must be a whole number of cells.
    pub fn new(h: f64, extents: &[(f64, f64)]) -> Result<Self> {
        let dim = extents.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not supported")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing {h} must be positive")));
        }
        let mut lo = [0.0; 2];
        let mut n = [1usize; 2];
        for (axis, &(a, b)) in extents.iter().enumerate() {
            if !(b > a) {
                return Err(Error::InvalidGrid(format!("axis {axis}: empty extent [{a}, {b}]")));
            }
            let cells = (b - a) / h;
            let rounded = cells.round();
            if (cells - rounded).abs() > 1e-8 * cells.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: extent {} is not a multiple of h = {h}",
                    b - a
                )));
            }
            lo[axis] = a;
            n[axis] = rounded as usize + 1;
        }
        Ok(Self { dim, h, lo, n })
    }

    /// Grid from explicit node counts.
    pub fn from_counts(h: f64, lo: &[f64], counts: &[usize]) -> Result<Self> {
        if lo.len() != counts.len() || !(1..=2).contains(&lo.len()) {
            return Err(Error::InvalidGrid("inconsistent origin and counts".into()));
        }
        if counts.iter().any(|&c| c < 2) || !(h > 0.0) {
            return Err(Error::InvalidGrid("need at least two nodes per axis".into()));
        }
        let mut l = [0.0; 2];
        let mut n = [1usize; 2];
        l[..lo.len()].copy_from_slice(lo);
        n[..counts.len()].copy_from_slice(counts);
        Ok(Self { dim: lo.len(), h, lo: l, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lo(&self) -> [f64; 2] {
        self.lo
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.lo[axis] + (self.n[axis] - 1) as f64 * self.h
    }

    /// Node count along `axis` (1 for an unused axis).
    pub fn count(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume weight `h^dim` of one node.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n[0] + i
    }

    /// Axis indices of a flat spatial index.
    pub fn split(&self, s: usize) -> (usize, usize) {
        (s % self.n[0], s / self.n[0])
    }

    pub fn coord(&self, s: usize) -> [f64; 2] {
        let (i, j) = self.split(s);
        let mut x = [self.lo[0] + i as f64 * self.h, 0.0];
        if self.dim == 2 {
            x[1] = self.lo[1] + j as f64 * self.h;
        }
        x
    }

    pub fn contains(&self, x: &[f64; 2]) -> bool {
        let tol = 1e-9 * self.h;
        (0..self.dim).all(|a| x[a] >= self.lo[a] - tol && x[a] <= self.hi(a) + tol)
    }

    /// True if the flat index lies on the outer face of the box.
    pub fn on_boundary(&self, s: usize) -> bool {
        let (i, j) = self.split(s);
        let edge_x = i == 0 || i + 1 == self.n[0];
        let edge_y = self.dim == 2 && (j == 0 || j + 1 == self.n[1]);
        edge_x || edge_y
    }

    /// Number of node layers between `s` and the outer face.
    pub fn depth(&self, s: usize) -> usize {
        let (i, j) = self.split(s);
        let mut d = i.min(self.n[0] - 1 - i);
        if self.dim == 2 {
            d = d.min(j.min(self.n[1] - 1 - j));
        }
        d
    }
}

/// Spatial grid times a uniform sequence of time levels `t_lo + k dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    space: SpatialGrid,
    dt: f64,
    t_lo: f64,
    nt: usize,
}

impl SpaceTimeGrid {
    pub fn new(space: SpatialGrid, dt: f64, t_lo: f64, nt: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || nt == 0 {
            return Err(Error::InvalidGrid(format!("time axis dt = {dt}, levels = {nt}")));
        }
        Ok(Self { space, dt, t_lo, nt })
    }

    /// Grid covering `[t_lo, t_hi]` in whole steps of `dt`.
    pub fn covering(space: SpatialGrid, dt: f64, t_lo: f64, t_hi: f64) -> Result<Self> {
        let steps = (t_hi - t_lo) / dt;
        let rounded = steps.round();
        if !(t_hi > t_lo) || (steps - rounded).abs() > 1e-8 * steps.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "time extent [{t_lo}, {t_hi}] is not a multiple of dt = {dt}"
            )));
        }
        Self::new(space, dt, t_lo, rounded as usize + 1)
    }

    pub fn space(&self) -> &SpatialGrid {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn h(&self) -> f64 {
        self.space.h
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_lo(&self) -> f64 {
        self.t_lo
    }

    pub fn t_hi(&self) -> f64 {
        self.time(self.nt - 1)
    }

    pub fn levels(&self) -> usize {
        self.nt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_lo + k as f64 * self.dt
    }

    pub fn level_len(&self) -> usize {
        self.space.len()
    }

    pub fn len(&self) -> usize {
        self.space.len() * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Space-time weight `h^dim dt` of one node.
    pub fn node_volume(&self) -> f64 {
        self.space.cell_volume() * self.dt
    }

    pub fn flat(&self, k: usize, s: usize) -> usize {
        k * self.space.len() + s
    }

    /// `(level, spatial index)` of a flat node.
    pub fn split(&self, node: usize) -> (usize, usize) {
        (node / self.space.len(), node % self.space.len())
    }

    pub fn point(&self, node: usize) -> Point {
        let (k, s) = self.split(node);
        Point { x: self.space.coord(s), t: self.time(k) }
    }

    pub fn contains(&self, z: &Point) -> bool {
        let tol = 1e-9 * self.dt;
        self.space.contains(&z.x) && z.t >= self.t_lo - tol && z.t <= self.t_hi() + tol
    }

    /// Nearest node to a point inside the grid.
    pub fn nearest(&self, z: &Point) -> Result<usize> {
        if !self.contains(z) {
            return Err(Error::OffGrid);
        }
        let g = &self.space;
        let i = ((z.x[0] - g.lo[0]) / g.h).round().clamp(0.0, (g.n[0] - 1) as f64) as usize;
        let j = if g.dim == 2 {
            ((z.x[1] - g.lo[1]) / g.h).round().clamp(0.0, (g.n[1] - 1) as f64) as usize
        } else {
            0
        };
        let k = ((z.t - self.t_lo) / self.dt).round().clamp(0.0, (self.nt - 1) as f64) as usize;
        Ok(self.flat(k, g.index(i, j)))
    }
}
