use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

use super::field::GridFunction;
use super::grid::{Point, SpaceTimeGrid, SpatialGrid};

/// `B_r(x0) x I` with `I = (t0 - b, t0 + b)` or, for backward cylinders, `(t0 - b, t0]`.
///
/// Node membership is strict in space (`|x - x0| < r`); ties are resolved against
/// inclusion with a tolerance of `1e-9 h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: Point,
    pub radius: f64,
    pub half_time: f64,
    pub backward: bool,
}

impl Cylinder {
    pub fn standard(center: Point, radius: f64, half_time: f64, backward: bool) -> Result<Self> {
        if !(radius > 0.0 && half_time > 0.0) || !radius.is_finite() || !half_time.is_finite() {
            return Err(invalid(format!("cylinder extents r = {radius}, b = {half_time}")));
        }
        Ok(Self { center, radius, half_time, backward })
    }

    /// Intrinsic cylinder `B_{rho/lambda} x (t0 - lambda^{-p} rho^2, t0 + lambda^{-p} rho^2)`.
    pub fn intrinsic(center: Point, rho: f64, lambda: f64, p: f64, backward: bool) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(invalid(format!("intrinsic scale {lambda} must be positive")));
        }
        Self::standard(center, rho / lambda, lambda.powf(-p) * rho * rho, backward)
    }

    pub fn t_lo(&self) -> f64 {
        self.center.t - self.half_time
    }

    pub fn t_hi(&self) -> f64 {
        if self.backward {
            self.center.t
        } else {
            self.center.t + self.half_time
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_hi() - self.t_lo()
    }

    /// Continuum measure `|B_r| |I|`.
    pub fn volume(&self, dim: usize) -> f64 {
        ball_volume(dim, self.radius) * self.duration()
    }

    pub fn with_center(&self, center: Point) -> Self {
        Self { center, ..*self }
    }

    pub fn in_space(&self, x: &[f64; 2], grid: &SpatialGrid) -> bool {
        let d = ((x[0] - self.center.x[0]).powi(2) + (x[1] - self.center.x[1]).powi(2)).sqrt();
        d < self.radius - 1e-9 * grid.h()
    }

    pub fn in_time(&self, t: f64, dt: f64) -> bool {
        let tol = 1e-9 * dt;
        if t <= self.t_lo() + tol {
            return false;
        }
        if self.backward {
            t <= self.t_hi() + tol
        } else {
            t < self.t_hi() - tol
        }
    }

    pub fn contains(&self, z: &Point, grid: &SpaceTimeGrid) -> bool {
        self.in_space(&z.x, grid.space()) && self.in_time(z.t, grid.dt())
    }

    /// True when the closed cylinder lies inside the grid box.
    pub fn fits(&self, grid: &SpaceTimeGrid) -> bool {
        let sp = grid.space();
        let tol_x = 1e-9 * sp.h();
        let tol_t = 1e-9 * grid.dt();
        let space_ok = (0..sp.dim()).all(|a| {
            self.center.x[a] - self.radius >= sp.lo()[a] - tol_x
                && self.center.x[a] + self.radius <= sp.hi(a) + tol_x
        });
        space_ok && self.t_lo() >= grid.t_lo() - tol_t && self.t_hi() <= grid.t_hi() + tol_t
    }

    /// Nodes inside the cylinder, ordered by time level then spatial index.
    pub fn nodes(&self, grid: &SpaceTimeGrid) -> Result<CylinderNodes> {
        if !grid.contains(&self.center) {
            return Err(Error::OffGrid);
        }
        let sp = grid.space();
        let levels = (0..grid.levels()).filter(|&k| self.in_time(grid.time(k), grid.dt())).collect();
        let space = (0..sp.len()).filter(|&s| self.in_space(&sp.coord(s), sp)).collect();
        Ok(CylinderNodes { levels, space, level_len: sp.len() })
    }
}

pub fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        _ => f64::NAN,
    }
}

/// Tensor-product node set of a cylinder: admitted time levels times admitted spatial nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderNodes {
    pub levels: Vec<usize>,
    pub space: Vec<usize>,
    level_len: usize,
}

impl CylinderNodes {
    pub fn len(&self) -> usize {
        self.levels.len() * self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat node indices in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.levels
            .iter()
            .flat_map(move |&k| self.space.iter().map(move |&s| k * self.level_len + s))
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// `sum f(node)` over the set, in node order.
    pub fn sum(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for node in self.iter() {
            acc += f(node);
        }
        acc
    }

    /// Number of nodes where `pred` holds.
    pub fn count(&self, mut pred: impl FnMut(usize) -> bool) -> usize {
        self.iter().filter(|&n| pred(n)).count()
    }
}

/// Cell-counting measure: admitted nodes times `h^dim dt`.
pub fn measure(grid: &SpaceTimeGrid, cyl: &Cylinder) -> Result<f64> {
    Ok(cyl.nodes(grid)?.len() as f64 * grid.node_volume())
}

/// `sum f h^dim dt` over the cylinder's nodes.
pub fn integrate(f: &GridFunction, cyl: &Cylinder) -> Result<f64> {
    let nodes = cyl.nodes(f.grid())?;
    let v = f.values();
    Ok(nodes.sum(|n| v[n]) * f.grid().node_volume())
}

/// Average of `f` over the cylinder's nodes.
pub fn mean(f: &GridFunction, cyl: &Cylinder) -> Result<f64> {
    let nodes = cyl.nodes(f.grid())?;
    if nodes.is_empty() {
        return Err(invalid("mean over an empty cylinder"));
    }
    let v = f.values();
    Ok(nodes.sum(|n| v[n]) / nodes.len() as f64)
}
