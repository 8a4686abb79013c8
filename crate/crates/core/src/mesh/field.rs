use crate::error::{Error, Result};

use super::grid::{Point, SpaceTimeGrid, SpatialGrid};

/// Values on one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    pub grid: SpatialGrid,
    pub values: Vec<f64>,
}

impl SpatialField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &SpatialGrid, f: impl Fn(&[f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|s| f(&grid.coord(s))).collect();
        Self { grid: grid.clone(), values }
    }

    /// `sum u h^dim` over all nodes.
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Derivative along `axis` at spatial node `s`: central inside, second-order one-sided at the faces.
pub fn axis_derivative(grid: &SpatialGrid, values: &[f64], axis: usize, s: usize) -> f64 {
    let n = grid.count(axis);
    let (i, j) = grid.split(s);
    let pos = if axis == 0 { i } else { j };
    let at = |q: usize| if axis == 0 { values[grid.index(q, j)] } else { values[grid.index(i, q)] };
    let h = grid.h();
    if n < 3 {
        return (at(n - 1) - at(0)) / h;
    }
    if pos == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else if pos + 1 == n {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
    } else {
        (at(pos + 1) - at(pos - 1)) / (2.0 * h)
    }
}

/// Scalar values on every node of a space-time grid, stored level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(&[f64; 2], f64) -> f64) -> Self {
        let sp = grid.space();
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.levels() {
            let t = grid.time(k);
            values.extend((0..sp.len()).map(|s| f(&sp.coord(s), t)));
        }
        Self { grid: grid.clone(), values }
    }

    /// Stack time levels; every slice must live on the grid's spatial grid.
    pub fn from_levels(grid: SpaceTimeGrid, levels: &[SpatialField]) -> Result<Self> {
        if levels.len() != grid.levels() {
            return Err(Error::DimensionMismatch { expected: grid.levels(), got: levels.len() });
        }
        let mut values = Vec::with_capacity(grid.len());
        for l in levels {
            if &l.grid != grid.space() {
                return Err(Error::InvalidGrid("level on a different spatial grid".into()));
            }
            values.extend_from_slice(&l.values);
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let n = self.grid.level_len();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.grid.level_len();
        &mut self.values[k * n..(k + 1) * n]
    }

    pub fn slice(&self, k: usize) -> SpatialField {
        SpatialField { grid: self.grid.space().clone(), values: self.level(k).to_vec() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination with another function on the same grid.
    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("grid functions live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn point(&self, node: usize) -> Point {
        self.grid.point(node)
    }

    /// Multilinear interpolation in space and time; `OffGrid` outside the grid box.
    pub fn interpolate(&self, z: &Point) -> Result<f64> {
        let g = &self.grid;
        if !g.contains(z) {
            return Err(Error::OffGrid);
        }
        let sp = g.space();
        // Cell index and fractional offset along one axis with `n` nodes.
        let locate = |v: f64, lo: f64, step: f64, n: usize| -> (usize, f64) {
            if n == 1 {
                return (0, 0.0);
            }
            let s = ((v - lo) / step).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            (i, s - i as f64)
        };
        let (i, fx) = locate(z.x[0], sp.lo()[0], sp.h(), sp.count(0));
        let (j, fy) = locate(z.x[1], sp.lo()[1], sp.h(), sp.count(1));
        let (k, ft) = locate(z.t, g.t_lo(), g.dt(), g.levels());
        let mut out = 0.0;
        for (dk, wt) in [(0, 1.0 - ft), (1, ft)] {
            if wt == 0.0 {
                continue;
            }
            for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
                if wy == 0.0 {
                    continue;
                }
                for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
                    if wx == 0.0 {
                        continue;
                    }
                    out += wt * wy * wx * self.values[g.flat(k + dk, sp.index(i + di, j + dj))];
                }
            }
        }
        Ok(out)
    }
}

/// One grid function per spatial component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<GridFunction>,
}

impl VectorField {
    pub fn new(components: Vec<GridFunction>) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::InvalidGrid("no components".into()))?;
        if components.len() != first.grid().dim() {
            return Err(Error::DimensionMismatch { expected: first.grid().dim(), got: components.len() });
        }
        if components.iter().any(|c| c.grid() != first.grid()) {
            return Err(Error::InvalidGrid("components on different grids".into()));
        }
        Ok(Self { components })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, axis: usize) -> &GridFunction {
        &self.components[axis]
    }

    pub fn components(&self) -> &[GridFunction] {
        &self.components
    }

    pub fn at(&self, node: usize) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (a, c) in self.components.iter().enumerate() {
            v[a] = c.at(node);
        }
        v
    }

    pub fn magnitude(&self) -> GridFunction {
        let n = self.grid().len();
        let values = (0..n)
            .map(|i| self.components.iter().map(|c| c.at(i).powi(2)).sum::<f64>().sqrt())
            .collect();
        GridFunction { grid: self.grid().clone(), values }
    }
}

/// Spatial gradient by central differences, one-sided at the faces.
pub fn discrete_gradient(u: &GridFunction) -> VectorField {
    let grid = u.grid();
    let sp = grid.space();
    let components = (0..grid.dim())
        .map(|axis| {
            let mut values = Vec::with_capacity(grid.len());
            for k in 0..grid.levels() {
                let lvl = u.level(k);
                values.extend((0..sp.len()).map(|s| axis_derivative(sp, lvl, axis, s)));
            }
            GridFunction { grid: grid.clone(), values }
        })
        .collect();
    VectorField { components }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> SpaceTimeGrid {
        let s = SpatialGrid::new(0.1, &[(-1.0, 1.0), (-0.5, 0.5)]).unwrap();
        SpaceTimeGrid::covering(s, 0.05, 0.0, 0.2).unwrap()
    }

    #[test]
    fn gradient_exact_on_quadratics() {
        let g = grid2();
        let u = GridFunction::from_fn(&g, |x, t| x[0] * x[0] + 3.0 * x[0] * x[1] - x[1] + t);
        let grad = discrete_gradient(&u);
        for node in 0..g.len() {
            let p = g.point(node);
            assert!((grad.component(0).at(node) - (2.0 * p.x[0] + 3.0 * p.x[1])).abs() < 1e-12);
            assert!((grad.component(1).at(node) - (3.0 * p.x[0] - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = grid2();
        let u = GridFunction::from_fn(&g, |_, _| 4.2);
        let m = discrete_gradient(&u).magnitude();
        assert!(m.max() < 1e-12);
    }

    #[test]
    fn interpolation_is_exact_on_multilinear_data() {
        let g = grid2();
        let f = |x: &[f64; 2], t: f64| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1] * t + 3.0 * t;
        let u = GridFunction::from_fn(&g, f);
        for z in [Point::new(&[0.13, -0.27], 0.07), Point::new(&[1.0, 0.5], 0.2), Point::new(&[-1.0, -0.5], 0.0)] {
            assert!((u.interpolate(&z).unwrap() - f(&z.x, z.t)).abs() < 1e-12);
        }
        assert_eq!(u.interpolate(&Point::new(&[0.0, 0.0], 0.3)), Err(Error::OffGrid));
    }

    #[test]
    fn rejects_non_finite() {
        let g = grid2();
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        assert_eq!(GridFunction::new(g, v), Err(Error::NonFinite(3)));
    }
}
