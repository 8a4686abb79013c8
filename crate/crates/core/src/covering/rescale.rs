use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::{GridFunction, Point, SpaceTimeGrid};

/// Divisor applied after the change of variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Normalization {
    /// `w = u / (mu^{-1} r)`: gradients are preserved.
    Intrinsic,
    /// `w = u / (r A)`: gradients are divided by `mu A`, so `s / (mu A) + sup |Dw| <= 1`
    /// whenever `s + sup |Du| <= A mu`.
    Bounded { big_a: f64 },
}

/// Pulls `u` back from `Q_r^mu(center)` to the unit cylinder:
/// `w(x, t) = u(x0 + mu^{-1} r x, t0 + mu^{-p} r^2 t) / scale`, sampled on `unit_grid` by
/// multilinear interpolation.
pub fn rescale_to_unit(
    u: &GridFunction,
    center: Point,
    r: f64,
    mu: f64,
    p: f64,
    normalization: Normalization,
    unit_grid: &SpaceTimeGrid,
) -> Result<GridFunction> {
    if !(r > 0.0 && mu > 0.0 && p > 1.0) {
        return Err(invalid(format!("need r, mu > 0 and p > 1 (r = {r}, mu = {mu}, p = {p})")));
    }
    if unit_grid.dim() != u.grid().dim() {
        return Err(invalid("unit grid and source grid differ in dimension"));
    }
    let space_scale = r / mu;
    let time_scale = mu.powf(-p) * r * r;
    let divisor = match normalization {
        Normalization::Intrinsic => space_scale,
        Normalization::Bounded { big_a } => {
            if !(big_a >= 1.0) {
                return Err(invalid(format!("A = {big_a} must be at least 1")));
            }
            r * big_a
        }
    };
    let sp = unit_grid.space();
    let mut values = Vec::with_capacity(unit_grid.len());
    for k in 0..unit_grid.levels() {
        let t = center.t + time_scale * unit_grid.time(k);
        for s in 0..sp.len() {
            let x = sp.coord(s);
            let z = Point { x: [center.x[0] + space_scale * x[0], center.x[1] + space_scale * x[1]], t };
            values.push(u.interpolate(&z)? / divisor);
        }
    }
    GridFunction::new(unit_grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{discrete_gradient, SpatialGrid};
    use crate::solver::Exact;

    fn source_grid() -> SpaceTimeGrid {
        let s = SpatialGrid::new(0.05, &[(-2.0, 2.0), (-2.0, 2.0)]).unwrap();
        SpaceTimeGrid::covering(s, 0.05, 0.25, 3.25).unwrap()
    }

    fn unit(h: f64) -> SpaceTimeGrid {
        let s = SpatialGrid::new(h, &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        SpaceTimeGrid::covering(s, 0.125, -1.0, 1.0).unwrap()
    }

    #[test]
    fn unit_scales_resample_identically() {
        let src = unit(0.25);
        let u = GridFunction::from_fn(&src, |x, t| x[0] * x[1] + t * x[0]);
        let w = rescale_to_unit(&u, Point::origin(), 1.0, 1.0, 2.0, Normalization::Intrinsic, &src).unwrap();
        for (a, b) in w.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_slope_survives() {
        let g = [0.7, -0.3];
        let u = GridFunction::from_fn(&source_grid(), |x, t| g[0] * x[0] + g[1] * x[1] + 0.2 * t);
        let w = rescale_to_unit(&u, Point::new(&[0.1, 0.2], 1.0), 0.6, 1.5, 3.0, Normalization::Intrinsic, &unit(0.125)).unwrap();
        let grad = discrete_gradient(&w);
        for node in 0..w.grid().len() {
            let d = grad.at(node);
            assert!((d[0] - g[0]).abs() < 1e-10 && (d[1] - g[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn bounded_normalization_caps_gradient() {
        let exact = Exact::heat(2, 1.0).unwrap();
        let src = source_grid();
        let u = exact.sample(&src).unwrap();
        let (center, r, mu, big_a, s) = (Point::new(&[0.3, 0.0], 1.5), 0.04, 0.05, 2.0, 0.02);
        // The hypothesis s + sup |Du| <= A mu on the source cylinder, checked on the unit image.
        let w = rescale_to_unit(&u, center, r, mu, 2.0, Normalization::Bounded { big_a }, &unit(0.05)).unwrap();
        let sup = discrete_gradient(&w).magnitude().max();
        assert!(s / (mu * big_a) + sup <= 1.0, "sup = {sup}");
        assert!(rescale_to_unit(&u, center, 0.5, mu, 2.0, Normalization::Intrinsic, &unit(0.5)).is_err());
    }
}
