use crate::error::{invalid, Result};
use crate::mesh::{Cylinder, GridFunction, SpaceTimeGrid, VectorField};

/// Piecewise-linear cutoff equal to 1 on an inner cylinder and 0 on the lateral and bottom
/// boundary of an outer one, with `|D zeta| = 1/(r_out - r_in)` and
/// `|zeta_t| = 1/(bottom gap)` on the ramps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    center: [f64; 2],
    r_in: f64,
    r_out: f64,
    t_out: f64,
    t_in: f64,
}

impl Cutoff {
    /// Cutoff for concentric cylinders `inner` inside `outer`.
    pub fn between(inner: &Cylinder, outer: &Cylinder) -> Result<Self> {
        if inner.center != outer.center {
            return Err(invalid("cutoff cylinders must share a center"));
        }
        if !(inner.radius < outer.radius && inner.t_lo() > outer.t_lo()) {
            return Err(invalid("inner cylinder must sit strictly inside the outer one"));
        }
        Ok(Self {
            center: outer.center.x,
            r_in: inner.radius,
            r_out: outer.radius,
            t_out: outer.t_lo(),
            t_in: inner.t_lo(),
        })
    }

    pub fn gradient_bound(&self) -> f64 {
        1.0 / (self.r_out - self.r_in)
    }

    pub fn time_bound(&self) -> f64 {
        1.0 / (self.t_in - self.t_out)
    }

    fn radius(&self, x: &[f64; 2]) -> f64 {
        ((x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2)).sqrt()
    }

    fn space_part(&self, r: f64) -> f64 {
        ((self.r_out - r) / (self.r_out - self.r_in)).clamp(0.0, 1.0)
    }

    fn time_part(&self, t: f64) -> f64 {
        ((t - self.t_out) / (self.t_in - self.t_out)).clamp(0.0, 1.0)
    }

    pub fn value(&self, x: &[f64; 2], t: f64) -> f64 {
        self.space_part(self.radius(x)) * self.time_part(t)
    }

    pub fn gradient(&self, x: &[f64; 2], t: f64) -> [f64; 2] {
        let r = self.radius(x);
        if r <= self.r_in || r >= self.r_out || r == 0.0 {
            return [0.0; 2];
        }
        let scale = -self.time_part(t) / ((self.r_out - self.r_in) * r);
        [scale * (x[0] - self.center[0]), scale * (x[1] - self.center[1])]
    }

    pub fn time_derivative(&self, x: &[f64; 2], t: f64) -> f64 {
        if t <= self.t_out || t >= self.t_in {
            return 0.0;
        }
        self.space_part(self.radius(x)) / (self.t_in - self.t_out)
    }

    /// Nodal samples of `zeta`, `D zeta` and `zeta_t`.
    pub fn sample(&self, grid: &SpaceTimeGrid) -> CutoffSamples {
        let value = GridFunction::from_fn(grid, |x, t| self.value(x, t));
        let comps = (0..grid.dim())
            .map(|a| GridFunction::from_fn(grid, |x, t| self.gradient(x, t)[a]))
            .collect();
        let gradient = VectorField::new(comps).expect("components share the grid");
        let time = GridFunction::from_fn(grid, |x, t| self.time_derivative(x, t));
        CutoffSamples { value, gradient, time }
    }
}

pub struct CutoffSamples {
    pub value: GridFunction,
    pub gradient: VectorField,
    pub time: GridFunction,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Point;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bounds_hold_everywhere(x in -1.0f64..1.0, y in -1.0f64..1.0, t in -1.0f64..1.0) {
            let z = Point::new(&[0.0, 0.0], 0.0);
            let outer = Cylinder::standard(z, 0.8, 0.9, false).unwrap();
            let inner = Cylinder::standard(z, 0.5, 0.6, false).unwrap();
            let c = Cutoff::between(&inner, &outer).unwrap();
            let g = c.gradient(&[x, y], t);
            prop_assert!((g[0] * g[0] + g[1] * g[1]).sqrt() <= c.gradient_bound() * (1.0 + 1e-12));
            prop_assert!(c.time_derivative(&[x, y], t).abs() <= c.time_bound() * (1.0 + 1e-12));
            let v = c.value(&[x, y], t);
            prop_assert!((0.0..=1.0).contains(&v));
            if inner.in_time(t, 1.0) && (x * x + y * y).sqrt() < 0.5 {
                prop_assert_eq!(v, 1.0);
            }
            if (x * x + y * y).sqrt() >= 0.8 || t <= -0.9 {
                prop_assert_eq!(v, 0.0);
            }
        }
    }
}
