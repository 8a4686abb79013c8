//! Closed-form solutions used as references and as Dirichlet data.

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{invalid, Result};
use crate::mesh::{GridFunction, SpaceTimeGrid};

/// Exact solution of `u_t = div(|Du|^(p-2) Du)` with `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exact {
    /// `(4 pi t)^(-N/2) exp(-|x|^2 / 4t)` scaled by `mass`.
    Heat { dim: usize, mass: f64 },
    /// Compactly supported self-similar solution for `p > 2`.
    Barenblatt { dim: usize, p: f64, c: f64 },
    /// Positive self-similar solution for `2N/(N+1) < p < 2`.
    FastBarenblatt { dim: usize, p: f64, c: f64 },
}

fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI,
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=2).contains(&dim) {
        Ok(())
    } else {
        Err(invalid(format!("dimension {dim} not supported")))
    }
}

/// Time exponent `beta = 1/(N(p-2)+p)`; space scales like `t^beta`.
fn beta(dim: usize, p: f64) -> f64 {
    1.0 / (dim as f64 * (p - 2.0) + p)
}

fn shape_k(dim: usize, p: f64) -> f64 {
    (p - 2.0).abs() / p * beta(dim, p).powf(1.0 / (p - 1.0))
}

impl Exact {
    pub fn heat(dim: usize, mass: f64) -> Result<Self> {
        check_dim(dim)?;
        Ok(Exact::Heat { dim, mass })
    }

    /// Barenblatt profile with total mass `mass`; requires `p > 2`.
    pub fn barenblatt(dim: usize, p: f64, mass: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(p > 2.0) {
            return Err(invalid(format!("Barenblatt profile needs p > 2, got {p}")));
        }
        if !(mass > 0.0) {
            return Err(invalid("mass must be positive"));
        }
        let n = dim as f64;
        let q = p / (p - 1.0);
        let m = (p - 1.0) / (p - 2.0);
        let k = shape_k(dim, p);
        // mass(C) = |S| (1/q) B(N/q, m+1) k^(-N/q) C^(m + N/q)
        let ln_unit = sphere_area(dim).ln() - q.ln() + ln_beta(n / q, m + 1.0) - n / q * k.ln();
        let c = ((mass.ln() - ln_unit) / (m + n / q)).exp();
        Ok(Exact::Barenblatt { dim, p, c })
    }

    /// Fast-diffusion analogue with total mass `mass`; requires `2N/(N+1) < p < 2`.
    pub fn fast_barenblatt(dim: usize, p: f64, mass: f64) -> Result<Self> {
        check_dim(dim)?;
        let n = dim as f64;
        if !(p < 2.0 && p > 2.0 * n / (n + 1.0)) {
            return Err(invalid(format!("fast profile needs 2N/(N+1) < p < 2, got {p}")));
        }
        if !(mass > 0.0) {
            return Err(invalid("mass must be positive"));
        }
        let q = p / (p - 1.0);
        let m = (p - 1.0) / (2.0 - p);
        let k = shape_k(dim, p);
        // mass(C) = |S| (1/q) B(N/q, m - N/q) k^(-N/q) C^(N/q - m)
        let ln_unit = sphere_area(dim).ln() - q.ln() + ln_beta(n / q, m - n / q) - n / q * k.ln();
        let c = ((mass.ln() - ln_unit) / (n / q - m)).exp();
        Ok(Exact::FastBarenblatt { dim, p, c })
    }

    pub fn dim(&self) -> usize {
        match *self {
            Exact::Heat { dim, .. } | Exact::Barenblatt { dim, .. } | Exact::FastBarenblatt { dim, .. } => dim,
        }
    }

    pub fn p(&self) -> f64 {
        match *self {
            Exact::Heat { .. } => 2.0,
            Exact::Barenblatt { p, .. } | Exact::FastBarenblatt { p, .. } => p,
        }
    }

    /// Radius of the support at time `t` (infinite unless compactly supported).
    pub fn support_radius(&self, t: f64) -> f64 {
        match *self {
            Exact::Barenblatt { dim, p, c } => {
                let q = p / (p - 1.0);
                (c / shape_k(dim, p)).powf(1.0 / q) * t.powf(beta(dim, p))
            }
            _ => f64::INFINITY,
        }
    }

    pub fn value(&self, x: &[f64; 2], t: f64) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        match *self {
            Exact::Heat { dim, mass } => {
                mass * (4.0 * std::f64::consts::PI * t).powf(-0.5 * dim as f64) * (-r2 / (4.0 * t)).exp()
            }
            Exact::Barenblatt { dim, p, c } => {
                let b = beta(dim, p);
                let xi = r2.sqrt() * t.powf(-b);
                let base = c - shape_k(dim, p) * xi.powf(p / (p - 1.0));
                if base <= 0.0 {
                    0.0
                } else {
                    t.powf(-(dim as f64) * b) * base.powf((p - 1.0) / (p - 2.0))
                }
            }
            Exact::FastBarenblatt { dim, p, c } => {
                let b = beta(dim, p);
                let xi = r2.sqrt() * t.powf(-b);
                let base = c + shape_k(dim, p) * xi.powf(p / (p - 1.0));
                t.powf(-(dim as f64) * b) * base.powf(-(p - 1.0) / (2.0 - p))
            }
        }
    }

    /// Spatial gradient.
    pub fn gradient(&self, x: &[f64; 2], t: f64) -> [f64; 2] {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let radial = match *self {
            Exact::Heat { .. } => -r / (2.0 * t) * self.value(x, t),
            Exact::Barenblatt { dim, p, c } => {
                let b = beta(dim, p);
                let q = p / (p - 1.0);
                let k = shape_k(dim, p);
                let xi = r * t.powf(-b);
                let base = c - k * xi.powf(q);
                if base <= 0.0 || r == 0.0 {
                    0.0
                } else {
                    let m = (p - 1.0) / (p - 2.0);
                    t.powf(-(dim as f64) * b - b) * m * base.powf(m - 1.0) * (-k * q * xi.powf(q - 1.0))
                }
            }
            Exact::FastBarenblatt { dim, p, c } => {
                let b = beta(dim, p);
                let q = p / (p - 1.0);
                let k = shape_k(dim, p);
                let xi = r * t.powf(-b);
                if r == 0.0 {
                    0.0
                } else {
                    let m = (p - 1.0) / (2.0 - p);
                    let base = c + k * xi.powf(q);
                    t.powf(-(dim as f64) * b - b) * (-m) * base.powf(-m - 1.0) * k * q * xi.powf(q - 1.0)
                }
            }
        };
        if r == 0.0 {
            [0.0, 0.0]
        } else {
            [radial * x[0] / r, radial * x[1] / r]
        }
    }

    /// Samples on every grid node; times must be positive.
    pub fn sample(&self, grid: &SpaceTimeGrid) -> Result<GridFunction> {
        if grid.t_lo() <= 0.0 {
            return Err(invalid("exact solutions are sampled at positive times only"));
        }
        if grid.dim() != self.dim() {
            return Err(crate::Error::DimensionMismatch { expected: self.dim(), got: grid.dim() });
        }
        Ok(GridFunction::from_fn(grid, |x, t| self.value(x, t)))
    }
}

/// `(4 pi t)^(-N/2) exp(-|x|^2 / 4t)` on the grid.
pub fn heat_kernel(grid: &SpaceTimeGrid) -> Result<GridFunction> {
    Exact::heat(grid.dim(), 1.0)?.sample(grid)
}

/// Unit-mass Barenblatt profile on the grid; fails for `p <= 2` or when the support
/// reaches the grid boundary during the sampled window.
pub fn barenblatt(grid: &SpaceTimeGrid, p: f64) -> Result<GridFunction> {
    let e = Exact::barenblatt(grid.dim(), p, 1.0)?;
    let r = e.support_radius(grid.t_hi());
    let sp = grid.space();
    let fits = (0..sp.dim()).all(|a| sp.lo()[a] < -r && sp.hi(a) > r);
    if !fits {
        return Err(crate::Error::SupportTouchesBoundary);
    }
    e.sample(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpatialGrid;

    fn total_mass(e: &Exact, t: f64, half: f64, h: f64) -> f64 {
        let extents = vec![(-half, half); e.dim()];
        let g = SpatialGrid::new(h, &extents).unwrap();
        (0..g.len()).map(|s| e.value(&g.coord(s), t)).sum::<f64>() * g.cell_volume()
    }

    #[test]
    fn heat_kernel_value_at_origin() {
        let e = Exact::heat(1, 1.0).unwrap();
        assert!((e.value(&[0.0, 0.0], 1.0) - (4.0 * std::f64::consts::PI).powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn barenblatt_rejects_p_at_most_two() {
        assert!(Exact::barenblatt(1, 2.0, 1.0).is_err());
        assert!(Exact::fast_barenblatt(1, 2.0, 1.0).is_err());
        assert!(Exact::fast_barenblatt(2, 1.3, 1.0).is_err());
    }

    #[test]
    fn profiles_carry_requested_mass() {
        let cases = [
            Exact::barenblatt(1, 3.0, 1.0).unwrap(),
            Exact::barenblatt(2, 3.0, 2.0).unwrap(),
            Exact::fast_barenblatt(1, 1.6, 1.0).unwrap(),
            Exact::heat(2, 1.0).unwrap(),
        ];
        let expected = [1.0, 2.0, 1.0, 1.0];
        for (e, m) in cases.iter().zip(expected) {
            // fast profile has algebraic tails, so integrate over a wide box
            let half = if matches!(e, Exact::FastBarenblatt { .. }) { 400.0 } else { 6.0 };
            let h = if e.dim() == 2 { 0.02 } else { 0.001 };
            let h = if half > 100.0 { 0.01 } else { h };
            let got = total_mass(e, 1.0, half, h);
            assert!((got - m).abs() < 2e-3 * m, "{e:?}: {got}");
        }
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let cases = [
            Exact::barenblatt(2, 3.0, 1.0).unwrap(),
            Exact::fast_barenblatt(2, 1.6, 1.0).unwrap(),
            Exact::heat(2, 1.0).unwrap(),
        ];
        for e in cases {
            let x = [0.31, -0.17];
            let g = e.gradient(&x, 1.3);
            let eps = 1e-6;
            for a in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += eps;
                xm[a] -= eps;
                let fd = (e.value(&xp, 1.3) - e.value(&xm, 1.3)) / (2.0 * eps);
                assert!((fd - g[a]).abs() < 1e-7, "{e:?} axis {a}: {fd} vs {}", g[a]);
            }
        }
    }

    #[test]
    fn support_must_fit() {
        let s = SpatialGrid::new(0.05, &[(-0.5, 0.5)]).unwrap();
        let g = SpaceTimeGrid::covering(s, 0.1, 1.0, 2.0).unwrap();
        assert_eq!(barenblatt(&g, 3.0), Err(crate::Error::SupportTouchesBoundary));
    }
}
