use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::{Cylinder, Point, SpaceTimeGrid};

/// How the oscillation exponent `alpha_2` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alpha2Reading {
    /// `log kappa / log delta`, the value the decay chain actually needs.
    #[default]
    ProofConsistent,
    /// `log delta / log eta`, as the statement is written.
    Literal,
}

/// Constants of the covering argument. The five free numbers are inputs; everything else
/// is derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringParams {
    /// Measure fraction separating the two alternatives.
    pub nu: f64,
    /// Oscillation contraction per radius step.
    pub kappa: f64,
    /// Radius step of the oscillation decay.
    pub delta: f64,
    pub sigma: f64,
    pub eta: f64,
    /// Gradient bound factor `s + sup |Du| <= A mu`.
    pub big_a: f64,
    pub s: f64,
    pub p: f64,
    pub dim: usize,
    #[serde(default)]
    pub alpha2_reading: Alpha2Reading,
}

impl CoveringParams {
    /// Calibrated defaults: `nu = 0.1`, `delta = kappa = sigma = 0.5`, `eta = 0.75`, `A = 2`.
    pub fn calibrated(p: f64, dim: usize) -> Result<Self> {
        let params = Self {
            nu: 0.1,
            kappa: 0.5,
            delta: 0.5,
            sigma: 0.5,
            eta: 0.75,
            big_a: 2.0,
            s: 0.0,
            p,
            dim,
            alpha2_reading: Alpha2Reading::ProofConsistent,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !(self.nu > 0.0 && self.nu < 0.5) {
            return Err(invalid(format!("nu = {} outside (0, 1/2)", self.nu)));
        }
        for (name, v) in [("kappa", self.kappa), ("delta", self.delta), ("sigma", self.sigma), ("eta", self.eta)] {
            if !open(v) {
                return Err(invalid(format!("{name} = {v} outside (0, 1)")));
            }
        }
        if !(self.big_a >= 1.0) || !(0.0..=1.0).contains(&self.s) {
            return Err(invalid(format!("need A >= 1 and s in [0, 1] (A = {}, s = {})", self.big_a, self.s)));
        }
        if !(self.p > 1.0) || !(1..=2).contains(&self.dim) {
            return Err(invalid(format!("need p > 1 and N in {{1, 2}} (p = {}, N = {})", self.p, self.dim)));
        }
        Ok(())
    }

    /// `c0 = sigma min{eta, eta^{p/2}} / 2`.
    pub fn c0(&self) -> f64 {
        0.5 * self.sigma * self.eta.min(self.eta.powf(self.p / 2.0))
    }

    /// `alpha_1 = log eta / log c0`, so that `eta^n = (c0^n)^{alpha_1}`.
    pub fn alpha1(&self) -> f64 {
        self.eta.ln() / self.c0().ln()
    }

    pub fn alpha2(&self) -> f64 {
        match self.alpha2_reading {
            Alpha2Reading::ProofConsistent => self.kappa.ln() / self.delta.ln(),
            Alpha2Reading::Literal => self.delta.ln() / self.eta.ln(),
        }
    }

    /// `min{alpha_1, alpha_2 / 2}`.
    pub fn alpha3(&self) -> f64 {
        self.alpha1().min(self.alpha2() / 2.0)
    }

    /// `|Q_{delta r}| / |Q_r| = delta^{N+2}`.
    pub fn volume_step(&self) -> f64 {
        self.delta.powi(self.dim as i32 + 2)
    }
}

/// `Q_{c0 R}^{eta mu} ⊆ Q_{sigma R}^{mu}`, decided by the two radius comparisons. Neither
/// `mu` nor `R` enters.
pub fn check_inclusion(c0: f64, eta: f64, sigma: f64, p: f64) -> bool {
    c0 <= eta * sigma && c0 * c0 <= eta.powf(p) * sigma * sigma
}

/// Node-set form of the inclusion on `grid`, both cylinders centered at `center`.
pub fn inclusion_on_grid(
    grid: &SpaceTimeGrid,
    center: Point,
    c0: f64,
    eta: f64,
    sigma: f64,
    p: f64,
    mu: f64,
    radius: f64,
) -> Result<bool> {
    let inner = Cylinder::intrinsic(center, c0 * radius, eta * mu, p, false)?.nodes(grid)?;
    let outer = Cylinder::intrinsic(center, sigma * radius, mu, p, false)?.nodes(grid)?;
    Ok(inner.levels.iter().all(|k| outer.levels.contains(k)) && inner.space.iter().all(|s| outer.space.contains(s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpatialGrid;

    #[test]
    fn derived_constants() {
        let c = CoveringParams::calibrated(2.0, 2).unwrap();
        assert!((c.c0() - 0.1875).abs() < 1e-15);
        assert!((c.eta.powi(3) - c.c0().powi(3).powf(c.alpha1())).abs() < 1e-14);
        assert_eq!(c.alpha2(), 1.0);
        assert_eq!(c.alpha3(), c.alpha1());
        let lit = CoveringParams { alpha2_reading: Alpha2Reading::Literal, ..c };
        assert!((lit.alpha2() - 0.5f64.ln() / 0.75f64.ln()).abs() < 1e-15);
        assert!(CoveringParams { nu: 0.5, ..c }.validate().is_err());
    }

    #[test]
    fn inclusion_with_stated_c0() {
        for e in 1..10 {
            for s in 1..10 {
                for p in [1.5, 2.0, 3.0] {
                    let (eta, sigma) = (e as f64 / 10.0, s as f64 / 10.0);
                    let c0 = 0.5 * sigma * eta.min(eta.powf(p / 2.0));
                    assert!(check_inclusion(c0, eta, sigma, p));
                }
            }
        }
    }

    #[test]
    fn inclusion_fails_past_eta_sigma() {
        let (eta, sigma, p) = (0.6, 0.4, 3.0);
        assert!(!check_inclusion(eta * sigma + 1e-6, eta, sigma, p));
        // eta = sigma keeps a factor of one half in both comparisons.
        let c0 = 0.5 * 0.5 * 0.5f64.min(0.5f64.powf(1.5));
        assert!(check_inclusion(2.0 * c0 - 1e-12, 0.5, 0.5, 3.0));
    }

    #[test]
    fn node_sets_agree_with_comparisons() {
        let sp = SpatialGrid::new(0.02, &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let g = SpaceTimeGrid::covering(sp, 0.01, -1.0, 1.0).unwrap();
        let z = Point::new(&[0.0, 0.0], 0.0);
        let c = CoveringParams::calibrated(3.0, 2).unwrap();
        assert!(inclusion_on_grid(&g, z, c.c0(), c.eta, c.sigma, 3.0, 1.0, 1.0).unwrap());
        assert!(!inclusion_on_grid(&g, z, 0.6, c.eta, c.sigma, 3.0, 1.0, 1.0).unwrap());
    }
}
