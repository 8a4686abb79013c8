use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{discrete_gradient, GridFunction, SpaceTimeGrid};

use super::cutoff::Cutoff;
use super::smallest_constant;

/// `Psi(z) = log+( nu / (nu - (z - (1 - nu))_+ + eta0) )`.
pub fn log_weight(z: f64, nu: f64, eta0: f64) -> Result<f64> {
    if !(0.0 < eta0 && eta0 < nu) {
        return Err(invalid(format!("need 0 < eta0 < nu, got eta0 = {eta0}, nu = {nu}")));
    }
    let denom = nu - (z - (1.0 - nu)).max(0.0) + eta0;
    if !(denom > 0.0) {
        return Err(invalid(format!("log argument undefined at z = {z}")));
    }
    Ok((nu / denom).ln().max(0.0))
}

fn nearest_level(grid: &SpaceTimeGrid, t: f64) -> Result<usize> {
    let k = ((t - grid.t_lo()) / grid.dt()).round();
    if k < 0.0 || k as usize >= grid.levels() {
        return Err(Error::OffGrid);
    }
    Ok(k as usize)
}

fn in_ball(grid: &SpaceTimeGrid, s: usize, r: f64) -> bool {
    let x = grid.space().coord(s);
    (x[0] * x[0] + x[1] * x[1]).sqrt() < r - 1e-9 * grid.h()
}

/// Both sides of the logarithmic estimate between slices `t1 < t2` with inner radius `s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogEstimate {
    /// `int_{B_s x {t2}} Psi^2`.
    pub lhs: f64,
    /// `int_{B_1 x {t1}} Psi^2`.
    pub initial: f64,
    /// `(1 - s)^{-2} iint_{B_1 x (t1, t2)} Psi`.
    pub bulk: f64,
    /// Smallest `C` with `lhs <= initial + C bulk`.
    pub smallest_c: f64,
}

impl LogEstimate {
    pub fn holds_with(&self, c: f64) -> bool {
        self.lhs <= self.initial + c * self.bulk
    }
}

/// Evaluates the logarithmic estimate for `Psi((w - k)_+)` on `B_1`, balls centered at the
/// spatial origin. The level `k` is used as given.
pub fn log_estimate_check(w: &GridFunction, k: f64, nu: f64, eta0: f64, t1: f64, t2: f64, s: f64) -> Result<LogEstimate> {
    if !(t1 < t2) || !(0.0 < s && s < 1.0) {
        return Err(invalid(format!("need t1 < t2 and 0 < s < 1 (t1 = {t1}, t2 = {t2}, s = {s})")));
    }
    let grid = w.grid();
    let (k1, k2) = (nearest_level(grid, t1)?, nearest_level(grid, t2)?);
    let sp_len = grid.space().len();
    let psi = |node: usize| log_weight((w.at(node) - k).max(0.0), nu, eta0);
    let dx = grid.space().cell_volume();

    let mut lhs = 0.0;
    let mut initial = 0.0;
    let mut bulk = 0.0;
    for sidx in 0..sp_len {
        if !in_ball(grid, sidx, 1.0) {
            continue;
        }
        let a = psi(grid.flat(k1, sidx))?;
        initial += a * a;
        if in_ball(grid, sidx, s) {
            let b = psi(grid.flat(k2, sidx))?;
            lhs += b * b;
        }
        for kk in k1..k2 {
            bulk += psi(grid.flat(kk, sidx))?;
        }
    }
    let (lhs, initial) = (lhs * dx, initial * dx);
    let bulk = bulk * grid.node_volume() / (1.0 - s).powi(2);
    Ok(LogEstimate { lhs, initial, bulk, smallest_c: smallest_constant(lhs - initial, bulk) })
}

/// Terms of the energy estimate for `(w - k)_+` on `B_1 x (t0, t1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivativeEnergy {
    /// `sup_t int (w - k)_+^2 zeta^2`.
    pub sup_term: f64,
    /// `iint |D (w - k)_+|^2 zeta^2`.
    pub grad_term: f64,
    /// `int_{t = t0} (w - k)_+^2 zeta^2`.
    pub initial: f64,
    /// `iint (w - k)_+^2 |D zeta|^2`.
    pub cutoff_grad: f64,
    /// `iint (w - k)_+^2 zeta |zeta_t|`.
    pub cutoff_time: f64,
    /// Smallest `C` with `sup + grad <= initial + C (cutoff_grad + cutoff_time)`.
    pub empirical_c: f64,
}

pub fn derivative_energy_check(w: &GridFunction, k: f64, cutoff: &Cutoff, t0: f64, t1: f64) -> Result<DerivativeEnergy> {
    if !(t0 < t1) {
        return Err(invalid(format!("need t0 < t1, got {t0} and {t1}")));
    }
    let grid = w.grid();
    let (k0, k1) = (nearest_level(grid, t0)?, nearest_level(grid, t1)?);
    let trunc = w.map(|x| (x - k).max(0.0));
    let grad = discrete_gradient(&trunc);
    let sp = grid.space();
    let dx = sp.cell_volume();

    let mut sup = 0.0f64;
    let (mut gterm, mut initial, mut cg, mut ct) = (0.0, 0.0, 0.0, 0.0);
    for kk in k0..=k1 {
        let t = grid.time(kk);
        let mut slice = 0.0;
        for s in 0..sp.len() {
            if !in_ball(grid, s, 1.0) {
                continue;
            }
            let node = grid.flat(kk, s);
            let x = sp.coord(s);
            let z = cutoff.value(&x, t);
            let tr2 = trunc.at(node).powi(2);
            let e = tr2 * z * z;
            if kk == k0 {
                initial += e;
                continue;
            }
            slice += e;
            let g = grad.at(node);
            gterm += (g[0] * g[0] + g[1] * g[1]) * z * z;
            let dz = cutoff.gradient(&x, t);
            cg += tr2 * (dz[0] * dz[0] + dz[1] * dz[1]);
            ct += tr2 * z * cutoff.time_derivative(&x, t).abs();
        }
        sup = sup.max(slice * dx);
    }
    let dz = grid.node_volume();
    let (initial, gterm, cg, ct) = (initial * dx, gterm * dz, cg * dz, ct * dz);
    Ok(DerivativeEnergy {
        sup_term: sup,
        grad_term: gterm,
        initial,
        cutoff_grad: cg,
        cutoff_time: ct,
        empirical_c: smallest_constant(sup + gterm - initial, cg + ct),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Cylinder, Point, SpatialGrid};

    fn unit_grid(h: f64, dt: f64) -> SpaceTimeGrid {
        let s = SpatialGrid::new(h, &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        SpaceTimeGrid::covering(s, dt, -1.0, 1.0).unwrap()
    }

    #[test]
    fn weight_values() {
        let (nu, eta) = (0.4, 0.05);
        assert_eq!(log_weight(0.0, nu, eta).unwrap(), 0.0);
        assert!((log_weight(1.0, nu, eta).unwrap() - (nu / eta).ln()).abs() < 1e-12);
        assert!((log_weight(1.0 - eta, nu, eta).unwrap() - (nu / (2.0 * eta)).ln()).abs() < 1e-12);
        assert!(log_weight(0.2, 0.1, 0.2).is_err());
    }

    #[test]
    fn below_level_everything_vanishes() {
        let g = unit_grid(0.1, 0.1);
        let w = GridFunction::from_fn(&g, |x, _| 0.3 * x[0].abs());
        let r = log_estimate_check(&w, 0.5, 0.3, 0.1, -0.8, 0.5, 0.5).unwrap();
        assert_eq!((r.lhs, r.initial, r.bulk, r.smallest_c), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn stationary_field_needs_no_constant() {
        let g = unit_grid(0.05, 0.1);
        let w = GridFunction::from_fn(&g, |x, _| 0.9 - 0.2 * (x[0] * x[0] + x[1] * x[1]));
        let r = log_estimate_check(&w, 0.0, 0.5, 0.1, -0.5, 0.5, 0.5).unwrap();
        assert!(r.lhs > 0.0 && r.lhs <= r.initial);
        assert_eq!(r.smallest_c, 0.0);
        assert!(r.holds_with(0.0));
    }

    #[test]
    fn derivative_energy_trivial_and_constant() {
        let g = unit_grid(0.05, 0.05);
        let z = Point::new(&[0.0, 0.0], 0.0);
        let outer = Cylinder::standard(z, 1.0, 1.0, false).unwrap();
        let inner = Cylinder::standard(z, 0.5, 0.5, false).unwrap();
        let cut = Cutoff::between(&inner, &outer).unwrap();
        let low = GridFunction::from_fn(&g, |_, _| 0.2);
        let r = derivative_energy_check(&low, 0.25, &cut, -0.9, 0.9).unwrap();
        assert_eq!((r.sup_term, r.grad_term, r.empirical_c), (0.0, 0.0, 0.0));

        let c = 0.8;
        let high = GridFunction::from_fn(&g, |_, _| c);
        let r = derivative_energy_check(&high, 0.25, &cut, -0.9, 0.9).unwrap();
        assert_eq!(r.grad_term, 0.0);
        // (c - k)^2 times the cutoff sums, evaluated directly.
        let (k0, k1) = (2, 38);
        let mut cg = 0.0;
        for kk in (k0 + 1)..=k1 {
            for s in 0..g.space().len() {
                if in_ball(&g, s, 1.0) {
                    let d = cut.gradient(&g.space().coord(s), g.time(kk));
                    cg += d[0] * d[0] + d[1] * d[1];
                }
            }
        }
        let expect = (c - 0.25f64).powi(2) * cg * g.node_volume();
        assert!((r.cutoff_grad - expect).abs() < 1e-10 * expect);
    }
}
