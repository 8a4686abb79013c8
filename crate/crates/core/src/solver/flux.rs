use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Parameters of the flux `A(z) = (|z|^2 + s^2)^((p-2)/2) z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxParams {
    pub p: f64,
    pub s: f64,
    pub dim: usize,
}

impl FluxParams {
    pub fn new(p: f64, s: f64, dim: usize) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid(format!("p = {p} must exceed 1")));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid(format!("s = {s} must lie in [0, 1]")));
        }
        if !(1..=2).contains(&dim) {
            return Err(invalid(format!("dimension {dim} not supported")));
        }
        Ok(Self { p, s, dim })
    }

    /// Scalar modulus `(|z|^2 + s^2)^((p-2)/2)`; zero at the degenerate point when p < 2.
    pub fn modulus(&self, z2: f64) -> f64 {
        let w = z2 + self.s * self.s;
        if w == 0.0 {
            return if self.p == 2.0 { 1.0 } else { 0.0 };
        }
        w.powf(0.5 * (self.p - 2.0))
    }

    /// Largest eigenvalue factor of the Jacobian relative to the modulus.
    pub fn stiffness(&self) -> f64 {
        (self.p - 1.0).max(1.0)
    }
}

fn norm2(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

/// `A(z)`; defined as 0 at `z = 0` when `s = 0`.
pub fn flux(z: &[f64], params: &FluxParams) -> Vec<f64> {
    let m = params.modulus(norm2(z));
    z.iter().map(|v| m * v).collect()
}

/// Symmetric Jacobian `m [I + (p-2) z z^T / (|z|^2 + s^2)]`, row-major `dim x dim`.
pub fn flux_jacobian(z: &[f64], params: &FluxParams) -> Result<Vec<f64>> {
    let n = z.len();
    let w = norm2(z) + params.s * params.s;
    if w == 0.0 {
        return Err(invalid("flux Jacobian is singular at z = 0 with s = 0"));
    }
    let m = w.powf(0.5 * (params.p - 2.0));
    let mut jac = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            jac[i * n + j] = m * (delta + (params.p - 2.0) * z[i] * z[j] / w);
        }
    }
    Ok(jac)
}

/// Outcome of sampling the structure inequalities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureCheck {
    pub pass: bool,
    /// Max over samples of `(|A| + |A'| (|z|^2+s^2)^(1/2)) / (C1 (|z|^2+s^2)^((p-1)/2))`.
    pub worst_upper_ratio: f64,
    /// Min over samples of `<A' e, e> / (C0 (|z|^2+s^2)^((p-2)/2) |e|^2)`.
    pub worst_lower_ratio: f64,
    pub samples: usize,
}

/// Checks the growth and ellipticity bounds on `samples` deterministic draws.
pub fn verify_structure(params: &FluxParams, c0: f64, c1: f64, samples: usize, seed: u64) -> Result<StructureCheck> {
    if !(c0 > 0.0 && c1 > 0.0) {
        return Err(invalid("structure constants must be positive"));
    }
    let mut rng = crate::rng::CounterRng::new(seed, 0x5eed);
    let n = params.dim;
    let mut worst_upper = 0.0f64;
    let mut worst_lower = f64::INFINITY;
    let mut done = 0;
    while done < samples {
        let scale = rng.log_range(1e-3, 1e3);
        let z: Vec<f64> = (0..n).map(|_| scale * rng.range(-1.0, 1.0)).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.range(-1.0, 1.0)).collect();
        let w = norm2(&z) + params.s * params.s;
        let e2 = norm2(&e);
        if w == 0.0 || e2 == 0.0 {
            continue;
        }
        let a = flux(&z, params);
        let jac = flux_jacobian(&z, params)?;
        let m = params.modulus(norm2(&z));
        // Eigenvalues of the Jacobian are m and (p-1) m, so its operator norm is m max(1, p-1).
        let op = m * params.stiffness();
        let upper = (norm2(&a).sqrt() + op * w.sqrt()) / (c1 * w.powf(0.5 * (params.p - 1.0)));
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += e[i] * jac[i * n + j] * e[j];
            }
        }
        let lower = quad / (c0 * m * e2);
        worst_upper = worst_upper.max(upper);
        worst_lower = worst_lower.min(lower);
        done += 1;
    }
    Ok(StructureCheck {
        pass: worst_upper <= 1.0 + 1e-12 && worst_lower >= 1.0 - 1e-12,
        worst_upper_ratio: worst_upper,
        worst_lower_ratio: worst_lower,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p2_is_identity() {
        let prm = FluxParams::new(2.0, 0.0, 2).unwrap();
        assert_eq!(flux(&[0.3, -2.0], &prm), vec![0.3, -2.0]);
    }

    #[test]
    fn degenerate_point_convention() {
        let prm = FluxParams::new(1.5, 0.0, 1).unwrap();
        assert_eq!(flux(&[0.0], &prm), vec![0.0]);
        assert!(flux_jacobian(&[0.0], &prm).is_err());
    }

    #[test]
    fn jacobian_example_p4() {
        let prm = FluxParams::new(4.0, 0.0, 2).unwrap();
        let j = flux_jacobian(&[1.0, 0.0], &prm).unwrap();
        assert_eq!(j, vec![3.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn structure_passes_with_natural_constants() {
        for p in [1.5, 2.0, 3.0, 4.0] {
            let prm = FluxParams::new(p, 0.0, 2).unwrap();
            let r = verify_structure(&prm, (p - 1.0f64).min(1.0), 2.0 * (p - 1.0f64).max(1.0), 2000, 1).unwrap();
            assert!(r.pass, "p = {p}: {r:?}");
        }
    }

    #[test]
    fn structure_fails_with_oversized_lower_constant() {
        let prm = FluxParams::new(1.5, 0.0, 2).unwrap();
        assert!(!verify_structure(&prm, 10.0, 2.0, 500, 1).unwrap().pass);
    }

    fn finite_difference_jacobian(z: &[f64], prm: &FluxParams) -> Vec<f64> {
        let n = z.len();
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            let eps = 1e-6 * z[j].abs().max(1e-3);
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[j] += eps;
            zm[j] -= eps;
            let (ap, am) = (flux(&zp, prm), flux(&zm, prm));
            for i in 0..n {
                out[i * n + j] = (ap[i] - am[i]) / (2.0 * eps);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn jacobian_matches_finite_differences(p in 1.2f64..4.0, s in 0.0f64..1.0,
                                               a in -3.0f64..3.0, b in -3.0f64..3.0) {
            prop_assume!(a * a + b * b > 1e-2);
            let prm = FluxParams::new(p, s, 2).unwrap();
            let z = [a, b];
            let exact = flux_jacobian(&z, &prm).unwrap();
            let fd = finite_difference_jacobian(&z, &prm);
            for (x, y) in exact.iter().zip(&fd) {
                prop_assert!((x - y).abs() <= 1e-5 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn jacobian_is_symmetric(p in 1.2f64..4.0, s in 0.0f64..1.0, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            prop_assume!(a != 0.0 || b != 0.0 || s > 0.0);
            let prm = FluxParams::new(p, s, 2).unwrap();
            let j = flux_jacobian(&[a, b], &prm).unwrap();
            prop_assert!((j[1] - j[2]).abs() <= 1e-14 * (1.0 + j[1].abs()));
        }
    }
}
