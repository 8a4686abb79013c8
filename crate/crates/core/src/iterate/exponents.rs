use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which exponent triple drives the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One triple for the whole range `p > 2N/(N+2)`.
    Unified,
    /// `p >= 2`.
    Degenerate,
    /// `2N/(N+2) < p <= 2`.
    Singular,
}

impl std::str::FromStr for Mode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unified" => Ok(Mode::Unified),
            "degenerate" => Ok(Mode::Degenerate),
            "singular" => Ok(Mode::Singular),
            other => Err(invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// Lower end of the admissible `p` range, `2N/(N+2)`.
pub fn critical_p(dim: usize) -> f64 {
    2.0 * dim as f64 / (dim as f64 + 2.0)
}

/// The weight exponents `(alpha, beta, gamma)` in `f(v) = v^alpha (v - k)_+^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub mode: Mode,
    pub p: f64,
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Exponents {
    pub fn choose(mode: Mode, p: f64, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid(format!("dimension {dim} unsupported")));
        }
        let pc = critical_p(dim);
        let n = dim as f64;
        let (alpha, beta, gamma) = match mode {
            Mode::Unified => {
                if !(p > pc) {
                    return Err(invalid(format!("unified mode needs p > {pc}, got {p}")));
                }
                let g = 4.0 / (n + 2.0);
                (g, p - 1.0 + g, g)
            }
            Mode::Degenerate => {
                if !(p >= 2.0) {
                    return Err(invalid(format!("degenerate mode needs p >= 2, got {p}")));
                }
                (0.0, p - 1.0, 0.0)
            }
            Mode::Singular => {
                if !(p > pc && p <= 2.0) {
                    return Err(invalid(format!("singular mode needs {pc} < p <= 2, got {p}")));
                }
                (2.0 - p, 1.0, 2.0 - p)
            }
        };
        Ok(Self { mode, p, dim, alpha, beta, gamma })
    }

    /// `alpha + beta + 2 - gamma`, the power in `Y_n`.
    pub fn level_power(&self) -> f64 {
        self.alpha + self.beta + 2.0 - self.gamma
    }

    /// Power of `sup v` in the first-iteration recursion.
    pub fn sup_power(&self) -> f64 {
        match self.mode {
            Mode::Unified => self.p + self.gamma,
            Mode::Degenerate => self.p - 2.0,
            Mode::Singular => 2.0 - self.p,
        }
    }

    /// `X`, the exponent with `k^{-X/(N+2)}` in the first iteration.
    pub fn big_x(&self) -> f64 {
        let n = self.dim as f64;
        let p = self.p;
        match self.mode {
            Mode::Unified => p * n + 4.0 + 2.0 * (p + 1.0 + self.gamma),
            Mode::Degenerate => n * (p - 2.0) + 2.0 * (p + 1.0),
            Mode::Singular => (2.0 - p) * n + 6.0,
        }
    }

    pub fn sigma_exp(&self) -> f64 {
        (self.dim as f64 + 2.0) / self.big_x()
    }

    /// `B = 2^{p + 2 + gamma - 2(alpha+beta+2-gamma)/(N+2)}`.
    pub fn big_b(&self) -> f64 {
        let n = self.dim as f64;
        2f64.powf(self.p + 2.0 + self.gamma - 2.0 * self.level_power() / (n + 2.0))
    }

    /// `A = 2^gamma / rho^2 + 2^{p+gamma-2} / theta`.
    pub fn big_a(&self, rho: f64, theta: f64) -> f64 {
        2f64.powf(self.gamma) / (rho * rho) + 2f64.powf(self.p + self.gamma - 2.0) / theta
    }

    /// Checks the admissible range of the integrability offset and returns the effective
    /// offset `e` entering `alpha = 2e/X` of the second iteration.
    pub fn effective_offset(&self, eps: f64) -> Result<f64> {
        match self.mode {
            Mode::Unified if eps > 0.0 && eps < 1.0 => Ok(eps),
            Mode::Degenerate if eps > 0.0 && eps <= 2.0 => Ok(eps),
            Mode::Singular if eps > 2.0 - self.p && eps <= 3.0 => Ok(eps + self.p - 2.0),
            _ => Err(invalid(format!("offset {eps} outside the {:?} range at p = {}", self.mode, self.p))),
        }
    }

    /// Power of `v` integrated on the right of the final bound.
    pub fn integrand_power(&self, eps: f64) -> f64 {
        match self.mode {
            Mode::Unified => self.p + eps,
            Mode::Degenerate => self.p - 2.0 + eps,
            Mode::Singular => eps,
        }
    }

    /// Default offset: 0.5, 1, and `3 - p` by mode.
    pub fn default_offset(&self) -> f64 {
        match self.mode {
            Mode::Unified => 0.5,
            Mode::Degenerate => 1.0,
            Mode::Singular => 3.0 - self.p,
        }
    }

    pub fn constants(&self, rho: f64, theta: f64) -> BoundConstants {
        BoundConstants {
            big_b: self.big_b(),
            sigma_exp: self.sigma_exp(),
            big_a: self.big_a(rho, theta),
            big_x: self.big_x(),
            rho,
            theta,
        }
    }
}

/// The closed-form constants of the first iteration on `Q_{rho,theta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub big_b: f64,
    pub sigma_exp: f64,
    pub big_a: f64,
    pub big_x: f64,
    pub rho: f64,
    pub theta: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn triples() {
        let u = Exponents::choose(Mode::Unified, 2.0, 2).unwrap();
        assert_eq!((u.alpha, u.beta, u.gamma), (1.0, 2.0, 1.0));
        let d = Exponents::choose(Mode::Degenerate, 3.0, 2).unwrap();
        assert_eq!((d.alpha, d.beta, d.gamma), (0.0, 2.0, 0.0));
        let s = Exponents::choose(Mode::Singular, 1.5, 2).unwrap();
        assert_eq!((s.alpha, s.beta, s.gamma), (0.5, 1.0, 0.5));
        assert!(Exponents::choose(Mode::Degenerate, 1.9, 2).is_err());
        assert!(Exponents::choose(Mode::Singular, 1.0, 2).is_err());
        assert!(Exponents::choose(Mode::Unified, 1.0, 2).is_err());
    }

    #[test]
    fn unified_values_in_the_plane() {
        let c = Exponents::choose(Mode::Unified, 2.0, 2).unwrap().constants(1.0, 1.0);
        assert_eq!(c.big_x, 16.0);
        assert_eq!(c.sigma_exp, 0.25);
        assert!((c.big_b - 8.0).abs() < 1e-12);
        assert_eq!(c.big_a, 4.0);
    }

    #[test]
    fn seam_at_two() {
        let d = Exponents::choose(Mode::Degenerate, 2.0, 2).unwrap();
        let s = Exponents::choose(Mode::Singular, 2.0, 2).unwrap();
        assert_eq!(d.big_x(), s.big_x());
        assert_eq!(d.big_b(), s.big_b());
        assert_eq!(d.big_a(0.7, 0.3), s.big_a(0.7, 0.3));
        assert_eq!(d.sup_power(), s.sup_power());
    }

    #[test]
    fn offsets() {
        let s = Exponents::choose(Mode::Singular, 1.5, 2).unwrap();
        assert!(s.effective_offset(0.5).is_err());
        assert_eq!(s.effective_offset(1.5).unwrap(), 1.0);
        let u = Exponents::choose(Mode::Unified, 3.0, 1).unwrap();
        assert!(u.effective_offset(1.0).is_err());
    }

    proptest! {
        #[test]
        fn sigma_times_x_is_n_plus_two(dim in 1usize..=3, t in 0.0f64..1.0, m in 0usize..3) {
            let mode = [Mode::Unified, Mode::Degenerate, Mode::Singular][m];
            let pc = critical_p(dim);
            let p = match mode {
                Mode::Unified => pc + 1e-3 + 4.0 * t,
                Mode::Degenerate => 2.0 + 4.0 * t,
                Mode::Singular => pc + 1e-3 + (2.0 - pc - 1e-3) * t,
            };
            let e = Exponents::choose(mode, p, dim).unwrap();
            prop_assert!((e.sigma_exp() * e.big_x() - (dim as f64 + 2.0)).abs() < 1e-12);
            prop_assert!(e.alpha >= e.gamma && e.beta >= 1.0 - 1e-15);
            if mode == Mode::Unified {
                prop_assert!(p - 2.0 + e.gamma > 0.0);
            }
        }
    }
}
