use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::CounterRng;

/// Outcome of the extremal recursion `X_{n+1} = C b^n X_n^{1+alpha}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FastGeometric {
    /// `C^{-1/alpha} b^{-1/alpha^2}`.
    pub threshold: f64,
    pub sequence: Vec<f64>,
    pub converged: bool,
    /// Set when the sequence overflowed before `n_max`.
    pub diverged: bool,
}

/// Simulates the extremal sequence for `n_max` steps. Converged means `X_{n_max} < 1e-12`.
pub fn fast_geometric(c: f64, b: f64, alpha: f64, x0: f64, n_max: usize) -> Result<FastGeometric> {
    if !(c > 1.0 && b > 1.0 && alpha > 0.0 && x0 >= 0.0) {
        return Err(invalid(format!("need C, b > 1, alpha > 0, X0 >= 0 (C = {c}, b = {b}, alpha = {alpha}, X0 = {x0})")));
    }
    let threshold = c.powf(-1.0 / alpha) * b.powf(-1.0 / (alpha * alpha));
    let mut sequence = vec![x0];
    let mut x = x0;
    let mut diverged = false;
    for n in 0..n_max {
        let direct = c * b.powi(n as i32) * x.powf(1.0 + alpha);
        // Fall back to logs once b^n alone overflows.
        x = if x == 0.0 {
            0.0
        } else if direct.is_finite() {
            direct
        } else {
            (c.ln() + n as f64 * b.ln() + (1.0 + alpha) * x.ln()).exp()
        };
        sequence.push(x);
        if !x.is_finite() || x > 1e300 {
            diverged = true;
            break;
        }
    }
    let converged = !diverged && sequence.len() == n_max + 1 && x < 1e-12;
    Ok(FastGeometric { threshold, sequence, converged, diverged })
}

/// `(2C / b^{1 - 1/alpha})^{1/alpha}`, the bound on `Y_0` for equibounded sequences with
/// `Y_n <= C b^n Y_{n+1}^{1-alpha}`.
pub fn bounded_recursive(c: f64, b: f64, alpha: f64) -> Result<f64> {
    if !(c > 1.0 && b > 1.0 && alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("need C, b > 1 and 0 < alpha < 1 (C = {c}, b = {b}, alpha = {alpha})")));
    }
    Ok(ln_bounded_recursive(c, b, alpha).exp())
}

/// Natural log of [`bounded_recursive`], usable when the bound itself overflows.
pub fn ln_bounded_recursive(c: f64, b: f64, alpha: f64) -> f64 {
    ((2.0 * c).ln() - (1.0 - 1.0 / alpha) * b.ln()) / alpha
}

/// Draws an admissible sequence backwards from a bounded tail and returns `ln Y_0`.
///
/// `Y_L` is uniform in `(0, cap]` and each earlier term is a uniform fraction of the largest
/// value the recursion allows, `C b^n Y_{n+1}^{1-alpha}`. Everything is kept in logs.
pub fn sample_admissible_ln_y0(c: f64, b: f64, alpha: f64, len: usize, cap: f64, rng: &mut CounterRng) -> f64 {
    let mut ln_y = (cap * (1.0 - rng.uniform())).ln();
    for n in (0..len).rev() {
        let u = 1.0 - rng.uniform();
        ln_y = u.ln() + c.ln() + n as f64 * b.ln() + (1.0 - alpha) * ln_y;
    }
    ln_y
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_sequence_converges() {
        let r = fast_geometric(2.0, 4.0, 1.0, 0.125, 40).unwrap();
        assert_eq!(r.threshold, 0.125);
        assert!(r.converged);
        // Closed form at the threshold: X_n = 2^{-3-2n}.
        assert_eq!(r.sequence[40], 2f64.powi(-83));
    }

    #[test]
    fn ten_times_threshold_diverges() {
        let r = fast_geometric(2.0, 4.0, 1.0, 1.25, 40).unwrap();
        assert!(!r.converged);
        assert!(r.diverged || r.sequence.last().unwrap() > &1e6);
    }

    #[test]
    fn large_alpha_threshold_tends_to_one() {
        let r = fast_geometric(2.0, 4.0, 50.0, 0.9, 40).unwrap();
        assert!(r.threshold > 0.98 && r.threshold < 1.0);
        assert!(r.converged);
    }

    #[test]
    fn recursive_bound_value() {
        assert!((bounded_recursive(2.0, 4.0, 0.5).unwrap() - 256.0).abs() < 1e-10);
        // A constant sequence is limited by n = 0: Y <= C^{1/alpha} = 4 < 256.
        assert!(2f64.powf(2.0) < 256.0);
        assert!(bounded_recursive(2.0, 4.0, 1.0).is_err());
    }

    #[test]
    fn sampled_sequences_respect_the_bound() {
        let mut rng = CounterRng::new(7, 2);
        let bound = bounded_recursive(2.0, 4.0, 0.5).unwrap().ln();
        for _ in 0..2000 {
            assert!(sample_admissible_ln_y0(2.0, 4.0, 0.5, 200, 1e6, &mut rng) <= bound);
        }
    }

    proptest! {
        #[test]
        fn below_threshold_converges(c in 1.1f64..8.0, b in 1.1f64..8.0, alpha in 0.3f64..2.0, frac in 0.0f64..1.0) {
            let t = c.powf(-1.0 / alpha) * b.powf(-1.0 / (alpha * alpha));
            let r = fast_geometric(c, b, alpha, frac * t, 400).unwrap();
            prop_assert!(!r.diverged);
            prop_assert!(r.sequence.last().unwrap() < &1e-12);
        }
    }
}
