use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::iterate::fast_geometric;
use crate::mesh::{Cylinder, GridFunction, Point, VectorField};

/// Depth of the level iteration; the node sets of `Q_m` stop changing long before.
pub const DEGIORGI_STEPS: usize = 40;

/// `Q_rho = B_rho x (-rho^2, rho^2)` centered at the origin.
pub(crate) fn unit_cylinder(rho: f64) -> Result<Cylinder> {
    Cylinder::standard(Point::origin(), rho, rho * rho, false)
}

/// Which side of the alternative is being iterated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `w_xi >= mu/4` from `|{w_xi < mu/2}| <= nu |Q1|`.
    Lower,
    /// `w_xi <= -mu/4` from `|{w_xi > -mu/2}| <= nu |Q1|`.
    Upper,
}

/// Trace of the derivative-level De Giorgi iteration on the unit cylinder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeDeGiorgi {
    pub side: Side,
    /// `s + sup_{Q1} |Dw|`, compared against `A mu`.
    pub gradient_bound: f64,
    /// `|{Q1 : w_xi < mu/2}| / |Q1|`.
    pub measure_fraction: f64,
    pub measure_hypothesis: bool,
    /// `H = sup_{Q1} (w_xi - mu/2)_-`.
    pub h: f64,
    /// `4H < mu`: the conclusion holds without iterating.
    pub early_exit: bool,
    /// Levels `k_m`.
    pub levels: Vec<f64>,
    /// `Y_m = |A_m| / |Q1|`.
    pub trace: Vec<f64>,
    /// Smallest `C` with `Y_{m+1} <= C 16^m Y_m^{1 + 2/(N+2)}` along the trace.
    pub empirical_c: f64,
    /// Fast-geometric threshold for that `C`.
    pub threshold: f64,
    pub converged: bool,
    /// `min_{Q_{1/2}} w_xi >= mu/4`, checked node by node; `None` when no conclusion is
    /// claimed.
    pub conclusion: Option<bool>,
    pub min_on_half: f64,
}

/// Lemma-level iteration for `w_xi` on `Q1`. `grad_w` must live on a grid covering `Q1`.
pub fn derivative_degiorgi(grad_w: &VectorField, axis: usize, mu: f64, big_a: f64, nu: f64, s: f64) -> Result<DerivativeDeGiorgi> {
    run(grad_w, axis, mu, big_a, nu, s, Side::Lower)
}

/// Mirror image for `w_xi <= -mu/4`, obtained by running the lower iteration on `-w_xi`.
pub fn dual_derivative_degiorgi(grad_w: &VectorField, axis: usize, mu: f64, big_a: f64, nu: f64, s: f64) -> Result<DerivativeDeGiorgi> {
    run(grad_w, axis, mu, big_a, nu, s, Side::Upper)
}

fn run(grad_w: &VectorField, axis: usize, mu: f64, big_a: f64, nu: f64, s: f64, side: Side) -> Result<DerivativeDeGiorgi> {
    if axis >= grad_w.dim() {
        return Err(invalid(format!("axis {axis} out of range for N = {}", grad_w.dim())));
    }
    if !(mu > 0.0 && big_a >= 1.0 && nu > 0.0 && nu < 1.0 && s >= 0.0) {
        return Err(invalid(format!("need mu > 0, A >= 1, nu in (0, 1), s >= 0 (mu = {mu}, A = {big_a}, nu = {nu}, s = {s})")));
    }
    let grid = grad_w.grid();
    let q1 = unit_cylinder(1.0)?;
    if !q1.fits(grid) {
        return Err(Error::Precondition("grid does not cover Q1".into()));
    }
    let q1_nodes = q1.nodes(grid)?;
    if q1_nodes.is_empty() {
        return Err(Error::Precondition("Q1 holds no nodes".into()));
    }
    let sign = if side == Side::Lower { 1.0 } else { -1.0 };
    let comp = grad_w.component(axis);
    let w = |node: usize| sign * comp.at(node);

    let sup = q1_nodes.iter().map(|n| crate::covering::source::norm(&grad_w.at(n))).fold(0.0, f64::max);
    let gradient_bound = s + sup;
    if gradient_bound > big_a * mu * (1.0 + 1e-12) {
        return Err(Error::Hypothesis(format!("s + sup |Dw| = {gradient_bound} exceeds A mu = {}", big_a * mu)));
    }

    let total = q1_nodes.len() as f64;
    let k0 = mu / 2.0;
    let measure_fraction = q1_nodes.count(|n| w(n) < k0) as f64 / total;
    let measure_hypothesis = measure_fraction <= nu;
    let h = q1_nodes.iter().map(|n| (k0 - w(n)).max(0.0)).fold(0.0, f64::max);
    let early_exit = 4.0 * h < mu;

    let half = unit_cylinder(0.5)?.nodes(grid)?;
    let min_on_half = half.iter().map(w).fold(f64::INFINITY, f64::min);
    let verified = min_on_half >= mu / 4.0;

    let dim = grid.dim() as f64;
    let alpha = 2.0 / (dim + 2.0);
    let mut levels = Vec::new();
    let mut trace = Vec::new();
    if !early_exit && measure_hypothesis {
        for m in 0..=DEGIORGI_STEPS {
            let k = k0 - h / (8.0 * (1.0 + big_a)) * (1.0 - 0.5f64.powi(m as i32));
            let q = unit_cylinder(0.5 + 0.5f64.powi(m as i32 + 1))?.nodes(grid)?;
            levels.push(k);
            trace.push(q.count(|n| w(n) < k) as f64 / total);
        }
    }
    let mut empirical_c = 0.0f64;
    for m in 0..trace.len().saturating_sub(1) {
        if trace[m] > 0.0 {
            empirical_c = empirical_c.max(trace[m + 1] / (16f64.powi(m as i32) * trace[m].powf(1.0 + alpha)));
        }
    }
    let threshold = fast_geometric(empirical_c.max(1.0 + 1e-9), 16.0, alpha, 0.0, 0)?.threshold;
    let converged = early_exit || trace.last().is_some_and(|&y| y == 0.0);
    let conclusion = if early_exit || (measure_hypothesis && converged) { Some(verified) } else { None };

    Ok(DerivativeDeGiorgi {
        side,
        gradient_bound,
        measure_fraction,
        measure_hypothesis,
        h,
        early_exit,
        levels,
        trace,
        empirical_c,
        threshold,
        converged,
        conclusion,
        min_on_half,
    })
}

/// Negates every component, keeping the grid.
pub fn negate(field: &VectorField) -> Result<VectorField> {
    VectorField::new(field.components().iter().map(|c| c.map(|v| -v)).collect::<Vec<GridFunction>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{SpaceTimeGrid, SpatialGrid};
    use proptest::prelude::*;

    fn unit_grid(h: f64, dt: f64, dim: usize) -> SpaceTimeGrid {
        let ext = vec![(-1.0, 1.0); dim];
        SpaceTimeGrid::covering(SpatialGrid::new(h, &ext).unwrap(), dt, -1.0, 1.0).unwrap()
    }

    fn field(g: &SpaceTimeGrid, f0: impl Fn(&[f64; 2], f64) -> f64, f1: impl Fn(&[f64; 2], f64) -> f64) -> VectorField {
        let mut comps = vec![GridFunction::from_fn(g, f0)];
        if g.dim() == 2 {
            comps.push(GridFunction::from_fn(g, f1));
        }
        VectorField::new(comps).unwrap()
    }

    #[test]
    fn constant_mu_exits_early() {
        let g = unit_grid(0.1, 0.05, 2);
        let f = field(&g, |_, _| 1.0, |_, _| 0.0);
        let r = derivative_degiorgi(&f, 0, 1.0, 2.0, 0.1, 0.0).unwrap();
        assert_eq!(r.h, 0.0);
        assert!(r.early_exit && r.converged);
        assert_eq!(r.conclusion, Some(true));
    }

    #[test]
    fn zero_field_fails_the_measure_hypothesis() {
        let g = unit_grid(0.1, 0.05, 2);
        let f = field(&g, |_, _| 0.0, |_, _| 0.0);
        let r = derivative_degiorgi(&f, 0, 1.0, 2.0, 0.1, 0.0).unwrap();
        assert!(!r.measure_hypothesis);
        assert_eq!(r.measure_fraction, 1.0);
        assert_eq!(r.conclusion, None);
    }

    #[test]
    fn gradient_bound_is_enforced() {
        let g = unit_grid(0.1, 0.05, 1);
        let f = field(&g, |_, _| 3.0, |_, _| 0.0);
        assert!(matches!(derivative_degiorgi(&f, 0, 1.0, 2.0, 0.1, 0.0), Err(Error::Hypothesis(_))));
        assert!(matches!(derivative_degiorgi(&f, 0, 1.0, 2.0, 0.1, 1.5), Err(Error::Hypothesis(_))));
        assert!(derivative_degiorgi(&f, 0, 1.5, 2.0, 0.1, 0.0).is_ok());
    }

    #[test]
    fn dip_near_the_boundary_converges() {
        // A deep dip at the lateral edge: small measure, H = mu / 2 + 0.3 so no early exit.
        let g = unit_grid(0.05, 0.02, 2);
        let dip = |x: &[f64; 2], _t: f64| {
            let d2 = (x[0] - 0.95).powi(2) + x[1].powi(2);
            1.0 - 1.8 * (-d2 / 0.005).exp()
        };
        let f = field(&g, dip, |_, _| 0.0);
        let r = derivative_degiorgi(&f, 0, 1.0, 2.0, 0.1, 0.0).unwrap();
        assert!(r.measure_hypothesis && !r.early_exit);
        assert!(r.converged, "{:?}", r.trace);
        assert_eq!(r.conclusion, Some(true));
        assert!(r.trace[0] > 0.0 && r.empirical_c.is_finite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn dual_mirrors_primal(a in -1.0f64..1.0, b in 0.0f64..0.8, c in 0.1f64..0.5) {
            let g = unit_grid(0.125, 0.0625, 2);
            let f = field(&g, move |x, t| a + b * (3.0 * x[0] + t).sin(), move |x, _| c * x[1]);
            let neg = negate(&f).unwrap();
            let primal = derivative_degiorgi(&f, 0, 1.0, 2.0, 0.3, 0.0);
            let dual = dual_derivative_degiorgi(&neg, 0, 1.0, 2.0, 0.3, 0.0);
            match (primal, dual) {
                (Ok(p), Ok(d)) => {
                    prop_assert_eq!(d.side, Side::Upper);
                    prop_assert_eq!(Side::Lower, p.side);
                    prop_assert_eq!(DerivativeDeGiorgi { side: Side::Lower, ..d }, p);
                }
                (p, d) => prop_assert_eq!(p.is_err(), d.is_err()),
            }
        }
    }
}
