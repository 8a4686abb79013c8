use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{Cylinder, GridFunction, Point};

use super::exponents::{BoundConstants, Exponents};
use super::lemmas::{fast_geometric, ln_bounded_recursive, FastGeometric};

/// Iterations stop once `Y_n` drops below this.
pub const Y_FLOOR: f64 = 1e-14;
pub const N_MAX: usize = 40;

/// The reference cylinder `Q_{rho,theta}(z0) = B_rho(x0) x (t0 - theta, t0 + theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Point,
    pub rho: f64,
    pub theta: f64,
}

impl Window {
    pub fn new(center: Point, rho: f64, theta: f64) -> Result<Self> {
        Cylinder::standard(center, rho, theta, false)?;
        Ok(Self { center, rho, theta })
    }

    pub fn cylinder(&self, rho: f64, theta: f64) -> Cylinder {
        Cylinder { center: self.center, radius: rho, half_time: theta, backward: false }
    }

    pub fn full(&self) -> Cylinder {
        self.cylinder(self.rho, self.theta)
    }

    /// `Q_{sigma rho, sigma theta}`.
    pub fn inner(&self, sigma: f64) -> Cylinder {
        self.cylinder(sigma * self.rho, sigma * self.theta)
    }

    /// Shrinking radii `sigma r + (1 - sigma) r / 2^n`.
    pub fn shrinking(&self, sigma: f64, n: usize) -> (f64, f64) {
        let f = sigma + (1.0 - sigma) / 2f64.powi(n as i32);
        (f * self.rho, f * self.theta)
    }

    /// Growing radii `sigma r + (1 - sigma) r (1 - 2^{-n})`.
    pub fn growing(&self, sigma: f64, n: usize) -> (f64, f64) {
        let f = sigma + (1.0 - sigma) * (1.0 - 1.0 / 2f64.powi(n as i32));
        (f * self.rho, f * self.theta)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(invalid(format!("sigma = {sigma} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_dim(v: &GridFunction, exps: &Exponents) -> Result<()> {
    if v.grid().dim() != exps.dim {
        return Err(Error::DimensionMismatch { expected: exps.dim, got: v.grid().dim() });
    }
    Ok(())
}

/// `max v` over the cylinder's nodes (0 on an empty set).
pub fn sup_over(v: &GridFunction, cyl: &Cylinder) -> Result<f64> {
    let nodes = cyl.nodes(v.grid())?;
    let vals = v.values();
    Ok(nodes.iter().map(|n| vals[n]).fold(0.0f64, f64::max))
}

/// `iint_Q (v - level)_+^power`.
pub fn truncated_moment(v: &GridFunction, cyl: &Cylinder, level: f64, power: f64) -> Result<f64> {
    let nodes = cyl.nodes(v.grid())?;
    let vals = v.values();
    Ok(nodes.sum(|n| (vals[n] - level).max(0.0).powf(power)) * v.grid().node_volume())
}

/// `iint_Q v^power`.
pub fn power_integral(v: &GridFunction, cyl: &Cylinder, power: f64) -> Result<f64> {
    truncated_moment(v, cyl, 0.0, power)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: usize,
    pub k_n: f64,
    pub rho_n: f64,
    pub theta_n: f64,
    pub rho_tilde: f64,
    pub theta_tilde: f64,
    pub y: f64,
    /// Smallest constant making the step `n -> n + 1` satisfy the recursion; `None` when
    /// `Y_n = 0` or this is the last record.
    pub step_constant: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeGiorgiTrace {
    pub k: f64,
    pub sup_v: f64,
    /// `max v` on `Q_{sigma rho, sigma theta}`.
    pub sup_inner: f64,
    pub steps: Vec<StepRecord>,
    /// Largest step constant along the trace, 0 if none was defined.
    pub empirical_constant: f64,
    pub converged: bool,
}

impl DeGiorgiTrace {
    /// Columns `n, k_n, rho_n, theta_n, Y_n, step_constant`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,k_n,rho_n,theta_n,Y_n,step_constant\n");
        for r in &self.steps {
            let c = r.step_constant.map(|c| format!("{c:e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:e},{:e},{:e},{:e},{}", r.n, r.k_n, r.rho_n, r.theta_n, r.y, c);
        }
        s
    }
}

/// `Y_n = iint_{Q_n} (v - k_n)_+^power` on the shrinking cylinders, with per-step constants
/// measured against `factor(n) * Y_n^{1 + exponent}`.
fn level_trace(
    v: &GridFunction,
    window: &Window,
    sigma: f64,
    k: f64,
    power: f64,
    growth: f64,
    factor: impl Fn(usize) -> f64,
) -> Result<DeGiorgiTrace> {
    let sup_v = sup_over(v, &window.full())?;
    let sup_inner = sup_over(v, &window.inner(sigma))?;
    let mut steps: Vec<StepRecord> = Vec::new();
    for n in 0..=N_MAX {
        let k_n = k - k / 2f64.powi(n as i32);
        let (rho_n, theta_n) = window.shrinking(sigma, n);
        let (rho_next, theta_next) = window.shrinking(sigma, n + 1);
        let y = truncated_moment(v, &window.cylinder(rho_n, theta_n), k_n, power)?;
        if let Some(prev) = steps.last_mut() {
            if prev.y > 0.0 {
                prev.step_constant = Some(y / (factor(prev.n) * prev.y.powf(1.0 + growth)));
            }
        }
        steps.push(StepRecord {
            n,
            k_n,
            rho_n,
            theta_n,
            rho_tilde: 0.5 * (rho_n + rho_next),
            theta_tilde: 0.5 * (theta_n + theta_next),
            y,
            step_constant: None,
        });
        if y < Y_FLOOR {
            break;
        }
    }
    let empirical_constant = steps.iter().filter_map(|r| r.step_constant).fold(0.0f64, f64::max);
    let converged = steps.last().is_some_and(|r| r.y < Y_FLOOR);
    Ok(DeGiorgiTrace { k, sup_v, sup_inner, steps, empirical_constant, converged })
}

/// First De Giorgi iteration with levels `k_n = k - k/2^n`. Step constants are measured
/// against `B^n k^{-X/(N+2)} (1-sigma)^{-2} (sup v)^P A Y_n^{1+2/(N+2)}`.
pub fn degiorgi_first(v: &GridFunction, window: &Window, sigma: f64, exps: &Exponents, k: f64) -> Result<DeGiorgiTrace> {
    check_sigma(sigma)?;
    check_dim(v, exps)?;
    if !(k >= 1.0) {
        return Err(Error::Precondition(format!("the first iteration needs k >= 1, got {k}")));
    }
    let c = exps.constants(window.rho, window.theta);
    let n2 = exps.dim as f64 + 2.0;
    let sup_v = sup_over(v, &window.full())?;
    let base = k.powf(-c.big_x / n2) / (1.0 - sigma).powi(2) * sup_v.powf(exps.sup_power()) * c.big_a;
    level_trace(v, window, sigma, k, exps.level_power(), 2.0 / n2, |n| c.big_b.powi(n as i32) * base)
}

/// The level choice and the quantities that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelChoice {
    pub k: f64,
    /// Value before the floor at 1.
    pub raw: f64,
    /// `iint_Q v^{alpha+beta+2-gamma}`.
    pub integral: f64,
    pub sup_v: f64,
}

/// `k = [B^{(N+2)/2} (iint v^a)^{2/(N+2)} C1 A (1-sigma)^{-2} (sup v)^P]^Sigma`, floored at 1.
pub fn choose_k(v: &GridFunction, window: &Window, sigma: f64, exps: &Exponents, c1: f64) -> Result<LevelChoice> {
    check_sigma(sigma)?;
    check_dim(v, exps)?;
    let c = exps.constants(window.rho, window.theta);
    let n2 = exps.dim as f64 + 2.0;
    let cyl = window.full();
    let integral = power_integral(v, &cyl, exps.level_power())?;
    let sup_v = sup_over(v, &cyl)?;
    let bracket = c.big_b.powf(n2 / 2.0) * integral.powf(2.0 / n2) * c1 * c.big_a / (1.0 - sigma).powi(2)
        * sup_v.powf(exps.sup_power());
    let raw = bracket.powf(c.sigma_exp);
    Ok(LevelChoice { k: raw.max(1.0), raw, integral, sup_v })
}

/// `ln` of `K = [B^{(N+2)/2} I^{2/(N+2)} C1 A (1-sigma)^{-2}]^Sigma`.
fn ln_k_factor(c: &BoundConstants, dim: usize, integral: f64, sigma: f64, c1: f64) -> f64 {
    let n2 = dim as f64 + 2.0;
    c.sigma_exp
        * (n2 / 2.0 * c.big_b.ln() + 2.0 / n2 * integral.ln() + c1.ln() + c.big_a.ln() - 2.0 * (1.0 - sigma).ln())
}

/// Natural log of the final sup bound before the floor at 1.
pub fn ln_lipschitz_bound(
    exps: &Exponents,
    integral: f64,
    sigma: f64,
    rho: f64,
    theta: f64,
    eps: f64,
    c1: f64,
) -> Result<f64> {
    check_sigma(sigma)?;
    let e = exps.effective_offset(eps)?;
    if !(c1 > 0.0) || !(integral >= 0.0) {
        return Err(invalid(format!("need C1 > 0 and a nonnegative integral (C1 = {c1}, I = {integral})")));
    }
    let c = exps.constants(rho, theta);
    let x = c.big_x;
    let s = c.sigma_exp;
    let ln_bracket = 2f64.ln() / s + ln_k_factor(&c, exps.dim, integral, sigma, c1) / s;
    Ok(x * s / (2.0 * e) * ln_bracket + x * (x - 2.0 * e) / (4.0 * e * e) * s * 4f64.ln())
}

/// `sup_{Q_{sigma rho, sigma theta}} |Du|` bound:
/// `[2^{1/Sigma} B^{(N+2)/2} I^{2/(N+2)} C1 A/(1-sigma)^2]^{X Sigma/(2e)} (4^Sigma)^{X(X-2e)/(4e^2)}`
/// floored at 1, where `I` integrates the mode's power of `|Du|` and `e` is the effective offset.
///
/// The source writes the floor as `\wedge 1` while defining it as a maximum; the maximum is used.
pub fn lipschitz_bound(
    exps: &Exponents,
    integral: f64,
    sigma: f64,
    rho: f64,
    theta: f64,
    eps: f64,
    c1: f64,
) -> Result<f64> {
    Ok(ln_lipschitz_bound(exps, integral, sigma, rho, theta, eps, c1)?.exp().max(1.0))
}

#[allow(clippy::too_many_arguments)]
pub fn degenerate_bound(p: f64, dim: usize, integral: f64, sigma: f64, rho: f64, theta: f64, eps: f64, c1: f64) -> Result<f64> {
    let e = Exponents::choose(super::Mode::Degenerate, p, dim)?;
    lipschitz_bound(&e, integral, sigma, rho, theta, eps, c1)
}

#[allow(clippy::too_many_arguments)]
pub fn singular_bound(p: f64, dim: usize, integral: f64, sigma: f64, rho: f64, theta: f64, eps: f64, c1: f64) -> Result<f64> {
    let e = Exponents::choose(super::Mode::Singular, p, dim)?;
    lipschitz_bound(&e, integral, sigma, rho, theta, eps, c1)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondIteration {
    /// `M_n = sup_{Q_n} v` on the growing cylinders.
    pub m: Vec<f64>,
    pub radii: Vec<(f64, f64)>,
    /// Whether `M_n <= max(4^{n Sigma} M_{n+1}^{1 - 2e/X} K, 1)` held at each step.
    pub recursion_holds: Vec<bool>,
    pub integral: f64,
    /// Bound from the recursive lemma with `C = K`, `b = 4^Sigma`, `alpha = 2e/X`.
    pub final_bound: f64,
    /// [`lipschitz_bound`] on the same data.
    pub closed_form: f64,
    pub consistent: bool,
}

pub fn second_iteration(
    v: &GridFunction,
    window: &Window,
    sigma: f64,
    eps: f64,
    exps: &Exponents,
    c1: f64,
    steps: usize,
) -> Result<SecondIteration> {
    check_sigma(sigma)?;
    check_dim(v, exps)?;
    let e = exps.effective_offset(eps)?;
    let c = exps.constants(window.rho, window.theta);
    let integral = power_integral(v, &window.full(), exps.integrand_power(eps))?;
    let ln_k = ln_k_factor(&c, exps.dim, integral, sigma, c1);
    let alpha = 2.0 * e / c.big_x;
    let b = 4f64.powf(c.sigma_exp);

    let mut m = Vec::with_capacity(steps + 1);
    let mut radii = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        let (r, t) = window.growing(sigma, n);
        radii.push((r, t));
        m.push(sup_over(v, &window.cylinder(r, t))?);
    }
    let recursion_holds = (0..steps)
        .map(|n| {
            let ln_rhs = n as f64 * b.ln() + (1.0 - alpha) * m[n + 1].ln() + ln_k;
            m[n] <= ln_rhs.exp().max(1.0) * (1.0 + 1e-12)
        })
        .collect();
    let final_bound = ln_bounded_recursive(ln_k.exp(), b, alpha).exp().max(1.0);
    let closed_form = lipschitz_bound(exps, integral, sigma, window.rho, window.theta, eps, c1)?;
    let consistent = if final_bound.is_finite() && closed_form.is_finite() {
        (final_bound - closed_form).abs() <= 1e-10 * closed_form
    } else {
        final_bound == closed_form
    };
    Ok(SecondIteration { m, radii, recursion_holds, integral, final_bound, closed_form, consistent })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoughLipschitz {
    /// `((p - 2 + gamma) N + 2(alpha + beta + 2)) / (N + 2)`.
    pub big_e: f64,
    /// `2^{2 + 2(alpha + beta + 2 - gamma)/(N + 2)}`.
    pub big_d: f64,
    /// Smallest `B1` with `Y_{n+1} <= B1 k^{-E} D^n Y_n^{1 + 1/(N+2)}` along the trace.
    pub b1_empirical: f64,
    /// `Y_0 <= (B1/k^E)^{-(N+2)} D^{-(N+2)^2}`.
    pub threshold_met: bool,
    /// The extremal recursion from `Y_0`, when `B1 k^{-E} > 1`.
    pub extremal: Option<FastGeometric>,
    pub trace: DeGiorgiTrace,
}

pub fn rough_lipschitz_recursion(v: &GridFunction, window: &Window, sigma: f64, exps: &Exponents, k: f64) -> Result<RoughLipschitz> {
    check_sigma(sigma)?;
    check_dim(v, exps)?;
    if !(k > 0.0) {
        return Err(invalid(format!("level k = {k} must be positive")));
    }
    let n = exps.dim as f64;
    let big_e = ((exps.p - 2.0 + exps.gamma) * n + 2.0 * (exps.alpha + exps.beta + 2.0)) / (n + 2.0);
    let big_d = 2f64.powf(2.0 + 2.0 * exps.level_power() / (n + 2.0));
    let scale = k.powf(-big_e);
    let trace = level_trace(v, window, sigma, k, exps.level_power(), 1.0 / (n + 2.0), |i| scale * big_d.powi(i as i32))?;
    let b1 = trace.empirical_constant;
    let y0 = trace.steps[0].y;
    let c = b1 * scale;
    let threshold_met = y0 == 0.0 || c == 0.0 || (c > 0.0 && y0.ln() <= -(n + 2.0) * c.ln() - (n + 2.0).powi(2) * big_d.ln());
    let extremal = if c > 1.0 { Some(fast_geometric(c, big_d, 1.0 / (n + 2.0), y0, N_MAX)?) } else { None };
    Ok(RoughLipschitz { big_e, big_d, b1_empirical: b1, threshold_met, extremal, trace })
}

/// Largest step constant over a calibration set of traces.
pub fn calibrate_c1<'a>(traces: impl IntoIterator<Item = &'a DeGiorgiTrace>) -> f64 {
    traces.into_iter().map(|t| t.empirical_constant).fold(0.0f64, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iterate::Mode;
    use crate::mesh::{SpaceTimeGrid, SpatialGrid};

    fn grid() -> SpaceTimeGrid {
        let s = SpatialGrid::new(0.05, &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        SpaceTimeGrid::covering(s, 0.05, -1.0, 1.0).unwrap()
    }

    fn window() -> Window {
        Window::new(Point::origin(), 0.9, 0.9).unwrap()
    }

    #[test]
    fn below_half_level_vanishes_after_first_step() {
        let g = grid();
        let v = GridFunction::from_fn(&g, |x, _| 1.0 + 0.2 * x[0]);
        let e = Exponents::choose(Mode::Unified, 2.0, 2).unwrap();
        let t = degiorgi_first(&v, &window(), 0.5, &e, 4.0).unwrap();
        assert!(t.steps[0].y > 0.0);
        assert_eq!(t.steps[1].y, 0.0);
        assert!(t.converged);
        assert!(degiorgi_first(&v, &window(), 0.5, &e, 0.5).is_err());
    }

    #[test]
    fn constant_field_closed_form() {
        let g = grid();
        let c = 3.0;
        let v = GridFunction::from_fn(&g, |_, _| c);
        let e = Exponents::choose(Mode::Unified, 2.0, 2).unwrap();
        let k = 2.0;
        let t = degiorgi_first(&v, &window(), 0.5, &e, k).unwrap();
        for r in t.steps.iter().take(5) {
            let nodes = window().cylinder(r.rho_n, r.theta_n).nodes(&g).unwrap().len() as f64;
            let expect = nodes * g.node_volume() * (c - r.k_n).powf(e.level_power());
            assert!((r.y - expect).abs() < 1e-12 * expect);
        }
        assert!(!t.converged);
    }

    #[test]
    fn floor_of_k() {
        let g = grid();
        let v = GridFunction::zeros(&g);
        let e = Exponents::choose(Mode::Unified, 2.0, 2).unwrap();
        let k = choose_k(&v, &window(), 0.5, &e, 1.0).unwrap();
        assert_eq!(k.k, 1.0);
        let zero = lipschitz_bound(&e, 0.0, 0.5, 1.0, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(zero, 1.0);
    }

    #[test]
    fn bound_exponent_in_the_plane() {
        // X Sigma / (2 eps) = 2 / eps at N = p = 2.
        let e = Exponents::choose(Mode::Unified, 2.0, 2).unwrap();
        let c = e.constants(1.0, 1.0);
        assert_eq!(c.big_x * c.sigma_exp / (2.0 * 0.5), 4.0);
    }

    #[test]
    fn bound_nonincreasing_in_one_minus_sigma() {
        let e = Exponents::choose(Mode::Unified, 2.5, 2).unwrap();
        let a = ln_lipschitz_bound(&e, 3.0, 0.2, 1.0, 1.0, 0.5, 2.0).unwrap();
        let b = ln_lipschitz_bound(&e, 3.0, 0.7, 1.0, 1.0, 0.5, 2.0).unwrap();
        assert!(a <= b);
    }

    #[test]
    fn seam_agreement() {
        let d = degenerate_bound(2.0, 2, 0.7, 0.5, 1.0, 1.0, 1.0, 3.0).unwrap();
        let s = singular_bound(2.0, 2, 0.7, 0.5, 1.0, 1.0, 1.0, 3.0).unwrap();
        assert!((d - s).abs() <= 1e-10 * d);
        assert!(singular_bound(1.5, 2, 0.7, 0.5, 1.0, 1.0, 0.5, 3.0).is_err());
    }

    #[test]
    fn second_iteration_matches_closed_form() {
        let g = grid();
        let v = GridFunction::from_fn(&g, |x, t| 2.0 + x[0] * x[1] + 0.3 * t);
        for (mode, p, eps) in [(Mode::Unified, 2.5, 0.5), (Mode::Degenerate, 3.0, 1.0), (Mode::Singular, 1.6, 1.0)] {
            let e = Exponents::choose(mode, p, 2).unwrap();
            let s = second_iteration(&v, &window(), 0.5, eps, &e, 1.0, 12).unwrap();
            assert!(s.consistent, "{mode:?}: {} vs {}", s.final_bound, s.closed_form);
            assert!(s.m.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.final_bound >= s.m[0]);
            assert!(s.recursion_holds.iter().all(|h| *h));
        }
        let c = GridFunction::from_fn(&g, |_, _| 0.5);
        let e = Exponents::choose(Mode::Unified, 2.0, 2).unwrap();
        let s = second_iteration(&c, &window(), 0.5, 0.5, &e, 1.0, 8).unwrap();
        assert!(s.m.iter().all(|m| *m == 0.5));
        assert!(s.final_bound >= 0.5);
    }

    #[test]
    fn rough_constants_and_trivial_run() {
        let e = Exponents::choose(Mode::Unified, 2.0, 2).unwrap();
        let g = grid();
        let v = GridFunction::from_fn(&g, |x, _| 0.4 + 0.1 * x[0]);
        let r = rough_lipschitz_recursion(&v, &window(), 0.5, &e, 2.0).unwrap();
        assert_eq!(r.big_e, 3.0);
        assert_eq!(r.big_d, 16.0);
        assert!(r.trace.converged && r.threshold_met);
    }

    #[test]
    fn csv_has_one_row_per_step() {
        let g = grid();
        let v = GridFunction::from_fn(&g, |x, _| 1.0 + x[0].abs());
        let e = Exponents::choose(Mode::Unified, 2.0, 2).unwrap();
        let t = degiorgi_first(&v, &window(), 0.5, &e, 4.0).unwrap();
        assert_eq!(t.to_csv().lines().count(), t.steps.len() + 1);
    }
}
