use serde::{Deserialize, Serialize};

use crate::calculus::{derivative_energy_check, levelset_poincare, log_estimate_check, Cutoff};
use crate::error::{invalid, Error, Result};
use crate::iterate::{fast_geometric, FastGeometric};
use crate::mesh::{Cylinder, GridFunction, Point, VectorField};

use super::derivative::unit_cylinder;

/// Deepest dyadic level tried by the shrinking and expansion searches.
pub const MAX_LEVEL: usize = 60;

/// Steps of the final iteration.
pub const FINAL_STEPS: usize = 40;

fn tol(grid_dt: f64) -> f64 {
    1e-9 * grid_dt
}

/// Spatial nodes of `B1` and the grid's time levels; errors when the grid misses `Q1`.
fn unit_ball(w: &GridFunction) -> Result<Vec<usize>> {
    let q1 = unit_cylinder(1.0)?;
    if !q1.fits(w.grid()) {
        return Err(Error::Precondition("grid does not cover Q1".into()));
    }
    let space = q1.nodes(w.grid())?.space;
    if space.is_empty() {
        return Err(Error::Precondition("B1 holds no nodes".into()));
    }
    Ok(space)
}

fn slice_fraction(w: &GridFunction, ball: &[usize], level: usize, pred: impl Fn(f64) -> bool) -> f64 {
    let lvl = w.level(level);
    ball.iter().filter(|&&s| pred(lvl[s])).count() as f64 / ball.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodSlice {
    pub t_star: f64,
    pub level: usize,
    /// `|{B1 : w(., t*) >= 1/(2A)}| / |B1|`.
    pub fraction: f64,
    /// `(1 - nu) / (1 - nu/2)`.
    pub threshold: f64,
    /// `(t, fraction)` for every scanned slice up to `t*`.
    pub scanned: Vec<(f64, f64)>,
}

/// First slice in `(-1, -nu/2)` whose upper level set is small enough.
pub fn good_time_slice(w: &GridFunction, nu: f64, big_a: f64) -> Result<GoodSlice> {
    if !(nu > 0.0 && nu < 1.0 && big_a >= 1.0) {
        return Err(invalid(format!("need nu in (0, 1) and A >= 1 (nu = {nu}, A = {big_a})")));
    }
    let ball = unit_ball(w)?;
    let grid = w.grid();
    let eps = tol(grid.dt());
    let threshold = (1.0 - nu) / (1.0 - nu / 2.0);
    let mut scanned = Vec::new();
    for k in 0..grid.levels() {
        let t = grid.time(k);
        if t <= -1.0 + eps {
            continue;
        }
        if t >= -nu / 2.0 - eps {
            break;
        }
        let fraction = slice_fraction(w, &ball, k, |v| v >= 1.0 / (2.0 * big_a));
        scanned.push((t, fraction));
        if fraction <= threshold {
            return Ok(GoodSlice { t_star: t, level: k, fraction, threshold, scanned });
        }
    }
    Err(Error::Hypothesis(format!("no slice in (-1, -nu/2) has an upper level set below {threshold}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    /// Largest admissible `nu / 2^k`.
    pub eta0: f64,
    pub k: usize,
    /// `(t, |{B1 : w(., t) > 1 - eta0}| / |B1|)` for every slice after `t*`.
    pub per_slice: Vec<(f64, f64)>,
    /// `1 - nu^2 / 4`.
    pub bound: f64,
    /// Smallest constant of the logarithmic estimate from `t*` to sampled later slices.
    pub log_constants: Vec<(f64, f64)>,
}

/// Searches `eta0 = nu / 2^k` for the largest value whose slice bound holds after `t*`.
pub fn expansion_of_positivity(w: &GridFunction, nu: f64, big_a: f64, t_star: f64) -> Result<Expansion> {
    if !(nu > 0.0 && nu < 1.0 && big_a >= 1.0) {
        return Err(invalid(format!("need nu in (0, 1) and A >= 1 (nu = {nu}, A = {big_a})")));
    }
    let ball = unit_ball(w)?;
    let grid = w.grid();
    let eps = tol(grid.dt());
    let later: Vec<usize> = (0..grid.levels()).filter(|&k| grid.time(k) > t_star + eps).collect();
    if later.is_empty() {
        return Err(Error::Precondition(format!("no slices after t* = {t_star}")));
    }
    let bound = 1.0 - nu * nu / 4.0;
    for k in 1..=MAX_LEVEL {
        let eta0 = nu * 0.5f64.powi(k as i32);
        let per_slice: Vec<(f64, f64)> =
            later.iter().map(|&l| (grid.time(l), slice_fraction(w, &ball, l, |v| v > 1.0 - eta0))).collect();
        if per_slice.iter().all(|&(_, f)| f <= bound) {
            // Evidence from the logarithmic estimate at eight later slices; k = 0 keeps Psi alive.
            let stride = (later.len() / 8).max(1);
            let mut log_constants = Vec::new();
            for &l in later.iter().step_by(stride) {
                let r = log_estimate_check(w, 0.0, nu, eta0, t_star, grid.time(l), 0.5)?;
                log_constants.push((grid.time(l), r.smallest_c));
            }
            return Ok(Expansion { eta0, k, per_slice, bound, log_constants });
        }
    }
    Err(Error::Hypothesis(format!("no eta0 down to nu / 2^{MAX_LEVEL} satisfies the slice bound")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkEvidence {
    pub j: usize,
    /// `A_j^s / (|B1| (s - t*))` at the last window.
    pub measure: f64,
    /// Both sides of the slicewise level-set Poincaré inequality at the window's end.
    pub poincare: (f64, f64),
    /// Smallest constant of the energy estimate for `(w - k_j)_+` on `(t*, s)`.
    pub energy_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelShrink {
    /// Largest integer with `2^{-j0} >= eta0`.
    pub j0: usize,
    pub j_delta: usize,
    pub delta_target: f64,
    /// `(s, first j that works for this s)`.
    pub per_window: Vec<(f64, usize)>,
    pub evidence: Vec<ShrinkEvidence>,
}

/// `A_j^s = int_{t*}^{s} |{B1 : w(., t) > 1 - 2^{-j}}| dt` by the rectangle rule on the
/// grid's levels in `(t*, s]`.
pub fn level_measure(w: &GridFunction, ball: &[usize], t_star: f64, s: f64, j: usize) -> f64 {
    let grid = w.grid();
    let eps = tol(grid.dt());
    let k = 1.0 - 0.5f64.powi(j as i32);
    let cell = grid.space().cell_volume();
    (0..grid.levels())
        .filter(|&l| grid.time(l) > t_star + eps && grid.time(l) <= s + eps)
        .map(|l| slice_fraction(w, ball, l, |v| v > k) * ball.len() as f64 * cell * grid.dt())
        .sum()
}

/// First `j >= j0` with `A_j^s <= delta_target |B1| (s - t*)` for every window end in
/// `windows` (ends closer than `1/8` to `t*` are ignored).
pub fn levelset_shrink(w: &GridFunction, t_star: f64, eta0: f64, delta_target: f64, windows: &[f64]) -> Result<LevelShrink> {
    if !(eta0 > 0.0 && eta0 < 1.0 && delta_target > 0.0) {
        return Err(invalid(format!("need eta0 in (0, 1) and delta > 0 (eta0 = {eta0}, delta = {delta_target})")));
    }
    let ball = unit_ball(w)?;
    let grid = w.grid();
    let ends: Vec<f64> = windows.iter().copied().filter(|&s| s - t_star >= 0.125 && s <= grid.t_hi() + tol(grid.dt())).collect();
    if ends.is_empty() {
        return Err(Error::Precondition("no window end s with s - t* >= 1/8".into()));
    }
    let j0 = ((-eta0.log2()).floor() as usize).max(1);
    let ball_volume = ball.len() as f64 * grid.space().cell_volume();
    let mut per_window = Vec::new();
    for &s in &ends {
        let cap = delta_target * ball_volume * (s - t_star);
        let j = (j0..=MAX_LEVEL).find(|&j| level_measure(w, &ball, t_star, s, j) <= cap).ok_or(Error::NonConvergence {
            iterations: MAX_LEVEL,
            change: level_measure(w, &ball, t_star, s, MAX_LEVEL) / cap,
        })?;
        per_window.push((s, j));
    }
    let j_delta = per_window.iter().map(|&(_, j)| j).max().unwrap_or(j0);

    let s_last = ends.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let last_level = grid.nearest(&Point::new(&[0.0], s_last))?.div_euclid(grid.level_len());
    let outer = unit_cylinder(1.0)?;
    let inner = Cylinder::standard(Point::origin(), 0.5, 0.25, false)?;
    let cutoff = Cutoff::between(&inner, &outer)?;
    let mut evidence = Vec::new();
    for j in j0..=j_delta {
        let (k, l) = (1.0 - 0.5f64.powi(j as i32), 1.0 - 0.5f64.powi(j as i32 + 1));
        let poincare = levelset_poincare(w, last_level, &outer, k, l)?;
        let energy = derivative_energy_check(w, k, &cutoff, t_star, s_last)?;
        evidence.push(ShrinkEvidence {
            j,
            measure: level_measure(w, &ball, t_star, s_last, j) / (ball_volume * (s_last - t_star)),
            poincare: (poincare.lhs, poincare.rhs),
            energy_c: energy.empirical_c,
        });
    }
    Ok(LevelShrink { j0, j_delta, delta_target, per_window, evidence })
}

/// Extremal sequence `Y_{n+1} = C 4^n Y_n^{1 + 2/(N+2)}` of the final iteration.
pub fn final_recursion(c: f64, dim: usize, y0: f64, steps: usize) -> Result<FastGeometric> {
    fast_geometric(c, 4.0, 2.0 / (dim as f64 + 2.0), y0, steps)
}

/// `C^{-(N+2)/2} 4^{-((N+2)/2)^2}`.
pub fn final_threshold(c: f64, dim: usize) -> f64 {
    let e = (dim as f64 + 2.0) / 2.0;
    c.powf(-e) * 4f64.powf(-e * e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalDeGiorgi {
    /// `2^{-(j* + 2)}`.
    pub eta: f64,
    pub levels: Vec<f64>,
    /// `Y_n = |{Q_n : w > k_n}| / |Q_n|`.
    pub trace: Vec<f64>,
    pub empirical_c: f64,
    pub threshold: f64,
    pub converged: bool,
    /// First step where `Y` failed to decrease while still positive.
    pub violating_step: Option<usize>,
    /// `|{Q_{1/2} : w > 1 - eta}| = 0`, node by node.
    pub zero_measure_verified: bool,
    pub max_on_half: f64,
}

/// Final De Giorgi iteration from the level `1 - 2^{-(j* + 1)}` up to `1 - 2^{-(j* + 2)}`.
pub fn final_degiorgi(w: &GridFunction, j_star: usize) -> Result<FinalDeGiorgi> {
    if j_star > MAX_LEVEL {
        return Err(invalid(format!("j* = {j_star} beyond level {MAX_LEVEL}")));
    }
    unit_ball(w)?;
    let grid = w.grid();
    let base = 0.5f64.powi(j_star as i32 + 2);
    let mut levels = Vec::new();
    let mut trace = Vec::new();
    for n in 0..=FINAL_STEPS {
        let k = 1.0 - base - base * 0.5f64.powi(n as i32);
        let q = unit_cylinder(0.5 + 0.5f64.powi(n as i32 + 2))?.nodes(grid)?;
        levels.push(k);
        trace.push(q.count(|node| w.at(node) > k) as f64 / q.len().max(1) as f64);
    }
    let dim = grid.dim();
    let alpha = 2.0 / (dim as f64 + 2.0);
    let mut empirical_c = 0.0f64;
    let mut violating_step = None;
    for n in 0..FINAL_STEPS {
        if trace[n] > 0.0 {
            empirical_c = empirical_c.max(trace[n + 1] / (4f64.powi(n as i32) * trace[n].powf(1.0 + alpha)));
            if violating_step.is_none() && trace[n + 1] >= trace[n] && n + 1 == FINAL_STEPS {
                violating_step = Some(n);
            }
        }
    }
    let converged = trace[FINAL_STEPS] == 0.0;
    if !converged && violating_step.is_none() {
        violating_step = (0..FINAL_STEPS).find(|&n| trace[n] > 0.0 && trace[n + 1] >= trace[n]);
    }
    let half = unit_cylinder(0.5)?.nodes(grid)?;
    let max_on_half = half.iter().map(|n| w.at(n)).fold(f64::NEG_INFINITY, f64::max);
    Ok(FinalDeGiorgi {
        eta: base,
        levels,
        trace,
        empirical_c,
        threshold: final_threshold(empirical_c.max(1.0), dim),
        converged,
        violating_step,
        zero_measure_verified: half.count(|n| w.at(n) > 1.0 - base) == 0,
        max_on_half,
    })
}

/// One component and sign run through the whole second alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRun {
    pub axis: usize,
    /// `+1` for `w_xi`, `-1` for `-w_xi`.
    pub sign: f64,
    /// `|{Q1 : sign w_xi >= 1/(2A)}| / |Q1|`, which must stay below `1 - nu`.
    pub upper_fraction: f64,
    pub slice: GoodSlice,
    pub expansion: Expansion,
    pub shrink: LevelShrink,
    pub last: FinalDeGiorgi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondAlternative {
    pub runs: Vec<ComponentRun>,
    /// Smallest `eta` over components and signs.
    pub eta: f64,
    /// `max_i sup_{Q_{1/2}} |w_xi|`, to be compared with `1 - eta`.
    pub max_component: f64,
    pub verified: bool,
}

/// Scalar pipeline: good slice, expansion of positivity, level shrinking, final iteration.
pub fn second_alternative_component(w: &GridFunction, nu: f64, big_a: f64, delta_target: f64, windows: &[f64]) -> Result<(f64, GoodSlice, Expansion, LevelShrink, FinalDeGiorgi)> {
    let q1 = unit_cylinder(1.0)?.nodes(w.grid())?;
    let upper_fraction = q1.count(|n| w.at(n) >= 1.0 / (2.0 * big_a)) as f64 / q1.len().max(1) as f64;
    let slice = good_time_slice(w, nu, big_a)?;
    let expansion = expansion_of_positivity(w, nu, big_a, slice.t_star)?;
    let shrink = levelset_shrink(w, slice.t_star, expansion.eta0, delta_target, windows)?;
    let last = final_degiorgi(w, shrink.j_delta)?;
    Ok((upper_fraction, slice, expansion, shrink, last))
}

/// Runs every component with both signs and combines them by the maximum over components.
pub fn second_alternative(grad_w: &VectorField, nu: f64, big_a: f64, delta_target: f64, windows: &[f64]) -> Result<SecondAlternative> {
    let mut runs = Vec::new();
    for axis in 0..grad_w.dim() {
        for sign in [1.0, -1.0] {
            let w = grad_w.component(axis).map(|v| sign * v);
            let (upper_fraction, slice, expansion, shrink, last) = second_alternative_component(&w, nu, big_a, delta_target, windows)?;
            runs.push(ComponentRun { axis, sign, upper_fraction, slice, expansion, shrink, last });
        }
    }
    let eta = runs.iter().map(|r| r.last.eta).fold(f64::INFINITY, f64::min);
    let half = unit_cylinder(0.5)?.nodes(grad_w.grid())?;
    let max_component = (0..grad_w.dim())
        .flat_map(|a| half.iter().map(move |n| grad_w.component(a).at(n).abs()))
        .fold(0.0, f64::max);
    let verified = runs.iter().all(|r| r.last.zero_measure_verified) && max_component <= 1.0 - eta;
    Ok(SecondAlternative { runs, eta, max_component, verified })
}
