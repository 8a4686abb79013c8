use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{GridFunction, SpaceTimeGrid, SpatialField, SpatialGrid};

use super::flux::FluxParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Forward Euler in conservative flux form.
    Explicit,
    /// Backward Euler with coefficients frozen at the previous iterate, repeated to a fixed point.
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub scheme: Scheme,
    /// Fraction of the explicit stability limit used per step.
    pub cfl_safety: f64,
    pub picard_max: usize,
    pub picard_tol: f64,
    /// Largest step for the semi-implicit scheme.
    pub max_dt: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { scheme: Scheme::Explicit, cfl_safety: 0.9, picard_max: 50, picard_tol: 1e-10, max_dt: f64::INFINITY }
    }
}

pub type BoundaryFn = Arc<dyn Fn(&[f64; 2], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Boundary {
    /// Face nodes take the supplied values at the new time level.
    Dirichlet(BoundaryFn),
    /// Opposite faces are identified; the last node on each axis mirrors the first.
    Periodic,
}

impl Boundary {
    pub fn dirichlet(f: impl Fn(&[f64; 2], f64) -> f64 + Send + Sync + 'static) -> Self {
        Boundary::Dirichlet(Arc::new(f))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Boundary::Dirichlet(_) => "dirichlet",
            Boundary::Periodic => "periodic",
        }
    }

    fn periodic(&self) -> bool {
        matches!(self, Boundary::Periodic)
    }
}

impl std::fmt::Debug for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.kind())
    }
}

/// Index arithmetic along one axis, wrapping with period `n - 1` when periodic.
fn shift(i: usize, delta: isize, n: usize, periodic: bool) -> Option<usize> {
    if periodic {
        let m = (n - 1) as isize;
        Some((i as isize + delta).rem_euclid(m) as usize)
    } else {
        let j = i as isize + delta;
        (j >= 0 && j < n as isize).then_some(j as usize)
    }
}

/// Clamped variant for tangential stencils on non-periodic faces.
fn shift_clamped(i: usize, delta: isize, n: usize, periodic: bool) -> usize {
    shift(i, delta, n, periodic).unwrap_or(i)
}

struct Stencil<'a> {
    grid: &'a SpatialGrid,
    periodic: bool,
}

impl Stencil<'_> {
    fn neighbor(&self, s: usize, axis: usize, delta: isize) -> Option<usize> {
        let (i, j) = self.grid.split(s);
        let n = self.grid.count(axis);
        if axis == 0 {
            shift(i, delta, n, self.periodic).map(|q| self.grid.index(q, j))
        } else {
            shift(j, delta, n, self.periodic).map(|q| self.grid.index(i, q))
        }
    }

    fn neighbor_clamped(&self, s: usize, axis: usize, delta: isize) -> usize {
        let (i, j) = self.grid.split(s);
        let n = self.grid.count(axis);
        if axis == 0 {
            self.grid.index(shift_clamped(i, delta, n, self.periodic), j)
        } else {
            self.grid.index(i, shift_clamped(j, delta, n, self.periodic))
        }
    }

    /// Gradient on the edge from `s` to its `+axis` neighbour `t`: normal difference plus
    /// tangential central differences averaged over both endpoints.
    fn edge_gradient(&self, u: &[f64], s: usize, t: usize, axis: usize) -> [f64; 2] {
        let h = self.grid.h();
        let mut g = [0.0; 2];
        g[axis] = (u[t] - u[s]) / h;
        if self.grid.dim() == 2 {
            let b = 1 - axis;
            let central = |q: usize| {
                let up = self.neighbor_clamped(q, b, 1);
                let dn = self.neighbor_clamped(q, b, -1);
                let span = if up == q || dn == q { 1.0 } else { 2.0 };
                (u[up] - u[dn]) / (span * h)
            };
            g[b] = 0.5 * (central(s) + central(t));
        }
        g
    }

    /// Nodes whose value is an unknown: everything but Dirichlet faces or periodic images.
    fn is_free(&self, s: usize) -> bool {
        let (i, j) = self.grid.split(s);
        if self.periodic {
            i + 1 < self.grid.count(0) && (self.grid.dim() == 1 || j + 1 < self.grid.count(1))
        } else {
            !self.grid.on_boundary(s)
        }
    }

    /// Copies image nodes from their periodic representatives.
    fn sync_images(&self, u: &mut [f64]) {
        if !self.periodic {
            return;
        }
        let (nx, ny) = (self.grid.count(0), self.grid.count(1));
        for j in 0..ny {
            u[self.grid.index(nx - 1, j)] = u[self.grid.index(0, j)];
        }
        if self.grid.dim() == 2 {
            for i in 0..nx {
                u[self.grid.index(i, ny - 1)] = u[self.grid.index(i, 0)];
            }
        }
    }

    /// Edge list per axis: `(lower node, upper node)` for every edge carrying an unknown update.
    fn edges(&self, axis: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for s in 0..self.grid.len() {
            if self.periodic && !self.is_free(s) {
                continue;
            }
            if let Some(t) = self.neighbor(s, axis, 1) {
                out.push((s, t));
            }
        }
        out
    }
}

/// `max over edges (|Du|^2 + s^2)^((p-2)/2) max(1, p-1)`; infinite at a vanishing
/// singular modulus.
pub fn max_diffusivity(u: &SpatialField, params: &FluxParams, periodic: bool) -> f64 {
    let st = Stencil { grid: &u.grid, periodic };
    let mut lam = 0.0f64;
    for axis in 0..u.grid.dim() {
        for (s, t) in st.edges(axis) {
            let g = st.edge_gradient(&u.values, s, t, axis);
            let w = g[0] * g[0] + g[1] * g[1] + params.s * params.s;
            let m = if w == 0.0 {
                if params.p < 2.0 {
                    f64::INFINITY
                } else {
                    params.modulus(0.0)
                }
            } else {
                w.powf(0.5 * (params.p - 2.0))
            };
            lam = lam.max(m);
        }
    }
    lam * params.stiffness()
}

/// Explicit stability limit `safety h^2 / (2 dim Lambda)`.
pub fn stable_dt(u: &SpatialField, params: &FluxParams, safety: f64, periodic: bool) -> f64 {
    let lam = max_diffusivity(u, params, periodic);
    let h = u.grid.h();
    if lam == 0.0 {
        f64::INFINITY
    } else {
        safety * h * h / (2.0 * u.grid.dim() as f64 * lam)
    }
}

fn apply_boundary(out: &mut [f64], grid: &SpatialGrid, t: f64, boundary: &Boundary) {
    if let Boundary::Dirichlet(f) = boundary {
        for (s, v) in out.iter_mut().enumerate() {
            if grid.on_boundary(s) {
                *v = f(&grid.coord(s), t);
            }
        }
    }
}

fn explicit_step(u: &SpatialField, dt: f64, params: &FluxParams, periodic: bool) -> Vec<f64> {
    let grid = &u.grid;
    let st = Stencil { grid, periodic };
    let h = grid.h();
    let mut out = u.values.clone();
    for axis in 0..grid.dim() {
        for (s, t) in st.edges(axis) {
            let g = st.edge_gradient(&u.values, s, t, axis);
            let f = params.modulus(g[0] * g[0] + g[1] * g[1]) * g[axis];
            out[s] += dt / h * f;
            out[t] -= dt / h * f;
        }
    }
    out
}

/// Solves `(I - dt D a D) v = rhs` on free nodes by conjugate gradients; `a` holds edge coefficients.
fn solve_frozen(
    st: &Stencil<'_>,
    edges: &[Vec<(usize, usize)>],
    coef: &[Vec<f64>],
    dt: f64,
    rhs: &[f64],
    fixed: &[f64],
) -> Result<Vec<f64>> {
    let n = rhs.len();
    let h2 = st.grid.h() * st.grid.h();
    let free: Vec<bool> = (0..n).map(|s| st.is_free(s)).collect();
    let apply = |v: &[f64], out: &mut [f64]| {
        out.copy_from_slice(v);
        for (axis_edges, axis_coef) in edges.iter().zip(coef) {
            for (&(s, t), &a) in axis_edges.iter().zip(axis_coef) {
                let flow = dt / h2 * a * (v[t] - v[s]);
                out[s] -= flow;
                out[t] += flow;
            }
        }
        for (o, &f) in out.iter_mut().zip(&free) {
            if !f {
                *o = 0.0;
            }
        }
    };
    // Lift the fixed values into the right-hand side.
    let mut lifted = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut b = rhs.to_vec();
    for s in 0..n {
        if !free[s] {
            lifted[s] = fixed[s];
        }
    }
    {
        // full operator on the lifted field, restricted to free rows
        tmp.copy_from_slice(&lifted);
        for (axis_edges, axis_coef) in edges.iter().zip(coef) {
            for (&(s, t), &a) in axis_edges.iter().zip(axis_coef) {
                let flow = dt / h2 * a * (lifted[t] - lifted[s]);
                tmp[s] -= flow;
                tmp[t] += flow;
            }
        }
    }
    for s in 0..n {
        b[s] = if free[s] { b[s] - tmp[s] } else { 0.0 };
    }
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut d = r.clone();
    let mut q = vec![0.0; n];
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut rr = bnorm * bnorm;
    let limit = 20 * n + 100;
    let mut iters = 0;
    while rr.sqrt() > 1e-14 * bnorm.max(1e-300) && iters < limit {
        apply(&d, &mut q);
        let dq: f64 = d.iter().zip(&q).map(|(a, b)| a * b).sum();
        if dq <= 0.0 {
            break;
        }
        let alpha = rr / dq;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * q[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            d[i] = r[i] + beta * d[i];
        }
        iters += 1;
    }
    if rr.sqrt() > 1e-9 * bnorm.max(1e-300) {
        return Err(Error::NonConvergence { iterations: iters, change: rr.sqrt() / bnorm.max(1e-300) });
    }
    for s in 0..n {
        x[s] += lifted[s];
    }
    Ok(x)
}

fn semi_implicit_step(
    u: &SpatialField,
    t_next: f64,
    dt: f64,
    params: &FluxParams,
    config: &SolveConfig,
    boundary: &Boundary,
) -> Result<Vec<f64>> {
    let grid = &u.grid;
    let st = Stencil { grid, periodic: boundary.periodic() };
    let edges: Vec<Vec<(usize, usize)>> = (0..grid.dim()).map(|a| st.edges(a)).collect();
    let mut fixed = u.values.clone();
    apply_boundary(&mut fixed, grid, t_next, boundary);
    let mut current = u.values.clone();
    for iteration in 1..=config.picard_max {
        let coef: Vec<Vec<f64>> = edges
            .iter()
            .enumerate()
            .map(|(axis, list)| {
                list.iter()
                    .map(|&(s, t)| {
                        let g = st.edge_gradient(&current, s, t, axis);
                        let w = g[0] * g[0] + g[1] * g[1] + params.s * params.s;
                        if w == 0.0 && params.p < 2.0 {
                            f64::INFINITY
                        } else {
                            params.modulus(g[0] * g[0] + g[1] * g[1])
                        }
                    })
                    .collect()
            })
            .collect();
        if coef.iter().flatten().any(|a| !a.is_finite()) {
            return Err(invalid("frozen coefficient is unbounded; use s > 0"));
        }
        let mut next = solve_frozen(&st, &edges, &coef, dt, &u.values, &fixed)?;
        st.sync_images(&mut next);
        let change = next.iter().zip(&current).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        current = next;
        if change / scale <= config.picard_tol {
            return Ok(current);
        }
        if iteration == config.picard_max {
            return Err(Error::NonConvergence { iterations: iteration, change: change / scale });
        }
    }
    Ok(current)
}

/// Advances one time level from `t` to `t + dt`.
pub fn step(
    u: &SpatialField,
    t: f64,
    dt: f64,
    params: &FluxParams,
    config: &SolveConfig,
    boundary: &Boundary,
) -> Result<SpatialField> {
    if u.grid.dim() != params.dim {
        return Err(Error::DimensionMismatch { expected: params.dim, got: u.grid.dim() });
    }
    if !(dt > 0.0) {
        return Err(invalid(format!("time step {dt} must be positive")));
    }
    let periodic = boundary.periodic();
    let mut values = match config.scheme {
        Scheme::Explicit => {
            let limit = stable_dt(u, params, config.cfl_safety, periodic);
            if dt > limit * (1.0 + 1e-12) {
                return Err(Error::CflViolation { dt, limit });
            }
            explicit_step(u, dt, params, periodic)
        }
        Scheme::SemiImplicit => semi_implicit_step(u, t + dt, dt, params, config, boundary)?,
    };
    let st = Stencil { grid: &u.grid, periodic };
    st.sync_images(&mut values);
    apply_boundary(&mut values, &u.grid, t + dt, boundary);
    SpatialField::new(u.grid.clone(), values)
}

/// Provenance written next to solver output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub params: FluxParams,
    pub config: SolveConfig,
    pub boundary: String,
    pub grid: SpaceTimeGrid,
    pub steps: usize,
    pub smallest_dt: f64,
    pub largest_dt: f64,
    /// Smallest ratio of the explicit limit to the step actually taken.
    pub cfl_margin: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub field: GridFunction,
    pub manifest: RunManifest,
}

/// Integrates from `t0` and records `records` levels spaced by `record_dt` (the first is the
/// initial data). Steps shrink adaptively to respect the explicit limit.
pub fn run(
    initial: &SpatialField,
    t0: f64,
    record_dt: f64,
    records: usize,
    params: &FluxParams,
    config: &SolveConfig,
    boundary: &Boundary,
) -> Result<Run> {
    let started = Instant::now();
    let grid = SpaceTimeGrid::new(initial.grid.clone(), record_dt, t0, records)?;
    let periodic = boundary.periodic();
    let mass = |f: &SpatialField| {
        let st = Stencil { grid: &f.grid, periodic };
        let total: f64 = (0..f.values.len()).filter(|&s| !periodic || st.is_free(s)).map(|s| f.values[s]).sum();
        total * f.grid.cell_volume()
    };
    let mut levels = vec![initial.clone()];
    let mut u = initial.clone();
    let mut t = t0;
    let (mut steps, mut dt_min, mut dt_max, mut margin) = (0usize, f64::INFINITY, 0.0f64, f64::INFINITY);
    for k in 1..records {
        let target = grid.time(k);
        while target - t > 1e-12 * record_dt {
            let limit = stable_dt(&u, params, config.cfl_safety, periodic);
            let cap = match config.scheme {
                Scheme::Explicit => limit,
                Scheme::SemiImplicit => config.max_dt.min(record_dt),
            };
            if !(cap > 0.0) || !cap.is_finite() && config.scheme == Scheme::Explicit {
                return Err(Error::CflViolation { dt: target - t, limit: cap });
            }
            let remaining = target - t;
            // split the remaining window evenly to avoid a tiny final step
            let pieces = (remaining / cap).ceil().max(1.0);
            let dt = remaining / pieces;
            u = step(&u, t, dt, params, config, boundary)?;
            t = if pieces == 1.0 { target } else { t + dt };
            steps += 1;
            dt_min = dt_min.min(dt);
            dt_max = dt_max.max(dt);
            margin = margin.min(limit / (dt / config.cfl_safety));
            if steps > 50_000_000 {
                return Err(Error::NonConvergence { iterations: steps, change: remaining });
            }
        }
        levels.push(u.clone());
    }
    let field = GridFunction::from_levels(grid.clone(), &levels)?;
    let manifest = RunManifest {
        params: *params,
        config: *config,
        boundary: boundary.kind().to_string(),
        grid,
        steps,
        smallest_dt: dt_min,
        largest_dt: dt_max,
        cfl_margin: margin,
        initial_mass: mass(initial),
        final_mass: mass(&u),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(Run { field, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn line(h: f64) -> SpatialGrid {
        SpatialGrid::new(h, &[(-1.0, 1.0)]).unwrap()
    }

    #[test]
    fn periodic_sine_decays_like_heat() {
        let g = line(1.0 / 32.0);
        let u = SpatialField::from_fn(&g, |x| (PI * x[0]).sin());
        let prm = FluxParams::new(2.0, 0.0, 1).unwrap();
        let dt = 1e-4;
        let next = step(&u, 0.0, dt, &prm, &SolveConfig::default(), &Boundary::Periodic).unwrap();
        let decay = (-PI * PI * dt).exp();
        let err = next.values.iter().enumerate().fold(0.0f64, |m, (s, v)| m.max((v - decay * u.values[s]).abs()));
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = line(0.1);
        let u = SpatialField::from_fn(&g, |x| x[0] * x[0]);
        let prm = FluxParams::new(2.0, 0.0, 1).unwrap();
        let r = step(&u, 0.0, 0.1, &prm, &SolveConfig::default(), &Boundary::Periodic);
        assert!(matches!(r, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn periodic_mass_is_conserved() {
        let g = SpatialGrid::new(0.1, &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let u = SpatialField::from_fn(&g, |x| 1.0 + (PI * x[0]).sin() * (PI * x[1]).cos() + 0.3 * x[0].cos());
        for p in [1.7, 2.0, 3.0] {
            let prm = FluxParams::new(p, 0.1, 2).unwrap();
            let r = run(&u, 0.0, 0.01, 4, &prm, &SolveConfig::default(), &Boundary::Periodic).unwrap();
            let m = &r.manifest;
            assert!((m.final_mass - m.initial_mass).abs() < 1e-12 * m.initial_mass.abs(), "p = {p}: {m:?}");
        }
    }

    #[test]
    fn semi_implicit_matches_explicit_for_heat() {
        let g = line(1.0 / 32.0);
        let u = SpatialField::from_fn(&g, |x| (PI * x[0]).sin());
        let prm = FluxParams::new(2.0, 0.0, 1).unwrap();
        let cfg = SolveConfig { scheme: Scheme::SemiImplicit, max_dt: 1e-4, ..Default::default() };
        let r = run(&u, 0.0, 0.01, 2, &prm, &cfg, &Boundary::Periodic).unwrap();
        let decay = (-PI * PI * 0.01).exp();
        let last = r.field.level(1);
        let err = last.iter().enumerate().fold(0.0f64, |m, (s, v)| m.max((v - decay * u.values[s]).abs()));
        assert!(err < 5e-4, "{err}");
    }

    #[test]
    fn semi_implicit_converges_for_degenerate_flux() {
        let g = SpatialGrid::new(0.1, &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let u = SpatialField::from_fn(&g, |x| (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]));
        let prm = FluxParams::new(3.0, 0.0, 2).unwrap();
        let cfg = SolveConfig { scheme: Scheme::SemiImplicit, max_dt: 2e-3, ..Default::default() };
        let r = run(&u, 0.0, 0.01, 3, &prm, &cfg, &Boundary::dirichlet(|_, _| 0.0)).unwrap();
        assert!(r.field.max() <= 1.0 + 1e-12 && r.field.min() >= -1e-12);
    }

    #[test]
    fn dirichlet_faces_follow_data() {
        let g = line(0.05);
        let u = SpatialField::from_fn(&g, |x| x[0]);
        let prm = FluxParams::new(3.0, 0.0, 1).unwrap();
        let next = step(&u, 0.0, 1e-4, &prm, &SolveConfig::default(), &Boundary::dirichlet(|x, t| x[0] + t)).unwrap();
        assert_eq!(next.values[0], -1.0 + 1e-4);
        assert_eq!(*next.values.last().unwrap(), 1.0 + 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn comparison_principle(p in 2.0f64..4.0, seed in 0u64..1000, lift in 0.0f64..0.5) {
            let g = line(0.1);
            let mut rng = crate::rng::CounterRng::new(seed, 9);
            let base: Vec<f64> = (0..g.len()).map(|_| rng.range(-1.0, 1.0)).collect();
            let bumps: Vec<f64> = (0..g.len()).map(|_| rng.range(0.0, lift)).collect();
            let lo = SpatialField::new(g.clone(), base.clone()).unwrap();
            let hi = SpatialField::new(g.clone(), base.iter().zip(&bumps).map(|(a, b)| a + b).collect()).unwrap();
            let prm = FluxParams::new(p, 0.0, 1).unwrap();
            let dt = stable_dt(&lo, &prm, 1.0, false).min(stable_dt(&hi, &prm, 1.0, false));
            let cfg = SolveConfig { cfl_safety: 1.0, ..Default::default() };
            let bd = Boundary::dirichlet(|_, _| 0.0);
            let a = step(&lo, 0.0, dt, &prm, &cfg, &bd).unwrap();
            let b = step(&hi, 0.0, dt, &prm, &cfg, &bd).unwrap();
            for s in 1..g.len() - 1 {
                prop_assert!(a.values[s] <= b.values[s] + 1e-12);
            }
        }
    }
}
