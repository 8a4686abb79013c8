use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{GridFunction, SpaceTimeGrid, SpatialField, SpatialGrid};
use crate::solver::{run, Boundary, Exact, FluxParams, SolveConfig};

/// One closed-form solution and the time window it is used on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub exact: Exact,
    pub t0: f64,
    pub t1: f64,
    /// Half-width of the square computational domain.
    pub extent: f64,
}

impl OracleCase {
    pub fn name(&self) -> String {
        let kind = match self.exact {
            Exact::Heat { .. } => "heat",
            Exact::Barenblatt { .. } => "barenblatt",
            Exact::FastBarenblatt { .. } => "fast_barenblatt",
        };
        format!("{kind}_p{}_n{}", self.exact.p(), self.exact.dim())
    }

    pub fn p(&self) -> f64 {
        self.exact.p()
    }

    pub fn dim(&self) -> usize {
        self.exact.dim()
    }

    pub fn spatial_grid(&self, h: f64) -> Result<SpatialGrid> {
        let e = self.extent;
        SpatialGrid::new(h, &vec![(-e, e); self.dim()])
    }

    /// Exact values on a grid with `levels` time levels spanning the window.
    pub fn sample(&self, h: f64, levels: usize) -> Result<GridFunction> {
        let dt = (self.t1 - self.t0) / (levels - 1) as f64;
        let grid = SpaceTimeGrid::new(self.spatial_grid(h)?, dt, self.t0, levels)?;
        self.exact.sample(&grid)
    }
}

/// Radius where the profile at `t` falls to half its central value, by bisection.
pub fn half_max_radius(exact: &Exact, t: f64) -> f64 {
    let peak = exact.value(&[0.0, 0.0], t);
    let (mut lo, mut hi) = (0.0, 1.0);
    while exact.value(&[hi, 0.0], t) > 0.5 * peak {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if exact.value(&[mid, 0.0], t) > 0.5 * peak {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Half-max radius at the start of every oracle window.
pub const ORACLE_WIDTH: f64 = 0.25;

/// Largest gradient magnitude at the start of every oracle window.
pub const ORACLE_GRADIENT: f64 = 2.0;

fn with_mass(p: f64, dim: usize, mass: f64) -> Result<Exact> {
    if p == 2.0 {
        Exact::heat(dim, mass)
    } else if p > 2.0 {
        Exact::barenblatt(dim, p, mass)
    } else {
        Exact::fast_barenblatt(dim, p, mass)
    }
}

/// Largest `|Du(., t)|` along a ray, sampled finely enough for the smooth profiles here.
pub fn radial_gradient_sup(exact: &Exact, t: f64, reach: f64) -> f64 {
    (0..=4000).map(|i| exact.gradient(&[reach * i as f64 / 4000.0, 0.0], t)[0].abs()).fold(0.0, f64::max)
}

/// The closed-form solution for exponent `p`: heat kernel at 2, Barenblatt above, its
/// fast-diffusion analogue below. All three are self-similar, so every window is
/// `[t0, 2 t0]` with `t0` fixed by the half-max radius, and the mass is chosen so that the
/// gradient peaks at [`ORACLE_GRADIENT`] at `t0`. Profiles then look alike across `p`, and
/// intrinsic and standard cylinders have comparable sizes.
pub fn oracle(p: f64, dim: usize) -> Result<OracleCase> {
    let unit = with_mass(p, dim, 1.0)?;
    let beta = 1.0 / (dim as f64 * (p - 2.0) + p);
    let t_unit = (ORACLE_WIDTH / half_max_radius(&unit, 1.0)).powf(1.0 / beta);
    // u_M(x, t) = M u_1(x, M^{p-2} t) has mass M and the same shape at M^{2-p} t.
    let mass = ORACLE_GRADIENT / radial_gradient_sup(&unit, t_unit, 4.0 * ORACLE_WIDTH);
    let exact = with_mass(p, dim, mass)?;
    let t0 = t_unit * mass.powf(2.0 - p);
    Ok(OracleCase { exact, t0, t1: 2.0 * t0, extent: 1.0 })
}

/// Oracle cases for each listed exponent.
pub fn oracle_corpus(ps: &[f64], dim: usize) -> Result<Vec<OracleCase>> {
    if ps.is_empty() {
        return Err(Error::Precondition("empty corpus".into()));
    }
    ps.iter().map(|&p| oracle(p, dim)).collect()
}

/// Discrete solution started from the exact data at `t0`, with exact Dirichlet values on the
/// faces, recorded at `levels` equally spaced times up to `t1`.
pub fn solve_case(case: &OracleCase, h: f64, levels: usize) -> Result<GridFunction> {
    let grid = case.spatial_grid(h)?;
    let exact = case.exact;
    let initial = SpatialField::from_fn(&grid, |x| exact.value(x, case.t0));
    let params = FluxParams::new(case.p(), 0.0, case.dim())?;
    let boundary = Boundary::dirichlet(move |x, t| exact.value(x, t));
    let dt = (case.t1 - case.t0) / (levels - 1) as f64;
    Ok(run(&initial, case.t0, dt, levels, &params, &SolveConfig::default(), &boundary)?.field)
}

/// Max-norm error on the spatial ball `|x| <= radius` over every recorded level.
pub fn interior_error(u: &GridFunction, exact: &Exact, radius: f64) -> f64 {
    let grid = u.grid();
    let mut worst = 0.0f64;
    for node in 0..grid.len() {
        let z = grid.point(node);
        if z.x[0].hypot(z.x[1]) <= radius {
            worst = worst.max((u.at(node) - exact.value(&z.x, z.t)).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub case: String,
    pub spacings: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log2(e_h / e_{h/2})` for consecutive spacings.
    pub orders: Vec<f64>,
}

impl Convergence {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Interior max-norm errors of the explicit scheme on successively halved spacings.
pub fn convergence_study(case: &OracleCase, spacings: &[f64], levels: usize, radius: f64) -> Result<Convergence> {
    let errors = spacings
        .iter()
        .map(|&h| Ok(interior_error(&solve_case(case, h, levels)?, &case.exact, radius)))
        .collect::<Result<Vec<_>>>()?;
    let orders = errors.windows(2).zip(spacings.windows(2)).map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect();
    Ok(Convergence { case: case.name(), spacings: spacings.to_vec(), errors, orders })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supports_stay_inside() {
        for dim in [1, 2] {
            let c = oracle(3.0, dim).unwrap();
            assert!((half_max_radius(&c.exact, c.t0) - ORACLE_WIDTH).abs() < 1e-9);
            assert!(c.exact.support_radius(c.t1) < 0.8);
            let heat = oracle(2.0, dim).unwrap();
            assert!((heat.t0 - ORACLE_WIDTH.powi(2) / (4.0 * 2f64.ln())).abs() < 1e-12);
            for p in [1.5, 2.0, 3.0] {
                let c = oracle(p, dim).unwrap();
                assert!((half_max_radius(&c.exact, c.t0) - ORACLE_WIDTH).abs() < 1e-6);
                assert!((radial_gradient_sup(&c.exact, c.t0, 1.0) - ORACLE_GRADIENT).abs() < 1e-6);
            }
        }
        assert!(oracle_corpus(&[], 1).is_err());
    }

    #[test]
    fn coarse_heat_run_tracks_the_kernel() {
        let c = oracle(2.0, 1).unwrap();
        let conv = convergence_study(&c, &[1.0 / 16.0, 1.0 / 32.0], 5, 0.5).unwrap();
        assert!(conv.errors[1] < conv.errors[0] && conv.min_order() > 1.0, "{conv:?}");
    }
}
