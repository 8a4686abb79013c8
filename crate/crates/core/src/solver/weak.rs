use crate::error::{invalid, Error, Result};
use crate::mesh::{axis_derivative, GridFunction, SpaceTimeGrid};

use super::flux::FluxParams;

/// Forward Steklov average `(1/h) int_t^{t+h} u` by the trapezoid rule; zero on levels
/// whose window leaves the grid. `h` must be a whole number of time steps.
pub fn steklov_average(u: &GridFunction, h: f64) -> Result<GridFunction> {
    let grid = u.grid();
    let lag = lag_steps(grid, h)?;
    let mut out = GridFunction::zeros(grid);
    let n = grid.level_len();
    for k in 0..grid.levels() {
        if k + lag >= grid.levels() {
            break;
        }
        let dst = out.level_mut(k);
        for (m, w) in trapezoid_weights(lag) {
            let src = u.level(k + m);
            for s in 0..n {
                dst[s] += w * src[s];
            }
        }
    }
    Ok(out)
}

fn lag_steps(grid: &SpaceTimeGrid, h: f64) -> Result<usize> {
    let lag = (h / grid.dt()).round();
    if !(h > 0.0) || lag < 1.0 || (lag - h / grid.dt()).abs() > 1e-8 * lag {
        return Err(invalid(format!("lag {h} must be a positive multiple of dt = {}", grid.dt())));
    }
    Ok(lag as usize)
}

fn trapezoid_weights(lag: usize) -> impl Iterator<Item = (usize, f64)> {
    (0..=lag).map(move |m| {
        let w = if m == 0 || m == lag { 0.5 } else { 1.0 };
        (m, w / lag as f64)
    })
}

/// Largest `|R_k|` over admissible levels, where
/// `R_k = sum_x [ d_t [u]_h phi + <[A(Du)]_h, D phi> ] h^N` and `phi` vanishes near the faces.
pub fn residual_weak(u: &GridFunction, params: &FluxParams, test_fn: &GridFunction, h_lag: f64) -> Result<f64> {
    let grid = u.grid();
    if test_fn.grid() != grid {
        return Err(invalid("test function lives on a different grid"));
    }
    if grid.dim() != params.dim {
        return Err(Error::DimensionMismatch { expected: params.dim, got: grid.dim() });
    }
    let sp = grid.space();
    for k in 0..grid.levels() {
        let phi = test_fn.level(k);
        if (0..sp.len()).any(|s| sp.depth(s) < 2 && phi[s] != 0.0) {
            return Err(Error::BoundaryTrace(phi.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
        }
    }
    let lag = lag_steps(grid, h_lag)?;
    let dim = grid.dim();
    // nodal flux A(Du), one component per axis
    let mut flux_parts: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); dim];
    for k in 0..grid.levels() {
        let lvl = u.level(k);
        for s in 0..sp.len() {
            let mut g = [0.0; 2];
            for (a, ga) in g.iter_mut().enumerate().take(dim) {
                *ga = axis_derivative(sp, lvl, a, s);
            }
            let m = params.modulus(g[0] * g[0] + g[1] * g[1]);
            for a in 0..dim {
                flux_parts[a].push(m * g[a]);
            }
        }
    }
    let flux_avg: Vec<GridFunction> = flux_parts
        .into_iter()
        .map(|v| GridFunction::new(grid.clone(), v).and_then(|f| steklov_average(&f, h_lag)))
        .collect::<Result<_>>()?;
    let u_avg = steklov_average(u, h_lag)?;
    let vol = sp.cell_volume();
    let mut worst = 0.0f64;
    for k in 0..grid.levels().saturating_sub(lag + 1) {
        let phi = test_fn.level(k);
        let (now, next) = (u_avg.level(k), u_avg.level(k + 1));
        let mut r = 0.0;
        for s in 0..sp.len() {
            if phi[s] == 0.0 && (0..dim).all(|a| axis_derivative(sp, phi, a, s) == 0.0) {
                continue;
            }
            let mut term = (next[s] - now[s]) / grid.dt() * phi[s];
            for (a, fa) in flux_avg.iter().enumerate() {
                term += fa.level(k)[s] * axis_derivative(sp, phi, a, s);
            }
            r += term;
        }
        worst = worst.max((r * vol).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpatialGrid;
    use crate::solver::oracle::Exact;

    fn grid(h: f64, dt: f64, t0: f64, t1: f64) -> SpaceTimeGrid {
        SpaceTimeGrid::covering(SpatialGrid::new(h, &[(-1.5, 1.5)]).unwrap(), dt, t0, t1).unwrap()
    }

    #[test]
    fn steklov_of_linear_time() {
        let g = grid(0.5, 0.1, 0.0, 1.0);
        let u = GridFunction::from_fn(&g, |_, t| t);
        let avg = steklov_average(&u, 0.3).unwrap();
        for k in 0..g.levels() {
            let want = if k + 3 < g.levels() { g.time(k) + 0.15 } else { 0.0 };
            assert!((avg.level(k)[0] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn steklov_single_step_is_pair_mean() {
        let g = grid(0.5, 0.1, 0.0, 0.3);
        let u = GridFunction::from_fn(&g, |x, t| x[0] + t * t);
        let avg = steklov_average(&u, 0.1).unwrap();
        assert!((avg.level(1)[2] - 0.5 * (u.level(1)[2] + u.level(2)[2])).abs() < 1e-15);
    }

    fn bump(g: &SpaceTimeGrid, r: f64) -> GridFunction {
        GridFunction::from_fn(g, |x, _| {
            let y = x[0] / r;
            if y.abs() < 1.0 {
                (1.0 - y * y).powi(3)
            } else {
                0.0
            }
        })
    }

    fn residual_for(e: &Exact, h: f64) -> f64 {
        let g = grid(h, h * h / 8.0, 1.0, 1.0 + 64.0 * h * h / 8.0);
        let u = e.sample(&g).unwrap();
        let prm = FluxParams::new(e.p(), 0.0, 1).unwrap();
        residual_weak(&u, &prm, &bump(&g, 0.6), g.dt()).unwrap()
    }

    #[test]
    fn exact_solutions_have_vanishing_residual() {
        for e in [
            Exact::heat(1, 1.0).unwrap(),
            Exact::barenblatt(1, 3.0, 1.0).unwrap(),
            Exact::fast_barenblatt(1, 1.6, 1.0).unwrap(),
        ] {
            let r1 = residual_for(&e, 1.0 / 32.0);
            let r2 = residual_for(&e, 1.0 / 64.0);
            assert!(r2 < 0.5 * r1 && r2 < 1e-3, "{e:?}: {r1} -> {r2}");
        }
    }

    #[test]
    fn perturbed_profile_has_residual() {
        let g = grid(1.0 / 64.0, 1.0 / 32768.0, 1.0, 1.0 + 64.0 / 32768.0);
        let e = Exact::barenblatt(1, 3.0, 1.0).unwrap();
        let u = GridFunction::from_fn(&g, |x, t| e.value(x, t) * (1.0 + 0.2 * (t - 1.0) * 100.0));
        let prm = FluxParams::new(3.0, 0.0, 1).unwrap();
        assert!(residual_weak(&u, &prm, &bump(&g, 0.6), g.dt()).unwrap() > 1e-2);
    }

    #[test]
    fn test_function_must_vanish_at_faces() {
        let g = grid(0.1, 0.01, 1.0, 1.1);
        let u = GridFunction::from_fn(&g, |_, _| 0.0);
        let phi = GridFunction::from_fn(&g, |_, _| 1.0);
        let prm = FluxParams::new(2.0, 0.0, 1).unwrap();
        assert!(matches!(residual_weak(&u, &prm, &phi, 0.01), Err(Error::BoundaryTrace(_))));
    }
}
