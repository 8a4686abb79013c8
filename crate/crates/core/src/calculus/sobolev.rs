use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{axis_derivative, discrete_gradient, Cylinder, GridFunction};

fn lateral_trace(v: &GridFunction) -> f64 {
    let grid = v.grid();
    let sp = grid.space();
    let mut worst = 0.0f64;
    for k in 0..grid.levels() {
        let lvl = v.level(k);
        for s in 0..sp.len() {
            if sp.on_boundary(s) {
                worst = worst.max(lvl[s].abs());
            }
        }
    }
    worst
}

fn require_zero_trace(v: &GridFunction) -> Result<()> {
    let trace = lateral_trace(v);
    let scale = v.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if trace > 1e-12 * scale.max(1e-300) {
        return Err(Error::BoundaryTrace(trace));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ratio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl Ratio {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, ratio: if rhs > 0.0 { lhs / rhs } else { f64::INFINITY } }
    }
}

/// `iint |v|^q / ((sup_t int v^2)^(p/N) iint |Dv|^p)` with `q = p (N+2)/N`, over the whole grid.
pub fn sobolev_embedding_ratio(v: &GridFunction, p_tilde: f64) -> Result<Ratio> {
    if !(p_tilde >= 1.0) {
        return Err(invalid(format!("exponent {p_tilde} must be at least 1")));
    }
    require_zero_trace(v)?;
    let grid = v.grid();
    let n = grid.dim() as f64;
    let q = p_tilde * (n + 2.0) / n;
    let dz = grid.node_volume();
    let lhs = v.values().iter().map(|x| x.abs().powf(q)).sum::<f64>() * dz;
    let sup_l2 = (0..grid.levels())
        .map(|k| v.level(k).iter().map(|x| x * x).sum::<f64>() * grid.space().cell_volume())
        .fold(0.0f64, f64::max);
    let grad = discrete_gradient(v).magnitude();
    let grad_p = grad.values().iter().map(|g| g.powf(p_tilde)).sum::<f64>() * dz;
    Ok(Ratio::new(lhs, sup_l2.powf(p_tilde / n) * grad_p))
}

/// `||v||_s^s / (|{|v| > 0}|^(s/(N+s)) ||v||_{V^s}^s)`, where
/// `||v||_{V^s} = sup_t ||v(t)||_s + ||Dv||_s`.
pub fn sobolev_poincare_ratio(v: &GridFunction, s: f64) -> Result<Ratio> {
    if !(s > 1.0) {
        return Err(invalid(format!("exponent {s} must exceed 1")));
    }
    require_zero_trace(v)?;
    let grid = v.grid();
    let n = grid.dim() as f64;
    let dz = grid.node_volume();
    let lhs = v.values().iter().map(|x| x.abs().powf(s)).sum::<f64>() * dz;
    let support = v.values().iter().filter(|x| **x != 0.0).count() as f64 * dz;
    let sup_slice = (0..grid.levels())
        .map(|k| (v.level(k).iter().map(|x| x.abs().powf(s)).sum::<f64>() * grid.space().cell_volume()).powf(1.0 / s))
        .fold(0.0f64, f64::max);
    let grad = discrete_gradient(v).magnitude();
    let grad_norm = (grad.values().iter().map(|g| g.powf(s)).sum::<f64>() * dz).powf(1.0 / s);
    let norm = sup_slice + grad_norm;
    Ok(Ratio::new(lhs, support.powf(s / (n + s)) * norm.powf(s)))
}

/// `(l - k) |B cap {v > l}|` against `rho^(N+1) / |B cap {v <= k}| int_{B cap {k < v < l}} |Dv|`
/// on the ball of `cyl` at time level `level`.
pub fn levelset_poincare(v: &GridFunction, level: usize, ball: &Cylinder, k: f64, l: f64) -> Result<Ratio> {
    if !(l > k) {
        return Err(invalid("levels must satisfy k < l"));
    }
    let grid = v.grid();
    if level >= grid.levels() {
        return Err(Error::OffGrid);
    }
    let sp = grid.space();
    let nodes = ball.nodes(grid)?;
    let lvl = v.level(level);
    let vol = sp.cell_volume();
    let (mut above, mut below, mut band) = (0usize, 0usize, 0.0);
    for &s in &nodes.space {
        let x = lvl[s];
        if x > l {
            above += 1;
        }
        if x <= k {
            below += 1;
        }
        if k < x && x < l {
            let g: f64 = (0..sp.dim()).map(|a| axis_derivative(sp, lvl, a, s).powi(2)).sum();
            band += g.sqrt();
        }
    }
    let lhs = (l - k) * above as f64 * vol;
    let rhs = if below == 0 {
        f64::INFINITY
    } else {
        ball.radius.powi(sp.dim() as i32 + 1) / (below as f64 * vol) * band * vol
    };
    Ok(Ratio::new(lhs, rhs))
}
