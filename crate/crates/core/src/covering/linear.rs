use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{GridFunction, SpaceTimeGrid};

use super::derivative::unit_cylinder;

/// One `N x N` coefficient matrix per node (stored as 2 x 2; unused entries are zero).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: SpaceTimeGrid,
    entries: Vec<[[f64; 2]; 2]>,
}

impl MatrixField {
    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(&[f64; 2], f64) -> [[f64; 2]; 2]) -> Result<Self> {
        let sp = grid.space();
        let mut entries = Vec::with_capacity(grid.len());
        for k in 0..grid.levels() {
            let t = grid.time(k);
            for s in 0..sp.len() {
                let mut b = f(&sp.coord(s), t);
                if grid.dim() == 1 {
                    b = [[b[0][0], 0.0], [0.0, 0.0]];
                }
                if b.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(entries.len()));
                }
                entries.push(b);
            }
        }
        Ok(Self { grid: grid.clone(), entries })
    }

    pub fn identity(grid: &SpaceTimeGrid) -> Result<Self> {
        Self::from_fn(grid, |_, _| [[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn at(&self, node: usize) -> [[f64; 2]; 2] {
        self.entries[node]
    }

    /// Smallest eigenvalue of the symmetric part and largest spectral norm over all nodes.
    pub fn ellipticity(&self) -> (f64, f64) {
        let dim = self.grid.dim();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for b in &self.entries {
            if dim == 1 {
                lo = lo.min(b[0][0]);
                hi = hi.max(b[0][0].abs());
                continue;
            }
            let (a, c, d) = (b[0][0], 0.5 * (b[0][1] + b[1][0]), b[1][1]);
            let disc = ((a - d) * (a - d) / 4.0 + c * c).sqrt();
            lo = lo.min((a + d) / 2.0 - disc);
            // Spectral norm from the eigenvalues of B^T B.
            let m = [
                b[0][0] * b[0][0] + b[1][0] * b[1][0],
                b[0][0] * b[0][1] + b[1][0] * b[1][1],
                b[0][1] * b[0][1] + b[1][1] * b[1][1],
            ];
            let top = (m[0] + m[2]) / 2.0 + (((m[0] - m[2]) / 2.0).powi(2) + m[1] * m[1]).sqrt();
            hi = hi.max(top.sqrt());
        }
        (lo, hi)
    }

    /// `Err(Hypothesis)` unless `c_lo |z|^2 <= <Bz, z>` and `|B| <= c_hi` everywhere.
    pub fn check_ellipticity(&self, c_lo: f64, c_hi: f64) -> Result<()> {
        let (lo, hi) = self.ellipticity();
        if lo < c_lo || hi > c_hi {
            return Err(Error::Hypothesis(format!("ellipticity range [{lo}, {hi}] outside [{c_lo}, {c_hi}]")));
        }
        Ok(())
    }
}

/// Explicit flux-form scheme for `v_t = div(B Dv)` on the matrix field's grid. The first
/// level and the boundary nodes are taken from `data`.
pub fn linear_solve(b: &MatrixField, data: impl Fn(&[f64; 2], f64) -> f64) -> Result<GridFunction> {
    let grid = b.grid();
    let sp = grid.space();
    let (h, dt, dim) = (sp.h(), grid.dt(), grid.dim());
    let (_, c_hi) = b.ellipticity();
    // Half the isotropic limit leaves room for the cross terms.
    let limit = h * h / (4.0 * dim as f64 * c_hi.max(f64::MIN_POSITIVE));
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    let (nx, ny) = (sp.count(0), sp.count(1));
    let mut values = Vec::with_capacity(grid.len());
    let mut cur: Vec<f64> = (0..sp.len()).map(|s| data(&sp.coord(s), grid.time(0))).collect();
    values.extend_from_slice(&cur);
    let dy = |v: &[f64], i: usize, j: usize| (v[sp.index(i, j + 1)] - v[sp.index(i, j - 1)]) / (2.0 * h);
    let dx = |v: &[f64], i: usize, j: usize| (v[sp.index(i + 1, j)] - v[sp.index(i - 1, j)]) / (2.0 * h);
    for k in 1..grid.levels() {
        let t = grid.time(k);
        let base = (k - 1) * sp.len();
        let coef = |s: usize| b.at(base + s);
        let mut next = cur.clone();
        for s in 0..sp.len() {
            if sp.on_boundary(s) {
                next[s] = data(&sp.coord(s), t);
                continue;
            }
            let (i, j) = sp.split(s);
            let face = |a: usize, c: usize, r: usize, q: usize| 0.5 * (coef(a)[r][q] + coef(c)[r][q]);
            let (e, w) = (sp.index(i + 1, j), sp.index(i - 1, j));
            // x faces: B11 dv/dx + B12 dv/dy with the cross derivative averaged onto the face.
            let mut fe = face(s, e, 0, 0) * (cur[e] - cur[s]) / h;
            let mut fw = face(w, s, 0, 0) * (cur[s] - cur[w]) / h;
            let mut div = 0.0;
            if dim == 2 {
                let (n, so) = (sp.index(i, j + 1), sp.index(i, j - 1));
                let cross_e = if i + 1 < nx - 1 { 0.5 * (dy(&cur, i, j) + dy(&cur, i + 1, j)) } else { dy(&cur, i, j) };
                let cross_w = if i > 1 { 0.5 * (dy(&cur, i, j) + dy(&cur, i - 1, j)) } else { dy(&cur, i, j) };
                fe += face(s, e, 0, 1) * cross_e;
                fw += face(w, s, 0, 1) * cross_w;
                let cross_n = if j + 1 < ny - 1 { 0.5 * (dx(&cur, i, j) + dx(&cur, i, j + 1)) } else { dx(&cur, i, j) };
                let cross_s = if j > 1 { 0.5 * (dx(&cur, i, j) + dx(&cur, i, j - 1)) } else { dx(&cur, i, j) };
                let fn_ = face(s, n, 1, 1) * (cur[n] - cur[s]) / h + face(s, n, 1, 0) * cross_n;
                let fs = face(so, s, 1, 1) * (cur[s] - cur[so]) / h + face(so, s, 1, 0) * cross_s;
                div += (fn_ - fs) / h;
            }
            div += (fe - fw) / h;
            next[s] = cur[s] + dt * div;
        }
        cur = next;
        values.extend_from_slice(&cur);
    }
    GridFunction::new(grid.clone(), values)
}

/// Spot check of the imported linear estimates on `Q1 = B1 x (-1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDecay {
    /// `sup_{Q_{1/2}} |v| / (mean_{Q1} |v|^q)^{1/q}`.
    pub harnack_ratio: f64,
    /// `(mean_{Q_delta} |v - (v)|^q)^{1/q} / (mean_{Q1} |v - (v)|^q)^{1/q}`; `None` when
    /// the denominator vanishes.
    pub decay_ratio: Option<f64>,
    /// `log(decay_ratio) / log(delta)`, the exponent a single step certifies.
    pub beta: Option<f64>,
    pub ellipticity: (f64, f64),
}

fn mean_power(v: &GridFunction, nodes: &[usize], shift: f64, q: f64) -> f64 {
    (nodes.iter().map(|&n| (v.at(n) - shift).abs().powf(q)).sum::<f64>() / nodes.len() as f64).powf(1.0 / q)
}

/// Harnack and oscillation ratios of `v` after checking `B` against `[c_lo, c_hi]`.
pub fn linear_decay_check(b: &MatrixField, v: &GridFunction, delta: f64, q: f64, c_lo: f64, c_hi: f64) -> Result<LinearDecay> {
    if !(delta > 0.0 && delta < 1.0 && (1.0..=2.0).contains(&q)) {
        return Err(invalid(format!("need delta in (0, 1) and q in [1, 2] (delta = {delta}, q = {q})")));
    }
    if b.grid() != v.grid() {
        return Err(Error::InvalidGrid("coefficients and solution on different grids".into()));
    }
    b.check_ellipticity(c_lo, c_hi)?;
    let grid = v.grid();
    let nodes = |rho: f64| -> Result<Vec<usize>> {
        let n = unit_cylinder(rho)?.nodes(grid)?.to_vec();
        if n.is_empty() {
            return Err(Error::Precondition(format!("Q_{rho} holds no nodes")));
        }
        Ok(n)
    };
    let (q1, half, small) = (nodes(1.0)?, nodes(0.5)?, nodes(delta)?);
    let sup_half = half.iter().map(|&n| v.at(n).abs()).fold(0.0, f64::max);
    let base = mean_power(v, &q1, 0.0, q);
    let harnack_ratio = if base > 0.0 { sup_half / base } else { 0.0 };
    let avg = |ns: &[usize]| ns.iter().map(|&n| v.at(n)).sum::<f64>() / ns.len() as f64;
    let osc1 = mean_power(v, &q1, avg(&q1), q);
    let osc_d = mean_power(v, &small, avg(&small), q);
    let decay_ratio = (osc1 > 1e-14 * base.max(f64::MIN_POSITIVE)).then(|| osc_d / osc1);
    let beta = decay_ratio.filter(|r| *r > 0.0).map(|r| r.ln() / delta.ln());
    Ok(LinearDecay { harnack_ratio, decay_ratio, beta, ellipticity: b.ellipticity() })
}
