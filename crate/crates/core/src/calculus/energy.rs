use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::iterate::Exponents;
use crate::mesh::{axis_derivative, discrete_gradient, Cylinder, GridFunction, VectorField};
use crate::solver::FluxParams;

use super::cutoff::Cutoff;
use super::smallest_constant;

// 8-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329_0, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_WEIGHTS: [f64; 4] = [0.362_683_783_378_362_0, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// Composite Gauss-Legendre quadrature of `f` on `[a, b]`.
pub fn quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let w = (b - a) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let mid = a + (i as f64 + 0.5) * w;
        let half = 0.5 * w;
        for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            acc += wt * (f(mid - half * x) + f(mid + half * x)) * half;
        }
    }
    acc
}

/// Nonnegative, bounded, Lipschitz weight `f` on the half line.
pub trait Weight {
    fn value(&self, s: f64) -> f64;
    fn derivative(&self, s: f64) -> f64;

    /// `int_0^v s f(s) ds`.
    fn primitive(&self, v: f64) -> f64 {
        quadrature(|s| s * self.value(s), 0.0, v, 32)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UnitWeight;

impl Weight for UnitWeight {
    fn value(&self, _: f64) -> f64 {
        1.0
    }

    fn derivative(&self, _: f64) -> f64 {
        0.0
    }

    fn primitive(&self, v: f64) -> f64 {
        0.5 * v * v
    }
}

/// `f(s) = s^alpha (s - level)_+^beta`.
#[derive(Debug, Clone, Copy)]
pub struct PowerWeight {
    pub alpha: f64,
    pub beta: f64,
    pub level: f64,
}

impl PowerWeight {
    pub fn from_exponents(e: &Exponents, level: f64) -> Self {
        Self { alpha: e.alpha, beta: e.beta, level }
    }
}

impl Weight for PowerWeight {
    fn value(&self, s: f64) -> f64 {
        let t = s - self.level;
        if t <= 0.0 {
            return 0.0;
        }
        s.powf(self.alpha) * t.powf(self.beta)
    }

    fn derivative(&self, s: f64) -> f64 {
        let t = s - self.level;
        if t <= 0.0 {
            return 0.0;
        }
        let mut d = self.beta * s.powf(self.alpha) * t.powf(self.beta - 1.0);
        if self.alpha != 0.0 {
            d += self.alpha * s.powf(self.alpha - 1.0) * t.powf(self.beta);
        }
        d
    }

    fn primitive(&self, v: f64) -> f64 {
        // The integrand vanishes below the level; integrating only above it avoids the kink.
        quadrature(|s| s * self.value(s), self.level.max(0.0), v, 32)
    }
}

/// `|D^2 u|^2` per node: three-point second differences on the diagonal, one-sided
/// differences of the gradient at the faces, mixed partials averaged both ways.
pub fn hessian_norm_sq(u: &GridFunction) -> GridFunction {
    let grid = u.grid();
    let sp = grid.space();
    let dim = sp.dim();
    let grad = discrete_gradient(u);
    let h2 = sp.h() * sp.h();
    let mut out = Vec::with_capacity(grid.len());
    for k in 0..grid.levels() {
        let lvl = u.level(k);
        let g: Vec<&[f64]> = (0..dim).map(|a| grad.component(a).level(k)).collect();
        for s in 0..sp.len() {
            let (i, j) = sp.split(s);
            let mut total = 0.0;
            for a in 0..dim {
                let (pos, n) = if a == 0 { (i, sp.count(0)) } else { (j, sp.count(1)) };
                let d_aa = if pos > 0 && pos + 1 < n {
                    let step = if a == 0 { 1 } else { sp.count(0) };
                    (lvl[s + step] - 2.0 * lvl[s] + lvl[s - step]) / h2
                } else {
                    axis_derivative(sp, g[a], a, s)
                };
                total += d_aa * d_aa;
                for b in (a + 1)..dim {
                    let mixed = 0.5 * (axis_derivative(sp, g[a], b, s) + axis_derivative(sp, g[b], a, s));
                    total += 2.0 * mixed * mixed;
                }
            }
            out.push(total);
        }
    }
    GridFunction::new(grid.clone(), out).expect("same grid")
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Both sides of the weighted energy identity for `v = |Du|` on a backward cylinder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyBalance {
    /// Slice term, `v^{p-2}|D^2u|^2 f`, `v^{p-1}|Dv|^2 f'`, `(p-2) v^{p-3} <Dv,Du>^2 f'`.
    pub lhs_terms: [f64; 4],
    /// `v^p f |D zeta|^2` and `F(v) zeta |zeta_t|`.
    pub rhs_terms: [f64; 2],
    pub empirical_c: f64,
    pub vacuous: bool,
}

pub fn energy_balance(
    u: &GridFunction,
    weight: &dyn Weight,
    cyl: &Cylinder,
    cutoff: &Cutoff,
    params: &FluxParams,
) -> Result<EnergyBalance> {
    if !cyl.backward {
        return Err(invalid("the energy balance is stated on a backward cylinder"));
    }
    let grid = u.grid();
    let nodes = cyl.nodes(grid)?;
    let p = params.p;
    let grad_u = discrete_gradient(u);
    let v = grad_u.magnitude();
    let grad_v = discrete_gradient(&v);
    let hess = hessian_norm_sq(u);
    let dz = grid.node_volume();
    let dx = grid.space().cell_volume();

    let mut lhs = [0.0; 4];
    let mut rhs = [0.0; 2];
    let mut slice_sup = 0.0f64;
    for &k in &nodes.levels {
        let t = grid.time(k);
        let mut slice = 0.0;
        for &s in &nodes.space {
            let node = grid.flat(k, s);
            let x = grid.space().coord(s);
            let zeta = cutoff.value(&x, t);
            let dzeta = cutoff.gradient(&x, t);
            let zt = cutoff.time_derivative(&x, t);
            let vv = v.at(node);
            let f = weight.value(vv);
            let big_f = weight.primitive(vv);
            slice += big_f * zeta * zeta;
            rhs[0] += vv.powf(p) * f * dot(dzeta, dzeta);
            rhs[1] += big_f * zeta * zt.abs();
            if vv <= 0.0 {
                continue;
            }
            let fp = weight.derivative(vv);
            let gv = grad_v.at(node);
            let gu = grad_u.at(node);
            let z2 = zeta * zeta;
            lhs[1] += vv.powf(p - 2.0) * hess.at(node) * f * z2;
            lhs[2] += vv.powf(p - 1.0) * dot(gv, gv) * fp * z2;
            // v^{p-3} <Dv,Du>^2 written as v^{p-1} (<Dv,Du>/v)^2 to stay finite near v = 0.
            let c = dot(gv, gu) / vv;
            lhs[3] += (p - 2.0) * vv.powf(p - 1.0) * c * c * fp * z2;
        }
        slice_sup = slice_sup.max(slice * dx);
    }
    lhs[0] = slice_sup;
    for term in lhs.iter_mut().skip(1) {
        *term *= dz;
    }
    for term in rhs.iter_mut() {
        *term *= dz;
    }
    let l: f64 = lhs.iter().sum();
    let r: f64 = rhs.iter().sum();
    Ok(EnergyBalance { lhs_terms: lhs, rhs_terms: rhs, empirical_c: smallest_constant(l, r), vacuous: l <= 0.0 && r <= 0.0 })
}

/// The truncated energy estimate on `Q_n` with cutoff `zeta_n` at level `k_next = k_{n+1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncatedEnergy {
    /// `(a) (k/2)^gamma sup_t int ((v - k_next)_+^{a/2} zeta)^2`, `a = alpha + beta + 2 - gamma`.
    pub lhs_sup: f64,
    /// `(k/2)^{p-2+gamma} iint |D((v - k_next)_+^{a/2} zeta)|^2`.
    pub lhs_grad: f64,
    /// `(alpha+beta+2)^2 iint v^{p+alpha+beta} 1{v >= k_next} |D zeta|^2`.
    pub rhs1: f64,
    /// `(alpha+beta+2) iint v^{2+alpha+beta} 1{v >= k_next} |zeta_t|`.
    pub rhs2: f64,
    pub empirical_c: f64,
}

pub fn truncated_energy(
    v: &GridFunction,
    outer: &Cylinder,
    cutoff: &Cutoff,
    k: f64,
    k_next: f64,
    exps: &Exponents,
) -> Result<TruncatedEnergy> {
    if !(k > 0.0 && k_next >= 0.0) {
        return Err(invalid(format!("levels k = {k}, k_next = {k_next}")));
    }
    let grid = v.grid();
    let nodes = outer.nodes(grid)?;
    let a = exps.level_power();
    let (alpha, beta, gamma, p) = (exps.alpha, exps.beta, exps.gamma, exps.p);
    let w = GridFunction::from_fn(grid, |_, _| 0.0);
    let mut w = w.into_values();
    for (node, slot) in w.iter_mut().enumerate() {
        let z = grid.point(node);
        *slot = (v.at(node) - k_next).max(0.0).powf(a / 2.0) * cutoff.value(&z.x, z.t);
    }
    let w = GridFunction::new(grid.clone(), w)?;
    let gw: VectorField = discrete_gradient(&w);
    let dx = grid.space().cell_volume();
    let dz = grid.node_volume();

    let mut sup = 0.0f64;
    let (mut grad, mut r1, mut r2) = (0.0, 0.0, 0.0);
    for &kk in &nodes.levels {
        let t = grid.time(kk);
        let mut slice = 0.0;
        for &s in &nodes.space {
            let node = grid.flat(kk, s);
            let x = grid.space().coord(s);
            slice += w.at(node).powi(2);
            let g = gw.at(node);
            grad += dot(g, g);
            let vv = v.at(node);
            if vv >= k_next {
                let dzeta = cutoff.gradient(&x, t);
                r1 += vv.powf(p + alpha + beta) * dot(dzeta, dzeta);
                r2 += vv.powf(2.0 + alpha + beta) * cutoff.time_derivative(&x, t).abs();
            }
        }
        sup = sup.max(slice * dx);
    }
    let half = k / 2.0;
    let lhs_sup = a * half.powf(gamma) * sup;
    let lhs_grad = half.powf(p - 2.0 + gamma) * grad * dz;
    let rhs1 = (alpha + beta + 2.0).powi(2) * r1 * dz;
    let rhs2 = (alpha + beta + 2.0) * r2 * dz;
    Ok(TruncatedEnergy { lhs_sup, lhs_grad, rhs1, rhs2, empirical_c: smallest_constant(lhs_sup + lhs_grad, rhs1 + rhs2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iterate::Mode;
    use crate::mesh::{Point, SpaceTimeGrid, SpatialGrid};
    use crate::solver::Exact;

    fn grid(h: f64, dt: f64) -> SpaceTimeGrid {
        let s = SpatialGrid::new(h, &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        SpaceTimeGrid::covering(s, dt, 0.0, 1.0).unwrap()
    }

    fn backward_pair() -> (Cylinder, Cutoff) {
        let z = Point::new(&[0.0, 0.0], 0.9);
        let outer = Cylinder::standard(z, 0.8, 0.8, true).unwrap();
        let inner = Cylinder::standard(z, 0.4, 0.4, true).unwrap();
        (outer, Cutoff::between(&inner, &outer).unwrap())
    }

    #[test]
    fn quadrature_is_exact_on_polynomials() {
        let q = quadrature(|s| s.powi(7) - 3.0 * s, 0.0, 2.0, 1);
        assert!((q - (256.0 / 8.0 - 6.0)).abs() < 1e-12);
        let w = PowerWeight { alpha: 1.0, beta: 2.0, level: 0.5 };
        // int_{0.5}^{1} s^2 (s - 0.5)^2 ds
        let exact = 0.5f64.powi(5) / 5.0 + 0.5f64.powi(4) / 4.0 * 1.0 + 0.5f64.powi(3) / 3.0 * 0.25;
        assert!((w.primitive(1.0) - exact).abs() < 1e-12);
    }

    #[test]
    fn linear_data_has_no_second_order_terms() {
        let g = grid(0.05, 0.05);
        let u = GridFunction::from_fn(&g, |x, _| 2.0 * x[0] - x[1]);
        let (cyl, cut) = backward_pair();
        let params = FluxParams::new(3.0, 0.0, 2).unwrap();
        let e = energy_balance(&u, &UnitWeight, &cyl, &cut, &params).unwrap();
        assert!(e.lhs_terms[1].abs() < 1e-16 && e.lhs_terms[2].abs() < 1e-16 && e.lhs_terms[3].abs() < 1e-16);
        assert!(e.lhs_terms[0] > 0.0 && e.rhs_terms[0] > 0.0);
    }

    #[test]
    fn heat_constant_settles_under_refinement() {
        let heat = Exact::heat(2, 1.0).unwrap();
        let params = FluxParams::new(2.0, 0.0, 2).unwrap();
        let (cyl, cut) = backward_pair();
        let mut cs = Vec::new();
        for h in [0.05, 0.025] {
            let s = SpatialGrid::new(h, &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
            let g = SpaceTimeGrid::covering(s, h, 0.0, 1.0).unwrap();
            let u = GridFunction::from_fn(&g, |x, t| heat.value(x, t + 0.2));
            cs.push(energy_balance(&u, &UnitWeight, &cyl, &cut, &params).unwrap().empirical_c);
        }
        assert!(cs.iter().all(|c| c.is_finite() && *c > 0.0));
        assert!((cs[0] - cs[1]).abs() / cs[1] < 0.1, "{cs:?}");
    }

    #[test]
    fn power_weight_on_barenblatt_is_finite() {
        let b = Exact::barenblatt(2, 3.0, 1.0).unwrap();
        let g = grid(0.05, 0.05);
        let u = GridFunction::from_fn(&g, |x, t| b.value(x, t + 0.5));
        let v = discrete_gradient(&u).magnitude();
        let (cyl, cut) = backward_pair();
        let params = FluxParams::new(3.0, 0.0, 2).unwrap();
        let e = Exponents::choose(Mode::Unified, 3.0, 2).unwrap();
        let k = 0.5 * v.max();
        let r = energy_balance(&u, &PowerWeight::from_exponents(&e, k), &cyl, &cut, &params).unwrap();
        assert!(r.lhs_terms.iter().chain(&r.rhs_terms).all(|x| x.is_finite()));
        assert!(r.empirical_c.is_finite());
    }

    #[test]
    fn truncation_below_level_is_zero() {
        let g = grid(0.1, 0.1);
        let v = GridFunction::from_fn(&g, |x, _| 0.3 + 0.1 * x[0]);
        let (cyl, cut) = backward_pair();
        let e = Exponents::choose(Mode::Unified, 2.0, 2).unwrap();
        let r = truncated_energy(&v, &cyl, &cut, 1.0, 0.5, &e).unwrap();
        assert_eq!((r.lhs_sup, r.lhs_grad, r.rhs1, r.rhs2, r.empirical_c), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_field_matches_closed_form() {
        let g = grid(0.05, 0.05);
        let c = 1.5;
        let v = GridFunction::from_fn(&g, |_, _| c);
        let (cyl, cut) = backward_pair();
        let e = Exponents::choose(Mode::Unified, 2.0, 2).unwrap();
        let (k, kn) = (1.0, 0.75);
        let r = truncated_energy(&v, &cyl, &cut, k, kn, &e).unwrap();
        let a = e.level_power();
        let nodes = cyl.nodes(&g).unwrap();
        let mut grad_sq = 0.0;
        let mut time_abs = 0.0;
        for node in nodes.iter() {
            let z = g.point(node);
            let d = cut.gradient(&z.x, z.t);
            grad_sq += dot(d, d);
            time_abs += cut.time_derivative(&z.x, z.t).abs();
        }
        let ab2 = e.alpha + e.beta + 2.0;
        let rhs1 = ab2 * ab2 * c.powf(e.p + e.alpha + e.beta) * grad_sq * g.node_volume();
        let rhs2 = ab2 * c.powf(2.0 + e.alpha + e.beta) * time_abs * g.node_volume();
        assert!((r.rhs1 - rhs1).abs() < 1e-10 * rhs1);
        assert!((r.rhs2 - rhs2).abs() < 1e-10 * rhs2);
        // At the top the cutoff is the pure spatial ramp.
        let top = *nodes.levels.last().unwrap();
        let slice: f64 = nodes
            .space
            .iter()
            .map(|&s| cut.value(&g.space().coord(s), g.time(top)).powi(2))
            .sum::<f64>()
            * g.space().cell_volume();
        let sup = a * (k / 2.0).powf(e.gamma) * (c - kn).powf(a) * slice;
        assert!((r.lhs_sup - sup).abs() < 1e-10 * sup);
    }
}
