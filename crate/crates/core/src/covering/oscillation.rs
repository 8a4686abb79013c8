use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::{Cylinder, Point};

use super::chain::{CylinderChain, SwitchingRecord};
use super::params::CoveringParams;
use super::source::{cylinder_moments, dist, GradientSource};

/// Fewer sample nodes than this and a cylinder is considered unresolved.
pub const MIN_SAMPLES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscLevel {
    pub i: usize,
    /// `delta^i R`.
    pub radius: f64,
    pub count: usize,
    /// `(Du)_i`.
    pub mean: [f64; 2],
    /// Mean of `|Du - (Du)_i|^2`.
    pub oscillation: f64,
    /// Mean oscillation times the continuum volume of the cylinder.
    pub integral: f64,
    /// `integral_{i} <= kappa delta^{N+2} integral_{i-1}`; `None` at `i = 0`.
    pub step_holds: Option<bool>,
    /// `oscillation_i <= kappa^i mu^2`.
    pub bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationDecay {
    pub center: Point,
    pub radius: f64,
    pub mu: f64,
    pub levels: Vec<OscLevel>,
    /// `sup_{Q_R^mu} |Du| <= mu`.
    pub sup_ok: bool,
    /// The sequence stopped before `i_max` because a cylinder was unresolved or clipped.
    pub truncated: bool,
    /// Largest `oscillation_{i+1} / oscillation_i`.
    pub measured_kappa: f64,
}

impl OscillationDecay {
    pub fn all_steps_hold(&self) -> bool {
        self.levels.iter().all(|l| l.step_holds.unwrap_or(true))
    }

    pub fn all_bounds_hold(&self) -> bool {
        self.levels.iter().all(|l| l.bound_holds)
    }

    /// Rows `i,radius,count,oscillation,step_holds,bound_holds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,radius,count,oscillation,step_holds,bound_holds\n");
        for l in &self.levels {
            let step = l.step_holds.map_or("".to_string(), |b| b.to_string());
            out.push_str(&format!("{},{:e},{},{:e},{},{}\n", l.i, l.radius, l.count, l.oscillation, step, l.bound_holds));
        }
        out
    }
}

fn level_cylinder(center: Point, radius: f64, mu: f64, p: f64) -> Result<Cylinder> {
    Cylinder::intrinsic(center, radius, mu, p, false)
}

/// Mean oscillation of `Du` on `Q_{delta^i R}^mu(center)` for `i = 0..=i_max`.
pub fn oscillation_decay(
    source: &dyn GradientSource,
    center: Point,
    radius: f64,
    mu: f64,
    params: &CoveringParams,
    i_max: usize,
) -> Result<OscillationDecay> {
    params.validate()?;
    if !(radius > 0.0 && mu > 0.0) {
        return Err(invalid(format!("need R, mu > 0 (R = {radius}, mu = {mu})")));
    }
    let (kappa, delta) = (params.kappa, params.delta);
    let mut levels: Vec<OscLevel> = Vec::new();
    let mut truncated = false;
    let mut sup_ok = true;
    let mut measured_kappa = 0.0f64;
    for i in 0..=i_max {
        let r = radius * delta.powi(i as i32);
        let cyl = level_cylinder(center, r, mu, params.p)?;
        let m = match cylinder_moments(source, &cyl) {
            Ok(m) if m.count >= MIN_SAMPLES && source.covers(&cyl) => m,
            _ => {
                truncated = true;
                break;
            }
        };
        if i == 0 {
            sup_ok = m.sup <= mu;
        }
        let integral = m.oscillation * cyl.volume(params.dim);
        // Round-off floor so that constant fields do not fail on noise.
        let floor = 1e-24 * mu * mu * cyl.volume(params.dim);
        let step_holds = levels.last().map(|prev| integral <= kappa * params.volume_step() * prev.integral * (1.0 + 1e-12) + floor);
        if let Some(prev) = levels.last() {
            if prev.oscillation > 0.0 {
                measured_kappa = measured_kappa.max(m.oscillation / prev.oscillation);
            }
        }
        levels.push(OscLevel {
            i,
            radius: r,
            count: m.count,
            mean: m.mean,
            oscillation: m.oscillation,
            integral,
            step_holds,
            bound_holds: m.oscillation <= kappa.powi(i as i32) * mu * mu * (1.0 + 1e-12),
        });
    }
    if levels.is_empty() {
        return Err(crate::Error::Precondition("base cylinder is unresolved".into()));
    }
    Ok(OscillationDecay { center, radius, mu, levels, sup_ok, truncated, measured_kappa })
}

/// Smallest constant found for one consequence, next to the value the proof produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Consequence {
    pub empirical: f64,
    /// Constant assembled from the proof, when it is explicit.
    pub proof: Option<f64>,
    pub samples: usize,
}

impl Consequence {
    fn new(proof: Option<f64>) -> Self {
        Self { empirical: 0.0, proof, samples: 0 }
    }

    fn record(&mut self, lhs: f64, scale: f64) {
        self.samples += 1;
        if lhs > 0.0 {
            self.empirical = self.empirical.max(if scale > 0.0 { lhs / scale } else { f64::INFINITY });
        }
    }

    /// True when the empirical constant stays below the proof's constant, or no constant
    /// is explicit and the empirical one is finite.
    pub fn holds(&self) -> bool {
        match self.proof {
            Some(c) => self.empirical <= c * (1.0 + 1e-9),
            None => self.empirical.is_finite(),
        }
    }
}

/// Empirical constants of the five consequences of the oscillation decay at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyReport {
    pub n0: usize,
    pub mu: f64,
    pub radius: f64,
    pub s_radius: f64,
    pub mu0: f64,
    pub alpha3: f64,
    /// `|(Du)_{i+1} - (Du)_i|^2 <= C kappa^i mu^2`.
    pub c1: Consequence,
    /// `|Du(z0) - (Du)_i|^2 <= C kappa^i mu^2`.
    pub c2: Consequence,
    /// `|Du(z0) - (Du)_rho|^2 <= C kappa^i mu^2` with `delta^i R <= rho <= delta^{i-1} R`.
    pub c3: Consequence,
    /// `|Du(z0) - (Du)_rho| <= C mu0 (rho/S)^{alpha_3}` for `rho <= R_{n0}`.
    pub c4_inner: Consequence,
    /// Same for `R_{n0} <= rho < S`.
    pub c4_outer: Consequence,
    /// `mean |Du - (Du)_rho|^2 <= C mu0^2 (rho/S)^{2 alpha_3}`.
    pub c5: Consequence,
    /// `|Du(z0) - (Du)_last|`, how far the averages are from the nodal value.
    pub limit_gap: f64,
    /// Sampled radii skipped because their cylinders were unresolved.
    pub skipped: usize,
}

impl CauchyReport {
    pub fn all(&self) -> [(&'static str, &Consequence); 6] {
        [
            ("C1", &self.c1),
            ("C2", &self.c2),
            ("C3", &self.c3),
            ("C4_inner", &self.c4_inner),
            ("C4_outer", &self.c4_outer),
            ("C5", &self.c5),
        ]
    }
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![hi];
    }
    (0..count).map(|j| lo * (hi / lo).powf(j as f64 / (count - 1) as f64)).collect()
}

/// Evaluates the five consequences at the chain's center, using the decay sequence on
/// `Q_{delta^i R_{n0}}^{mu_{n0}}` and `rho_samples` radii per branch.
pub fn cauchy_consequences(
    source: &dyn GradientSource,
    chain: &CylinderChain,
    switching: &SwitchingRecord,
    decay: &OscillationDecay,
    params: &CoveringParams,
    rho_samples: usize,
) -> Result<CauchyReport> {
    let z0 = chain.center;
    let (mu, radius) = (switching.mu, switching.radius);
    if (decay.mu - mu).abs() > 1e-12 * mu || (decay.radius - radius).abs() > 1e-12 * radius {
        return Err(invalid("decay sequence was not computed at the switching level"));
    }
    let (kappa, delta) = (params.kappa, params.delta);
    let inv_step = 1.0 / params.volume_step();
    let c1_proof = 2.0 * (kappa + inv_step);
    let c2_proof = c1_proof / (1.0 - kappa);
    let c3_proof = 2.0 * c2_proof + 2.0 * (1.0 + inv_step) * inv_step / kappa;
    let alpha3 = params.alpha3();
    let c0 = params.c0();
    let grad0 = source.gradient(&z0)?;
    let mu2 = mu * mu;

    let mut c1 = Consequence::new(Some(c1_proof));
    let mut c2 = Consequence::new(Some(c2_proof));
    let mut c3 = Consequence::new(Some(c3_proof));
    let mut c4_inner = Consequence::new(Some(c3_proof.sqrt()));
    let mut c4_outer = Consequence::new(Some(2.0 / c0.powf(chain.alpha1)));
    let mut c5 = Consequence::new(None);

    let lv = &decay.levels;
    for w in lv.windows(2) {
        c1.record(dist(&w[1].mean, &w[0].mean).powi(2), kappa.powi(w[0].i as i32) * mu2);
    }
    for l in lv.iter().skip(1) {
        c2.record(dist(&grad0, &l.mean).powi(2), kappa.powi(l.i as i32) * mu2);
    }

    let deepest = lv.last().map_or(radius, |l| l.radius);
    let mut skipped = 0;
    let inner: Vec<f64> = geometric(deepest.max(radius * delta.powi(8)), radius, rho_samples);
    let outer: Vec<f64> = if chain.s_radius > radius {
        geometric(radius, chain.s_radius * (1.0 - 1e-9), rho_samples)
    } else {
        Vec::new()
    };
    let s = chain.s_radius;
    for (branch_inner, rho) in inner.iter().map(|&r| (true, r)).chain(outer.iter().map(|&r| (false, r))) {
        let cyl = Cylinder::intrinsic(z0, rho, mu, params.p, false)?;
        let m = match cylinder_moments(source, &cyl) {
            Ok(m) if m.count >= MIN_SAMPLES && source.covers(&cyl) => m,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let gap = dist(&grad0, &m.mean);
        let scale4 = chain.mu0 * (rho / s).powf(alpha3);
        if branch_inner {
            // delta^i R <= rho <= delta^{i-1} R.
            let i = ((rho / radius).ln() / delta.ln()).ceil().max(0.0) as i32;
            c3.record(gap * gap, kappa.powi(i) * mu2);
            c4_inner.record(gap, scale4);
        } else {
            c4_outer.record(gap, scale4);
        }
        c5.record(m.oscillation, scale4 * scale4);
    }
    let limit_gap = lv.last().map_or(0.0, |l| dist(&grad0, &l.mean));
    Ok(CauchyReport {
        n0: switching.n0,
        mu,
        radius,
        s_radius: s,
        mu0: chain.mu0,
        alpha3,
        c1,
        c2,
        c3,
        c4_inner,
        c4_outer,
        c5,
        limit_gap,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::chain::{chain, switching_radius};
    use crate::covering::source::Lattice;

    fn params(dim: usize) -> CoveringParams {
        CoveringParams::calibrated(2.0, dim).unwrap()
    }

    #[test]
    fn constant_gradient_has_no_oscillation() {
        let src = Lattice::new(|_: &Point| [0.4, -0.2], 2, 6, 4).unwrap();
        let d = oscillation_decay(&src, Point::origin(), 1.0, 1.0, &params(2), 6).unwrap();
        assert!(d.levels.iter().all(|l| l.oscillation < 1e-30));
        assert!(d.all_steps_hold() && d.all_bounds_hold() && !d.truncated);
    }

    #[test]
    fn affine_gradient_scales_quadratically() {
        // Du = (2x + y, x - 3y): oscillation is a quadratic form in x - x0, so halving the
        // radius on a self-similar lattice divides it by exactly four.
        let src = Lattice::new(|z: &Point| [2.0 * z.x[0] + z.x[1], z.x[0] - 3.0 * z.x[1]], 2, 10, 3).unwrap();
        let p = params(2);
        let d = oscillation_decay(&src, Point::new(&[0.2, -0.1], 0.0), 0.8, 1.3, &p, 8).unwrap();
        for w in d.levels.windows(2) {
            let ratio = w[1].oscillation / w[0].oscillation;
            assert!((ratio - 0.25).abs() < 1e-10 * 0.25);
            // Means equal the center value by symmetry.
            assert!((w[1].mean[0] - 0.3).abs() < 1e-12 && (w[1].mean[1] - 0.5).abs() < 1e-12);
        }
        assert!((d.measured_kappa - 0.25).abs() < 1e-10);
    }

    #[test]
    fn unresolved_cylinders_truncate() {
        use crate::mesh::{discrete_gradient, GridFunction, SpaceTimeGrid, SpatialGrid};
        let sp = SpatialGrid::new(0.05, &[(-1.0, 1.0)]).unwrap();
        let g = SpaceTimeGrid::covering(sp, 0.001, -0.5, 0.5).unwrap();
        let u = GridFunction::from_fn(&g, |x, _| x[0] * x[0]);
        let grad = discrete_gradient(&u);
        let d = oscillation_decay(&grad, Point::origin(), 0.8, 2.0, &params(1), 10).unwrap();
        assert!(d.truncated && d.levels.len() < 11 && d.levels.len() >= 3);
    }

    #[test]
    fn consequences_for_constant_and_affine_fields() {
        let p = params(1);
        let z = Point::new(&[0.0], 0.0);
        let flat = Lattice::new(|_: &Point| [0.9, 0.0], 1, 20, 4).unwrap();
        let c = chain(z, 1.0, 1.0, &p, 6).unwrap();
        let sw = switching_radius(&flat, &c, p.nu, 0.0).unwrap();
        assert_eq!(sw.n0, 1);
        let d = oscillation_decay(&flat, z, sw.radius, sw.mu, &p, 5).unwrap();
        let r = cauchy_consequences(&flat, &c, &sw, &d, &p, 4).unwrap();
        for (_, q) in r.all() {
            assert!(q.empirical < 1e-12 && q.holds());
        }

        // Odd symmetry about the center freezes the averages.
        let affine = Lattice::new(|z: &Point| [0.9 + 0.1 * z.x[0], 0.0], 1, 20, 4).unwrap();
        let sw = switching_radius(&affine, &c, p.nu, 0.0).unwrap();
        let d = oscillation_decay(&affine, z, sw.radius, sw.mu, &p, 5).unwrap();
        assert!(d.levels.iter().all(|l| (l.mean[0] - 0.9).abs() < 1e-14));
        let r = cauchy_consequences(&affine, &c, &sw, &d, &p, 4).unwrap();
        assert!(r.c1.empirical < 1e-20 && r.c2.empirical < 1e-20);
        assert!(r.c5.empirical > 0.0 && r.c5.empirical.is_finite());
    }
}
