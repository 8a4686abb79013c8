use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::{Cylinder, Point};

use super::params::CoveringParams;
use super::source::{norm, GradientSource};

/// `mu_0 = max{1, sup |Du|}` over the given samples.
pub fn sup_scale(samples: &[[f64; 2]]) -> f64 {
    samples.iter().map(norm).fold(1.0, f64::max)
}

/// Admissible range `[m R0, 3 m R0]`, `m = min{mu0, mu0^{p/2}}`, for the initial radius.
pub fn initial_radius_range(r0: f64, mu0: f64, p: f64) -> (f64, f64) {
    let m = mu0.min(mu0.powf(p / 2.0));
    (m * r0, 3.0 * m * r0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainLevel {
    pub n: usize,
    /// `R_n = c0^n S`.
    pub radius: f64,
    /// `mu_n = eta^n mu0`.
    pub mu: f64,
}

/// Nested intrinsic cylinders `Q_{R_n}^{mu_n}(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderChain {
    pub center: Point,
    pub s_radius: f64,
    pub mu0: f64,
    pub p: f64,
    pub c0: f64,
    pub eta: f64,
    pub alpha1: f64,
    pub levels: Vec<ChainLevel>,
}

impl CylinderChain {
    pub fn cylinder(&self, n: usize) -> Result<Cylinder> {
        let l = self.levels.get(n).ok_or_else(|| invalid(format!("chain has no level {n}")))?;
        Cylinder::intrinsic(self.center, l.radius, l.mu, self.p, false)
    }

    /// `max_n |eta^n - (R_n / S)^{alpha_1}|`.
    pub fn identity_residual(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| (self.eta.powi(l.n as i32) - (l.radius / self.s_radius).powf(self.alpha1)).abs())
            .fold(0.0, f64::max)
    }

    pub fn n_max(&self) -> usize {
        self.levels.len() - 1
    }

    /// Rows `n,R_n,mu_n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,R_n,mu_n\n");
        for l in &self.levels {
            out.push_str(&format!("{},{:e},{:e}\n", l.n, l.radius, l.mu));
        }
        out
    }
}

pub fn chain(center: Point, s_radius: f64, mu0: f64, params: &CoveringParams, n_max: usize) -> Result<CylinderChain> {
    params.validate()?;
    if !(s_radius > 0.0 && s_radius.is_finite()) || !(mu0 >= 1.0) {
        return Err(invalid(format!("need S > 0 and mu0 >= 1 (S = {s_radius}, mu0 = {mu0})")));
    }
    let c0 = params.c0();
    let levels = (0..=n_max)
        .map(|n| ChainLevel { n, radius: c0.powi(n as i32) * s_radius, mu: params.eta.powi(n as i32) * mu0 })
        .collect();
    Ok(CylinderChain { center, s_radius, mu0, p: params.p, c0, eta: params.eta, alpha1: params.alpha1(), levels })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureAlternative {
    /// `|{|Du| < mu/2}| < nu |Q|`.
    pub measure_small: bool,
    /// `s <= mu`.
    pub s_ok: bool,
    /// `|{|Du| < mu/2}| / |Q|` on the sample nodes.
    pub below_fraction: f64,
    pub sup: f64,
}

pub fn measure_alternative(source: &dyn GradientSource, cyl: &Cylinder, mu: f64, nu: f64, s: f64) -> Result<MeasureAlternative> {
    let samples = source.sample(cyl)?;
    if samples.is_empty() {
        return Err(crate::Error::OffGrid);
    }
    let below = samples.iter().filter(|v| norm(v) < mu / 2.0).count();
    let below_fraction = below as f64 / samples.len() as f64;
    let sup = samples.iter().map(norm).fold(0.0, f64::max);
    Ok(MeasureAlternative { measure_small: below_fraction < nu, s_ok: s <= mu, below_fraction, sup })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchReason {
    MeasureFails,
    SExceeds,
    Both,
}

/// Where the chain leaves the second alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingRecord {
    /// First `n >= 1` with a small low-gradient set or `mu_n < s`; `n_max` when none is found.
    pub n0: usize,
    /// `None` when the chain ran out first.
    pub reason: Option<SwitchReason>,
    pub radius: f64,
    pub mu: f64,
    /// Per level `n = 1..=n0`: low-gradient fraction.
    pub fractions: Vec<f64>,
    /// Per level `n = 1..=n0`: `sup |Du| / mu_n`.
    pub sup_ratios: Vec<f64>,
    /// Some cylinder up to `n0` was clipped by the data.
    pub clipped: bool,
}

impl SwitchingRecord {
    /// `s > mu_{n0}` hands the point to the uniformly parabolic branch.
    pub fn uniformly_parabolic(&self) -> bool {
        matches!(self.reason, Some(SwitchReason::SExceeds) | Some(SwitchReason::Both))
    }

    /// `sup_{Q_{R_n}^{mu_n}} |Du| <= mu_n` for `n = 1..=n0`.
    pub fn chain_bound_holds(&self) -> bool {
        self.sup_ratios.iter().all(|&r| r <= 1.0)
    }
}

pub fn switching_radius(source: &dyn GradientSource, chain: &CylinderChain, nu: f64, s: f64) -> Result<SwitchingRecord> {
    let mut fractions = Vec::new();
    let mut sup_ratios = Vec::new();
    let mut clipped = false;
    for n in 1..=chain.n_max() {
        let cyl = chain.cylinder(n)?;
        let l = chain.levels[n];
        clipped |= !source.covers(&cyl);
        let alt = measure_alternative(source, &cyl, l.mu, nu, s)?;
        fractions.push(alt.below_fraction);
        sup_ratios.push(alt.sup / l.mu);
        let reason = match (alt.measure_small, !alt.s_ok) {
            (true, true) => Some(SwitchReason::Both),
            (true, false) => Some(SwitchReason::MeasureFails),
            (false, true) => Some(SwitchReason::SExceeds),
            (false, false) => None,
        };
        if reason.is_some() {
            return Ok(SwitchingRecord { n0: n, reason, radius: l.radius, mu: l.mu, fractions, sup_ratios, clipped });
        }
    }
    let last = chain.levels[chain.n_max()];
    Ok(SwitchingRecord { n0: last.n, reason: None, radius: last.radius, mu: last.mu, fractions, sup_ratios, clipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::source::Lattice;
    use crate::mesh::{GridFunction, SpaceTimeGrid, SpatialGrid, VectorField};
    use crate::rng::CounterRng;
    use proptest::prelude::*;

    fn params() -> CoveringParams {
        CoveringParams::calibrated(2.0, 1).unwrap()
    }

    #[test]
    fn chain_identity() {
        let p = CoveringParams { eta: 0.5, sigma: 0.5, ..params() };
        // c0 = 1/8 at p = 2, hence alpha_1 = 1/3.
        assert_eq!(p.c0(), 0.125);
        assert!((p.alpha1() - 1.0 / 3.0).abs() < 1e-15);
        let c = chain(Point::origin(), 1.0, 1.0, &p, 50).unwrap();
        assert_eq!((c.levels[0].radius, c.levels[0].mu), (1.0, 1.0));
        assert!((c.levels[3].radius.powf(1.0 / 3.0) - 0.125).abs() < 1e-15);
        assert!(c.identity_residual() < 1e-12);
    }

    #[test]
    fn identity_on_random_parameters() {
        let mut rng = CounterRng::new(11, 0);
        for _ in 0..100 {
            let eta = rng.range(0.05, 0.95);
            let c0 = rng.range(0.01, 0.95);
            let alpha1 = eta.ln() / c0.ln();
            let worst = (0..=50).map(|n| (eta.powi(n) - c0.powi(n).powf(alpha1)).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-12);
        }
    }

    #[test]
    fn initial_radius_bounds() {
        assert_eq!(initial_radius_range(0.5, 4.0, 3.0), (2.0, 6.0));
        assert_eq!(initial_radius_range(0.5, 4.0, 1.5), (4f64.powf(0.75) * 0.5, 4f64.powf(0.75) * 1.5));
        assert_eq!(sup_scale(&[[0.3, 0.0]]), 1.0);
    }

    fn striped(fraction: f64) -> VectorField {
        // |Du| = 0 on the first `fraction` of the nodes in x, 1 elsewhere.
        let sp = SpatialGrid::new(0.01, &[(0.0, 1.0)]).unwrap();
        let g = SpaceTimeGrid::covering(sp, 0.1, 0.0, 1.0).unwrap();
        let u = GridFunction::from_fn(&g, |x, _| if x[0] < fraction - 1e-9 { 0.0 } else { 1.0 });
        VectorField::new(vec![u]).unwrap()
    }

    #[test]
    fn measure_alternative_cases() {
        let cyl = Cylinder::standard(Point::new(&[0.5], 0.5), 0.505, 0.5, false).unwrap();
        let all = striped(0.0);
        let a = measure_alternative(&all, &cyl, 1.0, 0.1, 0.0).unwrap();
        assert!(a.measure_small && a.below_fraction == 0.0 && a.s_ok);
        let none = striped(2.0);
        assert!(!measure_alternative(&none, &cyl, 1.0, 0.1, 0.0).unwrap().measure_small);
        // 101 nodes in space, 10 of them low: fraction 10/101 just below 0.1.
        let f = striped(0.1);
        let a = measure_alternative(&f, &cyl, 1.0, 0.1, 0.0).unwrap();
        assert!((a.below_fraction - 10.0 / 101.0).abs() < 1e-15 && a.measure_small);
        let a = measure_alternative(&f, &cyl, 1.0, 10.0 / 101.0, 0.0).unwrap();
        assert!(!a.measure_small);
        assert!(!measure_alternative(&f, &cyl, 1.0, 0.1, 2.0).unwrap().s_ok);
    }

    /// `Du = b + a x` in one dimension. On a ball of radius r about the origin the low
    /// fraction is `clamp((mu/2 - b + a r) / (2 a r), 0, 1)` up to lattice rounding.
    fn ramp(b: f64, a: f64) -> Lattice<impl Fn(&Point) -> [f64; 2] + Sync> {
        Lattice::new(move |z: &Point| [b + a * z.x[0], 0.0], 1, 400, 2).unwrap()
    }

    #[test]
    fn manufactured_switching_index() {
        let p = params();
        let c = chain(Point::origin(), 1.0, 1.0, &p, 12).unwrap();
        let (b, a) = (0.25, 1.0);
        let fraction = |n: usize| {
            let l = c.levels[n];
            let r = l.radius / l.mu;
            ((l.mu / 2.0 - b + a * r) / (2.0 * a * r)).clamp(0.0, 1.0)
        };
        // Fractions 0.75, 0.75, 0: well away from nu on both sides.
        assert!((fraction(1) - 0.75).abs() < 1e-12 && (fraction(2) - 0.75).abs() < 1e-12);
        assert_eq!(fraction(3), 0.0);
        let rec = switching_radius(&ramp(b, a), &c, p.nu, 0.0).unwrap();
        assert_eq!((rec.n0, rec.reason), (3, Some(SwitchReason::MeasureFails)));
        for (n, f) in rec.fractions.iter().enumerate() {
            assert!((f - fraction(n + 1)).abs() < 0.01);
        }
    }

    #[test]
    fn s_forces_first_level() {
        let p = params();
        let c = chain(Point::origin(), 1.0, 1.0, &p, 12).unwrap();
        let rec = switching_radius(&ramp(0.0, 0.0), &c, p.nu, 0.8).unwrap();
        assert_eq!((rec.n0, rec.reason), (1, Some(SwitchReason::SExceeds)));
        assert!(rec.uniformly_parabolic());
    }

    #[test]
    fn vanishing_gradient_never_switches() {
        let p = params();
        let c = chain(Point::origin(), 1.0, 1.0, &p, 8).unwrap();
        let rec = switching_radius(&ramp(0.0, 0.0), &c, p.nu, 0.0).unwrap();
        assert_eq!((rec.n0, rec.reason), (8, None));
        assert!(rec.chain_bound_holds());
    }

    proptest! {
        #[test]
        fn larger_nu_switches_no_later(b in 0.0f64..0.6, a in 0.1f64..4.0, nu1 in 0.01f64..0.49, nu2 in 0.01f64..0.49) {
            let p = params();
            let c = chain(Point::origin(), 1.0, 1.0, &p, 10).unwrap();
            let (lo, hi) = if nu1 < nu2 { (nu1, nu2) } else { (nu2, nu1) };
            let src = Lattice::new(move |z: &Point| [b + a * z.x[0], 0.0], 1, 60, 2).unwrap();
            let r_lo = switching_radius(&src, &c, lo, 0.0).unwrap();
            let r_hi = switching_radius(&src, &c, hi, 0.0).unwrap();
            prop_assert!(r_hi.n0 <= r_lo.n0);
        }
    }
}
