use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::{parabolic_distance, Cylinder, Point};

use super::chain::{chain, sup_scale, switching_radius, CylinderChain, SwitchingRecord};
use super::params::CoveringParams;
use super::source::{dist, moments, GradientSource};

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

/// Point `i` of the Halton sequence in bases 2, 3, 5, 7.
pub fn halton4(i: u64) -> [f64; 4] {
    [radical_inverse(i, 2), radical_inverse(i, 3), radical_inverse(i, 5), radical_inverse(i, 7)]
}

/// `mu_0 = max{1, sup |Du|}` over the lattice of `4 Q0`.
pub fn sup_mu0(source: &dyn GradientSource, center: Point, r0: f64) -> Result<f64> {
    let big = Cylinder::standard(center, 4.0 * r0, 16.0 * r0 * r0, false)?;
    Ok(sup_scale(&source.sample(&big)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairAxis {
    /// Same spatial point, different times.
    Time,
    /// Same time slice.
    Space,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCase {
    /// `2 rho` below both switching scales.
    Near,
    /// `2 rho` between the two switching scales.
    Mixed,
    /// `2 rho` above both switching scales.
    Beyond,
    /// The second point leaves `Q_S^{mu0}` of the first.
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSampling {
    /// Dyadic distance bins `[R0 2^{-b}, R0 2^{1-b})`, `b = 0..bins`.
    pub bins: usize,
    /// Pairs per bin and axis.
    pub pairs_per_bin: usize,
    /// Chain length used for the switching search at each point.
    pub n_max: usize,
}

impl Default for PairSampling {
    fn default() -> Self {
        Self { bins: 6, pairs_per_bin: 12, n_max: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub axis: PairAxis,
    pub case: PairCase,
    pub bin: usize,
    pub z0: Point,
    pub z1: Point,
    pub distance: f64,
    /// `|Du(z0) - Du(z1)|`.
    pub delta: f64,
    /// Case-specific upper bound: the three-term split through the intermediate
    /// cylinders (near, mixed), `mu_{n0} + mu_{n1}` (beyond) or the far-pair line.
    pub case_bound: f64,
    /// Switching indices at `z0` and `z1`.
    pub n0: usize,
    pub n1: usize,
    /// Some cylinder touched the edge of the data.
    pub clipped: bool,
    pub quotient: f64,
}

impl PairRecord {
    pub fn bound_holds(&self) -> bool {
        self.delta <= self.case_bound * (1.0 + 1e-12) + 1e-14
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTable {
    pub axis: PairAxis,
    pub case: PairCase,
    pub count: usize,
    pub worst_quotient: f64,
    pub bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    /// Usable interior pairs that are not far.
    pub pairs: usize,
    pub worst_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarCheck {
    pub count: usize,
    /// `2 mu0 / R0 * max{mu0, mu0^{p/2}} / min{mu0, mu0^{p/2}}`.
    pub bound: f64,
    /// Largest `|Du(z0) - Du(z1)| / d(z0, z1)` over far pairs.
    pub worst_ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderCertificate {
    /// Slope of the log-log fit of the worst difference per bin; `None` when every
    /// difference vanishes.
    pub alpha_fit: Option<f64>,
    /// Exponent used for `worst_c`: the fit clamped to `(0, 1]`, or 1.
    pub alpha: f64,
    pub worst_c: f64,
    /// Running maximum of the per-case powers of `mu0`.
    pub exponent_a: f64,
    pub mu0: f64,
    pub r0: f64,
    pub s_radius: f64,
    pub bins: Vec<BinStat>,
    /// Bins left without a usable pair.
    pub dropped_bins: Vec<usize>,
    pub cases: Vec<CaseTable>,
    pub far: FarCheck,
    /// Pairs flagged as clipped and left out of the statistics.
    pub excluded: usize,
    pub pairs: Vec<PairRecord>,
}

struct Site {
    chain: CylinderChain,
    switching: SwitchingRecord,
}

fn site(source: &dyn GradientSource, z: Point, s_radius: f64, mu0: f64, params: &CoveringParams, n_max: usize) -> Result<Site> {
    let chain = chain(z, s_radius, mu0, params, n_max)?;
    let switching = switching_radius(source, &chain, params.nu, params.s)?;
    Ok(Site { chain, switching })
}

/// Switching scale `mu_n^{-p/2} R_n` (time) or `mu_n^{-1} R_n` (space).
fn scale(axis: PairAxis, radius: f64, mu: f64, p: f64) -> f64 {
    match axis {
        PairAxis::Time => mu.powf(-p / 2.0) * radius,
        PairAxis::Space => radius / mu,
    }
}

fn intermediate(axis: PairAxis, center: Point, rho: f64, mu: f64, p: f64) -> Result<Cylinder> {
    let s_i = match axis {
        PairAxis::Time => mu.powf(p / 2.0) * rho,
        PairAxis::Space => mu * rho,
    };
    Cylinder::intrinsic(center, s_i, mu, p, false)
}

fn average(source: &dyn GradientSource, cyl: &Cylinder, clipped: &mut bool) -> Result<[f64; 2]> {
    *clipped |= !source.covers(cyl);
    Ok(moments(&source.sample(cyl)?)?.mean)
}

struct Evaluated {
    case: PairCase,
    delta: f64,
    case_bound: f64,
    n0: usize,
    n1: usize,
    clipped: bool,
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    source: &dyn GradientSource,
    axis: PairAxis,
    z0: Point,
    z1: Point,
    r0: f64,
    s_radius: f64,
    mu0: f64,
    params: &CoveringParams,
    n_max: usize,
) -> Result<Evaluated> {
    let p = params.p;
    let (g0, g1) = (source.gradient(&z0)?, source.gradient(&z1)?);
    let delta = dist(&g0, &g1);
    let d = parabolic_distance(&z0, &z1);
    let outer = Cylinder::intrinsic(z0, s_radius, mu0, p, false)?;
    let inside = dist(&z0.x, &z1.x) < outer.radius && (z1.t - z0.t).abs() < outer.half_time;
    if !inside {
        let (lo, hi) = (mu0.min(mu0.powf(p / 2.0)), mu0.max(mu0.powf(p / 2.0)));
        let case_bound = 2.0 * mu0 / r0 * hi / lo * d;
        return Ok(Evaluated { case: PairCase::Far, delta, case_bound, n0: 0, n1: 0, clipped: false });
    }

    let a = site(source, z0, s_radius, mu0, params, n_max)?;
    let b = site(source, z1, s_radius, mu0, params, n_max)?;
    let mut clipped = a.switching.clipped || b.switching.clipped;
    let (n0, n1) = (a.switching.n0, b.switching.n0);
    let rho = match axis {
        PairAxis::Time => (z1.t - z0.t).abs().sqrt(),
        PairAxis::Space => dist(&z0.x, &z1.x),
    };
    let m0 = scale(axis, a.switching.radius, a.switching.mu, p);
    let m1 = scale(axis, b.switching.radius, b.switching.mu, p);

    let (case, case_bound) = if m0.min(m1) >= 2.0 * rho {
        let c0 = intermediate(axis, z0, rho, a.switching.mu, p)?;
        let c1 = intermediate(axis, z1, rho, b.switching.mu, p)?;
        let (m_c0, m_c1) = (average(source, &c0, &mut clipped)?, average(source, &c1, &mut clipped)?);
        (PairCase::Near, dist(&g0, &m_c0) + dist(&m_c0, &m_c1) + dist(&m_c1, &g1))
    } else if m0.max(m1) <= 2.0 * rho {
        (PairCase::Beyond, a.switching.mu + b.switching.mu)
    } else {
        // Order so that `lo` carries the smaller mu, i.e. the deeper switching index.
        let ((lo, g_lo), (hi, g_hi), z_lo, z_hi) =
            if a.switching.mu <= b.switching.mu { ((&a, g0), (&b, g1), z0, z1) } else { ((&b, g1), (&a, g0), z1, z0) };
        let levels = &lo.chain.levels;
        let n_star = (hi.switching.n0..=lo.switching.n0)
            .take_while(|&n| scale(axis, levels[n].radius, levels[n].mu, p) >= 2.0 * rho)
            .last()
            .unwrap_or(hi.switching.n0);
        let c_star = lo.chain.cylinder(n_star)?.with_center(z_lo);
        let c1 = intermediate(axis, z_hi, rho, hi.switching.mu, p)?;
        let (m_star, m_c1) = (average(source, &c_star, &mut clipped)?, average(source, &c1, &mut clipped)?);
        (PairCase::Mixed, dist(&g_lo, &m_star) + dist(&m_star, &m_c1) + dist(&m_c1, &g_hi))
    };
    Ok(Evaluated { case, delta, case_bound, n0, n1, clipped })
}

/// Draws `z1` at distance `d` from `z0` along the requested axis.
fn partner(axis: PairAxis, dim: usize, z0: Point, d: f64, u: f64) -> Point {
    match axis {
        PairAxis::Time => {
            let dt = if u < 0.5 { -d * d } else { d * d };
            Point { x: z0.x, t: z0.t + dt }
        }
        PairAxis::Space => {
            let dir = if dim == 1 {
                [if u < 0.5 { -1.0 } else { 1.0 }, 0.0]
            } else {
                let a = std::f64::consts::TAU * u;
                [a.cos(), a.sin()]
            };
            Point { x: [z0.x[0] + d * dir[0], z0.x[1] + d * dir[1]], t: z0.t }
        }
    }
}

fn in_q0(z: &Point, center: &Point, r0: f64) -> bool {
    dist(&z.x, &center.x) < r0 && (z.t - center.t).abs() < r0 * r0
}

/// Pairs for one bin and axis, drawn from the Halton sequence and kept when both points
/// lie in `Q0`.
fn draw_pairs(axis: PairAxis, dim: usize, center: Point, r0: f64, bin: usize, count: usize) -> Vec<(Point, Point)> {
    let lo = r0 * 0.5f64.powi(bin as i32);
    let mut out = Vec::with_capacity(count);
    let salt = 1 + 1000 * bin as u64 + if axis == PairAxis::Time { 500 } else { 0 };
    let mut i = salt;
    while out.len() < count && i < salt + 200 * count as u64 {
        let h = halton4(i);
        i += 1;
        let x = if dim == 1 {
            [center.x[0] + r0 * (2.0 * h[0] - 1.0), 0.0]
        } else {
            let (r, a) = (r0 * h[0].sqrt(), std::f64::consts::TAU * h[3]);
            [center.x[0] + r * a.cos(), center.x[1] + r * a.sin()]
        };
        let z0 = Point { x, t: center.t + r0 * r0 * (2.0 * h[1] - 1.0) };
        let d = lo * 2f64.powf(h[2]);
        let z1 = partner(axis, dim, z0, d, radical_inverse(i, 11));
        if in_q0(&z0, &center, r0) && in_q0(&z1, &center, r0) {
            out.push((z0, z1));
        }
    }
    out
}

/// Empirical gradient Hölder certificate on `Q0 = B_{R0}(x_c) x (t_c - R0^2, t_c + R0^2)`.
///
/// Every pair is classified by the switching scales at its two points and evaluated
/// through the intermediate cylinders of its case. The exponent is fitted from the
/// worst difference per dyadic bin; `worst_c` is the largest
/// `|Du(z0) - Du(z1)| / (mu0^a (d / R0)^alpha)` over usable pairs.
pub fn holder_certificate(
    source: &dyn GradientSource,
    center: Point,
    r0: f64,
    s_radius: f64,
    mu0: f64,
    params: &CoveringParams,
    sampling: &PairSampling,
) -> Result<HolderCertificate> {
    params.validate()?;
    if !(r0 > 0.0 && s_radius > 0.0 && mu0 >= 1.0) || sampling.bins == 0 || sampling.pairs_per_bin == 0 {
        return Err(invalid(format!("need R0, S > 0, mu0 >= 1 and a non-empty sampling (R0 = {r0}, S = {s_radius}, mu0 = {mu0})")));
    }
    let p = params.p;
    let dim = source.dim();
    let mut jobs = Vec::new();
    for bin in 0..sampling.bins {
        for axis in [PairAxis::Time, PairAxis::Space] {
            for (z0, z1) in draw_pairs(axis, dim, center, r0, bin, sampling.pairs_per_bin) {
                jobs.push((axis, bin, z0, z1));
            }
        }
    }
    let evaluated: Vec<Result<Evaluated>> =
        jobs.par_iter().map(|&(axis, _, z0, z1)| evaluate(source, axis, z0, z1, r0, s_radius, mu0, params, sampling.n_max)).collect();

    let mut pairs = Vec::with_capacity(jobs.len());
    for (&(axis, bin, z0, z1), ev) in jobs.iter().zip(evaluated) {
        let ev = ev?;
        pairs.push(PairRecord {
            axis,
            case: ev.case,
            bin,
            z0,
            z1,
            distance: parabolic_distance(&z0, &z1),
            delta: ev.delta,
            case_bound: ev.case_bound,
            n0: ev.n0,
            n1: ev.n1,
            clipped: ev.clipped,
            quotient: 0.0,
        });
    }

    let mut bins = Vec::new();
    let mut dropped_bins = Vec::new();
    for bin in 0..sampling.bins {
        let hi = r0 * 0.5f64.powi(bin as i32 - 1);
        let usable: Vec<&PairRecord> = pairs.iter().filter(|q| q.bin == bin && !q.clipped && q.case != PairCase::Far).collect();
        if usable.is_empty() {
            dropped_bins.push(bin);
            continue;
        }
        let worst_delta = usable.iter().map(|q| q.delta).fold(0.0, f64::max);
        bins.push(BinStat { bin, lo: hi / 2.0, hi, pairs: usable.len(), worst_delta });
    }
    let alpha_fit = fit_slope(&bins);
    let alpha = alpha_fit.map_or(1.0, |a| a.clamp(1e-3, 1.0));

    let far_pairs: Vec<&PairRecord> = pairs.iter().filter(|q| q.case == PairCase::Far).collect();
    let (lo, hi) = (mu0.min(mu0.powf(p / 2.0)), mu0.max(mu0.powf(p / 2.0)));
    let far_bound = 2.0 * mu0 / r0 * hi / lo;
    let worst_ratio = far_pairs.iter().map(|q| q.delta / q.distance).fold(0.0, f64::max);
    let far = FarCheck {
        count: far_pairs.len(),
        bound: far_bound,
        worst_ratio,
        holds: worst_ratio <= far_bound * (1.0 + 1e-12),
    };
    let exponent_a = if far.count > 0 { 1.0 + (p / 2.0 - 1.0).abs() } else { 1.0 };

    let scale = mu0.powf(exponent_a);
    for q in &mut pairs {
        q.quotient = q.delta / (scale * (q.distance / r0).powf(alpha));
    }
    let usable = || pairs.iter().filter(|q| !q.clipped);
    let worst_c = usable().map(|q| q.quotient).fold(0.0, f64::max);
    let excluded = pairs.iter().filter(|q| q.clipped).count();

    let mut cases = Vec::new();
    for axis in [PairAxis::Time, PairAxis::Space] {
        for case in [PairCase::Near, PairCase::Mixed, PairCase::Beyond, PairCase::Far] {
            let sel: Vec<&PairRecord> = usable().filter(|q| q.axis == axis && q.case == case).collect();
            cases.push(CaseTable {
                axis,
                case,
                count: sel.len(),
                worst_quotient: sel.iter().map(|q| q.quotient).fold(0.0, f64::max),
                bound_violations: sel.iter().filter(|q| !q.bound_holds()).count(),
            });
        }
    }

    Ok(HolderCertificate {
        alpha_fit,
        alpha,
        worst_c,
        exponent_a,
        mu0,
        r0,
        s_radius,
        bins,
        dropped_bins,
        cases,
        far,
        excluded,
        pairs,
    })
}

/// Least-squares slope of `log worst_delta` against `log` of the bin's geometric middle.
fn fit_slope(bins: &[BinStat]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        bins.iter().filter(|b| b.worst_delta > 0.0).map(|b| ((b.lo * b.hi).sqrt().ln(), b.worst_delta.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

impl HolderCertificate {
    pub fn case_count(&self, case: PairCase) -> usize {
        self.cases.iter().filter(|c| c.case == case).map(|c| c.count).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::source::{exact_lattice, Lattice};
    use crate::solver::Exact;
    use proptest::prelude::*;

    #[test]
    fn halton_points() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
        assert_eq!(halton4(0), [0.0; 4]);
    }

    #[test]
    fn constant_gradient_certifies_anything() {
        let lat = Lattice::new(|_: &Point| [0.3, -0.2], 2, 4, 2).unwrap();
        let params = CoveringParams::calibrated(2.0, 2).unwrap();
        let c = holder_certificate(&lat, Point::new(&[0.0, 0.0], 1.0), 0.5, 0.5, 1.0, &params, &PairSampling::default()).unwrap();
        assert_eq!(c.alpha_fit, None);
        assert_eq!(c.worst_c, 0.0);
        assert!(c.far.holds);
        assert!(c.pairs.iter().all(|q| q.delta == 0.0));
    }

    #[test]
    fn heat_kernel_is_lipschitz_inside() {
        let exact = Exact::heat(1, 10.0).unwrap();
        let lat = exact_lattice(exact, 6, 3).unwrap();
        let params = CoveringParams::calibrated(2.0, 1).unwrap();
        let (center, r0) = (Point::new(&[1.2], 1.0), 0.25);
        let mu0 = sup_mu0(&lat, center, r0).unwrap();
        let s = mu0 * r0;
        let sampling = PairSampling { bins: 8, ..PairSampling::default() };
        let c = holder_certificate(&lat, center, r0, s, mu0, &params, &sampling).unwrap();
        let fit = c.alpha_fit.unwrap();
        assert!(fit >= 0.9, "alpha_fit = {fit}");
        assert!(c.worst_c.is_finite() && c.far.holds);
        assert!(c.far.count > 0 && c.case_count(PairCase::Near) > 0);
    }

    #[test]
    fn far_bound_formula() {
        // mu0 = 2, p = 4: max / min = 2, so the line reads 2 * 2 / R0 * 2.
        let lat = Lattice::new(|z: &Point| [z.x[0].sin(), 0.0], 1, 4, 2).unwrap();
        let params = CoveringParams::calibrated(4.0, 1).unwrap();
        let c = holder_certificate(&lat, Point::new(&[0.0], 0.0), 0.5, 1.0, 2.0, &params, &PairSampling::default()).unwrap();
        assert_eq!(c.far.bound, 16.0);
        assert_eq!(c.exponent_a, 2.0);
        assert!(c.far.count > 0 && c.far.holds);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn worst_c_ignores_linear_shifts(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let field = |z: &Point| [(2.0 * z.x[0]).sin() * (1.0 + z.t), z.x[1] * z.x[0]];
            let base = Lattice::new(field, 2, 3, 2).unwrap();
            let shifted = Lattice::new(move |z: &Point| { let g = field(z); [g[0] + a, g[1] + b] }, 2, 3, 2).unwrap();
            let params = CoveringParams::calibrated(2.0, 2).unwrap();
            let sampling = PairSampling { bins: 4, pairs_per_bin: 4, n_max: 6 };
            let z = Point::new(&[0.0, 0.0], 0.0);
            let c1 = holder_certificate(&base, z, 0.5, 1.0, 3.0, &params, &sampling).unwrap();
            let c2 = holder_certificate(&shifted, z, 0.5, 1.0, 3.0, &params, &sampling).unwrap();
            prop_assert!((c1.worst_c - c2.worst_c).abs() <= 1e-9 * c1.worst_c.max(1e-300));
        }
    }
}
