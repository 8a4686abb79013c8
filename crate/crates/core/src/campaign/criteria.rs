//! The twelve acceptance criteria. Each returns every check it made; none of them panics
//! on a failed inequality, so a report can show exactly what broke.

use crate::calculus::{chebyshev_check, remark_cheb, truncated_energy, Cutoff, Levels};
use crate::covering::{
    chain, check_inclusion, dual_derivative_degiorgi, derivative_degiorgi, exact_lattice, holder_certificate,
    initial_radius_range, level_measure, negate, oscillation_decay, second_alternative, sup_mu0, switching_radius,
    cauchy_consequences, CoveringParams, HolderCertificate, Lattice, PairSampling,
};
use crate::error::{Error, Result};
use crate::iterate::{
    bounded_recursive, critical_p, degenerate_bound, fast_geometric, power_integral, sample_admissible_ln_y0,
    second_iteration, singular_bound, sup_over, Exponents, Mode,
};
use crate::mesh::{discrete_gradient, Cylinder, GridFunction, Point, SpaceTimeGrid, SpatialGrid};
use crate::rng::CounterRng;
use crate::solver::{verify_structure, FluxParams};

use super::calibrate::{lipschitz_spacing, lipschitz_window, Constants, DERIVATIVE_SPACING, LIPSCHITZ_LEVELS};
use super::checks::{CheckRecord, CriterionOutcome};
use super::corpus::{convergence_study, oracle, solve_case, OracleCase};
use super::manufactured::{unit_grid, CapRecipe, DerivativeRecipe};

/// Constants at or below this are round-off and count as equal.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

fn tag(p: f64, dim: usize) -> String {
    format!("p={p} N={dim}")
}

pub fn criterion_1() -> Result<CriterionOutcome> {
    const REF: &str = "fast geometric convergence lemma";
    let mut out = CriterionOutcome::new(1, "fast geometric convergence");
    let below = fast_geometric(2.0, 4.0, 1.0, 0.125, 40)?;
    out.push(CheckRecord::at_most("threshold equals 1/8", REF, (below.threshold - 0.125).abs(), 0.0));
    out.push(CheckRecord::at_most("X_40 from the threshold", REF, *below.sequence.last().unwrap_or(&f64::NAN), 1e-12));
    let above = fast_geometric(2.0, 4.0, 1.0, 1.25, 40)?;
    let last = if above.diverged { f64::INFINITY } else { *above.sequence.last().unwrap_or(&f64::NAN) };
    out.push(CheckRecord::at_least("X_40 from ten times the threshold", REF, last, 1e6));
    Ok(out)
}

pub fn criterion_2(seed: u64) -> Result<CriterionOutcome> {
    const REF: &str = "bounded recursive sequence lemma";
    let mut out = CriterionOutcome::new(2, "equibounded recursive sequences");
    let bound = bounded_recursive(2.0, 4.0, 0.5)?;
    out.push(CheckRecord::at_most("bound equals 256", REF, (bound - 256.0).abs(), 1e-10));
    let mut rng = CounterRng::new(seed, 2);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let len = 100 + rng.below(200);
        let cap = rng.log_range(1e-6, 1e12);
        worst = worst.max(sample_admissible_ln_y0(2.0, 4.0, 0.5, len, cap, &mut rng));
    }
    out.push(CheckRecord::at_most("largest Y_0 over 10^4 sequences", REF, worst.exp(), bound));
    Ok(out)
}

/// `16^3` nodes: a `16 x 16` spatial grid on the unit square with 16 time levels.
fn cube_grid() -> Result<SpaceTimeGrid> {
    let h = 1.0 / 15.0;
    SpaceTimeGrid::new(SpatialGrid::new(h, &[(0.0, 1.0), (0.0, 1.0)])?, h, 0.0, 16)
}

fn random_field(grid: &SpaceTimeGrid, rng: &mut CounterRng) -> Result<GridFunction> {
    let scale = rng.log_range(1e-3, 1e3);
    let zeros = rng.uniform() * 0.5;
    let values = (0..grid.len()).map(|_| if rng.uniform() < zeros { 0.0 } else { scale * rng.uniform() }).collect();
    GridFunction::new(grid.clone(), values)
}

fn random_cylinder(rng: &mut CounterRng) -> Result<Cylinder> {
    let center = Point::new(&[rng.range(0.2, 0.8), rng.range(0.2, 0.8)], rng.range(0.3, 0.8));
    Cylinder::standard(center, rng.range(0.15, 0.6), rng.range(0.1, 0.5), rng.uniform() < 0.5)
}

pub fn criterion_3(seed: u64) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(3, "exact level-set inequalities");
    let grid = cube_grid()?;
    let mut rng = CounterRng::new(seed, 3);
    let (mut cheb_fail, mut moment_fail) = (0usize, 0usize);
    for _ in 0..1000 {
        let v = random_field(&grid, &mut rng)?;
        let cyl = random_cylinder(&mut rng)?;
        let top = v.max().max(1e-300);
        let k = rng.range(0.0, top);
        let k_next = k + rng.range(1e-6, 1.0) * (top - k).max(1e-12);
        if !chebyshev_check(&v, &cyl, k, k_next, rng.range(0.25, 4.0))?.holds {
            cheb_fail += 1;
        }
        let levels = Levels { k: rng.range(0.1, 1.5) * top };
        if !remark_cheb(&v, &cyl, levels, rng.below(8), rng.range(0.25, 4.0))?.holds {
            moment_fail += 1;
        }
    }
    out.push(CheckRecord::at_most("Chebyshev failures in 1000 fields", "Chebyshev level-set inequality", cheb_fail as f64, 0.0));
    out.push(CheckRecord::at_most(
        "moment bound failures in 1000 fields",
        "truncated moment lower bound on the next level set",
        moment_fail as f64,
        0.0,
    ));
    Ok(out)
}

/// Spacings and the required order per dimension.
pub fn refinement_plan(dim: usize) -> (Vec<f64>, f64) {
    if dim == 1 {
        (vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0], 1.0)
    } else {
        (vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 0.8)
    }
}

/// Interior radius and recorded levels of the convergence runs.
pub const CONVERGENCE_RADIUS: f64 = 0.3;
pub const CONVERGENCE_LEVELS: usize = 5;

pub fn criterion_4() -> Result<CriterionOutcome> {
    const REF: &str = "explicit scheme against closed-form solutions";
    let mut out = CriterionOutcome::new(4, "solver convergence");
    for dim in [1, 2] {
        let (spacings, order) = refinement_plan(dim);
        for p in [2.0, 3.0] {
            let conv = convergence_study(&oracle(p, dim)?, &spacings, CONVERGENCE_LEVELS, CONVERGENCE_RADIUS)?;
            out.push(CheckRecord::at_least(format!("{} max-norm order", conv.case), REF, conv.min_order(), order));
        }
    }
    Ok(out)
}

pub fn criterion_5(seed: u64) -> Result<CriterionOutcome> {
    const REF: &str = "growth and ellipticity structure conditions";
    let mut out = CriterionOutcome::new(5, "structure conditions");
    for dim in [1, 2] {
        for p in [1.5, 2.0, 3.0, 4.0] {
            let params = FluxParams::new(p, 0.0, dim)?;
            let c0 = (p - 1.0).min(1.0);
            let c1 = 2.0 * (p - 1.0).max(1.0);
            let s = verify_structure(&params, c0, c1, 10_000, seed)?;
            out.push(CheckRecord::at_most(format!("growth ratio {}", tag(p, dim)), REF, s.worst_upper_ratio, 1.0 + 1e-12));
            out.push(CheckRecord::at_least(format!("ellipticity ratio {}", tag(p, dim)), REF, s.worst_lower_ratio, 1.0 - 1e-12));
        }
    }
    Ok(out)
}

/// Smallest constant of the truncated energy estimate on the exact profile for `case`,
/// maximized over the first six level pairs.
pub fn energy_constant(case: &OracleCase, nodes: usize) -> Result<f64> {
    let h = 2.0 * case.extent / (nodes - 1) as f64;
    let v = discrete_gradient(&case.sample(h, nodes)?).magnitude();
    let exps = Exponents::choose(Mode::Unified, case.p(), case.dim())?;
    let z = Point::new(&[0.0, 0.0], case.t1);
    let span = case.t1 - case.t0;
    let outer = Cylinder::standard(z, 0.8, 0.95 * span, true)?;
    let inner = Cylinder::standard(z, 0.4, 0.5 * span, true)?;
    let cutoff = Cutoff::between(&inner, &outer)?;
    let k = sup_over(&v, &outer)?;
    let mut worst = 0.0f64;
    for n in 0..6 {
        let k_next = k * (1.0 - 0.5f64.powi(n + 1));
        worst = worst.max(truncated_energy(&v, &outer, &cutoff, k, k_next, &exps)?.empirical_c);
    }
    Ok(worst)
}

pub fn criterion_6() -> Result<CriterionOutcome> {
    const REF: &str = "unified truncated energy estimate";
    let mut out = CriterionOutcome::new(6, "one energy constant across regimes");
    let mut constants = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        let c = energy_constant(&oracle(p, 1)?, 64)?;
        out.push(CheckRecord::holds(format!("finite constant {}", tag(p, 1)), REF, c.is_finite() && c > 0.0).with_constant(c));
        constants.push(c);
    }
    let hi = constants.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = constants.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(CheckRecord::at_most("max over min across p", REF, hi / lo, 3.0));
    Ok(out)
}

fn lipschitz_data(case: &OracleCase) -> Result<GridFunction> {
    let u = solve_case(case, lipschitz_spacing(case.dim()), LIPSCHITZ_LEVELS)?;
    Ok(discrete_gradient(&u).magnitude())
}

fn admissible(p: f64, dim: usize) -> Result<()> {
    if !(p > critical_p(dim)) {
        return Err(Error::Precondition(format!("p = {p} must exceed 2N/(N+2) = {}", critical_p(dim))));
    }
    Ok(())
}

/// Measured `sup |Du|` on the inner cylinder against the closed-form bound, plus the
/// recursive composition of the second iteration, for one mode and offset.
fn bound_checks(
    out: &mut CriterionOutcome,
    reference: &str,
    constants: &Constants,
    mode: Mode,
    p: f64,
    dim: usize,
    eps: f64,
    sigma: f64,
) -> Result<()> {
    admissible(p, dim)?;
    let case = oracle(p, dim)?;
    let exps = Exponents::choose(mode, p, dim)?;
    let v = lipschitz_data(&case)?;
    let window = lipschitz_window(&case)?;
    let c1 = constants.c1(mode, p, dim)?;
    let integral = power_integral(&v, &window.full(), exps.integrand_power(eps))?;
    let bound = crate::iterate::lipschitz_bound(&exps, integral, sigma, window.rho, window.theta, eps, c1)?;
    let sup = sup_over(&v, &window.inner(sigma))?;
    let label = format!("{mode:?} {} eps={eps}", tag(p, dim)).to_lowercase();
    out.push(CheckRecord::at_most(format!("inner sup vs bound {label}"), reference, sup, bound).with_constant(c1));
    let second = second_iteration(&v, &window, sigma, eps, &exps, c1, 8)?;
    out.push(CheckRecord::at_least(format!("recursive bound vs M_0 {label}"), reference, second.final_bound, second.m[0]));
    out.push(CheckRecord::holds(format!("recursive and closed forms agree {label}"), reference, second.consistent));
    Ok(())
}

/// The unified Lipschitz bound on discrete solutions for each `p` and `N`.
pub fn lipschitz_checks(constants: &Constants, ps: &[f64], dims: &[usize], eps: f64, sigma: f64) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(7, "Lipschitz bound end to end");
    for &dim in dims {
        for &p in ps {
            bound_checks(&mut out, "unified Lipschitz bound", constants, Mode::Unified, p, dim, eps, sigma)?;
        }
    }
    Ok(out)
}

/// Degenerate and singular corollaries and the seam between them at `p = 2`.
pub fn corollary_checks(constants: &Constants, dims: &[usize], sigma: f64) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(7, "Lipschitz corollaries");
    for &dim in dims {
        bound_checks(&mut out, "degenerate Lipschitz corollary", constants, Mode::Degenerate, 3.0, dim, 1.0, sigma)?;
        bound_checks(&mut out, "singular Lipschitz corollary", constants, Mode::Singular, 1.6, dim, 1.0, sigma)?;

        let case = oracle(2.0, dim)?;
        let v = lipschitz_data(&case)?;
        let w = lipschitz_window(&case)?;
        let c1 = constants.c1(Mode::Degenerate, 2.0, dim)?;
        let eps = 1.0;
        let exps = Exponents::choose(Mode::Degenerate, 2.0, dim)?;
        let integral = power_integral(&v, &w.full(), exps.integrand_power(eps))?;
        let deg = degenerate_bound(2.0, dim, integral, sigma, w.rho, w.theta, eps, c1)?;
        let sing = singular_bound(2.0, dim, integral, sigma, w.rho, w.theta, eps, c1)?;
        let rel = (deg - sing).abs() / deg.abs().max(f64::MIN_POSITIVE);
        out.push(CheckRecord::at_most(format!("degenerate vs singular at p=2 N={dim}"), "degenerate and singular seam", rel, 1e-10));
        for mode in [Mode::Unified, Mode::Degenerate, Mode::Singular] {
            let exps = Exponents::choose(mode, 2.0, dim)?;
            let eps = exps.default_offset();
            let c1 = constants.c1(mode, 2.0, dim)?;
            let second = second_iteration(&v, &w, sigma, eps, &exps, c1, 8)?;
            let rel = (second.final_bound - second.closed_form).abs() / second.closed_form;
            out.push(CheckRecord::at_most(
                format!("{mode:?} closed form vs recursion at p=2 N={dim}").to_lowercase(),
                "closed form of the recursive bound",
                rel,
                1e-10,
            ));
        }
    }
    Ok(out)
}

pub fn criterion_7(constants: &Constants) -> Result<CriterionOutcome> {
    let mut out = lipschitz_checks(constants, &[1.6, 2.0, 2.5, 3.0], &[1, 2], 0.5, 0.5)?;
    out.checks.extend(corollary_checks(constants, &[1, 2], 0.5)?.checks);
    Ok(out)
}

pub fn criterion_8(seed: u64) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(8, "covering geometry");
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let mut failures = 0usize;
    let mut cases = 0usize;
    for &p in &[1.5, 2.0, 3.0] {
        for &eta in &grid {
            for &sigma in &grid {
                let c0 = 0.5 * sigma * eta.min(eta.powf(p / 2.0));
                cases += 1;
                if !check_inclusion(c0, eta, sigma, p) {
                    failures += 1;
                }
            }
        }
    }
    out.push(CheckRecord::at_most(format!("inclusion failures in {cases} cases"), "intrinsic cylinder inclusion", failures as f64, 0.0));
    let mut rng = CounterRng::new(seed, 8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = rng.range(1.2, 4.0);
        let params = CoveringParams { eta: rng.range(0.05, 0.95), sigma: rng.range(0.05, 0.95), ..CoveringParams::calibrated(p, 1)? };
        worst = worst.max(chain(Point::origin(), 1.0, 1.0, &params, 50)?.identity_residual());
    }
    out.push(CheckRecord::at_most("chain identity residual", "radius and scale identity along the chain", worst, 1e-12));
    Ok(out)
}

/// Reference point and radius for the covering runs on an oracle case: the final time of the
/// window, slightly off axis, with `16 R0^2` equal to half the window length.
pub fn covering_anchor(case: &OracleCase) -> (Point, f64) {
    (Point::new(&[0.125, 0.0], case.t1), (case.t1 / 32.0).sqrt())
}

/// `mu_0` from a fine lattice, held fixed while the coarser lattices are compared.
pub fn reference_mu0(case: &OracleCase) -> Result<f64> {
    let (z, r0) = covering_anchor(case);
    sup_mu0(&exact_lattice(case.exact, 96, 96)?, z, r0)
}

fn anchored_lattice(case: &OracleCase, m: usize) -> Result<Lattice<impl Fn(&Point) -> [f64; 2] + Sync>> {
    let (z, r0) = covering_anchor(case);
    Ok(exact_lattice(case.exact, m, m)?.within(Cylinder::standard(z, 4.0 * r0, 16.0 * r0 * r0, false)?))
}

/// Empirical constants of the oscillation-decay consequences on lattice size `m`.
pub fn consequence_constants(case: &OracleCase, mu0: f64, m: usize) -> Result<Vec<(&'static str, f64)>> {
    let (z, r0) = covering_anchor(case);
    let params = CoveringParams::calibrated(case.p(), case.dim())?;
    let src = anchored_lattice(case, m)?;
    let (s_radius, _) = initial_radius_range(r0, mu0, case.p());
    let ch = chain(z, s_radius, mu0, &params, 12)?;
    let sw = switching_radius(&src, &ch, params.nu, 0.0)?;
    let decay = oscillation_decay(&src, z, sw.radius, sw.mu, &params, 8)?;
    let report = cauchy_consequences(&src, &ch, &sw, &decay, &params, 6)?;
    Ok(report.all().iter().map(|(name, c)| (*name, c.empirical)).collect())
}

/// `max/min` of two constants; 1 when both are at round-off level.
pub fn stability_ratio(a: f64, b: f64) -> f64 {
    if a.abs() <= ROUNDOFF_FLOOR && b.abs() <= ROUNDOFF_FLOOR {
        return 1.0;
    }
    if !(a.is_finite() && b.is_finite()) || a <= 0.0 || b <= 0.0 {
        return f64::INFINITY;
    }
    a.max(b) / a.min(b)
}

pub fn criterion_9() -> Result<CriterionOutcome> {
    const REF: &str = "consequences of oscillation decay";
    let mut out = CriterionOutcome::new(9, "oscillation decay consequences");
    for dim in [1, 2] {
        for p in [1.5, 2.0, 3.0] {
            let case = oracle(p, dim)?;
            let mu0 = reference_mu0(&case)?;
            let coarse = consequence_constants(&case, mu0, 12)?;
            let fine = consequence_constants(&case, mu0, 24)?;
            for ((name, a), (_, b)) in coarse.iter().zip(&fine) {
                out.push(CheckRecord::at_most(format!("{name} stability {}", tag(p, dim)), REF, stability_ratio(*a, *b), 2.0).with_constant(*b));
            }
        }
    }
    let affine = Lattice::new(|z: &Point| [2.0 * z.x[0] + z.x[1], z.x[0] - 3.0 * z.x[1]], 2, 10, 3)?;
    let decay = oscillation_decay(&affine, Point::new(&[0.2, -0.1], 0.0), 0.8, 1.3, &CoveringParams::calibrated(2.0, 2)?, 8)?;
    let worst = decay
        .levels
        .windows(2)
        .map(|w| (w[1].oscillation / w[0].oscillation / 0.25 - 1.0).abs())
        .fold(0.0f64, f64::max);
    out.push(CheckRecord::at_most("affine gradient quarter scaling", "quadratic moment scaling of affine gradients", worst, 1e-10));
    Ok(out)
}

/// Hölder certificates on the oracle corpus for `p` in `{1.6, 2, 3}` and `N` in `{1, 2}`.
pub fn holder_runs() -> Result<Vec<(String, HolderCertificate)>> {
    let sampling = PairSampling { bins: 8, pairs_per_bin: 12, n_max: 12 };
    let mut runs = Vec::new();
    for dim in [1, 2] {
        for p in [1.6, 2.0, 3.0] {
            let case = oracle(p, dim)?;
            let (z, r0) = covering_anchor(&case);
            let mu0 = reference_mu0(&case)?;
            let params = CoveringParams::calibrated(p, dim)?;
            let (s_radius, _) = initial_radius_range(r0, mu0, p);
            let cert = holder_certificate(&anchored_lattice(&case, 12)?, z, r0, s_radius, mu0, &params, &sampling)?;
            runs.push((tag(p, dim), cert));
        }
    }
    Ok(runs)
}

pub fn holder_outcome(runs: &[(String, HolderCertificate)]) -> CriterionOutcome {
    const REF: &str = "gradient Hölder certificate";
    const FAR: &str = "far-pair difference bound";
    let mut out = CriterionOutcome::new(10, "gradient Hölder certificate");
    for (t, cert) in runs {
        let fit = cert.alpha_fit.unwrap_or(f64::NAN);
        out.push(CheckRecord::at_least(format!("fitted exponent {t}"), REF, fit, 0.1).with_constant(cert.worst_c));
        out.push(CheckRecord::holds(format!("finite Hölder constant {t}"), REF, cert.worst_c.is_finite()));
        out.push(CheckRecord::at_least(format!("far pairs sampled {t}"), FAR, cert.far.count as f64, 1.0));
        out.push(CheckRecord::at_most(format!("far-pair ratio {t}"), FAR, cert.far.worst_ratio, cert.far.bound));
    }
    out
}

pub fn criterion_10() -> Result<CriterionOutcome> {
    Ok(holder_outcome(&holder_runs()?))
}

pub fn criterion_11(constants: &Constants, seed: u64) -> Result<CriterionOutcome> {
    const REF: &str = "derivative De Giorgi lemma";
    let mut out = CriterionOutcome::new(11, "derivative De Giorgi iteration");
    let big_a = 2.0;
    for dim in [1, 2] {
        let nu = constants.derivative_nu(dim)?;
        let grid = unit_grid(dim, DERIVATIVE_SPACING.0, DERIVATIVE_SPACING.1)?;
        // Stream 1: the calibration used stream 0 of the same seed.
        let mut rng = CounterRng::new(seed, 1);
        let (mut trials, mut draws, mut failures, mut iterated, mut asymmetric) = (0usize, 0usize, 0usize, 0usize, 0usize);
        let mut worst_margin = f64::INFINITY;
        while trials < 100 && draws < 10_000 {
            draws += 1;
            let mu = rng.log_range(0.5, 2.0);
            let field = DerivativeRecipe::draw(&mut rng, dim).field(&grid, mu)?;
            let primal = derivative_degiorgi(&field, 0, mu, big_a, nu, 0.0)?;
            if !primal.measure_hypothesis || primal.gradient_bound > big_a * mu {
                continue;
            }
            trials += 1;
            iterated += usize::from(!primal.early_exit);
            if primal.conclusion != Some(true) {
                failures += 1;
            }
            worst_margin = worst_margin.min(primal.min_on_half / (mu / 4.0));
            let dual = dual_derivative_degiorgi(&negate(&field)?, 0, mu, big_a, nu, 0.0)?;
            let same = dual.trace == primal.trace
                && dual.levels == primal.levels
                && dual.min_on_half == primal.min_on_half
                && dual.measure_fraction == primal.measure_fraction
                && dual.conclusion == primal.conclusion;
            asymmetric += usize::from(!same);
        }
        let d = format!("N={dim}");
        out.push(CheckRecord::at_least(format!("admissible trials {d}"), REF, trials as f64, 100.0));
        out.push(CheckRecord::at_most(format!("trials without the lower bound {d}"), REF, failures as f64, 0.0).with_constant(nu));
        out.push(CheckRecord::at_least(format!("smallest min over Q_1/2 in units of mu/4 {d}"), REF, worst_margin, 1.0));
        out.push(CheckRecord::holds(format!("some trials iterate {d}"), REF, iterated > 0));
        out.push(CheckRecord::at_most(format!("dual mismatches {d}"), "dual derivative symmetry", asymmetric as f64, 0.0));
    }
    Ok(out)
}

/// Window ends for the level-set shrinking.
pub const WINDOW_ENDS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

pub fn criterion_12(seed: u64) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(12, "second alternative pipeline");
    let (nu, big_a, delta) = (0.1, 2.0, 1e-3);
    let mut rng = CounterRng::new(seed, 12);
    for dim in [1, 2] {
        let grid = unit_grid(dim, DERIVATIVE_SPACING.0, DERIVATIVE_SPACING.1)?;
        let ball = Cylinder::standard(Point::origin(), 1.0, 1.0, false)?.nodes(&grid)?.space;
        let ball_volume = ball.len() as f64 * grid.space().cell_volume();
        let (mut runs, mut bad_slice, mut bad_eta, mut bad_window, mut bad_final) = (0usize, 0, 0, 0, 0);
        let mut hypothesis_fail = 0usize;
        let mut verified = 0usize;
        let trials = 10;
        for _ in 0..trials {
            let field = CapRecipe::draw(&mut rng, dim).field(&grid)?;
            let alt = second_alternative(&field, nu, big_a, delta, &WINDOW_ENDS)?;
            verified += usize::from(alt.verified);
            for run in &alt.runs {
                runs += 1;
                hypothesis_fail += usize::from(!(run.upper_fraction < 1.0 - nu));
                let t = run.slice.t_star;
                bad_slice += usize::from(!(t > -1.0 && t < -nu / 2.0));
                let e = &run.expansion;
                bad_eta += usize::from(!(e.eta0 < nu && e.per_slice.iter().all(|&(_, f)| f <= e.bound)));
                let w = field.component(run.axis).map(|v| run.sign * v);
                let j = run.shrink.j_delta;
                let all_windows = run.shrink.per_window.len() == WINDOW_ENDS.len()
                    && WINDOW_ENDS.iter().all(|&s| level_measure(&w, &ball, t, s, j) <= delta * ball_volume * (s - t));
                bad_window += usize::from(!all_windows);
                bad_final += usize::from(!(run.last.converged && run.last.zero_measure_verified));
            }
        }
        let d = format!("N={dim}");
        out.push(CheckRecord::at_most(format!("alternative hypothesis violations {d}"), "second alternative hypothesis", hypothesis_fail as f64, 0.0));
        out.push(CheckRecord::at_most(format!("good slice outside range {d}"), "good time slice", bad_slice as f64, 0.0));
        out.push(CheckRecord::at_most(format!("expansion failures {d}"), "expansion of positivity", bad_eta as f64, 0.0));
        out.push(CheckRecord::at_most(format!("j_delta failing some window {d}"), "level-set shrinking", bad_window as f64, 0.0));
        out.push(CheckRecord::at_most(format!("final iteration failures {d}"), "final De Giorgi iteration", bad_final as f64, 0.0));
        out.push(CheckRecord::at_least(format!("verified trials {d}"), "second alternative conclusion", verified as f64, trials as f64));
        out.push(CheckRecord::at_least(format!("component runs {d}"), "second alternative conclusion", runs as f64, (trials * 2 * dim) as f64));
    }
    Ok(out)
}

/// Runs criteria `1..=12` in order with the given constants.
pub fn all_criteria(constants: &Constants, seed: u64) -> Result<Vec<CriterionOutcome>> {
    Ok(vec![
        criterion_1()?,
        criterion_2(seed)?,
        criterion_3(seed)?,
        criterion_4()?,
        criterion_5(seed)?,
        criterion_6()?,
        criterion_7(constants)?,
        criterion_8(seed)?,
        criterion_9()?,
        criterion_10()?,
        criterion_11(constants, seed)?,
        criterion_12(seed)?,
    ])
}
