//! Calibrate the first-iteration constant on exact traces, then compare the measured inner
//! supremum of |Du| from the discrete solver with the closed-form Lipschitz bound.

use plap::campaign::{calibrate_case_c1, lipschitz_spacing, lipschitz_window, oracle, solve_case};
use plap::iterate::{lipschitz_bound, power_integral, second_iteration, sup_over, Exponents, Mode};
use plap::mesh::discrete_gradient;

fn main() -> plap::Result<()> {
    let (eps, sigma) = (0.5, 0.5);
    for (p, dim) in [(1.6, 1), (2.5, 1), (3.0, 2)] {
        let case = oracle(p, dim)?;
        let h = lipschitz_spacing(dim);
        let c1 = calibrate_case_c1(&case, Mode::Unified, h)?;
        let exps = Exponents::choose(Mode::Unified, p, dim)?;
        let window = lipschitz_window(&case)?;

        let v = discrete_gradient(&solve_case(&case, h, 33)?).magnitude();
        let integral = power_integral(&v, &window.full(), exps.integrand_power(eps))?;
        let bound = lipschitz_bound(&exps, integral, sigma, window.rho, window.theta, eps, c1)?;
        let sup = sup_over(&v, &window.inner(sigma))?;
        let second = second_iteration(&v, &window, sigma, eps, &exps, c1, 8)?;
        println!(
            "{:<22} C1 = {c1:.3e}  sup |Du| = {sup:.4}  bound = {bound:.3e}  recursive = {:.3e}",
            case.name(),
            second.final_bound
        );
    }
    Ok(())
}
