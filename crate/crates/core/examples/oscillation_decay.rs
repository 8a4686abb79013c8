//! Intrinsic cylinder chain and quadratic oscillation decay on an exact gradient field,
//! followed by the Cauchy-type consequences with their empirical constants.

use plap::campaign::criteria::{consequence_constants, covering_anchor, reference_mu0};
use plap::campaign::oracle;
use plap::covering::{chain, exact_lattice, initial_radius_range, oscillation_decay, CoveringParams};

fn main() -> plap::Result<()> {
    let case = oracle(3.0, 2)?;
    let (z, r0) = covering_anchor(&case);
    let mu0 = reference_mu0(&case)?;
    let params = CoveringParams::calibrated(case.p(), case.dim())?;
    let (s, _) = initial_radius_range(r0, mu0, case.p());
    println!("{}: R0 = {r0:.4}  mu0 = {mu0:.4}  S = {s:.4}", case.name());

    let ch = chain(z, s, mu0, &params, 6)?;
    for l in &ch.levels {
        println!("  chain radius {:.4e}  mu {:.4e}", l.radius, l.mu);
    }
    println!("  eta = {:.4}  identity residual {:.1e}", ch.eta, ch.identity_residual());

    let src = exact_lattice(case.exact, 24, 24)?;
    let decay = oscillation_decay(&src, z, 2.0 * r0, mu0, &params, 6)?;
    for l in &decay.levels {
        println!("  level {}  radius {:.4e}  oscillation {:.4e}  samples {}", l.i, l.radius, l.oscillation, l.count);
    }

    for (name, c) in consequence_constants(&case, mu0, 24)? {
        println!("  {name:<28} {c:.4e}");
    }
    Ok(())
}
