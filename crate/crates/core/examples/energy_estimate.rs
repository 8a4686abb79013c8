//! Smallest admissible constant of the truncated energy estimate on exact gradient profiles.
//! The same constant works whether the equation is singular, linear or degenerate.

use plap::campaign::criteria::energy_constant;
use plap::campaign::oracle;

fn main() -> plap::Result<()> {
    let mut seen = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        let case = oracle(p, 1)?;
        let c = energy_constant(&case, 64)?;
        println!("{:<22} empirical constant {c:.4}", case.name());
        seen.push(c);
    }
    let (lo, hi) = seen.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &c| (lo.min(c), hi.max(c)));
    println!("spread max/min = {:.3}", hi / lo);
    Ok(())
}
