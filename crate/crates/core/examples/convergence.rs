//! Explicit scheme against the closed-form solutions: interior max-norm error and observed
//! order under refinement, for the heat kernel and a Barenblatt profile in one and two
//! dimensions.

use plap::campaign::criteria::{refinement_plan, CONVERGENCE_LEVELS, CONVERGENCE_RADIUS};
use plap::campaign::{convergence_study, oracle};

fn main() -> plap::Result<()> {
    for dim in [1, 2] {
        let (spacings, required) = refinement_plan(dim);
        for p in [2.0, 3.0] {
            let conv = convergence_study(&oracle(p, dim)?, &spacings, CONVERGENCE_LEVELS, CONVERGENCE_RADIUS)?;
            println!("{} (required order {required})", conv.case);
            for (i, (h, e)) in conv.spacings.iter().zip(&conv.errors).enumerate() {
                let order = if i == 0 { String::from("-") } else { format!("{:.3}", conv.orders[i - 1]) };
                println!("  h = {h:<10.6} error = {e:.3e}  order = {order}");
            }
        }
    }
    Ok(())
}
