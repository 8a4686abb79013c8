//! De Giorgi iteration for a derivative component and the full second-alternative pipeline
//! (good slice, expansion of positivity, level shrinking, final iteration) on random fields.

use plap::campaign::criteria::WINDOW_ENDS;
use plap::campaign::{unit_grid, CapRecipe, DerivativeRecipe};
use plap::covering::{derivative_degiorgi, second_alternative};
use plap::rng::CounterRng;

fn main() -> plap::Result<()> {
    let mut rng = CounterRng::new(3, 0);
    let grid = unit_grid(2, 1.0 / 16.0, 1.0 / 32.0)?;

    for _ in 0..5 {
        let field = DerivativeRecipe::draw(&mut rng, 2).field(&grid, 1.0)?;
        let run = derivative_degiorgi(&field, 0, 1.0, 2.0, 0.002, 0.0)?;
        println!(
            "derivative: fraction below mu/2 = {:.4} (hypothesis {})  early exit {}  min on Q_1/2 = {:.4}  conclusion {:?}",
            run.measure_fraction, run.measure_hypothesis, run.early_exit, run.min_on_half, run.conclusion
        );
    }

    for _ in 0..3 {
        let field = CapRecipe::draw(&mut rng, 2).field(&grid)?;
        let alt = second_alternative(&field, 0.1, 2.0, 1e-3, &WINDOW_ENDS)?;
        println!("second alternative: {} component runs, verified {}", alt.runs.len(), alt.verified);
        for r in &alt.runs {
            println!(
                "  axis {} sign {:+}  t* = {:.4}  j_delta = {}  final converged {}",
                r.axis, r.sign, r.slice.t_star, r.shrink.j_delta, r.last.converged
            );
        }
    }
    Ok(())
}
