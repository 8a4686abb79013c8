//! De Giorgi iteration: exponents, closed-form constants and both iteration lemmas.

mod degiorgi;
mod exponents;
mod lemmas;

pub use degiorgi::{
    calibrate_c1, choose_k, degenerate_bound, degiorgi_first, lipschitz_bound, ln_lipschitz_bound, power_integral,
    rough_lipschitz_recursion, second_iteration, singular_bound, sup_over, truncated_moment, DeGiorgiTrace,
    LevelChoice, RoughLipschitz, SecondIteration, StepRecord, Window, N_MAX, Y_FLOOR,
};
pub use exponents::{critical_p, BoundConstants, Exponents, Mode};
pub use lemmas::{bounded_recursive, fast_geometric, ln_bounded_recursive, sample_admissible_ln_y0, FastGeometric};
