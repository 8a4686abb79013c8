//! The intrinsic covering argument: cylinder chains, the two alternatives, oscillation
//! decay and its consequences, the Hölder pair analysis, and the De Giorgi machinery for
//! the derivatives.

mod chain;
mod derivative;
mod holder;
mod linear;
mod oscillation;
mod params;
mod rescale;
mod second;
mod source;

pub use chain::{
    chain, initial_radius_range, measure_alternative, sup_scale, switching_radius, ChainLevel, CylinderChain,
    MeasureAlternative, SwitchReason, SwitchingRecord,
};
pub use derivative::{
    derivative_degiorgi, dual_derivative_degiorgi, negate, DerivativeDeGiorgi, Side, DEGIORGI_STEPS,
};
pub use holder::{
    halton4, holder_certificate, radical_inverse, sup_mu0, BinStat, CaseTable, FarCheck, HolderCertificate, PairAxis, PairCase,
    PairRecord, PairSampling,
};
pub use linear::{linear_decay_check, linear_solve, LinearDecay, MatrixField};
pub use oscillation::{
    cauchy_consequences, oscillation_decay, CauchyReport, Consequence, OscLevel, OscillationDecay, MIN_SAMPLES,
};
pub use params::{check_inclusion, inclusion_on_grid, Alpha2Reading, CoveringParams};
pub use rescale::{rescale_to_unit, Normalization};
pub use second::{
    expansion_of_positivity, final_degiorgi, final_recursion, final_threshold, good_time_slice, level_measure, levelset_shrink,
    second_alternative, second_alternative_component, ComponentRun, Expansion, FinalDeGiorgi, GoodSlice, LevelShrink,
    SecondAlternative, ShrinkEvidence, FINAL_STEPS, MAX_LEVEL,
};
pub use source::{cylinder_moments, exact_lattice, moments, GradientSource, Lattice, Moments};
