//! Discrete forms of the functional inequalities used by the iteration arguments.

mod cutoff;
mod energy;
mod level;
mod log;
mod sobolev;

pub use cutoff::{Cutoff, CutoffSamples};
pub use energy::{
    energy_balance, hessian_norm_sq, quadrature, truncated_energy, EnergyBalance, PowerWeight, TruncatedEnergy,
    UnitWeight, Weight,
};
pub use level::{chebyshev_check, remark_cheb, truncate, ChebyshevReport, LevelMomentReport, Levels};
pub use log::{derivative_energy_check, log_estimate_check, log_weight, DerivativeEnergy, LogEstimate};
pub use sobolev::{levelset_poincare, sobolev_embedding_ratio, sobolev_poincare_ratio, Ratio};

/// Smallest `C >= 0` with `lhs <= C rhs`; 0 when `lhs <= 0`, infinite when only `rhs` vanishes.
pub fn smallest_constant(lhs: f64, rhs: f64) -> f64 {
    if lhs <= 0.0 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    }
}
