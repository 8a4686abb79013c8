//! Discrete evolution for `u_t = div A(Du)`, exact reference solutions and the weak residual.

mod flux;
mod oracle;
mod scheme;
mod weak;

pub use flux::{flux, flux_jacobian, verify_structure, FluxParams, StructureCheck};
pub use oracle::{barenblatt, heat_kernel, Exact};
pub use scheme::{max_diffusivity, run, stable_dt, step, Boundary, BoundaryFn, Run, RunManifest, Scheme, SolveConfig};
pub use weak::{residual_weak, steklov_average};
