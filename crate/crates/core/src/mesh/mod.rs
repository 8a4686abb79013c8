//! Space-time grids, grid functions, parabolic cylinders and discrete integration.

mod cylinder;
mod field;
mod grid;
mod io;

pub use cylinder::{ball_volume, integrate, mean, measure, Cylinder, CylinderNodes};
pub use field::{axis_derivative, discrete_gradient, GridFunction, SpatialField, VectorField};
pub use grid::{parabolic_distance, Point, SpaceTimeGrid, SpatialGrid};
pub use io::{encode_grid_function, export_csv, read_grid_function, write_grid_function};
