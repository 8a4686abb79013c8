pub mod calculus;
pub mod campaign;
pub mod covering;
pub mod error;
pub mod iterate;
pub mod mesh;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
