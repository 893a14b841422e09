//! Numerical workbench for constant-mean-curvature surfaces in the
//! homogeneous spaces E(κ, τ).

pub mod error;
pub mod geometry;
pub mod grid;
pub mod horizontal;
pub mod linalg;
pub mod parabolicity;
pub mod spectra;
pub mod surface;

pub use error::{Error, Result};
pub use geometry::{AmbientPoint, SpaceParams, TangentVector};
