//! Radially symmetric solvers and numerical checks for quasilinear
//! Keller–Segel systems near blow-up.

pub mod error;
pub mod estimates;
pub mod families;
pub mod grid;
pub mod ks;
pub mod linear;
pub mod profile;
pub mod semigroup;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{build_grid, laplacian_radial, lp_norm, radial_derivative, weighted_sup, RadialField, RadialGrid};
