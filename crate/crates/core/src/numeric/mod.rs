//! Numerical kernels shared by the law catalog and the diagnostics.

pub mod hermite;
pub mod quad;
pub mod special;

pub use quad::{integrate, integrate_pieces, QuadOpts, Quadrature};
