//! Special functions and quadrature behind the asymptotic rate formulas.

mod bessel;
mod ncx2;
mod quad;

pub use bessel::bessel_i0_scaled;
pub use ncx2::NoncentralChi2;
pub use quad::{integrate, integrate_semi_infinite, truncation_point, DEFAULT_TOL};
