//! Link-level simulation and asymptotic rate analysis for matched-filter
//! precoded rate-splitting multiple access (RSMA) in the massive MIMO downlink.
//!
//! The crate is organised bottom-up:
//!
//! - [`specfun`]: scaled Bessel `I0`, the two-degree noncentral chi-squared law
//!   and adaptive quadrature on `[0, inf)`.
//! - [`channel`]: Rayleigh fading with per-user pathloss and additive CSIT error,
//!   plus the Macro-cell geometry helpers.
//! - [`precoding`]: common beamformers, private precoders and power normalisation.
//! - [`rsma`]: per-stream SINRs, instantaneous rates and Monte Carlo ergodic rates.
//! - [`asymptotics`]: large-system limits of the common and private rates and the
//!   statistical batteries that tie them to simulation.
//! - [`harness`]: presets, sweeps and CSV/JSON reporting used by the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod channel;
mod error;
pub mod harness;
pub mod precoding;
pub mod rng;
pub mod rsma;
pub mod specfun;
mod summation;

pub use error::{Error, Result};
pub use nalgebra::Complex;

/// Complex baseband sample type used throughout.
pub type C64 = Complex<f64>;
