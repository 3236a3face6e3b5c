//! Channel statistics, fading realizations and Macro-cell geometry.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Large-scale statistics of a `K`-user, `L`-antenna downlink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    beta: Vec<f64>,
    beta_err: Vec<f64>,
    antennas: usize,
}

impl ChannelStats {
    /// `beta[k]` is the pathloss gain of user `k`, `beta_err[k]` the variance
    /// of each entry of its CSIT error.
    pub fn new(beta: Vec<f64>, beta_err: Vec<f64>, antennas: usize) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::domain("at least one user is required"));
        }
        if antennas == 0 {
            return Err(Error::domain("at least one antenna is required"));
        }
        if beta.len() != beta_err.len() {
            return Err(Error::domain(format!("beta has {} entries but beta_err has {}", beta.len(), beta_err.len())));
        }
        if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::domain(format!("pathloss gains must be finite and positive, got {b}")));
        }
        if let Some(e) = beta_err.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::domain(format!("error variances must be finite and non-negative, got {e}")));
        }
        Ok(Self { beta, beta_err, antennas })
    }

    /// Every user with gain `beta` and error variance `beta_err`.
    pub fn symmetric(antennas: usize, users: usize, beta: f64, beta_err: f64) -> Result<Self> {
        Self::new(vec![beta; users], vec![beta_err; users], antennas)
    }

    pub fn users(&self) -> usize {
        self.beta.len()
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn beta_err(&self) -> &[f64] {
        &self.beta_err
    }

    /// Per-entry variance of the channel estimate, `beta + beta_err`.
    pub fn beta_hat(&self, k: usize) -> f64 {
        self.beta[k] + self.beta_err[k]
    }

    pub fn beta_hat_sum(&self) -> f64 {
        (0..self.users()).map(|k| self.beta_hat(k)).sum()
    }

    pub fn beta_ave(&self) -> f64 {
        self.beta.iter().sum::<f64>() / self.users() as f64
    }

    pub fn beta_hat_ave(&self) -> f64 {
        self.beta_hat_sum() / self.users() as f64
    }

    /// `beta_ave / beta_hat_ave`; exactly one under perfect CSIT.
    pub fn delta(&self) -> f64 {
        if self.is_perfect() {
            return 1.0;
        }
        self.beta_ave() / self.beta_hat_ave()
    }

    /// Load `L / K`.
    pub fn theta(&self) -> f64 {
        self.antennas as f64 / self.users() as f64
    }

    pub fn is_perfect(&self) -> bool {
        self.beta_err.iter().all(|&e| e == 0.0)
    }
}

/// One fading draw. Row `k` of each matrix is the transposed channel of user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// True channel `H` (`K x L`).
    pub h: DMatrix<C64>,
    /// CSIT error (`K x L`).
    pub h_err: DMatrix<C64>,
    /// Transmitter-side estimate `H + H_err`.
    pub h_hat: DMatrix<C64>,
}

fn gaussian_rows<R: Rng + ?Sized>(rng: &mut R, variances: &[f64], cols: usize) -> DMatrix<C64> {
    let mut data = Vec::with_capacity(variances.len() * cols);
    for &v in variances {
        let s = (0.5 * v).sqrt();
        for _ in 0..cols {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            data.push(C64::new(s * re, s * im));
        }
    }
    DMatrix::from_row_slice(variances.len(), cols, &data)
}

/// Draws `H` with rows `CN(0, beta_k I)` and an independent error with rows
/// `CN(0, beta_err_k I)`.
///
/// `H` is drawn first and the error afterwards, so two statistics that differ
/// only in `beta_err` see the same true channel under the same generator state.
pub fn gen_realization<R: Rng + ?Sized>(stats: &ChannelStats, rng: &mut R) -> ChannelRealization {
    let h = gaussian_rows(rng, stats.beta(), stats.antennas());
    let h_err = gaussian_rows(rng, stats.beta_err(), stats.antennas());
    let h_hat = if stats.is_perfect() { h.clone() } else { &h + &h_err };
    ChannelRealization { h, h_err, h_hat }
}

/// CSIT error variance `1 / (Pt N)` after `N` training symbols at power `Pt`.
pub fn estimation_error_variance(pt: f64, training_symbols: u32) -> Result<f64> {
    if !(pt > 0.0) {
        return Err(Error::domain(format!("transmit power must be positive, got {pt}")));
    }
    if training_symbols < 1 {
        return Err(Error::domain("at least one training symbol is required"));
    }
    Ok(1.0 / (pt * training_symbols as f64))
}

/// Macro-cell pathloss exponent.
pub const PATHLOSS_EXPONENT: f64 = 3.76;
/// Macro-cell attenuation at the exclusion radius, `10^-3.53`.
pub const PATHLOSS_REFERENCE_DB: f64 = -35.3;
pub const CELL_INNER_RADIUS_M: f64 = 35.0;
pub const CELL_OUTER_RADIUS_M: f64 = 500.0;

/// `10^-3.53 r^-3.76` for a user at distance `r >= 35` m.
pub fn pathloss_macrocell(r: f64) -> Result<f64> {
    if !(r >= CELL_INNER_RADIUS_M) || !r.is_finite() {
        return Err(Error::domain(format!("distance {r} m lies inside the {CELL_INNER_RADIUS_M} m exclusion radius")));
    }
    Ok(db_to_linear(PATHLOSS_REFERENCE_DB) * r.powf(-PATHLOSS_EXPONENT))
}

/// Radii of `users` points dropped uniformly over the annulus `[r_in, r_out]`.
pub fn drop_users<R: Rng + ?Sized>(users: usize, r_in: f64, r_out: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(r_in > 0.0 && r_in < r_out && r_out.is_finite()) {
        return Err(Error::domain(format!("need 0 < r_in < r_out, got r_in={r_in}, r_out={r_out}")));
    }
    let (a, b) = (r_in * r_in, r_out * r_out);
    Ok((0..users)
        .map(|_| {
            let u: f64 = rng.random();
            (a + u * (b - a)).sqrt()
        })
        .collect())
}

/// Thermal noise power in watts for a spectral density in dBm/Hz over `bandwidth_hz`.
pub fn noise_power(density_dbm_per_hz: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::domain(format!("bandwidth must be positive, got {bandwidth_hz}")));
    }
    Ok(dbm_to_watts(density_dbm_per_hz + 10.0 * bandwidth_hz.log10()))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}
