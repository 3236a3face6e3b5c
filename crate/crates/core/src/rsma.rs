//! Per-stream SINRs, rates and Monte Carlo ergodic rates of one-layer RSMA.
//!
//! Every SINR in this module has the shape
//!
//! ```text
//! common_k  = a rho c_k / (sigma_k^2 + a (1 - rho) (d_k + i_k))
//! private_k = a (1 - rho) d_k / (sigma_k^2 + a (1 - rho) i_k)
//! ```
//!
//! where `c_k`, `d_k` and `i_k` are the common-stream gain, the desired
//! private gain and the total private interference seen by user `k`. They are
//! collected in [`UserGains`]; only the way they are computed differs between
//! precoders and CSIT models.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{gen_realization, ChannelRealization, ChannelStats};
use crate::precoding::{
    build_precoder, default_rzf_regularization, normalization_mf_analytic, normalization_moments, NormalizationMoments,
    PowerSplit, Precoder, Scheme, MIN_NORMALIZATION_TRIALS,
};
use crate::rng::{Purpose, StreamKey};
use crate::summation::{CompensatedSum, Moments};
use crate::{Error, Result, C64};

/// Trials per accumulation chunk. Chunks are reduced in index order.
const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UserGains {
    /// Gain of the common stream.
    pub common: f64,
    /// Gain of the user's own private stream.
    pub desired: f64,
    /// Summed gain of the other users' private streams.
    pub interference: f64,
}

impl UserGains {
    /// `(common SINR, private SINR)` for normalisation `alpha`.
    pub fn sinrs(&self, alpha: f64, rho: PowerSplit, sigma2: f64) -> (f64, f64) {
        let ap = alpha * rho.rho_bar();
        let common = alpha * rho.rho() * self.common / (sigma2 + ap * (self.desired + self.interference));
        let private = ap * self.desired / (sigma2 + ap * self.interference);
        (common, private)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamGains {
    pub users: Vec<UserGains>,
}

impl StreamGains {
    pub fn sinrs(&self, alpha: f64, rho: PowerSplit, sigma2: &[f64]) -> Result<StreamSinrs> {
        check_noise(sigma2, self.users.len())?;
        let (common, private) = self.users.iter().zip(sigma2).map(|(g, &s2)| g.sinrs(alpha, rho, s2)).unzip();
        Ok(StreamSinrs { common, private })
    }
}

fn check_noise(sigma2: &[f64], users: usize) -> Result<()> {
    if sigma2.len() != users {
        return Err(Error::domain(format!("expected {users} noise powers, got {}", sigma2.len())));
    }
    if let Some(s) = sigma2.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::domain(format!("noise powers must be finite and positive, got {s}")));
    }
    Ok(())
}

/// Per-user SINRs of the common and the private streams.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamSinrs {
    pub common: Vec<f64>,
    pub private: Vec<f64>,
}

/// Gains of `precoder` evaluated against the channel `h` (`K x L`).
///
/// [`Scheme::MfJoint`] is evaluated through its superposed form: with the
/// effective channel `G = H W_p`, the common symbol reaches user `k` with
/// coefficient `sum_i G[k, i]`. All other schemes use `h_k^T w_c` directly.
pub fn precoded_gains(h: &DMatrix<C64>, precoder: &Precoder) -> Result<StreamGains> {
    let (k, l) = h.shape();
    if precoder.w_private.shape() != (l, k) || precoder.w_common.len() != l {
        return Err(Error::domain(format!(
            "precoder shape {:?} does not match a {k}x{l} channel",
            precoder.w_private.shape()
        )));
    }
    let effective = h * &precoder.w_private;
    let common: Vec<f64> = match precoder.scheme {
        Scheme::MfJoint => effective.row_iter().map(|r| r.sum().norm_sqr()).collect(),
        _ => (h * &precoder.w_common).iter().map(|z| z.norm_sqr()).collect(),
    };
    Ok(StreamGains { users: split_rows(&effective, common, |_, _| 0.0) })
}

/// Splits row `k` of an effective channel into desired and interference
/// power, adding `extra(k, i)` to every entry.
fn split_rows(effective: &DMatrix<C64>, common: Vec<f64>, extra: impl Fn(usize, usize) -> f64) -> Vec<UserGains> {
    common
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let mut desired = 0.0;
            let mut interference = 0.0;
            for (i, z) in effective.row(k).iter().enumerate() {
                let p = z.norm_sqr() + extra(k, i);
                if i == k {
                    desired = p;
                } else {
                    interference += p;
                }
            }
            UserGains { common: c, desired, interference }
        })
        .collect()
}

/// Gains of the matched-filter family under imperfect CSIT.
///
/// Only the true channel `h` and the error variances enter: the error terms
/// are replaced by their conditional means `beta_err_i ||h_k||^2`.
pub fn mf_imperfect_gains(h: &DMatrix<C64>, beta_err: &[f64]) -> Result<StreamGains> {
    if beta_err.len() != h.nrows() {
        return Err(Error::domain(format!("expected {} error variances, got {}", h.nrows(), beta_err.len())));
    }
    let gram = h * h.adjoint();
    let err_total: f64 = beta_err.iter().sum();
    let common = (0..h.nrows()).map(|k| gram.row(k).sum().norm_sqr() + err_total * gram[(k, k)].re).collect();
    Ok(StreamGains { users: split_rows(&gram, common, |k, i| beta_err[i] * gram[(k, k)].re) })
}

/// [`mf_imperfect_gains`] for user `k` alone, without forming the full Gram matrix.
pub fn mf_imperfect_user_gains(h: &DMatrix<C64>, beta_err: &[f64], k: usize) -> Result<UserGains> {
    if beta_err.len() != h.nrows() || k >= h.nrows() {
        return Err(Error::domain(format!("user {k} / {} error variances for {} users", beta_err.len(), h.nrows())));
    }
    let row = h.row(k);
    let row_gram = row * h.adjoint();
    let norm2 = row.norm_squared();
    let err_total: f64 = beta_err.iter().sum();
    let mut g = UserGains { common: row_gram.sum().norm_sqr() + err_total * norm2, ..Default::default() };
    for (i, z) in row_gram.iter().enumerate() {
        let p = z.norm_sqr() + beta_err[i] * norm2;
        if i == k {
            g.desired = p;
        } else {
            g.interference += p;
        }
    }
    Ok(g)
}

/// SINRs of `precoder` against the true channel of `realization`.
///
/// With perfect CSIT this is the exact SINR. When the precoder was built from
/// an imperfect estimate it is the naive plug-in evaluation.
pub fn sinr_perfect(
    realization: &ChannelRealization,
    precoder: &Precoder,
    alpha: f64,
    rho: PowerSplit,
    sigma2: &[f64],
) -> Result<StreamSinrs> {
    precoded_gains(&realization.h, precoder)?.sinrs(alpha, rho, sigma2)
}

/// SINRs of the matched-filter family under imperfect CSIT.
pub fn sinr_mf_imperfect(
    realization: &ChannelRealization,
    stats: &ChannelStats,
    alpha: f64,
    rho: PowerSplit,
    sigma2: &[f64],
) -> Result<StreamSinrs> {
    if realization.h.shape() != (stats.users(), stats.antennas()) {
        return Err(Error::domain("realization does not match the channel statistics"));
    }
    mf_imperfect_gains(&realization.h, stats.beta_err())?.sinrs(alpha, rho, sigma2)
}

/// Instantaneous per-user rates in bits/s/Hz.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RateReport {
    pub rate_common: Vec<f64>,
    pub rate_private: Vec<f64>,
    /// Common rate every user can decode.
    pub min_common: f64,
    /// `min_common + sum of private rates`.
    pub sum: f64,
}

pub fn instant_rates(sinrs: &StreamSinrs) -> RateReport {
    let rate_common: Vec<f64> = sinrs.common.iter().map(|s| s.ln_1p() / std::f64::consts::LN_2).collect();
    let rate_private: Vec<f64> = sinrs.private.iter().map(|s| s.ln_1p() / std::f64::consts::LN_2).collect();
    let min_common = rate_common.iter().copied().fold(f64::INFINITY, f64::min);
    let min_common = if min_common.is_finite() { min_common } else { 0.0 };
    let sum = min_common + rate_private.iter().sum::<f64>();
    RateReport { rate_common, rate_private, min_common, sum }
}

fn rate(sinr: f64) -> f64 {
    sinr.ln_1p() / std::f64::consts::LN_2
}

/// Everything except the power split that an ergodic-rate run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub scheme: Scheme,
    /// Average transmit power (linear, same unit as `sigma2`).
    pub pt: f64,
    /// Per-user noise power.
    pub sigma2: Vec<f64>,
    /// RZF loading; defaults to `K sigma^2 / Pt` with the mean noise power.
    pub rzf_reg: Option<f64>,
    /// Size of the normalisation pre-pass for ZF and RZF.
    pub normalization_trials: usize,
    pub key: StreamKey,
}

impl LinkConfig {
    pub fn new(scheme: Scheme, pt: f64, sigma2: Vec<f64>, key: StreamKey) -> Self {
        Self { scheme, pt, sigma2, rzf_reg: None, normalization_trials: 2000, key }
    }

    pub fn regularization(&self) -> f64 {
        self.rzf_reg.unwrap_or_else(|| {
            let mean = self.sigma2.iter().sum::<f64>() / self.sigma2.len().max(1) as f64;
            default_rzf_regularization(self.sigma2.len(), mean, self.pt)
        })
    }

    fn validate(&self, stats: &ChannelStats) -> Result<()> {
        if !(self.pt > 0.0 && self.pt.is_finite()) {
            return Err(Error::domain(format!("transmit power must be positive, got {}", self.pt)));
        }
        check_noise(&self.sigma2, stats.users())?;
        if !stats.is_perfect() && !self.scheme.is_matched_filter() {
            return Err(Error::config(format!(
                "{} is only modelled under perfect CSIT; imperfect CSIT requires MF_JOINT or MRT_MF",
                self.scheme
            )));
        }
        Ok(())
    }

    /// Power normalisation for this scheme and channel statistics.
    pub fn normalization(&self, stats: &ChannelStats) -> Result<Normalization> {
        self.validate(stats)?;
        if self.scheme.is_matched_filter() {
            return Ok(Normalization::Analytic(normalization_mf_analytic(stats, self.pt)?));
        }
        if self.normalization_trials < MIN_NORMALIZATION_TRIALS {
            return Err(Error::config(format!(
                "normalisation pre-pass needs at least {MIN_NORMALIZATION_TRIALS} trials"
            )));
        }
        let m = normalization_moments(self.scheme, stats, self.regularization(), self.normalization_trials, self.key)?;
        Ok(Normalization::Empirical(m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    Analytic(f64),
    Empirical(NormalizationMoments),
}

impl Normalization {
    pub fn alpha(&self, pt: f64, rho: PowerSplit) -> f64 {
        match self {
            Normalization::Analytic(a) => *a,
            Normalization::Empirical(m) => m.alpha(pt, rho),
        }
    }
}

/// Monte Carlo ergodic rates for one power split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub rho: f64,
    pub alpha: f64,
    pub n_trials: usize,
    /// Per-user ergodic common rate.
    pub rate_common: Vec<f64>,
    pub rate_private: Vec<f64>,
    pub stderr_common: Vec<f64>,
    pub stderr_private: Vec<f64>,
    /// `min_k` of the ergodic common rates (minimum taken after averaging).
    pub min_common: f64,
    /// User attaining `min_common`.
    pub bottleneck_user: usize,
    pub private_sum: f64,
    /// Ergodic sum rate `min_common + private_sum`.
    pub esr: f64,
    pub esr_stderr: f64,
    /// Average of the instantaneous sum rate (minimum taken per realization).
    pub esr_instantaneous: f64,
}

impl ErgodicReport {
    pub fn mean_common(&self) -> f64 {
        self.rate_common.iter().sum::<f64>() / self.rate_common.len() as f64
    }
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    common: Vec<Moments>,
    private: Vec<Moments>,
    /// sum over trials of `R_c,k * (sum_j R_p,j)`
    cross: Vec<CompensatedSum>,
    private_sum: Moments,
    instant: Moments,
}

impl Accumulator {
    fn new(users: usize) -> Self {
        Self {
            common: vec![Moments::default(); users],
            private: vec![Moments::default(); users],
            cross: vec![CompensatedSum::default(); users],
            ..Default::default()
        }
    }

    fn push(&mut self, gains: &StreamGains, alpha: f64, rho: PowerSplit, sigma2: &[f64]) {
        let mut min_common = f64::INFINITY;
        let mut psum = 0.0;
        let mut rc = Vec::with_capacity(gains.users.len());
        for (k, (g, &s2)) in gains.users.iter().zip(sigma2).enumerate() {
            let (c, p) = g.sinrs(alpha, rho, s2);
            let (c, p) = (rate(c), rate(p));
            self.common[k].push(c);
            self.private[k].push(p);
            min_common = min_common.min(c);
            psum += p;
            rc.push(c);
        }
        for (k, c) in rc.into_iter().enumerate() {
            self.cross[k].add(c * psum);
        }
        self.private_sum.push(psum);
        self.instant.push(min_common + psum);
    }

    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.common.iter_mut().zip(&other.common) {
            a.merge(b);
        }
        for (a, b) in self.private.iter_mut().zip(&other.private) {
            a.merge(b);
        }
        for (a, b) in self.cross.iter_mut().zip(&other.cross) {
            a.merge(b);
        }
        self.private_sum.merge(&other.private_sum);
        self.instant.merge(&other.instant);
    }

    fn report(&self, rho: PowerSplit, alpha: f64) -> ErgodicReport {
        let rate_common: Vec<f64> = self.common.iter().map(Moments::mean).collect();
        let rate_private: Vec<f64> = self.private.iter().map(Moments::mean).collect();
        let (bottleneck_user, min_common) = rate_common
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (k, r)| if r < best.1 { (k, r) } else { best });
        let private_sum: f64 = rate_private.iter().sum();
        let n = self.private_sum.count();
        // Var(R_c,b + P) = Var(R_c,b) + Var(P) + 2 Cov(R_c,b, P)
        let esr_stderr = if n < 2 {
            0.0
        } else {
            let nf = n as f64;
            let cov = (self.cross[bottleneck_user].value() - nf * min_common * self.private_sum.mean()) / (nf - 1.0);
            let var = self.common[bottleneck_user].variance() + self.private_sum.variance() + 2.0 * cov;
            (var.max(0.0) / nf).sqrt()
        };
        ErgodicReport {
            rho: rho.rho(),
            alpha,
            n_trials: n,
            stderr_common: self.common.iter().map(Moments::std_error).collect(),
            stderr_private: self.private.iter().map(Moments::std_error).collect(),
            rate_common,
            rate_private,
            min_common,
            bottleneck_user,
            private_sum,
            esr: min_common + private_sum,
            esr_stderr,
            esr_instantaneous: self.instant.mean(),
        }
    }
}

/// Gains of one fading trial under the model that `cfg` and `stats` select.
pub fn trial_gains(cfg: &LinkConfig, stats: &ChannelStats, realization: &ChannelRealization) -> Result<StreamGains> {
    if stats.is_perfect() || !cfg.scheme.is_matched_filter() {
        let p = build_precoder(cfg.scheme, &realization.h_hat, cfg.regularization())?;
        precoded_gains(&realization.h, &p)
    } else {
        mf_imperfect_gains(&realization.h, stats.beta_err())
    }
}

/// Ergodic rates for every power split in `rhos`, sharing fading realizations.
///
/// Trial `t` always uses the fading stream `(seed, drop, t)`, so results are
/// identical for any thread count.
pub fn ergodic_rates_sweep(
    cfg: &LinkConfig,
    stats: &ChannelStats,
    rhos: &[PowerSplit],
    n_trials: usize,
) -> Result<Vec<ErgodicReport>> {
    if n_trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    let norm = cfg.normalization(stats)?;
    let alphas: Vec<f64> = rhos.iter().map(|&r| norm.alpha(cfg.pt, r)).collect();
    let users = stats.users();
    let chunks: Vec<Vec<Accumulator>> = (0..n_trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Accumulator::new(users); rhos.len()];
            for t in c * CHUNK..((c + 1) * CHUNK).min(n_trials) {
                let mut rng = cfg.key.trial(Purpose::Fading, t as u64);
                let realization = gen_realization(stats, &mut rng);
                let gains = trial_gains(cfg, stats, &realization)
                    .map_err(|e| Error::Trial { trial: t, source: Box::new(e) })?;
                for ((a, &rho), &alpha) in acc.iter_mut().zip(rhos).zip(&alphas) {
                    a.push(&gains, alpha, rho, &cfg.sigma2);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![Accumulator::new(users); rhos.len()];
    for chunk in &chunks {
        for (t, c) in total.iter_mut().zip(chunk) {
            t.merge(c);
        }
    }
    Ok(total.iter().zip(rhos).zip(&alphas).map(|((a, &rho), &alpha)| a.report(rho, alpha)).collect())
}

/// Ergodic rates for one power split.
pub fn ergodic_rates_mc(
    cfg: &LinkConfig,
    stats: &ChannelStats,
    rho: PowerSplit,
    n_trials: usize,
) -> Result<ErgodicReport> {
    Ok(ergodic_rates_sweep(cfg, stats, &[rho], n_trials)?.remove(0))
}
