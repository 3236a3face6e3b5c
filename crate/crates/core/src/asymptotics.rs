//! Large-system limits of the matched-filter RSMA rates.
//!
//! As `L, K -> inf` with `theta = L / K` fixed, the common rate of user `k`
//! converges in distribution to
//!
//! ```text
//! log2(1 + beta_k rho Pt ((delta/2) X + 1 - delta) / D_k),   X ~ ncx2(2, 2 theta beta_k / beta_ave)
//! D_k = sigma_k^2 + (1 - rho) beta_k Pt (1 + theta beta_k / beta_hat_ave)
//! ```
//!
//! while the private rate converges almost surely to a constant. This module
//! evaluates both limits and runs the simulation batteries that check them.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{estimation_error_variance, gen_realization, ChannelStats};
use crate::precoding::{normalization_mf_analytic, PowerSplit};
use crate::rng::{stream, Purpose};
use crate::rsma::mf_imperfect_user_gains;
use crate::specfun::{integrate_semi_infinite, NoncentralChi2};
use crate::summation::{CompensatedSum, Moments};
use crate::{Error, Result, C64};

const SAMPLE_CHUNK: usize = 1024;

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Large-system parameters seen by one target user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    /// Load `L / K`.
    pub theta: f64,
    pub beta_k: f64,
    pub beta_ave: f64,
    pub beta_hat_ave: f64,
    /// `beta_ave / beta_hat_ave`; one under perfect CSIT.
    pub delta: f64,
    pub sigma2_k: f64,
    pub pt: f64,
    pub rho: PowerSplit,
}

impl AsymptoticParams {
    /// Parameters of user `k` in `stats`, treating the finite averages as the limits.
    pub fn from_stats(stats: &ChannelStats, k: usize, sigma2_k: f64, pt: f64, rho: PowerSplit) -> Result<Self> {
        if k >= stats.users() {
            return Err(Error::domain(format!("user {k} out of range for {} users", stats.users())));
        }
        let p = Self {
            theta: stats.theta(),
            beta_k: stats.beta()[k],
            beta_ave: stats.beta_ave(),
            beta_hat_ave: stats.beta_hat_ave(),
            delta: stats.delta(),
            sigma2_k,
            pt,
            rho,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("theta", self.theta),
            ("beta_k", self.beta_k),
            ("beta_ave", self.beta_ave),
            ("beta_hat_ave", self.beta_hat_ave),
            ("sigma2_k", self.sigma2_k),
            ("pt", self.pt),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::domain(format!("{name} must be finite and positive, got {v}")));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::domain(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        Ok(())
    }

    /// Noncentrality `2 theta beta_k / beta_ave` of the limit law.
    pub fn lambda(&self) -> f64 {
        2.0 * self.theta * self.beta_k / self.beta_ave
    }

    pub fn limit_law(&self) -> Result<NoncentralChi2> {
        NoncentralChi2::new(self.lambda())
    }

    fn denominator(&self) -> f64 {
        self.sigma2_k
            + self.rho.rho_bar() * self.beta_k * self.pt * (1.0 + self.theta * self.beta_k / self.beta_hat_ave)
    }

    fn signal_scale(&self) -> f64 {
        self.beta_k * self.rho.rho() * self.pt
    }

    /// Limit common rate as a function of the chi-squared variate `x`.
    pub fn common_rate_at(&self, x: f64) -> f64 {
        let signal = self.signal_scale() * (0.5 * self.delta * x + 1.0 - self.delta);
        log2_1p(signal / self.denominator())
    }

    /// CDF of the limit common rate, `P(R <= r)`.
    ///
    /// Uses that the rate is increasing in `x` whenever `delta > 0`; with
    /// `rho = 0` or `delta = 0` the limit is a point mass.
    pub fn common_rate_cdf(&self, r: f64) -> Result<f64> {
        if self.rho.rho() == 0.0 || self.delta == 0.0 {
            return Ok(if r >= self.common_rate_at(0.0) { 1.0 } else { 0.0 });
        }
        let x = ((r.exp2() - 1.0) * self.denominator() / self.signal_scale() - (1.0 - self.delta)) * 2.0 / self.delta;
        if !(x > 0.0) {
            return Ok(0.0);
        }
        self.limit_law()?.cdf(x)
    }
}

/// One draw from the limit law of the common rate.
pub fn common_rate_limit_draw<R: Rng + ?Sized>(p: &AsymptoticParams, rng: &mut R) -> Result<f64> {
    Ok(p.common_rate_at(p.limit_law()?.sample(rng)))
}

/// Limit of the ergodic common rate, `E[common_rate_at(X)]`, by quadrature.
pub fn ergodic_common_rate(p: &AsymptoticParams, tol: f64) -> Result<f64> {
    p.validate()?;
    if p.rho.rho() == 0.0 {
        return Ok(0.0);
    }
    let law = p.limit_law()?;
    integrate_semi_infinite(|x| p.common_rate_at(x) * law.pdf(x).unwrap_or(0.0), law.noncentrality(), tol)
}

/// Almost-sure limit of the private rate,
/// `log2(1 + (beta_k / beta_hat_ave) theta (1 - rho) Pt beta_k / (sigma_k^2 + (1 - rho) Pt beta_k))`.
pub fn ergodic_private_rate(p: &AsymptoticParams) -> f64 {
    let pb = p.rho.rho_bar() * p.pt * p.beta_k;
    log2_1p(p.beta_k / p.beta_hat_ave * p.theta * pb / (p.sigma2_k + pb))
}

/// Limit ergodic sum rate: the smallest common rate plus all private rates.
pub fn esr_asymptotic(users: &[AsymptoticParams], tol: f64) -> Result<f64> {
    let first = users.first().ok_or_else(|| Error::domain("no users given"))?;
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    for u in users {
        if !(same(u.theta, first.theta) && same(u.beta_ave, first.beta_ave) && same(u.beta_hat_ave, first.beta_hat_ave))
        {
            return Err(Error::domain("users disagree on theta, beta_ave or beta_hat_ave"));
        }
    }
    let mut min_common = f64::INFINITY;
    let mut private = 0.0;
    for u in users {
        min_common = min_common.min(ergodic_common_rate(u, tol)?);
        private += ergodic_private_rate(u);
    }
    Ok(min_common + private)
}

/// One-sample Kolmogorov-Smirnov distance between `samples` and `cdf`.
pub fn ks_distance<F>(samples: &[f64], cdf: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if samples.is_empty() {
        return Err(Error::domain("KS distance needs at least one sample"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x)?;
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Symmetric-user system grown along a sequence of antenna counts at fixed load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub theta: f64,
    pub antennas: Vec<usize>,
    pub beta: f64,
    pub sigma2: f64,
    pub pt: f64,
    pub rho: PowerSplit,
    /// Training length for the CSIT error `1 / (Pt N)`; `None` for perfect CSIT.
    pub training_symbols: Option<u32>,
    pub n_samples: usize,
    pub seed: u64,
}

impl ConvergenceConfig {
    fn stats(&self, antennas: usize) -> Result<ChannelStats> {
        let users = (antennas as f64 / self.theta).round() as usize;
        if users == 0 || (users as f64 * self.theta - antennas as f64).abs() > 1e-9 {
            return Err(Error::config(format!("L = {antennas} is not a multiple of theta = {}", self.theta)));
        }
        let err = match self.training_symbols {
            Some(n) => estimation_error_variance(self.pt, n)?,
            None => 0.0,
        };
        ChannelStats::symmetric(antennas, users, self.beta, err)
    }

    fn params(&self, stats: &ChannelStats) -> Result<AsymptoticParams> {
        AsymptoticParams::from_stats(stats, 0, self.sigma2, self.pt, self.rho)
    }

    /// `(common, private)` rates of user 0 on `n_samples` fresh realizations.
    fn simulate(&self, stats: &ChannelStats) -> Result<Vec<(f64, f64)>> {
        if self.n_samples == 0 {
            return Err(Error::domain("at least one sample is required"));
        }
        let alpha = normalization_mf_analytic(stats, self.pt)?;
        let drop = stats.antennas() as u64;
        let chunks: Vec<Vec<(f64, f64)>> = (0..self.n_samples.div_ceil(SAMPLE_CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut rng = stream(self.seed, Purpose::Sampler, drop, c as u64);
                (c * SAMPLE_CHUNK..((c + 1) * SAMPLE_CHUNK).min(self.n_samples))
                    .map(|_| {
                        let r = gen_realization(stats, &mut rng);
                        let g = mf_imperfect_user_gains(&r.h, stats.beta_err(), 0)?;
                        let (c, p) = g.sinrs(alpha, self.rho, self.sigma2);
                        Ok((log2_1p(c), log2_1p(p)))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(chunks.concat())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsPoint {
    pub antennas: usize,
    pub users: usize,
    pub ks: f64,
}

/// KS distance between simulated common rates and their limit law, per antenna count.
pub fn convergence_in_distribution_test(cfg: &ConvergenceConfig) -> Result<Vec<KsPoint>> {
    cfg.antennas
        .iter()
        .map(|&l| {
            let stats = cfg.stats(l)?;
            let params = cfg.params(&stats)?;
            let rates: Vec<f64> = cfg.simulate(&stats)?.into_iter().map(|(c, _)| c).collect();
            let ks = ks_distance(&rates, |r| params.common_rate_cdf(r))?;
            Ok(KsPoint { antennas: l, users: stats.users(), ks })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationPoint {
    pub antennas: usize,
    pub users: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// Largest `|R_p - limit|` over the samples.
    pub max_abs_dev: f64,
    pub limit: f64,
    /// Set when fewer than two samples make the spread meaningless.
    pub degenerate: bool,
}

/// Spread of the simulated private rate around its almost-sure limit, per antenna count.
pub fn private_rate_concentration_test(cfg: &ConvergenceConfig) -> Result<Vec<ConcentrationPoint>> {
    cfg.antennas
        .iter()
        .map(|&l| {
            let stats = cfg.stats(l)?;
            let limit = ergodic_private_rate(&cfg.params(&stats)?);
            let mut m = Moments::default();
            let mut max_abs_dev: f64 = 0.0;
            for (_, p) in cfg.simulate(&stats)? {
                m.push(p);
                max_abs_dev = max_abs_dev.max((p - limit).abs());
            }
            Ok(ConcentrationPoint {
                antennas: l,
                users: stats.users(),
                mean: m.mean(),
                std_dev: m.variance().sqrt(),
                max_abs_dev,
                limit,
                degenerate: m.count() < 2,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfPoint {
    pub t: f64,
    /// Sample mean of `exp(t X)`.
    pub empirical: f64,
    /// MGF of the limit law `ncx2(2, 2 theta beta_k / beta_ave)`.
    pub limit: f64,
    /// Exact MGF of `X` at this finite `L`, for diagnosing finite-size bias.
    pub finite_size: f64,
    /// `|empirical - limit| / limit`.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfReport {
    pub points: Vec<MgfPoint>,
    /// Sample mean of `||h_k||^2 / beta_k`; tends to `L`.
    pub mean_norm_ratio: f64,
}

/// Compares the empirical MGF of the rescaled common-stream gain of user `k`
/// with the MGF of its limit law.
///
/// Each sample draws `h_k ~ CN(0, beta_k I)` and the aggregate
/// `sum_{i != k} h_i ~ CN(0, b I)`, `b = sum_{i != k} beta_i`, forms
/// `X' = u_k^T sum_i conj(h_i) = ||h_k|| + u_k^T conj(sum_{i != k} h_i)` with
/// `u_k = h_k / ||h_k||` and rescales `X = (2 / b) |X'|^2`.
pub fn shifted_gain_mgf_test(
    stats: &ChannelStats,
    k: usize,
    n_samples: usize,
    t_points: &[f64],
    seed: u64,
) -> Result<MgfReport> {
    if k >= stats.users() || stats.users() < 2 {
        return Err(Error::domain("need a valid target user and at least one other user"));
    }
    if n_samples == 0 {
        return Err(Error::domain("at least one sample is required"));
    }
    if let Some(t) = t_points.iter().find(|&&t| !(t < 0.5)) {
        return Err(Error::domain(format!("MGF points must satisfy t < 1/2, got {t}")));
    }
    let l = stats.antennas();
    let beta_k = stats.beta()[k];
    let b: f64 = stats.beta().iter().sum::<f64>() - beta_k;
    let law = NoncentralChi2::new(2.0 * stats.theta() * beta_k / stats.beta_ave())?;

    let chunks: Vec<(Vec<CompensatedSum>, CompensatedSum)> = (0..n_samples.div_ceil(SAMPLE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, Purpose::Sampler, k as u64, c as u64);
            let mut sums = vec![CompensatedSum::default(); t_points.len()];
            let mut norms = CompensatedSum::default();
            let (sk, sb) = ((0.5 * beta_k).sqrt(), (0.5 * b).sqrt());
            let mut h = vec![C64::default(); l];
            for _ in c * SAMPLE_CHUNK..((c + 1) * SAMPLE_CHUNK).min(n_samples) {
                let mut norm2 = 0.0;
                for z in h.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *z = C64::new(sk * re, sk * im);
                    norm2 += z.norm_sqr();
                }
                let mut cross = C64::default();
                for z in &h {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    cross += z * C64::new(sb * re, -sb * im);
                }
                let norm = norm2.sqrt();
                let shifted = C64::new(norm, 0.0) + cross / norm;
                let x = 2.0 / b * shifted.norm_sqr();
                for (s, &t) in sums.iter_mut().zip(t_points) {
                    s.add((t * x).exp());
                }
                norms.add(norm2 / beta_k);
            }
            (sums, norms)
        })
        .collect();

    let mut sums = vec![CompensatedSum::default(); t_points.len()];
    let mut norms = CompensatedSum::default();
    for (s, n) in &chunks {
        for (a, b) in sums.iter_mut().zip(s) {
            a.merge(b);
        }
        norms.merge(n);
    }
    let n = n_samples as f64;
    let points = t_points
        .iter()
        .zip(&sums)
        .map(|(&t, s)| {
            let empirical = s.value() / n;
            let limit = law.mgf(t)?;
            let d = 1.0 - 2.0 * t;
            let finite_size = (1.0 - 2.0 * beta_k * t / (d * b)).powf(-(l as f64)) / d;
            Ok(MgfPoint { t, empirical, limit, finite_size, discrepancy: (empirical - limit).abs() / limit })
        })
        .collect::<Result<_>>()?;
    Ok(MgfReport { points, mean_norm_ratio: norms.value() / n })
}
