//! Common beamformers, private precoders and power normalisation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{gen_realization, ChannelStats};
use crate::rng::{Purpose, StreamKey};
use crate::summation::CompensatedSum;
use crate::{Error, Result, C64};

/// Gram matrices with a larger eigenvalue spread are treated as singular by ZF.
pub const ZF_CONDITION_LIMIT: f64 = 1e12;

/// Smallest pre-pass accepted by [`normalization_empirical`].
pub const MIN_NORMALIZATION_TRIALS: usize = 1000;

const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Common and private symbols superposed, then one matched filter `H^H`.
    #[serde(rename = "MF_JOINT")]
    MfJoint,
    /// MRT common beamformer with matched-filter private precoding.
    #[serde(rename = "MRT_MF")]
    MrtMf,
    /// MRT common beamformer with zero-forcing private precoding.
    #[serde(rename = "MRT_ZF")]
    MrtZf,
    /// MRT common beamformer with regularised zero-forcing private precoding.
    #[serde(rename = "MRT_RZF")]
    MrtRzf,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::MfJoint, Scheme::MrtMf, Scheme::MrtZf, Scheme::MrtRzf];

    /// Whether both streams are carried by the matched filter `H^H`.
    pub fn is_matched_filter(self) -> bool {
        matches!(self, Scheme::MfJoint | Scheme::MrtMf)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::MfJoint => "MF_JOINT",
            Scheme::MrtMf => "MRT_MF",
            Scheme::MrtZf => "MRT_ZF",
            Scheme::MrtRzf => "MRT_RZF",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown scheme '{s}'")))
    }
}

/// Fraction `rho` of the transmit power given to the common stream.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PowerSplit(f64);

impl PowerSplit {
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::domain(format!("power split must lie in [0, 1], got {rho}")));
        }
        Ok(Self(rho))
    }

    pub fn rho(self) -> f64 {
        self.0
    }

    pub fn rho_bar(self) -> f64 {
        1.0 - self.0
    }

    /// `Tr{P^2} = rho + K (1 - rho)`.
    pub fn trace_p2(self, users: usize) -> f64 {
        self.rho() + users as f64 * self.rho_bar()
    }
}

impl TryFrom<f64> for PowerSplit {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        PowerSplit::new(v)
    }
}

impl From<PowerSplit> for f64 {
    fn from(p: PowerSplit) -> f64 {
        p.0
    }
}

/// Common beamformer `w_c` (length `L`) and private precoder `W_p` (`L x K`).
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub scheme: Scheme,
    pub w_common: DVector<C64>,
    pub w_private: DMatrix<C64>,
}

/// MMSE-style loading `K sigma^2 / Pt` used when no RZF parameter is given.
pub fn default_rzf_regularization(users: usize, sigma2: f64, pt: f64) -> f64 {
    users as f64 * sigma2 / pt
}

/// Builds the precoder for `scheme` from the CSIT estimate `h_hat` (`K x L`).
///
/// The common beamformer is always MRT, `sum_i conj(h_hat_i)`. `reg` is only
/// read by [`Scheme::MrtRzf`].
pub fn build_precoder(scheme: Scheme, h_hat: &DMatrix<C64>, reg: f64) -> Result<Precoder> {
    if h_hat.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::domain("channel estimate has non-finite entries"));
    }
    let mf = h_hat.adjoint();
    let w_common = DVector::from_iterator(mf.nrows(), mf.row_iter().map(|r| r.sum()));
    let w_private = match scheme {
        Scheme::MfJoint | Scheme::MrtMf => mf,
        Scheme::MrtZf => {
            let gram = h_hat * &mf;
            let condition = hermitian_condition(&gram);
            if !(condition <= ZF_CONDITION_LIMIT) {
                return Err(Error::Singular { scheme, condition });
            }
            gram_solve(scheme, gram, h_hat, condition)?
        }
        Scheme::MrtRzf => {
            if !(reg >= 0.0) || !reg.is_finite() {
                return Err(Error::domain(format!("RZF regularisation must be finite and >= 0, got {reg}")));
            }
            let k = h_hat.nrows();
            let gram = h_hat * &mf + DMatrix::<C64>::identity(k, k) * C64::new(reg, 0.0);
            gram_solve(scheme, gram, h_hat, f64::INFINITY)?
        }
    };
    Ok(Precoder { scheme, w_common, w_private })
}

/// `H^H G^{-1}` computed as `(G^{-1} H)^H` with a Cholesky solve.
fn gram_solve(scheme: Scheme, gram: DMatrix<C64>, h_hat: &DMatrix<C64>, condition: f64) -> Result<DMatrix<C64>> {
    let chol = gram.cholesky().ok_or(Error::Singular { scheme, condition })?;
    Ok(chol.solve(h_hat).adjoint())
}

fn hermitian_condition(gram: &DMatrix<C64>) -> f64 {
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `Pt / (L sum_k beta_hat_k)`, the normalisation of the matched-filter family
/// for any power split.
pub fn normalization_mf_analytic(stats: &ChannelStats, pt: f64) -> Result<f64> {
    if !(pt > 0.0) {
        return Err(Error::domain(format!("transmit power must be positive, got {pt}")));
    }
    Ok(pt / (stats.antennas() as f64 * stats.beta_hat_sum()))
}

/// Expected squared norms of the two precoder blocks.
///
/// Because `Tr{E[W^H W] P^2} = rho E||w_c||^2 + (1 - rho) E||W_p||_F^2`, one
/// pre-pass serves every power split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationMoments {
    /// `E ||w_c||^2`
    pub common: f64,
    /// `E ||W_p||_F^2`
    pub private: f64,
    pub trials: usize,
}

impl NormalizationMoments {
    /// `alpha = Pt / Tr{E[W^H W] P^2}`.
    pub fn alpha(&self, pt: f64, rho: PowerSplit) -> f64 {
        pt / (rho.rho() * self.common + rho.rho_bar() * self.private)
    }
}

/// Estimates [`NormalizationMoments`] over `n_trials` fresh channel estimates
/// drawn from the normalisation stream of `key`.
pub fn normalization_moments(
    scheme: Scheme,
    stats: &ChannelStats,
    reg: f64,
    n_trials: usize,
    key: StreamKey,
) -> Result<NormalizationMoments> {
    if n_trials == 0 {
        return Err(Error::domain("normalisation needs at least one trial"));
    }
    let chunks: Vec<(CompensatedSum, CompensatedSum)> = (0..n_trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut common = CompensatedSum::default();
            let mut private = CompensatedSum::default();
            for t in c * CHUNK..((c + 1) * CHUNK).min(n_trials) {
                let mut rng = key.trial(Purpose::Normalization, t as u64);
                let real = gen_realization(stats, &mut rng);
                let p = build_precoder(scheme, &real.h_hat, reg)
                    .map_err(|e| Error::Trial { trial: t, source: Box::new(e) })?;
                common.add(p.w_common.norm_squared());
                private.add(p.w_private.norm_squared());
            }
            Ok((common, private))
        })
        .collect::<Result<_>>()?;
    let (mut common, mut private) = (CompensatedSum::default(), CompensatedSum::default());
    for (c, p) in &chunks {
        common.merge(c);
        private.merge(p);
    }
    let n = n_trials as f64;
    Ok(NormalizationMoments { common: common.value() / n, private: private.value() / n, trials: n_trials })
}

/// Monte Carlo estimate of `alpha = Pt / E{Tr{W^H W P^2}}` for one power split.
pub fn normalization_empirical(
    scheme: Scheme,
    stats: &ChannelStats,
    rho: PowerSplit,
    pt: f64,
    reg: f64,
    n_trials: usize,
    key: StreamKey,
) -> Result<f64> {
    if n_trials < MIN_NORMALIZATION_TRIALS {
        return Err(Error::domain(format!(
            "normalisation pre-pass needs at least {MIN_NORMALIZATION_TRIALS} trials, got {n_trials}"
        )));
    }
    if !(pt > 0.0) {
        return Err(Error::domain(format!("transmit power must be positive, got {pt}")));
    }
    Ok(normalization_moments(scheme, stats, reg, n_trials, key)?.alpha(pt, rho))
}

/// `||s||^2` for the transmit vector built from symbols `x = [x_c, x_p1, ..., x_pK]`.
///
/// The joint matched filter superposes the streams before precoding,
/// `s = sqrt(alpha) H^H (sqrt(rho) 1 x_c + sqrt(1 - rho) x_p)`; every other
/// scheme forms `sqrt(alpha) (sqrt(rho) w_c x_c + sqrt(1 - rho) W_p x_p)`.
pub fn transmit_signal_power(precoder: &Precoder, alpha: f64, rho: PowerSplit, x: &[C64]) -> Result<f64> {
    let k = precoder.w_private.ncols();
    if x.len() != k + 1 {
        return Err(Error::domain(format!("expected {} symbols, got {}", k + 1, x.len())));
    }
    let (a, b) = (rho.rho().sqrt(), rho.rho_bar().sqrt());
    let xp = DVector::from_column_slice(&x[1..]);
    let s = match precoder.scheme {
        Scheme::MfJoint => {
            let superposed = xp.map(|v| v * b + x[0] * a);
            &precoder.w_private * superposed
        }
        _ => &precoder.w_common * (x[0] * a) + &precoder.w_private * (xp * C64::new(b, 0.0)),
    };
    Ok(alpha * s.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_channel(k: usize, l: usize, seed: u64) -> DMatrix<C64> {
        let stats = ChannelStats::symmetric(l, k, 1.0, 0.0).unwrap();
        gen_realization(&stats, &mut ChaCha8Rng::seed_from_u64(seed)).h
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("DPC".parse::<Scheme>().is_err());
        assert_eq!(serde_json::to_string(&Scheme::MrtRzf).unwrap(), "\"MRT_RZF\"");
    }

    #[test]
    fn power_split_bounds() {
        assert!(PowerSplit::new(-0.01).is_err());
        assert!(PowerSplit::new(1.01).is_err());
        assert!(PowerSplit::new(f64::NAN).is_err());
        let p = PowerSplit::new(0.25).unwrap();
        assert_eq!(p.rho_bar(), 0.75);
        assert_eq!(p.trace_p2(4), 3.25);
    }

    #[test]
    fn mrt_conjugates_single_user() {
        let h = DMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 1.0)]);
        let p = build_precoder(Scheme::MrtMf, &h, 0.0).unwrap();
        assert_eq!(p.w_common, DVector::from_column_slice(&[c(1.0, 0.0), c(0.0, -1.0)]));
    }

    #[test]
    fn zf_on_identity_is_identity() {
        let h = DMatrix::<C64>::identity(3, 3);
        let p = build_precoder(Scheme::MrtZf, &h, 0.0).unwrap();
        assert!((p.w_private - DMatrix::<C64>::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn zf_inverts_the_channel() {
        let h = random_channel(4, 12, 7);
        let p = build_precoder(Scheme::MrtZf, &h, 0.0).unwrap();
        let residual = &h * &p.w_private - DMatrix::<C64>::identity(4, 4);
        assert!(residual.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn rank_deficient_zf_is_rejected() {
        let mut h = random_channel(3, 6, 8);
        let r0 = h.row(0).into_owned();
        h.row_mut(2).copy_from(&r0);
        match build_precoder(Scheme::MrtZf, &h, 0.0) {
            Err(Error::Singular { scheme, .. }) => assert_eq!(scheme, Scheme::MrtZf),
            other => panic!("expected singular error, got {other:?}"),
        }
        // RZF with positive loading stays well defined.
        assert!(build_precoder(Scheme::MrtRzf, &h, 0.1).is_ok());
    }

    #[test]
    fn rzf_tends_to_zf() {
        let h = random_channel(4, 16, 9);
        let zf = build_precoder(Scheme::MrtZf, &h, 0.0).unwrap();
        let rzf = build_precoder(Scheme::MrtRzf, &h, 1e-12).unwrap();
        let diff = (zf.w_private - rzf.w_private).svd(false, false).singular_values.max();
        assert!(diff < 1e-6);
    }

    #[test]
    fn joint_and_mrt_mf_precoders_coincide() {
        let h = random_channel(5, 9, 10);
        let a = build_precoder(Scheme::MfJoint, &h, 0.0).unwrap();
        let b = build_precoder(Scheme::MrtMf, &h, 0.0).unwrap();
        assert_eq!(a.w_common, b.w_common);
        assert_eq!(a.w_private, b.w_private);
    }

    #[test]
    fn analytic_normalization() {
        let s = ChannelStats::symmetric(12, 4, 1.0, 0.0).unwrap();
        assert!((normalization_mf_analytic(&s, 10.0).unwrap() - 10.0 / 48.0).abs() < 1e-15);
        assert!((normalization_mf_analytic(&s, 30.0).unwrap() - 30.0 / 48.0).abs() < 1e-15);
        let one = ChannelStats::symmetric(1, 1, 1.0, 0.0).unwrap();
        assert_eq!(normalization_mf_analytic(&one, 1.0).unwrap(), 1.0);
        assert!(normalization_mf_analytic(&one, 0.0).is_err());
    }

    #[test]
    fn orthonormal_precoder_normalization() {
        let m = NormalizationMoments { common: 1.0, private: 4.0, trials: 1 };
        let rho = PowerSplit::new(0.3).unwrap();
        assert!((m.alpha(10.0, rho) - 10.0 / rho.trace_p2(4)).abs() < 1e-12);
    }

    #[test]
    fn empirical_matches_analytic_for_mf() {
        let s = ChannelStats::symmetric(12, 4, 1.0, 0.0).unwrap();
        let key = StreamKey::new(3, 0);
        let m = normalization_moments(Scheme::MrtMf, &s, 0.0, 10_000, key).unwrap();
        for rho in [0.0, 0.3, 0.7, 1.0] {
            let a = m.alpha(10.0, PowerSplit::new(rho).unwrap());
            assert!((a / (10.0 / 48.0) - 1.0).abs() < 0.01, "rho={rho}: {a}");
        }
        let a =
            normalization_empirical(Scheme::MrtMf, &s, PowerSplit::new(0.5).unwrap(), 20.0, 0.0, 10_000, key).unwrap();
        assert!((a / (20.0 / 48.0) - 1.0).abs() < 0.01);
        assert!(normalization_empirical(Scheme::MrtMf, &s, PowerSplit::new(0.5).unwrap(), 20.0, 0.0, 999, key).is_err());
    }

    #[test]
    fn signal_power_edge_cases() {
        let h = random_channel(2, 4, 11);
        let p = build_precoder(Scheme::MrtMf, &h, 0.0).unwrap();
        let x = [c(1.0, 0.0), c(0.3, -0.2), c(-1.0, 0.5)];
        assert_eq!(transmit_signal_power(&p, 0.0, PowerSplit::new(0.5).unwrap(), &x).unwrap(), 0.0);
        let only_common = transmit_signal_power(&p, 2.0, PowerSplit::new(1.0).unwrap(), &x).unwrap();
        assert!((only_common - 2.0 * p.w_common.norm_squared()).abs() < 1e-12);
        assert!(transmit_signal_power(&p, 1.0, PowerSplit::new(0.5).unwrap(), &x[..2]).is_err());
    }

    #[test]
    fn joint_superposition_equals_mrt_mf_signal() {
        let h = random_channel(3, 5, 12);
        let joint = build_precoder(Scheme::MfJoint, &h, 0.0).unwrap();
        let mrt = build_precoder(Scheme::MrtMf, &h, 0.0).unwrap();
        let x = [c(0.7, 0.1), c(-0.2, 0.9), c(1.1, -0.4), c(0.0, 0.5)];
        let rho = PowerSplit::new(0.4).unwrap();
        let a = transmit_signal_power(&joint, 0.8, rho, &x).unwrap();
        let b = transmit_signal_power(&mrt, 0.8, rho, &x).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }
}
