use rand::Rng;
use rand_distr::StandardNormal;

use super::bessel::bessel_i0_scaled;
use super::quad::{integrate, panel_count, truncation_point};
use crate::{Error, Result};

/// Absolute tolerance used for CDF quadrature.
const CDF_TOL: f64 = 1e-11;

/// Noncentral chi-squared distribution with two degrees of freedom.
///
/// With noncentrality `0` every method reduces to the exponential law with mean 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncentralChi2 {
    noncentrality: f64,
}

impl NoncentralChi2 {
    pub fn new(noncentrality: f64) -> Result<Self> {
        if !noncentrality.is_finite() || noncentrality < 0.0 {
            return Err(Error::domain(format!("noncentrality must be finite and >= 0, got {noncentrality}")));
        }
        Ok(Self { noncentrality })
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    pub fn mean(&self) -> f64 {
        2.0 + self.noncentrality
    }

    pub fn variance(&self) -> f64 {
        4.0 + 4.0 * self.noncentrality
    }

    /// `(1/2) exp(-(x + lambda)/2) I0(sqrt(lambda x))`.
    ///
    /// Evaluated as `(1/2) e^{-z} I0(z) * exp(-(sqrt(x) - sqrt(lambda))^2 / 2)`
    /// with `z = sqrt(lambda x)`, so neither factor can overflow.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("ncx2 pdf: x must be >= 0, got {x}")));
        }
        Ok(self.density(x))
    }

    fn density(&self, x: f64) -> f64 {
        let lambda = self.noncentrality;
        if lambda == 0.0 {
            return 0.5 * (-0.5 * x).exp();
        }
        if x.is_infinite() {
            return 0.0;
        }
        let z = (lambda * x).sqrt();
        let gap = x.sqrt() - lambda.sqrt();
        // z is finite and non-negative here, so the scaled Bessel cannot fail.
        0.5 * bessel_i0_scaled(z).unwrap_or(0.0) * (-0.5 * gap * gap).exp()
    }

    /// `P(X <= x)`, computed by quadrature of the density.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("ncx2 cdf: x must be >= 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        let upper = truncation_point(self.noncentrality);
        let end = x.min(upper);
        let panels = ((panel_count(self.noncentrality, upper) as f64 * end / upper).ceil() as usize).max(8);
        let v = integrate(|t| self.density(t), 0.0, end, CDF_TOL, panels)?;
        Ok(v.clamp(0.0, 1.0))
    }

    /// Draws `(Z1 + sqrt(lambda))^2 + Z2^2` with independent standard normals.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let a = z1 + self.noncentrality.sqrt();
        a * a + z2 * z2
    }

    /// Moment generating function `exp(lambda t / (1 - 2t)) / (1 - 2t)`, for `t < 1/2`.
    pub fn mgf(&self, t: f64) -> Result<f64> {
        if !(t < 0.5) {
            return Err(Error::domain(format!("ncx2 mgf: t must be < 1/2, got {t}")));
        }
        let d = 1.0 - 2.0 * t;
        Ok((self.noncentrality * t / d).exp() / d)
    }

    /// Smallest `x` with `cdf(x) >= p`, by bisection.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::domain(format!("ncx2 quantile: p must be in [0, 1), got {p}")));
        }
        let mut lo = 0.0;
        let mut hi = truncation_point(self.noncentrality);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid)? < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
