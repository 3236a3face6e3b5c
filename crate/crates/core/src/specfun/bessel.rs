use crate::{Error, Result};

/// Above this argument the asymptotic expansion is used.
const SERIES_LIMIT: f64 = 20.0;

/// Exponentially scaled modified Bessel function of order zero, `exp(-x) I0(x)`.
///
/// For `x <= 20` the ascending power series is summed directly (all terms are
/// positive, so there is no cancellation); beyond that the Hankel asymptotic
/// expansion is truncated at its smallest term, which is below `1e-17` there.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!("bessel_i0_scaled: argument must be finite and >= 0, got {x}")));
    }
    if x <= SERIES_LIMIT {
        Ok(series(x) * (-x).exp())
    } else {
        Ok(asymptotic(x))
    }
}

fn series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= q / (m * m);
        sum += term;
        if term < 1e-17 * sum {
            return sum;
        }
    }
}

fn asymptotic(x: f64) -> f64 {
    // a_{k+1} = a_k (2k+1)^2 / (8 (k+1) x)
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k: f64 = 0.0;
    loop {
        let next = term * (2.0 * k + 1.0).powi(2) / (8.0 * (k + 1.0) * x);
        if next >= term || next < 1e-17 {
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}
