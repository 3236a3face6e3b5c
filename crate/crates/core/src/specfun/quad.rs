//! Adaptive Simpson quadrature.

use crate::{Error, Result};

/// Default absolute tolerance for integrals on `[0, inf)`.
pub const DEFAULT_TOL: f64 = 1e-9;

const MAX_DEPTH: u32 = 50;
const MAX_EVALUATIONS: usize = 20_000_000;

/// Upper integration limit beyond which the two-degree noncentral
/// chi-squared survival function with noncentrality `lambda` is below `1e-12`.
pub fn truncation_point(lambda: f64) -> f64 {
    let scale = lambda + 2.0;
    scale + 40.0 * scale.sqrt() + 80.0
}

/// Integrates `f` over `[0, inf)` for integrands whose mass follows a
/// two-degree noncentral chi-squared law with noncentrality `tail_noncentrality`
/// (pass `0.0` for anything decaying like `exp(-x/2)`).
///
/// The range is cut at [`truncation_point`] and split into panels no wider
/// than half a standard deviation of that law before adaptive refinement, so
/// narrow peaks far from the origin are not stepped over.
pub fn integrate_semi_infinite<F>(f: F, tail_noncentrality: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tail_noncentrality >= 0.0) || !tail_noncentrality.is_finite() {
        return Err(Error::domain(format!("noncentrality must be finite and >= 0, got {tail_noncentrality}")));
    }
    let upper = truncation_point(tail_noncentrality);
    let panels = panel_count(tail_noncentrality, upper);
    integrate(f, 0.0, upper, tol, panels)
}

pub(crate) fn panel_count(lambda: f64, width: f64) -> usize {
    let sd = (4.0 + 4.0 * lambda).sqrt();
    ((width / (0.5 * sd)).ceil() as usize).max(64)
}

/// Adaptive Simpson on `[a, b]`, starting from `panels` equal panels.
///
/// The tolerance is shared between panels in proportion to their width.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64, panels: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::domain(format!("invalid interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut state = Simpson { f: &f, evaluations: 0, converged: true };
    let mut total = 0.0;
    let mut carry = 0.0;
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { lo + width };
        let local_tol = tol * (hi - lo) / (b - a);
        let v = state.panel(lo, hi, local_tol);
        // Kahan: the panel sums span many orders of magnitude.
        let y = v - carry;
        let t = total + y;
        carry = (t - total) - y;
        total = t;
        if state.evaluations > MAX_EVALUATIONS {
            state.converged = false;
            break;
        }
    }
    if state.converged {
        Ok(total)
    } else {
        Err(Error::NoConvergence { estimate: total, evaluations: state.evaluations })
    }
}

struct Simpson<'a, F> {
    f: &'a F,
    evaluations: usize,
    converged: bool,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    fn eval(&mut self, x: f64) -> f64 {
        self.evaluations += 1;
        (self.f)(x)
    }

    fn panel(&mut self, a: f64, b: f64, tol: f64) -> f64 {
        let fa = self.eval(a);
        let fb = self.eval(b);
        let m = 0.5 * (a + b);
        let fm = self.eval(m);
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        self.refine(a, b, fa, fm, fb, whole, tol, 0)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.eval(lm);
        let frm = self.eval(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let split = left + right;
        let err = split - whole;
        if err.abs() <= 15.0 * tol {
            return split + err / 15.0;
        }
        if depth >= MAX_DEPTH || self.evaluations > MAX_EVALUATIONS {
            self.converged = false;
            return split + err / 15.0;
        }
        self.refine(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
            + self.refine(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
    }
}
