//! Safeguarded scalar root solving for strictly monotone targets.
//!
//! Every root problem in this crate is a strictly increasing C^1 function
//! with a sign change, so a bracket plus Newton steps that fall back to
//! bisection converges unconditionally. Residuals are driven to
//! [`RESIDUAL_TOL`] in the function's own units.

use crate::{Error, Result};

/// Target residual for balance and rest-length solves.
pub const RESIDUAL_TOL: f64 = 1e-13;

const MAX_BRACKET_STEPS: usize = 200;
const MAX_ITERS: usize = 200;

/// Find the root of a strictly increasing `g` with derivative `dg`,
/// starting from `x0 > 0` and expanding the bracket inside `(lo_limit,
/// hi_limit)` by halving toward the lower limit and doubling (or averaging
/// toward a finite upper limit) upward.
pub fn monotone_root(
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    x0: f64,
    lo_limit: f64,
    hi_limit: f64,
    what: &str,
) -> Result<f64> {
    debug_assert!(lo_limit >= 0.0 && x0 > lo_limit && x0 < hi_limit);

    let mut lo = x0;
    let mut g_lo = g(lo);
    let mut steps = 0;
    while g_lo > 0.0 {
        lo = 0.5 * (lo + lo_limit);
        g_lo = g(lo);
        steps += 1;
        if steps > MAX_BRACKET_STEPS || !g_lo.is_finite() {
            return Err(Error::NoRoot(format!(
                "{what}: no lower bracket (last x = {lo})"
            )));
        }
    }
    if g_lo == 0.0 {
        return Ok(lo);
    }

    let mut hi = x0;
    let mut g_hi = g(hi);
    steps = 0;
    while g_hi < 0.0 {
        hi = if hi_limit.is_finite() {
            0.5 * (hi + hi_limit)
        } else {
            2.0 * hi
        };
        g_hi = g(hi);
        steps += 1;
        if steps > MAX_BRACKET_STEPS || !g_hi.is_finite() {
            return Err(Error::NoRoot(format!(
                "{what}: no upper bracket (last x = {hi})"
            )));
        }
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }

    // Newton from the midpoint, kept inside the bracket by bisection.
    let mut x = 0.5 * (lo + hi);
    let mut gx = g(x);
    for _ in 0..MAX_ITERS {
        if gx.abs() <= RESIDUAL_TOL {
            return Ok(x);
        }
        if gx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = dg(x);
        let newton = x - gx / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        gx = g(x);
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            return Ok(x);
        }
    }
    // Monotone targets always land here only through float granularity.
    if gx.abs() <= 1e-9 {
        Ok(x)
    } else {
        Err(Error::NoRoot(format!(
            "{what}: stalled at x = {x}, residual {gx}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_root() {
        let r = monotone_root(
            |x| x * x - 2.0,
            |x| 2.0 * x,
            1.0,
            0.0,
            f64::INFINITY,
            "sqrt2",
        )
        .unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn finds_root_with_far_start() {
        let r = monotone_root(|x| x.ln(), |x| 1.0 / x, 100.0, 0.0, f64::INFINITY, "ln").unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounded_interval_root() {
        // root of f(t) = t - (1 - t) on (0, 1)
        let r = monotone_root(|t| 2.0 * t - 1.0, |_| 2.0, 0.9, 0.0, 1.0, "mid").unwrap();
        assert!((r - 0.5).abs() < 1e-13);
    }

    #[test]
    fn no_root_reports_error() {
        let e = monotone_root(|x| x.exp(), |x| x.exp(), 1.0, 0.0, f64::INFINITY, "exp");
        assert!(matches!(e, Err(Error::NoRoot(_))));
    }
}
