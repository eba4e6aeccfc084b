//! Complementary error function in linear and log space, and the
//! chi-square(1) survival function built on it.

use crate::error::{Error, Result};

/// Beyond this point `erfc` is evaluated through its asymptotic series in
/// log space; below it the double-precision value is still a normal number.
const LOG_ASYMPTOTIC_FROM: f64 = 26.0;

const BISECTION_CAP: usize = 200;

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `ln(erfc(x))`, finite for every finite `x`.
pub fn log_erfc(x: f64) -> f64 {
    if x < 0.5 {
        // erfc close to 1: keep relative accuracy of the small logarithm.
        (-libm::erf(x)).ln_1p()
    } else if x < LOG_ASYMPTOTIC_FROM {
        libm::erfc(x).ln()
    } else {
        // erfc(x) = exp(-x^2) / (x sqrt(pi)) * sum_k (-1)^k (2k-1)!! / (2x^2)^k
        let inv = 1.0 / (2.0 * x * x);
        let mut term = 1.0;
        let mut series = 1.0;
        for k in 1..=12 {
            term *= -((2 * k - 1) as f64) * inv;
            series += term;
        }
        -x * x - (x * std::f64::consts::PI.sqrt()).ln() + series.ln()
    }
}

fn check_nonnegative(y: f64) -> Result<()> {
    if y >= 0.0 {
        Ok(())
    } else {
        Err(Error::param("y", y, "chi-square argument must be >= 0"))
    }
}

/// `P(chi2_1 >= y) = erfc(sqrt(y / 2))`.
pub fn chisq1_sf(y: f64) -> Result<f64> {
    check_nonnegative(y)?;
    Ok(erfc((0.5 * y).sqrt()))
}

/// `ln P(chi2_1 >= y)`.
pub fn chisq1_log_sf(y: f64) -> Result<f64> {
    check_nonnegative(y)?;
    Ok(log_erfc((0.5 * y).sqrt()))
}

/// The `y` with `P(chi2_1 >= y) = prob`, found by bisection on the log
/// survival function.
pub fn chisq1_sf_inv(prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::param("prob", prob, "must lie in (0, 1)"));
    }
    let target = prob.ln();
    let log_sf = |y: f64| log_erfc((0.5 * y).sqrt());
    let mut lo = 0.0;
    let mut hi = 1.0;
    while log_sf(hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if log_sf(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
