//! Log-space special functions shared by the priors, penalties and the EM fit.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Below this value of `min(k, n - k)` the binomial coefficient is summed
/// term by term; above it the log-gamma differences no longer lose digits.
const DIRECT_SUM_LIMIT: u64 = 64;

/// `ln C(n, k)`.
pub fn log_choose(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::Domain(format!("log_choose: k = {k} exceeds n = {n}")));
    }
    Ok(ln_choose(n, k))
}

pub(crate) fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    let m = k.min(n - k);
    if m == 0 {
        return 0.0;
    }
    if m <= DIRECT_SUM_LIMIT {
        // C(n, m) = prod_{i=1..m} (n - m + i) / i
        let base = (n - m) as f64;
        return (1..=m)
            .map(|i| ((base + i as f64) / i as f64).ln())
            .sum();
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `ln k!` via log-gamma.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        0.0
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln sum_i exp(v_i)`; `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Log density of `N(0, variance)` at `x`.
#[inline]
pub fn ln_normal_pdf(x: f64, variance: f64) -> f64 {
    const LN_2PI: f64 = 1.837_877_066_409_345_5;
    -0.5 * (LN_2PI + variance.ln()) - x * x / (2.0 * variance)
}

/// Standard normal quantile `z(p)` for `0 < p < 1`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile needs 0 < p < 1, got {p}"
        )));
    }
    Ok(Normal::standard().inverse_cdf(p))
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub(crate) fn median(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
