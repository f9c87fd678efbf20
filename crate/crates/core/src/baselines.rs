//! Classical thresholding rules used as benchmarks.

use crate::error::{Error, Result};
use crate::map::{keep_top, order_by_magnitude, threshold_with_penalty, EstimateResult, PenaltyTable, Selection};
use crate::special::{median, normal_quantile};

/// Consistency constant of the MAD for Gaussian data.
pub const MAD_SCALE: f64 = 0.6745;

/// Default FDR level.
pub const DEFAULT_FDR_Q: f64 = 0.05;

/// A keep-or-kill rule with a fixed or an index-dependent threshold.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdRule {
    Fixed { lambda: f64 },
    Variable { lams: Vec<f64> },
}

impl ThresholdRule {
    pub fn apply(&self, y: &[f64]) -> Result<EstimateResult> {
        match self {
            ThresholdRule::Fixed { lambda } => fixed_threshold_estimate(y, *lambda),
            ThresholdRule::Variable { lams } => variable_threshold_estimate(y, lams),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("threshold rules need n >= 2, got {n}")));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive and finite, got {sigma}")));
    }
    Ok(())
}

/// `sigma sqrt(2 ln n)`.
pub fn universal_threshold(n: usize, sigma: f64) -> Result<f64> {
    check_n(n)?;
    check_sigma(sigma)?;
    Ok(sigma * (2.0 * (n as f64).ln()).sqrt())
}

/// AIC: `sqrt(2) sigma`.
pub fn aic(sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(std::f64::consts::SQRT_2 * sigma)
}

/// BIC: `sigma sqrt(ln n)`.
pub fn bic(n: usize, sigma: f64) -> Result<f64> {
    check_n(n)?;
    check_sigma(sigma)?;
    Ok(sigma * (n as f64).ln().sqrt())
}

/// RIC, identical to the universal threshold.
pub fn ric(n: usize, sigma: f64) -> Result<f64> {
    universal_threshold(n, sigma)
}

/// `lambda_i = sigma z(1 - (i/n)(q/2))` for `i = 1..=n`.
pub fn fdr_sequence(n: usize, sigma: f64, q: f64) -> Result<Vec<f64>> {
    check_n(n)?;
    check_sigma(sigma)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("FDR level q must lie in (0, 1), got {q}")));
    }
    let nf = n as f64;
    (1..=n)
        .map(|i| Ok(sigma * normal_quantile(1.0 - (i as f64 / nf) * (q / 2.0))?))
        .collect()
}

/// `lambda_i = sigma sqrt(2 ln(n/i))`.
pub fn foster_stine_sequence(n: usize, sigma: f64) -> Result<Vec<f64>> {
    check_n(n)?;
    check_sigma(sigma)?;
    let nf = n as f64;
    Ok((1..=n)
        .map(|i| sigma * (2.0 * (nf / i as f64).ln()).sqrt())
        .collect())
}

/// `lambda_i = 2 sigma sqrt(ln(n/i))`.
pub fn tk_sequence(n: usize, sigma: f64) -> Result<Vec<f64>> {
    check_n(n)?;
    check_sigma(sigma)?;
    let nf = n as f64;
    Ok((1..=n)
        .map(|i| 2.0 * sigma * (nf / i as f64).ln().sqrt())
        .collect())
}

/// `median |y - median(y)| / 0.6745`.
pub fn mad_sigma(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::Domain(format!("MAD needs at least 2 observations, got {}", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("MAD input contains non-finite values".into()));
    }
    let m = median(y);
    let dev: Vec<f64> = y.iter().map(|v| (v - m).abs()).collect();
    let mad = median(&dev);
    if mad <= 0.0 {
        return Err(Error::DegenerateData(
            "median absolute deviation is zero; noise level cannot be estimated".into(),
        ));
    }
    Ok(mad / MAD_SCALE)
}

/// `mu_i = y_i 1{|y_i| >= lambda}`.
///
/// `objective[k]` is the fixed-penalty criterion `sum_{i > k} y_(i)^2 + k lambda^2`.
pub fn fixed_threshold_estimate(y: &[f64], lambda: f64) -> Result<EstimateResult> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("threshold must be nonnegative, got {lambda}")));
    }
    let order = order_by_magnitude(y);
    let k_hat = order.iter().take_while(|&&i| y[i].abs() >= lambda).count();
    let n = y.len();
    let mut residual = vec![0.0; n + 1];
    for k in (0..n).rev() {
        residual[k] = residual[k + 1] + y[order[k]] * y[order[k]];
    }
    let lam2 = lambda * lambda;
    let objective = residual
        .iter()
        .enumerate()
        .map(|(k, r)| if k == 0 { *r } else { r + k as f64 * lam2 })
        .collect();
    Ok(keep_top(y, &order, Selection { k_hat, objective }))
}

/// Minimize `sum_{i > k} y_(i)^2 + sum_{i <= k} lams[i]^2` and keep the `k`
/// largest `|y_i|`. The `k = 0` cost is zero.
pub fn variable_threshold_estimate(y: &[f64], lams: &[f64]) -> Result<EstimateResult> {
    if lams.len() != y.len() {
        return Err(Error::Domain(format!(
            "threshold sequence has length {} but the data have length {}",
            lams.len(),
            y.len()
        )));
    }
    if let Some(i) = lams.iter().position(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Domain(format!("threshold {} is negative or not finite", i + 1)));
    }
    let increments = std::iter::once(0.0).chain(lams.iter().map(|l| l * l)).collect();
    threshold_with_penalty(y, &PenaltyTable::from_increments(increments)?)
}
