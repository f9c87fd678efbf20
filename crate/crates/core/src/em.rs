//! EM fit of `(sigma, tau, xi)` on the two-component marginal mixture
//! `y_i ~ (1 - xi) N(0, sigma^2) + xi N(0, sigma^2 + tau^2)`.

use crate::baselines::mad_sigma;
use crate::error::{Error, Result};
use crate::prior::HyperParams;
use crate::special::{ln_normal_pdf, log_add_exp};

/// Smallest sample size accepted by [`em_fit`] and [`init_heuristic`].
pub const EM_MIN_N: usize = 10;

/// Floor on `tau^2 / sigma^2`.
pub const TAU2_FLOOR: f64 = 1e-8;

/// Mixture parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmParams {
    pub sigma: f64,
    pub tau: f64,
    pub xi: f64,
}

impl EmParams {
    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.sigma) || !ok(self.tau) {
            return Err(Error::Domain(format!(
                "sigma and tau must be positive and finite, got {} and {}",
                self.sigma, self.tau
            )));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::Domain(format!("xi must lie in (0, 1), got {}", self.xi)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    /// Stop when `|l_t - l_{t-1}| <= tol |l_{t-1}|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500 }
    }
}

/// Result of [`em_fit`]. `trace[t]` is the log-likelihood after `t` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct EmEstimates {
    pub sigma_hat: f64,
    pub tau_hat: f64,
    pub xi_hat: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

impl EmEstimates {
    pub fn params(&self) -> EmParams {
        EmParams { sigma: self.sigma_hat, tau: self.tau_hat, xi: self.xi_hat }
    }

    pub fn hyper(&self) -> Result<HyperParams> {
        HyperParams::new(self.sigma_hat, self.tau_hat)
    }
}

fn component_logs(y: f64, v0: f64, v1: f64, ln_xi: f64, ln_1mxi: f64) -> (f64, f64) {
    (ln_1mxi + ln_normal_pdf(y, v0), ln_xi + ln_normal_pdf(y, v1))
}

/// `sum_i ln[(1 - xi) phi(y_i; 0, sigma^2) + xi phi(y_i; 0, sigma^2 + tau^2)]`.
pub fn marginal_loglik(y: &[f64], sigma: f64, tau: f64, xi: f64) -> Result<f64> {
    EmParams { sigma, tau, xi }.validate()?;
    let v0 = sigma * sigma;
    let v1 = v0 + tau * tau;
    let (lx, l1x) = (xi.ln(), (-xi).ln_1p());
    Ok(y
        .iter()
        .map(|&yi| {
            let (a, b) = component_logs(yi, v0, v1, lx, l1x);
            log_add_exp(a, b)
        })
        .sum())
}

/// Posterior probability that each `y_i` comes from the slab component.
pub fn responsibilities(y: &[f64], p: &EmParams) -> Result<Vec<f64>> {
    p.validate()?;
    let v0 = p.sigma * p.sigma;
    let v1 = v0 + p.tau * p.tau;
    let (lx, l1x) = (p.xi.ln(), (-p.xi).ln_1p());
    Ok(y
        .iter()
        .map(|&yi| {
            let (a, b) = component_logs(yi, v0, v1, lx, l1x);
            (b - log_add_exp(a, b)).exp()
        })
        .collect())
}

/// One EM update together with the responsibilities of its E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct EmStep {
    pub params: EmParams,
    pub responsibilities: Vec<f64>,
}

/// One E-step and M-step from `current`.
///
/// `xi` is clamped to `[1/n, 1 - 1/n]`. When the unconstrained slab variance
/// falls below `(1 + 1e-8)` times the null variance, the M-step maximizes
/// on the boundary `sigma^2 + tau^2 = (1 + 1e-8) sigma^2`, which keeps the
/// likelihood non-decreasing.
pub fn em_step(y: &[f64], current: &EmParams) -> Result<EmStep> {
    let n = y.len();
    if n < 2 {
        return Err(Error::Domain(format!("EM needs at least 2 observations, got {n}")));
    }
    let r = responsibilities(y, current)?;
    let nf = n as f64;

    let (mut s1, mut s0, mut q1, mut q0) = (0.0, 0.0, 0.0, 0.0);
    for (&yi, &ri) in y.iter().zip(&r) {
        let y2 = yi * yi;
        s1 += ri;
        s0 += 1.0 - ri;
        q1 += ri * y2;
        q0 += (1.0 - ri) * y2;
    }
    let xi = (s1 / nf).clamp(1.0 / nf, 1.0 - 1.0 / nf);

    let ratio = 1.0 + TAU2_FLOOR;
    let unconstrained = (s0 > 0.0 && s1 > 0.0).then(|| (q0 / s0, q1 / s1));
    let (v0, v1) = match unconstrained {
        Some((v0, v1)) if v1 - v0 >= TAU2_FLOOR * v0 => (v0, v1),
        _ => {
            let v0 = (q0 + q1 / ratio) / nf;
            (v0, ratio * v0)
        }
    };
    if !(v0 > 0.0 && v0.is_finite() && v1.is_finite()) {
        return Err(Error::DegenerateData(format!(
            "EM produced a non-positive noise variance ({v0})"
        )));
    }
    let params = EmParams { sigma: v0.sqrt(), tau: (v1 - v0).sqrt(), xi };
    params.validate().map_err(|e| Error::DegenerateData(e.to_string()))?;
    Ok(EmStep { params, responsibilities: r })
}

fn check_data(y: &[f64]) -> Result<()> {
    if y.len() < EM_MIN_N {
        return Err(Error::Domain(format!(
            "EM needs at least {EM_MIN_N} observations, got {}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("EM input contains non-finite values".into()));
    }
    Ok(())
}

/// MAD noise level, exceedance rate of the universal threshold, and the
/// excess second moment attributed to the slab.
pub fn init_heuristic(y: &[f64]) -> Result<EmParams> {
    check_data(y)?;
    let nf = y.len() as f64;
    let sigma = mad_sigma(y)?;
    let lam = sigma * (2.0 * nf.ln()).sqrt();
    let exceed = y.iter().filter(|v| v.abs() > lam).count() as f64 / nf;
    let xi = exceed.max(1.0 / nf).min(1.0 - 1.0 / nf);
    let s2 = sigma * sigma;
    let mean_sq = y.iter().map(|v| v * v).sum::<f64>() / nf;
    let tau2 = ((mean_sq - s2).max(s2) / xi.max(1.0 / nf)).max(s2 * 1e-4);
    Ok(EmParams { sigma, tau: tau2.sqrt(), xi })
}

/// Iterate [`em_step`] from `init` (or [`init_heuristic`]) to convergence.
pub fn em_fit(y: &[f64], init: Option<EmParams>, options: &EmOptions) -> Result<EmEstimates> {
    check_data(y)?;
    let mut params = match init {
        Some(p) => {
            p.validate()?;
            p
        }
        None => init_heuristic(y)?,
    };
    let mut ll = marginal_loglik(y, params.sigma, params.tau, params.xi)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        params = em_step(y, &params)?.params;
        let next = marginal_loglik(y, params.sigma, params.tau, params.xi)?;
        iterations += 1;
        trace.push(next);
        let done = (next - ll).abs() <= options.tol * ll.abs().max(f64::MIN_POSITIVE);
        ll = next;
        if done {
            converged = true;
            break;
        }
    }
    Ok(EmEstimates {
        sigma_hat: params.sigma,
        tau_hat: params.tau,
        xi_hat: params.xi,
        loglik: ll,
        iterations,
        converged,
        trace,
    })
}
