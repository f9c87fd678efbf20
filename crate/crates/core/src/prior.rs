//! Priors on the number of nonzero means and their diagnostics.
//!
//! A prior `pi_n(k)` is described declaratively by [`PriorSpec`] and
//! materialized as a normalized log-pmf over `k = 0..=n` by
//! [`build_prior_table`]. The hierarchical model draws `k ~ pi_n`, a uniformly
//! random support of size `k`, and `N(0, tau^2)` values on that support.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_choose, ln_factorial, log_sum_exp};

/// Declarative prior on `k = ||mu||_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// `B(n, xi)`: independent inclusion with probability `xi`.
    Binomial { xi: f64 },
    /// `pi_n(k) ∝ lambda^k / k!` on `0..=n`.
    TruncatedPoisson { lambda: f64 },
    /// `pi_n(k) ∝ (n - lambda)^(n-k) / (n-k)!` on `0..=n`.
    ReflectedTruncatedPoisson { lambda: f64 },
    /// Unnormalized log-weights for `k = 0..=n`.
    CustomLogWeights { weights: Vec<f64> },
}

impl PriorSpec {
    /// Check the parameter ranges for a problem of size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let nf = n as f64;
        match self {
            PriorSpec::Binomial { xi } => {
                if !(*xi > 0.0 && *xi < 1.0) {
                    return Err(Error::Config(format!("binomial prior needs 0 < xi < 1, got {xi}")));
                }
            }
            PriorSpec::TruncatedPoisson { lambda } => {
                if !(*lambda > 0.0 && *lambda <= nf) {
                    return Err(Error::Config(format!(
                        "truncated Poisson prior needs 0 < lambda <= n = {n}, got {lambda}"
                    )));
                }
            }
            PriorSpec::ReflectedTruncatedPoisson { lambda } => {
                if !(*lambda > 0.0 && *lambda < nf) {
                    return Err(Error::Config(format!(
                        "reflected truncated Poisson prior needs 0 < lambda < n = {n}, got {lambda}"
                    )));
                }
            }
            PriorSpec::CustomLogWeights { weights } => {
                if weights.len() != n + 1 {
                    return Err(Error::Config(format!(
                        "custom prior needs n + 1 = {} log-weights, got {}",
                        n + 1,
                        weights.len()
                    )));
                }
                if let Some(k) = weights.iter().position(|w| !w.is_finite()) {
                    return Err(Error::Config(format!(
                        "custom prior log-weight at k = {k} is not finite ({})",
                        weights[k]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Soft warnings that do not invalidate the prior.
    ///
    /// The reflected prior behaves like an FDR procedure only when
    /// `lambda` grows faster than `sqrt(n ln n)`.
    pub fn warnings(&self, n: usize) -> Vec<String> {
        match self {
            PriorSpec::ReflectedTruncatedPoisson { lambda } if n > 1 => {
                let nf = n as f64;
                let floor = (nf * nf.ln()).sqrt();
                if *lambda <= floor {
                    vec![format!(
                        "reflected truncated Poisson prior: lambda = {lambda} <= sqrt(n ln n) = {floor:.4}"
                    )]
                } else {
                    Vec::new()
                }
            }
            _ => Vec::new(),
        }
    }
}

/// Normalized log-pmf of a prior over `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTable {
    n: usize,
    log_pmf: Vec<f64>,
}

impl PriorTable {
    /// Normalize arbitrary finite log-weights into a table.
    pub fn from_log_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("prior table needs at least one weight".into()));
        }
        if let Some(k) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Config(format!("log-weight at k = {k} is not finite")));
        }
        let norm = log_sum_exp(&weights);
        let log_pmf: Vec<f64> = weights.into_iter().map(|w| w - norm).collect();
        if let Some(k) = log_pmf.iter().position(|w| !w.is_finite()) {
            return Err(Error::Config(format!(
                "prior mass at k = {k} underflows to zero after normalization"
            )));
        }
        Ok(Self { n: log_pmf.len() - 1, log_pmf })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_pmf(&self) -> &[f64] {
        &self.log_pmf
    }

    pub fn pmf(&self) -> Vec<f64> {
        self.log_pmf.iter().map(|l| l.exp()).collect()
    }

    /// Draw `k` by inversion of the cumulative pmf.
    pub fn sample_k<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, l) in self.log_pmf.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                return k;
            }
        }
        // u landed in the rounding gap above the cumulative total
        self.log_pmf
            .iter()
            .rposition(|l| l.exp() > 0.0)
            .unwrap_or(self.n)
    }
}

/// Materialize `spec` for a problem of size `n`.
pub fn build_prior_table(spec: &PriorSpec, n: usize) -> Result<PriorTable> {
    spec.validate(n)?;
    let nu = n as u64;
    let weights: Vec<f64> = match spec {
        PriorSpec::Binomial { xi } => {
            let (lx, l1x) = (xi.ln(), (-xi).ln_1p());
            (0..=nu)
                .map(|k| ln_choose(nu, k) + k as f64 * lx + (nu - k) as f64 * l1x)
                .collect()
        }
        PriorSpec::TruncatedPoisson { lambda } => {
            let ll = lambda.ln();
            (0..=nu).map(|k| k as f64 * ll - ln_factorial(k)).collect()
        }
        PriorSpec::ReflectedTruncatedPoisson { lambda } => {
            let lr = (n as f64 - lambda).ln();
            (0..=nu)
                .map(|k| (nu - k) as f64 * lr - ln_factorial(nu - k))
                .collect()
        }
        PriorSpec::CustomLogWeights { weights } => weights.clone(),
    };
    PriorTable::from_log_weights(weights)
}

/// Noise level and slab width of the hierarchical prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    sigma: f64,
    tau: f64,
    gamma: f64,
}

impl HyperParams {
    pub fn new(sigma: f64, tau: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive and finite, got {sigma}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive and finite, got {tau}")));
        }
        Ok(Self { sigma, tau, gamma: (tau * tau) / (sigma * sigma) })
    }

    /// From the noise level and the variance ratio `gamma = tau^2 / sigma^2`.
    pub fn from_gamma(sigma: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive and finite, got {gamma}")));
        }
        let mut h = Self::new(sigma, sigma * gamma.sqrt())?;
        // keep the ratio exactly as given
        h.gamma = gamma;
        Ok(h)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `gamma = tau^2 / sigma^2`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Sparsity ball of standardized radius `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BallSpec {
    /// At most a proportion `eta` of nonzero entries.
    L0 { eta: f64 },
    /// `(1/n) sum |mu_i|^p <= eta^p`.
    StrongLp { p: f64, eta: f64 },
    /// `|mu|_(i) <= eta (n/i)^(1/p)` for every order statistic.
    WeakLp { p: f64, eta: f64 },
}

impl BallSpec {
    pub fn validate(&self) -> Result<()> {
        let (eta, p) = match *self {
            BallSpec::L0 { eta } => (eta, None),
            BallSpec::StrongLp { p, eta } | BallSpec::WeakLp { p, eta } => (eta, Some(p)),
        };
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("ball radius must be positive, got {eta}")));
        }
        if let Some(p) = p {
            if !(p > 0.0 && p < 2.0) {
                return Err(Error::Config(format!("ball exponent needs 0 < p < 2, got {p}")));
            }
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        match *self {
            BallSpec::L0 { eta } | BallSpec::StrongLp { eta, .. } | BallSpec::WeakLp { eta, .. } => eta,
        }
    }

    /// Membership by definition.
    pub fn contains(&self, mu: &[f64]) -> bool {
        let n = mu.len() as f64;
        match *self {
            BallSpec::L0 { eta } => {
                let nonzero = mu.iter().filter(|m| **m != 0.0).count();
                nonzero as f64 <= eta * n
            }
            BallSpec::StrongLp { p, eta } => {
                let mean: f64 = mu.iter().map(|m| m.abs().powf(p)).sum::<f64>() / n;
                mean <= eta.powf(p)
            }
            BallSpec::WeakLp { p, eta } => {
                let mut abs: Vec<f64> = mu.iter().map(|m| m.abs()).collect();
                abs.sort_by(|a, b| b.total_cmp(a));
                abs.iter()
                    .enumerate()
                    .all(|(i, a)| *a <= eta * (n / (i + 1) as f64).powf(1.0 / p))
            }
        }
    }
}

/// Result of checking `pi_n(k) <= C(n,k) exp(-c(gamma) k)` for every `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub c_gamma: f64,
    /// `ln C(n,k) - c(gamma) k - ln pi_n(k)`; nonnegative where the bound holds.
    pub per_k_margin: Vec<f64>,
    pub holds: bool,
}

impl AssumptionReport {
    pub fn first_failing_k(&self) -> Option<usize> {
        self.per_k_margin
            .iter()
            .enumerate()
            .position(|(k, m)| *m < -margin_slack(self.c_gamma, k))
    }
}

/// `c(gamma) = 8 (gamma + 3/4)^2`.
pub fn c_gamma(gamma: f64) -> f64 {
    let g = gamma + 0.75;
    8.0 * g * g
}

// Rounding slack when the bound holds with equality, e.g. B(n, exp(-c)) at k = n.
fn margin_slack(c: f64, k: usize) -> f64 {
    1e-9 * (1.0 + c * k as f64)
}

pub fn check_assumption_a(table: &PriorTable, gamma: f64) -> Result<AssumptionReport> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let c = c_gamma(gamma);
    let n = table.n() as u64;
    let per_k_margin: Vec<f64> = table
        .log_pmf()
        .iter()
        .enumerate()
        .map(|(k, lp)| ln_choose(n, k as u64) - c * k as f64 - lp)
        .collect();
    let holds = per_k_margin
        .iter()
        .enumerate()
        .all(|(k, m)| *m >= -margin_slack(c, k));
    Ok(AssumptionReport { c_gamma: c, per_k_margin, holds })
}

/// Complexity weights `L_{k,n}` and their maximum `L_n*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityWeights {
    pub weights: Vec<f64>,
    pub l_star: f64,
}

pub fn complexity_weights(table: &PriorTable) -> ComplexityWeights {
    let n = table.n() as u64;
    let lp = table.log_pmf();
    let weights: Vec<f64> = (0..=n)
        .map(|k| {
            if k == 0 {
                -2.0 * lp[0]
            } else {
                (ln_choose(n, k) - lp[k as usize]) / k as f64
            }
        })
        .collect();
    let l_star = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ComplexityWeights { weights, l_star }
}

/// Uniformly random support of size `k` in `0..n`, sorted ascending.
pub fn sample_support<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut support = index::sample(rng, n, k).into_vec();
    support.sort_unstable();
    support
}

/// One draw of `mu` from the hierarchical prior using the caller's generator.
pub fn sample_mu_with<R: Rng + ?Sized>(table: &PriorTable, tau: f64, rng: &mut R) -> Vec<f64> {
    let n = table.n();
    let k = table.sample_k(rng);
    let mut mu = vec![0.0; n];
    for i in sample_support(rng, n, k) {
        let z: f64 = StandardNormal.sample(rng);
        mu[i] = tau * z;
    }
    mu
}

/// One draw of `mu` from the hierarchical prior; deterministic in `seed`.
pub fn sample_mu(spec: &PriorSpec, n: usize, hyper: &HyperParams, seed: u64) -> Result<Vec<f64>> {
    let table = build_prior_table(spec, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_mu_with(&table, hyper.tau(), &mut rng))
}

/// Monte Carlo estimate of a probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEstimate {
    pub estimate: f64,
    pub std_err: f64,
}

/// Probability that a draw from the prior lands in `ball`.
pub fn prior_ball_mass(
    spec: &PriorSpec,
    n: usize,
    hyper: &HyperParams,
    ball: &BallSpec,
    reps: usize,
    seed: u64,
) -> Result<MassEstimate> {
    if reps == 0 {
        return Err(Error::Config("prior_ball_mass needs reps >= 1".into()));
    }
    ball.validate()?;
    let table = build_prior_table(spec, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..reps)
        .filter(|_| ball.contains(&sample_mu_with(&table, hyper.tau(), &mut rng)))
        .count();
    let p = hits as f64 / reps as f64;
    Ok(MassEstimate {
        estimate: p,
        std_err: (p * (1.0 - p) / reps as f64).sqrt(),
    })
}
