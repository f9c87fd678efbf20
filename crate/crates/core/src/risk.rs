//! Risk references and the Monte Carlo benchmark.
//!
//! Every replication draws from its own ChaCha8 stream, keyed by the master
//! seed, the grid cell and the replication index. Losses are reduced in
//! replication order, so reports do not depend on the thread count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    aic, bic, fdr_sequence, fixed_threshold_estimate, foster_stine_sequence, mad_sigma,
    tk_sequence, universal_threshold, variable_threshold_estimate, DEFAULT_FDR_Q,
};
use crate::em::{em_fit, EmOptions};
use crate::error::{Error, Result};
use crate::map::map_estimate_with_table;
use crate::prior::{build_prior_table, BallSpec, HyperParams, PriorSpec};

/// Ideal keep-or-kill risk `sum_i min(mu_i^2, sigma^2)`.
pub fn oracle_risk(mu: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let s2 = sigma * sigma;
    Ok(mu.iter().map(|m| (m * m).min(s2)).sum())
}

/// Asymptotic minimax risk over `ball` for `n` observations with noise `sigma`.
///
/// Weak and strong `l_p` balls switch to the super-sparse branch when
/// `n^(1/p) eta < sqrt(2 ln n)`; strong balls drop the factor `2/(2-p)`.
pub fn minimax_rate(ball: &BallSpec, n: usize, sigma: f64) -> Result<f64> {
    ball.validate()?;
    let eta = ball.eta();
    if eta >= 1.0 {
        return Err(Error::Domain(format!(
            "minimax rates are asymptotic in eta -> 0; eta = {eta} is not below 1"
        )));
    }
    if n < 2 {
        return Err(Error::Domain(format!("minimax rate needs n >= 2, got {n}")));
    }
    let (nf, s2) = (n as f64, sigma * sigma);
    match *ball {
        BallSpec::L0 { eta } => Ok(s2 * nf * eta * 2.0 * (1.0 / eta).ln()),
        BallSpec::WeakLp { p, eta } => Ok(2.0 / (2.0 - p) * lp_rate(p, eta, nf, s2)),
        BallSpec::StrongLp { p, eta } => Ok(lp_rate(p, eta, nf, s2)),
    }
}

fn lp_rate(p: f64, eta: f64, n: f64, s2: f64) -> f64 {
    if n.powf(1.0 / p) * eta >= (2.0 * n.ln()).sqrt() {
        let etap = eta.powf(p);
        s2 * n * etap * (2.0 * (1.0 / etap).ln()).powf(1.0 - p / 2.0)
    } else {
        s2 * n.powf(2.0 / p) * eta * eta
    }
}

/// Extremal mean vector for `ball`.
///
/// Weak balls: `mu_i = eta (n/i)^(1/p)`. `l_0` balls: `floor(n eta)` leading
/// spikes of height `sigma sqrt(2 ln(1/eta))`. Strong balls are not covered.
pub fn least_favorable_mu(ball: &BallSpec, n: usize, sigma: f64) -> Result<Vec<f64>> {
    ball.validate()?;
    let nf = n as f64;
    match *ball {
        BallSpec::WeakLp { p, eta } => Ok((1..=n).map(|i| eta * (nf / i as f64).powf(1.0 / p)).collect()),
        BallSpec::L0 { eta } => {
            if eta >= 1.0 {
                return Err(Error::Domain(format!("spike height needs eta < 1, got {eta}")));
            }
            let k = ((nf * eta + 1e-9).floor() as usize).min(n);
            let height = sigma * (2.0 * (1.0 / eta).ln()).sqrt();
            Ok((0..n).map(|i| if i < k { height } else { 0.0 }).collect())
        }
        BallSpec::StrongLp { .. } => Err(Error::UnsupportedBall(
            "no least-favorable vector for strong l_p balls; use the weak ball of the same radius".into(),
        )),
    }
}

/// Where fixed-threshold baselines take their noise level from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaSource {
    /// MAD of the data.
    Mad,
    /// EM estimate, or the true value when EM is disabled.
    Fitted,
}

/// An estimator evaluated by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// MAP with the binomial prior `B(n, xi)`.
    Bin,
    /// MAP with the truncated Poisson prior, `lambda = n xi`.
    Pois1,
    /// MAP with the reflected truncated Poisson prior, `lambda = n xi`.
    Pois2,
    Universal(SigmaSource),
    /// Ideal risk `sum min(mu_i^2, sigma^2)`; needs the true `mu`.
    Oracle,
    Fdr { q: f64 },
    FosterStine,
    Tk,
    Aic,
    Bic,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let unknown = || Error::UnknownMethod(s.to_string());
        let method = match (head, arg) {
            ("bin" | "binomial", None) => Method::Bin,
            ("pois1" | "poisson", None) => Method::Pois1,
            ("pois2" | "rpoisson", None) => Method::Pois2,
            ("universal", None | Some("sigma=mad")) => Method::Universal(SigmaSource::Mad),
            ("universal", Some("sigma=fitted")) => Method::Universal(SigmaSource::Fitted),
            ("oracle", None) => Method::Oracle,
            ("fdr", None) => Method::Fdr { q: DEFAULT_FDR_Q },
            ("fdr", Some(a)) => {
                let q = a
                    .strip_prefix("q=")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(unknown)?;
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::Config(format!("fdr level must lie in (0, 1), got {q}")));
                }
                Method::Fdr { q }
            }
            ("foster-stine", None) => Method::FosterStine,
            ("tk", None) => Method::Tk,
            ("aic", None) => Method::Aic,
            ("bic", None) => Method::Bic,
            _ => return Err(unknown()),
        };
        Ok(method)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Bin => f.write_str("bin"),
            Method::Pois1 => f.write_str("pois1"),
            Method::Pois2 => f.write_str("pois2"),
            Method::Universal(SigmaSource::Mad) => f.write_str("universal"),
            Method::Universal(SigmaSource::Fitted) => f.write_str("universal:sigma=fitted"),
            Method::Oracle => f.write_str("oracle"),
            Method::Fdr { q } => write!(f, "fdr:q={q}"),
            Method::FosterStine => f.write_str("foster-stine"),
            Method::Tk => f.write_str("tk"),
            Method::Aic => f.write_str("aic"),
            Method::Bic => f.write_str("bic"),
        }
    }
}

/// Hyperparameters handed to the estimators for one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plugin {
    pub sigma: f64,
    pub tau: f64,
    pub xi: f64,
}

impl Method {
    /// Estimate `mu` from `y`. Returns `None` for [`Method::Oracle`].
    pub fn estimate(&self, y: &[f64], plug: &Plugin) -> Result<Option<Vec<f64>>> {
        let n = y.len();
        let nf = n as f64;
        let map = |spec: PriorSpec| -> Result<Vec<f64>> {
            let hyper = HyperParams::new(plug.sigma, plug.tau)?;
            let table = build_prior_table(&spec, n)?;
            Ok(map_estimate_with_table(y, &hyper, &table)?.mu_hat)
        };
        let fixed = |lam: f64| -> Result<Vec<f64>> { Ok(fixed_threshold_estimate(y, lam)?.mu_hat) };
        let variable = |lams: Vec<f64>| -> Result<Vec<f64>> {
            Ok(variable_threshold_estimate(y, &lams)?.mu_hat)
        };
        let mu = match *self {
            Method::Bin => map(PriorSpec::Binomial { xi: plug.xi })?,
            Method::Pois1 => map(PriorSpec::TruncatedPoisson { lambda: nf * plug.xi })?,
            Method::Pois2 => map(PriorSpec::ReflectedTruncatedPoisson { lambda: nf * plug.xi })?,
            Method::Universal(SigmaSource::Mad) => fixed(universal_threshold(n, mad_sigma(y)?)?)?,
            Method::Universal(SigmaSource::Fitted) => fixed(universal_threshold(n, plug.sigma)?)?,
            Method::Oracle => return Ok(None),
            Method::Fdr { q } => variable(fdr_sequence(n, plug.sigma, q)?)?,
            Method::FosterStine => variable(foster_stine_sequence(n, plug.sigma)?)?,
            Method::Tk => variable(tk_sequence(n, plug.sigma)?)?,
            Method::Aic => fixed(aic(plug.sigma)?)?,
            Method::Bic => fixed(bic(n, plug.sigma)?)?,
        };
        Ok(Some(mu))
    }

    /// Squared error `||mu_hat - mu||^2`, or the ideal risk for the oracle.
    pub fn loss(&self, y: &[f64], mu: &[f64], plug: &Plugin, sigma_true: f64) -> Result<f64> {
        match self.estimate(y, plug)? {
            Some(est) => Ok(est.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum()),
            None => oracle_risk(mu, sigma_true),
        }
    }
}

/// Grid experiment description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub sigma_true: f64,
    pub xi_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub replications: usize,
    pub methods: Vec<String>,
    pub use_em: bool,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let min_n = if self.use_em { crate::em::EM_MIN_N } else { 2 };
        if self.n < min_n {
            return Err(Error::Config(format!("n must be at least {min_n}, got {}", self.n)));
        }
        if !(self.sigma_true > 0.0 && self.sigma_true.is_finite()) {
            return Err(Error::Config(format!("sigma_true must be positive, got {}", self.sigma_true)));
        }
        if self.xi_grid.is_empty() || self.tau_grid.is_empty() {
            return Err(Error::Config("xi_grid and tau_grid must be non-empty".into()));
        }
        if let Some(xi) = self.xi_grid.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
            return Err(Error::Config(format!("xi_grid entries must lie in (0, 1), got {xi}")));
        }
        if let Some(t) = self.tau_grid.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::Config(format!("tau_grid entries must be positive, got {t}")));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be non-empty".into()));
        }
        if (self.xi_grid.len() * self.tau_grid.len()) as u64 > u32::MAX as u64
            || self.replications as u64 > u32::MAX as u64
        {
            return Err(Error::Config("grid or replication count too large".into()));
        }
        self.parsed_methods().map(|_| ())
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }
}

/// AMSE of one method in one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskCell {
    pub method: String,
    pub xi: f64,
    pub tau: f64,
    pub amse: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub config: ExperimentConfig,
    pub cells: Vec<RiskCell>,
}

impl RiskReport {
    pub fn get(&self, method: &str, xi: f64, tau: f64) -> Option<&RiskCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.xi == xi && c.tau == tau)
    }

    /// Header `method,xi,tau,amse,std_err,replications,seed`, values at 6 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,xi,tau,amse,std_err,replications,seed\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.method,
                format_sig(c.xi, 6),
                format_sig(c.tau, 6),
                format_sig(c.amse, 6),
                format_sig(c.std_err, 6),
                self.config.replications,
                self.config.master_seed
            ));
        }
        out
    }
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

/// Generator for replication `rep` of grid cell `cell`.
pub fn replication_rng(master_seed: u64, cell: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((cell << 32) | rep);
    rng
}

/// Bernoulli(`xi`) spike-and-slab means and `y = mu + sigma z`.
pub fn draw_replication<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    xi: f64,
    tau: f64,
    sigma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut mu = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..n {
        if rng.random::<f64>() < xi {
            let w: f64 = StandardNormal.sample(rng);
            mu[i] = tau * w;
        }
        let z: f64 = StandardNormal.sample(rng);
        y[i] = mu[i] + sigma * z;
    }
    (mu, y)
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// [`monte_carlo_amse_with_threads`] on the global rayon pool.
pub fn monte_carlo_amse(config: &ExperimentConfig) -> Result<RiskReport> {
    monte_carlo_amse_with_threads(config, None)
}

/// AMSE `mean_r ||mu_hat - mu||^2 / n` for every method and grid cell.
///
/// `threads = Some(t)` runs on a private pool of `t` workers.
pub fn monte_carlo_amse_with_threads(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<RiskReport> {
    config.validate()?;
    let methods = config.parsed_methods()?;
    let n = config.n;
    let nf = n as f64;
    let n_tau = config.tau_grid.len();
    let n_cells = config.xi_grid.len() * n_tau;
    let reps = config.replications;

    let run = |task: usize| -> Result<Vec<f64>> {
        let (cell, rep) = (task / reps, task % reps);
        let (xi, tau) = (config.xi_grid[cell / n_tau], config.tau_grid[cell % n_tau]);
        let mut rng = replication_rng(config.master_seed, cell as u64, rep as u64);
        let (mu, y) = draw_replication(&mut rng, n, xi, tau, config.sigma_true);
        let plug = if config.use_em {
            let fit = em_fit(&y, None, &EmOptions::default())?;
            Plugin { sigma: fit.sigma_hat, tau: fit.tau_hat, xi: fit.xi_hat }
        } else {
            Plugin { sigma: config.sigma_true, tau, xi }
        };
        methods
            .iter()
            .map(|m| Ok(m.loss(&y, &mu, &plug, config.sigma_true)? / nf))
            .collect()
    };

    let losses: Vec<Result<Vec<f64>>> =
        with_pool(threads, || (0..n_cells * reps).into_par_iter().map(run).collect())?;
    let losses: Vec<Vec<f64>> = losses.into_iter().collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(n_cells * methods.len());
    for (mi, method) in methods.iter().enumerate() {
        for cell in 0..n_cells {
            let values: Vec<f64> = (0..reps).map(|r| losses[cell * reps + r][mi]).collect();
            let (amse, std_err) = mean_and_se(&values);
            cells.push(RiskCell {
                method: method.to_string(),
                xi: config.xi_grid[cell / n_tau],
                tau: config.tau_grid[cell % n_tau],
                amse,
                std_err,
            });
        }
    }
    Ok(RiskReport { config: config.clone(), cells })
}

/// Empirical risk at the least-favorable vector relative to the minimax rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub n: usize,
    pub eta: f64,
    pub rate: f64,
    /// Monte Carlo mean of `||mu_hat - mu||^2`.
    pub risk: f64,
    pub risk_std_err: f64,
    pub ratio: f64,
    pub oracle_risk: f64,
    pub oracle_ratio: f64,
}

/// Risk of the MAP estimator at the least-favorable vector of `ball(n)`,
/// divided by the minimax rate, for each `n` in `n_grid`.
pub fn rate_check<P, B>(
    prior: P,
    ball: B,
    n_grid: &[usize],
    hyper: &HyperParams,
    reps: usize,
    seed: u64,
) -> Result<Vec<RatePoint>>
where
    P: Fn(usize) -> Result<PriorSpec>,
    B: Fn(usize) -> BallSpec,
{
    if reps == 0 {
        return Err(Error::Config("rate_check needs reps >= 1".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("n_grid must be strictly ascending".into()));
    }
    let sigma = hyper.sigma();
    n_grid
        .iter()
        .enumerate()
        .map(|(gi, &n)| {
            let ball = ball(n);
            let rate = minimax_rate(&ball, n, sigma)?;
            let mu = least_favorable_mu(&ball, n, sigma)?;
            let table = build_prior_table(&prior(n)?, n)?;
            let losses: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replication_rng(seed, gi as u64, r as u64);
                    let y: Vec<f64> = mu
                        .iter()
                        .map(|m| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            m + sigma * z
                        })
                        .collect();
                    let est = map_estimate_with_table(&y, hyper, &table)?;
                    Ok(est.mu_hat.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum())
                })
                .collect::<Result<_>>()?;
            let (risk, risk_std_err) = mean_and_se(&losses);
            let oracle = oracle_risk(&mu, sigma)?;
            Ok(RatePoint {
                n,
                eta: ball.eta(),
                rate,
                risk,
                risk_std_err,
                ratio: risk / rate,
                oracle_risk: oracle,
                oracle_ratio: oracle / rate,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn oracle_risk_values() {
        assert_eq!(oracle_risk(&[0.0; 7], 1.0).unwrap(), 0.0);
        assert_eq!(oracle_risk(&[2.0; 5], 2.0).unwrap(), 20.0);
        assert_relative_eq!(oracle_risk(&[3.0, 0.75], 1.5).unwrap(), 1.25 * 2.25);
        assert!(oracle_risk(&[1.0], 0.0).is_err());
    }

    #[test]
    fn minimax_rate_values() {
        let l0 = minimax_rate(&BallSpec::L0 { eta: 0.01 }, 1000, 1.0).unwrap();
        assert_relative_eq!(l0, 92.103_403_719_761_83, max_relative = 1e-12);
        // n eta = 1 < sqrt(2 ln n): super-sparse
        let eta = 0.001;
        let weak = minimax_rate(&BallSpec::WeakLp { p: 1.0, eta }, 1000, 1.0).unwrap();
        assert_relative_eq!(weak, 2.0 * 1000f64.powi(2) * eta * eta, max_relative = 1e-12);
        for p in [0.5, 1.0, 1.5] {
            let eta = 0.05;
            let w = minimax_rate(&BallSpec::WeakLp { p, eta }, 10_000, 2.0).unwrap();
            let s = minimax_rate(&BallSpec::StrongLp { p, eta }, 10_000, 2.0).unwrap();
            assert_relative_eq!(w, 2.0 / (2.0 - p) * s, max_relative = 1e-14);
        }
        assert!(matches!(minimax_rate(&BallSpec::L0 { eta: 1.0 }, 100, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn least_favorable_vectors() {
        let ball = BallSpec::WeakLp { p: 0.7, eta: 0.1 };
        let mu = least_favorable_mu(&ball, 200, 1.0).unwrap();
        assert_relative_eq!(mu[199], 0.1, max_relative = 1e-14);
        let tight: Vec<f64> = mu.iter().map(|m| m * (1.0 - 1e-12)).collect();
        assert!(ball.contains(&tight));
        let over: Vec<f64> = mu.iter().enumerate().map(|(i, m)| if i == 50 { m * 1.001 } else { *m }).collect();
        assert!(!ball.contains(&over));

        let spikes = least_favorable_mu(&BallSpec::L0 { eta: 0.01 }, 1000, 1.0).unwrap();
        assert_eq!(spikes.iter().filter(|m| **m != 0.0).count(), 10);
        assert_relative_eq!(spikes[0], (2.0 * 100f64.ln()).sqrt());
        assert!(matches!(
            least_favorable_mu(&BallSpec::StrongLp { p: 1.0, eta: 0.1 }, 10, 1.0),
            Err(Error::UnsupportedBall(_))
        ));
    }

    #[test]
    fn method_descriptors_round_trip() {
        for s in ["bin", "pois1", "pois2", "universal", "universal:sigma=fitted", "oracle", "fdr:q=0.1", "foster-stine", "tk", "aic", "bic"] {
            let m: Method = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert_eq!("fdr".parse::<Method>().unwrap(), Method::Fdr { q: 0.05 });
        assert!(matches!("ebayes".parse::<Method>(), Err(Error::UnknownMethod(_))));
        assert!("fdr:q=2".parse::<Method>().is_err());
    }

    #[test]
    fn format_sig_matches_printf_g() {
        let cases = [
            (0.137_234_49, "0.137234"),
            (2.772, "2.772"),
            (100.0, "100"),
            (1234567.0, "1.23457e+06"),
            (0.000_012_345_67, "1.23457e-05"),
            (0.0001, "0.0001"),
            (-3.5, "-3.5"),
            (0.0, "0"),
            (999_999.5, "1e+06"),
        ];
        for (x, s) in cases {
            assert_eq!(format_sig(x, 6), s, "{x}");
        }
        let v = 0.1f64 + 0.2;
        assert_eq!(format_sig(v, 17).parse::<f64>().unwrap(), v);
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n: 200,
            sigma_true: 1.0,
            xi_grid: vec![0.05, 0.3],
            tau_grid: vec![3.0, 6.0],
            replications: 6,
            methods: vec!["bin".into(), "pois1".into(), "pois2".into(), "universal".into(), "oracle".into(), "fdr".into()],
            use_em: true,
            master_seed: 7,
        }
    }

    #[test]
    fn report_is_deterministic_across_thread_counts() {
        let c = small_config();
        let a = monte_carlo_amse_with_threads(&c, Some(1)).unwrap();
        let b = monte_carlo_amse_with_threads(&c, Some(4)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 6 * 4);
        assert!(a.cells.iter().all(|c| c.amse >= 0.0 && c.std_err >= 0.0));
        assert!(a.get("oracle", 0.3, 6.0).is_some());
    }

    #[test]
    fn single_replication_has_zero_std_err() {
        let mut c = small_config();
        c.replications = 1;
        c.use_em = false;
        let r = monte_carlo_amse(&c).unwrap();
        assert!(r.cells.iter().all(|c| c.std_err == 0.0));
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        c.methods.push("ebayes".into());
        assert!(matches!(c.validate(), Err(Error::UnknownMethod(_))));
        let mut c = small_config();
        c.xi_grid.clear();
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.replications = 0;
        assert!(c.validate().is_err());
        let e = ExperimentConfig::from_json(r#"{"n": 10}"#).unwrap_err();
        assert!(e.to_string().contains("missing field"), "{e}");
        let e = ExperimentConfig::from_json(
            r#"{"n":100,"sigma_true":1,"xi_grid":[0.1],"tau_grid":[1],"replications":1,"methods":["bin"],"use_em":false,"master_seed":1,"extra":0}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("unknown field"), "{e}");
    }

    #[test]
    fn streams_differ_by_cell_and_replication() {
        let a: u64 = replication_rng(1, 0, 0).random();
        let b: u64 = replication_rng(1, 0, 1).random();
        let c: u64 = replication_rng(1, 1, 0).random();
        let d: u64 = replication_rng(1, 0, 0).random();
        assert!(a != b && a != c && b != c);
        assert_eq!(a, d);
    }

    #[test]
    fn rate_check_shapes() {
        let hyper = HyperParams::new(1.0, 5.0).unwrap();
        let pts = rate_check(
            |n| Ok(PriorSpec::Binomial { xi: (n as f64).ln() / n as f64 }),
            |n| BallSpec::L0 { eta: 10.0 / n as f64 },
            &[100, 200],
            &hyper,
            20,
            3,
        )
        .unwrap();
        assert_eq!(pts.len(), 2);
        for p in &pts {
            assert!(p.ratio > 0.0 && p.ratio.is_finite());
            assert!(p.oracle_ratio <= 1.0 + 1e-12);
        }
        assert!(rate_check(
            |_| Ok(PriorSpec::Binomial { xi: 0.1 }),
            |_| BallSpec::L0 { eta: 0.1 },
            &[200, 100],
            &hyper,
            1,
            0
        )
        .is_err());
    }
}
