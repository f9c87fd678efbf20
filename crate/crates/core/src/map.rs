//! MAP testimation: complexity penalty, selection of `k`, hard thresholding.
//!
//! Under the hierarchical prior the posterior mode over all `2^n`
//! configurations is attained among the `n + 1` candidates that keep the `k`
//! largest `|y_i|`. The mode minimizes
//!
//! ```text
//! sum_{i > k} y_(i)^2 + P_n(k),
//! P_n(k) = 2 sigma^2 (1 + 1/gamma) ( ln C(n,k) - ln pi_n(k) + (k/2) ln(1 + gamma) )
//! ```
//!
//! and the estimate keeps `y_i` on the selected support. [`brute_force_map`]
//! enumerates every configuration and serves as the reference for small `n`.

use crate::error::{Error, Result};
use crate::prior::{build_prior_table, HyperParams, PriorSpec, PriorTable};
use crate::special::ln_choose;

/// Largest `n` the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_N: usize = 20;

/// Observations `y = mu + sigma z`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSequence {
    y: Vec<f64>,
    sigma: Option<f64>,
}

impl GaussianSequence {
    pub fn new(y: Vec<f64>, sigma: Option<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Domain("empty observation vector".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("observation {i} is not finite ({})", y[i])));
        }
        if let Some(s) = sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Domain(format!("noise level must be positive, got {s}")));
            }
        }
        Ok(Self { y, sigma })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Penalty `P_n(k)` for `k = 0..=n` and its increments.
///
/// `penalty[k] == increments[0] + ... + increments[k]`. Increments may be
/// negative for priors that are not log-concave enough.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyTable {
    penalty: Vec<f64>,
    increments: Vec<f64>,
}

impl PenaltyTable {
    /// Build from increments by cumulative summation.
    pub fn from_increments(increments: Vec<f64>) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::Domain("penalty needs at least the k = 0 entry".into()));
        }
        if increments.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("penalty increment is NaN".into()));
        }
        let penalty = increments
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        Ok(Self { penalty, increments })
    }

    pub fn n(&self) -> usize {
        self.penalty.len() - 1
    }

    pub fn penalty(&self) -> &[f64] {
        &self.penalty
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `max_k |P[k] - sum_{i<=k} inc[i]| / (1 + |P[k]|)`.
    pub fn telescoping_error(&self) -> f64 {
        let mut acc = 0.0;
        let mut worst = 0.0f64;
        for (p, inc) in self.penalty.iter().zip(&self.increments) {
            acc += inc;
            worst = worst.max((p - acc).abs() / (1.0 + p.abs()));
        }
        worst
    }
}

/// Indicator vector of nonzero means.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    x: Vec<bool>,
    k: usize,
}

impl Configuration {
    pub fn new(x: Vec<bool>) -> Self {
        let k = x.iter().filter(|b| **b).count();
        Self { x, k }
    }

    pub fn from_support(n: usize, support: &[usize]) -> Self {
        let mut x = vec![false; n];
        for &i in support {
            x[i] = true;
        }
        Self::new(x)
    }

    pub fn x(&self) -> &[bool] {
        &self.x
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of the `true` entries, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.x
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect()
    }
}

/// Hard-threshold estimate with the scanned selection criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub k_hat: usize,
    /// `|y|_(k_hat)`; `+inf` when nothing is kept.
    pub threshold: f64,
    /// Kept indices, ascending.
    pub kept: Vec<usize>,
    pub mu_hat: Vec<f64>,
    /// Criterion value for every `k = 0..=n`.
    pub objective: Vec<f64>,
}

impl EstimateResult {
    pub fn configuration(&self) -> Configuration {
        Configuration::from_support(self.mu_hat.len(), &self.kept)
    }
}

/// `-ln B_i = y_i^2 / (2 sigma^2 (1 + 1/gamma)) - ln(1 + gamma) / 2`.
pub fn neg_log_bayes_factor(y_i: f64, hyper: &HyperParams) -> f64 {
    let s2 = hyper.sigma() * hyper.sigma();
    let g = hyper.gamma();
    y_i * y_i / (2.0 * s2 * (1.0 + 1.0 / g)) - 0.5 * g.ln_1p()
}

/// Bayes factor of `H_0i: mu_i = 0` against the slab alternative.
pub fn bayes_factor(y_i: f64, hyper: &HyperParams) -> f64 {
    (-neg_log_bayes_factor(y_i, hyper)).exp()
}

/// Complexity penalty induced by the prior and the hyperparameters.
pub fn penalty_table(table: &PriorTable, hyper: &HyperParams) -> PenaltyTable {
    let n = table.n() as u64;
    let lp = table.log_pmf();
    let g = hyper.gamma();
    let scale = 2.0 * hyper.sigma() * hyper.sigma() * (1.0 + 1.0 / g);
    let half_log = 0.5 * g.ln_1p();

    let penalty: Vec<f64> = (0..=n)
        .map(|k| scale * (ln_choose(n, k) - lp[k as usize] + k as f64 * half_log))
        .collect();
    let increments: Vec<f64> = (0..=n)
        .map(|i| {
            if i == 0 {
                -scale * lp[0]
            } else {
                let iu = i as usize;
                let ratio = ((n - i + 1) as f64 / i as f64).ln();
                scale * (ratio + lp[iu - 1] - lp[iu] + half_log)
            }
        })
        .collect();
    PenaltyTable { penalty, increments }
}

/// Chosen model size with the criterion it minimized.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub k_hat: usize,
    pub objective: Vec<f64>,
}

/// Minimize `sum_{i > k} sorted_sq[i] + P[k]` over all `k = 0..=n`.
///
/// `sorted_sq` holds the squared observations in non-increasing order. Every
/// candidate is scanned; ties go to the smaller `k`.
pub fn select_k(sorted_sq: &[f64], penalty: &PenaltyTable) -> Result<Selection> {
    let n = sorted_sq.len();
    if penalty.n() != n {
        return Err(Error::Domain(format!(
            "penalty covers n = {} but {} squared observations were given",
            penalty.n(),
            n
        )));
    }
    if let Some(i) = sorted_sq.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain(format!("squared observation {i} is negative or not finite")));
    }
    if let Some(i) = sorted_sq.windows(2).position(|w| w[0] < w[1]) {
        return Err(Error::Domain(format!(
            "squared observations are not sorted in non-increasing order at position {}",
            i + 1
        )));
    }

    // residual[k] = sum of sorted_sq[k..], accumulated from the small end
    let mut residual = vec![0.0; n + 1];
    for k in (0..n).rev() {
        residual[k] = residual[k + 1] + sorted_sq[k];
    }
    let objective: Vec<f64> = residual
        .iter()
        .zip(penalty.penalty())
        .map(|(r, p)| r + p)
        .collect();
    let mut k_hat = 0;
    for (k, v) in objective.iter().enumerate() {
        if *v < objective[k_hat] {
            k_hat = k;
        }
    }
    Ok(Selection { k_hat, objective })
}

/// Indices ordered by decreasing `|y_i|`; ties keep the lower index first.
pub fn order_by_magnitude(y: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[b].abs().total_cmp(&y[a].abs()));
    order
}

/// Keep the `k_hat` entries of largest magnitude.
pub(crate) fn keep_top(y: &[f64], order: &[usize], selection: Selection) -> EstimateResult {
    let Selection { k_hat, objective } = selection;
    let mut kept: Vec<usize> = order[..k_hat].to_vec();
    kept.sort_unstable();
    let mut mu_hat = vec![0.0; y.len()];
    for &i in &kept {
        mu_hat[i] = y[i];
    }
    let threshold = if k_hat == 0 {
        f64::INFINITY
    } else {
        y[order[k_hat - 1]].abs()
    };
    EstimateResult { k_hat, threshold, kept, mu_hat, objective }
}

/// Select `k` for `y` under `penalty` and hard-threshold accordingly.
pub fn threshold_with_penalty(y: &[f64], penalty: &PenaltyTable) -> Result<EstimateResult> {
    let order = order_by_magnitude(y);
    let sorted_sq: Vec<f64> = order.iter().map(|&i| y[i] * y[i]).collect();
    let selection = select_k(&sorted_sq, penalty)?;
    Ok(keep_top(y, &order, selection))
}

/// MAP estimate with a precomputed prior table.
pub fn map_estimate_with_table(
    y: &[f64],
    hyper: &HyperParams,
    table: &PriorTable,
) -> Result<EstimateResult> {
    if table.n() != y.len() {
        return Err(Error::Domain(format!(
            "prior table has n = {} but the data have length {}",
            table.n(),
            y.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("observation {i} is not finite")));
    }
    threshold_with_penalty(y, &penalty_table(table, hyper))
}

/// Posterior-mode hard-threshold estimate under the prior `spec`.
pub fn map_estimate(
    data: &GaussianSequence,
    hyper: &HyperParams,
    spec: &PriorSpec,
) -> Result<EstimateResult> {
    let table = build_prior_table(spec, data.len())?;
    map_estimate_with_table(data.y(), hyper, &table)
}

/// Log posterior of a configuration up to a data-dependent constant:
/// `ln pi_n(k) - ln C(n,k) - sum_{x_i = 1} ln B_i`.
pub fn posterior_log_score(
    data: &GaussianSequence,
    x: &Configuration,
    hyper: &HyperParams,
    table: &PriorTable,
) -> Result<f64> {
    let n = data.len();
    if x.x().len() != n || table.n() != n {
        return Err(Error::Domain(format!(
            "configuration length {} and prior size {} must both equal n = {n}",
            x.x().len(),
            table.n()
        )));
    }
    let evidence: f64 = data
        .y()
        .iter()
        .zip(x.x())
        .filter(|(_, b)| **b)
        .map(|(y, _)| neg_log_bayes_factor(*y, hyper))
        .sum();
    Ok(table.log_pmf()[x.k()] - ln_choose(n as u64, x.k() as u64) + evidence)
}

// true-before-false lexicographic order on bitmasks with bit i = x_i
fn lex_precedes(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    diff != 0 && a & (diff & diff.wrapping_neg()) != 0
}

/// Exhaustive posterior mode over all `2^n` configurations.
///
/// Near-equal scores (within `1e-12` relative) are ties, resolved toward
/// the smaller `k` and then toward keeping lower indices, which matches the
/// tie-breaking of [`map_estimate`].
pub fn brute_force_map(
    data: &GaussianSequence,
    hyper: &HyperParams,
    spec: &PriorSpec,
) -> Result<Configuration> {
    let n = data.len();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::Size { n, max: BRUTE_FORCE_MAX_N });
    }
    let table = build_prior_table(spec, n)?;
    let evidence: Vec<f64> = data.y().iter().map(|y| neg_log_bayes_factor(*y, hyper)).collect();
    let base: Vec<f64> = (0..=n)
        .map(|k| table.log_pmf()[k] - ln_choose(n as u64, k as u64))
        .collect();

    let mut best_mask = 0u32;
    let mut best_score = base[0];
    for mask in 1u32..(1u32 << n) {
        let k = mask.count_ones() as usize;
        let score = base[k]
            + (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| evidence[i])
                .sum::<f64>();
        let tol = 1e-12 * best_score.abs().max(1.0);
        let best_k = best_mask.count_ones() as usize;
        let better = if score > best_score + tol {
            true
        } else if (score - best_score).abs() <= tol {
            k < best_k || (k == best_k && lex_precedes(mask, best_mask))
        } else {
            false
        };
        if better {
            best_mask = mask;
            best_score = score;
        }
    }
    Ok(Configuration::new((0..n).map(|i| best_mask & (1 << i) != 0).collect()))
}
