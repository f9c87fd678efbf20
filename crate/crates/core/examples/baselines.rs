//! Fixed and variable threshold baselines next to the binomial MAP rule.

use testimation::baselines::{
    aic, bic, fdr_sequence, foster_stine_sequence, mad_sigma, ric, tk_sequence, universal_threshold,
    ThresholdRule, DEFAULT_FDR_Q,
};
use testimation::map::{map_estimate, GaussianSequence};
use testimation::prior::{HyperParams, PriorSpec};
use testimation::risk::{draw_replication, oracle_risk, replication_rng};

fn main() -> testimation::Result<()> {
    let n = 2000;
    let mut rng = replication_rng(99, 0, 0);
    let (mu, y) = draw_replication(&mut rng, n, 0.02, 5.0, 1.0);
    let sigma = mad_sigma(&y)?;
    println!("MAD noise estimate {sigma:.4}, oracle risk {:.2}", oracle_risk(&mu, 1.0)?);

    let rules = [
        ("universal", ThresholdRule::Fixed { lambda: universal_threshold(n, sigma)? }),
        ("ric", ThresholdRule::Fixed { lambda: ric(n, sigma)? }),
        ("aic", ThresholdRule::Fixed { lambda: aic(sigma)? }),
        ("bic", ThresholdRule::Fixed { lambda: bic(n, sigma)? }),
        ("fdr", ThresholdRule::Variable { lams: fdr_sequence(n, sigma, DEFAULT_FDR_Q)? }),
        ("foster-stine", ThresholdRule::Variable { lams: foster_stine_sequence(n, sigma)? }),
        ("tk", ThresholdRule::Variable { lams: tk_sequence(n, sigma)? }),
    ];
    let loss = |est: &[f64]| -> f64 { est.iter().zip(&mu).map(|(a, b)| (a - b).powi(2)).sum() };
    for (name, rule) in &rules {
        let est = rule.apply(&y)?;
        println!("{name:>13}: k_hat = {:>3}, loss = {:8.2}", est.k_hat, loss(&est.mu_hat));
    }
    let map = map_estimate(
        &GaussianSequence::new(y.clone(), None)?,
        &HyperParams::new(sigma, 5.0)?,
        &PriorSpec::Binomial { xi: 0.02 },
    )?;
    println!("{:>13}: k_hat = {:>3}, loss = {:8.2}", "map binomial", map.k_hat, loss(&map.mu_hat));
    Ok(())
}
