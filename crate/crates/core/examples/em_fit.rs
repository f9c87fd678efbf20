//! Fit the spike-and-slab mixture by EM and plug the estimates into MAP.

use testimation::em::{em_fit, init_heuristic, EmOptions};
use testimation::map::{map_estimate, GaussianSequence};
use testimation::prior::PriorSpec;
use testimation::risk::{draw_replication, replication_rng};

fn main() -> testimation::Result<()> {
    let mut rng = replication_rng(2024, 0, 0);
    let (_, y) = draw_replication(&mut rng, 10_000, 0.05, 5.0, 1.0);

    let start = init_heuristic(&y)?;
    println!("start: sigma = {:.4}, tau = {:.4}, xi = {:.4}", start.sigma, start.tau, start.xi);
    let fit = em_fit(&y, Some(start), &EmOptions::default())?;
    println!(
        "fit: sigma = {:.4}, tau = {:.4}, xi = {:.4}, loglik = {:.3}, iterations = {}, converged = {}",
        fit.sigma_hat, fit.tau_hat, fit.xi_hat, fit.loglik, fit.iterations, fit.converged
    );
    let first = fit.trace.iter().take(5).map(|v| format!("{v:.3}")).collect::<Vec<_>>();
    println!("first log-likelihoods: {}", first.join(", "));

    let est = map_estimate(
        &GaussianSequence::new(y, None)?,
        &fit.hyper()?,
        &PriorSpec::Binomial { xi: fit.xi_hat },
    )?;
    println!("MAP with fitted hyperparameters keeps {} of 10000", est.k_hat);
    Ok(())
}
