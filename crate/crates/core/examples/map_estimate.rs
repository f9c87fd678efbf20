//! MAP hard thresholding of a simulated sparse sequence under each prior.

use testimation::map::{map_estimate, GaussianSequence};
use testimation::prior::{sample_mu, HyperParams, PriorSpec};
use testimation::risk::draw_replication;

fn main() -> testimation::Result<()> {
    let n = 500;
    let hyper = HyperParams::new(1.0, 4.0)?;
    let mut rng = testimation::risk::replication_rng(7, 0, 0);
    let (mu, y) = draw_replication(&mut rng, n, 0.04, hyper.tau(), hyper.sigma());
    let data = GaussianSequence::new(y, Some(hyper.sigma()))?;
    let nonzero = mu.iter().filter(|m| **m != 0.0).count();
    println!("n = {n}, true nonzeros = {nonzero}");

    let lambda = 0.04 * n as f64;
    for spec in [
        PriorSpec::Binomial { xi: 0.04 },
        PriorSpec::TruncatedPoisson { lambda },
        PriorSpec::ReflectedTruncatedPoisson { lambda },
    ] {
        let est = map_estimate(&data, &hyper, &spec)?;
        let loss: f64 = est.mu_hat.iter().zip(&mu).map(|(a, b)| (a - b).powi(2)).sum();
        println!(
            "{spec:?}: k_hat = {}, threshold = {:.3}, squared error = {loss:.2}",
            est.k_hat, est.threshold
        );
    }

    // a draw from the prior itself
    let draw = sample_mu(&PriorSpec::Binomial { xi: 0.2 }, 20, &hyper, 3)?;
    println!("prior draw: {draw:.2?}");
    Ok(())
}
