//! Risk at the least-favorable L0 configuration relative to the minimax rate.

use testimation::prior::{BallSpec, HyperParams, PriorSpec};
use testimation::risk::rate_check;

fn main() -> testimation::Result<()> {
    let grid = [256, 1024, 4096];
    let hyper = HyperParams::new(1.0, 5.0)?;
    let ball = |n: usize| BallSpec::L0 { eta: 50.0 / n as f64 };
    let points = rate_check(
        |n| Ok(PriorSpec::Binomial { xi: (n as f64).ln() / n as f64 }),
        ball,
        &grid,
        &hyper,
        200,
        1,
    )?;
    println!("{:>6} {:>10} {:>10} {:>10} {:>8} {:>12}", "n", "eta", "rate", "risk", "ratio", "oracle ratio");
    for p in &points {
        println!(
            "{:>6} {:>10.5} {:>10.2} {:>10.2} {:>8.4} {:>12.4}",
            p.n, p.eta, p.rate, p.risk, p.ratio, p.oracle_ratio
        );
    }
    Ok(())
}
