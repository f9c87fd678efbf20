//! Monte Carlo AMSE over the sparsity/signal grid, written as CSV.
//!
//! Usage: `cargo run --release --example table1 [config.json] [threads]`

use std::time::Instant;

use testimation::risk::{monte_carlo_amse_with_threads, ExperimentConfig};

fn main() -> testimation::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/table1.json").to_string());
    let threads = args.next().and_then(|t| t.parse().ok());
    let text = std::fs::read_to_string(&path)
        .map_err(|e| testimation::Error::Config(format!("{path}: {e}")))?;
    let config = ExperimentConfig::from_json(&text)?;

    let start = Instant::now();
    let report = monte_carlo_amse_with_threads(&config, threads)?;
    eprintln!("{} cells in {:.1}s", report.cells.len(), start.elapsed().as_secs_f64());
    print!("{}", report.to_csv());
    Ok(())
}
