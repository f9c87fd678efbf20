//! Complexity penalties and their increments for the three priors.

use testimation::map::penalty_table;
use testimation::prior::{build_prior_table, HyperParams, PriorSpec};

fn main() -> testimation::Result<()> {
    let n = 200;
    let hyper = HyperParams::from_gamma(1.0, 9.0)?;
    let specs = [
        ("binomial", PriorSpec::Binomial { xi: 0.05 }),
        ("poisson", PriorSpec::TruncatedPoisson { lambda: 10.0 }),
        ("reflected", PriorSpec::ReflectedTruncatedPoisson { lambda: 40.0 }),
    ];
    let tables = specs
        .iter()
        .map(|(_, s)| Ok(penalty_table(&build_prior_table(s, n)?, &hyper)))
        .collect::<testimation::Result<Vec<_>>>()?;

    println!("{:>4} {:>24} {:>24} {:>24}", "k", "binomial P / inc", "poisson P / inc", "reflected P / inc");
    for k in [0, 1, 2, 5, 10, 20, 50, 100, 200] {
        print!("{k:>4}");
        for t in &tables {
            print!(" {:>12.3} / {:>9.3}", t.penalty()[k], t.increments()[k]);
        }
        println!();
    }
    for ((name, _), t) in specs.iter().zip(&tables) {
        println!("{name}: telescoping error {:.1e}", t.telescoping_error());
    }
    Ok(())
}
