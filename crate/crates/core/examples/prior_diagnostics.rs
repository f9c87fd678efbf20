//! Assumption (A) margins, complexity weights and prior mass of sparsity balls.

use testimation::prior::{
    build_prior_table, c_gamma, check_assumption_a, complexity_weights, prior_ball_mass, BallSpec,
    HyperParams, PriorSpec,
};

fn main() -> testimation::Result<()> {
    let gamma = 1.0;
    let c = c_gamma(gamma);
    println!("c({gamma}) = {c}");
    for (label, xi) in [("exp(-c)", (-c).exp()), ("0.3", 0.3)] {
        let table = build_prior_table(&PriorSpec::Binomial { xi }, 100)?;
        let report = check_assumption_a(&table, gamma)?;
        println!(
            "binomial xi = {label}: holds = {}, first failing k = {:?}",
            report.holds,
            report.first_failing_k()
        );
    }

    for n in [100usize, 1000, 10_000] {
        let nf = n as f64;
        let table = build_prior_table(&PriorSpec::Binomial { xi: nf.ln() / nf }, n)?;
        let w = complexity_weights(&table);
        println!("n = {n}: L* = {:.3}, L*/ln n = {:.3}", w.l_star, w.l_star / nf.ln());
    }

    let n = 1000;
    let nf = n as f64;
    let mass = prior_ball_mass(
        &PriorSpec::Binomial { xi: nf.ln() / nf },
        n,
        &HyperParams::new(1.0, 3.0)?,
        &BallSpec::L0 { eta: 2.0 * nf.ln() / nf },
        2000,
        11,
    )?;
    println!("P(mu in L0 ball) = {:.4} +/- {:.4}", mass.estimate, mass.std_err);

    let spec = PriorSpec::ReflectedTruncatedPoisson { lambda: 20.0 };
    for w in spec.warnings(n) {
        println!("warning: {w}");
    }
    Ok(())
}
