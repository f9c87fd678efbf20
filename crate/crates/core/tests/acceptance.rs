//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use testimation::em::{em_fit, EmOptions};
use testimation::map::{brute_force_map, map_estimate, penalty_table, GaussianSequence};
use testimation::prior::{
    build_prior_table, c_gamma, check_assumption_a, BallSpec, HyperParams, PriorSpec,
};
use testimation::risk::{
    draw_replication, monte_carlo_amse, rate_check, replication_rng, ExperimentConfig, RiskReport,
};
use testimation::special::log_choose;

const TABLE1_REL_TOL_MAP: f64 = 0.25;
const TABLE1_REL_TOL_UNIVERSAL: f64 = 0.20;
const TABLE1_MAX_RUNTIME: Duration = Duration::from_secs(300);
const BRUTE_FORCE_MIN_INSTANCES: usize = 1000;
const TELESCOPING_TOL: f64 = 1e-9;
const LOG_CHOOSE_UPPER_CONSTANT: f64 = 1.5;
const ORACLE_SE_SLACK: f64 = 3.0;
const RATE_BRACKET: (f64, f64) = (0.05, 5.0);
const RATE_REPS: usize = 200;
const RATE_SEED: u64 = 4096;
const ORACLE_RATIO_MAX: f64 = 1.1;
const NEGATIVE_CONTROL_MARGIN: f64 = 1e-6;
const EM_TRACE_SLACK: f64 = 1e-10;
const EM_FIXTURE_SEED: u64 = 2024;

const XI: [f64; 3] = [0.005, 0.05, 0.5];
const TAU: [f64; 3] = [3.0, 5.0, 7.0];

// Reference AMSE, rows xi = 0.5%, 5%, 50%, columns tau = 3, 5, 7.
const PUBLISHED: [(&str, [f64; 9]); 4] = [
    ("bin", [0.0192, 0.0194, 0.0172, 0.1496, 0.1372, 0.1245, 0.8929, 0.8196, 0.7796]),
    ("pois1", [0.0192, 0.0194, 0.0176, 0.1497, 0.1374, 0.1246, 0.9157, 0.8245, 0.7780]),
    ("pois2", [0.0187, 0.0195, 0.0173, 0.1564, 0.1389, 0.1256, 0.9687, 0.8271, 0.7795]),
    ("universal", [0.1012, 0.0998, 0.0990, 0.1694, 0.1600, 0.1495, 1.9447, 2.5474, 2.7720]),
];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn table1_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/table1.json")
}

fn table1_config() -> ExperimentConfig {
    ExperimentConfig::from_json(&std::fs::read_to_string(table1_path()).unwrap()).unwrap()
}

fn table1_cells(report: &RiskReport, method: &str, expected: &[f64; 9], tol: f64) -> (bool, Vec<String>) {
    let mut ok = true;
    let mut lines = Vec::new();
    for (c, want) in expected.iter().enumerate() {
        let (xi, tau) = (XI[c / 3], TAU[c % 3]);
        let got = report.get(method, xi, tau).expect("cell present");
        let rel = (got.amse - want) / want;
        let cell_ok = rel.abs() <= tol;
        ok &= cell_ok;
        lines.push(format!(
            "    {method:<9} xi={xi:<5} tau={tau}: amse={:.4} (se {:.4}) reference={want:.4} rel={:+.3} {}",
            got.amse,
            got.std_err,
            rel,
            if cell_ok { "ok" } else { "OUT" }
        ));
    }
    (ok, lines)
}

fn criterion_1() -> Outcome {
    let config = table1_config();
    let start = Instant::now();
    let report = monte_carlo_amse(&config).unwrap();
    let elapsed = start.elapsed();
    let mut ok = elapsed <= TABLE1_MAX_RUNTIME;
    let mut details = vec![format!("    runtime {:.1}s (limit {}s)", elapsed.as_secs_f64(), TABLE1_MAX_RUNTIME.as_secs())];
    let mut failing = Vec::new();
    for (method, expected) in &PUBLISHED {
        let tol = if *method == "universal" { TABLE1_REL_TOL_UNIVERSAL } else { TABLE1_REL_TOL_MAP };
        let (row_ok, lines) = table1_cells(&report, method, expected, tol);
        if !row_ok {
            failing.push(*method);
        }
        ok &= row_ok;
        details.extend(lines);
    }
    println!("{}", details.join("\n"));
    let summary = if failing.is_empty() {
        "all 36 cells within tolerance".to_string()
    } else {
        format!("cells out of tolerance in rows {failing:?}")
    };
    Outcome::new(ok, format!("{summary}; runtime {:.1}s", elapsed.as_secs_f64()))
}

fn random_prior(rng: &mut ChaCha8Rng, n: usize) -> PriorSpec {
    let nf = n as f64;
    match rng.random_range(0..3) {
        0 => PriorSpec::Binomial { xi: rng.random_range(0.02..0.9) },
        1 => PriorSpec::TruncatedPoisson { lambda: rng.random_range(0.1..nf) },
        _ => PriorSpec::ReflectedTruncatedPoisson { lambda: rng.random_range(0.1..nf - 0.1) },
    }
}

fn tie_free(y: &[f64], objective: &[f64]) -> bool {
    let mut mags: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let distinct = mags.windows(2).all(|w| w[1] - w[0] > 1e-9 * w[1].max(1.0));
    let mut obj = objective.to_vec();
    obj.sort_by(f64::total_cmp);
    distinct && obj[1] - obj[0] > 1e-9 * (1.0 + obj[0].abs())
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gammas: [f64; 3] = [0.5, 2.0, 8.0];
    let (mut checked, mut agree, mut skipped) = (0usize, 0usize, 0usize);
    let mut per_prior = [0usize; 3];
    let mut first_mismatch = None;
    while checked < BRUTE_FORCE_MIN_INSTANCES {
        let n = rng.random_range(4..=12);
        let gamma = gammas[rng.random_range(0..3)];
        let spec = random_prior(&mut rng, n);
        let tau = gamma.sqrt();
        let y: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let w: f64 = StandardNormal.sample(&mut rng);
                if rng.random::<f64>() < 0.3 { tau * w + z } else { z }
            })
            .collect();
        let data = GaussianSequence::new(y.clone(), None).unwrap();
        let hyper = HyperParams::from_gamma(1.0, gamma).unwrap();
        let map = map_estimate(&data, &hyper, &spec).unwrap();
        if !tie_free(&y, &map.objective) {
            skipped += 1;
            continue;
        }
        checked += 1;
        per_prior[match spec {
            PriorSpec::Binomial { .. } => 0,
            PriorSpec::TruncatedPoisson { .. } => 1,
            _ => 2,
        }] += 1;
        let brute = brute_force_map(&data, &hyper, &spec).unwrap();
        if brute == map.configuration() {
            agree += 1;
        } else if first_mismatch.is_none() {
            first_mismatch = Some(format!("n={n} gamma={gamma} {spec:?} y={y:?}"));
        }
    }
    let detail = format!(
        "{agree}/{checked} tie-free instances agree (binomial {}, poisson {}, reflected {}; {skipped} near-ties skipped){}",
        per_prior[0],
        per_prior[1],
        per_prior[2],
        first_mismatch.map(|m| format!("; first mismatch {m}")).unwrap_or_default()
    );
    Outcome::new(agree == checked, detail)
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    for n in [10usize, 1000, 100_000] {
        let nf = n as f64;
        let custom: Vec<f64> = (0..=n).map(|k| -0.5 * k as f64 * (k as f64 + 1.0).ln()).collect();
        let specs = [
            PriorSpec::Binomial { xi: nf.ln() / nf },
            PriorSpec::TruncatedPoisson { lambda: 0.05 * nf },
            PriorSpec::ReflectedTruncatedPoisson { lambda: 0.05 * nf },
            PriorSpec::CustomLogWeights { weights: custom },
        ];
        for spec in &specs {
            let table = build_prior_table(spec, n).unwrap();
            for hyper in [HyperParams::new(1.0, 3.0).unwrap(), HyperParams::new(0.5, 0.2).unwrap()] {
                let pen = penalty_table(&table, &hyper);
                let mut acc = 0.0;
                for (p, inc) in pen.penalty().iter().zip(pen.increments()) {
                    acc += inc;
                    let dev = (p - acc).abs();
                    let rel = if dev == 0.0 { 0.0 } else { dev / p.abs() };
                    worst = worst.max(rel);
                }
            }
        }
    }
    Outcome::new(worst < TELESCOPING_TOL, format!("max relative deviation {worst:.2e} (limit {TELESCOPING_TOL:e})"))
}

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    let c1 = c_gamma(1.0);
    if c1 != 24.5 {
        failures.push(format!("c(1) = {c1}"));
    }
    let mut grid = 0;
    for gamma in [0.5, 1.0, 2.0, 5.0] {
        let c = c_gamma(gamma);
        for n in [10usize, 100, 1000] {
            for extra in [0.0, 3.0, 20.0] {
                let xi = (-c - extra).exp();
                let table = build_prior_table(&PriorSpec::Binomial { xi }, n).unwrap();
                let report = check_assumption_a(&table, gamma).unwrap();
                grid += 1;
                if !report.holds {
                    failures.push(format!("gamma={gamma} n={n} xi=e^-{}: k={:?}", c + extra, report.first_failing_k()));
                }
            }
        }
    }
    let n = 10_000u64;
    for k in 1..=n {
        let lhs = log_choose(n, k).unwrap();
        let rhs = k as f64 * (n as f64 / k as f64).ln();
        if lhs < rhs - 1e-9 * (1.0 + rhs) {
            failures.push(format!("lower bound fails at n={n} k={k}"));
            break;
        }
    }
    let n = 1000u64;
    for k in 1..=n / 10 {
        let lhs = log_choose(n, k).unwrap();
        let rhs = LOG_CHOOSE_UPPER_CONSTANT * k as f64 * (n as f64 / k as f64).ln();
        if lhs > rhs {
            failures.push(format!("upper bound fails at n={n} k={k}"));
            break;
        }
    }
    let detail = if failures.is_empty() {
        format!("c(1)=24.5; assumption holds on {grid} binomial grid points; both log-binomial bounds hold")
    } else {
        failures.join("; ")
    };
    Outcome::new(failures.is_empty(), detail)
}

fn criterion_5() -> Outcome {
    let mut config = table1_config();
    config.methods = ["bin", "pois1", "pois2", "universal", "oracle", "fdr", "foster-stine", "tk", "aic", "bic"]
        .map(String::from)
        .to_vec();
    let report = monte_carlo_amse(&config).unwrap();
    let mut compared = 0;
    let mut violations = Vec::new();
    for &xi in &XI {
        for &tau in &TAU {
            let oracle = report.get("oracle", xi, tau).unwrap().amse;
            for cell in report.cells.iter().filter(|c| c.xi == xi && c.tau == tau && c.method != "oracle") {
                compared += 1;
                if oracle > cell.amse + ORACLE_SE_SLACK * cell.std_err {
                    violations.push(format!("{} xi={xi} tau={tau}: oracle {oracle:.4} > {:.4}", cell.method, cell.amse));
                }
            }
        }
    }
    let detail = if violations.is_empty() {
        format!("oracle within 3 SE of every estimator in {compared} method-cell pairs")
    } else {
        violations.join("; ")
    };
    Outcome::new(violations.is_empty(), detail)
}

fn criterion_6() -> Outcome {
    let grid = [256usize, 1024, 4096];
    let hyper = HyperParams::new(1.0, 5.0).unwrap();
    let ball = |n: usize| BallSpec::L0 { eta: 50.0 / n as f64 };
    let bin = rate_check(
        |n| Ok(PriorSpec::Binomial { xi: (n as f64).ln() / n as f64 }),
        ball,
        &grid,
        &hyper,
        RATE_REPS,
        RATE_SEED,
    )
    .unwrap();
    let control = rate_check(
        |n| {
            let ln_n = (n as f64).ln();
            Ok(PriorSpec::CustomLogWeights { weights: (0..=n).map(|k| -((k * k) as f64) * ln_n).collect() })
        },
        ball,
        &grid,
        &hyper,
        RATE_REPS,
        RATE_SEED,
    )
    .unwrap();

    let in_bracket = bin.iter().all(|p| p.ratio >= RATE_BRACKET.0 && p.ratio <= RATE_BRACKET.1);
    let oracle_ok = bin.iter().all(|p| p.oracle_ratio <= ORACLE_RATIO_MAX);
    let increasing = control
        .windows(2)
        .all(|w| w[1].ratio > w[0].ratio * (1.0 + NEGATIVE_CONTROL_MARGIN));
    let fmt = |pts: &[testimation::risk::RatePoint]| {
        pts.iter().map(|p| format!("{:.4}", p.ratio)).collect::<Vec<_>>().join(", ")
    };
    println!(
        "    binomial ratios [{}], oracle ratios [{}], control ratios [{}]",
        fmt(&bin),
        bin.iter().map(|p| format!("{:.4}", p.oracle_ratio)).collect::<Vec<_>>().join(", "),
        fmt(&control)
    );
    let detail = format!(
        "binomial ratios in [{}, {}]: {}; oracle ratio <= {ORACLE_RATIO_MAX}: {}; control strictly increasing: {}",
        RATE_BRACKET.0,
        RATE_BRACKET.1,
        if in_bracket { "yes" } else { "no" },
        if oracle_ok { "yes" } else { "no" },
        if increasing { "yes" } else { "no" }
    );
    Outcome::new(in_bracket && oracle_ok && increasing, detail)
}

fn criterion_7() -> Outcome {
    let config = table1_config();
    let options = EmOptions::default();
    let mut traces = 0;
    let mut bad = Vec::new();
    for (xi_idx, &xi) in config.xi_grid.iter().enumerate() {
        for (tau_idx, &tau) in config.tau_grid.iter().enumerate() {
            let cell = (xi_idx * config.tau_grid.len() + tau_idx) as u64;
            for rep in 0..config.replications {
                let mut rng = replication_rng(config.master_seed, cell, rep as u64);
                let (_, y) = draw_replication(&mut rng, config.n, xi, tau, config.sigma_true);
                let fit = em_fit(&y, None, &options).unwrap();
                traces += 1;
                if fit.trace.windows(2).any(|w| w[1] < w[0] - EM_TRACE_SLACK) {
                    bad.push(format!("xi={xi} tau={tau} rep={rep}"));
                }
            }
        }
    }

    let mut rng = replication_rng(EM_FIXTURE_SEED, 0, 0);
    let (_, y) = draw_replication(&mut rng, 10_000, 0.05, 5.0, 1.0);
    let fit = em_fit(&y, None, &options).unwrap();
    let recovered = (0.03..=0.07).contains(&fit.xi_hat)
        && (0.9..=1.1).contains(&fit.sigma_hat)
        && (4.0..=6.0).contains(&fit.tau_hat);
    let detail = format!(
        "{}/{traces} traces monotone{}; n=1e4 fixture xi_hat={:.4} sigma_hat={:.4} tau_hat={:.4}",
        traces - bad.len(),
        if bad.is_empty() { String::new() } else { format!(" (non-monotone: {})", bad.join(", ")) },
        fit.xi_hat,
        fit.sigma_hat,
        fit.tau_hat
    );
    Outcome::new(bad.is_empty() && recovered, detail)
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = table1_path();
    let run = |name: &str, threads: &str| -> Vec<u8> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_testimate"))
            .arg("simulate")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--seed", "777", "--threads", threads])
            .status()
            .unwrap();
        assert!(status.success(), "simulate exited with {status}");
        std::fs::read(&out).unwrap()
    };
    let a = run("a.csv", "4");
    let b = run("b.csv", "4");
    let c = run("c.csv", "1");
    let same = a == b && a == c && !a.is_empty();
    Outcome::new(
        same,
        format!("three runs (4, 4 and 1 threads) {}, {} bytes", if same { "byte-identical" } else { "differ" }, a.len()),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("benchmark grid reproduction", criterion_1),
        ("brute-force MAP equivalence", criterion_2),
        ("penalty identity", criterion_3),
        ("assumption (A) and binomial weight bounds", criterion_4),
        ("oracle dominance", criterion_5),
        ("rate boundedness", criterion_6),
        ("EM sanity", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Outcome::new(false, "panicked"));
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {}: {}",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
