//! `testimate` command line.
//!
//! Exit codes: 0 success, 1 numeric failure, 2 usage or validation error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::baselines::{fdr_sequence, fixed_threshold_estimate, foster_stine_sequence, mad_sigma, universal_threshold, variable_threshold_estimate};
use crate::em::{em_fit, EmOptions};
use crate::error::Error;
use crate::map::{map_estimate_with_table, penalty_table, EstimateResult};
use crate::prior::{build_prior_table, check_assumption_a, complexity_weights, HyperParams, PriorSpec};
use crate::risk::{format_sig, monte_carlo_amse_with_threads, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "testimate", version, about = "Bayesian MAP thresholding for sparse normal means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Threshold a vector of observations.
    Estimate(EstimateArgs),
    /// Dump the complexity penalty and its increments.
    Penalty(PenaltyArgs),
    /// Check the prior-mass condition and the complexity weights.
    CheckPrior(CheckPriorArgs),
    /// Run a Monte Carlo risk experiment.
    Simulate(SimulateArgs),
    /// Fit (sigma, tau, xi) by EM.
    EmFit(EmFitArgs),
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// One value per line, optional header.
    #[arg(long)]
    input: PathBuf,
    /// Known noise level.
    #[arg(long, conflicts_with = "em")]
    sigma: Option<f64>,
    /// Fit sigma, tau and xi by EM.
    #[arg(long)]
    em: bool,
    /// Slab standard deviation (overrides the EM value).
    #[arg(long)]
    tau: Option<f64>,
    /// binomial:xi=V | poisson:lambda=V | rpoisson:lambda=V | custom:file=PATH |
    /// universal | fixed:lambda=V | fdr:q=V | foster-stine
    #[arg(long)]
    prior: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PenaltyArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    prior: String,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckPriorArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    prior: String,
    #[arg(long)]
    gamma: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `master_seed` of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct EmFitArgs {
    #[arg(long)]
    input: PathBuf,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_validation() { 2 } else { 1 };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

/// Parsed `--prior` argument.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorArg {
    Binomial(Option<f64>),
    Poisson(Option<f64>),
    ReflectedPoisson(Option<f64>),
    Custom(PathBuf),
    Universal,
    Fixed(f64),
    Fdr(f64),
    FosterStine,
}

impl PriorArg {
    pub fn parse(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let bad = || Error::Config(format!("invalid prior specification '{s}'"));
        let value = |key: &str| -> Result<f64, Error> {
            arg.and_then(|a| a.strip_prefix(key))
                .and_then(|a| a.strip_prefix('='))
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(bad)
        };
        let optional = |key: &str| -> Result<Option<f64>, Error> {
            match arg {
                None => Ok(None),
                Some(_) => value(key).map(Some),
            }
        };
        Ok(match head {
            "binomial" => PriorArg::Binomial(optional("xi")?),
            "poisson" => PriorArg::Poisson(optional("lambda")?),
            "rpoisson" => PriorArg::ReflectedPoisson(optional("lambda")?),
            "custom" => {
                let path = arg.and_then(|a| a.strip_prefix("file=")).filter(|p| !p.is_empty()).ok_or_else(bad)?;
                PriorArg::Custom(PathBuf::from(path))
            }
            "universal" if arg.is_none() => PriorArg::Universal,
            "fixed" => PriorArg::Fixed(value("lambda")?),
            "fdr" => PriorArg::Fdr(value("q")?),
            "foster-stine" if arg.is_none() => PriorArg::FosterStine,
            _ => return Err(bad()),
        })
    }

    /// Materialize a MAP prior. `xi_fit` fills in omitted parameters
    /// (`lambda = n xi` for the Poisson priors).
    fn prior_spec(&self, n: usize, xi_fit: Option<f64>) -> Result<PriorSpec, Error> {
        let need = |v: Option<f64>, what: &str| -> Result<f64, Error> {
            v.ok_or_else(|| Error::Config(format!("prior parameter {what} is required without --em")))
        };
        let nf = n as f64;
        match self {
            PriorArg::Binomial(xi) => Ok(PriorSpec::Binomial { xi: need(xi.or(xi_fit), "xi")? }),
            PriorArg::Poisson(l) => Ok(PriorSpec::TruncatedPoisson {
                lambda: need(l.or(xi_fit.map(|x| nf * x)), "lambda")?,
            }),
            PriorArg::ReflectedPoisson(l) => Ok(PriorSpec::ReflectedTruncatedPoisson {
                lambda: need(l.or(xi_fit.map(|x| nf * x)), "lambda")?,
            }),
            PriorArg::Custom(path) => Ok(PriorSpec::CustomLogWeights { weights: read_values(path)? }),
            _ => Err(Error::Config("this command needs a prior on k, not a threshold rule".into())),
        }
    }
}

/// Numbers one per line; blank lines and a non-numeric first line are skipped.
pub fn parse_values(text: &str) -> Result<Vec<f64>, Error> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>().ok() {
            Some(v) => values.push(v),
            None if i == 0 => continue,
            None => return Err(Error::Config(format!("line {}: cannot parse '{line}' as a number", i + 1))),
        }
    }
    Ok(values)
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn read_values(path: &Path) -> Result<Vec<f64>, Error> {
    parse_values(&read_text(path)?)
}

fn read_observations(path: &Path) -> CliResult<Vec<f64>> {
    let y = read_values(path)?;
    if y.is_empty() {
        return Err(usage("empty input"));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(usage(format!("observation {} is not finite", i + 1)));
    }
    Ok(y)
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> CliResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(|e| Failure { code: 1, message: e.to_string() }),
    }
}

fn say(out: &mut dyn Write, line: &str) -> CliResult {
    writeln!(out, "{line}").map_err(|e| Failure { code: 1, message: e.to_string() })
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn estimate_csv(y: &[f64], r: &EstimateResult) -> String {
    let mut csv = String::from("index,y,mu_hat,kept\n");
    let mut kept = vec![false; y.len()];
    for &i in &r.kept {
        kept[i] = true;
    }
    for (i, (yi, mi)) in y.iter().zip(&r.mu_hat).enumerate() {
        csv.push_str(&format!("{i},{},{},{}\n", format_sig(*yi, 17), format_sig(*mi, 17), u8::from(kept[i])));
    }
    csv
}

fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let prior = PriorArg::parse(&a.prior)?;
    let y = read_observations(&a.input)?;
    let n = y.len();
    let sigma_arg = a.sigma.map(|s| positive("sigma", s)).transpose()?;
    let tau_arg = a.tau.map(|t| positive("tau", t)).transpose()?;

    let fit = if a.em {
        let f = em_fit(&y, None, &EmOptions::default())?;
        if !f.converged {
            let _ = writeln!(err, "warning: EM stopped after {} iterations without converging", f.iterations);
        }
        Some(f)
    } else {
        None
    };
    let sigma = sigma_arg.or(fit.as_ref().map(|f| f.sigma_hat));

    let result = match &prior {
        PriorArg::Universal => {
            let s = match sigma {
                Some(s) => s,
                None => mad_sigma(&y)?,
            };
            fixed_threshold_estimate(&y, universal_threshold(n, s)?)?
        }
        PriorArg::Fixed(lambda) => fixed_threshold_estimate(&y, *lambda)?,
        PriorArg::Fdr(q) => {
            let s = sigma.ok_or_else(|| usage("--sigma or --em is required for the fdr rule"))?;
            variable_threshold_estimate(&y, &fdr_sequence(n, s, *q)?)?
        }
        PriorArg::FosterStine => {
            let s = sigma.ok_or_else(|| usage("--sigma or --em is required for the foster-stine rule"))?;
            variable_threshold_estimate(&y, &foster_stine_sequence(n, s)?)?
        }
        map_prior => {
            let sigma = sigma.ok_or_else(|| usage("--sigma or --em is required for a MAP prior"))?;
            let tau = tau_arg
                .or(fit.as_ref().map(|f| f.tau_hat))
                .ok_or_else(|| usage("--tau is required with --sigma"))?;
            let spec = map_prior.prior_spec(n, fit.as_ref().map(|f| f.xi_hat))?;
            for w in spec.warnings(n) {
                let _ = writeln!(err, "warning: {w}");
            }
            let table = build_prior_table(&spec, n)?;
            map_estimate_with_table(&y, &HyperParams::new(sigma, tau)?, &table)?
        }
    };

    emit(a.out.as_deref(), &estimate_csv(&y, &result), out)?;
    say(out, &format!("k_hat={},threshold={}", result.k_hat, format_sig(result.threshold, 17)))
}

fn cmd_penalty(a: &PenaltyArgs, out: &mut dyn Write) -> CliResult {
    let spec = PriorArg::parse(&a.prior)?.prior_spec(a.n, None)?;
    let hyper = HyperParams::from_gamma(positive("sigma", a.sigma)?, positive("gamma", a.gamma)?)?;
    let table = build_prior_table(&spec, a.n)?;
    let pen = penalty_table(&table, &hyper);
    let mut csv = String::from("k,P,increment\n");
    for (k, (p, inc)) in pen.penalty().iter().zip(pen.increments()).enumerate() {
        csv.push_str(&format!("{k},{},{}\n", format_sig(*p, 17), format_sig(*inc, 17)));
    }
    emit(a.out.as_deref(), &csv, out)
}

fn cmd_check_prior(a: &CheckPriorArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let spec = PriorArg::parse(&a.prior)?.prior_spec(a.n, None)?;
    let gamma = positive("gamma", a.gamma)?;
    for w in spec.warnings(a.n) {
        let _ = writeln!(err, "warning: {w}");
    }
    let table = build_prior_table(&spec, a.n)?;
    let report = check_assumption_a(&table, gamma)?;
    let weights = complexity_weights(&table);
    say(out, &format!("c_gamma={}", format_sig(report.c_gamma, 17)))?;
    say(out, &format!("assumption_a: {}", if report.holds { "pass" } else { "fail" }))?;
    say(out, &format!("L_star={}", format_sig(weights.l_star, 17)))?;
    match report.first_failing_k() {
        Some(k) => say(out, &format!("first_failing_k={k}")),
        None => say(out, "first_failing_k=none"),
    }
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> CliResult {
    let mut config = ExperimentConfig::from_json(&read_text(&a.config)?)?;
    if let Some(seed) = a.seed {
        config.master_seed = seed;
    }
    if a.threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let report = monte_carlo_amse_with_threads(&config, a.threads)?;
    emit(a.out.as_deref(), &report.to_csv(), out)
}

fn cmd_em_fit(a: &EmFitArgs, out: &mut dyn Write) -> CliResult {
    let y = read_observations(&a.input)?;
    let f = em_fit(&y, None, &EmOptions::default())?;
    say(
        out,
        &format!(
            "sigma_hat={} tau_hat={} xi_hat={} loglik={} iterations={} converged={}",
            format_sig(f.sigma_hat, 17),
            format_sig(f.tau_hat, 17),
            format_sig(f.xi_hat, 17),
            format_sig(f.loglik, 17),
            f.iterations,
            f.converged
        ),
    )
}

/// Parse `args` (program name first) and run the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a, out, err),
        Command::Penalty(a) => cmd_penalty(a, out),
        Command::CheckPrior(a) => cmd_check_prior(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::EmFit(a) => cmd_em_fit(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
