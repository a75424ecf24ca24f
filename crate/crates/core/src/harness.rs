//! Experiment runner behind the `quasinorm` binary: argument parsing, synthetic
//! problems, command dispatch and JSON reports.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factorize::{
    equal_split, make_split, optimal_factors_m, product_objective, weighted_sum_objective,
    ExponentSplit,
};
use crate::io::{load_matrix, save_matrix, MatrixFormat};
use crate::linalg::{gaussian_matrix_with, thin_svd, DenseMatrix};
use crate::schatten::{schatten_norm, SchattenExponent};
use crate::solve::{
    factored_complete_with, irls_baseline_with, CompletionProblem, Mask, PenaltySpec, SolveReport,
    SolverOptions,
};
use crate::verify::{bound_audit, local_min_search};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Norm,
    Factorize,
    Verify,
    Complete,
    Bench,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMethod {
    /// Random feasible factorizations never beat the norm.
    #[default]
    Audit,
    /// Local descent reaches the norm.
    Search,
}

/// Flags shared by every command. Unused ones are ignored.
#[derive(Debug, Clone, Serialize, Args)]
pub struct Options {
    /// Input matrix (.mtx or .csv).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Format of input and saved matrices; inferred from the extension if absent.
    #[arg(long)]
    pub format: Option<MatrixFormat>,
    /// Observation mask for `complete` / `bench`; nonzero entries are observed.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Target exponent, decimal or rational (e.g. 0.5 or 2/3).
    #[arg(long)]
    pub p: Option<String>,
    /// Comma-separated factor exponents, e.g. "4/3,4/3".
    #[arg(long)]
    pub parts: Option<String>,
    /// Inner dimension of the factorization.
    #[arg(long)]
    pub d: Option<usize>,
    /// Absolute regularization weight.
    #[arg(long, conflicts_with = "lambda_rel")]
    pub lambda: Option<f64>,
    /// Regularization weight relative to the Frobenius norm of the observed data.
    #[arg(long)]
    pub lambda_rel: Option<f64>,
    /// Rows of a generated matrix.
    #[arg(long)]
    pub m: Option<usize>,
    /// Columns of a generated matrix.
    #[arg(long)]
    pub n: Option<usize>,
    /// Rank of a generated matrix.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Fraction of observed entries in a generated mask.
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = VerifyMethod::Audit)]
    pub method: VerifyMethod,
    /// Sampled factorizations for `verify --method audit`.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Random restarts for `verify --method search`.
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Initial smoothing for the IRLS baseline.
    #[arg(long, default_value_t = 1.0)]
    pub eps0: f64,
    /// Directory receiving the factors computed by `factorize` / `complete`.
    #[arg(long)]
    pub save_factors: Option<PathBuf>,
    /// JSON report path; the report goes to stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl Default for Options {
    fn default() -> Self {
        Cli::parse_from(["quasinorm", "norm"]).into_config().options
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(flatten)]
    pub options: Options,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            options: Options::default(),
        }
    }

    /// Cheap consistency checks done before any computation.
    pub fn validate(&self) -> Result<()> {
        let o = &self.options;
        for path in [&o.input, &o.mask].into_iter().flatten() {
            if !path.is_file() {
                return Err(Error::InvalidInput(format!("{} does not exist", path.display())));
            }
        }
        if self.command != Command::Norm && o.parts.is_some() {
            self.split()?;
        }
        if let Some(f) = o.fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidInput(format!("--fraction must lie in (0, 1], got {f}")));
            }
        }
        Ok(())
    }

    fn p_text(&self) -> Result<&str> {
        self.options
            .p
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("--p is required".into()))
    }

    pub fn p(&self) -> Result<f64> {
        parse_real(self.p_text()?)
    }

    /// `--p` with `--parts`, or the default equal split. Exact rational arithmetic
    /// is tried first, then the floating-point check.
    pub fn split(&self) -> Result<ExponentSplit> {
        let p_text = self.p_text()?;
        let Some(parts_text) = self.options.parts.as_deref() else {
            return equal_split(parse_real(p_text)?, None);
        };
        let tokens: Vec<&str> = parts_text.split(',').map(str::trim).collect();
        let exact = parse_ratio(p_text).and_then(|p| {
            let parts = tokens.iter().map(|t| parse_ratio(t)).collect::<Option<Vec<_>>>()?;
            Some(ExponentSplit::from_ratios(p, &parts))
        });
        match exact {
            Some(Ok(split)) => Ok(split),
            Some(Err(Error::SplitMismatch { .. } | Error::InvalidInput(_))) | None => {
                let parts = tokens.iter().map(|t| parse_real(t)).collect::<Result<Vec<_>>>()?;
                make_split(parse_real(p_text)?, &parts)
            }
            Some(Err(e)) => Err(e),
        }
    }
}

/// Parses `a/b` or a short decimal exactly; `None` if it does not fit.
pub fn parse_ratio(text: &str) -> Option<Ratio<i64>> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: i64 = num.trim().parse().ok()?;
        let den: i64 = den.trim().parse().ok()?;
        return (den != 0).then(|| Ratio::new(num, den));
    }
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let scale = 10i64.checked_pow(frac.len() as u32)?;
    let negative = int.starts_with('-');
    let whole: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().ok()? };
    let fraction: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    let magnitude = whole.abs().checked_mul(scale)?.checked_add(fraction)?;
    Some(Ratio::new(if negative { -magnitude } else { magnitude }, scale))
}

fn parse_real(text: &str) -> Result<f64> {
    if let Some((num, den)) = text.split_once('/') {
        let num: f64 = num.trim().parse().map_err(|_| bad_number(text))?;
        let den: f64 = den.trim().parse().map_err(|_| bad_number(text))?;
        return Ok(num / den);
    }
    text.trim().parse().map_err(|_| bad_number(text))
}

fn bad_number(text: &str) -> Error {
    Error::InvalidInput(format!("not a number: {text:?}"))
}

#[derive(Debug, Parser)]
#[command(name = "quasinorm", version, about = "Schatten quasi-norms through factored formulations")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Schatten-p (quasi-)norm of a matrix.
    Norm(Options),
    /// Optimal factorization for an exponent split.
    Factorize(Options),
    /// Numerical check that the factored objective attains but never beats the norm.
    Verify(Options),
    /// Matrix completion with the factored solver.
    Complete(Options),
    /// Factored solver against the IRLS baseline on one problem.
    Bench(Options),
}

impl Cli {
    fn into_config(self) -> ExperimentConfig {
        let (command, options) = match self.command {
            CliCommand::Norm(o) => (Command::Norm, o),
            CliCommand::Factorize(o) => (Command::Factorize, o),
            CliCommand::Verify(o) => (Command::Verify, o),
            CliCommand::Complete(o) => (Command::Complete, o),
            CliCommand::Bench(o) => (Command::Bench, o),
        };
        ExperimentConfig { command, options }
    }
}

/// Parses command-line arguments (including the program name).
pub fn parse_args<I, T>(args: I) -> std::result::Result<ExperimentConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(args).map(Cli::into_config)
}

/// Entry point of the binary: parse, run, return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_args(args) {
        Ok(config) => run(&config),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_found: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub product_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_sum_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    pub iterations: usize,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverEntry {
    pub name: String,
    pub rel_error: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_seconds: f64,
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: Command,
    pub config: ExperimentConfig,
    pub metrics: Metrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solvers: Option<Vec<SolverEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_files: Option<Vec<PathBuf>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<f64>>,
}

impl Report {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            command: config.command,
            config: config.clone(),
            metrics: Metrics::default(),
            solvers: None,
            factor_files: None,
            objective_trace: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

pub fn save_report(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, report.to_json()?)?;
    Ok(())
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    command: Command,
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

/// Runs a command and writes its report. Returns the process exit code.
pub fn run(config: &ExperimentConfig) -> i32 {
    match execute(config) {
        Ok(report) => {
            let written = match &config.options.output {
                Some(path) => save_report(&report, path),
                None => report.to_json().map(|json| print!("{json}")),
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: cannot write report: {e}");
                    1
                }
            }
        }
        Err(e) => {
            eprintln!("error: {} failed: {e}", serde_json::to_string(&config.command).unwrap_or_default());
            if let Some(path) = &config.options.output {
                let body = ErrorReport {
                    command: config.command,
                    error: ErrorBody {
                        kind: e.kind(),
                        message: e.to_string(),
                    },
                };
                let json = serde_json::to_string_pretty(&body).unwrap_or_default() + "\n";
                if let Err(w) = fs::write(path, json) {
                    eprintln!("error: cannot write error report: {w}");
                }
            }
            1
        }
    }
}

/// Runs a command and returns its report without writing it anywhere.
pub fn execute(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    let mut report = Report::new(config);
    match config.command {
        Command::Norm => norm_command(config, &mut report)?,
        Command::Factorize => factorize_command(config, &mut report)?,
        Command::Verify => verify_command(config, &mut report)?,
        Command::Complete => complete_command(config, &mut report)?,
        Command::Bench => bench_command(config, &mut report)?,
    }
    report.metrics.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// `G1 G2^T` with `G1` (`m x r`) and `G2` (`n x r`) standard Gaussian.
pub fn gen_lowrank(m: usize, n: usize, r: usize, seed: u64) -> Result<DenseMatrix> {
    if m == 0 || n == 0 || r == 0 || r > m.min(n) {
        return Err(Error::Dimension(format!("need 0 < r <= min(m, n), got m={m} n={n} r={r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g1 = gaussian_matrix_with(m, r, &mut rng)?;
    let g2 = gaussian_matrix_with(n, r, &mut rng)?;
    Ok(g1 * g2.transpose())
}

/// I.i.d. Bernoulli(`fraction`) mask, redrawn until at least one entry is observed.
pub fn gen_mask(m: usize, n: usize, fraction: f64, seed: u64) -> Result<Mask> {
    if m == 0 || n == 0 {
        return Err(Error::Dimension("mask dimensions must be positive".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    loop {
        let mask = Mask::from_fn(m, n, |_, _| rng.random::<f64>() < fraction);
        if mask.iter().any(|&b| b) {
            return Ok(mask);
        }
    }
}

fn input_format(config: &ExperimentConfig, path: &Path) -> Result<MatrixFormat> {
    match config.options.format {
        Some(f) => Ok(f),
        None => MatrixFormat::from_path(path),
    }
}

fn load_input(config: &ExperimentConfig) -> Result<Option<DenseMatrix>> {
    match &config.options.input {
        Some(path) => Ok(Some(load_matrix(path, input_format(config, path)?)?)),
        None => Ok(None),
    }
}

/// The input matrix, or a generated low-rank one from `--m --n --rank --seed`.
fn input_or_generated(config: &ExperimentConfig) -> Result<DenseMatrix> {
    if let Some(x) = load_input(config)? {
        return Ok(x);
    }
    let o = &config.options;
    match (o.m, o.n, o.rank) {
        (Some(m), Some(n), Some(r)) => gen_lowrank(m, n, r, o.seed),
        _ => Err(Error::InvalidInput("give --input or all of --m, --n, --rank".into())),
    }
}

fn inner_dim(config: &ExperimentConfig, x: &DenseMatrix) -> Result<usize> {
    match config.options.d {
        Some(d) => Ok(d),
        None => Ok(thin_svd(x, None)?.rank().max(1)),
    }
}

fn write_factors(config: &ExperimentConfig, factors: &[DenseMatrix], report: &mut Report) -> Result<()> {
    let Some(dir) = &config.options.save_factors else {
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    let format = config.options.format.unwrap_or(MatrixFormat::MatrixMarket);
    let ext = match format {
        MatrixFormat::MatrixMarket => "mtx",
        MatrixFormat::Csv => "csv",
    };
    let mut files = Vec::with_capacity(factors.len());
    for (i, f) in factors.iter().enumerate() {
        let path = dir.join(format!("U{}.{ext}", i + 1));
        save_matrix(f, &path, format)?;
        files.push(path);
    }
    report.factor_files = Some(files);
    Ok(())
}

fn norm_command(config: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let x = input_or_generated(config)?;
    let p = SchattenExponent::new(config.p()?)?;
    report.metrics.norm = Some(schatten_norm(&x, p)?);
    Ok(())
}

fn factorize_command(config: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let x = input_or_generated(config)?;
    let split = config.split()?;
    let d = inner_dim(config, &x)?;
    let fs = optimal_factors_m(&x, &split, d)?;
    let norm = schatten_norm(&x, SchattenExponent::new(split.p())?)?;
    let product = product_objective(&fs, &split)?;
    let m = &mut report.metrics;
    m.norm = Some(norm);
    m.product_objective = Some(product);
    m.weighted_sum_objective = Some(weighted_sum_objective(&fs, &split)?);
    m.best_found = Some(product);
    m.gap = Some(product - norm);
    write_factors(config, fs.factors(), report)
}

fn verify_command(config: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let x = input_or_generated(config)?;
    let split = config.split()?;
    let d = inner_dim(config, &x)?;
    let o = &config.options;
    let result = match o.method {
        VerifyMethod::Audit => bound_audit(&x, &split, d, o.trials, o.seed)?,
        VerifyMethod::Search => local_min_search(&x, &split, d, o.restarts, o.max_iters, o.seed)?,
    };
    let m = &mut report.metrics;
    m.norm = Some(result.target_norm);
    m.best_found = Some(result.best_found);
    m.gap = Some(result.gap);
    m.trials = Some(result.trials);
    m.converged = Some(result.converged);
    m.iterations = result.outer_iterations;
    Ok(())
}

struct Setup {
    truth: DenseMatrix,
    problem: CompletionProblem,
    options: SolverOptions,
}

fn completion_setup(config: &ExperimentConfig) -> Result<Setup> {
    let o = &config.options;
    let truth = input_or_generated(config)?;
    let (m, n) = truth.shape();
    let mask = match &o.mask {
        Some(path) => {
            let raw = load_matrix(path, input_format(config, path)?)?;
            if raw.shape() != (m, n) {
                return Err(Error::Dimension(format!(
                    "mask is {:?} but data is {:?}",
                    raw.shape(),
                    (m, n)
                )));
            }
            raw.map(|v| v != 0.0)
        }
        None => gen_mask(m, n, o.fraction.unwrap_or(0.5), o.seed)?,
    };
    let split = config.split()?;
    let d = match o.d {
        Some(d) => d,
        None => o.rank.map_or(m.min(n), |r| (2 * r).min(m.min(n))),
    };
    let lambda = match (o.lambda, o.lambda_rel) {
        (Some(l), _) => l,
        (None, rel) => {
            let observed = Mask::zip_map(&mask, &truth, |seen, v| if seen { v } else { 0.0 });
            rel.unwrap_or(1e-4) * observed.norm()
        }
    };
    let problem = CompletionProblem::new(truth.clone(), mask, lambda, PenaltySpec::new(split, d)?)?;
    let options = SolverOptions {
        max_iters: o.max_iters,
        tol: o.tol,
    };
    Ok(Setup {
        truth,
        problem,
        options,
    })
}

fn relative_error(estimate: &DenseMatrix, truth: &DenseMatrix) -> f64 {
    let scale = truth.norm();
    let diff = (estimate - truth).norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn complete_command(config: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let setup = completion_setup(config)?;
    let solved = factored_complete_with(&setup.problem, &setup.options)?;
    let m = &mut report.metrics;
    m.rel_error = Some(relative_error(&solved.reconstruct(), &setup.truth));
    m.final_objective = Some(solved.final_objective);
    m.converged = Some(solved.converged);
    m.iterations = solved.iterations;
    report.objective_trace = Some(solved.objective_trace.clone());
    write_factors(config, solved.factors.factors(), report)
}

fn timed<F: FnOnce() -> Result<SolveReport>>(f: F) -> (Result<SolveReport>, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn bench_command(config: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let setup = completion_setup(config)?;
    let prob = &setup.problem;
    let opts = &setup.options;
    let p = prob.penalty().split.p();
    let eps0 = config.options.eps0;
    let ((factored, t_factored), (irls, t_irls)) = std::thread::scope(|s| {
        let a = s.spawn(|| timed(|| factored_complete_with(prob, opts)));
        let b = s.spawn(|| timed(|| irls_baseline_with(prob, p, eps0, opts)));
        (
            a.join().expect("factored solver thread panicked"),
            b.join().expect("IRLS thread panicked"),
        )
    });
    let entry = |name: &str, solved: SolveReport, seconds: f64| SolverEntry {
        name: name.to_string(),
        rel_error: relative_error(&solved.reconstruct(), &setup.truth),
        final_objective: solved.final_objective,
        iterations: solved.iterations,
        converged: solved.converged,
        runtime_seconds: seconds,
        objective_trace: solved.objective_trace,
    };
    let solvers = vec![entry("factored", factored?, t_factored), entry("irls", irls?, t_irls)];
    report.metrics.rel_error = Some(solvers[0].rel_error);
    report.metrics.iterations = solvers[0].iterations;
    report.solvers = Some(solvers);
    Ok(())
}
