//! `xtde`: simulations, bounds and self-tests for extremum-encoding delay
//! estimation. Results go to CSV (default) or JSON; every result file gets a
//! `<file>.manifest.json` sidecar that reproduces it.

mod manifest;
mod output;
mod verify;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use extremum_tde::{
    fit_constant, run_experiment, sweep_k, sweep_snr, BoundReport, EpsilonMode, EstimatorId,
    ExperimentConfig, ModelParams, OneBitBudget, SweepPoint, TrialBudget,
};

use manifest::{manifest_path, RunConfig, RunManifest};
use output::{write_rows, Format, Row};
use verify::{Check, Status};

#[derive(Parser, Debug)]
#[command(
    name = "xtde",
    version,
    about = "Extremum-encoding time-delay estimation"
)]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Error rates of each estimator at one operating point.
    Simulate(SimulateArgs),
    /// Error rates versus message size, with bounds and the fitted constant.
    SweepK(SweepKArgs),
    /// Error rates versus SNR, with bounds.
    SweepSnr(SweepSnrArgs),
    /// Evaluate the error-probability bounds and exponent only.
    Bounds(BoundsArgs),
    /// Run the statistical self-tests.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnebitMode {
    /// First floor(k/2) samples, within the k-bit budget.
    Truncated,
    /// All N samples (2N bits).
    Full,
}

#[derive(Args, Debug)]
#[group(id = "experiment", multiple = true)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 150)]
    d_max: u32,
    /// Phase of rho in radians.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Fixed number of trials.
    #[arg(long, conflicts_with_all = ["min_errors", "max_trials"])]
    trials: Option<u64>,
    /// Stop once every estimator has this many errors [default: 100].
    #[arg(long)]
    min_errors: Option<u64>,
    /// Trial cap for adaptive runs [default: 1000000].
    #[arg(long)]
    max_trials: Option<u64>,
    /// Comma-separated: mmie, cce, rd_cce, onebit_cce.
    #[arg(long, value_delimiter = ',', default_value = "mmie,rd_cce,onebit_cce")]
    estimators: Vec<EstimatorId>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OnebitMode::Truncated)]
    onebit_mode: OnebitMode,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file; stdout when absent (no manifest is written then).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 12)]
    k: u32,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true, value_parser = finite)]
    snr_db: f64,
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Rerun the configuration recorded in a manifest.
    #[arg(long, conflicts_with_all = ["experiment", "k", "snr_db"])]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepKArgs {
    /// Comma-separated values or inclusive ranges, e.g. `6..14` or `6,8,10`.
    #[arg(long, default_value = "6..16", value_parser = parse_k_list)]
    k_list: KList,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true, value_parser = finite)]
    snr_db: f64,
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, conflicts_with_all = ["experiment", "k_list", "snr_db"])]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepSnrArgs {
    /// Comma-separated SNR values in dB.
    #[arg(long, default_value = "0,5,10,15,20,25", allow_hyphen_values = true, value_parser = parse_snr_list)]
    snr_db_list: SnrList,
    #[arg(long, default_value_t = 15)]
    k: u32,
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, conflicts_with_all = ["experiment", "snr_db_list", "k"])]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EpsilonArg {
    Zero,
    DeltaOverLogN,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long, default_value = "6..16", value_parser = parse_k_list)]
    k_list: KList,
    #[arg(long, default_value = "20", allow_hyphen_values = true, value_parser = parse_snr_list)]
    snr_db_list: SnrList,
    #[arg(long, default_value_t = 150)]
    d_max: u32,
    #[arg(long, value_enum, default_value_t = EpsilonArg::Zero)]
    epsilon: EpsilonArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = verify::DEFAULT_REPLICATES)]
    replicates: u64,
    /// Comma-separated subset of: extremum_moments, gumbel_cdf, rho_sq_mmie, raw_equivalence, truncation.
    #[arg(long, value_delimiter = ',')]
    checks: Vec<Check>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone)]
struct KList(Vec<u32>);

#[derive(Debug, Clone)]
struct SnrList(Vec<f64>);

fn finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !v.is_finite() {
        return Err("must be finite".into());
    }
    Ok(v)
}

fn parse_k_list(s: &str) -> Result<KList, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let num = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("'{t}': {e}"));
        match item.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty range '{item}'"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(item)?),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(KList(out))
}

fn parse_snr_list(s: &str) -> Result<SnrList, String> {
    let out = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(finite)
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(SnrList(out))
}

/// Failure classes, mapped to process exit codes.
enum Failure {
    Usage(anyhow::Error),
    Verification,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl ExperimentArgs {
    fn resolve(&self, params: ModelParams) -> Result<ExperimentConfig> {
        let budget = match self.trials {
            Some(trials) => TrialBudget::Fixed { trials },
            None => TrialBudget::Adaptive {
                min_errors: self.min_errors.unwrap_or(TrialBudget::DEFAULT_MIN_ERRORS),
                max_trials: self.max_trials.unwrap_or(TrialBudget::DEFAULT_MAX_TRIALS),
            },
        };
        let mut config = ExperimentConfig::new(
            params.with_theta(self.theta)?,
            self.estimators.clone(),
            budget,
            self.seed,
        );
        config.onebit = match self.onebit_mode {
            OnebitMode::Truncated => OneBitBudget::Truncated,
            OnebitMode::Full => OneBitBudget::FullSequence,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Builds a model point without range-checking `k`, which sweeps validate per point.
fn base_params(snr_db: f64, d_max: u32, k: u32) -> ModelParams {
    ModelParams {
        snr_db,
        d_max,
        k,
        theta: 0.0,
    }
}

fn load_run(path: &Path, command: &str) -> Result<RunConfig> {
    let m = RunManifest::load(path)?;
    if m.config.command() != command {
        bail!(
            "manifest {} records a {} run, not {command}",
            path.display(),
            m.config.command()
        );
    }
    m.config.experiment().validate()?;
    Ok(m.config)
}

fn sim_rows(run: &RunConfig) -> Result<Vec<Row>> {
    let exp = run.experiment();
    let seed = exp.master_seed;
    let rows = match run {
        RunConfig::Simulate { experiment } => run_experiment(experiment)?
            .iter()
            .map(|e| Row::sim(&experiment.params, e, seed))
            .collect(),
        RunConfig::SweepK { experiment, k_list } => {
            let points = sweep_k(experiment, k_list)?;
            let mut rows = point_rows(&points, seed);
            rows.push(fit_row(experiment, &points)?);
            rows
        }
        RunConfig::SweepSnr {
            experiment,
            snr_db_list,
        } => point_rows(&sweep_snr(experiment, snr_db_list)?, seed),
    };
    Ok(rows)
}

fn point_rows(points: &[SweepPoint], seed: u64) -> Vec<Row> {
    let mut rows = Vec::new();
    for p in points {
        rows.extend(p.estimates.iter().map(|e| Row::sim(&p.params, e, seed)));
        rows.extend(Row::bound_pair(&p.params, p.bounds.as_ref()));
    }
    rows
}

/// Fitted `c` in `p ~ c 2^{-k E}` for MMIE over the sweep.
fn fit_row(exp: &ExperimentConfig, points: &[SweepPoint]) -> Result<Row> {
    let snr = exp.params.snr();
    let c_hat = if exp.estimators.contains(&EstimatorId::Mmie) && snr > 0.0 {
        let ks: Vec<u32> = points.iter().map(|p| p.params.k).collect();
        let ps: Vec<f64> = points
            .iter()
            .map(|p| p.estimate(EstimatorId::Mmie).map_or(0.0, |e| e.p_hat))
            .collect();
        let e = extremum_tde::theory::error_exponent(snr)?;
        match fit_constant(&ks, &ps, e) {
            Ok(c) => Some(c),
            Err(err) => {
                eprintln!("warning: no fitted constant: {err}");
                None
            }
        }
    } else {
        None
    };
    Ok(Row::fit(
        EstimatorId::Mmie.tag(),
        exp.params.snr_db,
        exp.params.d_max,
        c_hat,
        exp.master_seed,
    ))
}

fn emit(rows: &[Row], output: &OutputArgs, run: Option<RunConfig>) -> Result<()> {
    match &output.out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_rows(rows, output.format, &mut w)?;
            w.flush()?;
            if let Some(run) = run {
                let m = RunManifest::new(run, output.format, vec![path.clone()]);
                m.save(&manifest_path(path))?;
            }
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_rows(rows, output.format, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn execute(run: RunConfig, output: &OutputArgs) -> Result<()> {
    let rows = sim_rows(&run)?;
    emit(&rows, output, Some(run))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let run = match &a.manifest {
        Some(path) => load_run(path, "simulate")?,
        None => RunConfig::Simulate {
            experiment: a
                .experiment
                .resolve(base_params(a.snr_db, a.experiment.d_max, a.k))?,
        },
    };
    execute(run, &a.output)
}

fn cmd_sweep_k(a: &SweepKArgs) -> Result<()> {
    let run = match &a.manifest {
        Some(path) => load_run(path, "sweep-k")?,
        None => {
            let first = a.k_list.0[0];
            RunConfig::SweepK {
                experiment: a.experiment.resolve(base_params(
                    a.snr_db,
                    a.experiment.d_max,
                    first,
                ))?,
                k_list: a.k_list.0.clone(),
            }
        }
    };
    execute(run, &a.output)
}

fn cmd_sweep_snr(a: &SweepSnrArgs) -> Result<()> {
    let run = match &a.manifest {
        Some(path) => load_run(path, "sweep-snr")?,
        None => {
            let first = a.snr_db_list.0[0];
            RunConfig::SweepSnr {
                experiment: a
                    .experiment
                    .resolve(base_params(first, a.experiment.d_max, a.k))?,
                snr_db_list: a.snr_db_list.0.clone(),
            }
        }
    };
    execute(run, &a.output)
}

fn cmd_bounds(a: &BoundsArgs) -> Result<()> {
    let mode = match a.epsilon {
        EpsilonArg::Zero => EpsilonMode::Zero,
        EpsilonArg::DeltaOverLogN => EpsilonMode::DeltaOverLogN,
    };
    let mut rows = Vec::new();
    for &snr_db in &a.snr_db_list.0 {
        for &k in &a.k_list.0 {
            let params = ModelParams::new(snr_db, a.d_max, k)?;
            let b = BoundReport::evaluate(k, params.snr(), a.d_max, mode)?;
            rows.extend(Row::bound_pair(&params, Some(&b)));
            rows.push(Row::bound(&params, "exponent", Some(b.exponent)));
        }
    }
    emit(&rows, &a.output, None)
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool, Failure> {
    let checks = if a.checks.is_empty() {
        Check::ALL.to_vec()
    } else {
        a.checks.clone()
    };
    let results = verify::run(&checks, a.replicates, a.seed)?;
    let stdout = io::stdout();
    let mut w = csv::Writer::from_writer(stdout.lock());
    w.write_record(["check", "status", "statistic", "threshold", "replicates"])
        .map_err(anyhow::Error::from)?;
    for r in &results {
        let f = |v: Option<f64>| v.map(output::format_float).unwrap_or_default();
        let status = match r.status {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        };
        w.write_record([
            r.check.name().to_string(),
            status.to_string(),
            f(r.statistic),
            f(r.threshold),
            r.replicates.to_string(),
        ])
        .map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;
    if results.iter().any(|r| r.status == Status::Inconclusive) {
        eprintln!(
            "fewer than {} replicates: checks are inconclusive",
            verify::MIN_REPLICATES
        );
    }
    Ok(results.iter().all(|r| r.status == Status::Pass))
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::SweepK(a) => cmd_sweep_k(a)?,
        Command::SweepSnr(a) => cmd_sweep_snr(a)?,
        Command::Bounds(a) => cmd_bounds(a)?,
        Command::Verify(a) => {
            if !cmd_verify(a)? {
                return Err(Failure::Verification);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => ExitCode::from(2),
    }
}
