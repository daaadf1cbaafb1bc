use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use gridsync::analysis::{self, stability_metrics, AnalysisError, Band, StabilityReport};
use gridsync::engine::{run, ConfigError, EngineError, ScenarioConfig, SWEEPABLE};
use gridsync::numfmt::fmt_sig;
use gridsync::rng::mix64;
use gridsync::SimTrace;

/// Tolerance band used for every stability report.
const BAND: (f64, f64) = (0.98, 1.02);

#[derive(Parser)]
#[command(name = "gridsync", version, about = "Agent-based DC grid simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, report.csv and resolved.config.
    Run(RunArgs),
    /// Run a scenario once per value of a parameter and summarize in sweep.csv.
    Sweep(SweepArgs),
    /// Build a time-of-day profile from a timestamp,value CSV.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct OutArg {
    /// Output directory. Relative paths are resolved under GRIDSYNC_OUT when set.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long = "out-root", env = "GRIDSYNC_OUT", hide = true)]
    out_root: Option<PathBuf>,
}

impl OutArg {
    fn dir(&self) -> PathBuf {
        match &self.out_root {
            Some(root) if self.out.is_relative() => root.join(&self.out),
            _ => self.out.clone(),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    values: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Give each row its own seed, derived from the base seed and the row index.
    #[arg(long)]
    derive_seeds: bool,
    /// Maximum number of concurrent runs (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV with timestamp and value columns.
    #[arg(value_name = "FILE")]
    input: PathBuf,
    /// Bin width in seconds; must divide 86400.
    #[arg(long, default_value_t = 1)]
    bin_width: u32,
    /// Print the periodic-deviation score for this period in seconds.
    #[arg(long)]
    period: Option<u32>,
    #[command(flatten)]
    out: OutArg,
}

/// Failure classes map onto the exit codes.
enum Failure {
    Invalid(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

fn io(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Io(e.into())
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => io(e),
            _ => invalid(e),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::PriceFile { .. } => io(e),
            EngineError::Config(c) => c.into(),
            _ => invalid(e),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Io(_) => io(e),
            AnalysisError::Csv(ref c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => io(e),
            _ => invalid(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Analyze(args) => cmd_analyze(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Invalid(e) | Failure::Io(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

fn band() -> Band {
    Band::new(BAND.0, BAND.1).expect("valid band")
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let mut config = ScenarioConfig::from_path(path)?;
    if let Some(seed) = seed {
        config.run.seed = seed;
    }
    Ok(config)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(io)
}

/// Runs `config` and writes its artifacts into `dir`.
fn run_into(config: &ScenarioConfig, dir: &Path) -> Result<StabilityReport, Failure> {
    let scenario = config.validate()?;
    let trace = run(config)?;
    let report = stability_metrics(&trace, band())?;
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(io)?;
    write_trace(&trace, &dir.join("trace.csv"))?;
    let mut out = create(&dir.join("report.csv"))?;
    report.write_csv(&mut out)?;
    out.flush().map_err(io)?;
    let resolved = scenario.to_config().to_toml_string()?;
    fs::write(dir.join("resolved.config"), resolved)
        .context("cannot write resolved.config")
        .map_err(io)?;
    Ok(report)
}

fn write_trace(trace: &SimTrace, path: &Path) -> Result<(), Failure> {
    let mut out = create(path)?;
    trace
        .write_csv(&mut out)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(io)?;
    out.flush().map_err(io)
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let config = load_config(&args.config, args.seed)?;
    let dir = args.out.dir();
    let report = run_into(&config, &dir)?;
    println!(
        "min_rel_voltage={} band_crossings={} settling_tick={}",
        fmt_sig(report.min_rel_voltage),
        report.band_crossings,
        report.settling_tick.map_or("none".to_string(), |t| t.to_string()),
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    if !SWEEPABLE.contains(&args.param.as_str()) {
        return Err(invalid(anyhow!(
            "unknown parameter {:?} (expected one of {})",
            args.param,
            SWEEPABLE.join(", ")
        )));
    }
    let base = load_config(&args.config, args.seed)?;
    let mut configs = Vec::with_capacity(args.values.len());
    for (i, &value) in args.values.iter().enumerate() {
        let mut config = base.clone();
        config.set_param(&args.param, value)?;
        if args.derive_seeds && args.param != "seed" {
            config.run.seed = (config.run.seed ^ mix64(i as u64)) & i64::MAX as u64;
        }
        config.validate()?;
        configs.push(config);
    }

    let root = args.out.dir();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(invalid)?;
    let reports: Vec<Result<StabilityReport, Failure>> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, config)| run_into(config, &root.join(format!("run_{i:03}"))))
            .collect()
    });

    let path = root.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let csv_err = |e: csv::Error| io(anyhow!(e).context(format!("cannot write {}", path.display())));
    w.write_record([
        "value",
        "min_rel_voltage",
        "band_crossings",
        "settling_tick",
        "sync_index",
    ])
    .map_err(csv_err)?;
    for (value, report) in args.values.iter().zip(reports) {
        let r = report?;
        w.write_record([
            fmt_sig(*value),
            fmt_sig(r.min_rel_voltage),
            r.band_crossings.to_string(),
            r.settling_tick.map(|t| t.to_string()).unwrap_or_default(),
            r.sync_index.map(fmt_sig).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let file = File::open(&args.input)
        .with_context(|| format!("cannot open {}", args.input.display()))
        .map_err(io)?;
    let profile = analysis::read_frequency_csv(BufReader::new(file), args.bin_width).map_err(|e| match e {
        AnalysisError::Timestamp { .. } | AnalysisError::Value { .. } | AnalysisError::Format { .. } => {
            invalid(anyhow!(e).context(args.input.display().to_string()))
        }
        other => other.into(),
    })?;
    let dir = args.out.dir();
    fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(io)?;
    let mut out = create(&dir.join("profile.csv"))?;
    profile.write_csv(&mut out)?;
    out.flush().map_err(io)?;
    if let Some(period) = args.period {
        let score = analysis::detect_periodic_deviation(&profile, period)?;
        println!("periodic_deviation={}", fmt_sig(score));
    }
    Ok(())
}
