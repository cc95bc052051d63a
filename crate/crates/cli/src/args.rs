//! Flag definitions and their mapping to a [`Command`].

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use smartcharge::ingest::{IngestConfig, MidnightPolicy, PriceUnit};
use smartcharge::model::{DEFAULT_CAPACITY_KW, DEFAULT_HORIZON, DEFAULT_SOCKET_KW, DEFAULT_WASTE};
use smartcharge::sim::RunConfig;
use smartcharge::solver::SolverOptions;
use smartcharge::synth::SynthConfig;
use smartcharge::Method;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SMARTCHARGE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "smartcharge-out";
pub const DEFAULT_SYNTHETIC_DAYS: usize = 365;

#[derive(Debug, Parser)]
#[command(
    name = "smartcharge",
    version,
    about = "Cost-optimal charging schedules for an EV station, compared against first-come-first-served",
    after_help = "Exit status: 0 success, 1 I/O error, 2 usage error, 3 ingest error, \
                  4 infeasible scenario, 5 solver failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Turn session and price files into one scenario file per day.
    Ingest(IngestArgs),
    /// Optimize a single scenario file.
    Solve(SolveArgs),
    /// Compare methods against FCFS over scenario files.
    Compare(CompareArgs),
    /// Ingest raw data (or generate synthetic days) and compare methods.
    Simulate(SimulateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Solve(_) => "solve",
            Command::Compare(_) => "compare",
            Command::Simulate(_) => "simulate",
        }
    }

    pub fn output(&self) -> &OutputArgs {
        match self {
            Command::Ingest(a) => &a.output,
            Command::Solve(a) => &a.output,
            Command::Compare(a) => &a.output,
            Command::Simulate(a) => &a.output,
        }
    }

    pub fn output_mut(&mut self) -> &mut OutputArgs {
        match self {
            Command::Ingest(a) => &mut a.output,
            Command::Solve(a) => &mut a.output,
            Command::Compare(a) => &mut a.output,
            Command::Simulate(a) => &mut a.output,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct StationArgs {
    /// Steps per day (T).
    #[arg(long, default_value_t = DEFAULT_HORIZON, value_parser = positive_usize)]
    pub horizon: usize,
    /// Hours per step.
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub step_hours: f64,
    /// Station power capacity in kW, every step.
    #[arg(long, default_value_t = DEFAULT_CAPACITY_KW, value_parser = positive_f64)]
    pub capacity: f64,
    /// Per-socket power limit in kW, every step.
    #[arg(long, default_value_t = DEFAULT_SOCKET_KW, value_parser = positive_f64)]
    pub socket: f64,
    /// Fractional transmission loss, every step.
    #[arg(long, default_value_t = DEFAULT_WASTE, value_parser = nonnegative_f64)]
    pub waste: f64,
    /// Unit of the price column: per-kwh or per-mwh.
    #[arg(long, default_value = "per-mwh", value_parser = parse_price_unit)]
    pub price_unit: PriceUnit,
    /// Sessions leaving after the horizon: clamp or drop.
    #[arg(long, default_value = "clamp", value_parser = parse_midnight)]
    pub midnight: MidnightPolicy,
}

impl Default for StationArgs {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            step_hours: 1.0,
            capacity: DEFAULT_CAPACITY_KW,
            socket: DEFAULT_SOCKET_KW,
            waste: DEFAULT_WASTE,
            price_unit: PriceUnit::PerMwh,
            midnight: MidnightPolicy::Clamp,
        }
    }
}

impl StationArgs {
    pub fn ingest_config(&self) -> IngestConfig {
        IngestConfig {
            horizon_steps: self.horizon,
            step_hours: self.step_hours,
            capacity_kw: self.capacity,
            socket_kw: self.socket,
            waste: self.waste,
            price_unit: self.price_unit,
            midnight_policy: self.midnight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RobustArgs {
    /// Radius of the price uncertainty ball, currency/kWh.
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative_f64)]
    pub radius: f64,
    /// Load interval upper end is (1 + scale) times the nominal load.
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative_f64)]
    pub load_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Directory receiving every output file.
    #[arg(long = "out", env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BatchArgs {
    /// Method to compare against FCFS; repeat for several.
    #[arg(long = "method", default_value = "nominal", value_parser = parse_method)]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub robust: RobustArgs,
    /// Minimum vehicle counts of the summary filters.
    #[arg(long, value_delimiter = ',', default_values_t = smartcharge::sim::DEFAULT_THRESHOLDS)]
    pub thresholds: Vec<usize>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub workers: usize,
}

impl BatchArgs {
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            methods: self.methods.clone(),
            radius: self.robust.radius,
            load_scale: self.robust.load_scale,
            workers: self.workers,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    /// Charging sessions CSV.
    #[arg(long)]
    pub sessions: PathBuf,
    /// Hourly prices CSV.
    #[arg(long)]
    pub prices: PathBuf,
    #[command(flatten)]
    pub station: StationArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value = "nominal", value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub robust: RobustArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    /// Scenario JSON file; repeat for several.
    #[arg(long, required_unless_present = "scenario_dir")]
    pub scenario: Vec<PathBuf>,
    /// Directory whose `*.json` files are all scenarios.
    #[arg(long)]
    pub scenario_dir: Option<PathBuf>,
    #[command(flatten)]
    pub batch: BatchArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Charging sessions CSV.
    #[arg(long, required_unless_present = "synthetic")]
    pub sessions: Option<PathBuf>,
    /// Hourly prices CSV.
    #[arg(long, required_unless_present = "synthetic")]
    pub prices: Option<PathBuf>,
    /// Random feasible days instead of input files: up to N vehicles,
    /// T steps, seeded. Test tooling only.
    #[arg(
        long,
        num_args = 3,
        value_names = ["N", "T", "SEED"],
        conflicts_with_all = ["sessions", "prices"]
    )]
    pub synthetic: Option<Vec<u64>>,
    /// Number of synthetic days [default: 365].
    #[arg(long)]
    pub days: Option<usize>,
    #[command(flatten)]
    pub station: StationArgs,
    #[command(flatten)]
    pub batch: BatchArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl SimulateArgs {
    /// Generator settings when `--synthetic` is given. Station flags other
    /// than the horizon carry over.
    pub fn synthetic_days(&self) -> usize {
        self.days.unwrap_or(DEFAULT_SYNTHETIC_DAYS)
    }

    pub fn synth_config(&self) -> Option<SynthConfig> {
        let spec = self.synthetic.as_ref()?;
        Some(SynthConfig {
            step_hours: self.station.step_hours,
            capacity_kw: self.station.capacity,
            socket_kw: self.station.socket,
            waste: self.station.waste,
            ..SynthConfig::new(spec[0] as usize, spec[1] as usize, spec[2])
        })
    }
}

/// A rejected argument vector. `exit_code` is 0 for `--help` and
/// `--version`, whose text is in `message`.
#[derive(Debug)]
pub struct UsageError {
    pub message: String,
    pub exit_code: i32,
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for UsageError {}

/// Parses a full argument vector, program name first.
pub fn parse_args<I, T>(argv: I) -> Result<Command, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| UsageError {
        message: e.render().to_string(),
        exit_code: if e.use_stderr() { 2 } else { 0 },
    })?;
    let usage = |msg: &str| UsageError {
        message: format!("error: {msg}\n"),
        exit_code: 2,
    };
    if let Command::Simulate(a) = &cli.command {
        match &a.synthetic {
            Some(spec) if spec[0] == 0 || spec[1] == 0 => {
                return Err(usage("--synthetic needs N >= 1 and T >= 1"));
            }
            None if a.days.is_some() => return Err(usage("--days requires --synthetic")),
            _ => {}
        }
    }
    Ok(cli.command)
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn nonnegative_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(v) => Err(format!("must be non-negative, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "nominal" => Ok(Method::Nominal),
        "robust-price" => Ok(Method::RobustPrice),
        "robust-load" => Ok(Method::RobustLoad),
        "fcfs" => Ok(Method::Fcfs),
        _ => Err(format!(
            "unknown method `{s}` (expected nominal, robust-price, robust-load or fcfs)"
        )),
    }
}

fn parse_price_unit(s: &str) -> Result<PriceUnit, String> {
    match s {
        "per-kwh" => Ok(PriceUnit::PerKwh),
        "per-mwh" => Ok(PriceUnit::PerMwh),
        _ => Err(format!(
            "unknown price unit `{s}` (expected per-kwh or per-mwh)"
        )),
    }
}

fn parse_midnight(s: &str) -> Result<MidnightPolicy, String> {
    match s {
        "clamp" => Ok(MidnightPolicy::Clamp),
        "drop" => Ok(MidnightPolicy::Drop),
        _ => Err(format!(
            "unknown midnight policy `{s}` (expected clamp or drop)"
        )),
    }
}
