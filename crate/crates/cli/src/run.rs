//! Executes a [`Command`]: reads inputs, runs the pipeline, writes outputs
//! and the run manifest under the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use smartcharge::ingest::{build_scenarios, parse_prices, parse_sessions, IngestError};
use smartcharge::nominal::{optimize_nominal, FeasibilityReport, OptimizeError};
use smartcharge::robust::{
    optimize_robust_both, optimize_robust_price, LoadInterval, PriceBall, RobustError,
};
use smartcharge::sim::{run_comparison_detailed, write_reports, ScenarioResult, SimError};
use smartcharge::solver::NormAugmentedSolution;
use smartcharge::synth::random_scenarios;
use smartcharge::{evaluate_cost, CostBreakdown, Method, Scenario, Schedule};

use crate::args::{BatchArgs, Command, CompareArgs, IngestArgs, SimulateArgs, SolveArgs};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Io = 1,
    Usage = 2,
    Ingest = 3,
    Infeasible = 4,
    Solver = 5,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    BadScenarioFile {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    Ingest { path: PathBuf, source: IngestError },
    #[error("{0}")]
    IngestConfig(IngestError),
    #[error("no scenarios to process")]
    NoScenarios,
    #[error("scenario {} is infeasible", .0.scenario_id)]
    Infeasible(Box<FeasibilityReport>),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Io { .. } | CliError::Output(_) => ExitStatus::Io,
            CliError::BadScenarioFile { .. }
            | CliError::Ingest { .. }
            | CliError::IngestConfig(_)
            | CliError::NoScenarios => ExitStatus::Ingest,
            CliError::Infeasible(_) => ExitStatus::Infeasible,
            CliError::Solver(_) => ExitStatus::Solver,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Output(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything needed to repeat a run: the resolved command and a digest of
/// each input it read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    /// Arguments as given, program name excluded.
    pub args: Vec<String>,
    pub command: Command,
    pub inputs: Vec<InputDigest>,
    /// Output file names relative to the output directory.
    pub outputs: Vec<String>,
    pub exit_code: i32,
}

/// Result of a run that got far enough to write its outputs.
#[derive(Debug)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Solve output: the schedule and what it costs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub scenario_id: String,
    pub method: Method,
    pub converged: bool,
    /// Cost at the scenario prices.
    pub cost: CostBreakdown,
    /// Optimized objective; the worst case over the price ball for robust
    /// methods.
    pub objective: f64,
    pub cutting_planes: Option<CutStats>,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutStats {
    pub cuts: usize,
    pub lower_bound: f64,
    pub relative_gap: f64,
}

impl From<&NormAugmentedSolution> for CutStats {
    fn from(s: &NormAugmentedSolution) -> Self {
        Self {
            cuts: s.cuts,
            lower_bound: s.lower_bound,
            relative_gap: s.relative_gap,
        }
    }
}

struct Context {
    out_dir: PathBuf,
    inputs: Vec<InputDigest>,
    files: Vec<PathBuf>,
}

impl Context {
    fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        self.inputs.push(InputDigest {
            path: path.to_owned(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_owned(),
                source,
            })?;
        }
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path.clone());
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }
}

/// Runs `command`. `args` is recorded verbatim in the manifest.
///
/// Returns `Err` when nothing useful could be written. A batch whose
/// scenarios partly failed still writes its reports and returns `Ok` with
/// a nonzero status.
pub fn run(command: &Command, args: &[String]) -> Result<RunOutcome, CliError> {
    let mut ctx = Context {
        out_dir: command.output().out_dir.clone(),
        inputs: Vec::new(),
        files: Vec::new(),
    };
    fs::create_dir_all(&ctx.out_dir).map_err(|source| CliError::Io {
        path: ctx.out_dir.clone(),
        source,
    })?;
    let result = match command {
        Command::Ingest(a) => run_ingest(a, &mut ctx),
        Command::Solve(a) => run_solve(a, &mut ctx),
        Command::Compare(a) => run_compare(a, &mut ctx),
        Command::Simulate(a) => run_simulate(a, &mut ctx),
    };
    let status = match &result {
        Ok(status) => *status,
        Err(e) => e.exit_status(),
    };
    if result.is_ok() || status == ExitStatus::Infeasible {
        let outputs = ctx
            .files
            .iter()
            .filter_map(|p| p.strip_prefix(&ctx.out_dir).ok())
            .map(|p| p.to_string_lossy().replace('\\', "/"))
            .collect();
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            args: args.to_vec(),
            command: command.clone(),
            inputs: ctx.inputs.clone(),
            outputs,
            exit_code: status.code(),
        };
        ctx.write_json(MANIFEST_FILE, &manifest)?;
    }
    result.map(|status| RunOutcome {
        status,
        out_dir: ctx.out_dir,
        files: ctx.files,
    })
}

/// Reruns the command stored in a manifest, writing into `out_dir`.
pub fn rerun_manifest(manifest: &Manifest, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let mut command = manifest.command.clone();
    command.output_mut().out_dir = out_dir.to_owned();
    run(&command, &manifest.args)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|source| CliError::BadScenarioFile {
        path: path.to_owned(),
        source,
    })
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    scenarios: Vec<IngestedDay<'a>>,
    skipped_days: &'a [smartcharge::ingest::SkippedDay],
    dropped_sessions: usize,
    outside_horizon: usize,
}

#[derive(Serialize)]
struct IngestedDay<'a> {
    scenario_id: &'a str,
    file: String,
    session_ids: &'a [String],
}

fn ingest_files(
    sessions: &Path,
    prices: &Path,
    station: &crate::args::StationArgs,
    ctx: &mut Context,
) -> Result<smartcharge::ingest::IngestOutcome, CliError> {
    let cfg = station.ingest_config();
    cfg.validate().map_err(CliError::IngestConfig)?;
    let raw = ctx.read(sessions)?;
    let records = parse_sessions(raw.as_slice()).map_err(|source| CliError::Ingest {
        path: sessions.to_owned(),
        source,
    })?;
    let raw = ctx.read(prices)?;
    let series =
        parse_prices(raw.as_slice(), cfg.price_unit).map_err(|source| CliError::Ingest {
            path: prices.to_owned(),
            source,
        })?;
    let outcome = build_scenarios(&records, &series, &cfg).map_err(CliError::IngestConfig)?;
    info!(
        "{} sessions, {} scenarios",
        records.len(),
        outcome.scenarios.len()
    );
    Ok(outcome)
}

fn run_ingest(a: &IngestArgs, ctx: &mut Context) -> Result<ExitStatus, CliError> {
    let outcome = ingest_files(&a.sessions, &a.prices, &a.station, ctx)?;
    let mut days = Vec::with_capacity(outcome.scenarios.len());
    for (sc, ids) in outcome.scenarios.iter().zip(&outcome.session_ids) {
        let file = format!("scenarios/{}.json", sc.scenario_id());
        ctx.write_json(&file, sc)?;
        days.push(IngestedDay {
            scenario_id: sc.scenario_id(),
            file,
            session_ids: ids,
        });
    }
    ctx.write_json(
        "ingest.json",
        &IngestSummary {
            scenarios: days,
            skipped_days: &outcome.skipped_days,
            dropped_sessions: outcome.dropped_sessions,
            outside_horizon: outcome.outside_horizon,
        },
    )?;
    Ok(ExitStatus::Success)
}

fn load_scenario(path: &Path, ctx: &mut Context) -> Result<Scenario, CliError> {
    let raw = ctx.read(path)?;
    serde_json::from_slice(&raw).map_err(|source| CliError::BadScenarioFile {
        path: path.to_owned(),
        source,
    })
}

fn run_solve(a: &SolveArgs, ctx: &mut Context) -> Result<ExitStatus, CliError> {
    let scenario = load_scenario(&a.scenario, ctx)?;
    let ball = || PriceBall::around(&scenario, a.robust.radius);
    let solved = match a.method {
        Method::Nominal => optimize_nominal(&scenario)
            .map(|o| (o.schedule, o.cost.clone(), o.cost.total_cost, None))
            .map_err(Failure::from),
        Method::RobustPrice => ball()
            .and_then(|b| optimize_robust_price(&scenario, &b))
            .map(|o| {
                (
                    o.schedule,
                    o.cost,
                    o.objective,
                    Some(CutStats::from(&o.solution)),
                )
            })
            .map_err(Failure::from),
        Method::RobustLoad => ball()
            .and_then(|b| {
                let interval = LoadInterval::scaled(&scenario, a.robust.load_scale)?;
                optimize_robust_both(&scenario, &b, &interval)
            })
            .map(|o| {
                (
                    o.schedule,
                    o.cost,
                    o.objective,
                    Some(CutStats::from(&o.solution)),
                )
            })
            .map_err(Failure::from),
        Method::Fcfs => {
            let schedule = smartcharge::baseline::fcfs_schedule(&scenario);
            evaluate_cost(&schedule, &scenario)
                .map(|c| {
                    let total = c.total_cost;
                    (schedule, c, total, None)
                })
                .map_err(|e| Failure::Solver(e.to_string()))
        }
    };
    match solved {
        Ok((schedule, cost, objective, cutting_planes)) => {
            ctx.write_json(
                "solution.json",
                &SolveReport {
                    scenario_id: scenario.scenario_id().to_owned(),
                    method: a.method,
                    converged: true,
                    cost,
                    objective,
                    cutting_planes,
                    schedule,
                },
            )?;
            Ok(ExitStatus::Success)
        }
        Err(Failure::Infeasible(report)) => {
            ctx.write_json("feasibility.json", &report)?;
            Err(CliError::Infeasible(report))
        }
        Err(Failure::CutLimit { best, schedule }) => {
            let cost =
                evaluate_cost(&schedule, &scenario).map_err(|e| CliError::Solver(e.to_string()))?;
            ctx.write_json(
                "solution.json",
                &SolveReport {
                    scenario_id: scenario.scenario_id().to_owned(),
                    method: a.method,
                    converged: false,
                    cost,
                    objective: best.objective_value,
                    cutting_planes: Some(CutStats::from(best.as_ref())),
                    schedule: *schedule,
                },
            )?;
            warn!(
                "cut limit reached with relative gap {:.3e}; best schedule written",
                best.relative_gap
            );
            Ok(ExitStatus::Solver)
        }
        Err(Failure::Solver(msg)) => Err(CliError::Solver(msg)),
    }
}

enum Failure {
    Infeasible(Box<FeasibilityReport>),
    CutLimit {
        best: Box<NormAugmentedSolution>,
        schedule: Box<Schedule>,
    },
    Solver(String),
}

impl From<OptimizeError> for Failure {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::InfeasibleScenario(r) => Failure::Infeasible(r),
            other => Failure::Solver(other.to_string()),
        }
    }
}

impl From<RobustError> for Failure {
    fn from(e: RobustError) -> Self {
        match e {
            RobustError::InfeasibleScenario(r) => Failure::Infeasible(r),
            RobustError::CutLimitExceeded { best, schedule } => {
                Failure::CutLimit { best, schedule }
            }
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn scenario_paths(a: &CompareArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = a.scenario.clone();
    if let Some(dir) = &a.scenario_dir {
        let io_err = |source| CliError::Io {
            path: dir.clone(),
            source,
        };
        let mut found = Vec::new();
        for entry in fs::read_dir(dir).map_err(io_err)? {
            let path = entry.map_err(io_err)?.path();
            if path.extension().is_some_and(|e| e == "json") && path.is_file() {
                found.push(path);
            }
        }
        found.sort();
        paths.extend(found);
    }
    Ok(paths)
}

fn run_compare(a: &CompareArgs, ctx: &mut Context) -> Result<ExitStatus, CliError> {
    let mut scenarios = Vec::new();
    for path in scenario_paths(a)? {
        scenarios.push(load_scenario(&path, ctx)?);
    }
    run_batch(&scenarios, &a.batch, ctx)
}

fn run_simulate(a: &SimulateArgs, ctx: &mut Context) -> Result<ExitStatus, CliError> {
    let scenarios = match (a.synth_config(), &a.sessions, &a.prices) {
        (Some(cfg), _, _) => random_scenarios(a.synthetic_days(), &cfg),
        (None, Some(sessions), Some(prices)) => {
            ingest_files(sessions, prices, &a.station, ctx)?.scenarios
        }
        _ => unreachable!("argument parser requires input files or --synthetic"),
    };
    run_batch(&scenarios, &a.batch, ctx)
}

/// Writes the six report files. Status is [`ExitStatus::Solver`] if any
/// method failed for a reason other than infeasibility, and
/// [`ExitStatus::Infeasible`] if every row was infeasible.
fn run_batch(
    scenarios: &[Scenario],
    batch: &BatchArgs,
    ctx: &mut Context,
) -> Result<ExitStatus, CliError> {
    if scenarios.is_empty() {
        return Err(CliError::NoScenarios);
    }
    let cfg = batch.run_config();
    let results = run_comparison_detailed(scenarios, &cfg)?;
    let files = write_reports(scenarios, &results, &cfg, &batch.thresholds, &ctx.out_dir)?;
    ctx.files.extend(files);
    Ok(batch_status(&results))
}

fn batch_status(results: &[ScenarioResult]) -> ExitStatus {
    let rows = || results.iter().flat_map(|r| &r.rows);
    for row in rows().filter(|r| r.error.is_some() && !r.infeasible) {
        warn!(
            "{} {}: {}",
            row.scenario_id,
            row.method,
            row.error.as_deref().unwrap_or_default()
        );
    }
    let infeasible = rows().filter(|r| r.infeasible).count();
    if infeasible > 0 {
        warn!("{infeasible} scenario/method pairs infeasible");
    }
    if rows().any(|r| r.error.is_some() && !r.infeasible) {
        ExitStatus::Solver
    } else if rows().all(|r| r.infeasible) {
        ExitStatus::Infeasible
    } else {
        ExitStatus::Success
    }
}

/// Human-readable account of why a scenario cannot be served.
pub fn describe_infeasibility(report: &FeasibilityReport) -> String {
    let mut s = format!(
        "scenario {}: total demand {:.6} exceeds deliverable {:.6}\n",
        report.scenario_id, report.total_demand, report.max_flow
    );
    let short: Vec<usize> = report.short_vehicles().collect();
    if short.is_empty() {
        s.push_str("every vehicle fits its own window; the station capacity is the bottleneck\n");
    }
    for i in short {
        s.push_str(&format!(
            "vehicle {i}: load exceeds its window's socket capacity by {:.6}\n",
            -report.per_vehicle_slack[i]
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use smartcharge::sim::ComparisonRow;

    fn result(flags: &[(bool, bool)]) -> ScenarioResult {
        ScenarioResult {
            rows: flags
                .iter()
                .map(|&(infeasible, error)| ComparisonRow {
                    scenario_id: "d".into(),
                    num_vehicles: 1,
                    method: Method::Nominal,
                    trivial_cost: 1.0,
                    optimized_cost: 1.0,
                    objective: 1.0,
                    infeasible,
                    fcfs_shortfall: false,
                    error: (infeasible || error).then(|| "x".into()),
                })
                .collect(),
            fcfs: Schedule {
                scenario_id: "d".into(),
                method: Method::Fcfs,
                allocation: vec![],
            },
            schedules: vec![],
        }
    }

    #[test]
    fn batch_status_priorities() {
        assert_eq!(
            batch_status(&[result(&[(false, false)])]),
            ExitStatus::Success
        );
        assert_eq!(
            batch_status(&[result(&[(true, false), (false, false)])]),
            ExitStatus::Success
        );
        assert_eq!(
            batch_status(&[result(&[(true, false)]), result(&[(true, false)])]),
            ExitStatus::Infeasible
        );
        assert_eq!(
            batch_status(&[result(&[(true, false), (false, true)])]),
            ExitStatus::Solver
        );
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            ExitStatus::Success,
            ExitStatus::Io,
            ExitStatus::Usage,
            ExitStatus::Ingest,
            ExitStatus::Infeasible,
            ExitStatus::Solver,
        ]
        .map(ExitStatus::code);
        assert_eq!(codes, [0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn infeasibility_names_the_short_vehicle() {
        let report = FeasibilityReport {
            scenario_id: "d".into(),
            feasible: false,
            per_vehicle_slack: vec![1.0, -2.5],
            max_flow: 10.0,
            total_demand: 12.5,
        };
        let text = describe_infeasibility(&report);
        assert!(text.contains("vehicle 1") && text.contains("2.5"));
        assert!(!text.contains("vehicle 0"));
    }
}
