//! Batch comparison of optimized schedules against first-come-first-served
//! over many daily scenarios, with summary statistics and plot data.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::fcfs_with_report;
use crate::model::{evaluate_cost, Method, Scenario, Schedule};
use crate::nominal::{optimize_nominal_with, OptimizeError};
use crate::robust::{
    optimize_robust_both_with, optimize_robust_price_with, LoadInterval, PriceBall, RobustError,
};
use crate::solver::SolverOptions;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Optimizers compared against FCFS, in report order.
    pub methods: Vec<Method>,
    /// Price-ball radius for the robust methods.
    pub radius: f64,
    /// Upper end of the load interval is `(1 + load_scale) L`.
    pub load_scale: f64,
    /// Worker threads; 0 uses the global pool. Not serialized, since it
    /// does not affect results.
    #[serde(skip)]
    pub workers: usize,
    pub solver: SolverOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Nominal],
            radius: 0.0,
            load_scale: 0.0,
            workers: 0,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario_id: String,
    pub num_vehicles: usize,
    pub method: Method,
    pub trivial_cost: f64,
    /// Cost of the method's schedule at the scenario prices; NaN on failure.
    pub optimized_cost: f64,
    /// The method's own objective (worst-case cost for robust methods).
    pub objective: f64,
    pub infeasible: bool,
    pub fcfs_shortfall: bool,
    pub error: Option<String>,
}

impl ComparisonRow {
    pub fn money_saved(&self) -> f64 {
        self.trivial_cost - self.optimized_cost
    }

    /// `100 (trivial - optimized) / trivial`; `None` unless trivial > 0.
    pub fn saving_pct(&self) -> Option<f64> {
        (self.trivial_cost > 0.0 && self.optimized_cost.is_finite())
            .then(|| 100.0 * (self.trivial_cost - self.optimized_cost) / self.trivial_cost)
    }

    /// Counts toward saving statistics: solved, and FCFS met every demand.
    pub fn is_comparable(&self) -> bool {
        !self.infeasible && !self.fcfs_shortfall && self.error.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub rows: Vec<ComparisonRow>,
    pub fcfs: Schedule,
    /// Schedules of the methods that succeeded, in config order.
    pub schedules: Vec<Schedule>,
}

fn run_one(scenario: &Scenario, cfg: &RunConfig) -> ScenarioResult {
    let fcfs = fcfs_with_report(scenario);
    let trivial_cost = evaluate_cost(&fcfs.schedule, scenario)
        .expect("fcfs schedule has the scenario's shape")
        .total_cost;
    let mut rows = Vec::with_capacity(cfg.methods.len());
    let mut schedules = Vec::new();
    for &method in &cfg.methods {
        let mut row = ComparisonRow {
            scenario_id: scenario.scenario_id().to_owned(),
            num_vehicles: scenario.num_vehicles(),
            method,
            trivial_cost,
            optimized_cost: f64::NAN,
            objective: f64::NAN,
            infeasible: false,
            fcfs_shortfall: fcfs.has_shortfall(),
            error: None,
        };
        match solve_method(scenario, method, cfg) {
            Ok((schedule, cost, objective)) => {
                row.optimized_cost = cost;
                row.objective = objective;
                schedules.push(schedule);
            }
            Err(Failure::Infeasible(msg)) => {
                row.infeasible = true;
                row.error = Some(msg);
            }
            Err(Failure::Other(msg)) => row.error = Some(msg),
        }
        rows.push(row);
    }
    ScenarioResult {
        rows,
        fcfs: fcfs.schedule,
        schedules,
    }
}

enum Failure {
    Infeasible(String),
    Other(String),
}

impl From<OptimizeError> for Failure {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::InfeasibleScenario(_) => Failure::Infeasible(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<RobustError> for Failure {
    fn from(e: RobustError) -> Self {
        match e {
            RobustError::InfeasibleScenario(_) => Failure::Infeasible(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

fn solve_method(
    scenario: &Scenario,
    method: Method,
    cfg: &RunConfig,
) -> Result<(Schedule, f64, f64), Failure> {
    let ball = || PriceBall::around(scenario, cfg.radius);
    match method {
        Method::Nominal => {
            let out = optimize_nominal_with(scenario, &cfg.solver)?;
            Ok((out.schedule, out.cost.total_cost, out.cost.total_cost))
        }
        Method::RobustPrice => {
            let out = optimize_robust_price_with(scenario, &ball()?, &cfg.solver)?;
            Ok((out.schedule, out.cost.total_cost, out.objective))
        }
        Method::RobustLoad => {
            let interval = LoadInterval::scaled(scenario, cfg.load_scale)?;
            let out = optimize_robust_both_with(scenario, &ball()?, &interval, &cfg.solver)?;
            Ok((out.schedule, out.cost.total_cost, out.objective))
        }
        Method::Fcfs => {
            let out = fcfs_with_report(scenario);
            let cost = evaluate_cost(&out.schedule, scenario)
                .map_err(|e| Failure::Other(e.to_string()))?
                .total_cost;
            Ok((out.schedule, cost, cost))
        }
    }
}

/// Runs every scenario, in parallel when `cfg.workers != 1`. Results are in
/// scenario order whatever the worker count.
pub fn run_comparison_detailed(
    scenarios: &[Scenario],
    cfg: &RunConfig,
) -> Result<Vec<ScenarioResult>, SimError> {
    let work = || scenarios.par_iter().map(|s| run_one(s, cfg)).collect();
    match cfg.workers {
        0 => Ok(work()),
        1 => Ok(scenarios.iter().map(|s| run_one(s, cfg)).collect()),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(work))
            .map_err(|e| SimError::Pool(e.to_string())),
    }
}

pub fn run_comparison(
    scenarios: &[Scenario],
    cfg: &RunConfig,
) -> Result<Vec<ComparisonRow>, SimError> {
    Ok(run_comparison_detailed(scenarios, cfg)?
        .into_iter()
        .flat_map(|r| r.rows)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    /// Rows with `num_vehicles >= min_vehicles` are in scope.
    pub min_vehicles: usize,
    /// Comparable rows in scope.
    pub scenario_count: usize,
    pub excluded_infeasible: usize,
    pub excluded_shortfall: usize,
    pub excluded_failed: usize,
    pub trivial_cost: f64,
    pub optimized_cost: f64,
    /// Unweighted mean of per-scenario saving percentages.
    pub mean_of_daily_pct: Option<f64>,
    /// Saving percentage of the summed costs.
    pub pct_of_summed_costs: Option<f64>,
}

impl SummaryRow {
    pub fn filter_label(&self) -> String {
        if self.min_vehicles <= 1 {
            "N>0".to_owned()
        } else {
            format!("N>={}", self.min_vehicles)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

pub const DEFAULT_THRESHOLDS: [usize; 3] = [1, 10, 30];

/// One summary row per method and threshold, methods in first-seen order.
pub fn aggregate(rows: &[ComparisonRow], thresholds: &[usize]) -> SummaryTable {
    let mut methods: Vec<Method> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    let mut out = Vec::new();
    for &method in &methods {
        for &k in thresholds {
            let in_scope = rows
                .iter()
                .filter(|r| r.method == method && r.num_vehicles >= k.max(1));
            let mut s = SummaryRow {
                method,
                min_vehicles: k.max(1),
                scenario_count: 0,
                excluded_infeasible: 0,
                excluded_shortfall: 0,
                excluded_failed: 0,
                trivial_cost: 0.0,
                optimized_cost: 0.0,
                mean_of_daily_pct: None,
                pct_of_summed_costs: None,
            };
            let mut pcts = Vec::new();
            for r in in_scope {
                if r.infeasible {
                    s.excluded_infeasible += 1;
                } else if r.error.is_some() {
                    s.excluded_failed += 1;
                } else if r.fcfs_shortfall {
                    s.excluded_shortfall += 1;
                } else {
                    s.scenario_count += 1;
                    s.trivial_cost += r.trivial_cost;
                    s.optimized_cost += r.optimized_cost;
                    pcts.extend(r.saving_pct());
                }
            }
            if !pcts.is_empty() {
                s.mean_of_daily_pct = Some(pcts.iter().sum::<f64>() / pcts.len() as f64);
            }
            if s.trivial_cost > 0.0 {
                s.pct_of_summed_costs =
                    Some(100.0 * (s.trivial_cost - s.optimized_cost) / s.trivial_cost);
            }
            out.push(s);
        }
    }
    SummaryTable { rows: out }
}

/// Spearman rank correlation with average ranks for ties; `None` for fewer
/// than two points or a constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// `(num_vehicles, money_saved)` of the comparable rows of `method`.
pub fn savings_by_size(rows: &[ComparisonRow], method: Method) -> Vec<(usize, f64)> {
    rows.iter()
        .filter(|r| r.method == method && r.is_comparable())
        .map(|r| (r.num_vehicles, r.money_saved()))
        .collect()
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, SimError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| SimError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub const COMPARISON_HEADER: &str = "scenario_id,num_vehicles,method,trivial_cost,optimized_cost,objective,saving_pct,money_saved,infeasible,fcfs_shortfall,error";
pub const SUMMARY_HEADER: &str = "method,filter,min_vehicles,scenario_count,excluded_infeasible,excluded_shortfall,excluded_failed,trivial_cost,optimized_cost,mean_of_daily_pct,pct_of_summed_costs";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = format!("{COMPARISON_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.scenario_id),
            r.num_vehicles,
            r.method,
            fmt_f(r.trivial_cost),
            fmt_f(r.optimized_cost),
            fmt_f(r.objective),
            fmt_opt(r.saving_pct()),
            fmt_f(r.money_saved()),
            r.infeasible,
            r.fcfs_shortfall,
            csv_field(r.error.as_deref().unwrap_or("")),
        );
    }
    s
}

pub fn summary_csv(table: &SummaryTable) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.filter_label(),
            r.min_vehicles,
            r.scenario_count,
            r.excluded_infeasible,
            r.excluded_shortfall,
            r.excluded_failed,
            fmt_f(r.trivial_cost),
            fmt_f(r.optimized_cost),
            fmt_opt(r.mean_of_daily_pct),
            fmt_opt(r.pct_of_summed_costs),
        );
    }
    s
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub tool_version: String,
    pub config: RunConfig,
    pub thresholds: Vec<usize>,
    pub scenarios: usize,
    pub summary: SummaryTable,
    /// Spearman correlation of vehicle count and money saved per method.
    pub size_saving_spearman: Vec<(Method, Option<f64>)>,
}

/// The scenario shown in the single-day power plot: the largest money saved
/// by the first configured method among comparable rows, earliest on ties.
pub fn showcase_index(results: &[ScenarioResult]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, r) in results.iter().enumerate() {
        let Some(row) = r.rows.first() else { continue };
        if !row.is_comparable() || r.schedules.len() != r.rows.len() {
            continue;
        }
        if best.is_none_or(|(_, m)| row.money_saved() > m) {
            best = Some((k, row.money_saved()));
        }
    }
    best.map(|(k, _)| k)
}

fn kw_column(method: Method) -> String {
    format!("{}_kw", method.as_str().replace('-', "_"))
}

fn cost_column(method: Method) -> String {
    format!("{}_cumulative", method.as_str().replace('-', "_"))
}

/// Per-step total power of FCFS and each method on one day. `hour` is the
/// start of the step in hours from midnight.
pub fn day_profile_csv(
    scenario: Option<&Scenario>,
    result: Option<&ScenarioResult>,
    methods: &[Method],
) -> String {
    let mut s = String::from("hour,fcfs_kw");
    for &m in methods {
        s.push(',');
        s.push_str(&kw_column(m));
    }
    s.push('\n');
    if let (Some(sc), Some(res)) = (scenario, result) {
        let fcfs = res.fcfs.step_totals();
        let others: Vec<Vec<f64>> = res.schedules.iter().map(|x| x.step_totals()).collect();
        for t in 0..sc.horizon_steps() {
            let _ = write!(
                s,
                "{},{}",
                fmt_f(t as f64 * sc.step_hours()),
                fmt_f(fcfs[t])
            );
            for o in &others {
                let _ = write!(s, ",{}", fmt_f(o[t]));
            }
            s.push('\n');
        }
    }
    s
}

/// `(N, money saved)` per comparable day for `method`.
pub fn size_savings_csv(rows: &[ComparisonRow], method: Method) -> String {
    let mut s = String::from("scenario_id,num_vehicles,money_saved\n");
    for r in rows
        .iter()
        .filter(|r| r.method == method && r.is_comparable())
    {
        let _ = writeln!(
            s,
            "{},{},{}",
            csv_field(&r.scenario_id),
            r.num_vehicles,
            fmt_f(r.money_saved())
        );
    }
    s
}

/// Running totals of daily cost over scenarios where every method is
/// comparable, in scenario order.
pub fn cumulative_cost_csv(results: &[ScenarioResult], methods: &[Method]) -> String {
    let mut s = String::from("index,scenario_id,fcfs_cumulative");
    for &m in methods {
        s.push(',');
        s.push_str(&cost_column(m));
    }
    s.push('\n');
    let mut fcfs_total = 0.0;
    let mut totals = vec![0.0; methods.len()];
    let mut index = 0;
    for r in results {
        if r.rows.is_empty() || !r.rows.iter().all(ComparisonRow::is_comparable) {
            continue;
        }
        index += 1;
        fcfs_total += r.rows[0].trivial_cost;
        let _ = write!(
            s,
            "{index},{},{}",
            csv_field(&r.rows[0].scenario_id),
            fmt_f(fcfs_total)
        );
        for (total, row) in totals.iter_mut().zip(&r.rows) {
            *total += row.optimized_cost;
            let _ = write!(s, ",{}", fmt_f(*total));
        }
        s.push('\n');
    }
    s
}

pub fn emit_plot_data(
    scenarios: &[Scenario],
    results: &[ScenarioResult],
    methods: &[Method],
    dir: &Path,
) -> Result<Vec<PathBuf>, SimError> {
    let rows: Vec<ComparisonRow> = results.iter().flat_map(|r| r.rows.clone()).collect();
    let show = showcase_index(results);
    let profile = day_profile_csv(
        show.map(|k| &scenarios[k]),
        show.map(|k| &results[k]),
        methods,
    );
    let scatter_method = methods.first().copied().unwrap_or(Method::Nominal);
    Ok(vec![
        write_file(dir, "day_profile.csv", &profile)?,
        write_file(
            dir,
            "size_savings.csv",
            &size_savings_csv(&rows, scatter_method),
        )?,
        write_file(
            dir,
            "cumulative_cost.csv",
            &cumulative_cost_csv(results, methods),
        )?,
    ])
}

/// Writes `comparison.csv`, `summary.csv`, `summary.json` and the three plot
/// files. Contents depend only on the inputs, never on timing.
pub fn write_reports(
    scenarios: &[Scenario],
    results: &[ScenarioResult],
    cfg: &RunConfig,
    thresholds: &[usize],
    dir: &Path,
) -> Result<Vec<PathBuf>, SimError> {
    fs::create_dir_all(dir).map_err(|source| SimError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let rows: Vec<ComparisonRow> = results.iter().flat_map(|r| r.rows.clone()).collect();
    let table = aggregate(&rows, thresholds);
    let doc = SummaryDocument {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        config: cfg.clone(),
        thresholds: thresholds.to_vec(),
        scenarios: scenarios.len(),
        size_saving_spearman: cfg
            .methods
            .iter()
            .map(|&m| {
                let (n, saved): (Vec<f64>, Vec<f64>) = savings_by_size(&rows, m)
                    .into_iter()
                    .map(|(n, s)| (n as f64, s))
                    .unzip();
                (m, spearman(&n, &saved))
            })
            .collect(),
        summary: table.clone(),
    };
    let mut paths = vec![
        write_file(dir, "comparison.csv", &comparison_csv(&rows))?,
        write_file(dir, "summary.csv", &summary_csv(&table))?,
        write_file(
            dir,
            "summary.json",
            &(serde_json::to_string_pretty(&doc)? + "\n"),
        )?,
    ];
    paths.extend(emit_plot_data(scenarios, results, &cfg.methods, dir)?);
    Ok(paths)
}
