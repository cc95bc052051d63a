//! The nominal cost-minimization problem for one scenario.
//!
//! Variables exist only for `(step, vehicle)` pairs inside the vehicle's
//! window. The problem is
//!
//! ```text
//! min  sum_t price_t (1 + waste_t) dt sum_i Y[t][i]
//! s.t. sum_t Y[t][i] >= load_i            (every vehicle)
//!      sum_i Y[t][i] <= capacity_t        (every step)
//!      0 <= Y[t][i] <= socket_limit_t
//! ```
//!
//! which is also a transportation problem; [`transport_network`] builds that
//! network for the feasibility check and as an independent oracle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    evaluate_cost, CostBreakdown, Method, ModelError, Scenario, Schedule, FEAS_TOL,
};
use crate::solver::{
    max_flow, solve_lp_with, FlowNetwork, LinearProgram, LpSolution, LpStatus, SolverError,
    SolverOptions,
};

#[derive(Debug, Error, Clone)]
pub enum OptimizeError {
    #[error("scenario {} is infeasible: demand {:.6} vs deliverable {:.6}", .0.scenario_id, .0.total_demand, .0.max_flow)]
    InfeasibleScenario(Box<FeasibilityReport>),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub scenario_id: String,
    pub feasible: bool,
    /// Socket capacity over the window minus the load, per vehicle.
    pub per_vehicle_slack: Vec<f64>,
    /// Maximum deliverable load on the transportation network.
    pub max_flow: f64,
    pub total_demand: f64,
}

impl FeasibilityReport {
    pub fn short_vehicles(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_vehicle_slack
            .iter()
            .enumerate()
            .filter_map(|(i, s)| (*s < -FEAS_TOL).then_some(i))
    }
}

/// Node layout of the transportation network.
#[derive(Debug, Clone, Copy)]
pub struct NetworkLayout {
    pub num_vehicles: usize,
    pub horizon: usize,
}

impl NetworkLayout {
    pub const SOURCE: usize = 0;

    pub fn vehicle(&self, i: usize) -> usize {
        1 + i
    }

    pub fn step(&self, t: usize) -> usize {
        1 + self.num_vehicles + t
    }

    pub fn sink(&self) -> usize {
        1 + self.num_vehicles + self.horizon
    }
}

/// Source -> vehicle (capacity load), vehicle -> step inside the window
/// (capacity socket limit, cost per kW), step -> sink (capacity station
/// budget).
pub fn transport_network(scenario: &Scenario) -> (FlowNetwork, NetworkLayout) {
    let layout = NetworkLayout {
        num_vehicles: scenario.num_vehicles(),
        horizon: scenario.horizon_steps(),
    };
    let mut net = FlowNetwork::new(layout.sink() + 1, NetworkLayout::SOURCE, layout.sink());
    for i in 0..scenario.num_vehicles() {
        net.add_arc(
            NetworkLayout::SOURCE,
            layout.vehicle(i),
            scenario.load()[i],
            0.0,
        );
        if let Some(w) = scenario.window(i) {
            for t in w.steps() {
                net.add_arc(
                    layout.vehicle(i),
                    layout.step(t),
                    scenario.socket_limit()[t],
                    scenario.unit_cost(t),
                );
            }
        }
    }
    for t in 0..scenario.horizon_steps() {
        net.add_arc(layout.step(t), layout.sink(), scenario.capacity()[t], 0.0);
    }
    (net, layout)
}

/// Checks whether every load can be delivered: per vehicle against the
/// socket limits of its window, and jointly by a max-flow on the
/// transportation network.
pub fn check_feasibility(scenario: &Scenario) -> FeasibilityReport {
    let per_vehicle_slack: Vec<f64> = (0..scenario.num_vehicles())
        .map(|i| {
            let window_capacity: f64 = scenario
                .window(i)
                .map_or(0.0, |w| w.steps().map(|t| scenario.socket_limit()[t]).sum());
            window_capacity - scenario.load()[i]
        })
        .collect();
    let total_demand: f64 = scenario.load().iter().sum();
    let (net, _) = transport_network(scenario);
    // The network comes from a validated scenario, so it is well formed.
    let flow = max_flow(&net)
        .expect("transport network is well formed")
        .value;
    let feasible =
        flow >= total_demand - FEAS_TOL && per_vehicle_slack.iter().all(|s| *s >= -FEAS_TOL);
    FeasibilityReport {
        scenario_id: scenario.scenario_id().to_owned(),
        feasible,
        per_vehicle_slack,
        max_flow: flow,
        total_demand,
    }
}

/// The scheduling LP together with the `(step, vehicle)` pair of each
/// variable.
#[derive(Debug, Clone)]
pub struct SchedulingLp {
    pub lp: LinearProgram,
    pub cells: Vec<(usize, usize)>,
}

impl SchedulingLp {
    pub fn build(scenario: &Scenario) -> Self {
        Self::build_with_prices(scenario, scenario.prices())
    }

    /// Same constraints as [`SchedulingLp::build`], objective from `prices`.
    pub fn build_with_prices(scenario: &Scenario, prices: &[f64]) -> Self {
        let dt = scenario.step_hours();
        let mut cells = Vec::new();
        for t in 0..scenario.horizon_steps() {
            cells.extend(scenario.present_at(t).map(|i| (t, i)));
        }
        let objective = cells
            .iter()
            .map(|&(t, _)| prices[t] * (1.0 + scenario.waste()[t]) * dt)
            .collect();
        let upper = cells
            .iter()
            .map(|&(t, _)| scenario.socket_limit()[t])
            .collect();
        let mut lp = LinearProgram::new(objective).with_bounds(vec![0.0; cells.len()], upper);

        let mut by_vehicle = vec![Vec::new(); scenario.num_vehicles()];
        let mut by_step = vec![Vec::new(); scenario.horizon_steps()];
        for (k, &(t, i)) in cells.iter().enumerate() {
            by_vehicle[i].push((k, 1.0));
            by_step[t].push((k, 1.0));
        }
        for (i, row) in by_vehicle.into_iter().enumerate() {
            if !row.is_empty() {
                lp.add_ge(row, scenario.load()[i]);
            }
        }
        for (t, row) in by_step.into_iter().enumerate() {
            if !row.is_empty() {
                lp.add_le(row, scenario.capacity()[t]);
            }
        }
        Self { lp, cells }
    }

    pub fn schedule(&self, scenario: &Scenario, x: &[f64], method: Method) -> Schedule {
        let mut schedule = Schedule::zeros(scenario, method);
        for (&(t, i), &v) in self.cells.iter().zip(x) {
            schedule.allocation[t][i] = v;
        }
        schedule
    }
}

#[derive(Debug, Clone)]
pub struct NominalOutcome {
    pub schedule: Schedule,
    pub cost: CostBreakdown,
    pub solution: LpSolution,
}

pub fn optimize_nominal(scenario: &Scenario) -> Result<NominalOutcome, OptimizeError> {
    optimize_nominal_with(scenario, &SolverOptions::default())
}

pub fn optimize_nominal_with(
    scenario: &Scenario,
    opts: &SolverOptions,
) -> Result<NominalOutcome, OptimizeError> {
    let report = check_feasibility(scenario);
    if !report.feasible {
        return Err(OptimizeError::InfeasibleScenario(Box::new(report)));
    }
    let problem = SchedulingLp::build(scenario);
    let solution = solve_lp_with(&problem.lp, opts)?;
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(OptimizeError::InfeasibleScenario(Box::new(report))),
        LpStatus::Unbounded => {
            return Err(SolverError::NumericalFailure(
                "bounded scheduling LP reported unbounded".into(),
            )
            .into())
        }
    }
    let schedule = problem.schedule(scenario, &solution.x, Method::Nominal);
    let cost = evaluate_cost(&schedule, scenario)?;
    Ok(NominalOutcome {
        schedule,
        cost,
        solution,
    })
}
