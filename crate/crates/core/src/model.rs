//! Domain types shared by every solver and the baseline: the daily
//! [`Scenario`], the [`Schedule`] produced for it, and the cost and
//! feasibility semantics used to compare schedules like-for-like.
//!
//! Step indices are 0-based in this API. Step `t` covers the wall-clock
//! interval `[t * step_hours, (t + 1) * step_hours)` from midnight of the
//! scenario day. File formats and reports print steps 1-based.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute feasibility tolerance on power values (kW).
pub const FEAS_TOL: f64 = 1e-8;

/// Relative tolerance used when comparing costs of different methods.
pub const COST_REL_TOL: f64 = 1e-6;

/// Default waste factor applied at every step.
pub const DEFAULT_WASTE: f64 = 0.01;
/// Default station capacity in kW.
pub const DEFAULT_CAPACITY_KW: f64 = 300.0;
/// Default per-socket limit in kW.
pub const DEFAULT_SOCKET_KW: f64 = 7.0;
/// Default number of steps in a day.
pub const DEFAULT_HORIZON: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: {what} has length {got}, expected {expected}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::ShapeMismatch {
            what,
            expected,
            got,
        })
    }
}

/// Inclusive range of steps during which a vehicle is parked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    pub first: usize,
    pub last: usize,
}

#[allow(clippy::len_without_is_empty)]
impl Window {
    pub fn new(first: usize, last: usize) -> Self {
        assert!(first <= last, "window must not be empty");
        Self { first, last }
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn contains(&self, t: usize) -> bool {
        self.first <= t && t <= self.last
    }

    pub fn steps(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }
}

/// One day's problem instance.
///
/// Construct through [`Scenario::new`] or [`ScenarioBuilder`]; both check the
/// invariants (consistent shapes, contiguous occupancy columns, nonnegative
/// loads and limits), so every `Scenario` in circulation is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct Scenario {
    scenario_id: String,
    step_hours: f64,
    occupancy: Vec<Vec<bool>>,
    windows: Vec<Option<Window>>,
    load: Vec<f64>,
    capacity: Vec<f64>,
    socket_limit: Vec<f64>,
    waste: Vec<f64>,
    prices: Vec<f64>,
}

impl Scenario {
    /// Builds a scenario from its raw parts. `occupancy` is indexed
    /// `[step][vehicle]`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        scenario_id: impl Into<String>,
        step_hours: f64,
        occupancy: Vec<Vec<bool>>,
        load: Vec<f64>,
        capacity: Vec<f64>,
        socket_limit: Vec<f64>,
        waste: Vec<f64>,
        prices: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let horizon = capacity.len();
        if horizon == 0 {
            return Err(ModelError::InvalidScenario(
                "horizon must have at least one step".into(),
            ));
        }
        if !(step_hours.is_finite() && step_hours > 0.0) {
            return Err(ModelError::InvalidScenario(format!(
                "step_hours must be positive, got {step_hours}"
            )));
        }
        check_len("occupancy rows", horizon, occupancy.len())?;
        check_len("socket_limit", horizon, socket_limit.len())?;
        check_len("waste", horizon, waste.len())?;
        check_len("prices", horizon, prices.len())?;
        let n = load.len();
        for row in &occupancy {
            check_len("occupancy row", n, row.len())?;
        }

        let nonneg = |what: &str, v: &[f64]| -> Result<(), ModelError> {
            match v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                Some(k) => Err(ModelError::InvalidScenario(format!(
                    "{what}[{k}] = {} must be finite and nonnegative",
                    v[k]
                ))),
                None => Ok(()),
            }
        };
        nonneg("load", &load)?;
        nonneg("capacity", &capacity)?;
        nonneg("socket_limit", &socket_limit)?;
        nonneg("waste", &waste)?;
        if let Some(k) = prices.iter().position(|p| !p.is_finite()) {
            return Err(ModelError::InvalidScenario(format!(
                "prices[{k}] is not finite"
            )));
        }

        let mut windows = Vec::with_capacity(n);
        for i in 0..n {
            let present: Vec<usize> = (0..horizon).filter(|&t| occupancy[t][i]).collect();
            let window = match (present.first(), present.last()) {
                (Some(&first), Some(&last)) => {
                    if last - first + 1 != present.len() {
                        return Err(ModelError::InvalidScenario(format!(
                            "occupancy column {i} is not a contiguous run"
                        )));
                    }
                    Some(Window { first, last })
                }
                _ => None,
            };
            if window.is_none() && load[i] > 0.0 {
                return Err(ModelError::InvalidScenario(format!(
                    "vehicle {i} has load {} but is never present",
                    load[i]
                )));
            }
            windows.push(window);
        }

        Ok(Self {
            scenario_id: scenario_id.into(),
            step_hours,
            occupancy,
            windows,
            load,
            capacity,
            socket_limit,
            waste,
            prices,
        })
    }

    pub fn scenario_id(&self) -> &str {
        &self.scenario_id
    }

    pub fn horizon_steps(&self) -> usize {
        self.capacity.len()
    }

    pub fn step_hours(&self) -> f64 {
        self.step_hours
    }

    pub fn num_vehicles(&self) -> usize {
        self.load.len()
    }

    /// `occupancy()[t][i]` is true iff vehicle `i` is parked during step `t`.
    pub fn occupancy(&self) -> &[Vec<bool>] {
        &self.occupancy
    }

    pub fn is_present(&self, t: usize, i: usize) -> bool {
        self.occupancy[t][i]
    }

    /// Parking window of vehicle `i`, or `None` for a vehicle that is never
    /// present (only allowed with zero load).
    pub fn window(&self, i: usize) -> Option<Window> {
        self.windows[i]
    }

    /// Load vector in kW-equivalent (energy divided by step length).
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn capacity(&self) -> &[f64] {
        &self.capacity
    }

    pub fn socket_limit(&self) -> &[f64] {
        &self.socket_limit
    }

    pub fn waste(&self) -> &[f64] {
        &self.waste
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Cost of one kW held for step `t`: `prices[t] * (1 + waste[t]) * step_hours`.
    pub fn unit_cost(&self, t: usize) -> f64 {
        self.prices[t] * (1.0 + self.waste[t]) * self.step_hours
    }

    /// Vehicles present at step `t`, in index order.
    pub fn present_at(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.occupancy[t]
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| p.then_some(i))
    }

    /// Copy of this scenario with a different load vector.
    pub fn with_load(&self, load: Vec<f64>) -> Result<Self, ModelError> {
        check_len("load", self.num_vehicles(), load.len())?;
        Self::new(
            self.scenario_id.clone(),
            self.step_hours,
            self.occupancy.clone(),
            load,
            self.capacity.clone(),
            self.socket_limit.clone(),
            self.waste.clone(),
            self.prices.clone(),
        )
    }

    /// Copy of this scenario with a different price vector.
    pub fn with_prices(&self, prices: Vec<f64>) -> Result<Self, ModelError> {
        check_len("prices", self.horizon_steps(), prices.len())?;
        Self::new(
            self.scenario_id.clone(),
            self.step_hours,
            self.occupancy.clone(),
            self.load.clone(),
            self.capacity.clone(),
            self.socket_limit.clone(),
            self.waste.clone(),
            prices,
        )
    }

    /// Reorders vehicles so that new vehicle `k` is old vehicle `perm[k]`.
    pub fn permute_vehicles(&self, perm: &[usize]) -> Result<Self, ModelError> {
        check_len("permutation", self.num_vehicles(), perm.len())?;
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(ModelError::InvalidScenario(
                    "vehicle permutation is not a bijection".into(),
                ));
            }
        }
        let occupancy = self
            .occupancy
            .iter()
            .map(|row| perm.iter().map(|&p| row[p]).collect())
            .collect();
        let load = perm.iter().map(|&p| self.load[p]).collect();
        Self::new(
            self.scenario_id.clone(),
            self.step_hours,
            occupancy,
            load,
            self.capacity.clone(),
            self.socket_limit.clone(),
            self.waste.clone(),
            self.prices.clone(),
        )
    }
}

/// Convenience builder that describes vehicles by their windows rather than
/// by a raw occupancy matrix. Per-step vectors default to the station
/// defaults and zero prices.
#[derive(Debug, Clone)]
pub struct ScenarioBuilder {
    scenario_id: String,
    horizon: usize,
    step_hours: f64,
    vehicles: Vec<(Option<Window>, f64)>,
    capacity: Vec<f64>,
    socket_limit: Vec<f64>,
    waste: Vec<f64>,
    prices: Vec<f64>,
}

impl ScenarioBuilder {
    pub fn new(scenario_id: impl Into<String>, horizon: usize) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            horizon,
            step_hours: 1.0,
            vehicles: Vec::new(),
            capacity: vec![DEFAULT_CAPACITY_KW; horizon],
            socket_limit: vec![DEFAULT_SOCKET_KW; horizon],
            waste: vec![DEFAULT_WASTE; horizon],
            prices: vec![0.0; horizon],
        }
    }

    pub fn step_hours(mut self, step_hours: f64) -> Self {
        self.step_hours = step_hours;
        self
    }

    /// Adds a vehicle parked over the inclusive 0-based steps `first..=last`.
    pub fn vehicle(mut self, first: usize, last: usize, load: f64) -> Self {
        self.vehicles.push((Some(Window { first, last }), load));
        self
    }

    pub fn capacity(mut self, capacity: Vec<f64>) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn uniform_capacity(self, kw: f64) -> Self {
        let h = self.horizon;
        self.capacity(vec![kw; h])
    }

    pub fn socket_limit(mut self, socket_limit: Vec<f64>) -> Self {
        self.socket_limit = socket_limit;
        self
    }

    pub fn uniform_socket_limit(self, kw: f64) -> Self {
        let h = self.horizon;
        self.socket_limit(vec![kw; h])
    }

    pub fn waste(mut self, waste: Vec<f64>) -> Self {
        self.waste = waste;
        self
    }

    pub fn uniform_waste(self, g: f64) -> Self {
        let h = self.horizon;
        self.waste(vec![g; h])
    }

    pub fn prices(mut self, prices: Vec<f64>) -> Self {
        self.prices = prices;
        self
    }

    pub fn build(self) -> Result<Scenario, ModelError> {
        let n = self.vehicles.len();
        let mut occupancy = vec![vec![false; n]; self.horizon];
        for (i, (window, _)) in self.vehicles.iter().enumerate() {
            if let Some(w) = window {
                if w.first > w.last || w.last >= self.horizon {
                    return Err(ModelError::InvalidScenario(format!(
                        "window {}..={} of vehicle {i} is outside the horizon of {} steps",
                        w.first, w.last, self.horizon
                    )));
                }
                for row in &mut occupancy[w.steps()] {
                    row[i] = true;
                }
            }
        }
        let load = self.vehicles.iter().map(|(_, l)| *l).collect();
        Scenario::new(
            self.scenario_id,
            self.step_hours,
            occupancy,
            load,
            self.capacity,
            self.socket_limit,
            self.waste,
            self.prices,
        )
    }
}

/// On-disk representation of a scenario (occupancy as 0/1 integers).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioFile {
    scenario_id: String,
    horizon_steps: usize,
    step_hours: f64,
    num_vehicles: usize,
    occupancy: Vec<Vec<u8>>,
    load: Vec<f64>,
    capacity: Vec<f64>,
    socket_limit: Vec<f64>,
    waste: Vec<f64>,
    prices: Vec<f64>,
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = ModelError;

    fn try_from(f: ScenarioFile) -> Result<Self, Self::Error> {
        check_len("capacity", f.horizon_steps, f.capacity.len())?;
        check_len("load", f.num_vehicles, f.load.len())?;
        let mut occupancy = Vec::with_capacity(f.occupancy.len());
        for row in f.occupancy {
            let mut out = Vec::with_capacity(row.len());
            for v in row {
                out.push(match v {
                    0 => false,
                    1 => true,
                    other => {
                        return Err(ModelError::InvalidScenario(format!(
                            "occupancy entries must be 0 or 1, found {other}"
                        )))
                    }
                });
            }
            occupancy.push(out);
        }
        Scenario::new(
            f.scenario_id,
            f.step_hours,
            occupancy,
            f.load,
            f.capacity,
            f.socket_limit,
            f.waste,
            f.prices,
        )
    }
}

impl From<Scenario> for ScenarioFile {
    fn from(s: Scenario) -> Self {
        ScenarioFile {
            horizon_steps: s.horizon_steps(),
            num_vehicles: s.num_vehicles(),
            scenario_id: s.scenario_id,
            step_hours: s.step_hours,
            occupancy: s
                .occupancy
                .iter()
                .map(|row| row.iter().map(|&b| u8::from(b)).collect())
                .collect(),
            load: s.load,
            capacity: s.capacity,
            socket_limit: s.socket_limit,
            waste: s.waste,
            prices: s.prices,
        }
    }
}

/// Which procedure produced a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Nominal,
    RobustPrice,
    RobustLoad,
    Fcfs,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Nominal => "nominal",
            Method::RobustPrice => "robust-price",
            Method::RobustLoad => "robust-load",
            Method::Fcfs => "fcfs",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Power allocated to each vehicle at each step, `allocation[t][i]` in kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub scenario_id: String,
    pub method: Method,
    pub allocation: Vec<Vec<f64>>,
}

impl Schedule {
    pub fn zeros(scenario: &Scenario, method: Method) -> Self {
        Self {
            scenario_id: scenario.scenario_id().to_owned(),
            method,
            allocation: vec![vec![0.0; scenario.num_vehicles()]; scenario.horizon_steps()],
        }
    }

    /// Total allocated power at each step.
    pub fn step_totals(&self) -> Vec<f64> {
        self.allocation.iter().map(|row| row.iter().sum()).collect()
    }

    /// Total power delivered to each vehicle over the horizon.
    pub fn vehicle_totals(&self) -> Vec<f64> {
        let n = self.allocation.first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for row in &self.allocation {
            for (o, y) in out.iter_mut().zip(row) {
                *o += y;
            }
        }
        out
    }

    fn check_shape(&self, scenario: &Scenario) -> Result<(), ModelError> {
        check_len(
            "schedule rows",
            scenario.horizon_steps(),
            self.allocation.len(),
        )?;
        for row in &self.allocation {
            check_len("schedule row", scenario.num_vehicles(), row.len())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Cost incurred at each step, currency.
    pub per_step_cost: Vec<f64>,
    pub total_cost: f64,
    /// kWh handed to vehicles.
    pub total_energy_delivered: f64,
    /// kWh lost to the waste overhead.
    pub total_energy_wasted: f64,
}

/// Cost of `schedule` under the scenario's prices and waste factors.
///
/// Only allocations inside a vehicle's parking window are billed; energy
/// totals count every entry.
pub fn evaluate_cost(
    schedule: &Schedule,
    scenario: &Scenario,
) -> Result<CostBreakdown, ModelError> {
    schedule.check_shape(scenario)?;
    let dt = scenario.step_hours();
    let mut per_step_cost = Vec::with_capacity(scenario.horizon_steps());
    let mut delivered = 0.0;
    let mut wasted = 0.0;
    for (t, row) in schedule.allocation.iter().enumerate() {
        let billed: f64 = row
            .iter()
            .zip(&scenario.occupancy()[t])
            .filter_map(|(y, &present)| present.then_some(*y))
            .sum();
        let total: f64 = row.iter().sum();
        per_step_cost.push(scenario.unit_cost(t) * billed);
        delivered += total * dt;
        wasted += scenario.waste()[t] * total * dt;
    }
    Ok(CostBreakdown {
        total_cost: per_step_cost.iter().sum(),
        per_step_cost,
        total_energy_delivered: delivered,
        total_energy_wasted: wasted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    NegativePower,
    SocketExceeded,
    CapacityExceeded,
    DemandShortfall,
    OutsideWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub step: Option<usize>,
    pub vehicle: Option<usize>,
    /// Amount by which the constraint is exceeded, kW.
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn of_kind(&self, kind: ViolationKind) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.kind == kind)
    }
}

/// Checks `schedule` against every constraint of the scenario at [`FEAS_TOL`].
pub fn validate_schedule(
    schedule: &Schedule,
    scenario: &Scenario,
) -> Result<ValidationReport, ModelError> {
    validate_schedule_with_tol(schedule, scenario, FEAS_TOL)
}

pub fn validate_schedule_with_tol(
    schedule: &Schedule,
    scenario: &Scenario,
    tol: f64,
) -> Result<ValidationReport, ModelError> {
    schedule.check_shape(scenario)?;
    let mut violations = Vec::new();
    let mut push = |kind, step, vehicle, magnitude: f64| {
        if magnitude > tol {
            violations.push(Violation {
                kind,
                step,
                vehicle,
                magnitude,
            });
        }
    };
    for (t, row) in schedule.allocation.iter().enumerate() {
        let s = scenario.socket_limit()[t];
        for (i, &y) in row.iter().enumerate() {
            push(ViolationKind::NegativePower, Some(t), Some(i), -y);
            push(ViolationKind::SocketExceeded, Some(t), Some(i), y - s);
            if !scenario.is_present(t, i) {
                push(ViolationKind::OutsideWindow, Some(t), Some(i), y.abs());
            }
        }
        let total: f64 = row.iter().sum();
        push(
            ViolationKind::CapacityExceeded,
            Some(t),
            None,
            total - scenario.capacity()[t],
        );
    }
    for (i, delivered) in schedule.vehicle_totals().into_iter().enumerate() {
        push(
            ViolationKind::DemandShortfall,
            None,
            Some(i),
            scenario.load()[i] - delivered,
        );
    }
    Ok(ValidationReport { violations })
}
