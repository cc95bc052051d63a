//! Robust schedules.
//!
//! Price uncertainty is a Euclidean ball around a nominal price vector. The
//! worst case of `pi . v` over the ball is `center . v + r ||v||`, where `v`
//! is the per-step energy drawn from the grid, `v_t = (1 + waste_t) dt
//! sum_i Y[t][i]`. Load uncertainty is an interval per vehicle; since every
//! demand constraint is a lower bound on delivered energy, the worst case is
//! the upper end of the interval.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{evaluate_cost, CostBreakdown, Method, ModelError, Scenario, Schedule};
use crate::nominal::{check_feasibility, FeasibilityReport, SchedulingLp};
use crate::solver::{
    solve_norm_augmented_with, LpStatus, NormAugmentedSolution, NormMap, SolverError, SolverOptions,
};

#[derive(Debug, Error, Clone)]
pub enum RobustError {
    #[error("scenario {} is infeasible: demand {:.6} vs deliverable {:.6}", .0.scenario_id, .0.total_demand, .0.max_flow)]
    InfeasibleScenario(Box<FeasibilityReport>),
    #[error("cutting planes stopped at the cut limit ({} cuts, relative gap {:.3e})", .best.cuts, .best.relative_gap)]
    CutLimitExceeded {
        best: Box<NormAugmentedSolution>,
        schedule: Box<Schedule>,
    },
    #[error("invalid uncertainty set: {0}")]
    InvalidSet(String),
    #[error(transparent)]
    Solver(SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceBall {
    center: Vec<f64>,
    radius: f64,
}

impl PriceBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self, RobustError> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(RobustError::InvalidSet(format!(
                "radius {radius} must be finite and nonnegative"
            )));
        }
        if center.iter().any(|p| !p.is_finite()) {
            return Err(RobustError::InvalidSet("non-finite price in center".into()));
        }
        Ok(Self { center, radius })
    }

    /// Ball of radius `radius` around the scenario's own prices.
    pub fn around(scenario: &Scenario, radius: f64) -> Result<Self, RobustError> {
        Self::new(scenario.prices().to_vec(), radius)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadInterval {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LoadInterval {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, RobustError> {
        if lower.len() != upper.len() {
            return Err(ModelError::ShapeMismatch {
                what: "load interval",
                expected: lower.len(),
                got: upper.len(),
            }
            .into());
        }
        for (i, (lo, up)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && up.is_finite() && 0.0 <= *lo && lo <= up) {
                return Err(RobustError::InvalidSet(format!(
                    "vehicle {i}: interval [{lo}, {up}] is not 0 <= lower <= upper"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[load, (1 + scale) load]` for every vehicle of the scenario.
    pub fn scaled(scenario: &Scenario, scale: f64) -> Result<Self, RobustError> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(RobustError::InvalidSet(format!(
                "load scale {scale} must be finite and nonnegative"
            )));
        }
        let lower = scenario.load().to_vec();
        let upper = lower.iter().map(|l| l * (1.0 + scale)).collect();
        Self::new(lower, upper)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
}

#[derive(Debug, Clone)]
pub struct RobustOutcome {
    pub schedule: Schedule,
    /// Worst-case cost over the price ball.
    pub objective: f64,
    /// Cost of the schedule at the scenario's own prices.
    pub cost: CostBreakdown,
    pub solution: NormAugmentedSolution,
}

/// Maps the scheduling variables to the per-step grid energy vector.
fn grid_energy_map(scenario: &Scenario, problem: &SchedulingLp) -> NormMap {
    let mut rows = vec![Vec::new(); scenario.horizon_steps()];
    for (k, &(t, _)) in problem.cells.iter().enumerate() {
        rows[t].push((k, (1.0 + scenario.waste()[t]) * scenario.step_hours()));
    }
    NormMap::new(rows)
}

/// Per-step grid energy of a schedule, the vector the price ball acts on.
pub fn grid_energy(scenario: &Scenario, schedule: &Schedule) -> Vec<f64> {
    schedule
        .step_totals()
        .iter()
        .enumerate()
        .map(|(t, y)| (1.0 + scenario.waste()[t]) * scenario.step_hours() * y)
        .collect()
}

/// `center . v + r ||v||` for the schedule's grid energy `v`.
pub fn worst_case_cost(scenario: &Scenario, schedule: &Schedule, ball: &PriceBall) -> f64 {
    let v = grid_energy(scenario, schedule);
    let linear: f64 = ball.center.iter().zip(&v).map(|(p, e)| p * e).sum();
    linear + ball.radius * v.iter().map(|e| e * e).sum::<f64>().sqrt()
}

pub fn optimize_robust_price(
    scenario: &Scenario,
    ball: &PriceBall,
) -> Result<RobustOutcome, RobustError> {
    optimize_robust_price_with(scenario, ball, &SolverOptions::default())
}

pub fn optimize_robust_price_with(
    scenario: &Scenario,
    ball: &PriceBall,
    opts: &SolverOptions,
) -> Result<RobustOutcome, RobustError> {
    if ball.center.len() != scenario.horizon_steps() {
        return Err(ModelError::ShapeMismatch {
            what: "price ball center",
            expected: scenario.horizon_steps(),
            got: ball.center.len(),
        }
        .into());
    }
    let report = check_feasibility(scenario);
    if !report.feasible {
        return Err(RobustError::InfeasibleScenario(Box::new(report)));
    }
    let problem = SchedulingLp::build_with_prices(scenario, &ball.center);
    let map = grid_energy_map(scenario, &problem);
    let solution = match solve_norm_augmented_with(&problem.lp, ball.radius, &map, opts) {
        Ok(s) => s,
        Err(SolverError::CutLimitExceeded { best }) => {
            let schedule = problem.schedule(scenario, &best.x, Method::RobustPrice);
            return Err(RobustError::CutLimitExceeded {
                best,
                schedule: Box::new(schedule),
            });
        }
        Err(e) => return Err(RobustError::Solver(e)),
    };
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(RobustError::InfeasibleScenario(Box::new(report))),
        LpStatus::Unbounded => {
            return Err(RobustError::Solver(SolverError::NumericalFailure(
                "bounded scheduling problem reported unbounded".into(),
            )))
        }
    }
    let schedule = problem.schedule(scenario, &solution.x, Method::RobustPrice);
    let cost = evaluate_cost(&schedule, scenario)?;
    Ok(RobustOutcome {
        objective: solution.objective_value,
        schedule,
        cost,
        solution,
    })
}

/// Copy of the scenario with every load replaced by the interval's upper end.
pub fn robustify_load(
    scenario: &Scenario,
    interval: &LoadInterval,
) -> Result<Scenario, RobustError> {
    Ok(scenario.with_load(interval.upper.clone())?)
}

/// [`robustify_load`] followed by [`optimize_robust_price`] on the result.
/// The returned schedule is tagged [`Method::RobustLoad`] and its cost is
/// evaluated against the worst-case-load scenario.
pub fn optimize_robust_both(
    scenario: &Scenario,
    ball: &PriceBall,
    interval: &LoadInterval,
) -> Result<RobustOutcome, RobustError> {
    optimize_robust_both_with(scenario, ball, interval, &SolverOptions::default())
}

pub fn optimize_robust_both_with(
    scenario: &Scenario,
    ball: &PriceBall,
    interval: &LoadInterval,
    opts: &SolverOptions,
) -> Result<RobustOutcome, RobustError> {
    let worst = robustify_load(scenario, interval)?;
    let mut out = optimize_robust_price_with(&worst, ball, opts)?;
    out.schedule.method = Method::RobustLoad;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_schedule, ScenarioBuilder};
    use crate::nominal::optimize_nominal;
    use proptest::prelude::*;

    fn spreading(load: f64) -> Scenario {
        ScenarioBuilder::new("spread", 2)
            .vehicle(0, 1, load)
            .prices(vec![1.0, 1.0])
            .uniform_waste(0.0)
            .build()
            .unwrap()
    }

    /// Scan of the split `(y, L - y)` with `0 <= y <= min(s, L)`.
    fn scan(load: f64, radius: f64) -> (f64, f64) {
        let steps = 600_000;
        (0..=steps)
            .map(|k| {
                let y = load * k as f64 / steps as f64;
                let z = load - y;
                (y, y + z + radius * (y * y + z * z).sqrt())
            })
            .filter(|(y, _)| *y <= 7.0 && load - y <= 7.0)
            .fold(
                (f64::NAN, f64::INFINITY),
                |a, p| if p.1 < a.1 { p } else { a },
            )
    }

    #[test]
    fn spreading_instance_unit_radius() {
        let (y, best) = scan(6.0, 1.0);
        assert!((y - 3.0).abs() < 1e-4);
        let expected = 6.0 + 3.0 * 2f64.sqrt();
        assert!((best - expected).abs() < 1e-9);

        let sc = spreading(6.0);
        let out = optimize_robust_price(&sc, &PriceBall::around(&sc, 1.0).unwrap()).unwrap();
        let totals = out.schedule.step_totals();
        assert!((totals[0] - 3.0).abs() < 1e-4 && (totals[1] - 3.0).abs() < 1e-4);
        assert!((out.objective - expected).abs() < 1e-6);
        assert_eq!(out.schedule.method, Method::RobustPrice);
    }

    #[test]
    fn spreading_instance_huge_radius() {
        let (y, _) = scan(6.0, 1e6);
        assert!((y - 3.0).abs() < 1e-4);
        let sc = spreading(6.0);
        let out = optimize_robust_price(&sc, &PriceBall::around(&sc, 1e6).unwrap()).unwrap();
        let totals = out.schedule.step_totals();
        assert!((totals[0] - 3.0).abs() < 1e-4 && (totals[1] - 3.0).abs() < 1e-4);
        let expected = 6.0 + 1e6 * 18f64.sqrt();
        assert!((out.objective - expected).abs() <= 1e-6 * expected);
    }

    #[test]
    fn zero_radius_matches_nominal() {
        let sc = ScenarioBuilder::new("z", 3)
            .vehicle(0, 2, 9.0)
            .vehicle(1, 2, 4.0)
            .prices(vec![0.3, 0.1, 0.2])
            .build()
            .unwrap();
        let nominal = optimize_nominal(&sc).unwrap();
        let robust = optimize_robust_price(&sc, &PriceBall::around(&sc, 0.0).unwrap()).unwrap();
        let rel = (robust.objective - nominal.cost.total_cost).abs() / nominal.cost.total_cost;
        assert!(rel <= 1e-6);
    }

    #[test]
    fn worst_case_cost_matches_solver_objective() {
        let sc = ScenarioBuilder::new("w", 3)
            .vehicle(0, 2, 11.0)
            .vehicle(0, 1, 6.0)
            .prices(vec![0.5, 0.1, 0.3])
            .build()
            .unwrap();
        let ball = PriceBall::around(&sc, 0.2).unwrap();
        let out = optimize_robust_price(&sc, &ball).unwrap();
        let direct = worst_case_cost(&sc, &out.schedule, &ball);
        assert!((direct - out.objective).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn robustify_substitutes_upper_end() {
        let sc = ScenarioBuilder::new("r", 2)
            .vehicle(0, 1, 5.0)
            .build()
            .unwrap();
        let out = robustify_load(&sc, &LoadInterval::new(vec![4.0], vec![8.0]).unwrap()).unwrap();
        assert_eq!(out.load(), &[8.0]);
        assert_eq!(out.prices(), sc.prices());
        assert_eq!(out.occupancy(), sc.occupancy());

        let same = LoadInterval::new(sc.load().to_vec(), sc.load().to_vec()).unwrap();
        assert_eq!(robustify_load(&sc, &same).unwrap(), sc);
    }

    #[test]
    fn robustify_can_produce_infeasible_scenario() {
        let sc = ScenarioBuilder::new("r", 2)
            .vehicle(0, 1, 5.0)
            .build()
            .unwrap();
        let worst =
            robustify_load(&sc, &LoadInterval::new(vec![5.0], vec![15.0]).unwrap()).unwrap();
        let report = check_feasibility(&worst);
        assert!(!report.feasible);
        assert!((report.per_vehicle_slack[0] + 1.0).abs() < 1e-12);
        let ball = PriceBall::around(&sc, 0.0).unwrap();
        let interval = LoadInterval::new(vec![5.0], vec![15.0]).unwrap();
        assert!(matches!(
            optimize_robust_both(&sc, &ball, &interval),
            Err(RobustError::InfeasibleScenario(_))
        ));
    }

    #[test]
    fn interval_shape_and_order_are_checked() {
        assert!(matches!(
            LoadInterval::new(vec![1.0], vec![1.0, 2.0]),
            Err(RobustError::Model(ModelError::ShapeMismatch { .. }))
        ));
        assert!(LoadInterval::new(vec![3.0], vec![2.0]).is_err());
        assert!(LoadInterval::new(vec![-1.0], vec![2.0]).is_err());
        assert!(PriceBall::new(vec![1.0], -0.5).is_err());
        let sc = ScenarioBuilder::new("r", 2)
            .vehicle(0, 1, 5.0)
            .build()
            .unwrap();
        assert!(robustify_load(&sc, &LoadInterval::new(vec![], vec![]).unwrap()).is_err());
        let short_ball = PriceBall::new(vec![1.0], 0.1).unwrap();
        assert!(optimize_robust_price(&sc, &short_ball).is_err());
    }

    #[test]
    fn both_reduces_to_nominal_when_degenerate() {
        let sc = ScenarioBuilder::new("d", 3)
            .vehicle(0, 2, 9.0)
            .vehicle(1, 2, 4.0)
            .prices(vec![0.3, 0.1, 0.2])
            .build()
            .unwrap();
        let nominal = optimize_nominal(&sc).unwrap();
        let ball = PriceBall::around(&sc, 0.0).unwrap();
        let interval = LoadInterval::scaled(&sc, 0.0).unwrap();
        let both = optimize_robust_both(&sc, &ball, &interval).unwrap();
        assert!((both.objective - nominal.cost.total_cost).abs() <= 1e-6 * nominal.cost.total_cost);
        assert_eq!(both.schedule.method, Method::RobustLoad);
    }

    #[test]
    fn larger_loads_cost_more_at_flat_positive_prices() {
        let sc = ScenarioBuilder::new("f", 3)
            .vehicle(0, 2, 6.0)
            .vehicle(1, 2, 4.0)
            .prices(vec![0.2; 3])
            .uniform_waste(0.05)
            .build()
            .unwrap();
        let ball = PriceBall::around(&sc, 0.0).unwrap();
        let interval = LoadInterval::new(vec![6.0, 4.0], vec![7.0, 5.0]).unwrap();
        let both = optimize_robust_both(&sc, &ball, &interval).unwrap();
        let nominal = optimize_nominal(&sc).unwrap();
        let expected = 0.2 * 1.05 * 12.0;
        assert!((both.objective - expected).abs() <= 1e-8);
        assert!(both.objective > nominal.cost.total_cost);
    }

    #[test]
    fn both_on_spreading_instance_matches_price_case() {
        let sc = spreading(4.0);
        let ball = PriceBall::around(&sc, 1.0).unwrap();
        let interval = LoadInterval::new(vec![4.0], vec![6.0]).unwrap();
        let out = optimize_robust_both(&sc, &ball, &interval).unwrap();
        assert!((out.objective - (6.0 + 3.0 * 2f64.sqrt())).abs() < 1e-6);
    }

    fn arb_scenario() -> impl Strategy<Value = Scenario> {
        (2usize..6, 1usize..5).prop_flat_map(|(t, n)| {
            (
                proptest::collection::vec((0..t, 0..t, 0.0f64..1.0), n),
                proptest::collection::vec(0.01f64..1.0, t),
            )
                .prop_map(move |(vehicles, prices)| {
                    let mut b = ScenarioBuilder::new("p", t).prices(prices);
                    for (a, d, frac) in vehicles {
                        let (a, d) = (a.min(d), a.max(d));
                        // at most 90% of the socket capacity of the window
                        b = b.vehicle(a, d, 0.9 * frac * 7.0 * (d - a + 1) as f64);
                    }
                    b.build().unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn objective_nondecreasing_in_radius(sc in arb_scenario()) {
            let mut prev = f64::NEG_INFINITY;
            for r in [0.0, 0.1, 1.0, 10.0] {
                let out = optimize_robust_price(&sc, &PriceBall::around(&sc, r).unwrap()).unwrap();
                prop_assert!(out.objective >= prev - 1e-6 * prev.abs().max(1.0));
                prop_assert!(validate_schedule(&out.schedule, &sc).unwrap().is_feasible());
                prev = out.objective;
            }
        }

        #[test]
        fn cost_nondecreasing_in_upper_load(sc in arb_scenario(), grow in 0.0f64..0.1) {
            let ball = PriceBall::around(&sc, 0.5).unwrap();
            let small = LoadInterval::scaled(&sc, 0.0).unwrap();
            let large = LoadInterval::scaled(&sc, grow).unwrap();
            let a = optimize_robust_both(&sc, &ball, &small).unwrap();
            let b = optimize_robust_both(&sc, &ball, &large).unwrap();
            prop_assert!(b.objective >= a.objective - 1e-6 * a.objective.abs().max(1.0));
            let worst = robustify_load(&sc, &large).unwrap();
            prop_assert!(validate_schedule(&b.schedule, &worst).unwrap().is_feasible());
        }
    }
}
