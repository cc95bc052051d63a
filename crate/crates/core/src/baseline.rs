//! First-come-first-served allocation.
//!
//! Steps are processed in time order. Within a step, the vehicles present
//! are served by arrival step, ties by vehicle index, and each receives
//! `min(socket_limit, remaining load, remaining station capacity)`.

use serde::{Deserialize, Serialize};

use crate::model::{Method, Scenario, Schedule, FEAS_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcfsOutcome {
    pub schedule: Schedule,
    /// Load left undelivered at the end of the horizon, per vehicle.
    pub shortfall: Vec<f64>,
}

impl FcfsOutcome {
    pub fn has_shortfall(&self) -> bool {
        self.shortfall.iter().any(|s| *s > FEAS_TOL)
    }

    pub fn total_shortfall(&self) -> f64 {
        self.shortfall.iter().sum()
    }
}

pub fn fcfs_schedule(scenario: &Scenario) -> Schedule {
    fcfs_with_report(scenario).schedule
}

pub fn fcfs_with_report(scenario: &Scenario) -> FcfsOutcome {
    let mut schedule = Schedule::zeros(scenario, Method::Fcfs);
    let mut residual_load = scenario.load().to_vec();

    let arrival = |i: usize| scenario.window(i).map_or(usize::MAX, |w| w.first);
    for t in 0..scenario.horizon_steps() {
        let mut queue: Vec<usize> = scenario.present_at(t).collect();
        queue.sort_by_key(|&i| (arrival(i), i));

        let socket = scenario.socket_limit()[t];
        let mut residual_capacity = scenario.capacity()[t];
        for i in queue {
            let x = socket.min(residual_load[i]).min(residual_capacity).max(0.0);
            schedule.allocation[t][i] = x;
            residual_load[i] -= x;
            residual_capacity -= x;
        }
    }
    FcfsOutcome {
        schedule,
        shortfall: residual_load,
    }
}
