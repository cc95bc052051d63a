//! Random feasible scenarios and raw file corpora for testing without
//! external data.
//!
//! Arrivals and window lengths are uniform, demands are uniform up to the
//! window's socket capacity, and prices follow a noisy two-peak daily
//! profile. Loads that the station cannot serve jointly are cut back to a
//! max-flow allocation, so every generated scenario is feasible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Scenario, DEFAULT_CAPACITY_KW, DEFAULT_SOCKET_KW, DEFAULT_WASTE};
use crate::nominal::{transport_network, NetworkLayout};
use crate::solver::max_flow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Vehicles per scenario are drawn uniformly from `1..=max_vehicles`.
    pub max_vehicles: usize,
    pub horizon_steps: usize,
    pub step_hours: f64,
    pub capacity_kw: f64,
    pub socket_kw: f64,
    pub waste: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(max_vehicles: usize, horizon_steps: usize, seed: u64) -> Self {
        Self {
            max_vehicles,
            horizon_steps,
            step_hours: 1.0,
            capacity_kw: DEFAULT_CAPACITY_KW,
            socket_kw: DEFAULT_SOCKET_KW,
            waste: DEFAULT_WASTE,
            seed,
        }
    }
}

/// Price per kWh at fractional hour-of-day `h`: morning and evening peaks
/// over a night trough.
fn price_profile(h: f64) -> f64 {
    let bump = |center: f64, width: f64| (-((h - center) / width).powi(2)).exp();
    0.045 + 0.035 * bump(9.0, 2.5) + 0.05 * bump(19.0, 2.5)
}

fn random_prices(rng: &mut ChaCha8Rng, horizon: usize, step_hours: f64) -> Vec<f64> {
    let scale = rng.random_range(0.8..1.25);
    (0..horizon)
        .map(|t| {
            let h = ((t as f64 + 0.5) * step_hours) % 24.0;
            (scale * price_profile(h) * rng.random_range(0.9..1.1)).max(0.001)
        })
        .collect()
}

/// Cuts every load to what a max flow on the transportation network
/// delivers to that vehicle.
pub fn make_feasible(scenario: &Scenario) -> Scenario {
    let (net, layout) = transport_network(scenario);
    let flow = max_flow(&net).expect("transport network is well formed");
    let mut load = scenario.load().to_vec();
    for (arc, f) in net.arcs.iter().zip(&flow.flow) {
        if arc.from == NetworkLayout::SOURCE {
            let i = arc.to - layout.vehicle(0);
            load[i] = load[i].min(*f);
        }
    }
    scenario.with_load(load).expect("shape unchanged")
}

/// One random feasible scenario with exactly `num_vehicles` vehicles.
pub fn random_scenario_with(
    rng: &mut ChaCha8Rng,
    id: impl Into<String>,
    num_vehicles: usize,
    cfg: &SynthConfig,
) -> Scenario {
    let t_max = cfg.horizon_steps;
    let mut occupancy = vec![vec![false; num_vehicles]; t_max];
    let mut load = Vec::with_capacity(num_vehicles);
    for i in 0..num_vehicles {
        let first = rng.random_range(0..t_max);
        let last = rng.random_range(first..t_max);
        for row in &mut occupancy[first..=last] {
            row[i] = true;
        }
        let window_cap = cfg.socket_kw * (last - first + 1) as f64;
        load.push(rng.random_range(0.0..=1.0) * window_cap);
    }
    let scenario = Scenario::new(
        id,
        cfg.step_hours,
        occupancy,
        load,
        vec![cfg.capacity_kw; t_max],
        vec![cfg.socket_kw; t_max],
        vec![cfg.waste; t_max],
        random_prices(rng, t_max, cfg.step_hours),
    )
    .expect("generated scenario is valid");
    make_feasible(&scenario)
}

/// `count` scenarios with ids `synthetic-0001`, ... from one seeded stream.
pub fn random_scenarios(count: usize, cfg: &SynthConfig) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..count)
        .map(|k| {
            let n = if cfg.max_vehicles == 0 {
                0
            } else {
                rng.random_range(1..=cfg.max_vehicles)
            };
            random_scenario_with(&mut rng, format!("synthetic-{:04}", k + 1), n, cfg)
        })
        .collect()
}

/// Session and price files in the ingest formats, covering `days`
/// consecutive days from 2021-01-01. Sessions stay within their arrival day
/// and request at most half the socket capacity of their stay, so the
/// default station can serve them.
pub fn random_corpus(days: usize, max_vehicles: usize, seed: u64) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = chrono::NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date");
    let mut sessions = String::from("session_id,arrival,departure,energy_kwh\n");
    let mut prices = String::from("date,hour,price\n");
    let mut next_id = 0usize;
    for d in 0..days {
        let date = start + chrono::Days::new(d as u64);
        let scale = rng.random_range(0.8..1.25);
        for h in 0..24 {
            let p = scale * price_profile(h as f64 + 0.5) * rng.random_range(0.9..1.1) * 1000.0;
            prices.push_str(&format!("{date},{h},{p:.2}\n"));
        }
        let n = rng.random_range(1..=max_vehicles.max(1));
        for _ in 0..n {
            let arrival_min = rng.random_range(5 * 60..20 * 60);
            let stay_min = rng.random_range(45..(24 * 60 - arrival_min).min(10 * 60));
            let energy =
                0.5 * DEFAULT_SOCKET_KW * stay_min as f64 / 60.0 * rng.random_range(0.1..1.0);
            let fmt = |m: i32| format!("{date}T{:02}:{:02}:00", m / 60, m % 60);
            next_id += 1;
            sessions.push_str(&format!(
                "s{next_id:06},{},{},{energy:.3}\n",
                fmt(arrival_min),
                fmt(arrival_min + stay_min),
            ));
        }
    }
    (sessions, prices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nominal::check_feasibility;

    #[test]
    fn generated_scenarios_are_feasible_and_reproducible() {
        let cfg = SynthConfig::new(12, 8, 7);
        let a = random_scenarios(30, &cfg);
        let b = random_scenarios(30, &cfg);
        assert_eq!(a, b);
        for sc in &a {
            assert!(check_feasibility(sc).feasible, "{}", sc.scenario_id());
            assert!((1..=12).contains(&sc.num_vehicles()));
            assert!(sc.prices().iter().all(|p| *p > 0.0));
        }
    }

    #[test]
    fn tight_station_gets_its_loads_cut() {
        let cfg = SynthConfig {
            capacity_kw: 5.0,
            ..SynthConfig::new(20, 4, 3)
        };
        for sc in random_scenarios(10, &cfg) {
            let report = check_feasibility(&sc);
            assert!(report.feasible);
            assert!(report.total_demand <= 5.0 * 4.0 + 1e-9);
        }
    }

    #[test]
    fn corpus_parses() {
        let (sessions, prices) = random_corpus(3, 5, 1);
        let s = crate::ingest::parse_sessions(sessions.as_bytes()).unwrap();
        let p = crate::ingest::parse_prices(prices.as_bytes(), crate::ingest::PriceUnit::PerMwh)
            .unwrap();
        assert_eq!(p.len(), 72);
        assert!((3..=15).contains(&s.len()));
        assert!(s.iter().all(|r| r.arrival.date() == r.departure.date()));
    }
}
