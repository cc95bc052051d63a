//! Single-commodity flows on capacitated networks.
//!
//! `solve_min_cost_flow` uses successive shortest paths with Bellman-Ford
//! (queue based, so negative arc costs are fine as long as the network has no
//! negative cycle). `max_flow` is Edmonds-Karp. Both operate on `f64`
//! capacities; each augmentation saturates a residual arc or meets the
//! requested value, so they terminate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowNetwork {
    pub num_nodes: usize,
    pub arcs: Vec<Arc>,
    pub source: usize,
    pub sink: usize,
}

impl FlowNetwork {
    pub fn new(num_nodes: usize, source: usize, sink: usize) -> Self {
        Self {
            num_nodes,
            arcs: Vec::new(),
            source,
            sink,
        }
    }

    /// Adds an arc and returns its index.
    pub fn add_arc(&mut self, from: usize, to: usize, capacity: f64, cost: f64) -> usize {
        self.arcs.push(Arc {
            from,
            to,
            capacity,
            cost,
        });
        self.arcs.len() - 1
    }

    fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_nodes;
        if self.source >= n || self.sink >= n || self.source == self.sink {
            return Err(SolverError::InvalidProblem(
                "source and sink must be distinct nodes of the network".into(),
            ));
        }
        for (k, a) in self.arcs.iter().enumerate() {
            if a.from >= n || a.to >= n {
                return Err(SolverError::InvalidProblem(format!(
                    "arc {k} references a node outside the network"
                )));
            }
            if a.capacity.is_nan() || a.capacity < 0.0 || !a.cost.is_finite() {
                return Err(SolverError::InvalidProblem(format!(
                    "arc {k} has capacity {} and cost {}",
                    a.capacity, a.cost
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowStatus {
    Optimal,
    /// The requested value exceeds the maximum flow.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    pub status: FlowStatus,
    /// Flow on each arc, in the order of `FlowNetwork::arcs`.
    pub flow: Vec<f64>,
    /// Value routed from source to sink.
    pub value: f64,
    pub cost: f64,
}

struct Edge {
    to: usize,
    residual: f64,
    cost: f64,
}

/// Residual graph; edge `2k` is arc `k`, edge `2k + 1` its reverse.
struct Residual {
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
    eps: f64,
}

impl Residual {
    fn new(net: &FlowNetwork) -> Self {
        let mut edges = Vec::with_capacity(2 * net.arcs.len());
        let mut adjacency = vec![Vec::new(); net.num_nodes];
        let mut scale: f64 = 1.0;
        for a in &net.arcs {
            adjacency[a.from].push(edges.len());
            edges.push(Edge {
                to: a.to,
                residual: a.capacity,
                cost: a.cost,
            });
            adjacency[a.to].push(edges.len());
            edges.push(Edge {
                to: a.from,
                residual: 0.0,
                cost: -a.cost,
            });
            if a.capacity.is_finite() {
                scale = scale.max(a.capacity);
            }
        }
        Self {
            edges,
            adjacency,
            eps: 1e-12 * scale,
        }
    }

    fn augment(&mut self, path: &[usize], amount: f64) {
        for &e in path {
            self.edges[e].residual -= amount;
            self.edges[e ^ 1].residual += amount;
        }
    }

    fn bottleneck(&self, path: &[usize]) -> f64 {
        path.iter()
            .map(|&e| self.edges[e].residual)
            .fold(f64::INFINITY, f64::min)
    }

    fn trace(&self, pred: &[Option<usize>], sink: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut v = sink;
        while let Some(e) = pred[v] {
            path.push(e);
            v = self.edges[e ^ 1].to;
        }
        path.reverse();
        path
    }

    /// Cheapest residual path by Bellman-Ford; `Err` on a negative cycle.
    fn shortest_path(&self, source: usize, sink: usize) -> Result<Option<Vec<usize>>, SolverError> {
        let n = self.adjacency.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut in_queue = vec![false; n];
        let mut hops = vec![0usize; n];
        let mut queue = VecDeque::new();
        dist[source] = 0.0;
        queue.push_back(source);
        in_queue[source] = true;
        while let Some(u) = queue.pop_front() {
            in_queue[u] = false;
            for &e in &self.adjacency[u] {
                let edge = &self.edges[e];
                if edge.residual <= self.eps {
                    continue;
                }
                let cand = dist[u] + edge.cost;
                if cand < dist[edge.to] - 1e-12 * (1.0 + cand.abs()) {
                    dist[edge.to] = cand;
                    pred[edge.to] = Some(e);
                    hops[edge.to] = hops[u] + 1;
                    if hops[edge.to] >= n {
                        return Err(SolverError::InvalidProblem(
                            "network contains a negative-cost cycle".into(),
                        ));
                    }
                    if !in_queue[edge.to] {
                        in_queue[edge.to] = true;
                        queue.push_back(edge.to);
                    }
                }
            }
        }
        Ok(dist[sink].is_finite().then(|| self.trace(&pred, sink)))
    }

    fn bfs_path(&self, source: usize, sink: usize) -> Option<Vec<usize>> {
        let n = self.adjacency.len();
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[source] = true;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adjacency[u] {
                let edge = &self.edges[e];
                if edge.residual > self.eps && !seen[edge.to] {
                    seen[edge.to] = true;
                    pred[edge.to] = Some(e);
                    if edge.to == sink {
                        return Some(self.trace(&pred, sink));
                    }
                    queue.push_back(edge.to);
                }
            }
        }
        None
    }

    fn solution(&self, net: &FlowNetwork, status: FlowStatus, value: f64) -> FlowSolution {
        let flow: Vec<f64> = (0..net.arcs.len())
            .map(|k| self.edges[2 * k + 1].residual)
            .collect();
        let cost = flow.iter().zip(&net.arcs).map(|(f, a)| f * a.cost).sum();
        FlowSolution {
            status,
            flow,
            value,
            cost,
        }
    }
}

/// Cheapest flow of exactly `required_flow` units from source to sink.
///
/// Returns `FlowStatus::Infeasible` (with the maximum flow found) when the
/// network cannot carry the requested value.
pub fn solve_min_cost_flow(
    net: &FlowNetwork,
    required_flow: f64,
) -> Result<FlowSolution, SolverError> {
    net.validate()?;
    if !(required_flow.is_finite() && required_flow >= 0.0) {
        return Err(SolverError::InvalidProblem(format!(
            "required flow {required_flow} must be finite and nonnegative"
        )));
    }
    let mut g = Residual::new(net);
    let tol = g.eps.max(1e-12 * required_flow);
    let mut sent = 0.0;
    while required_flow - sent > tol {
        let Some(path) = g.shortest_path(net.source, net.sink)? else {
            return Ok(g.solution(net, FlowStatus::Infeasible, sent));
        };
        let amount = g.bottleneck(&path).min(required_flow - sent);
        g.augment(&path, amount);
        sent += amount;
    }
    Ok(g.solution(net, FlowStatus::Optimal, sent))
}

/// Maximum flow from source to sink (arc costs are ignored for routing but
/// the cost of the returned flow is reported).
pub fn max_flow(net: &FlowNetwork) -> Result<FlowSolution, SolverError> {
    net.validate()?;
    let mut g = Residual::new(net);
    let mut value = 0.0;
    while let Some(path) = g.bfs_path(net.source, net.sink) {
        let amount = g.bottleneck(&path);
        if amount.is_infinite() {
            return Err(SolverError::InvalidProblem(
                "source-sink path of unbounded capacity".into(),
            ));
        }
        g.augment(&path, amount);
        value += amount;
    }
    Ok(g.solution(net, FlowStatus::Optimal, value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arc() {
        let mut net = FlowNetwork::new(2, 0, 1);
        net.add_arc(0, 1, 10.0, 2.0);
        let sol = solve_min_cost_flow(&net, 5.0).unwrap();
        assert_eq!(sol.status, FlowStatus::Optimal);
        assert_eq!(sol.cost, 10.0);
        assert_eq!(sol.flow, vec![5.0]);
    }

    fn parallel() -> FlowNetwork {
        let mut net = FlowNetwork::new(2, 0, 1);
        net.add_arc(0, 1, 5.0, 1.0);
        net.add_arc(0, 1, 5.0, 3.0);
        net
    }

    #[test]
    fn parallel_arcs_match_split_enumeration() {
        // Oracle: every split (a, 8 - a) on a 1/1000 grid within capacities.
        let oracle = (0..=8000)
            .map(|k| k as f64 / 1000.0)
            .filter(|a| *a <= 5.0 && 8.0 - a <= 5.0)
            .map(|a| a * 1.0 + (8.0 - a) * 3.0)
            .fold(f64::INFINITY, f64::min);
        assert!((oracle - 14.0).abs() < 1e-12);
        let sol = solve_min_cost_flow(&parallel(), 8.0).unwrap();
        assert_eq!(sol.status, FlowStatus::Optimal);
        assert!((sol.cost - oracle).abs() < 1e-12);
    }

    #[test]
    fn over_capacity_is_infeasible() {
        let mut net = FlowNetwork::new(2, 0, 1);
        net.add_arc(0, 1, 10.0, 1.0);
        let sol = solve_min_cost_flow(&net, 20.0).unwrap();
        assert_eq!(sol.status, FlowStatus::Infeasible);
        assert_eq!(sol.value, 10.0);
    }

    #[test]
    fn rerouting_through_reverse_arcs() {
        // Greedy on the cheap middle arc must be undone to reach value 2.
        let mut net = FlowNetwork::new(4, 0, 3);
        net.add_arc(0, 1, 1.0, 1.0);
        net.add_arc(0, 2, 1.0, 2.0);
        net.add_arc(1, 2, 1.0, 0.0);
        net.add_arc(1, 3, 1.0, 2.0);
        net.add_arc(2, 3, 1.0, 1.0);
        let one = solve_min_cost_flow(&net, 1.0).unwrap();
        assert_eq!(one.cost, 2.0);
        let two = solve_min_cost_flow(&net, 2.0).unwrap();
        assert_eq!(two.status, FlowStatus::Optimal);
        assert!((two.cost - 6.0).abs() < 1e-12);
        assert!(two.flow[2].abs() < 1e-12);
    }

    #[test]
    fn negative_costs_without_cycles() {
        let mut net = FlowNetwork::new(3, 0, 2);
        net.add_arc(0, 1, 4.0, -1.0);
        net.add_arc(1, 2, 4.0, 0.5);
        net.add_arc(0, 2, 4.0, 0.0);
        let sol = solve_min_cost_flow(&net, 6.0).unwrap();
        assert!((sol.cost - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn max_flow_of_bipartite_network() {
        // two vehicles sharing one step with capacity 8
        let mut net = FlowNetwork::new(5, 0, 4);
        net.add_arc(0, 1, 5.0, 0.0);
        net.add_arc(0, 2, 5.0, 0.0);
        net.add_arc(1, 3, 7.0, 0.0);
        net.add_arc(2, 3, 7.0, 0.0);
        net.add_arc(3, 4, 8.0, 0.0);
        let sol = max_flow(&net).unwrap();
        assert!((sol.value - 8.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed_networks() {
        let mut net = FlowNetwork::new(2, 0, 1);
        net.add_arc(0, 1, -1.0, 0.0);
        assert!(solve_min_cost_flow(&net, 1.0).is_err());
        let mut net = FlowNetwork::new(3, 0, 2);
        net.add_arc(0, 1, 1.0, -1.0);
        net.add_arc(1, 0, 1.0, -1.0);
        net.add_arc(1, 2, 1.0, 0.0);
        assert!(matches!(
            solve_min_cost_flow(&net, 1.0),
            Err(SolverError::InvalidProblem(_))
        ));
    }
}
