//! Minimizes `c'x + r * ||M x||_2` over the feasible set of an LP.
//!
//! The norm is replaced by an epigraph variable `tau >= 0` and outer
//! approximated by supporting hyperplanes `u_k . (M x) <= tau`, where
//! `u_k = M x_k / ||M x_k||` is the gradient at the previous iterate, plus a
//! second cut at the best point on the segment between that iterate and the
//! incumbent. Every relaxation objective is a lower bound on the true
//! optimum. A second lower bound comes from the master's cut multipliers:
//! their combination of cut directions, scaled to unit length, prices the
//! norm term linearly and the resulting LP value is again valid. Every
//! iterate gives an upper bound, so the stopping gap is an optimality
//! certificate.

use serde::{Deserialize, Serialize};

use super::lp::{solve_lp_with, LinearProgram, LpStatus, Row};
use super::{SolverError, SolverOptions};

/// Linear map `x -> M x`, one sparse row per output coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormMap {
    pub rows: Vec<Row>,
}

impl NormMap {
    pub fn new(rows: Vec<Row>) -> Self {
        Self { rows }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    pub fn norm_at(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormAugmentedSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// `c'x + r ||M x||` at `x`.
    pub objective_value: f64,
    /// Best relaxation value; no feasible point does better.
    pub lower_bound: f64,
    /// `(objective_value - lower_bound) / max(1, |objective_value|)`.
    pub relative_gap: f64,
    pub norm_value: f64,
    pub cuts: usize,
}

pub fn solve_norm_augmented(
    lp: &LinearProgram,
    radius: f64,
    norm_map: &NormMap,
) -> Result<NormAugmentedSolution, SolverError> {
    solve_norm_augmented_with(lp, radius, norm_map, &SolverOptions::default())
}

pub fn solve_norm_augmented_with(
    lp: &LinearProgram,
    radius: f64,
    norm_map: &NormMap,
    opts: &SolverOptions,
) -> Result<NormAugmentedSolution, SolverError> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(SolverError::InvalidProblem(format!(
            "radius {radius} must be finite and nonnegative"
        )));
    }
    let n = lp.num_vars();
    if norm_map
        .rows
        .iter()
        .flatten()
        .any(|&(j, a)| j >= n || !a.is_finite())
    {
        return Err(SolverError::InvalidProblem(
            "norm map references a variable outside the problem".into(),
        ));
    }

    if radius == 0.0 {
        let sol = solve_lp_with(lp, opts)?;
        let norm_value = if sol.is_optimal() {
            norm_map.norm_at(&sol.x)
        } else {
            f64::NAN
        };
        let lower_bound = sol
            .certificate
            .as_ref()
            .map_or(sol.objective_value, |c| c.dual_objective);
        return Ok(NormAugmentedSolution {
            status: sol.status,
            objective_value: sol.objective_value,
            relative_gap: if sol.is_optimal() {
                (sol.objective_value - lower_bound).abs() / sol.objective_value.abs().max(1.0)
            } else {
                f64::NAN
            },
            lower_bound,
            x: sol.x,
            norm_value,
            cuts: 0,
        });
    }

    let tau = n;
    let mut master = lp.clone();
    master.objective.push(radius);
    master.lower.push(0.0);
    master.upper.push(f64::INFINITY);

    let evaluate = |x: &[f64]| {
        let norm_value = norm_map.norm_at(x);
        (lp.objective_at(x) + radius * norm_value, norm_value)
    };
    let first_cut_row = lp.ineq_rows.len();
    let mut directions: Vec<Vec<f64>> = Vec::new();
    let mut best: Option<NormAugmentedSolution> = None;
    let mut best_lower = f64::NEG_INFINITY;
    let mut cuts = 0;
    loop {
        let sol = solve_lp_with(&master, opts)?;
        if !sol.is_optimal() {
            return Ok(NormAugmentedSolution {
                status: sol.status,
                x: Vec::new(),
                objective_value: sol.objective_value,
                lower_bound: sol.objective_value,
                relative_gap: f64::NAN,
                norm_value: f64::NAN,
                cuts,
            });
        }
        let x = sol.x[..n].to_vec();
        best_lower = best_lower.max(sol.objective_value);

        // The relaxation's cut multipliers average the cut directions into
        // some w with ||w|| <= 1. Any w in the unit ball bounds the optimum
        // from below by min c'x + r w.(M x), and rescaling w onto the sphere
        // removes most of the slack of the averaged directions.
        if let Some(w) = sol
            .certificate
            .as_ref()
            .and_then(|c| unit_direction(&c.ineq[first_cut_row..], &directions))
        {
            let mut priced = lp.clone();
            for (row, wt) in norm_map.rows.iter().zip(&w) {
                for &(j, a) in row {
                    priced.objective[j] += radius * wt * a;
                }
            }
            let bound = solve_lp_with(&priced, opts)?;
            if bound.is_optimal() {
                let value = bound
                    .certificate
                    .as_ref()
                    .map_or(bound.objective_value, |c| {
                        c.dual_objective.min(bound.objective_value)
                    });
                best_lower = best_lower.max(value);
            }
        }
        let lower = best_lower;

        // Best point on the segment from the incumbent to the relaxation
        // point: feasible by convexity, and a cut there stabilizes the
        // zig-zag of plain Kelley iterates.
        let segment_best: Option<Vec<f64>> = best
            .as_ref()
            .map(|b| line_search(lp, norm_map, radius, &b.x, &x))
            .filter(|p| p.iter().zip(&x).any(|(a, c)| (a - c).abs() > 1e-12));
        for candidate in std::iter::once(&x).chain(segment_best.as_ref()) {
            let (upper, norm_value) = evaluate(candidate);
            if best.as_ref().is_none_or(|b| upper < b.objective_value) {
                best = Some(NormAugmentedSolution {
                    status: LpStatus::Optimal,
                    x: candidate.clone(),
                    objective_value: upper,
                    lower_bound: lower,
                    relative_gap: 0.0,
                    norm_value,
                    cuts,
                });
            }
        }
        let incumbent = best.as_mut().expect("set above");
        incumbent.lower_bound = lower;
        incumbent.cuts = cuts;
        incumbent.relative_gap = ((incumbent.objective_value - lower)
            / incumbent.objective_value.abs().max(1.0))
        .max(0.0);
        if incumbent.relative_gap <= opts.cut_gap_tol {
            return Ok(best.expect("set above"));
        }
        if cuts >= opts.max_cuts {
            return Err(SolverError::CutLimitExceeded {
                best: Box::new(best.expect("set above")),
            });
        }

        for point in std::iter::once(&x).chain(segment_best.as_ref()) {
            if cuts < opts.max_cuts {
                let (row, u) = supporting_cut(norm_map, point, n, tau);
                master.add_le(row, 0.0);
                directions.push(u);
                cuts += 1;
            }
        }
    }
}

/// Minimizer of `c'x + r ||M x||` on the segment `from + a (to - from)`,
/// `a` in `[0, 1]`, by bisection on the monotone derivative.
fn line_search(
    lp: &LinearProgram,
    norm_map: &NormMap,
    radius: f64,
    from: &[f64],
    to: &[f64],
) -> Vec<f64> {
    let d: Vec<f64> = to.iter().zip(from).map(|(a, b)| a - b).collect();
    let slope = lp.objective_at(&d);
    let p = norm_map.apply(from);
    let q = norm_map.apply(&d);
    let pq: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
    let qq: f64 = q.iter().map(|a| a * a).sum();
    let derivative = |a: f64| {
        let norm = p
            .iter()
            .zip(&q)
            .map(|(x, y)| (x + a * y).powi(2))
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            slope + radius * (pq + a * qq) / norm
        } else {
            slope - radius * qq.sqrt()
        }
    };
    let alpha = if derivative(0.0) >= 0.0 {
        0.0
    } else if derivative(1.0) <= 0.0 {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if derivative(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    from.iter().zip(&d).map(|(a, b)| a + alpha * b).collect()
}

/// `u . (M x) - tau <= 0` with `u` the unit gradient of the norm at `point`
/// (the first axis where the norm vanishes).
fn supporting_cut(norm_map: &NormMap, point: &[f64], n: usize, tau: usize) -> (Row, Vec<f64>) {
    let v = norm_map.apply(point);
    let norm_value = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let direction: Vec<f64> = if norm_value > 0.0 {
        v.iter().map(|a| a / norm_value).collect()
    } else {
        let mut e = vec![0.0; v.len()];
        if let Some(first) = e.first_mut() {
            *first = 1.0;
        }
        e
    };
    let mut coeffs = vec![0.0; n];
    for (row, u) in norm_map.rows.iter().zip(&direction) {
        for &(j, a) in row {
            coeffs[j] += u * a;
        }
    }
    let mut cut: Row = coeffs
        .into_iter()
        .enumerate()
        .filter(|(_, a)| *a != 0.0)
        .collect();
    cut.push((tau, -1.0));
    (cut, direction)
}

/// `sum_k mu_k u_k`, normalized; `None` if it vanishes.
fn unit_direction(multipliers: &[f64], directions: &[Vec<f64>]) -> Option<Vec<f64>> {
    let dim = directions.first()?.len();
    let mut w = vec![0.0; dim];
    for (mu, u) in multipliers.iter().zip(directions) {
        for (wi, ui) in w.iter_mut().zip(u) {
            *wi += mu * ui;
        }
    }
    let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
    (norm > 0.0).then(|| w.iter().map(|a| a / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_lp;

    fn segment() -> (LinearProgram, NormMap) {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_eq(vec![(0, 1.0), (1, 1.0)], 6.0);
        (lp, NormMap::new(vec![vec![(0, 1.0)], vec![(1, 1.0)]]))
    }

    /// 1-D scan oracle over the segment `w1 + w2 = 6`, `w >= 0`.
    fn scan(radius: f64) -> (f64, f64) {
        (0..=600_000)
            .map(|k| {
                let w1 = k as f64 * 1e-5;
                let w2 = 6.0 - w1;
                (w1, w1 + w2 + radius * (w1 * w1 + w2 * w2).sqrt())
            })
            .fold(
                (f64::NAN, f64::INFINITY),
                |acc, p| if p.1 < acc.1 { p } else { acc },
            )
    }

    #[test]
    fn zero_radius_is_plain_lp() {
        let (lp, map) = segment();
        let a = solve_norm_augmented(&lp, 0.0, &map).unwrap();
        let b = solve_lp(&lp).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective_value, b.objective_value);
        assert_eq!(a.cuts, 0);
    }

    #[test]
    fn unit_radius_spreads_evenly() {
        let (w1, best) = scan(1.0);
        assert!((w1 - 3.0).abs() < 1e-4);
        let expected = 6.0 + 3.0 * 2f64.sqrt();
        assert!((best - expected).abs() < 1e-9);
        let (lp, map) = segment();
        let sol = solve_norm_augmented(&lp, 1.0, &map).unwrap();
        assert!((sol.x[0] - 3.0).abs() < 1e-4 && (sol.x[1] - 3.0).abs() < 1e-4);
        assert!((sol.objective_value - expected).abs() < 1e-6);
        assert!(sol.lower_bound <= sol.objective_value + 1e-9);
    }

    #[test]
    fn huge_radius_keeps_the_same_point() {
        let (w1, best) = scan(100.0);
        assert!((w1 - 3.0).abs() < 1e-4);
        let (lp, map) = segment();
        let sol = solve_norm_augmented(&lp, 100.0, &map).unwrap();
        assert!((sol.x[0] - 3.0).abs() < 1e-4);
        let expected = 6.0 + 300.0 * 2f64.sqrt();
        assert!((sol.objective_value - expected).abs() <= 1e-6 * expected);
        assert!((best - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn degenerate_norm_point_stops_immediately() {
        // Optimum at x = 0 where the norm vanishes.
        let lp = LinearProgram::new(vec![1.0, 1.0]);
        let map = NormMap::new(vec![vec![(0, 1.0)], vec![(1, 1.0)]]);
        let sol = solve_norm_augmented(&lp, 5.0, &map).unwrap();
        assert_eq!(sol.objective_value, 0.0);
        assert_eq!(sol.cuts, 0);
    }

    #[test]
    fn objective_grows_with_radius() {
        let mut lp =
            LinearProgram::new(vec![3.0, 1.0, 2.0]).with_bounds(vec![0.0; 3], vec![4.0; 3]);
        lp.add_ge(vec![(0, 1.0), (1, 1.0), (2, 1.0)], 7.0);
        let map = NormMap::new(vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(2, 1.0)]]);
        let mut prev = f64::NEG_INFINITY;
        for r in [0.0, 0.1, 1.0, 10.0] {
            let sol = solve_norm_augmented(&lp, r, &map).unwrap();
            assert!(sol.objective_value >= prev - 1e-6 * prev.abs().max(1.0));
            assert!(sol.lower_bound <= sol.objective_value + 1e-9);
            prev = sol.objective_value;
        }
    }

    #[test]
    fn cut_limit_returns_best_iterate() {
        let mut lp = LinearProgram::new(vec![0.0; 3]).with_bounds(vec![0.0; 3], vec![4.0; 3]);
        lp.add_ge(vec![(0, 1.0), (1, 1.0), (2, 1.0)], 7.0);
        let map = NormMap::new(vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(2, 1.0)]]);
        let opts = SolverOptions {
            max_cuts: 1,
            ..SolverOptions::default()
        };
        match solve_norm_augmented_with(&lp, 1.0, &map, &opts) {
            Err(SolverError::CutLimitExceeded { best }) => {
                assert_eq!(best.cuts, 1);
                assert!(best.relative_gap > 1e-6);
                assert_eq!(best.x.len(), 3);
            }
            other => panic!("expected cut limit, got {other:?}"),
        }
    }
}
