//! Bounded-variable primal simplex with a two-phase start and an explicit
//! optimality certificate.
//!
//! The problem is brought to the internal form `min c'z, Az = b, 0 <= z <= u`
//! by shifting, mirroring or splitting each original variable, adding one
//! slack per inequality and one artificial per row that has no usable slack.
//! The dense tableau is refactored from the basis at a fixed cadence and once
//! more before certification, so the reported point never carries the
//! accumulated pivoting error.
//!
//! Pricing is Dantzig's largest-coefficient rule; after a run of degenerate
//! pivots it switches to Bland's smallest-index rule until the objective
//! moves again, which rules out cycling.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{SolverError, SolverOptions};

/// Sparse linear form: `(variable index, coefficient)` pairs.
pub type Row = Vec<(usize, f64)>;

/// `min c'x  s.t.  G x <= h,  E x = b,  lo <= x <= up`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub ineq_rows: Vec<Row>,
    pub ineq_rhs: Vec<f64>,
    pub eq_rows: Vec<Row>,
    pub eq_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// New problem with every variable in `[0, +inf)` and no rows.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            ineq_rows: Vec::new(),
            ineq_rhs: Vec::new(),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, up: f64) {
        self.lower[j] = lo;
        self.upper[j] = up;
    }

    /// Adds `row . x <= rhs`.
    pub fn add_le(&mut self, row: Row, rhs: f64) {
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
    }

    /// Adds `row . x >= rhs`, stored as `-row . x <= -rhs`.
    pub fn add_ge(&mut self, row: Row, rhs: f64) {
        self.add_le(row.into_iter().map(|(j, a)| (j, -a)).collect(), -rhs);
    }

    pub fn add_eq(&mut self, row: Row, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let dot = |row: &Row| row.iter().map(|&(j, a)| a * x[j]).sum::<f64>();
        let mut worst: f64 = 0.0;
        for (row, h) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
            worst = worst.max(dot(row) - h);
        }
        for (row, b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row) - b).abs());
        }
        for ((v, lo), up) in x.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(lo - v).max(v - up);
        }
        worst
    }

    pub(crate) fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        let bad = |msg: String| Err(SolverError::InvalidProblem(msg));
        if self.lower.len() != n || self.upper.len() != n {
            return bad(format!(
                "bounds have lengths {}/{} for {n} variables",
                self.lower.len(),
                self.upper.len()
            ));
        }
        if self.ineq_rows.len() != self.ineq_rhs.len() || self.eq_rows.len() != self.eq_rhs.len() {
            return bad("row and right-hand-side counts differ".into());
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return bad(format!("objective coefficient {j} is not finite"));
        }
        for j in 0..n {
            let (lo, up) = (self.lower[j], self.upper[j]);
            if lo.is_nan()
                || up.is_nan()
                || lo > up
                || lo == f64::INFINITY
                || up == f64::NEG_INFINITY
            {
                return bad(format!("variable {j} has invalid bounds [{lo}, {up}]"));
            }
        }
        for row in self.ineq_rows.iter().chain(&self.eq_rows) {
            for &(j, a) in row {
                if j >= n || !a.is_finite() {
                    return bad(format!("row term ({j}, {a}) is out of range or not finite"));
                }
            }
        }
        if self
            .ineq_rhs
            .iter()
            .chain(&self.eq_rhs)
            .any(|v| !v.is_finite())
        {
            return bad("right-hand side is not finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Lagrange multipliers proving optimality.
///
/// They satisfy `c + G'ineq - E'eq = lower - upper` (up to
/// `stationarity_residual`), with `ineq`, `lower`, `upper` nonnegative, so
/// `dual_objective = -h'ineq + b'eq + lo'lower - up'upper` is a lower bound on
/// every feasible objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub ineq: Vec<f64>,
    pub eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub stationarity_residual: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub certificate: Option<DualCertificate>,
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        let objective_value = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            LpStatus::Optimal => f64::NAN,
        };
        Self {
            status,
            x: Vec::new(),
            objective_value,
            certificate: None,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `lp` with default tolerances.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, SolverError> {
    solve_lp_with(lp, &SolverOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, SolverError> {
    lp.validate()?;
    let mut tableau = Tableau::build(lp, opts);
    tableau.run(lp)
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lo + z`
    Shifted { col: usize, lo: f64 },
    /// `x = up - z`
    Mirrored { col: usize, up: f64 },
    /// `x = z_pos - z_neg`
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColState {
    Basic,
    AtLower,
    AtUpper,
}

enum StepOutcome {
    Optimal,
    Unbounded,
    Moved,
}

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const BLAND_AFTER: usize = 50;
const CERTIFY_ATTEMPTS: usize = 4;

struct Tableau<'o> {
    opts: &'o SolverOptions,
    m: usize,
    ncols: usize,
    /// Internal constraint matrix, never modified after construction.
    a: DMatrix<f64>,
    b: Vec<f64>,
    /// Row sign applied when building the internal row.
    row_sign: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    phase_one_cost: Vec<f64>,
    artificial_from: usize,
    var_map: Vec<VarMap>,
    /// `B^-1 A`, row-major `m x ncols`.
    t: Vec<f64>,
    beta: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
}

impl<'o> Tableau<'o> {
    fn build(lp: &LinearProgram, opts: &'o SolverOptions) -> Self {
        let n_orig = lp.num_vars();
        let mut var_map = Vec::with_capacity(n_orig);
        let mut upper = Vec::new();
        let mut cost = Vec::new();
        for j in 0..n_orig {
            let (lo, up, c) = (lp.lower[j], lp.upper[j], lp.objective[j]);
            let col = upper.len();
            if lo.is_finite() {
                var_map.push(VarMap::Shifted { col, lo });
                upper.push(up - lo);
                cost.push(c);
            } else if up.is_finite() {
                var_map.push(VarMap::Mirrored { col, up });
                upper.push(f64::INFINITY);
                cost.push(-c);
            } else {
                var_map.push(VarMap::Split {
                    pos: col,
                    neg: col + 1,
                });
                upper.extend([f64::INFINITY, f64::INFINITY]);
                cost.extend([c, -c]);
            }
        }
        let n_struct = upper.len();
        let n_ineq = lp.ineq_rows.len();
        let m = n_ineq + lp.eq_rows.len();

        // Internal rows before sign normalisation.
        let mut dense = vec![vec![0.0; n_struct]; m];
        let mut rhs = Vec::with_capacity(m);
        let rows = lp
            .ineq_rows
            .iter()
            .zip(&lp.ineq_rhs)
            .chain(lp.eq_rows.iter().zip(&lp.eq_rhs));
        for (r, (row, &h)) in rows.enumerate() {
            let mut h = h;
            for &(j, a) in row {
                match var_map[j] {
                    VarMap::Shifted { col, lo } => {
                        dense[r][col] += a;
                        h -= a * lo;
                    }
                    VarMap::Mirrored { col, up } => {
                        dense[r][col] -= a;
                        h -= a * up;
                    }
                    VarMap::Split { pos, neg } => {
                        dense[r][pos] += a;
                        dense[r][neg] -= a;
                    }
                }
            }
            rhs.push(h);
        }

        let row_sign: Vec<f64> = rhs
            .iter()
            .map(|&h| if h < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let needs_artificial: Vec<bool> =
            (0..m).map(|r| r >= n_ineq || row_sign[r] < 0.0).collect();
        let n_art = needs_artificial.iter().filter(|&&x| x).count();
        let artificial_from = n_struct + n_ineq;
        let ncols = artificial_from + n_art;

        let mut a = DMatrix::<f64>::zeros(m, ncols);
        let mut basis = vec![0; m];
        let mut next_art = artificial_from;
        for r in 0..m {
            let s = row_sign[r];
            for (j, &v) in dense[r].iter().enumerate() {
                a[(r, j)] = s * v;
            }
            if r < n_ineq {
                a[(r, n_struct + r)] = s;
                basis[r] = n_struct + r;
            }
            if needs_artificial[r] {
                a[(r, next_art)] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
        }
        let b: Vec<f64> = rhs.iter().zip(&row_sign).map(|(h, s)| h * s).collect();

        upper.extend(std::iter::repeat_n(f64::INFINITY, ncols - n_struct));
        cost.extend(std::iter::repeat_n(0.0, ncols - n_struct));
        let mut phase_one_cost = vec![0.0; ncols];
        for c in &mut phase_one_cost[artificial_from..] {
            *c = 1.0;
        }

        let mut state = vec![ColState::AtLower; ncols];
        for &j in &basis {
            state[j] = ColState::Basic;
        }

        Self {
            opts,
            m,
            ncols,
            a,
            b,
            row_sign,
            upper,
            cost,
            phase_one_cost,
            artificial_from,
            var_map,
            t: vec![0.0; m * ncols],
            beta: vec![0.0; m],
            d: vec![0.0; ncols],
            basis,
            state,
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
        }
    }

    fn run(&mut self, lp: &LinearProgram) -> Result<LpSolution, SolverError> {
        if self.artificial_from < self.ncols {
            let c1 = self.phase_one_cost.clone();
            self.refactor(&c1)?;
            match self.optimize(&c1)? {
                StepOutcome::Unbounded => {
                    return Err(SolverError::NumericalFailure(
                        "phase one reported an unbounded ray".into(),
                    ))
                }
                _ => {
                    let infeasibility: f64 = (0..self.m)
                        .filter(|&r| self.basis[r] >= self.artificial_from)
                        .map(|r| self.beta[r].max(0.0))
                        .sum();
                    let scale = 1.0 + self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                    if infeasibility > self.opts.feas_tol * scale {
                        return Ok(LpSolution::without_point(
                            LpStatus::Infeasible,
                            self.iterations,
                        ));
                    }
                }
            }
            for j in self.artificial_from..self.ncols {
                self.upper[j] = 0.0;
                if self.state[j] == ColState::AtUpper {
                    self.state[j] = ColState::AtLower;
                }
            }
        }

        let c2 = self.cost.clone();
        self.refactor(&c2)?;
        let mut last_failure = String::new();
        for _ in 0..CERTIFY_ATTEMPTS {
            match self.optimize(&c2)? {
                StepOutcome::Unbounded => {
                    return Ok(LpSolution::without_point(
                        LpStatus::Unbounded,
                        self.iterations,
                    ))
                }
                StepOutcome::Optimal | StepOutcome::Moved => {}
            }
            self.refactor(&c2)?;
            if self.pricing_candidate(false).is_some() || self.max_basic_infeasibility() > 1e-9 {
                last_failure = "basis not optimal after refactorisation".into();
                continue;
            }
            let x = self.original_point();
            let cert = self.certificate(lp, &x, &c2)?;
            let ok = cert.primal_residual <= self.opts.feas_tol
                && cert.relative_gap <= self.opts.gap_tol
                && cert.stationarity_residual <= self.opts.gap_tol;
            if ok {
                return Ok(LpSolution {
                    status: LpStatus::Optimal,
                    objective_value: lp.objective_at(&x),
                    x,
                    certificate: Some(cert),
                    iterations: self.iterations,
                });
            }
            last_failure = format!(
                "certificate failed: primal residual {:.3e}, gap {:.3e}, stationarity {:.3e}",
                cert.primal_residual, cert.relative_gap, cert.stationarity_residual
            );
            // Tighten the basis with fresh pivots from the refactored tableau.
            self.degenerate_run = BLAND_AFTER;
        }
        Err(SolverError::NumericalFailure(last_failure))
    }

    fn max_basic_infeasibility(&self) -> f64 {
        (0..self.m)
            .map(|r| {
                let u = self.upper[self.basis[r]];
                (-self.beta[r]).max(self.beta[r] - u).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    fn value_of_nonbasic(&self, j: usize) -> f64 {
        match self.state[j] {
            ColState::AtUpper => self.upper[j],
            _ => 0.0,
        }
    }

    /// Recomputes `B^-1 A`, the basic values and the reduced costs for `cost`
    /// from the untouched internal matrix.
    fn refactor(&mut self, cost: &[f64]) -> Result<(), SolverError> {
        self.since_refactor = 0;
        let (m, n) = (self.m, self.ncols);
        let mut rhs = self.b.clone();
        for j in 0..n {
            if self.state[j] == ColState::AtUpper {
                let u = self.upper[j];
                for (r, v) in rhs.iter_mut().enumerate() {
                    *v -= self.a[(r, j)] * u;
                }
            }
        }
        if m == 0 {
            self.d = cost.to_vec();
            return Ok(());
        }
        let bmat = DMatrix::from_fn(m, m, |r, k| self.a[(r, self.basis[k])]);
        let inv = bmat
            .lu()
            .try_inverse()
            .ok_or_else(|| SolverError::NumericalFailure("basis matrix became singular".into()))?;
        let t = &inv * &self.a;
        for r in 0..m {
            for j in 0..n {
                self.t[r * n + j] = t[(r, j)];
            }
        }
        let rhs = nalgebra::DVector::from_vec(rhs);
        let beta = &inv * rhs;
        self.beta = beta.iter().copied().collect();
        for j in 0..n {
            let mut dj = cost[j];
            for r in 0..m {
                dj -= cost[self.basis[r]] * self.t[r * n + j];
            }
            self.d[j] = if self.state[j] == ColState::Basic {
                0.0
            } else {
                dj
            };
        }
        Ok(())
    }

    fn pricing_candidate(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            if self.upper[j] <= 0.0 {
                continue;
            }
            let (score, dir) = match self.state[j] {
                ColState::Basic => continue,
                ColState::AtLower if self.d[j] < -tol => (-self.d[j], 1.0),
                ColState::AtUpper if self.d[j] > tol => (self.d[j], -1.0),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, s, _)| score > s) {
                best = Some((j, score, dir));
            }
        }
        best.map(|(j, _, dir)| (j, dir))
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<StepOutcome, SolverError> {
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(SolverError::NumericalFailure(format!(
                    "iteration limit of {} reached",
                    self.opts.max_iterations
                )));
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor(cost)?;
            }
            match self.step()? {
                StepOutcome::Moved => {}
                other => return Ok(other),
            }
        }
    }

    fn step(&mut self) -> Result<StepOutcome, SolverError> {
        let bland = self.degenerate_run >= BLAND_AFTER;
        let Some((q, dir)) = self.pricing_candidate(bland) else {
            return Ok(StepOutcome::Optimal);
        };
        let n = self.ncols;

        // Ratio test over the basic variables; the entering bound is the
        // initial candidate (a bound flip).
        let mut theta = self.upper[q];
        let mut leave: Option<(usize, ColState)> = None;
        let mut leave_alpha = 0.0;
        for r in 0..self.m {
            let alpha = dir * self.t[r * n + q];
            let var = self.basis[r];
            let (limit, to) = if alpha > PIVOT_TOL {
                ((self.beta[r] / alpha).max(0.0), ColState::AtLower)
            } else if alpha < -PIVOT_TOL && self.upper[var].is_finite() {
                (
                    ((self.upper[var] - self.beta[r]) / -alpha).max(0.0),
                    ColState::AtUpper,
                )
            } else {
                continue;
            };
            let better = match leave {
                None => limit < theta - DEGENERATE_STEP,
                Some(_) if limit < theta - DEGENERATE_STEP => true,
                Some((r0, _)) if limit <= theta + DEGENERATE_STEP => {
                    if bland {
                        var < self.basis[r0]
                    } else {
                        alpha.abs() > leave_alpha
                    }
                }
                Some(_) => false,
            };
            if better {
                theta = theta.min(limit);
                leave = Some((r, to));
                leave_alpha = alpha.abs();
            }
        }
        if theta.is_infinite() {
            return Ok(StepOutcome::Unbounded);
        }

        self.iterations += 1;
        self.since_refactor += 1;
        if theta <= DEGENERATE_STEP {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }

        for r in 0..self.m {
            self.beta[r] -= theta * dir * self.t[r * n + q];
        }
        let entering_value = self.value_of_nonbasic(q) + dir * theta;

        match leave {
            None => {
                self.state[q] = if dir > 0.0 {
                    ColState::AtUpper
                } else {
                    ColState::AtLower
                };
            }
            Some((r, to)) => {
                let leaving = self.basis[r];
                self.pivot(r, q);
                self.state[leaving] = to;
                self.state[q] = ColState::Basic;
                self.basis[r] = q;
                self.beta[r] = entering_value;
            }
        }
        Ok(StepOutcome::Moved)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.ncols;
        let piv = self.t[r * n + q];
        let (before, rest) = self.t.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for chunk in before.chunks_mut(n).chain(after.chunks_mut(n)) {
            let f = chunk[q];
            if f != 0.0 {
                for (v, p) in chunk.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                chunk[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, p) in self.d.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
            self.d[q] = 0.0;
        }
    }

    fn internal_point(&self) -> Vec<f64> {
        let mut z: Vec<f64> = (0..self.ncols).map(|j| self.value_of_nonbasic(j)).collect();
        for r in 0..self.m {
            z[self.basis[r]] = self.beta[r];
        }
        z
    }

    fn original_point(&self) -> Vec<f64> {
        let z = self.internal_point();
        self.var_map
            .iter()
            .map(|m| match *m {
                VarMap::Shifted { col, lo } => lo + z[col],
                VarMap::Mirrored { col, up } => up - z[col],
                VarMap::Split { pos, neg } => z[pos] - z[neg],
            })
            .collect()
    }

    /// Builds the multipliers of the original problem from the internal row
    /// duals `y = B^-T c_B` and measures how well they certify `x`.
    fn certificate(
        &self,
        lp: &LinearProgram,
        x: &[f64],
        cost: &[f64],
    ) -> Result<DualCertificate, SolverError> {
        let m = self.m;
        let y: Vec<f64> = if m == 0 {
            Vec::new()
        } else {
            let bmat = DMatrix::from_fn(m, m, |r, k| self.a[(r, self.basis[k])]);
            let cb = nalgebra::DVector::from_fn(m, |k, _| cost[self.basis[k]]);
            let sol = bmat.transpose().lu().solve(&cb).ok_or_else(|| {
                SolverError::NumericalFailure("basis matrix is singular at certification".into())
            })?;
            sol.iter().copied().collect()
        };
        let n_ineq = lp.ineq_rows.len();
        let signed = |r: usize| self.row_sign[r] * y[r];
        let ineq: Vec<f64> = (0..n_ineq).map(|r| (-signed(r)).max(0.0)).collect();
        let eq: Vec<f64> = (0..lp.eq_rows.len()).map(|k| signed(n_ineq + k)).collect();

        let mut reduced = lp.objective.clone();
        for (row, mu) in lp.ineq_rows.iter().zip(&ineq) {
            for &(j, a) in row {
                reduced[j] += a * mu;
            }
        }
        for (row, nu) in lp.eq_rows.iter().zip(&eq) {
            for &(j, a) in row {
                reduced[j] -= a * nu;
            }
        }
        let n = lp.num_vars();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut stationarity: f64 = 0.0;
        for j in 0..n {
            let rj = reduced[j];
            if rj > 0.0 {
                if lp.lower[j].is_finite() {
                    lower[j] = rj;
                } else {
                    stationarity = stationarity.max(rj);
                }
            } else if rj < 0.0 {
                if lp.upper[j].is_finite() {
                    upper[j] = -rj;
                } else {
                    stationarity = stationarity.max(-rj);
                }
            }
        }
        let scale_c = 1.0 + lp.objective.iter().fold(0.0f64, |a, c| a.max(c.abs()));

        let mut dual_objective = 0.0;
        for (mu, h) in ineq.iter().zip(&lp.ineq_rhs) {
            dual_objective -= mu * h;
        }
        for (nu, b) in eq.iter().zip(&lp.eq_rhs) {
            dual_objective += nu * b;
        }
        for j in 0..n {
            if lower[j] > 0.0 {
                dual_objective += lower[j] * lp.lower[j];
            }
            if upper[j] > 0.0 {
                dual_objective -= upper[j] * lp.upper[j];
            }
        }
        let primal = lp.objective_at(x);
        Ok(DualCertificate {
            relative_gap: (primal - dual_objective).abs() / primal.abs().max(1.0),
            dual_objective,
            primal_residual: lp.primal_residual(x),
            stationarity_residual: stationarity / scale_c,
            ineq,
            eq,
            lower,
            upper,
        })
    }
}
