//! Linear programs in equality form and a bounded revised simplex.
//!
//! Problems are stated as
//!
//! ```text
//! maximize  cᵀx   subject to  A x = b,  x_j ≥ 0 or x_j free
//! ```
//!
//! The solver keeps a dense LU factorisation of the basis, applies
//! product-form eta updates between refactorisations, and refactors every
//! [`REFACTOR_INTERVAL`] pivots. Pricing is Dantzig's rule with a switch to
//! Bland's rule after a run of degenerate pivots, so identical input always
//! produces an identical pivot sequence. In phase two a run of degenerate
//! pivots first triggers a small deterministic shift of the right-hand side;
//! the shift is removed at optimality and any primal infeasibility it leaves
//! is repaired with dual simplex pivots.
//!
//! [`Simplex`] is resumable: after an optimal solve, columns can be appended
//! with [`Simplex::add_column`] and [`Simplex::solve`] continues from the
//! current basis. Column-generation callers rely on this.

use crate::dense::{Lu, Mat};
use crate::error::{Result, SolverError};

pub const REFACTOR_INTERVAL: usize = 64;
pub const DEFAULT_PIVOT_LIMIT: usize = 1_000_000;

const PIVOT_TOL: f64 = 1e-9;
const OPTIMALITY_TOL: f64 = 1e-10;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 5_000;
const DEGENERATE_RUN_BEFORE_SHIFT: usize = 10;
const MAX_SHIFTS_PER_SOLVE: usize = 4;
const SHIFT_SCALE: f64 = 1e-7;
const FEASIBILITY_TOL: f64 = 1e-9;
const PRICING_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    NonNegative,
    Free,
}

/// `maximize cᵀx  s.t.  A x = b` with per-variable lower bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub bounds: Vec<Bound>,
    pub rhs: Vec<f64>,
    /// Constraint coefficients as `(row, column, value)`.
    pub triplets: Vec<(usize, usize, f64)>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self { objective: Vec::new(), bounds: Vec::new(), rhs: Vec::new(), triplets: Vec::new() }
    }

    pub fn add_var(&mut self, cost: f64, bound: Bound) -> usize {
        self.objective.push(cost);
        self.bounds.push(bound);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.rhs.len();
        self.rhs.push(rhs);
        self.triplets
            .extend(coeffs.iter().filter(|(_, v)| *v != 0.0).map(|&(c, v)| (row, c, v)));
        row
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.len() != self.objective.len() {
            return Err(SolverError::Malformed(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                self.objective.len()
            )));
        }
        if let Some(i) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(SolverError::Malformed(format!("objective coefficient {i} is not finite")));
        }
        if let Some(i) = self.rhs.iter().position(|c| !c.is_finite()) {
            return Err(SolverError::Malformed(format!("right-hand side {i} is not finite")));
        }
        for &(r, c, v) in &self.triplets {
            if r >= self.num_rows() || c >= self.num_vars() {
                return Err(SolverError::Malformed(format!("entry ({r}, {c}) out of range")));
            }
            if !v.is_finite() {
                return Err(SolverError::Malformed(format!("entry ({r}, {c}) is not finite")));
            }
        }
        Ok(())
    }

    /// `max_i |(A x − b)_i|`
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.num_rows()];
        for &(r, c, v) in &self.triplets {
            ax[r] += v * x[c];
        }
        ax.iter().zip(&self.rhs).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Default for LinearProgram {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSolution {
    pub status: Status,
    /// Primal values in the caller's variable order (or block order for SDPs).
    pub values: Vec<f64>,
    pub objective: f64,
    /// `|bᵀy − cᵀx|` evaluated on the returned primal/dual pair.
    pub gap: f64,
    pub primal_residual: f64,
    /// Dual values, one per equality constraint.
    pub duals: Vec<f64>,
    /// Largest violation of dual feasibility (positive reduced cost) at exit.
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

impl SolverSolution {
    /// Turns non-optimal statuses into errors.
    pub fn into_optimal(self) -> Result<Self> {
        match self.status {
            Status::Optimal => Ok(self),
            Status::Infeasible => Err(SolverError::Infeasible { residual: self.primal_residual }),
            Status::MaxIterations => Err(SolverError::IterationLimit {
                limit: self.iterations,
                gap: self.gap,
                residual: self.primal_residual,
            }),
        }
    }
}

/// Solves `lp` to optimality with primal residual and gap at most `tol`.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<SolverSolution> {
    let mut simplex = Simplex::new(lp)?;
    simplex.solve(tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Artificial,
    /// Column of an original variable; `negated` marks the negative half of a
    /// split free variable.
    Structural { var: usize, negated: bool },
}

#[derive(Debug, Clone)]
struct Eta {
    row: usize,
    column: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

/// Resumable bounded revised simplex.
#[derive(Debug, Clone)]
pub struct Simplex {
    m: usize,
    num_vars: usize,
    columns: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    kind: Vec<ColKind>,
    row_sign: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    basic_pos: Vec<Option<usize>>,
    x_b: Vec<f64>,
    lu: Option<Lu>,
    etas: Vec<Eta>,
    phase: Phase,
    iterations: usize,
    pivot_limit: usize,
    solve_start: usize,
    degenerate_run: usize,
    /// Shifted right-hand side `b + Bε` while a degeneracy shift is active.
    shifted_b: Option<Vec<f64>>,
    shifts: usize,
    price_start: usize,
}

impl Simplex {
    pub fn new(lp: &LinearProgram) -> Result<Self> {
        lp.validate()?;
        let m = lp.num_rows();
        let row_sign: Vec<f64> = lp.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = lp.rhs.iter().zip(&row_sign).map(|(b, s)| b * s).collect();

        let mut by_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_vars()];
        for &(r, c, v) in &lp.triplets {
            by_var[c].push((r, v * row_sign[r]));
        }
        for col in &mut by_var {
            col.sort_by_key(|&(r, _)| r);
            merge_duplicates(col);
        }

        let mut s = Simplex {
            m,
            num_vars: lp.num_vars(),
            columns: Vec::new(),
            cost: Vec::new(),
            kind: Vec::new(),
            row_sign,
            b,
            basis: Vec::with_capacity(m),
            basic_pos: Vec::new(),
            x_b: Vec::new(),
            lu: None,
            etas: Vec::new(),
            phase: Phase::One,
            iterations: 0,
            pivot_limit: DEFAULT_PIVOT_LIMIT,
            solve_start: 0,
            degenerate_run: 0,
            shifted_b: None,
            shifts: 0,
            price_start: 0,
        };
        for i in 0..m {
            s.push_column(vec![(i, 1.0)], 0.0, ColKind::Artificial);
            s.basis.push(i);
            s.basic_pos[i] = Some(i);
        }
        for (var, col) in by_var.into_iter().enumerate() {
            let cost = lp.objective[var];
            if lp.bounds[var] == Bound::Free {
                let neg: Vec<(usize, f64)> = col.iter().map(|&(r, v)| (r, -v)).collect();
                s.push_column(col, cost, ColKind::Structural { var, negated: false });
                s.push_column(neg, -cost, ColKind::Structural { var, negated: true });
            } else {
                s.push_column(col, cost, ColKind::Structural { var, negated: false });
            }
        }
        s.x_b = s.b.clone();
        s.refactor()?;
        Ok(s)
    }

    /// Pivot limit for each call to [`Simplex::solve`].
    pub fn with_pivot_limit(mut self, limit: usize) -> Self {
        self.pivot_limit = limit;
        self
    }

    fn push_column(&mut self, col: Vec<(usize, f64)>, cost: f64, kind: ColKind) {
        self.columns.push(col);
        self.cost.push(cost);
        self.kind.push(kind);
        self.basic_pos.push(None);
    }

    /// Appends a non-negative variable. Entries use the caller's row
    /// orientation. Returns the new variable index.
    pub fn add_column(&mut self, entries: &[(usize, f64)], cost: f64) -> Result<usize> {
        let mut col = Vec::with_capacity(entries.len());
        for &(r, v) in entries {
            if r >= self.m || !v.is_finite() {
                return Err(SolverError::Malformed(format!("column entry ({r}, {v}) invalid")));
            }
            if v != 0.0 {
                col.push((r, v * self.row_sign[r]));
            }
        }
        col.sort_by_key(|&(r, _)| r);
        merge_duplicates(&mut col);
        let var = self.num_vars;
        self.num_vars += 1;
        self.push_column(col, cost, ColKind::Structural { var, negated: false });
        Ok(var)
    }

    /// Appends `count` equality rows with right-hand side 0 on which every
    /// existing variable has coefficient 0; later columns may use them. A
    /// fresh artificial holds each row in the basis at value 0, so the
    /// current basis stays primal and dual feasible. Returns the new rows.
    pub fn add_rows(&mut self, count: usize) -> Result<std::ops::Range<usize>> {
        let start = self.m;
        for r in start..start + count {
            self.m += 1;
            self.b.push(0.0);
            self.row_sign.push(1.0);
            if let Some(shifted) = &mut self.shifted_b {
                shifted.push(0.0);
            }
            let j = self.columns.len();
            self.push_column(vec![(r, 1.0)], 0.0, ColKind::Artificial);
            self.basis.push(j);
            self.basic_pos[j] = Some(r);
            self.x_b.push(0.0);
        }
        self.refactor()?;
        Ok(start..self.m)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut dense = Mat::zeros(m);
        for (pos, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.columns[j] {
                dense[(r, pos)] = v;
            }
        }
        let lu = Lu::factor(&dense, 1e-13)
            .ok_or_else(|| SolverError::Numerical("basis matrix became singular".into()))?;
        self.x_b = lu.solve(self.shifted_b.as_ref().unwrap_or(&self.b));
        self.lu = Some(lu);
        self.etas.clear();
        Ok(())
    }

    fn ftran(&self, col: &[(usize, f64)]) -> Vec<f64> {
        let mut dense = vec![0.0; self.m];
        for &(r, v) in col {
            dense[r] = v;
        }
        let mut w = self.lu.as_ref().expect("factorised").solve(&dense);
        for eta in &self.etas {
            let pivot = eta.column[eta.row];
            let wr = w[eta.row] / pivot;
            if wr != 0.0 {
                for (i, a) in eta.column.iter().enumerate() {
                    if i != eta.row {
                        w[i] -= a * wr;
                    }
                }
            }
            w[eta.row] = wr;
        }
        w
    }

    fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        for eta in self.etas.iter().rev() {
            let dot: f64 = eta.column.iter().zip(&c).map(|(a, v)| a * v).sum();
            let cr = c[eta.row];
            // only the pivot component changes: (c_r − Σ_{i≠r} α_i c_i) / α_r
            c[eta.row] = (cr - (dot - eta.column[eta.row] * cr)) / eta.column[eta.row];
        }
        self.lu.as_ref().expect("factorised").solve_transpose(&c)
    }

    fn phase_cost(&self, j: usize) -> f64 {
        match (self.phase, self.kind[j]) {
            (Phase::One, ColKind::Artificial) => -1.0,
            (Phase::One, _) => 0.0,
            (Phase::Two, _) => self.cost[j],
        }
    }

    fn eligible(&self, j: usize) -> bool {
        self.basic_pos[j].is_none() && !(self.phase == Phase::Two && self.kind[j] == ColKind::Artificial)
    }

    fn reduced_cost(&self, y: &[f64], j: usize) -> f64 {
        self.phase_cost(j) - self.columns[j].iter().map(|&(r, v)| y[r] * v).sum::<f64>()
    }

    fn duals(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.phase_cost(j)).collect();
        self.btran(&cb)
    }

    /// Lowest-index column with positive reduced cost.
    fn price_bland(&mut self, y: &[f64]) -> Option<(usize, f64)> {
        (0..self.columns.len())
            .filter(|&j| self.eligible(j))
            .map(|j| (j, self.reduced_cost(y, j)))
            .find(|&(_, d)| d > OPTIMALITY_TOL)
    }

    /// Dantzig pricing over chunks of columns starting where the last scan
    /// stopped; the best column of the first chunk holding any candidate.
    fn price_partial(&mut self, y: &[f64]) -> Option<(usize, f64)> {
        let n = self.columns.len();
        let chunk = (n / 8).max(PRICING_CHUNK).min(n);
        let mut scanned = 0;
        let mut j = self.price_start % n.max(1);
        while scanned < n {
            let mut best: Option<(usize, f64)> = None;
            for _ in 0..chunk.min(n - scanned) {
                if self.eligible(j) {
                    let d = self.reduced_cost(y, j);
                    if d > OPTIMALITY_TOL && best.is_none_or(|b| d > b.1) {
                        best = Some((j, d));
                    }
                }
                j = (j + 1) % n;
                scanned += 1;
            }
            if best.is_some() {
                self.price_start = j;
                return best;
            }
        }
        None
    }

    /// Runs the current phase to optimality. Returns `Ok(false)` if the pivot
    /// limit was reached.
    fn run_phase(&mut self) -> Result<bool> {
        loop {
            if self.phase == Phase::Two
                && self.degenerate_run >= DEGENERATE_RUN_BEFORE_SHIFT
                && self.shifted_b.is_none()
                && self.shifts < MAX_SHIFTS_PER_SOLVE
            {
                self.shift_rhs();
            }
            let y = self.duals();
            let bland = self.degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
            let entering = if bland { self.price_bland(&y) } else { self.price_partial(&y) };
            let Some((j, _)) = entering else {
                return Ok(true);
            };
            if self.iterations - self.solve_start >= self.pivot_limit {
                return Ok(false);
            }

            let alpha = self.ftran(&self.columns[j]);
            let mut leave: Option<(usize, f64, f64)> = None;
            for i in 0..self.m {
                let a = alpha[i];
                let fixed_at_zero =
                    self.phase == Phase::Two && self.kind[self.basis[i]] == ColKind::Artificial;
                let ratio = if a > PIVOT_TOL {
                    self.x_b[i].max(0.0) / a
                } else if a < -PIVOT_TOL && fixed_at_zero {
                    0.0
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((li, lr, la)) => {
                        if ratio < lr - 1e-12 {
                            true
                        } else if ratio <= lr + 1e-12 {
                            if bland {
                                self.basis[i] < self.basis[li]
                            } else {
                                a.abs() > la
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((i, ratio, a.abs()));
                }
            }
            let Some((r, theta, _)) = leave else {
                return match self.kind[j] {
                    ColKind::Structural { var, .. } => Err(SolverError::Unbounded { variable: var }),
                    ColKind::Artificial => {
                        Err(SolverError::Numerical("artificial direction unbounded".into()))
                    }
                };
            };

            for i in 0..self.m {
                self.x_b[i] -= theta * alpha[i];
            }
            self.x_b[r] = theta;
            let old = self.basis[r];
            self.basic_pos[old] = None;
            self.basis[r] = j;
            self.basic_pos[j] = Some(r);
            self.iterations += 1;
            if theta <= 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            self.etas.push(Eta { row: r, column: alpha });
            if self.etas.len() >= REFACTOR_INTERVAL {
                self.refactor()?;
            }
        }
    }

    /// Moves every non-artificial basic variable up by a small distinct
    /// amount, i.e. solves with `b + Bε` until [`Simplex::remove_shift`].
    fn shift_rhs(&mut self) {
        let mut shifted = self.shifted_b.clone().unwrap_or_else(|| self.b.clone());
        for (pos, &j) in self.basis.iter().enumerate() {
            if self.kind[j] == ColKind::Artificial {
                continue;
            }
            let spread = ((pos as u64).wrapping_mul(2_654_435_761) % 1024) as f64 / 1024.0;
            let eps = SHIFT_SCALE * (1.0 + spread) * (1.0 + self.x_b[pos].abs());
            for &(r, v) in &self.columns[j] {
                shifted[r] += eps * v;
            }
            self.x_b[pos] += eps;
        }
        self.shifted_b = Some(shifted);
        self.shifts += 1;
        self.degenerate_run = 0;
    }

    /// Position of the most infeasible basic variable, with the direction
    /// it must move (`−1`: raise a negative value, `+1`: lower a positive
    /// artificial).
    fn most_infeasible(&self) -> Option<(usize, f64)> {
        let mut worst: Option<(usize, f64, f64)> = None;
        for (pos, &j) in self.basis.iter().enumerate() {
            let x = self.x_b[pos];
            let (violation, sigma) = if x < -FEASIBILITY_TOL {
                (-x, -1.0)
            } else if self.kind[j] == ColKind::Artificial && x > FEASIBILITY_TOL {
                (x, 1.0)
            } else {
                continue;
            };
            if worst.is_none_or(|w| violation > w.1) {
                worst = Some((pos, violation, sigma));
            }
        }
        worst.map(|w| (w.0, w.2))
    }

    /// Dual simplex pivots from a dual-feasible basis until the basic
    /// values are feasible. Returns `Ok(false)` at the pivot limit.
    fn dual_repair(&mut self) -> Result<bool> {
        while let Some((r, sigma)) = self.most_infeasible() {
            if self.iterations - self.solve_start >= self.pivot_limit {
                return Ok(false);
            }
            let mut unit = vec![0.0; self.m];
            unit[r] = 1.0;
            let rho = self.btran(&unit);
            let y = self.duals();
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.columns.len() {
                if !self.eligible(j) {
                    continue;
                }
                let a: f64 = self.columns[j].iter().map(|&(i, v)| rho[i] * v).sum();
                if sigma * a <= PIVOT_TOL {
                    continue;
                }
                let ratio = (-self.reduced_cost(&y, j)).max(0.0) / a.abs();
                let better = match entering {
                    None => true,
                    Some((_, best, best_a)) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && a.abs() > best_a),
                };
                if better {
                    entering = Some((j, ratio, a.abs()));
                }
            }
            let Some((j, _, _)) = entering else {
                return Err(SolverError::Numerical(format!(
                    "dual repair found no entering column for row {r} (value {:.3e})",
                    self.x_b[r]
                )));
            };
            let alpha = self.ftran(&self.columns[j]);
            let theta = self.x_b[r] / alpha[r];
            for i in 0..self.m {
                self.x_b[i] -= theta * alpha[i];
            }
            self.x_b[r] = theta;
            let old = self.basis[r];
            self.basic_pos[old] = None;
            self.basis[r] = j;
            self.basic_pos[j] = Some(r);
            self.iterations += 1;
            self.etas.push(Eta { row: r, column: alpha });
            if self.etas.len() >= REFACTOR_INTERVAL {
                self.refactor()?;
            }
        }
        Ok(true)
    }

    /// Phase two to optimality, removing any degeneracy shift on the way.
    fn run_phase_two(&mut self) -> Result<bool> {
        loop {
            if !self.run_phase()? {
                return Ok(false);
            }
            if self.shifted_b.take().is_none() {
                return Ok(true);
            }
            self.refactor()?;
            if !self.dual_repair()? {
                return Ok(false);
            }
        }
    }

    fn infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.x_b)
            .filter(|(&j, _)| self.kind[j] == ColKind::Artificial)
            .map(|(_, &x)| x.max(0.0))
            .sum()
    }

    /// Solves (or resumes) to optimality.
    pub fn solve(&mut self, tol: f64) -> Result<SolverSolution> {
        self.solve_start = self.iterations;
        self.shifts = 0;
        self.degenerate_run = 0;
        if self.phase == Phase::One {
            if !self.run_phase()? {
                return Ok(self.extract(Status::MaxIterations));
            }
            let scale = 1.0 + self.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let infeas = self.infeasibility();
            if infeas > tol.max(1e-9) * scale {
                let mut sol = self.extract(Status::Infeasible);
                sol.primal_residual = sol.primal_residual.max(infeas);
                return Ok(sol);
            }
            self.phase = Phase::Two;
            self.degenerate_run = 0;
        }
        if !self.run_phase_two()? {
            return Ok(self.extract(Status::MaxIterations));
        }
        self.refactor()?;
        let mut sol = self.extract(Status::Optimal);
        if sol.gap > tol || sol.primal_residual > tol || sol.dual_infeasibility > tol {
            // One more pass from a fresh factorisation usually clears drift.
            self.run_phase_two()?;
            self.refactor()?;
            sol = self.extract(Status::Optimal);
            if sol.gap > tol || sol.primal_residual > tol || sol.dual_infeasibility > tol {
                return Err(SolverError::Numerical(format!(
                    "could not certify optimality: gap {:.3e}, residual {:.3e}, dual infeasibility {:.3e}",
                    sol.gap, sol.primal_residual, sol.dual_infeasibility
                )));
            }
        }
        Ok(sol)
    }

    /// Dual values in the caller's row orientation.
    pub fn current_duals(&self) -> Vec<f64> {
        self.duals().iter().zip(&self.row_sign).map(|(y, s)| y * s).collect()
    }

    fn extract(&self, status: Status) -> SolverSolution {
        let mut values = vec![0.0; self.num_vars];
        for (pos, &j) in self.basis.iter().enumerate() {
            if let ColKind::Structural { var, negated } = self.kind[j] {
                values[var] += if negated { -self.x_b[pos] } else { self.x_b[pos] };
            }
        }
        let mut objective = 0.0;
        let mut ax = vec![0.0; self.m];
        let mut seen = vec![false; self.num_vars];
        for (j, col) in self.columns.iter().enumerate() {
            if let ColKind::Structural { var, negated } = self.kind[j] {
                if negated {
                    continue;
                }
                let x = values[var];
                if !seen[var] {
                    objective += self.cost[j] * x;
                    seen[var] = true;
                }
                for &(r, v) in col {
                    ax[r] += v * x;
                }
            }
        }
        let primal_residual = ax.iter().zip(&self.b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let y = self.duals();
        let dual_objective: f64 = y.iter().zip(&self.b).map(|(y, b)| y * b).sum();
        let dual_infeasibility = if self.phase == Phase::Two {
            (0..self.columns.len())
                .filter(|&j| self.kind[j] != ColKind::Artificial)
                .map(|j| self.reduced_cost(&y, j))
                .fold(0.0f64, f64::max)
        } else {
            f64::INFINITY
        };
        SolverSolution {
            status,
            values,
            objective,
            gap: (dual_objective - objective).abs(),
            primal_residual,
            duals: y.iter().zip(&self.row_sign).map(|(y, s)| y * s).collect(),
            dual_infeasibility,
            iterations: self.iterations,
        }
    }
}

fn merge_duplicates(col: &mut Vec<(usize, f64)>) {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(col.len());
    for &(r, v) in col.iter() {
        match out.last_mut() {
            Some((lr, lv)) if *lr == r => *lv += v,
            _ => out.push((r, v)),
        }
    }
    out.retain(|&(_, v)| v != 0.0);
    *col = out;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_upper_bound() {
        // max v  s.t.  v + s = 0.5
        let mut lp = LinearProgram::new();
        let v = lp.add_var(1.0, Bound::NonNegative);
        let s = lp.add_var(0.0, Bound::NonNegative);
        lp.add_row(&[(v, 1.0), (s, 1.0)], 0.5);
        let sol = solve_lp(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 0.5).abs() < 1e-12);
        assert!((sol.values[v] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn free_variable_goes_negative() {
        // max -x  s.t.  x - y = -2, y >= 0, x free  ->  x = -2, y = 0
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, Bound::Free);
        let y = lp.add_var(0.0, Bound::NonNegative);
        lp.add_row(&[(x, 1.0), (y, -1.0)], -2.0);
        let sol = solve_lp(&lp, 1e-9).unwrap();
        assert!((sol.values[x] + 2.0).abs() < 1e-12);
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, Bound::NonNegative);
        lp.add_row(&[(x, 1.0)], -1.0);
        let sol = solve_lp(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
        assert!(sol.into_optimal().is_err());
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, Bound::NonNegative);
        let y = lp.add_var(0.0, Bound::NonNegative);
        lp.add_row(&[(x, 1.0), (y, -1.0)], 1.0);
        assert!(matches!(solve_lp(&lp, 1e-9), Err(SolverError::Unbounded { .. })));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        // x + y = 1 stated twice, plus a scaled copy
        let mut lp = LinearProgram::new();
        let x = lp.add_var(2.0, Bound::NonNegative);
        let y = lp.add_var(1.0, Bound::NonNegative);
        lp.add_row(&[(x, 1.0), (y, 1.0)], 1.0);
        lp.add_row(&[(x, 1.0), (y, 1.0)], 1.0);
        lp.add_row(&[(x, -3.0), (y, -3.0)], -3.0);
        let sol = solve_lp(&lp, 1e-9).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }

    /// Beale's example cycles under plain Dantzig pricing.
    #[test]
    fn degenerate_cycling_example() {
        let mut lp = LinearProgram::new();
        let x: Vec<usize> = [0.75, -20.0, 0.5, -6.0].iter().map(|&c| lp.add_var(c, Bound::NonNegative)).collect();
        let s: Vec<usize> = (0..3).map(|_| lp.add_var(0.0, Bound::NonNegative)).collect();
        lp.add_row(&[(x[0], 0.25), (x[1], -8.0), (x[2], -1.0), (x[3], 9.0), (s[0], 1.0)], 0.0);
        lp.add_row(&[(x[0], 0.5), (x[1], -12.0), (x[2], -0.5), (x[3], 3.0), (s[1], 1.0)], 0.0);
        lp.add_row(&[(x[2], 1.0), (s[2], 1.0)], 1.0);
        let sol = solve_lp(&lp, 1e-9).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 1.25).abs() < 1e-9, "{}", sol.objective);
        assert!(sol.primal_residual < 1e-9);
        assert!(sol.values.iter().all(|&v| v >= -1e-9));
    }

    #[test]
    fn pivot_limit_applies_per_solve() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, Bound::NonNegative);
        let y = lp.add_var(1.0, Bound::NonNegative);
        lp.add_row(&[(x, 1.0)], 1.0);
        lp.add_row(&[(y, 1.0)], 1.0);
        let mut simplex = Simplex::new(&lp).unwrap().with_pivot_limit(2);
        assert_eq!(simplex.solve(1e-9).unwrap().status, Status::Optimal);
        simplex.add_column(&[(0, 1.0)], 2.0).unwrap();
        simplex.add_column(&[(1, 1.0)], 2.0).unwrap();
        let sol = simplex.solve(1e-9).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 4.0).abs() < 1e-12);
        assert!(simplex.iterations() > 2);
    }

    #[test]
    fn resume_after_adding_rows() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, Bound::NonNegative);
        let s = lp.add_var(0.0, Bound::NonNegative);
        lp.add_row(&[(x, 1.0), (s, 1.0)], 1.0);
        let mut simplex = Simplex::new(&lp).unwrap();
        assert!((simplex.solve(1e-9).unwrap().objective - 1.0).abs() < 1e-12);
        let rows = simplex.add_rows(1).unwrap();
        assert_eq!(rows, 1..2);
        // z pays 2 but needs w = z on the new row, and w costs 0.5
        let z = simplex.add_column(&[(0, 1.0), (1, 1.0)], 2.0).unwrap();
        let w = simplex.add_column(&[(1, -1.0)], -0.5).unwrap();
        let sol = simplex.solve(1e-9).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 1.5).abs() < 1e-12);
        assert!((sol.values[z] - 1.0).abs() < 1e-12 && (sol.values[w] - 1.0).abs() < 1e-12);
        assert_eq!(sol.duals.len(), 2);
    }

    #[test]
    fn resume_after_adding_column() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, Bound::NonNegative);
        lp.add_row(&[(x, 2.0)], 1.0);
        let mut simplex = Simplex::new(&lp).unwrap();
        let first = simplex.solve(1e-9).unwrap();
        assert!((first.objective - 0.5).abs() < 1e-12);
        // a cheaper way to satisfy the row with a better objective
        simplex.add_column(&[(0, 1.0)], 3.0).unwrap();
        let second = simplex.solve(1e-9).unwrap();
        assert!((second.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_entries_rejected() {
        let mut lp = LinearProgram::new();
        lp.add_var(1.0, Bound::NonNegative);
        lp.triplets.push((3, 0, 1.0));
        assert!(matches!(solve_lp(&lp, 1e-9), Err(SolverError::Malformed(_))));
    }
}
