//! Classical models `Φ_v(M_{a|x}) = Σ_{λ,k} q̃(a,λ|x,k) E_{k|λ}`: search by
//! linear programming over a fixed unitary ensemble, explicit constructions,
//! and the transformations between model forms.

use std::collections::{BTreeMap, HashSet};

use classicality_solvers::{Bound, LinearProgram, Simplex, SolverError, Status};
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, structural, Error, Result};
use crate::linalg::{eig_hermitian, haar_unitary, ComplexMatrix, HermitianBasis, UNITARY_TOL};
use crate::measurements::{depolarize_operator, matrix_from_json, matrix_to_json, rank_one_vector, JsonMatrix, MeasurementSet};

pub const PRUNE_WEIGHT: f64 = 1e-12;
/// Required certified gap of a search.
pub const SEARCH_GAP_TOL: f64 = 1e-7;
const MASTER_TOL: f64 = 1e-9;
const PRICING_TOL: f64 = 1e-9;
const SMOOTHING: f64 = 0.5;
/// Strategy columns a device may collect before it is replaced by its full
/// block of variables `q(λ)`, `q̃(a,λ|x,k)`.
const PROMOTE_AFTER: usize = 3;
/// Rows of the base master per block row allowed; the basis is factorised
/// densely, so the master must stay small.
const ROWS_PER_BLOCK_ROW: usize = 4;
const PROJECTIVE_TOL: f64 = 1e-8;

/// `q̃(a,λ|x,k)` with bases `E_{k|λ} = U_λ|k⟩⟨k|U_λ†`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalModel {
    pub dim: usize,
    pub settings: usize,
    pub outcomes: usize,
    pub v: f64,
    pub devices: Vec<ComplexMatrix>,
    pub weights: Vec<f64>,
    /// `response[λ][x][k][a]`
    pub response: Vec<Vec<Vec<Vec<f64>>>>,
}

impl ClassicalModel {
    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    /// Checks normalisation, response marginals and unitarity.
    pub fn validate(&self) -> Result<()> {
        if self.devices.len() != self.weights.len() || self.devices.len() != self.response.len() {
            return Err(structural("device, weight and response counts differ"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(structural(format!("weights sum to {total}")));
        }
        for (l, u) in self.devices.iter().enumerate() {
            if u.dim() != self.dim {
                return Err(structural(format!("device {l}: dimension {} does not match {}", u.dim(), self.dim)));
            }
            let r = u.unitarity_residual();
            if r > UNITARY_TOL {
                return Err(structural(format!("device {l}: not unitary (residual {r:.3e})")));
            }
            if self.weights[l] < 0.0 {
                return Err(structural(format!("device {l}: negative weight")));
            }
            let resp = &self.response[l];
            if resp.len() != self.settings {
                return Err(structural(format!("device {l}: response has {} settings", resp.len())));
            }
            for (x, per_k) in resp.iter().enumerate() {
                if per_k.len() != self.dim {
                    return Err(structural(format!("device {l}, setting {x}: wrong number of basis elements")));
                }
                for (k, per_a) in per_k.iter().enumerate() {
                    if per_a.len() != self.outcomes || per_a.iter().any(|&p| p < -1e-12) {
                        return Err(structural(format!("device {l}, setting {x}, element {k}: bad response")));
                    }
                    let s: f64 = per_a.iter().sum();
                    if (s - self.weights[l]).abs() > 1e-8 {
                        return Err(structural(format!(
                            "device {l}, setting {x}, element {k}: response sums to {s}, weight is {}",
                            self.weights[l]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `Σ_{λ,k} q̃(a,λ|x,k) E_{k|λ}`
    pub fn operator(&self, x: usize, a: usize) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim);
        for (l, u) in self.devices.iter().enumerate() {
            for k in 0..self.dim {
                let w = self.response[l][x][k][a];
                if w != 0.0 {
                    out.add_assign_scaled(w, &ComplexMatrix::outer(&u.column(k)));
                }
            }
        }
        out
    }

    fn prune(mut self) -> Self {
        let keep: Vec<usize> = (0..self.devices.len()).filter(|&l| self.weights[l] >= PRUNE_WEIGHT).collect();
        self.devices = keep.iter().map(|&l| self.devices[l].clone()).collect();
        self.response = keep.iter().map(|&l| self.response[l].clone()).collect();
        self.weights = keep.iter().map(|&l| self.weights[l]).collect();
        let total: f64 = self.weights.iter().sum();
        for (l, w) in self.weights.iter_mut().enumerate() {
            *w /= total;
            for per_k in &mut self.response[l] {
                for per_a in per_k.iter_mut() {
                    for p in per_a.iter_mut() {
                        *p /= total;
                    }
                }
            }
        }
        self
    }
}

/// `max_{a,x} ‖Φ_v(M_{a|x}) − Σ_{λ,k} q̃(a,λ|x,k) E_{k|λ}‖_max`
pub fn reconstruct(model: &ClassicalModel, m: &MeasurementSet) -> Result<f64> {
    if model.dim != m.dim() || model.settings != m.settings() || model.outcomes != m.outcomes() {
        return Err(structural(format!(
            "model shape (d={}, n={}, o={}) does not match set (d={}, n={}, o={})",
            model.dim,
            model.settings,
            model.outcomes,
            m.dim(),
            m.settings(),
            m.outcomes()
        )));
    }
    let mut worst = 0.0f64;
    for x in 0..m.settings() {
        for a in 0..m.outcomes() {
            let target = depolarize_operator(m.element(x, a), model.v);
            worst = worst.max((&target - &model.operator(x, a)).max_abs());
        }
    }
    Ok(worst)
}

fn check_ensemble(m: &MeasurementSet, unitaries: &[ComplexMatrix]) -> Result<()> {
    if unitaries.is_empty() {
        return Err(invalid("the unitary ensemble is empty"));
    }
    for (l, u) in unitaries.iter().enumerate() {
        if u.dim() != m.dim() {
            return Err(structural(format!("unitary {l}: dimension {} does not match {}", u.dim(), m.dim())));
        }
        let r = u.unitarity_residual();
        if r > UNITARY_TOL {
            return Err(structural(format!("unitary {l}: not unitary (residual {r:.3e})")));
        }
    }
    Ok(())
}

/// The `v = 0` model on the first device: `q̃(a|x,k) = Tr(M_{a|x})/d`.
pub fn trivial_model(m: &MeasurementSet, unitaries: &[ComplexMatrix]) -> Result<ClassicalModel> {
    check_ensemble(m, unitaries)?;
    let d = m.dim();
    let per_x: Vec<Vec<Vec<f64>>> = (0..m.settings())
        .map(|x| {
            let row: Vec<f64> = (0..m.outcomes()).map(|a| m.element(x, a).trace().re / d as f64).collect();
            vec![row; d]
        })
        .collect();
    Ok(ClassicalModel {
        dim: d,
        settings: m.settings(),
        outcomes: m.outcomes(),
        v: 0.0,
        devices: vec![unitaries[0].clone()],
        weights: vec![1.0],
        response: vec![per_x],
    })
}

/// Outcome of a column-generation search.
#[derive(Debug, Clone)]
pub struct SearchReport {
    pub v: f64,
    pub model: ClassicalModel,
    /// Best Lagrangian bound `bᵀy + max(0, largest reduced cost)` over the
    /// priced duals, minus `v`, plus `|bᵀy − v|` at the final master duals:
    /// an upper bound on how far `v` is from the optimum over the ensemble.
    pub certified_gap: f64,
    pub rounds: usize,
    pub columns: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub columns_per_round: usize,
    pub max_rounds: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { columns_per_round: 200, max_rounds: 100_000 }
    }
}

/// Row layout of the master problem: one row per `(a, x, i)` with
/// `a < o − 1` (the last outcome's rows follow from completeness), then
/// `Σ w = 1` and `v + s = 1`.
struct Master {
    n: usize,
    o: usize,
    d2: usize,
}

impl Master {
    fn row(&self, a: usize, x: usize, i: usize) -> usize {
        (x * (self.o - 1) + a) * self.d2 + i
    }

    fn weight_row(&self) -> usize {
        self.n * (self.o - 1) * self.d2
    }

    fn visibility_row(&self) -> usize {
        self.weight_row() + 1
    }
}

/// `γ[x·d + k] = a`
type Strategy = Vec<usize>;

/// A device in disaggregated form: variable `q` is `q(λ)`, and
/// `q̃(a,λ|x,k)` is variable `first + (x·d + k)·o + a`.
struct Block {
    device: usize,
    q: usize,
    first: usize,
}

/// Maximum visibility over models built from `unitaries`, with the
/// defaults of [`SearchOptions`].
pub fn search_classical_model(m: &MeasurementSet, unitaries: &[ComplexMatrix]) -> Result<(f64, ClassicalModel)> {
    let r = search_with_options(m, unitaries, SearchOptions::default())?;
    Ok((r.v, r.model))
}

/// Column generation over deterministic responses `(λ, γ)`: the master LP
/// holds a growing subset of them, and pricing picks for every device the
/// strategy of largest reduced cost in closed form. A few devices are held
/// in full block form instead, which covers all of their strategies at once.
pub fn search_with_options(m: &MeasurementSet, unitaries: &[ComplexMatrix], opts: SearchOptions) -> Result<SearchReport> {
    check_ensemble(m, unitaries)?;
    let (d, n, o) = (m.dim(), m.settings(), m.outcomes());
    let basis = HermitianBasis::new(d);
    let d2 = basis.len();
    let layout = Master { n, o, d2 };
    let rows = layout.visibility_row() + 1;
    let identity = basis.coefficients(&ComplexMatrix::identity(d));

    let mut lp = LinearProgram::new();
    lp.rhs = vec![0.0; rows];
    lp.rhs[layout.weight_row()] = 1.0;
    lp.rhs[layout.visibility_row()] = 1.0;
    let mut v_col = vec![(layout.visibility_row(), 1.0)];
    let mut noise_col = vec![(layout.weight_row(), 1.0)];
    for x in 0..n {
        for a in 0..o - 1 {
            let e = m.element(x, a);
            let t = e.trace().re / d as f64;
            let centred = basis.coefficients(&e.add_scaled(-t, &ComplexMatrix::identity(d)));
            for i in 0..d2 {
                let r = layout.row(a, x, i);
                lp.rhs[r] = -t * identity[i];
                v_col.push((r, centred[i]));
                noise_col.push((r, -t * identity[i]));
            }
        }
    }
    let v_var = lp.add_var(1.0, Bound::NonNegative);
    let s_var = lp.add_var(0.0, Bound::NonNegative);
    let noise_var = lp.add_var(0.0, Bound::NonNegative);
    for (r, c) in &v_col {
        lp.triplets.push((*r, v_var, *c));
    }
    lp.triplets.push((layout.visibility_row(), s_var, 1.0));
    for (r, c) in &noise_col {
        lp.triplets.push((*r, noise_var, *c));
    }

    // coefs[λ][k] = coefficients of E_{k|λ}
    let coefs: Vec<Vec<Vec<f64>>> = unitaries
        .par_iter()
        .map(|u| (0..d).map(|k| basis.projector_coefficients(&u.column(k))).collect())
        .collect();

    // Best response of device λ to duals y: per (x, k) the outcome of largest
    // score, where the last outcome has no rows and scores zero.
    let price = |y: &[f64], ck: &[Vec<f64>]| -> (f64, Strategy) {
        let mut gamma = vec![0; n * d];
        let mut rc = -y[layout.weight_row()];
        for x in 0..n {
            for k in 0..d {
                let (mut best, mut best_a) = (0.0, o - 1);
                for a in 0..o - 1 {
                    let base = layout.row(a, x, 0);
                    let s: f64 = (0..d2).map(|i| y[base + i] * ck[k][i]).sum();
                    if s > best {
                        best = s;
                        best_a = a;
                    }
                }
                rc += best;
                gamma[x * d + k] = best_a;
            }
        }
        (rc, gamma)
    };
    let reduced_cost = |y: &[f64], ck: &[Vec<f64>], gamma: &[usize]| -> f64 {
        let mut rc = -y[layout.weight_row()];
        for x in 0..n {
            for k in 0..d {
                let a = gamma[x * d + k];
                if a < o - 1 {
                    let base = layout.row(a, x, 0);
                    rc += (0..d2).map(|i| y[base + i] * ck[k][i]).sum::<f64>();
                }
            }
        }
        rc
    };

    let mut simplex = Simplex::new(&lp)?;
    // (λ, γ, master variable)
    let mut columns: Vec<(usize, Strategy, usize)> = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut per_device = vec![0usize; unitaries.len()];
    let mut promoted = vec![false; unitaries.len()];
    // The first n devices start in block form. Default ensembles list the
    // target bases first, which gives a feasible v > 0 from the first round.
    let initial = n.min(unitaries.len());
    let max_blocks = initial + rows / ROWS_PER_BLOCK_ROW / (n * d);
    for l in 0..initial {
        blocks.push(add_block(&mut simplex, &layout, &coefs[l], l)?);
        promoted[l] = true;
    }
    let mut present: HashSet<(usize, Strategy)> = HashSet::new();
    let mut rounds = 0;
    // Dual smoothing: price at α·ȳ + (1 − α)·y, where ȳ gave the best bound.
    let mut center: Option<(f64, Vec<f64>)> = None;
    let mut alpha = SMOOTHING;
    loop {
        rounds += 1;
        let sol = simplex.solve(MASTER_TOL)?;
        match sol.status {
            Status::Optimal => {}
            Status::Infeasible => {
                return Err(Error::Solver(SolverError::Numerical(
                    "master problem reported infeasible although v = 0 is always feasible".into(),
                )))
            }
            Status::MaxIterations => return Err(sol.into_optimal().unwrap_err().into()),
        }
        // block rows have zero right-hand side and do not enter pricing
        let y = &sol.duals[..rows];
        let y_price: Vec<f64> = match &center {
            Some((_, c)) if alpha > 0.0 => c.iter().zip(y).map(|(c, y)| alpha * c + (1.0 - alpha) * y).collect(),
            _ => y.to_vec(),
        };
        let priced: Vec<(f64, Strategy)> = coefs.par_iter().map(|ck| price(&y_price, ck)).collect();
        let max_rc = priced.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let bound = y_price.iter().zip(&lp.rhs).map(|(a, b)| a * b).sum::<f64>() + max_rc.max(0.0);
        if center.as_ref().is_none_or(|(b, _)| bound < *b) {
            center = Some((bound, y_price.clone()));
        }
        let best_bound = center.as_ref().map_or(bound, |c| c.0);
        let dual_obj: f64 = y.iter().zip(&lp.rhs).map(|(a, b)| a * b).sum();
        let certified_gap = (best_bound - sol.objective).max(0.0) + (dual_obj - sol.objective).abs();
        if certified_gap <= SEARCH_GAP_TOL {
            let model = assemble_model(m, unitaries, &sol.values, noise_var, &columns, &blocks, sol.values[v_var]);
            let columns = simplex.num_vars() - noise_var - 1;
            return Ok(SearchReport { v: model.v, model, certified_gap, rounds, columns });
        }

        let mut order: Vec<usize> = (0..priced.len()).filter(|&l| priced[l].0 > PRICING_TOL).collect();
        order.sort_by(|&a, &b| priced[b].0.total_cmp(&priced[a].0).then(a.cmp(&b)));
        let mut added = 0;
        let mut improving = 0;
        for l in order {
            if added == opts.columns_per_round {
                break;
            }
            if promoted[l] {
                continue;
            }
            let key = (l, priced[l].1.clone());
            if present.contains(&key) {
                continue;
            }
            if reduced_cost(y, &coefs[l], &key.1) > PRICING_TOL {
                improving += 1;
            }
            if per_device[l] >= PROMOTE_AFTER && blocks.len() < max_blocks {
                blocks.push(add_block(&mut simplex, &layout, &coefs[l], l)?);
                promoted[l] = true;
                added += 1;
                continue;
            }
            let mut col = vec![(layout.weight_row(), 1.0)];
            for x in 0..n {
                for a in 0..o - 1 {
                    let mut acc = vec![0.0; d2];
                    for k in 0..d {
                        if key.1[x * d + k] == a {
                            for (i, c) in coefs[l][k].iter().enumerate() {
                                acc[i] += c;
                            }
                        }
                    }
                    for (i, c) in acc.into_iter().enumerate() {
                        if c != 0.0 {
                            col.push((layout.row(a, x, i), -c));
                        }
                    }
                }
            }
            let var = simplex.add_column(&col, 0.0)?;
            present.insert(key.clone());
            per_device[l] += 1;
            columns.push((key.0, key.1, var));
            added += 1;
        }

        if improving == 0 {
            if alpha > 0.0 && center.is_some() {
                // mis-priced: the smoothed duals found nothing the master can use
                alpha = 0.0;
            } else {
                return Err(Error::Solver(SolverError::Numerical(format!(
                    "column generation stalled with certified gap {certified_gap:.3e}"
                ))));
            }
        } else {
            alpha = SMOOTHING;
        }
        if rounds >= opts.max_rounds {
            return Err(Error::Solver(SolverError::IterationLimit {
                limit: opts.max_rounds,
                gap: certified_gap,
                residual: sol.primal_residual,
            }));
        }
    }
}

/// Adds device `l` in disaggregated form: rows `Σ_a q̃(a,λ|x,k) = q(λ)` and
/// the variables `q(λ)`, `q̃(a,λ|x,k)`.
fn add_block(simplex: &mut Simplex, layout: &Master, ck: &[Vec<f64>], l: usize) -> Result<Block> {
    let (n, o) = (layout.n, layout.o);
    let d = ck.len();
    let block_rows: Vec<usize> = simplex.add_rows(n * d)?.collect();
    let mut q_col = vec![(layout.weight_row(), 1.0)];
    q_col.extend(block_rows.iter().map(|&r| (r, -1.0)));
    let q = simplex.add_column(&q_col, 0.0)?;
    for x in 0..n {
        for (k, c) in ck.iter().enumerate() {
            for a in 0..o {
                let mut col = vec![(block_rows[x * d + k], 1.0)];
                if a < o - 1 {
                    col.extend(c.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, c)| (layout.row(a, x, i), -c)));
                }
                simplex.add_column(&col, 0.0)?;
            }
        }
    }
    Ok(Block { device: l, q, first: q + 1 })
}

fn assemble_model(
    m: &MeasurementSet,
    unitaries: &[ComplexMatrix],
    values: &[f64],
    noise_var: usize,
    columns: &[(usize, Strategy, usize)],
    blocks: &[Block],
    v: f64,
) -> ClassicalModel {
    let (d, n, o) = (m.dim(), m.settings(), m.outcomes());
    let mut weights = vec![0.0; unitaries.len()];
    let mut response = vec![vec![vec![vec![0.0; o]; d]; n]; unitaries.len()];
    let noise = values[noise_var].max(0.0);
    if noise > 0.0 {
        weights[0] += noise;
        for x in 0..n {
            for a in 0..o {
                let t = m.element(x, a).trace().re / d as f64;
                for k in 0..d {
                    response[0][x][k][a] += noise * t;
                }
            }
        }
    }
    for (l, gamma, var) in columns {
        let w = values[*var].max(0.0);
        if w == 0.0 {
            continue;
        }
        weights[*l] += w;
        for x in 0..n {
            for k in 0..d {
                response[*l][x][k][gamma[x * d + k]] += w;
            }
        }
    }
    for b in blocks {
        let w = values[b.q].max(0.0);
        if w == 0.0 {
            continue;
        }
        weights[b.device] += w;
        for x in 0..n {
            for k in 0..d {
                // rescale so the block sums exactly to q(λ)
                let qt: Vec<f64> = (0..o).map(|a| values[b.first + (x * d + k) * o + a].max(0.0)).collect();
                let total: f64 = qt.iter().sum();
                for (a, t) in qt.into_iter().enumerate() {
                    response[b.device][x][k][a] += if total > 0.0 { w * t / total } else { w / o as f64 };
                }
            }
        }
    }
    ClassicalModel {
        dim: d,
        settings: n,
        outcomes: o,
        v: v.clamp(0.0, 1.0),
        devices: unitaries.to_vec(),
        weights,
        response,
    }
    .prune()
}

/// The LP in its original variables: `v`, a slack for `v ≤ 1`, `q(λ)` and
/// `q̃(a,λ|x,k)`, with `d²` rows per `(a, x)`. Its size grows as
/// `N_λ·(o·n·d + 1)`, so it is meant for small ensembles and cross-checks.
pub fn end_matter_lp(m: &MeasurementSet, unitaries: &[ComplexMatrix]) -> Result<LinearProgram> {
    check_ensemble(m, unitaries)?;
    let (d, n, o) = (m.dim(), m.settings(), m.outcomes());
    let basis = HermitianBasis::new(d);
    let d2 = basis.len();
    let nl = unitaries.len();
    let mut lp = LinearProgram::new();
    let v = lp.add_var(1.0, Bound::NonNegative);
    let s = lp.add_var(0.0, Bound::NonNegative);
    let q0 = lp.num_vars();
    for _ in 0..nl {
        lp.add_var(0.0, Bound::NonNegative);
    }
    let qt0 = lp.num_vars();
    let qt = |a: usize, l: usize, x: usize, k: usize| qt0 + ((l * n + x) * d + k) * o + a;
    for _ in 0..nl * n * d * o {
        lp.add_var(0.0, Bound::NonNegative);
    }
    let coefs: Vec<Vec<Vec<f64>>> =
        unitaries.iter().map(|u| (0..d).map(|k| basis.projector_coefficients(&u.column(k))).collect()).collect();
    let identity = basis.coefficients(&ComplexMatrix::identity(d));
    for x in 0..n {
        for a in 0..o {
            let e = m.element(x, a);
            let t = e.trace().re / d as f64;
            let centred = basis.coefficients(&e.add_scaled(-t, &ComplexMatrix::identity(d)));
            for i in 0..d2 {
                let mut row = vec![(v, centred[i])];
                for l in 0..nl {
                    for k in 0..d {
                        let c = coefs[l][k][i];
                        if c != 0.0 {
                            row.push((qt(a, l, x, k), -c));
                        }
                    }
                }
                lp.add_row(&row, -t * identity[i]);
            }
        }
    }
    for l in 0..nl {
        for x in 0..n {
            for k in 0..d {
                let mut row: Vec<(usize, f64)> = (0..o).map(|a| (qt(a, l, x, k), 1.0)).collect();
                row.push((q0 + l, -1.0));
                lp.add_row(&row, 0.0);
            }
        }
    }
    lp.add_row(&(0..nl).map(|l| (q0 + l, 1.0)).collect::<Vec<_>>(), 1.0);
    lp.add_row(&[(v, 1.0), (s, 1.0)], 1.0);
    Ok(lp)
}

/// Solves [`end_matter_lp`] directly.
pub fn solve_end_matter_lp(m: &MeasurementSet, unitaries: &[ComplexMatrix]) -> Result<(f64, ClassicalModel)> {
    let lp = end_matter_lp(m, unitaries)?;
    let sol = classicality_solvers::solve_lp(&lp, MASTER_TOL)?.into_optimal()?;
    let (d, n, o) = (m.dim(), m.settings(), m.outcomes());
    let nl = unitaries.len();
    let qt0 = 2 + nl;
    let weights: Vec<f64> = (0..nl).map(|l| sol.values[2 + l].max(0.0)).collect();
    let response = (0..nl)
        .map(|l| {
            (0..n)
                .map(|x| {
                    (0..d)
                        .map(|k| (0..o).map(|a| sol.values[qt0 + ((l * n + x) * d + k) * o + a].max(0.0)).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let v = sol.values[0].clamp(0.0, 1.0);
    let model = ClassicalModel { dim: d, settings: n, outcomes: o, v, devices: unitaries.to_vec(), weights, response }
        .prune();
    Ok((v, model))
}

/// The two-device model at `v = ½`: device `λ` measures its own basis
/// exactly for `x = λ` and answers uniformly otherwise.
pub fn pair_half_noise_model(f: &ComplexMatrix, h: &ComplexMatrix) -> Result<ClassicalModel> {
    if f.dim() != h.dim() {
        return Err(structural(format!("basis dimensions differ: {} and {}", f.dim(), h.dim())));
    }
    for u in [f, h] {
        let r = u.unitarity_residual();
        if r > UNITARY_TOL {
            return Err(structural(format!("basis is not unitary (residual {r:.3e})")));
        }
    }
    let d = f.dim();
    let response = (0..2)
        .map(|l| {
            (0..2)
                .map(|x| {
                    (0..d)
                        .map(|k| (0..d).map(|a| if x == l { if a == k { 0.5 } else { 0.0 } } else { 0.5 / d as f64 }).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(ClassicalModel {
        dim: d,
        settings: 2,
        outcomes: d,
        v: 0.5,
        devices: vec![f.clone(), h.clone()],
        weights: vec![0.5, 0.5],
        response,
    })
}

/// Greedy convex decomposition of a column-stochastic matrix `p[a][z]` into
/// deterministic maps `z ↦ a`.
pub fn decompose_stochastic(p: &[Vec<f64>]) -> Result<Vec<(f64, Vec<usize>)>> {
    let rows = p.len();
    let cols = p.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || p.iter().any(|r| r.len() != cols) {
        return Err(invalid("stochastic matrix must be rectangular and nonempty"));
    }
    for z in 0..cols {
        let s: f64 = (0..rows).map(|a| p[a][z]).sum();
        if (0..rows).any(|a| p[a][z] < -1e-10 || !p[a][z].is_finite()) || (s - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("column {z} is not a probability distribution")));
        }
    }
    let mut rest: Vec<Vec<f64>> = p.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect();
    let mut out = Vec::new();
    let mut remaining = 1.0;
    while remaining > 1e-12 && out.len() < rows * cols {
        let pick: Vec<usize> = (0..cols)
            .map(|z| {
                let mut best = 0;
                for a in 1..rows {
                    if rest[a][z] > rest[best][z] {
                        best = a;
                    }
                }
                best
            })
            .collect();
        let w = (0..cols).map(|z| rest[pick[z]][z]).fold(f64::INFINITY, f64::min).min(remaining);
        if w <= 0.0 {
            break;
        }
        for z in 0..cols {
            rest[pick[z]][z] -= w;
        }
        remaining -= w;
        out.push((w, pick));
    }
    Ok(out)
}

/// Weights `q(λ̃)` and commuting projective families `F[λ̃][x][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveCommutingModel {
    pub dim: usize,
    pub settings: usize,
    pub outcomes: usize,
    pub weights: Vec<f64>,
    pub projectors: Vec<Vec<Vec<ComplexMatrix>>>,
}

impl ProjectiveCommutingModel {
    pub fn operator(&self, x: usize, a: usize) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim);
        for (w, f) in self.weights.iter().zip(&self.projectors) {
            out.add_assign_scaled(*w, &f[x][a]);
        }
        out
    }

    /// `max ‖F_{a|x}F_{a'|x} − δ_{aa'}F_{a|x}‖_max`
    pub fn projectivity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for f in &self.projectors {
            for per_a in f {
                for (a, fa) in per_a.iter().enumerate() {
                    for (b, fb) in per_a.iter().enumerate() {
                        let prod = fa * fb;
                        let r = if a == b { (&prod - fa).max_abs() } else { prod.max_abs() };
                        worst = worst.max(r);
                    }
                }
            }
        }
        worst
    }

    /// `max ‖[F_{a|x}, F_{a'|x'}]‖_max`
    pub fn commutation_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for f in &self.projectors {
            let all: Vec<&ComplexMatrix> = f.iter().flatten().collect();
            for i in 0..all.len() {
                for j in (i + 1)..all.len() {
                    worst = worst.max(all[i].commutator(all[j]).max_abs());
                }
            }
        }
        worst
    }

    pub fn completeness_residual(&self) -> f64 {
        let id = ComplexMatrix::identity(self.dim);
        let mut worst = 0.0f64;
        for f in &self.projectors {
            for per_a in f {
                let mut s = ComplexMatrix::zeros(self.dim);
                for e in per_a {
                    s.add_assign_scaled(1.0, e);
                }
                worst = worst.max((&s - &id).max_abs());
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(structural(format!("weights sum to {total}")));
        }
        let p = self.projectivity_residual();
        let c = self.commutation_residual();
        let s = self.completeness_residual();
        if p > PROJECTIVE_TOL || c > PROJECTIVE_TOL || s > 1e-9 {
            return Err(structural(format!(
                "not a commuting projective model (projectivity {p:.3e}, commutation {c:.3e}, completeness {s:.3e})"
            )));
        }
        Ok(())
    }
}

/// Absorbs the stochastic response into the hidden variable: each device
/// splits into one term per deterministic strategy, with
/// `F_{a|x,(γ,λ)} = Σ_k δ_{a,γ(x,k)} E_{k|λ}`.
pub fn eliminate_postprocessing(model: &ClassicalModel) -> Result<ProjectiveCommutingModel> {
    model.validate()?;
    let (d, n, o) = (model.dim, model.settings, model.outcomes);
    let mut weights = Vec::new();
    let mut projectors = Vec::new();
    for (l, u) in model.devices.iter().enumerate() {
        let q = model.weights[l];
        if q < PRUNE_WEIGHT {
            continue;
        }
        // columns z = x·d + k; renormalised against rounding in q̃
        let p: Vec<Vec<f64>> = (0..o)
            .map(|a| {
                (0..n * d)
                    .map(|z| {
                        let col = &model.response[l][z / d][z % d];
                        col[a].max(0.0) / col.iter().map(|v| v.max(0.0)).sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (w, gamma) in decompose_stochastic(&p)? {
            *merged.entry(gamma).or_insert(0.0) += w;
        }
        let e: Vec<ComplexMatrix> = (0..d).map(|k| ComplexMatrix::outer(&u.column(k))).collect();
        for (gamma, w) in merged {
            let f: Vec<Vec<ComplexMatrix>> = (0..n)
                .map(|x| {
                    (0..o)
                        .map(|a| {
                            let mut s = ComplexMatrix::zeros(d);
                            for k in 0..d {
                                if gamma[x * d + k] == a {
                                    s.add_assign_scaled(1.0, &e[k]);
                                }
                            }
                            s
                        })
                        .collect()
                })
                .collect();
            weights.push(q * w);
            projectors.push(f);
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(ProjectiveCommutingModel { dim: d, settings: n, outcomes: o, weights, projectors })
}

/// Compresses a model of `|a⟩⟨a| ⊕ M̃_a` (dimension `o + d`) to the last `d`
/// coordinates.
pub fn project_extended_model(model: &ProjectiveCommutingModel, o: usize, d: usize) -> Result<ProjectiveCommutingModel> {
    if model.dim != o + d {
        return Err(structural(format!("model dimension {} is not o + d = {}", model.dim, o + d)));
    }
    for x in 0..model.settings {
        for a in 0..model.outcomes {
            let r = model.operator(x, a);
            let off = r.block_max_abs(0, o, o, d).max(r.block_max_abs(o, d, 0, o));
            if off > 1e-6 {
                return Err(structural(format!(
                    "setting {x}, outcome {a}: reconstructed operator is not block diagonal (off-block {off:.3e})"
                )));
            }
        }
    }
    let projectors = model
        .projectors
        .iter()
        .map(|f| f.iter().map(|per_a| per_a.iter().map(|e| e.block(o, d)).collect()).collect())
        .collect();
    Ok(ProjectiveCommutingModel {
        dim: d,
        settings: model.settings,
        outcomes: model.outcomes,
        weights: model.weights.clone(),
        projectors,
    })
}

fn orthonormal_basis(vectors: &[Vec<C64>]) -> Option<ComplexMatrix> {
    let d = vectors.len();
    let u = ComplexMatrix::from_fn(d, |i, j| vectors[j][i]);
    (u.unitarity_residual() <= 1e-9).then_some(u)
}

/// Bases that let a model reproduce the settings themselves: the common
/// eigenbasis of each rank-one projective setting, or otherwise an
/// eigenbasis of every rank-one element.
pub fn target_bases(m: &MeasurementSet) -> Result<Vec<ComplexMatrix>> {
    let d = m.dim();
    let mut out = Vec::new();
    for x in 0..m.settings() {
        let mut vecs = Vec::new();
        let mut rank_one = true;
        for a in 0..m.outcomes() {
            match rank_one_vector(m.element(x, a)) {
                Ok(Some(v)) => vecs.push(v),
                Ok(None) => {}
                Err(_) => rank_one = false,
            }
        }
        if !rank_one {
            continue;
        }
        if vecs.len() == d {
            if let Some(u) = orthonormal_basis(&vecs) {
                out.push(u);
                continue;
            }
        }
        for a in 0..m.outcomes() {
            if m.element(x, a).max_abs() > 1e-12 {
                out.push(eig_hermitian(m.element(x, a))?.vectors);
            }
        }
    }
    Ok(out)
}

/// `haar` Haar-random unitaries preceded by [`target_bases`].
pub fn default_ensemble<R: Rng + ?Sized>(m: &MeasurementSet, haar: usize, rng: &mut R) -> Result<Vec<ComplexMatrix>> {
    let mut out = target_bases(m)?;
    for _ in 0..haar {
        out.push(haar_unitary(m.dim(), rng)?);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct DeviceFile {
    weight: f64,
    unitary: JsonMatrix,
    response: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    v: f64,
    dim: usize,
    settings: usize,
    outcomes: usize,
    devices: Vec<DeviceFile>,
}

impl ClassicalModel {
    /// `{"v", "dim", "settings", "outcomes", "devices": [{"weight",
    /// "unitary", "response": {"a,x,k": value}}]}` with zero responses
    /// omitted and indices from 0.
    pub fn to_json(&self) -> String {
        let devices = (0..self.devices.len())
            .map(|l| {
                let mut response = BTreeMap::new();
                for x in 0..self.settings {
                    for k in 0..self.dim {
                        for a in 0..self.outcomes {
                            let p = self.response[l][x][k][a];
                            if p != 0.0 {
                                response.insert(format!("{a},{x},{k}"), p);
                            }
                        }
                    }
                }
                DeviceFile { weight: self.weights[l], unitary: matrix_to_json(&self.devices[l]), response }
            })
            .collect();
        let file = ModelFile { v: self.v, dim: self.dim, settings: self.settings, outcomes: self.outcomes, devices };
        serde_json::to_string(&file).expect("serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let (d, n, o) = (file.dim, file.settings, file.outcomes);
        let mut devices = Vec::new();
        let mut weights = Vec::new();
        let mut response = Vec::new();
        for (l, dev) in file.devices.iter().enumerate() {
            devices.push(matrix_from_json(&dev.unitary).map_err(|e| structural(format!("device {l}: {e}")))?);
            weights.push(dev.weight);
            let mut r = vec![vec![vec![0.0; o]; d]; n];
            for (key, &p) in &dev.response {
                let idx: Vec<usize> = key.split(',').map(|s| s.trim().parse()).collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Parse(format!("device {l}: bad response key {key:?}")))?;
                match idx.as_slice() {
                    &[a, x, k] if a < o && x < n && k < d => r[x][k][a] = p,
                    _ => return Err(Error::Parse(format!("device {l}: response key {key:?} out of range"))),
                }
            }
            response.push(r);
        }
        let model = Self { dim: d, settings: n, outcomes: o, v: file.v, devices, weights, response };
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::{mub_bases, mub_set};

    #[test]
    fn pair_model_reconstructs_qubit_mubs() {
        let b = mub_bases(2, 2).unwrap();
        let model = pair_half_noise_model(&b[0], &b[1]).unwrap();
        model.validate().unwrap();
        assert!(reconstruct(&model, &mub_set(2, 2).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn perturbed_model_fails_reconstruction() {
        let b = mub_bases(2, 2).unwrap();
        let mut model = pair_half_noise_model(&b[0], &b[1]).unwrap();
        model.response[0][0][0][0] += 0.01;
        assert!(reconstruct(&model, &mub_set(2, 2).unwrap()).unwrap() > 1e-3);
    }

    #[test]
    fn binary_column_decomposition() {
        let terms = decompose_stochastic(&[vec![0.3], vec![0.7]]).unwrap();
        assert_eq!(terms.len(), 2);
        assert!((terms[0].0 - 0.7).abs() < 1e-15 && terms[0].1 == vec![1]);
        assert!((terms[1].0 - 0.3).abs() < 1e-15 && terms[1].1 == vec![0]);
    }

    #[test]
    fn deterministic_matrix_single_term() {
        let terms = decompose_stochastic(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(terms, vec![(1.0, vec![0, 1])]);
        assert!(decompose_stochastic(&[vec![0.5], vec![0.6]]).is_err());
    }

    #[test]
    fn trivial_model_is_exact() {
        let m = mub_set(3, 2).unwrap();
        let model = trivial_model(&m, &[ComplexMatrix::identity(3)]).unwrap();
        model.validate().unwrap();
        assert!(reconstruct(&model, &m).unwrap() <= 1e-12);
    }

    #[test]
    fn pair_of_mubs_with_own_bases_gives_half() {
        let b = mub_bases(2, 2).unwrap();
        let m = mub_set(2, 2).unwrap();
        let (v, model) = search_classical_model(&m, &b).unwrap();
        assert!((v - 0.5).abs() < 1e-6, "{v}");
        assert!(reconstruct(&model, &m).unwrap() <= 1e-7);
        let (v2, model2) = solve_end_matter_lp(&m, &b).unwrap();
        assert!((v2 - 0.5).abs() < 1e-6, "{v2}");
        assert!(reconstruct(&model2, &m).unwrap() <= 1e-7);
    }

    #[test]
    fn model_json_round_trip() {
        let b = mub_bases(3, 2).unwrap();
        let model = pair_half_noise_model(&b[0], &b[1]).unwrap();
        let back = ClassicalModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        assert!(ClassicalModel::from_json(r#"{"v":1}"#).is_err());
    }
}
