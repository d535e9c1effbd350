//! Block-diagonal semidefinite programs and a primal-dual interior point.
//!
//! A program is
//!
//! ```text
//! maximize ⟨C, X⟩  subject to  ⟨A_i, X⟩ = b_i,  X = diag(X_1, …, X_B) ⪰ 0
//! ```
//!
//! with every matrix given as sparse symmetric entries. Internally the
//! solver works on the minimisation form with the HKM search direction and
//! Mehrotra's predictor-corrector. Complex Hermitian blocks are handled by
//! the caller through [`hermitian_entries`] and [`extract_hermitian`].

use crate::dense::{cholesky, cholesky_solve, lower_inverse, min_eigenvalue, spd_inverse, Lu, Mat};
use crate::error::{Result, SolverError};
use crate::lp::{SolverSolution, Status};

pub const DEFAULT_ITERATION_LIMIT: usize = 200;
const STEP_FRACTION: f64 = 0.95;

/// One entry of a symmetric block matrix. Off-diagonal entries stand for
/// both `(row, col)` and `(col, row)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl SymEntry {
    pub fn new(block: usize, row: usize, col: usize, value: f64) -> Self {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        Self { block, row, col, value }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpConstraint {
    pub entries: Vec<SymEntry>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemidefiniteProgram {
    pub blocks: Vec<usize>,
    pub objective: Vec<SymEntry>,
    pub constraints: Vec<SdpConstraint>,
}

impl SemidefiniteProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, dim: usize) -> usize {
        self.blocks.push(dim);
        self.blocks.len() - 1
    }

    pub fn add_objective(&mut self, entries: impl IntoIterator<Item = SymEntry>) {
        self.objective.extend(entries);
    }

    pub fn add_constraint(&mut self, entries: Vec<SymEntry>, rhs: f64) -> usize {
        self.constraints.push(SdpConstraint { entries, rhs });
        self.constraints.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.blocks.iter().position(|&n| n == 0) {
            return Err(SolverError::Malformed(format!("block {b} has dimension zero")));
        }
        let check = |e: &SymEntry, what: &str| -> Result<()> {
            let dim = *self.blocks.get(e.block).ok_or_else(|| {
                SolverError::Malformed(format!("{what} refers to missing block {}", e.block))
            })?;
            if e.row > e.col || e.col >= dim {
                return Err(SolverError::Malformed(format!(
                    "{what} entry ({}, {}) invalid for block {} of size {dim}",
                    e.row, e.col, e.block
                )));
            }
            if !e.value.is_finite() {
                return Err(SolverError::Malformed(format!("{what} has a non-finite entry")));
            }
            Ok(())
        };
        for e in &self.objective {
            check(e, "objective")?;
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(SolverError::Malformed(format!("constraint {i} has non-finite rhs")));
            }
            for e in &c.entries {
                check(e, &format!("constraint {i}"))?;
            }
        }
        Ok(())
    }

    /// Splits a flat solution vector back into its blocks.
    pub fn unflatten(&self, values: &[f64]) -> Vec<Mat> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut offset = 0;
        for &n in &self.blocks {
            out.push(Mat::from_rows(n, values[offset..offset + n * n].to_vec()));
            offset += n * n;
        }
        out
    }

    fn dense_blocks(&self, entries: &[SymEntry]) -> Vec<Mat> {
        let mut out: Vec<Mat> = self.blocks.iter().map(|&n| Mat::zeros(n)).collect();
        for e in entries {
            add_sym(&mut out[e.block], e.row, e.col, e.value);
        }
        out
    }
}

fn add_sym(m: &mut Mat, r: usize, c: usize, v: f64) {
    m[(r, c)] += v;
    if r != c {
        m[(c, r)] += v;
    }
}

/// `⟨A, X⟩` for sparse symmetric `A` restricted to one block.
fn sparse_dot(entries: &[(usize, usize, f64)], x: &Mat) -> f64 {
    entries
        .iter()
        .map(|&(r, c, v)| if r == c { v * x[(r, r)] } else { v * (x[(r, c)] + x[(c, r)]) })
        .sum()
}

/// Entries of the real embedding `[[Re, −Im], [Im, Re]]` of a Hermitian
/// `d×d` matrix, multiplied by `scale`. Row-major `re` and `im` slices.
///
/// With `scale = 0.5`, `⟨embed(A), embed(X)⟩` equals `Tr(A X)` in the complex
/// convention.
pub fn hermitian_entries(block: usize, d: usize, re: &[f64], im: &[f64], scale: f64) -> Vec<SymEntry> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            let v = re[i * d + j] * scale;
            if v != 0.0 {
                out.push(SymEntry::new(block, i, j, v));
                out.push(SymEntry::new(block, d + i, d + j, v));
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            let v = -im[i * d + j] * scale;
            if v != 0.0 {
                out.push(SymEntry::new(block, i, d + j, v));
            }
        }
    }
    out
}

/// Complex matrix (row-major real and imaginary parts) represented by a
/// real `2d×2d` block, averaging the two copies of each part.
pub fn extract_hermitian(block: &Mat) -> (Vec<f64>, Vec<f64>) {
    let d = block.dim() / 2;
    let mut re = vec![0.0; d * d];
    let mut im = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            re[i * d + j] = 0.5 * (block[(i, j)] + block[(d + i, d + j)]);
            im[i * d + j] = 0.5 * (block[(d + i, j)] - block[(i, d + j)]);
        }
    }
    (re, im)
}

struct Problem {
    blocks: Vec<usize>,
    /// Minimisation cost, per block.
    c: Vec<Mat>,
    b: Vec<f64>,
    /// `per_block[k]` lists `(constraint, entries)` touching block `k`.
    per_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
}

impl Problem {
    fn new(p: &SemidefiniteProgram) -> Self {
        let c = p.dense_blocks(&p.objective).into_iter().map(|m| m.scale(-1.0)).collect();
        let mut per_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>> = vec![Vec::new(); p.blocks.len()];
        for (i, con) in p.constraints.iter().enumerate() {
            for e in &con.entries {
                let list = &mut per_block[e.block];
                if list.last().map(|(j, _)| *j) != Some(i) {
                    list.push((i, Vec::new()));
                }
                list.last_mut().unwrap().1.push((e.row, e.col, e.value));
            }
        }
        Self { blocks: p.blocks.clone(), c, b: p.constraints.iter().map(|c| c.rhs).collect(), per_block }
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, x: &[Mat]) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        for (k, list) in self.per_block.iter().enumerate() {
            for (i, entries) in list {
                out[*i] += sparse_dot(entries, &x[k]);
            }
        }
        out
    }

    fn adjoint(&self, y: &[f64]) -> Vec<Mat> {
        let mut out: Vec<Mat> = self.blocks.iter().map(|&n| Mat::zeros(n)).collect();
        for (k, list) in self.per_block.iter().enumerate() {
            for (i, entries) in list {
                for &(r, c, v) in entries {
                    add_sym(&mut out[k], r, c, y[*i] * v);
                }
            }
        }
        out
    }

    /// `M_ij = ⟨A_i, X A_j Z⁻¹⟩`.
    fn schur(&self, x: &[Mat], zinv: &[Mat]) -> Mat {
        let m = self.m();
        let mut out = Mat::zeros(m);
        for (k, list) in self.per_block.iter().enumerate() {
            let n = self.blocks[k];
            for (jpos, (j, entries_j)) in list.iter().enumerate() {
                // T = A_j Z⁻¹ is nonzero only on the rows A_j touches.
                let mut t = Mat::zeros(n);
                let mut rows = Vec::new();
                for &(r, c, v) in entries_j {
                    for s in 0..n {
                        t[(r, s)] += v * zinv[k][(c, s)];
                    }
                    rows.push(r);
                    if r != c {
                        for s in 0..n {
                            t[(c, s)] += v * zinv[k][(r, s)];
                        }
                        rows.push(c);
                    }
                }
                rows.sort_unstable();
                rows.dedup();
                let mut g = Mat::zeros(n);
                for a in 0..n {
                    for &p in &rows {
                        let xa = x[k][(a, p)];
                        if xa != 0.0 {
                            for s in 0..n {
                                g[(a, s)] += xa * t[(p, s)];
                            }
                        }
                    }
                }
                for (i, entries_i) in &list[jpos..] {
                    let v = sparse_dot(entries_i, &g);
                    out[(*i, *j)] += v;
                    if i != j {
                        out[(*j, *i)] += v;
                    }
                }
            }
        }
        out.symmetrize()
    }
}

enum Factor {
    Cholesky(Mat),
    Lu(Lu),
}

impl Factor {
    fn new(m: &Mat) -> Result<Self> {
        if let Some(l) = cholesky(m) {
            return Ok(Factor::Cholesky(l));
        }
        Lu::factor(m, 1e-14).map(Factor::Lu).ok_or_else(|| {
            SolverError::Numerical(
                "Schur complement is singular; constraints are likely linearly dependent".into(),
            )
        })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            Factor::Cholesky(l) => {
                let mut x = rhs.to_vec();
                cholesky_solve(l, &mut x);
                x
            }
            Factor::Lu(lu) => lu.solve(rhs),
        }
    }
}

fn dot_blocks(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn max_abs_blocks(a: &[Mat]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.max_abs()))
}

/// Largest `α` with `X + α ΔX ⪰ 0` (infinite if `ΔX ⪰ 0`).
fn max_step(x: &[Mat], dx: &[Mat]) -> Result<f64> {
    let mut alpha = f64::INFINITY;
    for (xk, dk) in x.iter().zip(dx) {
        let l = cholesky(xk)
            .ok_or_else(|| SolverError::Numerical("iterate lost positive definiteness".into()))?;
        let li = lower_inverse(&l);
        let w = li.matmul(dk).matmul(&li.transpose());
        let lam = min_eigenvalue(&w);
        if lam < 0.0 {
            alpha = alpha.min(-1.0 / lam);
        }
    }
    Ok(alpha)
}

fn condition_hint(z: &[Mat]) -> String {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for zk in z {
        let (ev, _) = crate::dense::symmetric_eigen(zk);
        lo = lo.min(ev[0]);
        hi = hi.max(*ev.last().unwrap());
    }
    format!("dual slack eigenvalues in [{lo:.3e}, {hi:.3e}]")
}

/// Solves `p` to an absolute duality gap and equality residuals at most `tol`.
pub fn solve_sdp(p: &SemidefiniteProgram, tol: f64) -> Result<SolverSolution> {
    solve_sdp_with_limit(p, tol, DEFAULT_ITERATION_LIMIT)
}

struct Iterate<'a> {
    x: &'a [Mat],
    y: &'a [f64],
    pobj: f64,
    gap: f64,
    presid: f64,
    dresid: f64,
    iterations: usize,
}

impl Iterate<'_> {
    fn solution(&self, status: Status) -> SolverSolution {
        SolverSolution {
            status,
            values: self.x.iter().flat_map(|b| b.symmetrize().as_slice().to_vec()).collect(),
            objective: -self.pobj,
            gap: self.gap,
            primal_residual: self.presid,
            duals: self.y.iter().map(|v| -v).collect(),
            dual_infeasibility: self.dresid,
            iterations: self.iterations,
        }
    }
}

pub fn solve_sdp_with_limit(p: &SemidefiniteProgram, tol: f64, limit: usize) -> Result<SolverSolution> {
    p.validate()?;
    let prob = Problem::new(p);
    let m = prob.m();
    let n_total: usize = prob.blocks.iter().sum();
    let nf = n_total as f64;

    let a_norm = {
        let mut norms = vec![0.0f64; m];
        for con in 0..m {
            for e in &p.constraints[con].entries {
                let w = if e.row == e.col { 1.0 } else { 2.0 };
                norms[con] += w * e.value * e.value;
            }
        }
        norms.into_iter().map(f64::sqrt).collect::<Vec<_>>()
    };
    let c_norm = prob.c.iter().map(|c| c.frobenius().powi(2)).sum::<f64>().sqrt();
    let alpha0 = (0..m)
        .map(|i| (1.0 + prob.b[i].abs()) / (1.0 + a_norm[i]))
        .fold(1.0f64, f64::max)
        * nf;
    let beta0 = (1.0 + a_norm.iter().copied().fold(c_norm, f64::max)) / nf.sqrt();

    let mut x: Vec<Mat> = prob.blocks.iter().map(|&n| Mat::scaled_identity(n, 10.0 * alpha0)).collect();
    let mut z: Vec<Mat> = prob.blocks.iter().map(|&n| Mat::scaled_identity(n, 10.0 * beta0)).collect();
    let mut y = vec![0.0; m];

    let mut iterations = 0;
    loop {
        let ax = prob.apply(&x);
        let rp: Vec<f64> = prob.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = prob.adjoint(&y);
        let rd: Vec<Mat> = (0..x.len())
            .map(|k| prob.c[k].add_scaled(-1.0, &aty[k]).add_scaled(-1.0, &z[k]))
            .collect();
        let pobj = dot_blocks(&prob.c, &x);
        let dobj: f64 = prob.b.iter().zip(&y).map(|(b, y)| b * y).sum();
        let gap = (pobj - dobj).abs();
        let presid = rp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let dresid = max_abs_blocks(&rd);

        let converged = gap <= 0.5 * tol && presid <= 0.5 * tol && dresid <= 0.5 * tol;
        if converged || iterations >= limit {
            return Ok(Iterate { x: &x, y: &y, pobj, gap, presid, dresid, iterations }.solution(if converged { Status::Optimal } else { Status::MaxIterations }));
        }
        iterations += 1;

        let mut zinv = Vec::with_capacity(z.len());
        for zk in &z {
            zinv.push(spd_inverse(zk).ok_or_else(|| {
                SolverError::Numerical(format!("dual slack lost definiteness; {}", condition_hint(&z)))
            })?);
        }
        let schur = prob.schur(&x, &zinv);
        let factor = match Factor::new(&schur) {
            Ok(f) => f,
            // near the optimum the Schur matrix degenerates; an iterate that
            // already meets the requested tolerance is accepted as is
            Err(_) if gap <= tol && presid <= tol && dresid <= tol => return Ok(Iterate { x: &x, y: &y, pobj, gap, presid, dresid, iterations }.solution(Status::Optimal)),
            Err(e) => return Err(e),
        };
        let mu = dot_blocks(&x, &z) / nf;

        let x_rd_zinv: Vec<Mat> = (0..x.len()).map(|k| x[k].matmul(&rd[k]).matmul(&zinv[k])).collect();
        let base_rhs: Vec<f64> = prob.b.iter().zip(prob.apply(&x_rd_zinv)).map(|(b, v)| b + v).collect();

        // Direction for X Z → K.
        let direction = |k_mats: Option<&[Mat]>| -> (Vec<f64>, Vec<Mat>, Vec<Mat>) {
            let mut rhs = base_rhs.clone();
            let kz: Option<Vec<Mat>> =
                k_mats.map(|km| (0..km.len()).map(|k| km[k].matmul(&zinv[k])).collect());
            if let Some(kz) = &kz {
                for (r, v) in rhs.iter_mut().zip(prob.apply(kz)) {
                    *r -= v;
                }
            }
            let dy = factor.solve(&rhs);
            let atdy = prob.adjoint(&dy);
            let dz: Vec<Mat> = (0..x.len()).map(|k| rd[k].add_scaled(-1.0, &atdy[k])).collect();
            let dx: Vec<Mat> = (0..x.len())
                .map(|k| {
                    let mut d = x[k].matmul(&dz[k]).matmul(&zinv[k]).scale(-1.0).add_scaled(-1.0, &x[k]);
                    if let Some(kz) = &kz {
                        d = d.add_scaled(1.0, &kz[k]);
                    }
                    d.symmetrize()
                })
                .collect();
            (dy, dx, dz)
        };

        let (_, dxa, dza) = direction(None);
        let ap = max_step(&x, &dxa)?.min(1.0);
        let ad = max_step(&z, &dza)?.min(1.0);
        let xa: Vec<Mat> = (0..x.len()).map(|k| x[k].add_scaled(ap, &dxa[k])).collect();
        let za: Vec<Mat> = (0..z.len()).map(|k| z[k].add_scaled(ad, &dza[k])).collect();
        let mu_aff = dot_blocks(&xa, &za) / nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let target: Vec<Mat> = (0..x.len())
            .map(|k| {
                Mat::scaled_identity(prob.blocks[k], sigma * mu).add_scaled(-1.0, &dxa[k].matmul(&dza[k]))
            })
            .collect();
        let (dy, dx, dz) = direction(Some(&target));
        let ap = (STEP_FRACTION * max_step(&x, &dx)?).min(1.0);
        let ad = (STEP_FRACTION * max_step(&z, &dz)?).min(1.0);
        for k in 0..x.len() {
            x[k] = x[k].add_scaled(ap, &dx[k]).symmetrize();
            z[k] = z[k].add_scaled(ad, &dz[k]).symmetrize();
        }
        for (yi, d) in y.iter_mut().zip(&dy) {
            *yi += ad * d;
        }
        if !x.iter().chain(&z).all(|b| b.as_slice().iter().all(|v| v.is_finite())) {
            return Err(SolverError::Numerical(format!(
                "iterates diverged after {iterations} steps; {}",
                condition_hint(&z)
            )));
        }
    }
}

/// Smallest eigenvalue over the blocks of a flat solution.
pub fn min_block_eigenvalue(p: &SemidefiniteProgram, values: &[f64]) -> f64 {
    p.unflatten(values).iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
}
