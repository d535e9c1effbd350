//! Linear witnesses `W = Σ c_{azx} Tr(ρ_z M_{a|x})` and their classical
//! bounds `β`, from exact qubit enumeration or per-strategy SDPs.

use std::collections::HashMap;

use classicality_solvers::{hermitian_entries, solve_sdp, SemidefiniteProgram};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, structural, Error, Result};
use crate::linalg::{split_parts, ComplexMatrix, HermitianBasis};
use crate::measurements::{discrimination_ensemble, matrix_from_json, MeasurementSet, StateEnsemble, JsonMatrix};

/// Largest number of strategies enumerated with an SDP each.
pub const SDP_STRATEGY_LIMIT: u128 = 1_000_000;
/// Largest number of strategies enumerated with the closed qubit form.
pub const QUBIT_STRATEGY_LIMIT: u128 = 1 << 26;
const SDP_TOL: f64 = 1e-8;
const DEDUP_SCALE: f64 = 1e12;

/// Coefficients `c[a][z][x]` and probe states `ρ_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSpec {
    outcomes: usize,
    settings: usize,
    coefficients: Vec<f64>,
    ensemble: StateEnsemble,
}

impl WitnessSpec {
    pub fn new(outcomes: usize, settings: usize, ensemble: StateEnsemble) -> Self {
        let z = ensemble.len();
        Self { outcomes, settings, coefficients: vec![0.0; outcomes * z * settings], ensemble }
    }

    fn index(&self, a: usize, z: usize, x: usize) -> usize {
        (a * self.ensemble.len() + z) * self.settings + x
    }

    pub fn coefficient(&self, a: usize, z: usize, x: usize) -> f64 {
        self.coefficients[self.index(a, z, x)]
    }

    pub fn set_coefficient(&mut self, a: usize, z: usize, x: usize, value: f64) -> Result<()> {
        if a >= self.outcomes || z >= self.ensemble.len() || x >= self.settings {
            return Err(structural(format!("coefficient index (a={a}, z={z}, x={x}) out of range")));
        }
        if !value.is_finite() {
            return Err(invalid(format!("coefficient (a={a}, z={z}, x={x}) is not finite")));
        }
        let i = self.index(a, z, x);
        self.coefficients[i] = value;
        Ok(())
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn ensemble(&self) -> &StateEnsemble {
        &self.ensemble
    }

    fn check_against(&self, m: &MeasurementSet) -> Result<()> {
        if m.dim() != self.ensemble.dim() || m.settings() != self.settings || m.outcomes() != self.outcomes {
            return Err(structural(format!(
                "witness shape (d={}, n={}, o={}) does not match set (d={}, n={}, o={})",
                self.ensemble.dim(),
                self.settings,
                self.outcomes,
                m.dim(),
                m.settings(),
                m.outcomes()
            )));
        }
        Ok(())
    }
}

/// `c_{azx} = δ_{z, x·o + a}` on the probe states of
/// [`discrimination_ensemble`]; padded zero elements get coefficient 0.
pub fn state_discrimination_spec(m: &MeasurementSet) -> Result<WitnessSpec> {
    let ensemble = discrimination_ensemble(m)?;
    let o = m.outcomes();
    let mut spec = WitnessSpec::new(o, m.settings(), ensemble);
    for x in 0..m.settings() {
        for a in 0..o {
            if m.element(x, a).max_abs() > 1e-12 {
                spec.set_coefficient(a, x * o + a, x, 1.0)?;
            }
        }
    }
    Ok(spec)
}

/// `O_{ax} = Σ_z c_{azx} ρ_z`, stored as `ops[x][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOperators {
    pub dim: usize,
    pub ops: Vec<Vec<ComplexMatrix>>,
}

impl ScoreOperators {
    pub fn settings(&self) -> usize {
        self.ops.len()
    }

    pub fn outcomes(&self) -> usize {
        self.ops.first().map_or(0, Vec::len)
    }

    pub fn get(&self, a: usize, x: usize) -> &ComplexMatrix {
        &self.ops[x][a]
    }

    /// `C_k = Σ_x O_{γ(x,k),x}` for one column of a strategy.
    fn column_operator(&self, column: &[usize]) -> ComplexMatrix {
        let mut c = ComplexMatrix::zeros(self.dim);
        for (x, &a) in column.iter().enumerate() {
            c.add_assign_scaled(1.0, &self.ops[x][a]);
        }
        c
    }
}

pub fn score_operators(spec: &WitnessSpec) -> ScoreOperators {
    let d = spec.ensemble.dim();
    let ops = (0..spec.settings)
        .map(|x| {
            (0..spec.outcomes)
                .map(|a| {
                    let mut o = ComplexMatrix::zeros(d);
                    for (z, rho) in spec.ensemble.states().iter().enumerate() {
                        let c = spec.coefficient(a, z, x);
                        if c != 0.0 {
                            o.add_assign_scaled(c, rho);
                        }
                    }
                    o
                })
                .collect()
        })
        .collect();
    ScoreOperators { dim: d, ops }
}

/// `Σ_{a,z,x} c_{azx} Tr(ρ_z M_{a|x})`
pub fn witness_value(spec: &WitnessSpec, m: &MeasurementSet) -> Result<f64> {
    spec.check_against(m)?;
    let ops = score_operators(spec);
    let mut total = num_complex::Complex64::new(0.0, 0.0);
    for x in 0..m.settings() {
        for a in 0..m.outcomes() {
            total += ops.get(a, x).trace_product(m.element(x, a));
        }
    }
    if total.im.abs() > 1e-10 * (1.0 + total.re.abs()) {
        return Err(structural(format!("witness value has imaginary part {:.3e}", total.im)));
    }
    Ok(total.re)
}

/// Value of the witness on white noise: `Σ c_{azx} Tr(ρ_z) Tr(M_{a|x})/d`.
pub fn noise_value(spec: &WitnessSpec, m: &MeasurementSet) -> Result<f64> {
    spec.check_against(m)?;
    let d = m.dim() as f64;
    let mut total = 0.0;
    for x in 0..m.settings() {
        for a in 0..m.outcomes() {
            let tm = m.element(x, a).trace().re / d;
            for (z, rho) in spec.ensemble.states().iter().enumerate() {
                total += spec.coefficient(a, z, x) * rho.trace().re * tm;
            }
        }
    }
    Ok(total)
}

/// `γ(x, k) = table[x·d + k]`
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DeterministicStrategy {
    pub settings: usize,
    pub dim: usize,
    pub table: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn outcome(&self, x: usize, k: usize) -> usize {
        self.table[x * self.dim + k]
    }

    fn column(&self, k: usize) -> Vec<usize> {
        (0..self.settings).map(|x| self.outcome(x, k)).collect()
    }

    /// Position in the mixed-radix order with digit `x·d + k` least
    /// significant first.
    pub fn index(&self, outcomes: usize) -> u128 {
        self.table.iter().rev().fold(0u128, |acc, &a| acc * outcomes as u128 + a as u128)
    }

    pub fn from_index(mut index: u128, settings: usize, dim: usize, outcomes: usize) -> Self {
        let table = (0..settings * dim)
            .map(|_| {
                let a = (index % outcomes as u128) as usize;
                index /= outcomes as u128;
                a
            })
            .collect();
        Self { settings, dim, table }
    }
}

/// `o^(n·d)`, or `None` beyond `u128`.
pub fn strategy_count(outcomes: usize, settings: usize, dim: usize) -> Option<u128> {
    (outcomes as u128).checked_pow(u32::try_from(settings * dim).ok()?)
}

/// `(p, q, Re z, Im z)` of `[[p, z], [z̄, q]]`.
fn qubit_vec(m: &ComplexMatrix) -> [f64; 4] {
    [m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)].re, m[(0, 1)].im]
}

/// `Tr O₊ + √(Tr(O₋)² − 4 det O₋)` with `O_± = ½(A₁ ± A₂)`.
fn qubit_value(a1: &[f64; 4], a2: &[f64; 4]) -> f64 {
    let plus_trace = 0.5 * (a1[0] + a1[1] + a2[0] + a2[1]);
    let p = 0.5 * (a1[0] - a2[0]);
    let q = 0.5 * (a1[1] - a2[1]);
    let (zr, zi) = (0.5 * (a1[2] - a2[2]), 0.5 * (a1[3] - a2[3]));
    let disc = (p + q) * (p + q) - 4.0 * (p * q - zr * zr - zi * zi);
    plus_trace + disc.max(0.0).sqrt()
}

/// Exact classical bound for qubits by enumerating all `o^(2n)` strategies.
pub fn qubit_beta(ops: &ScoreOperators) -> Result<(f64, DeterministicStrategy)> {
    if ops.dim != 2 {
        return Err(invalid(format!("the closed qubit bound needs d = 2, got {}", ops.dim)));
    }
    let (n, o) = (ops.settings(), ops.outcomes());
    let count = strategy_count(o, n, 2).filter(|&c| c <= QUBIT_STRATEGY_LIMIT).ok_or(Error::StrategyOverflow {
        count: strategy_count(o, n, 2).unwrap_or(u128::MAX),
        limit: QUBIT_STRATEGY_LIMIT,
    })?;
    let vecs: Vec<Vec<[f64; 4]>> = ops.ops.iter().map(|per_a| per_a.iter().map(qubit_vec).collect()).collect();
    let best = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let (mut a1, mut a2) = ([0.0; 4], [0.0; 4]);
            let mut rest = i;
            for vx in &vecs {
                let g1 = (rest % o as u64) as usize;
                rest /= o as u64;
                let g2 = (rest % o as u64) as usize;
                rest /= o as u64;
                for j in 0..4 {
                    a1[j] += vx[g1][j];
                    a2[j] += vx[g2][j];
                }
            }
            (qubit_value(&a1, &a2), i)
        })
        .reduce(|| (f64::NEG_INFINITY, u64::MAX), pick_best);
    Ok((best.0, DeterministicStrategy::from_index(best.1 as u128, n, 2, o)))
}

fn pick_best<I: Ord>(a: (f64, I), b: (f64, I)) -> (f64, I) {
    if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
        a
    } else {
        b
    }
}

/// `max Σ_k Tr(C_k N_k)` over `N_k ⪰ 0`, `Tr N_k = 1`, `Σ_k N_k = 𝟙`.
fn povm_sdp(columns: &[ComplexMatrix]) -> Result<f64> {
    let d = columns.len();
    let basis = HermitianBasis::new(d);
    let mut p = SemidefiniteProgram::new();
    let blocks: Vec<usize> = (0..d).map(|_| p.add_block(2 * d)).collect();
    for (k, c) in columns.iter().enumerate() {
        let (re, im) = split_parts(&c.hermitian_part());
        p.add_objective(hermitian_entries(blocks[k], d, &re, &im, 0.5));
    }
    let (id_re, id_im) = split_parts(&ComplexMatrix::identity(d));
    // the last trace condition follows from Σ_k N_k = 𝟙
    for &b in blocks.iter().take(d - 1) {
        p.add_constraint(hermitian_entries(b, d, &id_re, &id_im, 0.5), 1.0);
    }
    for i in 0..basis.len() {
        let e = basis.element(i);
        let (re, im) = split_parts(&e);
        let entries = blocks.iter().flat_map(|&b| hermitian_entries(b, d, &re, &im, 0.5)).collect();
        p.add_constraint(entries, e.trace().re);
    }
    // the primal value approaches the optimum from below; adding the
    // duality gap keeps the result an upper bound
    let sol = solve_sdp(&p, SDP_TOL)?.into_optimal()?;
    Ok(sol.objective + sol.gap)
}

/// SDP relaxation of one strategy's contribution to `β`, rounded up by the
/// solver's duality gap.
pub fn sdp_strategy_bound(ops: &ScoreOperators, gamma: &DeterministicStrategy) -> Result<f64> {
    if gamma.dim != ops.dim || gamma.settings != ops.settings() || gamma.table.iter().any(|&a| a >= ops.outcomes()) {
        return Err(structural("strategy does not match the score operators"));
    }
    let cols: Vec<ComplexMatrix> = (0..ops.dim).map(|k| ops.column_operator(&gamma.column(k))).collect();
    povm_sdp(&cols)
}

fn dedup_key(m: &ComplexMatrix) -> Vec<i64> {
    m.entries()
        .iter()
        .flat_map(|z| [(z.re * DEDUP_SCALE).round() as i64, (z.im * DEDUP_SCALE).round() as i64])
        .collect()
}

/// Counts and the maximising strategy of a bound computation.
#[derive(Debug, Clone)]
pub struct BetaReport {
    pub beta: f64,
    pub strategy: DeterministicStrategy,
    pub strategies: u128,
    /// SDPs actually solved after merging strategies with equal objectives.
    pub unique: usize,
}

/// `β = max_γ g_γ`: exact for qubits, SDP relaxation otherwise.
pub fn beta_upper(ops: &ScoreOperators) -> Result<f64> {
    Ok(beta_report(ops, false)?.beta)
}

/// As [`beta_upper`]; `force_sdp` uses the relaxation for qubits too.
pub fn beta_report(ops: &ScoreOperators, force_sdp: bool) -> Result<BetaReport> {
    let (d, n, o) = (ops.dim, ops.settings(), ops.outcomes());
    let count = strategy_count(o, n, d).unwrap_or(u128::MAX);
    if d == 2 && !force_sdp {
        let (beta, strategy) = qubit_beta(ops)?;
        return Ok(BetaReport { beta, strategy, strategies: count, unique: count as usize });
    }
    if count > SDP_STRATEGY_LIMIT {
        return Err(Error::StrategyOverflow { count, limit: SDP_STRATEGY_LIMIT });
    }
    // Columns γ(·, k) ∈ o^n; a strategy is a d-tuple of columns, and its SDP
    // only depends on the multiset of column operators.
    let per_column = o.pow(n as u32);
    let mut classes: Vec<(usize, ComplexMatrix)> = Vec::new();
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    for c in 0..per_column {
        let col = column_digits(c, n, o);
        let m = ops.column_operator(&col);
        seen.entry(dedup_key(&m)).or_insert_with(|| {
            classes.push((c, m));
            classes.len() - 1
        });
    }
    let mut tuples = Vec::new();
    nondecreasing_tuples(classes.len(), d, &mut Vec::with_capacity(d), &mut tuples);
    let values: Vec<Result<f64>> = tuples
        .par_iter()
        .map(|tuple| povm_sdp(&tuple.iter().map(|&c| classes[c].1.clone()).collect::<Vec<_>>()))
        .collect();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, v) in values.into_iter().enumerate() {
        best = pick_best(best, (v?, i));
    }
    let tuple = &tuples[best.1];
    let mut table = vec![0; n * d];
    for (k, &c) in tuple.iter().enumerate() {
        for (x, a) in column_digits(classes[c].0, n, o).into_iter().enumerate() {
            table[x * d + k] = a;
        }
    }
    Ok(BetaReport {
        beta: best.0,
        strategy: DeterministicStrategy { settings: n, dim: d, table },
        strategies: count,
        unique: tuples.len(),
    })
}

fn nondecreasing_tuples(classes: usize, len: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == len {
        out.push(prefix.clone());
        return;
    }
    let start = prefix.last().copied().unwrap_or(0);
    for c in start..classes {
        prefix.push(c);
        nondecreasing_tuples(classes, len, prefix, out);
        prefix.pop();
    }
}

fn column_digits(mut c: usize, n: usize, o: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let a = c % o;
            c /= o;
            a
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalVisibility {
    pub v: f64,
    /// `false` when the noiseless set already satisfies `W ≤ β`.
    pub violation: bool,
}

/// Solves `v·W(M) + (1 − v)·N = β` where `N` is the witness value on noise.
pub fn critical_visibility(spec: &WitnessSpec, m: &MeasurementSet, beta: f64) -> Result<CriticalVisibility> {
    let w = witness_value(spec, m)?;
    if w <= beta {
        return Ok(CriticalVisibility { v: 1.0, violation: false });
    }
    let noise = noise_value(spec, m)?;
    if (w - noise).abs() < 1e-12 {
        return Err(invalid("witness takes the same value on the set and on noise; visibility is undefined"));
    }
    Ok(CriticalVisibility { v: (beta - noise) / (w - noise), violation: true })
}

#[derive(Debug, Deserialize)]
struct CoefficientEntry {
    a: usize,
    z: usize,
    x: usize,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SpecFile {
    Shorthand {
        #[serde(rename = "type")]
        kind: String,
    },
    Explicit {
        coefficients: Vec<CoefficientEntry>,
        states: Vec<JsonMatrix>,
    },
}

impl WitnessSpec {
    /// Reads either `{"coefficients": [{"a","z","x","value"}], "states":
    /// [...]}` or `{"type": "state-discrimination"}`, which is built from `m`.
    pub fn from_json(text: &str, m: &MeasurementSet) -> Result<Self> {
        let file: SpecFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        match file {
            SpecFile::Shorthand { kind } if kind == "state-discrimination" => state_discrimination_spec(m),
            SpecFile::Shorthand { kind } => Err(Error::Parse(format!("unknown witness type {kind:?}"))),
            SpecFile::Explicit { coefficients, states } => {
                let states = states
                    .iter()
                    .enumerate()
                    .map(|(z, s)| matrix_from_json(s).map_err(|e| structural(format!("state {z}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                let mut spec = WitnessSpec::new(m.outcomes(), m.settings(), StateEnsemble::new(states)?);
                spec.check_against(m)?;
                for c in coefficients {
                    spec.set_coefficient(c.a, c.z, c.x, c.value)?;
                }
                Ok(spec)
            }
        }
    }
}
