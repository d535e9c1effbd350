//! Sequential measurements: Lüders non-disturbance of classical models,
//! joint-measurability parents, the direct-sum instrument and the
//! joint-measurability visibility of dichotomic sets.

use classicality_solvers::{extract_hermitian, hermitian_entries, solve_sdp, SemidefiniteProgram, SymEntry};
use serde::Serialize;

use crate::error::{invalid, structural, Error, Result};
use crate::linalg::{join_parts, split_parts, sqrt_psd, ComplexMatrix, HermitianBasis};
use crate::measurements::{depolarize_operator, extend_direct_sum, MeasurementSet, Povm};
use crate::model_search::ClassicalModel;

/// Residual above which a scenario is reported as Lüders-disturbing.
pub const DISTURBANCE_THRESHOLD: f64 = 1e-5;
/// Largest number of dichotomic settings in [`jm_visibility_sdp`].
pub const MAX_JM_SETTINGS: usize = 6;
const SDP_TOL: f64 = 1e-8;

/// Per-`λ` devices `A_{a|λ}`, `B_{b|λ}` and their averages `A_a`, `B_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialScenario {
    pub weights: Vec<f64>,
    pub first: Vec<Povm>,
    pub second: Vec<Povm>,
    pub first_target: Povm,
    pub second_target: Povm,
}

fn average(weights: &[f64], povms: &[Povm]) -> Result<Povm> {
    let p0 = &povms[0];
    let elements = (0..p0.outcomes())
        .map(|a| {
            let mut s = ComplexMatrix::zeros(p0.dim());
            for (w, p) in weights.iter().zip(povms) {
                s.add_assign_scaled(*w, p.element(a));
            }
            s
        })
        .collect();
    Povm::new(elements)
}

impl SequentialScenario {
    /// Builds the targets as `q`-averages of the per-`λ` devices.
    pub fn new(weights: Vec<f64>, first: Vec<Povm>, second: Vec<Povm>) -> Result<Self> {
        if weights.is_empty() || weights.len() != first.len() || weights.len() != second.len() {
            return Err(structural("weights and devices must have equal nonzero length"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 || weights.iter().any(|&w| w < 0.0) {
            return Err(structural(format!("weights must be a distribution (sum {total})")));
        }
        let d = first[0].dim();
        if first.iter().chain(&second).any(|p| p.dim() != d)
            || first.iter().any(|p| p.outcomes() != first[0].outcomes())
            || second.iter().any(|p| p.outcomes() != second[0].outcomes())
        {
            return Err(structural("devices disagree in dimension or outcome count"));
        }
        let first_target = average(&weights, &first)?;
        let second_target = average(&weights, &second)?;
        Ok(Self { weights, first, second, first_target, second_target })
    }
}

fn device_povm(model: &ClassicalModel, l: usize, x: usize) -> Result<Povm> {
    let q = model.weights[l];
    let e: Vec<ComplexMatrix> = (0..model.dim).map(|k| ComplexMatrix::outer(&model.devices[l].column(k))).collect();
    let elements = (0..model.outcomes)
        .map(|a| {
            let mut s = ComplexMatrix::zeros(model.dim);
            for (k, ek) in e.iter().enumerate() {
                s.add_assign_scaled(model.response[l][x][k][a] / q, ek);
            }
            s
        })
        .collect();
    Povm::new(elements).map_err(|err| structural(format!("device {l}, setting {x}: {err}")))
}

/// `A_{a|λ} = Σ_k p(a|x_A,k,λ) E_{k|λ}` and likewise for `B`. The two
/// settings may coincide.
pub fn scenario_from_model(model: &ClassicalModel, x_a: usize, x_b: usize) -> Result<SequentialScenario> {
    model.validate()?;
    if x_a >= model.settings || x_b >= model.settings {
        return Err(invalid(format!("settings ({x_a}, {x_b}) out of range for {} settings", model.settings)));
    }
    let mass: f64 = model.weights.iter().sum();
    if mass < 1.0 - 1e-9 {
        return Err(structural(format!("model weights sum to {mass}")));
    }
    let keep: Vec<usize> = (0..model.num_devices()).filter(|&l| model.weights[l] > 0.0).collect();
    let weights = keep.iter().map(|&l| model.weights[l]).collect();
    let first = keep.iter().map(|&l| device_povm(model, l, x_a)).collect::<Result<_>>()?;
    let second = keep.iter().map(|&l| device_povm(model, l, x_b)).collect::<Result<_>>()?;
    SequentialScenario::new(weights, first, second)
}

/// `max_b ‖Σ_{a,λ} q(λ) √A_{a|λ} B_{b|λ} √A_{a|λ} − B_b‖_max`
pub fn luders_nondisturbance_residual(s: &SequentialScenario) -> Result<f64> {
    let d = s.first_target.dim();
    let roots: Vec<Vec<ComplexMatrix>> = s
        .first
        .iter()
        .map(|p| p.elements().iter().map(sqrt_psd).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for b in 0..s.second_target.outcomes() {
        let mut acc = ComplexMatrix::zeros(d);
        for (l, w) in s.weights.iter().enumerate() {
            let bl = s.second[l].element(b);
            for r in &roots[l] {
                acc.add_assign_scaled(*w, &(&(r * bl) * r));
            }
        }
        worst = worst.max((&acc - s.second_target.element(b)).max_abs());
    }
    Ok(worst)
}

/// `G_{(λ,k)} = q(λ) E_{k|λ}` with post-processings `p(a|x,(λ,k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct JmParent {
    /// `"λ,k"`
    pub labels: Vec<String>,
    pub elements: Vec<ComplexMatrix>,
    /// `post[x][μ][a]`
    pub post: Vec<Vec<Vec<f64>>>,
    /// Per setting, `max_a ‖Σ_μ p(a|x,μ) G_μ − Φ_v(M_{a|x})‖_max`.
    pub marginal_residuals: Vec<f64>,
}

impl JmParent {
    pub fn marginal_residual(&self) -> f64 {
        self.marginal_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn completeness_residual(&self) -> f64 {
        let d = self.elements.first().map_or(0, ComplexMatrix::dim);
        let mut s = ComplexMatrix::zeros(d);
        for g in &self.elements {
            s.add_assign_scaled(1.0, g);
        }
        (&s - &ComplexMatrix::identity(d)).max_abs()
    }
}

/// Parent POVM of a classical model, checked against `Φ_v(M)`.
pub fn jm_parent_from_model(model: &ClassicalModel, m: &MeasurementSet) -> Result<JmParent> {
    model.validate()?;
    if m.dim() != model.dim || m.settings() != model.settings || m.outcomes() != model.outcomes {
        return Err(structural("model and measurement set shapes differ"));
    }
    let (d, n, o) = (model.dim, model.settings, model.outcomes);
    let mut labels = Vec::new();
    let mut elements = Vec::new();
    let mut post = vec![Vec::new(); n];
    for (l, u) in model.devices.iter().enumerate() {
        let q = model.weights[l];
        if q <= 0.0 {
            continue;
        }
        for k in 0..d {
            labels.push(format!("{l},{k}"));
            elements.push(ComplexMatrix::outer(&u.column(k)).scale(q));
            for (x, p) in post.iter_mut().enumerate() {
                p.push((0..o).map(|a| model.response[l][x][k][a] / q).collect::<Vec<f64>>());
            }
        }
    }
    let marginal_residuals = (0..n)
        .map(|x| {
            (0..o)
                .map(|a| {
                    let mut s = ComplexMatrix::zeros(d);
                    for (mu, g) in elements.iter().enumerate() {
                        s.add_assign_scaled(post[x][mu][a], g);
                    }
                    (&s - &depolarize_operator(m.element(x, a), model.v)).max_abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(JmParent { labels, elements, post, marginal_residuals })
}

/// For `M = |a⟩⟨a| ⊕ M̃_a`, the instrument measuring the first block:
/// `max_b ‖Σ_a Tr(M_b (|a⟩⟨a| ⊕ 0)) M_a − M_b‖_max`.
pub fn extended_instrument_residual(inner: &Povm) -> f64 {
    let m = extend_direct_sum(inner);
    let (o, dim) = (inner.outcomes(), m.dim());
    let mut worst = 0.0f64;
    for b in 0..o {
        let mut acc = ComplexMatrix::zeros(dim);
        for a in 0..o {
            let t = m.element(b)[(a, a)].re;
            acc.add_assign_scaled(t, m.element(a));
        }
        worst = worst.max((&acc - m.element(b)).max_abs());
    }
    worst
}

/// Largest `v` such that `{Φ_v(Π_x), 𝟙 − Φ_v(Π_x)}` have a common parent
/// `{G_s}`, `s ∈ {0,1}^m`, with `Σ_{s_x = 0} G_s = Φ_v(Π_x)`.
pub fn jm_visibility_sdp(povms: &[Povm]) -> Result<f64> {
    Ok(jm_visibility_report(povms)?.v)
}

#[derive(Debug, Clone, Serialize)]
pub struct JmReport {
    pub v: f64,
    pub gap: f64,
    /// Largest deviation of the extracted parent's marginals from `Φ_v(Π_x)`.
    pub marginal_residual: f64,
}

pub fn jm_visibility_report(povms: &[Povm]) -> Result<JmReport> {
    let m = povms.len();
    if m == 0 || m > MAX_JM_SETTINGS {
        return Err(invalid(format!("need 1..={MAX_JM_SETTINGS} dichotomic settings, got {m}")));
    }
    let d = povms[0].dim();
    for (x, p) in povms.iter().enumerate() {
        if p.outcomes() != 2 || p.dim() != d {
            return Err(structural(format!("setting {x} is not a dichotomic measurement in dimension {d}")));
        }
    }
    let basis = HermitianBasis::new(d);
    let mut p = SemidefiniteProgram::new();
    let parents: Vec<usize> = (0..1usize << m).map(|_| p.add_block(2 * d)).collect();
    let v = p.add_block(1);
    let slack = p.add_block(1);
    p.add_objective([SymEntry::new(v, 0, 0, 1.0)]);
    p.add_constraint(vec![SymEntry::new(v, 0, 0, 1.0), SymEntry::new(slack, 0, 0, 1.0)], 1.0);
    let id = ComplexMatrix::identity(d);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..basis.len()).map(|i| split_parts(&basis.element(i))).collect();
    let id_coef = basis.coefficients(&id);
    for (x, povm) in povms.iter().enumerate() {
        let pi = povm.element(0);
        let t = pi.trace().re / d as f64;
        let centred = basis.coefficients(&pi.add_scaled(-t, &id));
        for i in 0..basis.len() {
            let mut entries: Vec<SymEntry> = parents
                .iter()
                .enumerate()
                .filter(|(s, _)| s >> x & 1 == 0)
                .flat_map(|(_, &b)| hermitian_entries(b, d, &parts[i].0, &parts[i].1, 0.5))
                .collect();
            if centred[i] != 0.0 {
                entries.push(SymEntry::new(v, 0, 0, -centred[i]));
            }
            p.add_constraint(entries, t * id_coef[i]);
        }
    }
    for i in 0..basis.len() {
        let entries = parents.iter().flat_map(|&b| hermitian_entries(b, d, &parts[i].0, &parts[i].1, 0.5)).collect();
        p.add_constraint(entries, id_coef[i]);
    }
    let sol = solve_sdp(&p, SDP_TOL)?.into_optimal().map_err(Error::from)?;
    let blocks = p.unflatten(&sol.values);
    let vis = blocks[v][(0, 0)];
    let g: Vec<ComplexMatrix> = parents
        .iter()
        .map(|&b| {
            let (re, im) = extract_hermitian(&blocks[b]);
            join_parts(d, &re, &im)
        })
        .collect();
    let mut residual = 0.0f64;
    for (x, povm) in povms.iter().enumerate() {
        let mut s = ComplexMatrix::zeros(d);
        for (idx, gs) in g.iter().enumerate() {
            if idx >> x & 1 == 0 {
                s.add_assign_scaled(1.0, gs);
            }
        }
        residual = residual.max((&s - &depolarize_operator(povm.element(0), vis)).max_abs());
    }
    Ok(JmReport { v: sol.objective, gap: sol.gap, marginal_residual: residual })
}
