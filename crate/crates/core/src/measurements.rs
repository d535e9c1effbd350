//! POVMs, measurement sets, noise channels and the concrete families used
//! throughout the crate.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, structural, Error, Result};
use crate::linalg::{eig_hermitian, ComplexMatrix, HERMITIAN_TOL, PSD_CLAMP_TOL};

pub const COMPLETENESS_TOL: f64 = 1e-9;
const RANK_ONE_TOL: f64 = 1e-8;

fn check_element(m: &ComplexMatrix, dim: usize, label: &str) -> Result<()> {
    if m.dim() != dim {
        return Err(structural(format!("{label}: dimension {} does not match {dim}", m.dim())));
    }
    let h = m.hermiticity_residual();
    if h > HERMITIAN_TOL {
        return Err(structural(format!("{label}: not Hermitian (residual {h:.3e})")));
    }
    let low = eig_hermitian(m)?.values[0];
    if low < -PSD_CLAMP_TOL {
        return Err(structural(format!("{label}: negative eigenvalue {low:.3e}")));
    }
    Ok(())
}

fn completeness_residual(elements: &[ComplexMatrix], dim: usize) -> f64 {
    let mut sum = ComplexMatrix::zeros(dim);
    for e in elements {
        sum.add_assign_scaled(1.0, e);
    }
    (&sum - &ComplexMatrix::identity(dim)).max_abs()
}

/// A positive operator-valued measure: PSD elements summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = elements.first().ok_or_else(|| structural("a POVM needs at least one outcome"))?.dim();
        for (a, e) in elements.iter().enumerate() {
            check_element(e, dim, &format!("outcome {a}"))?;
        }
        let r = completeness_residual(&elements, dim);
        if r > COMPLETENESS_TOL {
            return Err(structural(format!("elements do not sum to the identity (residual {r:.3e})")));
        }
        Ok(Self { dim, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn element(&self, a: usize) -> &ComplexMatrix {
        &self.elements[a]
    }

    pub fn completeness_residual(&self) -> f64 {
        completeness_residual(&self.elements, self.dim)
    }
}

/// The family `{M_{a|x}}` on a common Hilbert space, padded with zero
/// operators to a uniform outcome count.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    dim: usize,
    outcomes: usize,
    elements: Vec<Vec<ComplexMatrix>>,
}

impl MeasurementSet {
    /// Validates every setting as a POVM and pads short settings with zeros.
    pub fn new(settings: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let first = settings
            .first()
            .and_then(|s| s.first())
            .ok_or_else(|| structural("a measurement set needs at least one setting with one outcome"))?;
        let dim = first.dim();
        let outcomes = settings.iter().map(Vec::len).max().unwrap_or(0);
        let mut elements = Vec::with_capacity(settings.len());
        for (x, setting) in settings.into_iter().enumerate() {
            if setting.is_empty() {
                return Err(structural(format!("setting {x} has no outcomes")));
            }
            for (a, e) in setting.iter().enumerate() {
                check_element(e, dim, &format!("setting {x}, outcome {a}"))?;
            }
            let r = completeness_residual(&setting, dim);
            if r > COMPLETENESS_TOL {
                return Err(structural(format!(
                    "setting {x}: elements do not sum to the identity (residual {r:.3e})"
                )));
            }
            let mut padded = setting;
            padded.resize(outcomes, ComplexMatrix::zeros(dim));
            elements.push(padded);
        }
        Ok(Self { dim, outcomes, elements })
    }

    pub fn from_povms(povms: &[Povm]) -> Result<Self> {
        Self::new(povms.iter().map(|p| p.elements.clone()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> usize {
        self.elements.len()
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn element(&self, x: usize, a: usize) -> &ComplexMatrix {
        &self.elements[x][a]
    }

    pub fn setting(&self, x: usize) -> &[ComplexMatrix] {
        &self.elements[x]
    }

    pub fn povm(&self, x: usize) -> Povm {
        Povm { dim: self.dim, elements: self.elements[x].clone() }
    }

    /// Keeps only the listed settings, in the given order.
    pub fn select(&self, settings: &[usize]) -> Result<Self> {
        let mut elements = Vec::with_capacity(settings.len());
        for &x in settings {
            if x >= self.settings() {
                return Err(invalid(format!("setting {x} out of range (set has {})", self.settings())));
            }
            elements.push(self.elements[x].clone());
        }
        if elements.is_empty() {
            return Err(invalid("at least one setting must be selected"));
        }
        Ok(Self { dim: self.dim, outcomes: self.outcomes, elements })
    }

    fn map(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        Self {
            dim: self.dim,
            outcomes: self.outcomes,
            elements: self.elements.iter().map(|s| s.iter().map(&f).collect()).collect(),
        }
    }
}

/// A list of density matrices on a common space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEnsemble {
    dim: usize,
    states: Vec<ComplexMatrix>,
}

impl StateEnsemble {
    pub fn new(states: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = states.first().ok_or_else(|| structural("an ensemble needs at least one state"))?.dim();
        for (z, s) in states.iter().enumerate() {
            check_element(s, dim, &format!("state {z}"))?;
            let t = s.trace();
            if (t.re - 1.0).abs() > 1e-10 || t.im.abs() > 1e-10 {
                return Err(structural(format!("state {z}: trace {:.6} is not one", t.re)));
            }
        }
        Ok(Self { dim, states })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ComplexMatrix] {
        &self.states
    }
}

/// `Φ_v(X) = v X + (1 − v) Tr(X) 𝟙/d`
pub fn depolarize_operator(x: &ComplexMatrix, v: f64) -> ComplexMatrix {
    let d = x.dim();
    let t = x.trace().re / d as f64;
    let mut out = x.scale(v);
    for i in 0..d {
        out[(i, i)] += (1.0 - v) * t;
    }
    out
}

pub fn depolarize(m: &MeasurementSet, v: f64) -> Result<MeasurementSet> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid(format!("visibility {v} outside [0, 1]")));
    }
    Ok(m.map(|e| depolarize_operator(e, v)))
}

/// Scales every element by `η` and appends the failure outcome `(1 − η)𝟙`
/// to each setting.
pub fn apply_loss(m: &MeasurementSet, eta: f64) -> Result<MeasurementSet> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("efficiency {eta} outside [0, 1]")));
    }
    let d = m.dim;
    let fail = ComplexMatrix::identity(d).scale(1.0 - eta);
    let elements = m
        .elements
        .iter()
        .map(|s| s.iter().map(|e| e.scale(eta)).chain(std::iter::once(fail.clone())).collect())
        .collect();
    Ok(MeasurementSet { dim: d, outcomes: m.outcomes + 1, elements })
}

/// Projective measurement onto the columns of a unitary.
pub fn basis_measurement(u: &ComplexMatrix) -> Vec<ComplexMatrix> {
    (0..u.dim()).map(|k| ComplexMatrix::outer(&u.column(k))).collect()
}

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..n).take_while(|k| k * k <= n).all(|k| n % k != 0)
}

/// Unitaries whose columns are mutually unbiased bases, computational first.
pub fn mub_bases(d: usize, count: usize) -> Result<Vec<ComplexMatrix>> {
    if !is_prime(d) || d > 16 {
        return Err(invalid(format!("mutually unbiased bases are built for prime d ≤ 16, got {d}")));
    }
    if count < 2 || count > d + 1 {
        return Err(invalid(format!("basis count must lie in 2..={}, got {count}", d + 1)));
    }
    let mut out = vec![ComplexMatrix::identity(d)];
    if d == 2 {
        let h = FRAC_1_SQRT_2;
        out.push(ComplexMatrix::from_real(2, &[h, h, h, -h]));
        out.push(ComplexMatrix::from_fn(2, |i, j| match (i, j) {
            (0, _) => C64::new(h, 0.0),
            (1, 0) => C64::new(0.0, h),
            _ => C64::new(0.0, -h),
        }));
        out.truncate(count);
        return Ok(out);
    }
    let half = (d + 1) / 2;
    let norm = 1.0 / (d as f64).sqrt();
    for x in 0..count - 1 {
        out.push(ComplexMatrix::from_fn(d, |k, a| {
            let e = (a * k + x * k * k % d * half) % d;
            C64::from_polar(norm, 2.0 * PI * e as f64 / d as f64)
        }));
    }
    Ok(out)
}

pub fn mub_set(d: usize, count: usize) -> Result<MeasurementSet> {
    MeasurementSet::new(mub_bases(d, count)?.iter().map(basis_measurement).collect())
}

fn pauli() -> [ComplexMatrix; 3] {
    [
        ComplexMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]),
        ComplexMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 1) => C64::new(0.0, -1.0),
            (1, 0) => C64::new(0.0, 1.0),
            _ => C64::new(0.0, 0.0),
        }),
        ComplexMatrix::diagonal(&[1.0, -1.0]),
    ]
}

/// `w (𝟙 + n⃗·σ⃗)` for a Bloch vector `n`.
pub fn bloch_operator(n: [f64; 3], w: f64) -> ComplexMatrix {
    let s = pauli();
    let mut m = ComplexMatrix::identity(2);
    for (k, sk) in s.iter().enumerate() {
        m.add_assign_scaled(n[k], sk);
    }
    m.scale(w)
}

/// Vertices of the regular dodecahedron in a fixed order: the cube
/// `(±1, ±1, ±1)`, then `(0, ±1/φ, ±φ)`, `(±1/φ, ±φ, 0)`, `(±φ, 0, ±1/φ)`,
/// with `+` before `−` in every slot.
pub fn dodecahedron_vertices() -> Vec<[f64; 3]> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let ip = 1.0 / phi;
    let signs = [1.0, -1.0];
    let mut v = Vec::with_capacity(20);
    for &a in &signs {
        for &b in &signs {
            for &c in &signs {
                v.push([a, b, c]);
            }
        }
    }
    for &a in &signs {
        for &b in &signs {
            v.push([0.0, a * ip, b * phi]);
        }
    }
    for &a in &signs {
        for &b in &signs {
            v.push([a * ip, b * phi, 0.0]);
        }
    }
    for &a in &signs {
        for &b in &signs {
            v.push([a * phi, 0.0, b * ip]);
        }
    }
    v
}

/// Index groups of [`dodecahedron_vertices`] forming the five inscribed
/// regular tetrahedra.
pub const FIVE_TETRAHEDRA: [[usize; 4]; 5] =
    [[0, 3, 5, 6], [1, 8, 13, 19], [2, 11, 12, 18], [4, 9, 15, 16], [7, 10, 14, 17]];

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Unit Bloch vectors of the five tetrahedra, checked to have pairwise
/// inner products −1/3 within each group.
pub fn five_tetrahedra_vectors() -> Vec<[[f64; 3]; 4]> {
    let verts = dodecahedron_vertices();
    FIVE_TETRAHEDRA
        .iter()
        .map(|g| {
            let vs = g.map(|i| normalized(verts[i]));
            for i in 0..4 {
                for j in (i + 1)..4 {
                    let dot: f64 = (0..3).map(|k| vs[i][k] * vs[j][k]).sum();
                    assert!((dot + 1.0 / 3.0).abs() < 1e-9, "tetrahedron table is inconsistent");
                }
            }
            vs
        })
        .collect()
}

fn sic_from_vectors(vs: &[[f64; 3]; 4]) -> Vec<ComplexMatrix> {
    vs.iter().map(|&n| bloch_operator(n, 0.25)).collect()
}

/// Five qubit SIC-POVMs from the compound of five tetrahedra.
pub fn sic_five_tetrahedra() -> MeasurementSet {
    MeasurementSet::new(five_tetrahedra_vectors().iter().map(sic_from_vectors).collect())
        .expect("tetrahedral SICs are valid POVMs")
}

/// The single qubit SIC-POVM with Bloch vectors `(1,1,1)/√3, (1,−1,−1)/√3, …`.
pub fn sic_tetrahedron() -> Povm {
    Povm::new(sic_from_vectors(&five_tetrahedra_vectors()[0])).expect("valid SIC")
}

/// `{Π_a, 𝟙 − Π_a}` with `Π_a = (𝟙 + n⃗_a·σ⃗)/2` for each SIC direction.
pub fn binarized_sic() -> MeasurementSet {
    let vs = five_tetrahedra_vectors()[0];
    MeasurementSet::new(
        vs.iter()
            .map(|&n| vec![bloch_operator(n, 0.5), bloch_operator([-n[0], -n[1], -n[2]], 0.5)])
            .collect(),
    )
    .expect("valid dichotomic measurements")
}

/// `M_a = (2/3)|ψ_a⟩⟨ψ_a|`, `|ψ_a⟩ = cos(aπ/3)|0⟩ + sin(aπ/3)|1⟩`, `a = 1, 2, 3`.
pub fn trine() -> Povm {
    let elements = (1..=3)
        .map(|a| {
            let t = a as f64 * PI / 3.0;
            ComplexMatrix::outer(&[C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0)]).scale(2.0 / 3.0)
        })
        .collect();
    Povm::new(elements).expect("trine is a valid POVM")
}

/// `M_a = |a⟩⟨a| ⊕ M̃_a` on dimension `o + d`.
pub fn extend_direct_sum(inner: &Povm) -> Povm {
    let o = inner.outcomes();
    let elements = inner
        .elements()
        .iter()
        .enumerate()
        .map(|(a, m)| {
            let mut e = ComplexMatrix::zeros(o);
            e[(a, a)] = C64::new(1.0, 0.0);
            e.direct_sum(m)
        })
        .collect();
    Povm::new(elements).expect("direct sum of a POVM is a POVM")
}

/// Unit vector spanning a rank-one operator, or `None` for the zero operator.
pub fn rank_one_vector(m: &ComplexMatrix) -> Result<Option<Vec<C64>>> {
    let e = eig_hermitian(m)?;
    let d = m.dim();
    let top = e.values[d - 1];
    if top <= RANK_ONE_TOL {
        return Ok(None);
    }
    let v = e.vectors.column(d - 1);
    let rest = (m - &ComplexMatrix::outer(&v).scale(top)).max_abs();
    if rest > RANK_ONE_TOL {
        return Err(Error::Unsupported(format!("element is not rank one (residual {rest:.3e})")));
    }
    Ok(Some(v))
}

/// Probe states `ρ_{(x,a)}`: the normalised projector of each element,
/// indexed `z = x·o + a`. Zero (padded) elements get `𝟙/d`.
pub fn discrimination_ensemble(m: &MeasurementSet) -> Result<StateEnsemble> {
    let d = m.dim();
    let mut states = Vec::with_capacity(m.settings() * m.outcomes());
    for x in 0..m.settings() {
        for a in 0..m.outcomes() {
            let s = match rank_one_vector(m.element(x, a))
                .map_err(|e| Error::Unsupported(format!("setting {x}, outcome {a}: {e}")))?
            {
                Some(v) => ComplexMatrix::outer(&v),
                None => ComplexMatrix::identity(d).scale(1.0 / d as f64),
            };
            states.push(s);
        }
    }
    StateEnsemble::new(states)
}

/// A complex matrix in JSON: rows of `[re, im]` pairs.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &ComplexMatrix) -> JsonMatrix {
    (0..m.dim()).map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect()).collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<ComplexMatrix> {
    ComplexMatrix::from_rows(rows.iter().map(|r| r.iter().map(|p| C64::new(p[0], p[1])).collect()).collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct SettingFile {
    outcomes: Vec<JsonMatrix>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SetFile {
    dim: usize,
    settings: Vec<SettingFile>,
}

impl MeasurementSet {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SetFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.settings.is_empty() {
            return Err(structural("measurement set has no settings"));
        }
        let mut settings = Vec::with_capacity(file.settings.len());
        for (x, s) in file.settings.iter().enumerate() {
            let mut outcomes = Vec::with_capacity(s.outcomes.len());
            for (a, m) in s.outcomes.iter().enumerate() {
                let m = matrix_from_json(m).map_err(|e| structural(format!("setting {x}, outcome {a}: {e}")))?;
                if m.dim() != file.dim {
                    return Err(structural(format!(
                        "setting {x}, outcome {a}: dimension {} does not match declared {}",
                        m.dim(),
                        file.dim
                    )));
                }
                outcomes.push(m);
            }
            settings.push(outcomes);
        }
        Self::new(settings)
    }

    pub fn to_json(&self) -> String {
        let file = SetFile {
            dim: self.dim,
            settings: self
                .elements
                .iter()
                .map(|s| SettingFile { outcomes: s.iter().map(matrix_to_json).collect() })
                .collect(),
        };
        serde_json::to_string(&file).expect("serialisable")
    }
}
