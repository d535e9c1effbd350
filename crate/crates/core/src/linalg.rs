//! Dense complex matrices for small dimensions.
//!
//! Everything is row-major `Complex64`. Dimensions in this crate stay below
//! twenty, so the routines are straightforward O(d³) loops.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, structural, Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;
pub const PSD_CLAMP_TOL: f64 = 1e-10;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> =
                (0..self.dim).map(|j| format!("{:+.4}{:+.4}i", self[(i, j)].re, self[(i, j)].im)).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Checked constructor from nested rows.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(structural("matrix must have at least one row"));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(structural(format!("row {i} has {} entries, expected {dim}", row.len())));
            }
            data.extend(row);
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(structural(format!("entry ({}, {}) is not finite", k / dim, k % dim)));
        }
        Ok(Self { dim, data })
    }

    pub fn from_real(dim: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), dim * dim);
        Self { dim, data: values.iter().map(|&v| C64::new(v, 0.0)).collect() }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// `|u⟩⟨u|`
    pub fn outer(u: &[C64]) -> Self {
        Self::from_fn(u.len(), |i, j| u[i] * u[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> Vec<C64> {
        self.data[i * self.dim..(i + 1) * self.dim].to_vec()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// `self + s·other`
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b * s).collect() }
    }

    pub fn add_assign_scaled(&mut self, s: f64, other: &Self) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        let n = self.dim;
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                s += self[(i, k)] * other[(k, i)];
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖A − A†‖_max`
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                r = r.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        r
    }

    /// `‖U†U − 𝟙‖_max`
    pub fn unitarity_residual(&self) -> f64 {
        (&self.adjoint() * self).sub_identity().max_abs()
    }

    fn sub_identity(mut self) -> Self {
        for i in 0..self.dim {
            self[(i, i)] -= 1.0;
        }
        self
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// `(A + A†)/2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| 0.5 * (self[(i, j)] + self[(j, i)].conj()))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// `A ⊕ B`
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (p, q) = (self.dim, other.dim);
        let mut m = Self::zeros(p + q);
        for i in 0..p {
            for j in 0..p {
                m[(i, j)] = self[(i, j)];
            }
        }
        for i in 0..q {
            for j in 0..q {
                m[(p + i, p + j)] = other[(i, j)];
            }
        }
        m
    }

    /// Square sub-block starting at `(start, start)` of size `size`.
    pub fn block(&self, start: usize, size: usize) -> Self {
        Self::from_fn(size, |i, j| self[(start + i, start + j)])
    }

    /// Largest entry of the rectangular block rows `r0..r0+nr`, columns `c0..c0+nc`.
    pub fn block_max_abs(&self, r0: usize, nr: usize, c0: usize, nc: usize) -> f64 {
        let mut m: f64 = 0.0;
        for i in r0..r0 + nr {
            for j in c0..c0 + nc {
                m = m.max(self[(i, j)].norm());
            }
        }
        m
    }

    /// `U · diag(values) · U†`
    pub fn from_spectrum(values: &[f64], vectors: &ComplexMatrix) -> Self {
        let n = vectors.dim;
        Self::from_fn(n, |i, j| (0..n).map(|k| vectors[(i, k)] * values[k] * vectors[(j, k)].conj()).sum())
    }

    /// `⟨u| A |u⟩` (real part, for Hermitian `A`).
    pub fn expectation(&self, u: &[C64]) -> f64 {
        let n = self.dim;
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..n {
                row += self[(i, j)] * u[j];
            }
            s += u[i].conj() * row;
        }
        s.re
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.add_scaled(-1.0, rhs)
    }
}

/// Result of [`eig_hermitian`]: ascending eigenvalues and the unitary whose
/// columns are the matching eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Eigen-decomposition of a Hermitian matrix by complex cyclic Jacobi
/// rotations.
pub fn eig_hermitian(h: &ComplexMatrix) -> Result<Eigen> {
    let r = h.hermiticity_residual();
    if r > HERMITIAN_TOL * (1.0 + h.max_abs()) {
        return Err(structural(format!("matrix is not Hermitian (residual {r:.3e})")));
    }
    let n = h.dim();
    let mut a = h.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-16 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                // Rotate the phase of index q so that a_pq becomes real.
                let pc = (apq / mag).conj();
                for k in 0..n {
                    a[(k, q)] *= pc;
                    a[(q, k)] *= pc.conj();
                    v[(k, q)] *= pc;
                }
                a[(p, q)] = C64::new(mag, 0.0);
                a[(q, p)] = C64::new(mag, 0.0);
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * c - akq * s;
                    a[(k, q)] = akp * s + akq * c;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = apk * c - aqk * s;
                    a[(q, k)] = apk * s + aqk * c;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * c - vkq * s;
                    v[(k, q)] = vkp * s + vkq * c;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    Ok(Eigen { values, vectors })
}

/// Principal square root of a positive semidefinite matrix. Eigenvalues in
/// `[−1e−10, 0)` are clamped to zero.
pub fn sqrt_psd(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = eig_hermitian(h)?;
    if let Some(&low) = e.values.first() {
        if low < -PSD_CLAMP_TOL {
            return Err(Error::Negativity { eigenvalue: low });
        }
    }
    let roots: Vec<f64> = e.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(ComplexMatrix::from_spectrum(&roots, &e.vectors))
}

pub fn min_eigenvalue(h: &ComplexMatrix) -> Result<f64> {
    Ok(eig_hermitian(h)?.values.first().copied().unwrap_or(0.0))
}

/// Haar-distributed unitary: complex Ginibre matrix, Householder QR, and the
/// phase correction `Q · diag(R_ii / |R_ii|)`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if d < 1 {
        return Err(invalid("dimension must be at least 1"));
    }
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    let mut a = ComplexMatrix::from_fn(d, |_, _| C64::new(normal.sample(rng), normal.sample(rng)));
    let mut q = ComplexMatrix::identity(d);
    for k in 0..d {
        // Householder vector zeroing a[k+1.., k].
        let norm: f64 = (k..d).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let akk = a[(k, k)];
        let phase = if akk.norm() == 0.0 { C64::new(1.0, 0.0) } else { akk / akk.norm() };
        let mut w: Vec<C64> = vec![C64::new(0.0, 0.0); d];
        w[k] = akk + phase * norm;
        for i in (k + 1)..d {
            w[i] = a[(i, k)];
        }
        let wn: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        if wn == 0.0 {
            continue;
        }
        // A ← (𝟙 − 2ww†/‖w‖²) A
        for j in 0..d {
            let s: C64 = (k..d).map(|i| w[i].conj() * a[(i, j)]).sum::<C64>() * (2.0 / wn);
            for i in k..d {
                let wi = w[i];
                a[(i, j)] -= wi * s;
            }
        }
        // Q ← Q (𝟙 − 2ww†/‖w‖²)
        for i in 0..d {
            let s: C64 = (k..d).map(|j| q[(i, j)] * w[j]).sum::<C64>() * (2.0 / wn);
            for j in k..d {
                let wj = w[j];
                q[(i, j)] -= s * wj.conj();
            }
        }
    }
    for j in 0..d {
        let r = a[(j, j)];
        let ph = if r.norm() == 0.0 { C64::new(1.0, 0.0) } else { r / r.norm() };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    Ok(q)
}

/// Sample mean and standard error of `max_a |u_a|²` for `u` the first
/// column of a Haar unitary.
pub fn max_component_statistic<R: Rng + ?Sized>(d: usize, samples: usize, rng: &mut R) -> Result<(f64, f64)> {
    if samples < 1 {
        return Err(invalid("at least one sample is required"));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let u = haar_unitary(d, rng)?;
        let norm: f64 = (0..d).map(|a| u[(a, 0)].norm_sqr()).sum();
        let m = (0..d).map(|a| u[(a, 0)].norm_sqr()).fold(0.0, f64::max) / norm;
        sum += m;
        sum_sq += m * m;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok((mean, (var / n).sqrt()))
}

/// Orthonormal basis of the real space of `d×d` Hermitian matrices under
/// `⟨A, B⟩ = Tr(A B)`.
///
/// Element order: the `d` diagonal units `E_ii`, then for each `i < j` the
/// pair `(E_ij + E_ji)/√2`, `i(E_ij − E_ji)/√2`.
#[derive(Debug, Clone)]
pub struct HermitianBasis {
    dim: usize,
    pairs: Vec<(usize, usize)>,
}

impl HermitianBasis {
    pub fn new(dim: usize) -> Self {
        let mut pairs = Vec::new();
        for i in 0..dim {
            for j in (i + 1)..dim {
                pairs.push((i, j));
            }
        }
        Self { dim, pairs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.dim * self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.dim == 0
    }

    pub fn element(&self, index: usize) -> ComplexMatrix {
        let d = self.dim;
        let mut m = ComplexMatrix::zeros(d);
        if index < d {
            m[(index, index)] = C64::new(1.0, 0.0);
            return m;
        }
        let k = index - d;
        let (i, j) = self.pairs[k / 2];
        if k % 2 == 0 {
            m[(i, j)] = C64::new(1.0 / SQRT_2, 0.0);
            m[(j, i)] = C64::new(1.0 / SQRT_2, 0.0);
        } else {
            m[(i, j)] = C64::new(0.0, 1.0 / SQRT_2);
            m[(j, i)] = C64::new(0.0, -1.0 / SQRT_2);
        }
        m
    }

    /// Coefficients `Tr(B_i H)`; the imaginary part of `H` beyond its
    /// Hermitian part is ignored.
    pub fn coefficients(&self, h: &ComplexMatrix) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            out.push(h[(i, i)].re);
        }
        for &(i, j) in &self.pairs {
            let z = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            out.push(SQRT_2 * z.re);
            out.push(SQRT_2 * z.im);
        }
        out
    }

    /// Coefficients of `|u⟩⟨u|`.
    pub fn projector_coefficients(&self, u: &[C64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            out.push(u[i].norm_sqr());
        }
        for &(i, j) in &self.pairs {
            let z = u[i] * u[j].conj();
            out.push(SQRT_2 * z.re);
            out.push(SQRT_2 * z.im);
        }
        out
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> ComplexMatrix {
        let d = self.dim;
        let mut m = ComplexMatrix::zeros(d);
        for i in 0..d {
            m[(i, i)] = C64::new(coeffs[i], 0.0);
        }
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let re = coeffs[d + 2 * k] / SQRT_2;
            let im = coeffs[d + 2 * k + 1] / SQRT_2;
            m[(i, j)] = C64::new(re, im);
            m[(j, i)] = C64::new(re, -im);
        }
        m
    }
}

/// Entries of a Hermitian matrix split into row-major real and imaginary parts.
pub fn split_parts(h: &ComplexMatrix) -> (Vec<f64>, Vec<f64>) {
    (h.entries().iter().map(|z| z.re).collect(), h.entries().iter().map(|z| z.im).collect())
}

pub fn join_parts(d: usize, re: &[f64], im: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, |i, j| C64::new(re[i * d + j], im[i * d + j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_hermitian(d: usize, rng: &mut ChaCha20Rng) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        g.hermitian_part()
    }

    #[test]
    fn diagonal_spectrum() {
        let e = eig_hermitian(&ComplexMatrix::diagonal(&[1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0]);
        assert!((&e.vectors - &ComplexMatrix::identity(2)).max_abs() < 1e-15);
    }

    #[test]
    fn pauli_x_spectrum() {
        let x = ComplexMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]);
        let e = eig_hermitian(&x).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_five_by_five_residual() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let h = random_hermitian(5, &mut rng);
        let e = eig_hermitian(&h).unwrap();
        let hv = &h * &e.vectors;
        let vl = &e.vectors * &ComplexMatrix::diagonal(&e.values);
        assert!((&hv - &vl).max_abs() <= 1e-9);
        assert!(e.vectors.unitarity_residual() <= 1e-10);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = ComplexMatrix::from_real(2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(eig_hermitian(&m), Err(Error::Structural(_))));
    }

    #[test]
    fn square_roots() {
        let id = ComplexMatrix::identity(3);
        assert!((&sqrt_psd(&id).unwrap() - &id).max_abs() < 1e-14);
        let r = sqrt_psd(&ComplexMatrix::diagonal(&[4.0, 9.0])).unwrap();
        assert!((&r - &ComplexMatrix::diagonal(&[2.0, 3.0])).max_abs() < 1e-14);
        assert!(matches!(sqrt_psd(&ComplexMatrix::diagonal(&[1.0, -1e-6])), Err(Error::Negativity { .. })));
        assert!(sqrt_psd(&ComplexMatrix::diagonal(&[1.0, -1e-12])).is_ok());
    }

    #[test]
    fn rank_one_square_root() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let u = haar_unitary(3, &mut rng).unwrap().column(0);
        let p = ComplexMatrix::outer(&u);
        let r = sqrt_psd(&p.scale(0.5)).unwrap();
        assert!((&r - &p.scale(std::f64::consts::FRAC_1_SQRT_2)).max_abs() < 1e-8);
    }

    #[test]
    fn haar_trivial_dimension_is_a_phase() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let u = haar_unitary(1, &mut rng).unwrap();
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-14);
        assert!(haar_unitary(0, &mut rng).is_err());
    }

    #[test]
    fn haar_is_reproducible_and_unitary() {
        let a = haar_unitary(3, &mut ChaCha20Rng::seed_from_u64(42)).unwrap();
        let b = haar_unitary(3, &mut ChaCha20Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        assert!(a.unitarity_residual() <= 1e-10);
    }

    #[test]
    fn basis_is_orthonormal() {
        let basis = HermitianBasis::new(3);
        for i in 0..9 {
            for j in 0..9 {
                let t = basis.element(i).trace_product(&basis.element(j));
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((t.re - expected).abs() < 1e-12 && t.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn basis_coefficients_match_trace_products() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let h = random_hermitian(4, &mut rng);
        let basis = HermitianBasis::new(4);
        let c = basis.coefficients(&h);
        for (i, ci) in c.iter().enumerate() {
            assert!((basis.element(i).trace_product(&h).re - ci).abs() < 1e-12);
        }
        let u = haar_unitary(4, &mut rng).unwrap().column(1);
        let pc = basis.projector_coefficients(&u);
        let direct = basis.coefficients(&ComplexMatrix::outer(&u));
        for (a, b) in pc.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn single_component_statistic_is_one() {
        let (mean, se) = max_component_statistic(1, 10, &mut ChaCha20Rng::seed_from_u64(0)).unwrap();
        assert!((mean - 1.0).abs() < 1e-12 && se < 1e-12);
    }
}
