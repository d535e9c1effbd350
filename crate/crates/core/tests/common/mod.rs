#![allow(dead_code)]

use classicality::linalg::{eig_hermitian, ComplexMatrix};
use classicality::measurements::Povm;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn random_matrix(d: usize, rng: &mut ChaCha20Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian(d: usize, rng: &mut ChaCha20Rng) -> ComplexMatrix {
    random_matrix(d, rng).hermitian_part()
}

pub fn random_psd(d: usize, rng: &mut ChaCha20Rng) -> ComplexMatrix {
    let a = random_matrix(d, rng);
    (&a * &a.adjoint()).hermitian_part()
}

/// `S^{-1/2} G_a S^{-1/2}` for random PSD `G_a` and `S = Σ G_a`.
pub fn random_povm(d: usize, outcomes: usize, rng: &mut ChaCha20Rng) -> Povm {
    let g: Vec<ComplexMatrix> = (0..outcomes).map(|_| random_psd(d, rng)).collect();
    let mut s = ComplexMatrix::zeros(d);
    for e in &g {
        s.add_assign_scaled(1.0, e);
    }
    let eig = eig_hermitian(&s).unwrap();
    let inv_root: Vec<f64> = eig.values.iter().map(|v| 1.0 / v.sqrt()).collect();
    let w = ComplexMatrix::from_spectrum(&inv_root, &eig.vectors);
    Povm::new(g.iter().map(|e| (&(&w * e) * &w).hermitian_part()).collect()).unwrap()
}
