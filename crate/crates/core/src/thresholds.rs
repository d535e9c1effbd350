//! Closed-form classicality thresholds for the set of all projective
//! measurements, with and without detection loss.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Largest dimension for which the alternating sums are evaluated.
pub const MAX_CURVE_DIM: usize = 64;

const FLOOR_NUDGE: f64 = 1e-12;
const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossNoisePoint {
    pub t: f64,
    pub v: f64,
    pub eta: f64,
}

/// `H_n = Σ_{k=1}^n 1/k`, summed from the smallest term.
pub fn harmonic(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(invalid("harmonic number needs n ≥ 1"));
    }
    Ok((1..=n).rev().map(|k| 1.0 / k as f64).sum())
}

/// `v* = (H_d − 1)/(d − 1)`
pub fn classicality_threshold(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(invalid(format!("dimension must be at least 2, got {d}")));
    }
    Ok((harmonic(d)? - 1.0) / (d - 1) as f64)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

fn pairwise_sum(terms: &[f64]) -> f64 {
    match terms.len() {
        0 => 0.0,
        1 => terms[0],
        n => pairwise_sum(&terms[..n / 2]) + pairwise_sum(&terms[n / 2..]),
    }
}

fn check_curve_args(t: f64, d: usize) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(invalid(format!("t = {t} outside (0, 1]")));
    }
    if !(2..=MAX_CURVE_DIM).contains(&d) {
        return Err(invalid(format!("dimension must lie in 2..={MAX_CURVE_DIM}, got {d}")));
    }
    Ok(())
}

/// `Σ_{m=from}^{min(⌊1/t⌋, d)} (−1)^m C(d, m) (1 − tm)^{d−1} w(m)`
fn alternating_sum(t: f64, d: usize, from: usize, w: impl Fn(usize) -> f64) -> f64 {
    let top = ((1.0 / t + FLOOR_NUDGE).floor() as usize).min(d);
    let terms: Vec<f64> = (from..=top)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let base = (1.0 - t * m as f64).max(0.0);
            sign * binomial(d, m) as f64 * base.powi(d as i32 - 1) * w(m)
        })
        .collect();
    pairwise_sum(&terms)
}

/// `S_n(t) = Σ_{m=n}^{min(⌊1/t⌋, d)} (−1)^m / m^n · C(d, m) · (1 − tm)^{d−1}`
/// for `n ∈ {0, 1}`; the `m = 0` term of `S_0` is 1.
pub fn s_n(t: f64, d: usize, n: u32) -> Result<f64> {
    check_curve_args(t, d)?;
    if n > 1 {
        return Err(invalid(format!("S_n is defined for n ∈ {{0, 1}}, got {n}")));
    }
    Ok(alternating_sum(t, d, n as usize, |m| if n == 1 { 1.0 / m as f64 } else { 1.0 }))
}

/// One point `(v(t), η(t))` of the loss/noise boundary,
/// `η = 1 − S_0`, `v = t − (S_1/η + 1)/(d − 1)`.
///
/// Both are evaluated without the cancellation in `1 − S_0` and
/// `S_1 + η`: `η = −Σ_{m≥1} (−1)^m C(d,m)(1 − tm)^{d−1}` and
/// `S_1 + η = Σ_{m≥2} (−1)^m C(d,m)(1 − tm)^{d−1}(1/m − 1)`.
pub fn loss_noise_point(d: usize, t: f64) -> Result<LossNoisePoint> {
    check_curve_args(t, d)?;
    let eta = -alternating_sum(t, d, 1, |_| 1.0);
    if eta < SINGULAR_TOL {
        return Err(Error::Unsupported(format!("curve is singular at t = {t} (η = {eta:.3e})")));
    }
    let numerator = alternating_sum(t, d, 2, |m| 1.0 / m as f64 - 1.0);
    let v = t - numerator / ((d - 1) as f64 * eta);
    Ok(LossNoisePoint { t, v, eta })
}

pub fn loss_noise_curve(d: usize, t_grid: &[f64]) -> Result<Vec<LossNoisePoint>> {
    t_grid.iter().map(|&t| loss_noise_point(d, t)).collect()
}

/// `η* = d (1 − v)^{d−1}`, valid for `v > ½`.
pub fn critical_efficiency(d: usize, v: f64) -> Result<f64> {
    if d < 2 {
        return Err(invalid(format!("dimension must be at least 2, got {d}")));
    }
    if !(v > 0.5 && v <= 1.0) {
        return Err(invalid(format!("closed form needs v in (1/2, 1], got {v}")));
    }
    Ok(d as f64 * (1.0 - v).powi(d as i32 - 1))
}
