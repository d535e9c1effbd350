use classicality::linalg::max_component_statistic;
use classicality::rng::{stream, Stream};
use classicality::thresholds::*;
use proptest::prelude::*;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[test]
fn closed_form_values() {
    assert_eq!(classicality_threshold(2).unwrap(), 0.5);
    assert!((classicality_threshold(7).unwrap() - 0.2655).abs() <= 5e-5);
    let v = classicality_threshold(100).unwrap();
    let asym = (EULER_GAMMA - 1.0 + 100f64.ln()) / 100.0;
    assert!((v / asym - 1.0).abs() < 0.02, "{v} vs {asym}");
}

#[test]
fn no_loss_branch() {
    for d in [2usize, 3, 5, 7] {
        let h = harmonic(d).unwrap();
        for t in [0.05, 0.5 / d as f64, 1.0 / d as f64] {
            assert!(s_n(t, d, 0).unwrap().abs() <= 1e-12);
            assert!((s_n(t, d, 1).unwrap() - ((d - 1) as f64 * t - h)).abs() <= 1e-12);
            let p = loss_noise_point(d, t).unwrap();
            assert!((p.v - classicality_threshold(d).unwrap()).abs() <= 1e-10);
            assert!((p.eta - 1.0).abs() <= 1e-10);
        }
    }
    let p = loss_noise_point(3, 1.0 / 3.0).unwrap();
    assert!((p.v - 5.0 / 12.0).abs() <= 1e-10);
}

#[test]
fn high_loss_branch() {
    let p = loss_noise_point(2, 0.75).unwrap();
    assert!((p.v - 0.75).abs() <= 1e-10 && (p.eta - 0.5).abs() <= 1e-10);
    for d in [2usize, 3, 5, 7] {
        for t in [0.51, 0.75, 0.99] {
            let p = loss_noise_point(d, t).unwrap();
            assert!((p.v - t).abs() <= 1e-10);
            assert!((p.eta - d as f64 * (1.0 - t).powi(d as i32 - 1)).abs() <= 1e-10);
        }
    }
}

#[test]
fn singular_point_reported() {
    assert!(loss_noise_point(3, 1.0).is_err());
}

/// Evaluates the curve, skipping only the singular tail near `t = 1` where
/// `η = d(1 − t)^{d−1}` falls below the singularity threshold.
fn regular_points(d: usize, ts: &[f64]) -> Vec<LossNoisePoint> {
    ts.iter()
        .filter_map(|&t| match loss_noise_point(d, t) {
            Ok(p) => Some(p),
            Err(e) => {
                assert!(t > 0.5 && d as f64 * (1.0 - t).powi(d as i32 - 1) < 1e-11, "d={d} t={t}: {e}");
                None
            }
        })
        .collect()
}

fn grid(d: usize, points: usize) -> Vec<f64> {
    let lo = 1.0 / d as f64;
    (0..points).map(|i| lo + (1.0 - lo) * i as f64 / points as f64).collect()
}

#[test]
fn curve_is_monotone() {
    for d in [2usize, 3, 5, 7] {
        let pts = regular_points(d, &grid(d, 1000));
        assert!(pts.len() > 900);
        for w in pts.windows(2) {
            assert!(w[1].eta <= w[0].eta + 1e-12, "d={d} t={}", w[1].t);
            assert!(w[1].v >= w[0].v - 1e-12, "d={d} t={}", w[1].t);
        }
        for p in &pts {
            assert!((0.0..=1.0).contains(&p.v) && (0.0..=1.0 + 1e-12).contains(&p.eta));
        }
    }
}

#[test]
fn curve_is_continuous() {
    for d in [2usize, 3, 5, 7] {
        let start = 1.0 / d as f64;
        let ts: Vec<f64> = (0..).map(|i| start + 1e-4 * i as f64).take_while(|&t| t < 0.999).collect();
        let pts = regular_points(d, &ts);
        for w in pts.windows(2) {
            assert!((w[1].v - w[0].v).abs() < 1e-2 && (w[1].eta - w[0].eta).abs() < 1e-2, "d={d} t={}", w[0].t);
        }
    }
}

#[test]
fn monte_carlo_consistency() {
    for d in [2usize, 3, 4, 5] {
        let (mean, se) = max_component_statistic(d, 100_000, &mut stream(d as u64, Stream::MonteCarlo)).unwrap();
        let df = d as f64;
        let from_mc = df / (df - 1.0) * mean - 1.0 / (df - 1.0);
        assert!((classicality_threshold(d).unwrap() - from_mc).abs() <= 3.0 * se * df / (df - 1.0));
    }
}

proptest! {
    #[test]
    fn threshold_matches_formula(d in 2usize..=60) {
        let h: f64 = (1..=d).map(|k| 1.0 / k as f64).sum();
        prop_assert!((classicality_threshold(d).unwrap() - (h - 1.0) / (d - 1) as f64).abs() < 1e-14);
    }

    #[test]
    fn curve_stays_in_unit_square(d in 2usize..=10, t in 0.01f64..0.999) {
        let eta = if t > 0.5 { d as f64 * (1.0 - t).powi(d as i32 - 1) } else { 1.0 };
        prop_assume!(eta > 1e-11);
        let p = loss_noise_point(d, t).unwrap();
        prop_assert!(p.v >= -1e-9 && p.v <= 1.0 + 1e-9);
        prop_assert!(p.eta >= -1e-9 && p.eta <= 1.0 + 1e-9);
    }
}
