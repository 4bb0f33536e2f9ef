use adalidar::image::Grid;
use adalidar::metrics::{compute, compute_pairs, fit_plane, planar_rmse};
use adalidar::MetricsError;
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Straight per-pixel loop: (mre %, rmse, log10, δ1..3 %, n).
fn naive(pred: &[f64], truth: &[f64]) -> (f64, f64, f64, [f64; 3], usize) {
    let (mut rel, mut sq, mut lg, mut hits, mut n) = (0.0, 0.0, 0.0, [0usize; 3], 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        if p == 0.0 || t == 0.0 {
            continue;
        }
        n += 1;
        rel += (p - t).abs() / t;
        sq += (p - t) * (p - t);
        lg += (p.log10() - t.log10()).abs();
        let r = if p > t { p / t } else { t / p };
        for (i, h) in hits.iter_mut().enumerate() {
            if r < 1.25f64.powi(i as i32 + 1) {
                *h += 1;
            }
        }
    }
    let nf = n as f64;
    (
        100.0 * rel / nf,
        (sq / nf).sqrt(),
        lg / nf,
        hits.map(|h| 100.0 * h as f64 / nf),
        n,
    )
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn matches_naive_loop_on_random_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..100 {
        let (w, h) = (rng.random_range(1..160), rng.random_range(1..120));
        let truth = Grid::from_fn(w, h, |_, _| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.3..10.0) });
        let pred = Grid::from_fn(w, h, |x, y| {
            if rng.random_bool(0.05) {
                0.0
            } else {
                truth.get(x, y) * rng.random_range(0.5..1.8) + 0.01
            }
        });
        let (mre, rmse, lg, d, n) = naive(pred.data(), truth.data());
        let Ok(r) = compute(&pred, &truth, None) else {
            assert_eq!(n, 0);
            continue;
        };
        assert_eq!(r.n_pixels, n, "trial {trial}");
        assert!(rel_close(r.mre, mre) && rel_close(r.rmse, rmse) && rel_close(r.log10, lg), "trial {trial}");
        assert!(rel_close(r.delta1, d[0]) && rel_close(r.delta2, d[1]) && rel_close(r.delta3, d[2]));
    }
}

#[test]
fn mask_restricts_pixels() {
    let truth = Grid::from_fn(10, 10, |x, _| 1.0 + x as f64);
    let pred = Grid::from_fn(10, 10, |x, y| if y < 5 { 1.0 + x as f64 } else { 2.0 * (1.0 + x as f64) });
    let top = Grid::from_fn(10, 10, |_, y| y < 5);
    let r = compute(&pred, &truth, Some(&top)).unwrap();
    assert_eq!((r.mre, r.n_pixels), (0.0, 50));
}

#[test]
fn planar_noise_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let pts: Vec<[f64; 3]> = (0..4000)
        .map(|_| {
            let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            [x, y, 2.0 + 0.2 * x - 0.1 * y + noise.sample(&mut rng)]
        })
        .collect();
    // orthogonal distance shrinks the vertical noise by the normal's z component
    let cos = 1.0 / (1.0f64 + 0.04 + 0.01).sqrt();
    let rmse = planar_rmse(&pts).unwrap();
    assert!((rmse - 0.05 * cos).abs() <= 0.1 * 0.05 * cos, "{rmse}");
}

#[test]
fn plane_fit_is_rotation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pts: Vec<[f64; 3]> = (0..500)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.02..0.02)])
        .collect();
    let base = fit_plane(&pts).unwrap();
    for i in 0..10 {
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.3 + i as f64);
        let rot = Rotation3::new(axis.normalize() * rng.random_range(0.0..3.0));
        let moved: Vec<[f64; 3]> = pts
            .iter()
            .map(|p| {
                let q = rot * Vector3::from(*p) + Vector3::new(3.0, -1.0, 5.0);
                [q[0], q[1], q[2]]
            })
            .collect();
        let fit = fit_plane(&moved).unwrap();
        assert!((fit.rmse - base.rmse).abs() <= 1e-9 * base.rmse);
        let n = rot * Vector3::from(base.normal);
        assert!((n.dot(&Vector3::from(fit.normal)).abs() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn degenerate_inputs() {
    assert_eq!(planar_rmse(&[[0.0; 3]; 10]), Err(MetricsError::DegenerateGeometry));
    assert!(matches!(compute_pairs(&[(f64::NAN, 1.0)]), Err(MetricsError::NonPositiveDepth { .. })));
    assert!(matches!(compute_pairs(&[(1.0, f64::INFINITY)]), Err(MetricsError::NonPositiveDepth { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn delta_thresholds_nest(pairs in prop::collection::vec((0.01f64..50.0, 0.01f64..50.0), 1..24)) {
        let r = compute_pairs(&pairs).unwrap();
        prop_assert!(r.delta1 <= r.delta2 && r.delta2 <= r.delta3);
        prop_assert!((0.0..=100.0).contains(&r.delta1) && r.delta3 <= 100.0);
        prop_assert!(r.mre >= 0.0 && r.rmse >= 0.0 && r.log10 >= 0.0);
    }

    #[test]
    fn joint_scaling(pairs in prop::collection::vec((0.05f64..20.0, 0.05f64..20.0), 1..24), c in 0.1f64..10.0) {
        let a = compute_pairs(&pairs).unwrap();
        let scaled: Vec<(f64, f64)> = pairs.iter().map(|&(p, t)| (c * p, c * t)).collect();
        let b = compute_pairs(&scaled).unwrap();
        prop_assert!((a.mre - b.mre).abs() <= 1e-9 * a.mre.max(1e-9));
        prop_assert!((a.log10 - b.log10).abs() <= 1e-9);
        prop_assert!((c * a.rmse - b.rmse).abs() <= 1e-9 * b.rmse.max(1e-9));
        // ratios move by at most an ulp, so only thresholds sitting on an ulp boundary could flip
        let edge = pairs.iter().any(|&(p, t)| {
            let r = (p / t).max(t / p);
            (1..=3).any(|i| (r / 1.25f64.powi(i) - 1.0).abs() < 1e-12)
        });
        if !edge {
            prop_assert_eq!((a.delta1, a.delta2, a.delta3), (b.delta1, b.delta2, b.delta3));
        }
    }
}
