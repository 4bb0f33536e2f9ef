//! Receiver models checked against a thin-lens re-derivation written
//! independently of the library formulas.

use std::f64::consts::PI;

use adalidar::optics::{self, characterize, fov_limit_underfocused, ReceiverKind};
use adalidar::{ReceiverSpec, TransmitterSpec};
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 1e-6;

/// Blur-circle route: image plane of a dot at `z` sits at `u' = fz/(z−f)`;
/// a detector at `u` sees a blur disk of diameter `A·|u'−u|/u'`, which
/// subtends `2·atan(blur/(2u))` from the lens.
fn kernel_apex(a: f64, u: f64, f: f64, z: f64) -> f64 {
    let u_img = f * z / (z - f);
    let blur = a * (u_img - u).abs() / u_img;
    2.0 * (blur / (2.0 * u)).atan()
}

struct Oracle {
    fov: f64,
    s: f64,
    volume: f64,
}

fn oracle(m: f64, w0: f64, lambda: f64, mirror: f64, kind: ReceiverKind, a: f64, u: f64, f: f64, z: f64) -> Oracle {
    let omega = m * m * lambda / (w0 * PI);
    let physical = omega < PI;
    match kind {
        ReceiverKind::Retroreflective => {
            // mirror of radius w0/2·2 seen from z; the return can't exceed the beam
            let seen = (w0 / (2.0 * z)).atan().min(omega / 2.0);
            Oracle {
                fov: mirror,
                s: if physical { seen / (omega * z * (omega / 2.0).tan()) } else { 0.0 },
                volume: (1.0 / 3.0) * PI * (w0 / 2.0).powi(2) * u,
            }
        }
        ReceiverKind::ReceiverArray => Oracle {
            fov: f64::min(2.0 * (a / 2.0).atan2(u), mirror),
            s: if physical { 0.5 / (z * (omega / 2.0).tan()) } else { 0.0 },
            volume: a * a * u,
        },
        ReceiverKind::SingleDetector => {
            let k = kernel_apex(a, u, f, z);
            let falloff = 0.5 / (z * (omega / 2.0).tan());
            Oracle {
                fov: k.min(mirror),
                s: if physical { falloff / k } else { 0.0 },
                volume: (1.0 / 3.0) * PI * (a / 2.0).powi(2) * u,
            }
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

#[test]
fn random_designs_match_thin_lens_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..1000 {
        let m = rng.random_range(1.0..100.0);
        let w0 = rng.random_range(0.1e-3..5e-3);
        let lambda = rng.random_range(0.4e-6..1.6e-6);
        let mirror = rng.random_range(5f64..60.0).to_radians();
        let kind = ReceiverKind::ALL[i % 3];
        let a = rng.random_range(1e-3..0.1);
        let u = rng.random_range(1e-3..0.05);
        let f = rng.random_range(1e-3..0.05);
        let z = 0.5 * 200f64.powf(rng.random_range(0.0..1.0));
        let tx = TransmitterSpec::new(m, w0, lambda, mirror).unwrap();
        let rx = ReceiverSpec::new(kind, 4, a, u, f).unwrap();
        let got = characterize(&tx, &rx, z).unwrap();
        let want = oracle(m, w0, lambda, mirror, kind, a, u, f, z);
        assert!(close(got.fov, want.fov, 1e-9), "{i} {kind:?} fov {} vs {}", got.fov, want.fov);
        assert!(close(got.received_radiance, want.s, 1e-9), "{i} {kind:?} s {} vs {}", got.received_radiance, want.s);
        assert!(close(got.volume, want.volume, 1e-9), "{i} {kind:?} V {} vs {}", got.volume, want.volume);
    }
}

#[test]
fn divergence_examples() {
    let tx = TransmitterSpec::new(1.0, 6e-3, LAMBDA, 0.5).unwrap();
    assert_relative_eq!(optics::beam_divergence(&tx), 5.305e-5, max_relative = 1e-3);
    let tx300 = TransmitterSpec::new(300.0, 6e-3, LAMBDA, 0.5).unwrap();
    assert_relative_eq!(optics::beam_divergence(&tx300), 4.775, max_relative = 1e-3);
    assert!(!tx300.divergence_is_physical());
}

#[test]
fn mirror_cap_and_volume_ratio() {
    let mirror = 25f64.to_radians();
    let tx = TransmitterSpec::new(3.0, 2e-3, LAMBDA, mirror).unwrap();
    for &(a, u) in &[(0.01, 0.015), (0.1, 0.005), (0.05, 0.05)] {
        let single = ReceiverSpec::single_detector(a, u, 0.015).unwrap();
        let array = ReceiverSpec::receiver_array(8, a, u, 0.015).unwrap();
        for &z in &[0.5, 3.0, 40.0] {
            let cs = characterize(&tx, &single, z).unwrap();
            let ca = characterize(&tx, &array, z).unwrap();
            assert!(cs.fov <= mirror && ca.fov <= mirror);
            assert_relative_eq!(cs.volume / ca.volume, PI / 12.0, max_relative = 1e-12);
        }
    }
}

#[test]
fn underfocused_fov_is_flat_and_conventional_shrinks() {
    let tx = TransmitterSpec::new(1.0, 5e-3, LAMBDA, PI).unwrap();
    let zs: Vec<f64> = (0..50).map(|i| 0.5 * 200f64.powf(i as f64 / 49.0)).collect();
    for &u in &[0.001, 0.003, 0.005, 0.0075] {
        let ours = ReceiverSpec::single_detector(0.1, u, 0.015).unwrap();
        let limit = fov_limit_underfocused(&ours).unwrap();
        let fovs: Vec<f64> = zs.iter().map(|&z| characterize(&tx, &ours, z).unwrap().fov).collect();
        let hi = fovs.iter().cloned().fold(f64::MIN, f64::max);
        let lo = fovs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi - lo <= 0.02 * limit, "u {u}: spread {} limit {limit}", hi - lo);
    }
    // close to the focal plane the near-range blur grows noticeably
    let near_focus = ReceiverSpec::single_detector(0.1, 0.012, 0.015).unwrap();
    let f0 = characterize(&tx, &near_focus, 0.5).unwrap().fov;
    let f1 = characterize(&tx, &near_focus, 100.0).unwrap().fov;
    assert!(f0 - f1 > 0.02 * fov_limit_underfocused(&near_focus).unwrap());

    let conv = ReceiverSpec::single_detector(0.1, 0.015, 0.015).unwrap();
    let conv_fovs: Vec<f64> = zs.iter().map(|&z| characterize(&tx, &conv, z).unwrap().fov).collect();
    assert!(conv_fovs.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn received_radiance_falls_with_range() {
    let tx = TransmitterSpec::new(2.0, 1e-3, LAMBDA, 0.5).unwrap();
    let designs = [
        ReceiverSpec::retroreflective(&tx, 0.015, 0.015).unwrap(),
        ReceiverSpec::receiver_array(4, 0.02, 0.015, 0.015).unwrap(),
        ReceiverSpec::single_detector(0.1, 0.010, 0.015).unwrap(),
    ];
    for rx in &designs {
        let s: Vec<f64> = (0..40)
            .map(|i| characterize(&tx, rx, 0.5 + i as f64 * 2.5).unwrap().received_radiance)
            .collect();
        assert!(s.windows(2).all(|w| w[1] < w[0]), "{:?}", rx.kind());
    }
}

#[test]
fn retro_to_single_crossover_exists() {
    // M = 1, w0 = 5 mm; under-focused single detectors with f = 15 mm, A = 100 mm
    let tx = TransmitterSpec::new(1.0, 5e-3, LAMBDA, PI).unwrap();
    let retro = ReceiverSpec::retroreflective(&tx, 0.015, 0.015).unwrap();
    let zs: Vec<f64> = (0..50).map(|i| 0.5 * 200f64.powf(i as f64 / 49.0)).collect();
    let sr: Vec<f64> = zs.iter().map(|&z| characterize(&tx, &retro, z).unwrap().received_radiance).collect();
    let found = (1..50).any(|i| {
        let single = ReceiverSpec::single_detector(0.1, 0.015 * i as f64 / 50.0, 0.015).unwrap();
        let ss: Vec<f64> = zs.iter().map(|&z| characterize(&tx, &single, z).unwrap().received_radiance).collect();
        ss[0] < sr[0] && !optics::find_crossovers(&zs, &ss, &sr).is_empty()
    });
    assert!(found);
}

#[test]
fn characterize_is_pure() {
    let tx = TransmitterSpec::new(7.0, 0.7e-3, LAMBDA, 0.4).unwrap();
    let rx = ReceiverSpec::single_detector(0.03, 0.012, 0.02).unwrap();
    let a = characterize(&tx, &rx, 17.3).unwrap();
    let b = characterize(&tx, &rx, 17.3).unwrap();
    assert_eq!(a.fov.to_bits(), b.fov.to_bits());
    assert_eq!(a.received_radiance.to_bits(), b.received_radiance.to_bits());
}
