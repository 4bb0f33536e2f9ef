use std::hint::black_box;

use adalidar::completion::complete;
use adalidar::foveation::entropy_map;
use adalidar::lidar::capture;
use adalidar::metrics::compute;
use adalidar::optics::{sweep, ReceiverKind};
use adalidar::scan::{gen_entropy_adaptive, gen_full_fov};
use adalidar::scene::{generate_synthetic, presets::cluttered};
use adalidar::{CaptureParams, GuidedFillParams, MirrorModel, ReceiverSpec, ScanGeometry, TransmitterSpec};
use criterion::{criterion_group, criterion_main, Criterion};

fn optics(c: &mut Criterion) {
    let tx: Vec<_> = [1.0, 10.0, 100.0]
        .iter()
        .flat_map(|&m| [0.5e-3, 5e-3].map(|w0| TransmitterSpec::new(m, w0, 1e-6, 0.44).unwrap()))
        .collect();
    let rx: Vec<_> = ReceiverKind::ALL
        .iter()
        .map(|&k| ReceiverSpec::new(k, 4, 0.1, 0.01, 0.015).unwrap())
        .collect();
    let zs: Vec<f64> = (0..50).map(|i| 0.5 * 200f64.powf(i as f64 / 49.0)).collect();
    c.bench_function("optics_sweep_900", |b| b.iter(|| sweep(black_box(&tx), &rx, &zs).unwrap()));
}

fn frame_stages(c: &mut Criterion) {
    let seq = generate_synthetic(&cluttered(320, 240, 1), 1).unwrap();
    let frame = &seq.frames[0];
    let g = ScanGeometry::new(seq.intrinsics(), seq.meta.mirror_fov());
    let model = MirrorModel::calibrated();
    let pattern = gen_full_fov(&model, &g, 6.0).unwrap();
    let entropy = entropy_map(&frame.rgb, 15).unwrap();
    let sparse = capture(frame, &pattern, &CaptureParams::default(), 0);
    let dense = complete(&sparse.depth, &frame.rgb, &GuidedFillParams::default()).unwrap();

    c.bench_function("entropy_map_320x240", |b| b.iter(|| entropy_map(black_box(&frame.rgb), 15).unwrap()));
    c.bench_function("entropy_pattern_6fps", |b| {
        b.iter(|| gen_entropy_adaptive(&model, &g, 6.0, black_box(&entropy), 0).unwrap())
    });
    c.bench_function("capture_230", |b| b.iter(|| capture(frame, black_box(&pattern), &CaptureParams::default(), 0)));
    c.bench_function("complete_320x240", |b| {
        b.iter(|| complete(black_box(&sparse.depth), &frame.rgb, &GuidedFillParams::default()).unwrap())
    });
    c.bench_function("metrics_320x240", |b| b.iter(|| compute(black_box(&dense.depth), &frame.depth, None).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = optics, frame_stages
}
criterion_main!(benches);
