use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use adalidar::foveation::{self, motion_loop, write_roi_trace, MotionLoopConfig};
use adalidar::lidar::{self, SparseDepth};
use adalidar::metrics::{compute_slices, METRICS_CSV_HEADER};
use adalidar::scan::{self, ScanError};
use adalidar::scene::{self, frame_stem, presets, SceneSequence, SyntheticSpec};
use adalidar::{completion, CaptureParams, PixelRect, Roi, ScanGeometry, ScanPattern};
use anyhow::{anyhow, Context};
use rayon::prelude::*;

use crate::args::{
    CaptureArgs, CompleteArgs, EvalArgs, FoveaArgs, FoveaMode, GenSceneArgs, PatternArgs, Preset, RegimeArg,
    ScanArgs, SensorArgs,
};
use crate::parse::{rect, usage};

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load(dir: &Path) -> anyhow::Result<SceneSequence> {
    scene::load_scene(dir).with_context(|| format!("loading scene {}", dir.display()))
}

fn geometry(seq: &SceneSequence) -> ScanGeometry {
    ScanGeometry::new(seq.intrinsics(), seq.meta.mirror_fov())
}

fn scan_usage(e: ScanError) -> anyhow::Error {
    usage(e.to_string())
}

fn fovea_usage(e: foveation::FoveationError) -> anyhow::Error {
    usage(e.to_string())
}

pub fn gen_scene(a: &GenSceneArgs) -> anyhow::Result<()> {
    let mut roi = None;
    let mut spec: SyntheticSpec = match &a.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => match a.preset {
            Preset::FrontoPlane => presets::fronto_plane(a.width, a.height, a.depth_m),
            Preset::TwoPlanes => presets::two_planes(a.width, a.height),
            Preset::MovingBox => presets::moving_box(),
            Preset::Cluttered => presets::cluttered(a.width, a.height, a.seed),
            Preset::TexturedQuadrant => {
                let (spec, [x0, y0, x1, y1]) = presets::textured_quadrant(a.width, a.height, a.seed);
                roi = Some(PixelRect::new(x0, y0, x1, y1));
                spec
            }
        },
    };
    if let Some(n) = a.frames {
        spec.frames = n;
    }
    if spec.width == 0 || spec.height == 0 || spec.frames == 0 {
        return Err(usage("scene needs a non-zero size and frame count"));
    }
    let seq = adalidar::scene::generate_synthetic(&spec, a.seed)?;
    scene::save_scene(&seq, &a.out)?;
    let path = a.out.join("spec.json");
    fs::write(&path, serde_json::to_string_pretty(&spec)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    if let Some(r) = roi {
        let path = a.out.join("roi.txt");
        fs::write(&path, format!("{},{},{},{}\n", r.x0, r.y0, r.x1, r.y1))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{} frames {}x{} -> {}", seq.frames.len(), spec.width, spec.height, a.out.display());
    Ok(())
}

enum RoiSel {
    None,
    Rect(PixelRect),
    AutoEntropy,
    AutoMotion,
}

fn roi_sel(p: &PatternArgs) -> anyhow::Result<RoiSel> {
    Ok(match p.roi.as_deref() {
        None => RoiSel::None,
        Some("auto-entropy") => RoiSel::AutoEntropy,
        Some("auto-motion") => RoiSel::AutoMotion,
        Some(s) => RoiSel::Rect(rect(s)?),
    })
}

/// One frame's planned scan.
struct Planned {
    frame: u32,
    roi: Option<PixelRect>,
    pattern: ScanPattern,
}

fn entropy_roi(rgb: &adalidar::RgbImage, p: &PatternArgs) -> anyhow::Result<PixelRect> {
    if !(p.roi_scale > 0.0 && p.roi_scale <= 1.0) {
        return Err(usage("--roi-scale must lie in (0, 1]"));
    }
    let (w, h) = rgb.dims();
    let rw = ((w as f64 * p.roi_scale).round() as usize).clamp(1, w);
    let rh = ((h as f64 * p.roi_scale).round() as usize).clamp(1, h);
    let map = foveation::entropy_map(rgb, p.entropy_window).map_err(fovea_usage)?;
    foveation::max_entropy_roi(&map, rw, rh).map_err(fovea_usage)
}

/// Scan patterns for every frame at one frame rate.
fn plan(seq: &SceneSequence, p: &PatternArgs, fps: f64, seed: u64) -> anyhow::Result<Vec<Planned>> {
    let g = geometry(seq);
    let model = p.mirror.model(g.mirror_fov);
    model.validate().map_err(scan_usage)?;
    let sel = roi_sel(p)?;
    let fixed = match sel {
        RoiSel::Rect(r) => Some(r),
        _ => None,
    };
    if matches!(sel, RoiSel::AutoEntropy | RoiSel::AutoMotion) && p.regime != RegimeArg::Foveated {
        return Err(usage("automatic ROIs need --regime foveated"));
    }
    let frames = &seq.frames;
    match p.regime {
        RegimeArg::FullFov | RegimeArg::DensitySweep => {
            let mut pattern = scan::gen_full_fov(&model, &g, fps).map_err(scan_usage)?;
            if p.regime == RegimeArg::DensitySweep {
                pattern.regime = adalidar::Regime::DensitySweep;
            }
            Ok(frames
                .iter()
                .map(|f| Planned {
                    frame: f.frame_index,
                    roi: fixed,
                    pattern: pattern.clone(),
                })
                .collect())
        }
        RegimeArg::Entropy => frames
            .par_iter()
            .map(|f| {
                let map = foveation::entropy_map(&f.rgb, p.entropy_window).map_err(fovea_usage)?;
                let pattern = scan::gen_entropy_adaptive(&model, &g, fps, &map, seed + u64::from(f.frame_index))
                    .map_err(scan_usage)?;
                Ok(Planned {
                    frame: f.frame_index,
                    roi: fixed,
                    pattern,
                })
            })
            .collect(),
        RegimeArg::Foveated => {
            let roi_of = |rect| Roi {
                rect,
                inside_density: 1.0,
                outside_density: p.outside_density,
            };
            match sel {
                RoiSel::None => Err(usage("--regime foveated needs --roi")),
                RoiSel::Rect(r) => {
                    let pattern = scan::gen_foveated(&model, &g, fps, &roi_of(r)).map_err(scan_usage)?;
                    Ok(frames
                        .iter()
                        .map(|f| Planned {
                            frame: f.frame_index,
                            roi: Some(r),
                            pattern: pattern.clone(),
                        })
                        .collect())
                }
                RoiSel::AutoEntropy => frames
                    .par_iter()
                    .map(|f| {
                        let r = entropy_roi(&f.rgb, p)?;
                        let pattern = scan::gen_foveated(&model, &g, fps, &roi_of(r)).map_err(scan_usage)?;
                        Ok(Planned {
                            frame: f.frame_index,
                            roi: Some(r),
                            pattern,
                        })
                    })
                    .collect(),
                RoiSel::AutoMotion => {
                    let config = MotionLoopConfig {
                        background: p.background.params(),
                        dense_fps: fps,
                        outside_density: p.outside_density,
                    };
                    let steps = motion_loop(frames.iter().map(|f| (f.frame_index, &f.rgb)), &model, &g, &config)
                        .map_err(fovea_usage)?;
                    Ok(steps
                        .into_iter()
                        .map(|s| Planned {
                            frame: s.frame,
                            roi: s.roi,
                            pattern: s.pattern,
                        })
                        .collect())
                }
            }
        }
    }
}

fn write_trace(path: &Path, planned: &[Planned]) -> anyhow::Result<()> {
    let trace: Vec<_> = planned.iter().map(|p| (p.frame, p.roi)).collect();
    let mut w = create(path)?;
    write_roi_trace(&mut w, &trace)?;
    w.flush()?;
    Ok(())
}

/// `(subdirectory, fps)` for each requested rate; a single rate writes into
/// the output directory itself.
fn rates(regime: RegimeArg, fps: f64, sweep: &[f64]) -> anyhow::Result<Vec<(Option<String>, f64)>> {
    if regime != RegimeArg::DensitySweep {
        return Ok(vec![(None, fps)]);
    }
    if sweep.is_empty() {
        return Err(usage("--sweep-fps is empty"));
    }
    Ok(sweep.iter().map(|&f| (Some(format!("fps_{f}")), f)).collect())
}

pub fn scan(a: &ScanArgs) -> anyhow::Result<()> {
    let seq = load(&a.scene)?;
    for (sub, fps) in rates(a.pattern.regime, a.fps, &a.sweep_fps)? {
        let dir = sub.map_or_else(|| a.out.clone(), |s| a.out.join(s));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let planned = plan(&seq, &a.pattern, fps, a.seed)?;
        let mut summary = create(&dir.join("patterns.csv"))?;
        writeln!(summary, "frame,regime,fps,budget,samples")?;
        for p in &planned {
            let path = dir.join(format!("{}.json", frame_stem(p.frame)));
            fs::write(&path, p.pattern.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
            writeln!(
                summary,
                "{},{},{},{},{}",
                p.frame,
                p.pattern.regime.as_str(),
                p.pattern.fps,
                p.pattern.budget,
                p.pattern.len()
            )?;
        }
        summary.flush()?;
        if a.pattern.roi.is_some() {
            write_trace(&dir.join("roi_trace.csv"), &planned)?;
        }
        println!("{} patterns at {fps} fps -> {}", planned.len(), dir.display());
    }
    Ok(())
}

fn capture_params(s: &SensorArgs, seq: &SceneSequence) -> anyhow::Result<CaptureParams> {
    let params = CaptureParams {
        noise_coeff: s.noise_coeff,
        dot_solid_angle: s.dot_sr,
        z_max: s.z_max_m.unwrap_or(seq.meta.z_max_m),
        ..CaptureParams::default()
    };
    if !(params.noise_coeff >= 0.0 && params.noise_coeff.is_finite()) {
        return Err(usage("--noise-coeff must be finite and >= 0"));
    }
    if !(params.dot_solid_angle > 0.0 && params.z_max > 0.0) {
        return Err(usage("--dot-sr and --z-max-m must be > 0"));
    }
    Ok(params)
}

fn capture_all(seq: &SceneSequence, planned: &[Planned], params: &CaptureParams, seed: u64) -> Vec<SparseDepth> {
    seq.frames
        .par_iter()
        .zip(planned)
        .map(|(f, p)| lidar::capture(f, &p.pattern, params, seed + u64::from(f.frame_index)))
        .collect()
}

pub fn capture(a: &CaptureArgs) -> anyhow::Result<()> {
    let seq = load(&a.scene)?;
    let params = capture_params(&a.sensor, &seq)?;
    for (sub, fps) in rates(a.pattern.regime, a.fps, &a.sweep_fps)? {
        let dir = sub.map_or_else(|| a.out.clone(), |s| a.out.join(s));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let planned = plan(&seq, &a.pattern, fps, a.seed)?;
        let sparse = capture_all(&seq, &planned, &params, a.seed);
        let mut summary = create(&dir.join("capture.csv"))?;
        writeln!(
            summary,
            "frame,fps,pattern_samples,captured,out_of_image,invalid_depth,beyond_range,non_positive,duplicate_pixel"
        )?;
        for (p, s) in planned.iter().zip(&sparse) {
            lidar::write_sparse(&dir, &frame_stem(p.frame), s)?;
            let d = &s.drops;
            writeln!(
                summary,
                "{},{},{},{},{},{},{},{},{}",
                p.frame,
                p.pattern.fps,
                p.pattern.len(),
                s.len(),
                d.out_of_image,
                d.invalid_depth,
                d.beyond_range,
                d.non_positive,
                d.duplicate_pixel
            )?;
        }
        summary.flush()?;
        if a.pattern.roi.is_some() {
            write_trace(&dir.join("roi_trace.csv"), &planned)?;
        }
        let mean = sparse.iter().map(SparseDepth::len).sum::<usize>() as f64 / sparse.len().max(1) as f64;
        println!("{} frames at {fps} fps, {mean:.1} samples/frame -> {}", sparse.len(), dir.display());
    }
    Ok(())
}

pub fn fovea(a: &FoveaArgs) -> anyhow::Result<()> {
    let seq = load(&a.scene)?;
    let trace: Vec<(u32, Option<PixelRect>)> = match a.mode {
        FoveaMode::Motion => {
            let k = seq.intrinsics();
            let mut bg = adalidar::BackgroundModel::new(k.width, k.height, a.background.params()).map_err(fovea_usage)?;
            seq.frames
                .iter()
                .map(|f| Ok((f.frame_index, bg.update_and_detect(&f.rgb)?)))
                .collect::<anyhow::Result<_>>()?
        }
        FoveaMode::Entropy => {
            let p = PatternArgs {
                regime: RegimeArg::Foveated,
                roi: None,
                roi_scale: a.roi_scale,
                outside_density: 0.0,
                entropy_window: a.entropy_window,
                mirror: crate::args::MirrorArgs {
                    sample_rate_hz: 1.0,
                    frame_overhead_s: 0.0,
                },
                background: a.background.clone(),
            };
            seq.frames
                .par_iter()
                .map(|f| Ok((f.frame_index, Some(entropy_roi(&f.rgb, &p)?))))
                .collect::<anyhow::Result<_>>()?
        }
    };
    let path = a.out.join("roi_trace.csv");
    let mut w = create(&path)?;
    write_roi_trace(&mut w, &trace)?;
    w.flush()?;
    let hits = trace.iter().filter(|(_, r)| r.is_some()).count();
    println!("{hits}/{} frames with an ROI -> {}", trace.len(), path.display());
    Ok(())
}

pub fn complete(a: &CompleteArgs) -> anyhow::Result<()> {
    let seq = load(&a.scene)?;
    let params = a.fill.params();
    params.validate().map_err(|e| usage(e.to_string()))?;
    let dense: Vec<_> = seq
        .frames
        .par_iter()
        .map(|f| {
            let path = a.sparse.join(format!("{}.json", frame_stem(f.frame_index)));
            let sparse = lidar::read_sparse(&path)?;
            let d = completion::complete(&sparse.depth, &f.rgb, &params)
                .with_context(|| format!("completing {}", path.display()))?;
            Ok((f.frame_index, d.depth))
        })
        .collect::<anyhow::Result<_>>()?;
    for (index, depth) in &dense {
        scene::write_depth_pgm(&a.out.join(format!("{}.pgm", frame_stem(*index))), depth)?;
    }
    let path = a.out.join("params.json");
    fs::write(&path, serde_json::to_string_pretty(&params)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    println!("{} dense frames -> {}", dense.len(), a.out.display());
    Ok(())
}

/// Reads `frame,x0,y0,x1,y1,...` rows; blank coordinates mean no ROI.
fn read_trace(path: &Path) -> anyhow::Result<BTreeMap<u32, Option<PixelRect>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = || anyhow!("{}:{}: malformed ROI trace row", path.display(), i + 1);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 5 {
            return Err(bad());
        }
        let frame: u32 = fields[0].parse().map_err(|_| bad())?;
        let roi = if fields[1..5].iter().all(|f| f.is_empty()) {
            None
        } else {
            let v: Vec<usize> = fields[1..5]
                .iter()
                .map(|f| f.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| bad())?;
            Some(PixelRect::new(v[0], v[1], v[2], v[3]))
        };
        out.insert(frame, roi);
    }
    Ok(out)
}

/// Pixels pooled over frames for a single metrics computation.
#[derive(Default)]
struct Pool {
    pred: Vec<f64>,
    truth: Vec<f64>,
    mask: Vec<bool>,
}

impl Pool {
    fn push(&mut self, pred: &adalidar::DepthMap, truth: &adalidar::DepthMap, roi: Option<PixelRect>) {
        let (w, _) = truth.dims();
        self.pred.extend_from_slice(pred.data());
        self.truth.extend_from_slice(truth.data());
        self.mask
            .extend((0..truth.len()).map(|i| roi.is_none_or(|r| r.contains(i % w, i / w))));
    }

    fn report(&self) -> anyhow::Result<adalidar::MetricsReport> {
        compute_slices(&self.pred, &self.truth, Some(&self.mask)).context("no pixel has both a prediction and ground truth")
    }
}

/// Per-frame scoring region for `--roi-only`; `None` scores the whole frame,
/// `Some(None)` skips it.
struct RoiSource {
    fixed: Option<PixelRect>,
    trace: Option<BTreeMap<u32, Option<PixelRect>>>,
}

impl RoiSource {
    fn new(a: &EvalArgs, pipeline: bool) -> anyhow::Result<Option<Self>> {
        if !a.roi_only {
            return Ok(None);
        }
        let fixed = match roi_sel(&a.pattern)? {
            RoiSel::Rect(r) => Some(r),
            _ => None,
        };
        let trace = a.roi_trace.as_deref().map(read_trace).transpose()?;
        if fixed.is_none() && trace.is_none() && !(pipeline && a.pattern.roi.is_some()) {
            return Err(usage("--roi-only needs --roi x0,y0,x1,y1, --roi-trace or an automatic --roi"));
        }
        Ok(Some(Self { fixed, trace }))
    }

    fn region(&self, frame: u32, planned: Option<PixelRect>) -> Option<PixelRect> {
        if let Some(r) = self.fixed {
            return Some(r);
        }
        match &self.trace {
            Some(t) => t.get(&frame).copied().flatten(),
            None => planned,
        }
    }
}

pub fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    let seq = load(&a.scene)?;
    let roi = RoiSource::new(a, a.pred.is_none())?;
    let path = a.out.join("metrics.csv");
    let mut w = create(&path)?;
    match &a.pred {
        Some(dir) => {
            writeln!(w, "frame,{METRICS_CSV_HEADER}")?;
            let mut all = Pool::default();
            for f in &seq.frames {
                let p = dir.join(format!("{}.pgm", frame_stem(f.frame_index)));
                let pred = scene::read_depth_pgm(&p)?;
                if pred.dims() != f.depth.dims() {
                    return Err(anyhow!("{}: {:?} does not match the ground truth {:?}", p.display(), pred.dims(), f.depth.dims()));
                }
                let region = roi.as_ref().map(|r| r.region(f.frame_index, None));
                if region == Some(None) {
                    continue;
                }
                let mut one = Pool::default();
                one.push(&pred, &f.depth, region.flatten());
                all.push(&pred, &f.depth, region.flatten());
                match one.report() {
                    Ok(r) => writeln!(w, "{},{}", f.frame_index, r.csv_row())?,
                    Err(_) => writeln!(w, "{},,,,,,,0", f.frame_index)?,
                }
            }
            let r = all.report()?;
            writeln!(w, "all,{}", r.csv_row())?;
            println!("{METRICS_CSV_HEADER}\n{}", r.csv_row());
        }
        None => {
            if a.fps_list.is_empty() {
                return Err(usage("--fps-list is empty"));
            }
            let params = capture_params(&a.sensor, &seq)?;
            let fill = a.fill.params();
            fill.validate().map_err(|e| usage(e.to_string()))?;
            writeln!(w, "fps,effective_fps,samples_per_frame,captured_per_frame,{METRICS_CSV_HEADER}")?;
            println!("fps,effective_fps,samples_per_frame,captured_per_frame,{METRICS_CSV_HEADER}");
            for &fps in &a.fps_list {
                let planned = plan(&seq, &a.pattern, fps, a.seed)?;
                let sparse = capture_all(&seq, &planned, &params, a.seed);
                let dense: Vec<_> = seq
                    .frames
                    .par_iter()
                    .zip(&sparse)
                    .map(|(f, s)| completion::complete(&s.depth, &f.rgb, &fill))
                    .collect::<Result<_, _>>()
                    .with_context(|| format!("completing at {fps} fps"))?;
                let mut pool = Pool::default();
                for ((f, p), d) in seq.frames.iter().zip(&planned).zip(&dense) {
                    let region = roi.as_ref().map(|r| r.region(f.frame_index, p.roi));
                    if region == Some(None) {
                        continue;
                    }
                    pool.push(&d.depth, &f.depth, region.flatten());
                }
                let r = pool.report().with_context(|| format!("scoring at {fps} fps"))?;
                let n = planned.len() as f64;
                let row = format!(
                    "{fps},{:.4},{},{},{}",
                    planned.iter().map(|p| p.pattern.fps).sum::<f64>() / n,
                    planned.iter().map(|p| p.pattern.len()).sum::<usize>() as f64 / n,
                    sparse.iter().map(SparseDepth::len).sum::<usize>() as f64 / n,
                    r.csv_row()
                );
                writeln!(w, "{row}")?;
                println!("{row}");
            }
        }
    }
    w.flush()?;
    Ok(())
}
