//! Sparse capture of a scene along a scan pattern, plus the linear
//! voltage-to-range calibration.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::backproject_angles;
use crate::image::{DepthMap, Grid};
use crate::linfit::{fit_line, LineFitError};
use crate::metrics::{self, MetricsError, MetricsReport};
use crate::optics::solid_angle_to_apex;
use crate::scan::{self, MirrorModel, Regime, ScanError, ScanGeometry, ScanPattern};
use crate::scene::{self, SceneError, SceneFrame};

/// Solid angle of the laser dot, steradians.
pub const DOT_SOLID_ANGLE_SR: f64 = 6e-4;

/// Relative range noise quoted as the starting point for the noise law.
pub const NOMINAL_NOISE_COEFF: f64 = 0.023;

/// Relative range noise calibrated so simulated fronto-planar scans at
/// 0.5–3 m have a mean plane-fit RMSE of [`PLANAR_RMSE_TARGET_M`]; see
/// [`calibrate_noise_coeff`].
pub const DEFAULT_NOISE_COEFF: f64 = 0.038_845_679_402_9;

/// Mean plane-fit RMSE of real fronto-planar captures, meters.
pub const PLANAR_RMSE_TARGET_M: f64 = 0.06918;

#[derive(Debug, Error)]
pub enum LidarError {
    #[error("need two or more pairs with distinct voltages")]
    SingularFit,
    #[error("calibration gain must be > 0, got {0}")]
    NonPositiveGain(f64),
    #[error("no sample overlaps valid reference depth")]
    NoOverlap,
    #[error("sparse depth is {found:?}, reference is {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// `range = gain · voltage + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    /// m/V.
    pub gain: f64,
    /// m.
    pub offset: f64,
    pub residual_rmse: f64,
}

impl Default for CalibrationModel {
    fn default() -> Self {
        Self {
            gain: 1.0,
            offset: 0.0,
            residual_rmse: 0.0,
        }
    }
}

impl CalibrationModel {
    pub fn range(&self, voltage: f64) -> f64 {
        self.gain * voltage + self.offset
    }

    pub fn voltage(&self, range: f64) -> f64 {
        (range - self.offset) / self.gain
    }
}

/// Least-squares line from `(voltage, true_range)` pairs.
pub fn fit_calibration(pairs: &[(f64, f64)]) -> Result<CalibrationModel, LidarError> {
    let line = fit_line(pairs).map_err(|e| match e {
        LineFitError::TooFew(_) | LineFitError::Singular => LidarError::SingularFit,
    })?;
    if line.slope <= 0.0 {
        return Err(LidarError::NonPositiveGain(line.slope));
    }
    Ok(CalibrationModel {
        gain: line.slope,
        offset: line.intercept,
        residual_rmse: line.residual_rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureParams {
    /// σ(Z) = noise_coeff · Z.
    pub noise_coeff: f64,
    pub dot_solid_angle: f64,
    /// Surfaces farther than this return nothing, meters.
    pub z_max: f64,
    pub calibration: CalibrationModel,
}

impl Default for CaptureParams {
    fn default() -> Self {
        Self {
            noise_coeff: DEFAULT_NOISE_COEFF,
            dot_solid_angle: DOT_SOLID_ANGLE_SR,
            z_max: 3.0,
            calibration: CalibrationModel::default(),
        }
    }
}

impl CaptureParams {
    pub fn noiseless() -> Self {
        Self {
            noise_coeff: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub out_of_image: usize,
    pub invalid_depth: usize,
    pub beyond_range: usize,
    pub non_positive: usize,
    pub duplicate_pixel: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.out_of_image + self.invalid_depth + self.beyond_range + self.non_positive + self.duplicate_pixel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseSample {
    pub t_s: f64,
    pub theta_rad: f64,
    pub phi_rad: f64,
    pub x: usize,
    pub y: usize,
    pub range_m: f64,
    pub raw_voltage: f64,
}

/// One captured frame: a depth map that is 0 except at sampled pixels, and
/// the sample list behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDepth {
    pub depth: DepthMap,
    pub samples: Vec<SparseSample>,
    pub fps: f64,
    pub regime: Regime,
    pub drops: DropCounts,
}

impl SparseDepth {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample positions in camera coordinates.
    pub fn points(&self) -> Vec<[f64; 3]> {
        self.samples
            .iter()
            .map(|s| backproject_angles(s.theta_rad, s.phi_rad, s.range_m))
            .collect()
    }
}

/// Footprint radius in pixels for a camera with focal length `fx`.
pub fn footprint_radius_px(fx: f64, dot_solid_angle: f64) -> f64 {
    (fx * (solid_angle_to_apex(dot_solid_angle) / 2.0).tan()).max(1.0)
}

/// Mean of valid depths whose pixel centers lie within `radius` of `(u, v)`.
fn disk_mean(depth: &DepthMap, u: f64, v: f64, radius: f64) -> Option<f64> {
    let (w, h) = depth.dims();
    let x0 = (u - radius - 0.5).floor().max(0.0) as usize;
    let y0 = (v - radius - 0.5).floor().max(0.0) as usize;
    let x1 = ((u + radius - 0.5).ceil().max(0.0) as usize).min(w - 1);
    let y1 = ((v + radius - 0.5).ceil().max(0.0) as usize).min(h - 1);
    let r2 = radius * radius;
    let (mut sum, mut n) = (0.0, 0usize);
    for y in y0..=y1 {
        let dy = y as f64 + 0.5 - v;
        for x in x0..=x1 {
            let dx = x as f64 + 0.5 - u;
            let d = *depth.get(x, y);
            if dx * dx + dy * dy <= r2 && d > 0.0 {
                sum += d;
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Samples `frame` along `pattern`.
///
/// Each direction lands on the pixel containing its projection. A sample is
/// dropped when it leaves the image, hits invalid ground truth at that
/// pixel, sees a surface beyond `z_max`, comes back non-positive after
/// noise, or repeats an already sampled pixel. The range is the mean ground
/// truth over the dot footprint plus Gaussian noise with σ = `noise_coeff`·Z,
/// drawn in pattern order from a ChaCha stream seeded with `noise_seed`.
pub fn capture(frame: &SceneFrame, pattern: &ScanPattern, params: &CaptureParams, noise_seed: u64) -> SparseDepth {
    let k = &frame.intrinsics;
    let radius = footprint_radius_px(k.fx, params.dot_solid_angle);
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut depth = Grid::new(k.width, k.height, 0.0);
    let mut samples = Vec::with_capacity(pattern.len());
    let mut drops = DropCounts::default();
    for s in &pattern.samples {
        let Some((x, y)) = k.angles_to_pixel(s.theta_rad, s.phi_rad) else {
            drops.out_of_image += 1;
            continue;
        };
        let center = *frame.depth.get(x, y);
        if center <= 0.0 {
            drops.invalid_depth += 1;
            continue;
        }
        if *depth.get(x, y) != 0.0 {
            drops.duplicate_pixel += 1;
            continue;
        }
        let (u, v) = k.angles_to_image(s.theta_rad, s.phi_rad);
        let z = disk_mean(&frame.depth, u, v, radius).unwrap_or(center);
        if z > params.z_max {
            drops.beyond_range += 1;
            continue;
        }
        let n: f64 = StandardNormal.sample(&mut rng);
        let range = z + params.noise_coeff * z * n;
        if range <= 0.0 {
            drops.non_positive += 1;
            continue;
        }
        depth.set(x, y, range);
        samples.push(SparseSample {
            t_s: s.t_s,
            theta_rad: s.theta_rad,
            phi_rad: s.phi_rad,
            x,
            y,
            range_m: range,
            raw_voltage: params.calibration.voltage(range),
        });
    }
    SparseDepth {
        depth,
        samples,
        fps: pattern.fps,
        regime: pattern.regime,
        drops,
    }
}

/// Metrics of the sampled ranges against `reference` at the sampled pixels.
pub fn evaluate_against_reference(sparse: &SparseDepth, reference: &DepthMap) -> Result<MetricsReport, LidarError> {
    if !sparse.depth.same_dims(reference) {
        return Err(LidarError::DimensionMismatch {
            expected: reference.dims(),
            found: sparse.depth.dims(),
        });
    }
    let pairs: Vec<(f64, f64)> = sparse
        .samples
        .iter()
        .map(|s| (s.range_m, *reference.get(s.x, s.y)))
        .filter(|&(_, t)| t > 0.0)
        .collect();
    if pairs.is_empty() {
        return Err(LidarError::NoOverlap);
    }
    Ok(metrics::compute_pairs(&pairs)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SparseFile {
    fps: f64,
    regime: Regime,
    width: usize,
    height: usize,
    drops: DropCounts,
    samples: Vec<SparseSample>,
}

/// Writes `<stem>.pgm` (16-bit mm) and `<stem>.json` (sample list).
pub fn write_sparse(dir: &Path, stem: &str, sparse: &SparseDepth) -> Result<(), LidarError> {
    scene::write_depth_pgm(&dir.join(format!("{stem}.pgm")), &sparse.depth)?;
    let file = SparseFile {
        fps: sparse.fps,
        regime: sparse.regime,
        width: sparse.depth.width(),
        height: sparse.depth.height(),
        drops: sparse.drops,
        samples: sparse.samples.clone(),
    };
    let path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&file).expect("sparse file serializes");
    fs::write(&path, text + "\n").map_err(|source| LidarError::Io { path, source })
}

/// Reads a sample list written by [`write_sparse`]; the depth map is rebuilt
/// from the samples at full precision.
pub fn read_sparse(json_path: &Path) -> Result<SparseDepth, LidarError> {
    let text = fs::read_to_string(json_path).map_err(|source| LidarError::Io {
        path: json_path.into(),
        source,
    })?;
    let file: SparseFile = serde_json::from_str(&text).map_err(|source| LidarError::Json {
        path: json_path.into(),
        source,
    })?;
    let mut depth = Grid::new(file.width, file.height, 0.0);
    for s in &file.samples {
        if s.x < file.width && s.y < file.height {
            depth.set(s.x, s.y, s.range_m);
        }
    }
    Ok(SparseDepth {
        depth,
        samples: file.samples,
        fps: file.fps,
        regime: file.regime,
        drops: file.drops,
    })
}

/// Fronto-planar validation setup: full-FOV scans of planes at evenly
/// spaced depths.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSetup {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub depths: Vec<f64>,
}

impl Default for PlanarSetup {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            fps: 6.0,
            depths: (0..10).map(|i| 0.5 + 2.5 * i as f64 / 9.0).collect(),
        }
    }
}

impl PlanarSetup {
    /// Plane-fit RMSE for every `(depth, seed)` pair, depth-major.
    pub fn plane_rmses(&self, noise_coeff: f64, seeds: &[u64]) -> Result<Vec<f64>, LidarError> {
        let model = MirrorModel::calibrated();
        let mut out = Vec::with_capacity(self.depths.len() * seeds.len());
        for &z in &self.depths {
            let spec = scene::presets::fronto_plane(self.width, self.height, z);
            let seq = scene::generate_synthetic(&spec, 0)?;
            let frame = &seq.frames[0];
            let geometry = ScanGeometry::new(frame.intrinsics, seq.meta.mirror_fov());
            let pattern = scan::gen_full_fov(&model, &geometry, self.fps)?;
            let params = CaptureParams {
                noise_coeff,
                z_max: z.max(3.0),
                ..CaptureParams::default()
            };
            for &seed in seeds {
                let sparse = capture(frame, &pattern, &params, seed);
                out.push(metrics::planar_rmse(&sparse.points())?);
            }
        }
        Ok(out)
    }

    pub fn mean_plane_rmse(&self, noise_coeff: f64, seeds: &[u64]) -> Result<f64, LidarError> {
        let v = self.plane_rmses(noise_coeff, seeds)?;
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Seeds used to freeze [`DEFAULT_NOISE_COEFF`].
pub const CALIBRATION_SEEDS: [u64; 10] = [1000, 1001, 1002, 1003, 1004, 1005, 1006, 1007, 1008, 1009];

/// Noise coefficient whose mean planar RMSE equals `target` on `setup`.
///
/// The residual is close to linear in the coefficient, so a small-coefficient
/// probe gives the starting point and a few secant steps finish it.
pub fn calibrate_noise_coeff(setup: &PlanarSetup, target: f64, seeds: &[u64]) -> Result<f64, LidarError> {
    let probe = 1e-3;
    let f = |k: f64| setup.mean_plane_rmse(k, seeds).map(|r| r - target);
    let (mut k0, mut f0) = (probe, f(probe)?);
    let mut k1 = target * probe / (f0 + target);
    let mut f1 = f(k1)?;
    for _ in 0..30 {
        if f1.abs() <= 1e-12 * target || f1 == f0 {
            break;
        }
        let k2 = k1 - f1 * (k1 - k0) / (f1 - f0);
        (k0, f0) = (k1, f1);
        k1 = k2;
        f1 = f(k1)?;
    }
    Ok(k1)
}
