//! MEMS mirror model, frame budget and scan-pattern generators.
//!
//! Scan directions are `(θ, φ)` azimuth/elevation pairs sharing the camera's
//! tangent mapping (see [`crate::camera`]). Every generator emits at most
//! [`budget`] samples per frame and orders them so the mirror sweeps rows in
//! alternating directions.

use std::f64::consts::PI;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::Intrinsics;
use crate::image::{Grid, PixelRect};
use crate::linfit::{fit_line, LineFitError};

/// Samples per frame reported for the prototype at 30, 24, 18, 12 and 6 FPS.
pub const REFERENCE_FRAME_BUDGETS: [(f64, f64); 5] = [
    (30.0, 28.0),
    (24.0, 40.0),
    (18.0, 60.0),
    (12.0, 104.0),
    (6.0, 231.0),
];

/// Fraction of the peak entropy added everywhere so flat regions keep coverage.
pub const ENTROPY_FLOOR: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScanError {
    #[error("fps must be finite and > 0, got {0}")]
    InvalidFps(f64),
    #[error("frame overhead {overhead} s leaves no time in a {period} s frame")]
    OverheadExceedsFrame { overhead: f64, period: f64 },
    #[error("frame budget is zero at {fps} fps")]
    ZeroBudget { fps: f64 },
    #[error("need two or more observations with distinct fps")]
    SingularFit,
    #[error("invalid mirror model: {0}")]
    InvalidModel(&'static str),
    #[error("ROI {rect:?} does not fit a {width}x{height} image")]
    RoiOutOfBounds {
        rect: PixelRect,
        width: usize,
        height: usize,
    },
    #[error("invalid ROI densities: inside {inside}, outside {outside}")]
    InvalidDensity { inside: f64, outside: f64 },
    #[error("entropy map is all zeros")]
    DegenerateMap,
    #[error("entropy map must be finite and non-negative with the image's dimensions")]
    InvalidMap,
}

/// Linear voltage-to-angle mirror with a fixed per-frame overhead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorModel {
    /// Full apex FOV, radians.
    pub fov: f64,
    /// rad/V for the (θ, φ) axes.
    pub gain: [f64; 2],
    /// rad at 0 V.
    pub offset: [f64; 2],
    /// Range measurements per second.
    pub sample_rate: f64,
    /// Dead time per frame, seconds.
    pub frame_overhead: f64,
}

impl Default for MirrorModel {
    fn default() -> Self {
        Self {
            fov: 25f64.to_radians(),
            gain: [1f64.to_radians(); 2],
            offset: [0.0; 2],
            sample_rate: 1600.0,
            frame_overhead: 0.0,
        }
    }
}

impl MirrorModel {
    /// Default mirror with rate and overhead fitted to [`REFERENCE_FRAME_BUDGETS`].
    pub fn calibrated() -> Self {
        let fit = fit_budget(&REFERENCE_FRAME_BUDGETS).expect("reference budgets are well-posed");
        Self {
            sample_rate: fit.sample_rate,
            frame_overhead: fit.frame_overhead,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        if !(self.fov > 0.0 && self.fov < PI) {
            return Err(ScanError::InvalidModel("fov must lie in (0, pi)"));
        }
        if self.gain.iter().any(|&g| g == 0.0 || !g.is_finite()) {
            return Err(ScanError::InvalidModel("gain must be finite and non-zero"));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(ScanError::InvalidModel("sample_rate must be > 0"));
        }
        if !(self.frame_overhead >= 0.0) {
            return Err(ScanError::InvalidModel("frame_overhead must be >= 0"));
        }
        Ok(())
    }

    pub fn voltages_to_angles(&self, v: [f64; 2]) -> (f64, f64) {
        (
            self.gain[0] * v[0] + self.offset[0],
            self.gain[1] * v[1] + self.offset[1],
        )
    }

    pub fn angles_to_voltages(&self, theta: f64, phi: f64) -> [f64; 2] {
        [
            (theta - self.offset[0]) / self.gain[0],
            (phi - self.offset[1]) / self.gain[1],
        ]
    }
}

/// `floor((1/fps − overhead) · rate)`.
pub fn budget(model: &MirrorModel, fps: f64) -> Result<usize, ScanError> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(ScanError::InvalidFps(fps));
    }
    let period = 1.0 / fps;
    if model.frame_overhead >= period {
        return Err(ScanError::OverheadExceedsFrame {
            overhead: model.frame_overhead,
            period,
        });
    }
    // the tiny slack keeps exact products such as 1600/16 from flooring to 99
    Ok(((period - model.frame_overhead) * model.sample_rate * (1.0 + 1e-12)).floor() as usize)
}

/// Frame rate achieved when a frame carries `samples` measurements.
pub fn amortized_fps(model: &MirrorModel, samples: usize) -> f64 {
    1.0 / (samples as f64 / model.sample_rate + model.frame_overhead)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetFit {
    pub sample_rate: f64,
    pub frame_overhead: f64,
    /// Observed minus fitted samples, per observation.
    pub residuals: Vec<f64>,
    pub residual_rms: f64,
}

/// Least-squares fit of `samples ≈ (1/fps − overhead) · rate` to `(fps, samples)` pairs.
///
/// The model is linear in `1/fps` with slope `rate` and intercept
/// `−rate·overhead`, so the ordinary line fit is also the least-squares
/// solution in `(rate, overhead)`.
pub fn fit_budget(observations: &[(f64, f64)]) -> Result<BudgetFit, ScanError> {
    for &(fps, _) in observations {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(ScanError::InvalidFps(fps));
        }
    }
    let points: Vec<(f64, f64)> = observations.iter().map(|&(f, s)| (1.0 / f, s)).collect();
    let line = fit_line(&points).map_err(|e| match e {
        LineFitError::TooFew(_) | LineFitError::Singular => ScanError::SingularFit,
    })?;
    if line.slope <= 0.0 {
        return Err(ScanError::SingularFit);
    }
    let residuals = points.iter().map(|&(x, s)| s - line.eval(x)).collect();
    Ok(BudgetFit {
        sample_rate: line.slope,
        frame_overhead: -line.intercept / line.slope,
        residuals,
        residual_rms: line.residual_rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FullFov,
    EntropyAdaptive,
    FoveatedRoi,
    DensitySweep,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::FullFov => "full_fov",
            Regime::EntropyAdaptive => "entropy_adaptive",
            Regime::FoveatedRoi => "foveated_roi",
            Regime::DensitySweep => "density_sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    /// Seconds since the start of the frame.
    pub t_s: f64,
    pub theta_rad: f64,
    pub phi_rad: f64,
}

/// One frame's worth of mirror directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPattern {
    pub fps: f64,
    pub regime: Regime,
    pub seed: Option<u64>,
    pub budget: usize,
    pub samples: Vec<ScanSample>,
}

impl ScanPattern {
    fn from_angles(
        model: &MirrorModel,
        fps: f64,
        regime: Regime,
        seed: Option<u64>,
        budget: usize,
        angles: Vec<(f64, f64)>,
    ) -> Self {
        let samples = angles
            .into_iter()
            .enumerate()
            .map(|(k, (theta_rad, phi_rad))| ScanSample {
                t_s: k as f64 / model.sample_rate,
                theta_rad,
                phi_rad,
            })
            .collect();
        Self {
            fps,
            regime,
            seed,
            budget,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pattern serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Checks the pattern invariants against `model`; returns a description
    /// of the first violation.
    pub fn check(&self, model: &MirrorModel) -> Result<(), String> {
        if self.samples.len() > self.budget {
            return Err(format!("{} samples exceed budget {}", self.samples.len(), self.budget));
        }
        let half = model.fov / 2.0 + 1e-12;
        let period = 1.0 / self.fps;
        let mut last = f64::NEG_INFINITY;
        for (i, s) in self.samples.iter().enumerate() {
            if s.theta_rad.abs() > half || s.phi_rad.abs() > half {
                return Err(format!("sample {i} at ({}, {}) leaves the FOV", s.theta_rad, s.phi_rad));
            }
            if !(s.t_s > last) || s.t_s >= period {
                return Err(format!("sample {i} timestamp {} out of order or past the frame", s.t_s));
            }
            last = s.t_s;
        }
        Ok(())
    }
}

/// Axis-aligned window in scan-angle space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleWindow {
    pub theta: (f64, f64),
    pub phi: (f64, f64),
}

/// Camera intrinsics plus the mirror's reachable cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanGeometry {
    pub intrinsics: Intrinsics,
    pub mirror_fov: f64,
}

impl ScanGeometry {
    pub fn new(intrinsics: Intrinsics, mirror_fov: f64) -> Self {
        Self {
            intrinsics,
            mirror_fov,
        }
    }

    /// Angles covered by pixel rectangle `rect`, clipped to the mirror FOV.
    pub fn rect_window(&self, rect: &PixelRect) -> AngleWindow {
        let k = &self.intrinsics;
        let half = self.mirror_fov / 2.0;
        AngleWindow {
            theta: (
                k.column_edge_angle(rect.x0 as f64).max(-half),
                k.column_edge_angle(rect.x1 as f64).min(half),
            ),
            phi: (
                k.row_edge_angle(rect.y0 as f64).max(-half),
                k.row_edge_angle(rect.y1 as f64).min(half),
            ),
        }
    }

    pub fn full_window(&self) -> AngleWindow {
        self.rect_window(&PixelRect::full(self.intrinsics.width, self.intrinsics.height))
    }

    /// Number of pixels whose centers the mirror can reach.
    pub fn reachable_pixels(&self) -> usize {
        let half = self.mirror_fov / 2.0;
        let k = &self.intrinsics;
        let cols = (0..k.width)
            .filter(|&x| k.column_edge_angle(x as f64 + 0.5).abs() <= half)
            .count();
        let rows = (0..k.height)
            .filter(|&y| k.row_edge_angle(y as f64 + 0.5).abs() <= half)
            .count();
        cols * rows
    }

    fn reachable(&self, theta: f64, phi: f64) -> bool {
        let half = self.mirror_fov / 2.0;
        theta.abs() <= half && phi.abs() <= half
    }
}

/// `n` cell-centered directions on a near-square grid inside `win`:
/// `floor(√n)` columns, full rows, then one partial row. Rows alternate
/// direction.
pub fn serpentine_grid(win: &AngleWindow, n: usize) -> Vec<(f64, f64)> {
    if n == 0 {
        return Vec::new();
    }
    let cols = ((n as f64).sqrt().floor() as usize).max(1);
    let full_rows = n / cols;
    let rem = n % cols;
    let rows = full_rows + usize::from(rem > 0);
    let (t0, t1) = win.theta;
    let (p0, p1) = win.phi;
    let mut out = Vec::with_capacity(n);
    for j in 0..rows {
        let count = if j < full_rows { cols } else { rem };
        let phi = p0 + (j as f64 + 0.5) * (p1 - p0) / rows as f64;
        let row = (0..count).map(|i| t0 + (i as f64 + 0.5) * (t1 - t0) / count as f64);
        if j % 2 == 0 {
            out.extend(row.map(|t| (t, phi)));
        } else {
            out.extend(row.rev().map(|t| (t, phi)));
        }
    }
    out
}

/// Fixed equi-angular pattern over the whole reachable image.
pub fn gen_full_fov(
    model: &MirrorModel,
    geometry: &ScanGeometry,
    fps: f64,
) -> Result<ScanPattern, ScanError> {
    let n = budget(model, fps)?;
    if n == 0 {
        return Err(ScanError::ZeroBudget { fps });
    }
    let count = n.min(geometry.reachable_pixels());
    let angles = serpentine_grid(&geometry.full_window(), count);
    Ok(ScanPattern::from_angles(model, fps, Regime::FullFov, None, n, angles))
}

/// Full-FOV patterns at several frame rates with the FOV held fixed.
pub fn gen_density_sweep(
    model: &MirrorModel,
    geometry: &ScanGeometry,
    fps_values: &[f64],
) -> Result<Vec<ScanPattern>, ScanError> {
    fps_values
        .iter()
        .map(|&fps| {
            let mut p = gen_full_fov(model, geometry, fps)?;
            p.regime = Regime::DensitySweep;
            Ok(p)
        })
        .collect()
}

fn raster_order(mut pixels: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    pixels.sort_by_key(|&(x, y)| (y, if y % 2 == 0 { x as isize } else { -(x as isize) }));
    pixels
}

/// Draws `budget` pixels without replacement with probability proportional
/// to `entropy + ENTROPY_FLOOR·max(entropy)`.
///
/// Fails with [`ScanError::DegenerateMap`] on an all-zero map; see
/// [`gen_entropy_adaptive`] for the falling-back variant.
pub fn gen_entropy_adaptive_strict(
    model: &MirrorModel,
    geometry: &ScanGeometry,
    fps: f64,
    entropy: &Grid<f64>,
    seed: u64,
) -> Result<ScanPattern, ScanError> {
    let k = &geometry.intrinsics;
    if entropy.dims() != (k.width, k.height) || entropy.data().iter().any(|&e| !(e >= 0.0) || !e.is_finite()) {
        return Err(ScanError::InvalidMap);
    }
    let n = budget(model, fps)?;
    if n == 0 {
        return Err(ScanError::ZeroBudget { fps });
    }
    let peak = entropy.data().iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(ScanError::DegenerateMap);
    }
    let floor = ENTROPY_FLOOR * peak;
    let mut candidates = Vec::new();
    let mut weights = Vec::new();
    for y in 0..k.height {
        for x in 0..k.width {
            let (t, p) = k.pixel_to_angles(x, y);
            if geometry.reachable(t, p) {
                candidates.push((x, y));
                weights.push(entropy.get(x, y) + floor);
            }
        }
    }
    let amount = n.min(candidates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = index::sample_weighted(&mut rng, candidates.len(), |i| weights[i], amount)
        .expect("weights are positive and finite");
    let pixels = raster_order(picked.iter().map(|i| candidates[i]).collect());
    let angles = pixels.into_iter().map(|(x, y)| k.pixel_to_angles(x, y)).collect();
    Ok(ScanPattern::from_angles(
        model,
        fps,
        Regime::EntropyAdaptive,
        Some(seed),
        n,
        angles,
    ))
}

/// Entropy-driven sampling; an all-zero map falls back to [`gen_full_fov`].
pub fn gen_entropy_adaptive(
    model: &MirrorModel,
    geometry: &ScanGeometry,
    fps: f64,
    entropy: &Grid<f64>,
    seed: u64,
) -> Result<ScanPattern, ScanError> {
    match gen_entropy_adaptive_strict(model, geometry, fps, entropy, seed) {
        Err(ScanError::DegenerateMap) => {
            log::warn!("entropy map is all zeros; using the full-FOV pattern");
            gen_full_fov(model, geometry, fps)
        }
        other => other,
    }
}

/// Rectangular region of interest with relative per-pixel sample densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub rect: PixelRect,
    pub inside_density: f64,
    pub outside_density: f64,
}

impl Roi {
    /// Every sample inside the rectangle.
    pub fn exclusive(rect: PixelRect) -> Self {
        Self {
            rect,
            inside_density: 1.0,
            outside_density: 0.0,
        }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<(), ScanError> {
        if !self.rect.fits_in(width, height) {
            return Err(ScanError::RoiOutOfBounds {
                rect: self.rect,
                width,
                height,
            });
        }
        let (i, o) = (self.inside_density, self.outside_density);
        if !((0.0..=1.0).contains(&i) && (0.0..=1.0).contains(&o) && i >= o && i > 0.0) {
            return Err(ScanError::InvalidDensity {
                inside: i,
                outside: o,
            });
        }
        Ok(())
    }
}

/// Picks `n_out` directions outside `rect` from the coarsest full-window
/// grid that has enough of them, thinning evenly when it has too many.
fn outside_grid(geometry: &ScanGeometry, rect: &PixelRect, n_out: usize) -> Vec<(f64, f64)> {
    if n_out == 0 {
        return Vec::new();
    }
    let k = &geometry.intrinsics;
    let win = geometry.full_window();
    let outside = |pts: Vec<(f64, f64)>| -> Vec<(f64, f64)> {
        pts.into_iter()
            .filter(|&(t, p)| k.angles_to_pixel(t, p).is_some_and(|(x, y)| !rect.contains(x, y)))
            .collect()
    };
    let total = k.pixel_count() as f64;
    let out_area = (k.pixel_count() - rect.area()).max(1) as f64;
    let mut m = ((n_out as f64) * total / out_area).floor().max(n_out as f64) as usize;
    let limit = 4 * k.pixel_count().max(n_out);
    let mut pts = outside(serpentine_grid(&win, m));
    while pts.len() < n_out && m < limit {
        m += 1;
        pts = outside(serpentine_grid(&win, m));
    }
    if pts.len() <= n_out {
        return pts;
    }
    let count = pts.len();
    (0..n_out)
        .map(|i| pts[((i as f64 + 0.5) * count as f64 / n_out as f64) as usize])
        .collect()
}

fn foveated_angles(
    geometry: &ScanGeometry,
    rect: &PixelRect,
    n_in: usize,
    n_out: usize,
) -> Vec<(f64, f64)> {
    let mut angles = serpentine_grid(&geometry.rect_window(rect), n_in);
    angles.extend(outside_grid(geometry, rect, n_out));
    angles
}

/// Splits `n` samples so per-pixel densities inside and outside the ROI
/// follow the ROI's density ratio.
pub fn split_budget(n: usize, roi: &Roi, pixel_count: usize) -> (usize, usize) {
    let a_in = roi.rect.area() as f64;
    let a_out = (pixel_count - roi.rect.area()) as f64;
    let w_in = roi.inside_density * a_in;
    let w_out = roi.outside_density * a_out;
    let n_in = ((n as f64) * w_in / (w_in + w_out)).round() as usize;
    (n_in.min(n), n - n_in.min(n))
}

/// Equi-angular sub-grids inside and outside the ROI with the frame budget
/// split by [`split_budget`].
pub fn gen_foveated(
    model: &MirrorModel,
    geometry: &ScanGeometry,
    fps: f64,
    roi: &Roi,
) -> Result<ScanPattern, ScanError> {
    let k = &geometry.intrinsics;
    roi.validate(k.width, k.height)?;
    let n = budget(model, fps)?;
    if n == 0 {
        return Err(ScanError::ZeroBudget { fps });
    }
    let (n_in, n_out) = split_budget(n, roi, k.pixel_count());
    let angles = foveated_angles(geometry, &roi.rect, n_in, n_out);
    Ok(ScanPattern::from_angles(model, fps, Regime::FoveatedRoi, None, n, angles))
}

/// Foveation that trades samples for frame rate: the ROI keeps the per-pixel
/// density of a full scan at `dense_fps`, the rest of the image gets
/// `outside_density` of it, and the frame runs as fast as that sample count
/// allows. The returned pattern's `fps` is the amortized rate.
pub fn gen_amortized_foveated(
    model: &MirrorModel,
    geometry: &ScanGeometry,
    dense_fps: f64,
    roi: &Roi,
) -> Result<ScanPattern, ScanError> {
    let k = &geometry.intrinsics;
    roi.validate(k.width, k.height)?;
    let dense = budget(model, dense_fps)?;
    let density = dense as f64 / k.pixel_count() as f64;
    let n_in = ((density * roi.inside_density * roi.rect.area() as f64).round() as usize).max(1);
    let n_out = (density * roi.outside_density * (k.pixel_count() - roi.rect.area()) as f64).round()
        as usize;
    let n = n_in + n_out;
    let fps = amortized_fps(model, n);
    let angles = foveated_angles(geometry, &roi.rect, n_in, n_out);
    Ok(ScanPattern::from_angles(model, fps, Regime::FoveatedRoi, None, n, angles))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry(w: usize, h: usize) -> ScanGeometry {
        ScanGeometry::new(Intrinsics::from_hfov(w, h, 25f64.to_radians()), 25f64.to_radians())
    }

    fn fixed(rate: f64, overhead: f64) -> MirrorModel {
        MirrorModel {
            sample_rate: rate,
            frame_overhead: overhead,
            ..MirrorModel::default()
        }
    }

    #[test]
    fn budget_examples() {
        assert_eq!(budget(&fixed(1600.0, 0.0), 16.0).unwrap(), 100);
        assert_eq!(budget(&fixed(1522.0, 0.0149), 30.0).unwrap(), 28);
        assert!(matches!(
            budget(&fixed(1600.0, 0.05), 30.0),
            Err(ScanError::OverheadExceedsFrame { .. })
        ));
        assert!(matches!(budget(&fixed(1600.0, 0.0), 0.0), Err(ScanError::InvalidFps(_))));
    }

    #[test]
    fn fit_recovers_exact_model() {
        let obs: Vec<(f64, f64)> = [5.0, 10.0, 20.0, 40.0]
            .iter()
            .map(|&f| (f, (1.0 / f - 0.01) * 1600.0))
            .collect();
        let fit = fit_budget(&obs).unwrap();
        assert!((fit.sample_rate - 1600.0).abs() < 1e-6);
        assert!((fit.frame_overhead - 0.01).abs() < 1e-6);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn fit_rejects_equal_fps() {
        assert_eq!(fit_budget(&[(30.0, 28.0), (30.0, 28.0)]), Err(ScanError::SingularFit));
        assert_eq!(fit_budget(&[(30.0, 28.0)]), Err(ScanError::SingularFit));
    }

    #[test]
    fn reference_fit_brackets_engine_rate() {
        let fit = fit_budget(&REFERENCE_FRAME_BUDGETS).unwrap();
        assert!((1400.0..=1650.0).contains(&fit.sample_rate), "{}", fit.sample_rate);
        assert!((0.012..=0.018).contains(&fit.frame_overhead), "{}", fit.frame_overhead);
        let model = MirrorModel::calibrated();
        let at6 = budget(&model, 6.0).unwrap() as f64;
        assert!((at6 - 231.0).abs() <= 0.05 * 231.0);
        let at30 = budget(&model, 30.0).unwrap() as f64;
        assert!((at30 - 28.0).abs() <= 0.05 * 28.0);
    }

    #[test]
    fn full_fov_grid_shape() {
        let g = geometry(640, 480);
        let p = gen_full_fov(&fixed(1522.0, 0.0149), &g, 30.0).unwrap();
        assert_eq!(p.len(), 28);
        let mut rows: Vec<f64> = p.samples.iter().map(|s| s.phi_rad).collect();
        rows.dedup();
        assert_eq!(rows.len(), 6);
        let last_row = p.samples.iter().filter(|s| s.phi_rad == rows[5]).count();
        assert_eq!(last_row, 3);
        p.check(&fixed(1522.0, 0.0149)).unwrap();
    }

    #[test]
    fn single_sample_is_centered() {
        let g = geometry(64, 48);
        let model = fixed(1000.0, 0.0);
        let p = gen_full_fov(&model, &g, 1000.0).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.samples[0].theta_rad.abs() < 1e-15 && p.samples[0].phi_rad.abs() < 1e-15);
    }

    #[test]
    fn serpentine_alternates() {
        let win = AngleWindow {
            theta: (-1.0, 1.0),
            phi: (-1.0, 1.0),
        };
        let pts = serpentine_grid(&win, 9);
        assert!(pts[0].0 < pts[2].0);
        assert!(pts[3].0 > pts[5].0);
        assert_eq!(pts[2].0, pts[3].0);
    }

    #[test]
    fn entropy_fallback_and_errors() {
        let g = geometry(32, 24);
        let model = fixed(1600.0, 0.0);
        let zeros = Grid::new(32, 24, 0.0);
        assert_eq!(
            gen_entropy_adaptive_strict(&model, &g, 30.0, &zeros, 1),
            Err(ScanError::DegenerateMap)
        );
        let p = gen_entropy_adaptive(&model, &g, 30.0, &zeros, 1).unwrap();
        assert_eq!(p.regime, Regime::FullFov);
        let bad = Grid::new(3, 3, 1.0);
        assert_eq!(
            gen_entropy_adaptive(&model, &g, 30.0, &bad, 1),
            Err(ScanError::InvalidMap)
        );
    }

    #[test]
    fn foveated_full_image_equals_full_fov() {
        let g = geometry(160, 120);
        let model = MirrorModel::calibrated();
        let full = gen_full_fov(&model, &g, 6.0).unwrap();
        let roi = Roi::exclusive(PixelRect::full(160, 120));
        let fov = gen_foveated(&model, &g, 6.0, &roi).unwrap();
        assert_eq!(full.samples, fov.samples);
    }

    #[test]
    fn foveated_rejects_bad_roi() {
        let g = geometry(160, 120);
        let model = MirrorModel::calibrated();
        let roi = Roi::exclusive(PixelRect::new(100, 0, 200, 50));
        assert!(matches!(
            gen_foveated(&model, &g, 6.0, &roi),
            Err(ScanError::RoiOutOfBounds { .. })
        ));
        let inverted = Roi {
            rect: PixelRect::new(0, 0, 10, 10),
            inside_density: 0.2,
            outside_density: 0.5,
        };
        assert!(matches!(
            gen_foveated(&model, &g, 6.0, &inverted),
            Err(ScanError::InvalidDensity { .. })
        ));
    }

    #[test]
    fn pattern_json_roundtrip() {
        let g = geometry(64, 48);
        let p = gen_full_fov(&MirrorModel::calibrated(), &g, 12.0).unwrap();
        let text = p.to_json();
        assert!(text.contains("\"regime\": \"full_fov\""));
        assert!(text.contains("\"theta_rad\""));
        assert_eq!(ScanPattern::from_json(&text).unwrap(), p);
    }

    #[test]
    fn amortized_rate_beats_dense() {
        let g = geometry(160, 120);
        let model = MirrorModel::calibrated();
        let roi = Roi {
            rect: PixelRect::new(40, 30, 100, 90),
            inside_density: 1.0,
            outside_density: 0.1,
        };
        let p = gen_amortized_foveated(&model, &g, 6.0, &roi).unwrap();
        assert!(p.len() < budget(&model, 6.0).unwrap());
        assert!(p.fps > 6.0);
        p.check(&model).unwrap();
    }

    #[test]
    fn voltage_map_roundtrip() {
        let m = MirrorModel {
            gain: [0.02, -0.03],
            offset: [0.001, 0.002],
            ..MirrorModel::default()
        };
        let v = m.angles_to_voltages(0.1, -0.05);
        let (t, p) = m.voltages_to_angles(v);
        assert!((t - 0.1).abs() < 1e-15 && (p + 0.05).abs() < 1e-15);
    }
}
