//! RGB-guided sparse-to-dense depth completion.
//!
//! Every missing pixel takes the weighted mean of its `k` nearest samples,
//! with weights `exp(−d²/2σs²)·exp(−‖Δrgb‖²/2σc²)` evaluated in the log
//! domain so distant neighbourhoods never underflow to zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{DepthMap, Grid, PixelRect, RgbImage};
use crate::lidar::{self, CaptureParams, LidarError};
use crate::metrics::{self, MetricsError, MetricsReport};
use crate::scan::{self, MirrorModel, Roi, ScanError, ScanGeometry};
use crate::scene::SceneFrame;

#[derive(Debug, Error)]
pub enum CompletionError {
    #[error("sparse depth has no valid samples")]
    NoSamples,
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("depth is {depth:?}, guide image is {rgb:?}")]
    DimensionMismatch { depth: (usize, usize), rgb: (usize, usize) },
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Lidar(#[from] LidarError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnSearch {
    /// Ring search over square buckets.
    Grid,
    /// Every sample, sorted; the oracle for `Grid`.
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidedFillParams {
    /// Pixels.
    pub sigma_spatial: f64,
    /// RGB Euclidean distance; infinity disables guidance.
    pub sigma_color: f64,
    pub k_neighbors: usize,
    pub search: KnnSearch,
}

impl Default for GuidedFillParams {
    fn default() -> Self {
        Self {
            sigma_spatial: 12.0,
            sigma_color: 20.0,
            k_neighbors: 16,
            search: KnnSearch::Grid,
        }
    }
}

impl GuidedFillParams {
    pub fn validate(&self) -> Result<(), CompletionError> {
        if !(self.sigma_spatial > 0.0) || self.sigma_spatial.is_nan() {
            return Err(CompletionError::InvalidParams("sigma_spatial must be > 0"));
        }
        if !(self.sigma_color > 0.0) {
            return Err(CompletionError::InvalidParams("sigma_color must be > 0"));
        }
        if self.k_neighbors == 0 {
            return Err(CompletionError::InvalidParams("k_neighbors must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Completed,
    GroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseDepth {
    pub depth: DepthMap,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    x: i64,
    y: i64,
    z: f64,
    rgb: [u8; 3],
}

/// Square buckets of sample indices.
struct Buckets {
    cell: i64,
    cols: i64,
    rows: i64,
    cells: Vec<Vec<u32>>,
}

impl Buckets {
    fn new(samples: &[Sample], width: usize, height: usize, k: usize) -> Self {
        // about k samples per bucket on average
        let area = (width * height) as f64;
        let cell = ((area * k as f64 / samples.len() as f64).sqrt().ceil() as i64).max(1);
        let cols = (width as i64 + cell - 1) / cell;
        let rows = (height as i64 + cell - 1) / cell;
        let mut cells = vec![Vec::new(); (cols * rows) as usize];
        for (i, s) in samples.iter().enumerate() {
            cells[((s.y / cell) * cols + s.x / cell) as usize].push(i as u32);
        }
        Self { cell, cols, rows, cells }
    }

    /// Indices of the `k` samples nearest `(x, y)`, ordered by (distance², index).
    fn knn(&self, samples: &[Sample], x: i64, y: i64, k: usize, out: &mut Vec<(i64, u32)>) {
        out.clear();
        let (cx, cy) = (x / self.cell, y / self.cell);
        let max_ring = self.cols.max(self.rows);
        for r in 0..=max_ring {
            for gy in cy - r..=cy + r {
                if gy < 0 || gy >= self.rows {
                    continue;
                }
                for gx in cx - r..=cx + r {
                    if gx < 0 || gx >= self.cols || ((gy - cy).abs() != r && (gx - cx).abs() != r) {
                        continue;
                    }
                    for &i in &self.cells[(gy * self.cols + gx) as usize] {
                        let s = &samples[i as usize];
                        out.push(((s.x - x).pow(2) + (s.y - y).pow(2), i));
                    }
                }
            }
            if out.len() >= k {
                let kth = *out.select_nth_unstable(k - 1).1;
                if kth.0 < self.reach2(x, y, cx, cy, r) {
                    out.truncate(k);
                    out.sort_unstable();
                    return;
                }
            }
        }
        out.sort_unstable();
        out.truncate(k);
    }

    /// Squared distance from `(x, y)` to the nearest pixel outside rings
    /// `0..=r`; sides already at the image border are ignored.
    fn reach2(&self, x: i64, y: i64, cx: i64, cy: i64, r: i64) -> i64 {
        let c = self.cell;
        let mut reach = i64::MAX;
        if cx - r > 0 {
            reach = reach.min(x - (cx - r) * c + 1);
        }
        if cx + r + 1 < self.cols {
            reach = reach.min((cx + r + 1) * c - x);
        }
        if cy - r > 0 {
            reach = reach.min(y - (cy - r) * c + 1);
        }
        if cy + r + 1 < self.rows {
            reach = reach.min((cy + r + 1) * c - y);
        }
        reach.saturating_mul(reach)
    }
}

fn brute_knn(samples: &[Sample], x: i64, y: i64, k: usize, out: &mut Vec<(i64, u32)>) {
    out.clear();
    out.extend(
        samples
            .iter()
            .enumerate()
            .map(|(i, s)| ((s.x - x).pow(2) + (s.y - y).pow(2), i as u32)),
    );
    out.sort_unstable();
    out.truncate(k);
}

fn color_dist2(a: [u8; 3], b: [u8; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&p, q)| (f64::from(p) - f64::from(q)).powi(2))
        .sum()
}

/// Fills every zero pixel of `sparse` from its nearest samples, guided by
/// `rgb`. Sampled pixels keep their values; no randomness is involved.
pub fn complete(sparse: &DepthMap, rgb: &RgbImage, params: &GuidedFillParams) -> Result<DenseDepth, CompletionError> {
    params.validate()?;
    if !sparse.same_dims(rgb) {
        return Err(CompletionError::DimensionMismatch {
            depth: sparse.dims(),
            rgb: rgb.dims(),
        });
    }
    let (w, h) = sparse.dims();
    let samples: Vec<Sample> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| *sparse.get(x, y) > 0.0)
        .map(|(x, y)| Sample {
            x: x as i64,
            y: y as i64,
            z: *sparse.get(x, y),
            rgb: *rgb.get(x, y),
        })
        .collect();
    if samples.is_empty() {
        return Err(CompletionError::NoSamples);
    }
    let k = params.k_neighbors.min(samples.len());
    let buckets = (params.search == KnnSearch::Grid).then(|| Buckets::new(&samples, w, h, k));
    let inv_s = 1.0 / (2.0 * params.sigma_spatial * params.sigma_spatial);
    let inv_c = if params.sigma_color.is_finite() {
        1.0 / (2.0 * params.sigma_color * params.sigma_color)
    } else {
        0.0
    };
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut nn = Vec::new();
            let mut logw = Vec::with_capacity(k);
            (0..w)
                .map(|x| {
                    let v = *sparse.get(x, y);
                    if v > 0.0 {
                        return v;
                    }
                    let (xi, yi) = (x as i64, y as i64);
                    match &buckets {
                        Some(b) => b.knn(&samples, xi, yi, k, &mut nn),
                        None => brute_knn(&samples, xi, yi, k, &mut nn),
                    }
                    let c = *rgb.get(x, y);
                    logw.clear();
                    logw.extend(nn.iter().map(|&(d2, i)| {
                        -(d2 as f64) * inv_s - color_dist2(c, samples[i as usize].rgb) * inv_c
                    }));
                    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let (mut num, mut den) = (0.0, 0.0);
                    for (&(_, i), &lw) in nn.iter().zip(&logw) {
                        let wgt = (lw - top).exp();
                        num += wgt * samples[i as usize].z;
                        den += wgt;
                    }
                    num / den
                })
                .collect()
        })
        .collect();
    Ok(DenseDepth {
        depth: Grid::from_vec(w, h, rows.concat()).expect("row lengths match"),
        provenance: Provenance::Completed,
    })
}

/// Full-FOV and foveated runs at the same budget, scored inside the ROI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoveationComparison {
    pub full_fov: MetricsReport,
    pub foveated: MetricsReport,
    /// Pattern length, identical for both runs.
    pub pattern_samples: usize,
    pub full_fov_captured: usize,
    pub foveated_captured: usize,
    pub full_fov_in_roi: usize,
    pub foveated_in_roi: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonSetup {
    pub fps: f64,
    pub outside_density: f64,
    pub capture: CaptureParams,
    pub fill: GuidedFillParams,
    pub noise_seed: u64,
}

impl Default for ComparisonSetup {
    fn default() -> Self {
        Self {
            fps: 6.0,
            outside_density: 0.0,
            capture: CaptureParams::default(),
            fill: GuidedFillParams::default(),
            noise_seed: 0,
        }
    }
}

/// Captures and completes `frame` under a full-FOV pattern and a foveated
/// pattern with the same budget, then scores both only inside `roi`.
pub fn compare_foveated(
    frame: &SceneFrame,
    roi: PixelRect,
    mirror_fov: f64,
    model: &MirrorModel,
    setup: &ComparisonSetup,
) -> Result<FoveationComparison, CompletionError> {
    let k = &frame.intrinsics;
    let geometry = ScanGeometry::new(*k, mirror_fov);
    let full = scan::gen_full_fov(model, &geometry, setup.fps)?;
    let fov = scan::gen_foveated(
        model,
        &geometry,
        setup.fps,
        &Roi {
            rect: roi,
            inside_density: 1.0,
            outside_density: setup.outside_density,
        },
    )?;
    let mask = roi.to_mask(k.width, k.height);
    let run = |p: &scan::ScanPattern| -> Result<(MetricsReport, usize, usize), CompletionError> {
        let sparse = lidar::capture(frame, p, &setup.capture, setup.noise_seed);
        let dense = complete(&sparse.depth, &frame.rgb, &setup.fill)?;
        let report = metrics::compute(&dense.depth, &frame.depth, Some(&mask))?;
        let inside = sparse.samples.iter().filter(|s| roi.contains(s.x, s.y)).count();
        Ok((report, sparse.len(), inside))
    };
    let (full_fov, full_n, full_in) = run(&full)?;
    let (foveated, fov_n, fov_in) = run(&fov)?;
    Ok(FoveationComparison {
        full_fov,
        foveated,
        pattern_samples: full.len().min(fov.len()),
        full_fov_captured: full_n,
        foveated_captured: fov_n,
        full_fov_in_roi: full_in,
        foveated_in_roi: fov_in,
    })
}
