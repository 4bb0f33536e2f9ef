//! Depth-estimation error metrics and SVD plane-fit residuals.
//!
//! `δ_i` is the percentage of pixels with `max(ŷ/y, y/ŷ) < 1.25^i`, and the
//! log error is `mean |log10 ŷ − log10 y|`.

use std::io::{self, Write};

use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{DepthMap, Mask};

pub const DELTA_BASE: f64 = 1.25;

/// Pixels per reduction block; fixed so sums do not depend on thread count.
const BLOCK: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no pixel has both a valid prediction and valid ground truth")]
    EmptyMask,
    #[error("negative or non-finite depth {value} at index {index}")]
    NonPositiveDepth { index: usize, value: f64 },
    #[error("maps differ in size: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("need 3 or more non-collinear points")]
    DegenerateGeometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Percent.
    pub mre: f64,
    /// Meters.
    pub rmse: f64,
    pub log10: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub n_pixels: usize,
}

pub const METRICS_CSV_HEADER: &str = "mre_pct,rmse_m,log10,delta1_pct,delta2_pct,delta3_pct,n_pixels";

impl MetricsReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.4},{:.4},{:.4},{}",
            self.mre, self.rmse, self.log10, self.delta1, self.delta2, self.delta3, self.n_pixels
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{METRICS_CSV_HEADER}")?;
        writeln!(out, "{}", self.csv_row())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    rel: f64,
    sq: f64,
    log: f64,
    hits: [usize; 3],
    n: usize,
}

impl Sums {
    fn push(&mut self, p: f64, t: f64) {
        let d = p - t;
        self.rel += d.abs() / t;
        self.sq += d * d;
        self.log += (p.log10() - t.log10()).abs();
        let ratio = (p / t).max(t / p);
        let mut thr = DELTA_BASE;
        for hit in &mut self.hits {
            if ratio < thr {
                *hit += 1;
            }
            thr *= DELTA_BASE;
        }
        self.n += 1;
    }

    fn merge(mut self, o: Sums) -> Sums {
        self.rel += o.rel;
        self.sq += o.sq;
        self.log += o.log;
        for i in 0..3 {
            self.hits[i] += o.hits[i];
        }
        self.n += o.n;
        self
    }

    fn report(&self) -> Result<MetricsReport, MetricsError> {
        if self.n == 0 {
            return Err(MetricsError::EmptyMask);
        }
        let n = self.n as f64;
        let pct = |h: usize| 100.0 * h as f64 / n;
        Ok(MetricsReport {
            mre: 100.0 * self.rel / n,
            rmse: (self.sq / n).sqrt(),
            log10: self.log / n,
            delta1: pct(self.hits[0]),
            delta2: pct(self.hits[1]),
            delta3: pct(self.hits[2]),
            n_pixels: self.n,
        })
    }
}

fn check(index: usize, v: f64) -> Result<(), MetricsError> {
    if v < 0.0 || !v.is_finite() {
        Err(MetricsError::NonPositiveDepth { index, value: v })
    } else {
        Ok(())
    }
}

/// Metrics over paired slices. Pairs where either value is 0 (missing) or
/// the mask is false are skipped.
pub fn compute_slices(pred: &[f64], truth: &[f64], mask: Option<&[bool]>) -> Result<MetricsReport, MetricsError> {
    assert_eq!(pred.len(), truth.len());
    if let Some(m) = mask {
        assert_eq!(m.len(), pred.len());
    }
    let blocks: Vec<Result<Sums, MetricsError>> = (0..pred.len().div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut s = Sums::default();
            for i in b * BLOCK..((b + 1) * BLOCK).min(pred.len()) {
                if mask.is_some_and(|m| !m[i]) {
                    continue;
                }
                let (p, t) = (pred[i], truth[i]);
                check(i, p)?;
                check(i, t)?;
                if p > 0.0 && t > 0.0 {
                    s.push(p, t);
                }
            }
            Ok(s)
        })
        .collect();
    let mut total = Sums::default();
    for b in blocks {
        total = total.merge(b?);
    }
    total.report()
}

/// Metrics of `pred` against `truth`, restricted to `mask` when given.
pub fn compute(pred: &DepthMap, truth: &DepthMap, mask: Option<&Mask>) -> Result<MetricsReport, MetricsError> {
    if !pred.same_dims(truth) {
        return Err(MetricsError::DimensionMismatch(pred.dims(), truth.dims()));
    }
    if let Some(m) = mask {
        if !m.same_dims(truth) {
            return Err(MetricsError::DimensionMismatch(m.dims(), truth.dims()));
        }
    }
    compute_slices(pred.data(), truth.data(), mask.map(|m| m.data()))
}

/// Metrics over explicit `(prediction, truth)` pairs.
pub fn compute_pairs(pairs: &[(f64, f64)]) -> Result<MetricsReport, MetricsError> {
    let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    compute_slices(&p, &t, None)
}

/// Best-fit plane through `points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub centroid: [f64; 3],
    pub normal: [f64; 3],
    /// RMS orthogonal distance to the plane.
    pub rmse: f64,
}

/// Plane through the centroid whose normal is the smallest right singular
/// vector of the centered points.
pub fn fit_plane(points: &[[f64; 3]]) -> Result<PlaneFit, MetricsError> {
    if points.len() < 3 {
        return Err(MetricsError::DegenerateGeometry);
    }
    let n = points.len() as f64;
    let c = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + Vector3::from(*p))
        / n;
    let centered = DMatrix::from_fn(points.len(), 3, |i, j| points[i][j] - c[j]);
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let (mut lo, mut mid) = (0, 0);
    for j in 1..3 {
        if sv[j] < sv[lo] {
            lo = j;
        }
    }
    for j in 0..3 {
        if j != lo && (mid == lo || sv[j] < sv[mid]) {
            mid = j;
        }
    }
    let scale = sv.iter().cloned().fold(0.0, f64::max);
    // collinear or coincident points leave two vanishing singular values
    if scale == 0.0 || sv[mid] <= 1e-12 * scale {
        return Err(MetricsError::DegenerateGeometry);
    }
    let normal = Vector3::new(v_t[(lo, 0)], v_t[(lo, 1)], v_t[(lo, 2)]);
    let sq: f64 = points
        .iter()
        .map(|p| (Vector3::from(*p) - c).dot(&normal).powi(2))
        .sum();
    Ok(PlaneFit {
        centroid: [c[0], c[1], c[2]],
        normal: [normal[0], normal[1], normal[2]],
        rmse: (sq / n).sqrt(),
    })
}

pub fn planar_rmse(points: &[[f64; 3]]) -> Result<f64, MetricsError> {
    fit_plane(points).map(|f| f.rmse)
}
