//! ROI discovery: local-entropy maps and running-mean background subtraction.

use std::collections::VecDeque;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{GrayImage, Grid, Mask, PixelRect, RgbImage};
use crate::scan::{self, MirrorModel, Roi, ScanError, ScanGeometry, ScanPattern};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FoveationError {
    #[error("window size must be odd and >= 3, got {0}")]
    InvalidWindow(usize),
    #[error("ROI {w}x{h} does not fit a {width}x{height} map")]
    RoiTooLarge {
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("frame is {found:?}, background model is {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid background parameters: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Scan(#[from] ScanError),
}

/// Per-pixel Shannon entropy (bits) of the 8-bit grayscale histogram in a
/// `window × window` neighbourhood with replicate-padded borders.
pub fn entropy_map(rgb: &RgbImage, window: usize) -> Result<Grid<f64>, FoveationError> {
    entropy_map_gray(&crate::image::to_gray(rgb), window)
}

pub fn entropy_map_gray(gray: &GrayImage, window: usize) -> Result<Grid<f64>, FoveationError> {
    if window < 3 || window % 2 == 0 {
        return Err(FoveationError::InvalidWindow(window));
    }
    let (w, h) = gray.dims();
    let r = (window / 2) as isize;
    let n = window * window;
    // c·log2(c) for every possible bin count
    let clogc: Vec<f64> = (0..=n).map(|c| if c < 2 { 0.0 } else { c as f64 * (c as f64).log2() }).collect();
    let log_n = (n as f64).log2();
    let clamp_x = |x: isize| x.clamp(0, w as isize - 1) as usize;
    let clamp_y = |y: isize| y.clamp(0, h as isize - 1) as usize;

    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..h)
            .into_par_iter()
            .map(|y| {
                let ys: Vec<usize> = (-r..=r).map(|d| clamp_y(y as isize + d)).collect();
                let mut hist = [0u32; 256];
                let mut distinct = 0usize;
                let mut sum = 0.0;
                let bump = |hist: &mut [u32; 256], v: u8, add: bool, distinct: &mut usize, sum: &mut f64| {
                    let c = hist[v as usize] as usize;
                    let c2 = if add { c + 1 } else { c - 1 };
                    *sum += clogc[c2] - clogc[c];
                    if c == 0 {
                        *distinct += 1;
                    }
                    if c2 == 0 {
                        *distinct -= 1;
                    }
                    hist[v as usize] = c2 as u32;
                };
                for dx in -r..=r {
                    let x = clamp_x(dx);
                    for &yy in &ys {
                        bump(&mut hist, *gray.get(x, yy), true, &mut distinct, &mut sum);
                    }
                }
                let mut row = Vec::with_capacity(w);
                for x in 0..w {
                    if x > 0 {
                        let out = clamp_x(x as isize - r - 1);
                        let inc = clamp_x(x as isize + r);
                        for &yy in &ys {
                            bump(&mut hist, *gray.get(out, yy), false, &mut distinct, &mut sum);
                            bump(&mut hist, *gray.get(inc, yy), true, &mut distinct, &mut sum);
                        }
                    }
                    let e = if distinct <= 1 { 0.0 } else { (log_n - sum / n as f64).clamp(0.0, 8.0) };
                    row.push(e);
                }
                row
            })
            .collect()
    };
    Ok(Grid::from_vec(w, h, rows.concat()).expect("row lengths match"))
}

/// Fixed-point scale for exact summed-area comparisons.
const ROI_QUANTUM: f64 = (1u64 << 32) as f64;

/// The `roi_w × roi_h` rectangle with the largest summed value; ties go to
/// the smallest `(y0, x0)`.
pub fn max_entropy_roi(map: &Grid<f64>, roi_w: usize, roi_h: usize) -> Result<PixelRect, FoveationError> {
    let (w, h) = map.dims();
    if roi_w == 0 || roi_h == 0 || roi_w > w || roi_h > h {
        return Err(FoveationError::RoiTooLarge {
            w: roi_w,
            h: roi_h,
            width: w,
            height: h,
        });
    }
    // integral image over quantized values so equal windows compare equal
    let mut sat = vec![0i128; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0i128;
        for x in 0..w {
            row += (map.get(x, y).max(0.0) * ROI_QUANTUM).round() as i128;
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let at = |x: usize, y: usize| sat[y * (w + 1) + x];
    let mut best = (i128::MIN, 0, 0);
    for y0 in 0..=h - roi_h {
        for x0 in 0..=w - roi_w {
            let (x1, y1) = (x0 + roi_w, y0 + roi_h);
            let s = at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
            if s > best.0 {
                best = (s, x0, y0);
            }
        }
    }
    Ok(PixelRect::new(best.1, best.2, best.1 + roi_w, best.2 + roi_h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundParams {
    pub learning_rate: f64,
    /// Gray levels.
    pub diff_threshold: f64,
    pub min_blob_area: usize,
    /// Pixels added on every side of the detected box.
    pub margin: usize,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            diff_threshold: 25.0,
            min_blob_area: 100,
            margin: 10,
        }
    }
}

/// Running-mean grayscale background.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    pub params: BackgroundParams,
    mean: Option<Grid<f64>>,
    width: usize,
    height: usize,
}

impl BackgroundModel {
    pub fn new(width: usize, height: usize, params: BackgroundParams) -> Result<Self, FoveationError> {
        if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
            return Err(FoveationError::InvalidParams("learning_rate must lie in (0, 1]"));
        }
        if !(params.diff_threshold >= 0.0) {
            return Err(FoveationError::InvalidParams("diff_threshold must be >= 0"));
        }
        Ok(Self {
            params,
            mean: None,
            width,
            height,
        })
    }

    pub fn mean(&self) -> Option<&Grid<f64>> {
        self.mean.as_ref()
    }

    /// Foreground mask of `gray` against the current mean, before opening.
    fn difference(&self, gray: &GrayImage) -> Mask {
        let mean = self.mean.as_ref().expect("initialized");
        Grid::from_fn(self.width, self.height, |x, y| {
            (f64::from(*gray.get(x, y)) - mean.get(x, y)).abs() > self.params.diff_threshold
        })
    }

    /// Detects the largest moving blob in `frame`, then blends the frame into
    /// the mean. The first frame only initializes the model.
    pub fn update_and_detect(&mut self, frame: &RgbImage) -> Result<Option<PixelRect>, FoveationError> {
        if frame.dims() != (self.width, self.height) {
            return Err(FoveationError::DimensionMismatch {
                expected: (self.width, self.height),
                found: frame.dims(),
            });
        }
        let gray = crate::image::to_gray(frame);
        if self.mean.is_none() {
            self.mean = Some(gray.map(|&v| f64::from(v)));
            return Ok(None);
        }
        let mask = open3(&self.difference(&gray));
        let roi = largest_component(&mask)
            .filter(|(area, _)| *area >= self.params.min_blob_area)
            .map(|(_, rect)| rect.dilate(self.params.margin, self.width, self.height));
        let a = self.params.learning_rate;
        let mean = self.mean.as_mut().expect("initialized");
        for (m, &g) in mean.data_mut().iter_mut().zip(gray.data()) {
            *m = (1.0 - a) * *m + a * f64::from(g);
        }
        Ok(roi)
    }
}

fn erode3(m: &Mask) -> Mask {
    let (w, h) = m.dims();
    Grid::from_fn(w, h, |x, y| {
        let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
        (y0..=y1).all(|yy| (x0..=x1).all(|xx| *m.get(xx, yy)))
    })
}

fn dilate3(m: &Mask) -> Mask {
    let (w, h) = m.dims();
    Grid::from_fn(w, h, |x, y| {
        let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
        (y0..=y1).any(|yy| (x0..=x1).any(|xx| *m.get(xx, yy)))
    })
}

/// 3×3 morphological opening.
pub fn open3(m: &Mask) -> Mask {
    dilate3(&erode3(m))
}

/// Area and bounding box of the largest 8-connected component; the first in
/// raster order wins ties.
pub fn largest_component(m: &Mask) -> Option<(usize, PixelRect)> {
    let (w, h) = m.dims();
    let mut seen = vec![false; w * h];
    let mut best: Option<(usize, PixelRect)> = None;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || !m.data()[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut area, mut rect) = (0usize, PixelRect::new(w, h, 0, 0));
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            area += 1;
            rect = PixelRect::new(rect.x0.min(x), rect.y0.min(y), rect.x1.max(x + 1), rect.y1.max(y + 1));
            for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = yy * w + xx;
                    if !seen[j] && m.data()[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if best.is_none_or(|(a, _)| area > a) {
            best = Some((area, rect));
        }
    }
    best
}

pub const ROI_TRACE_HEADER: &str = "frame,x0,y0,x1,y1,area_px";

/// Writes `frame,x0,y0,x1,y1,area_px` rows; frames without an ROI leave the
/// coordinates empty.
pub fn write_roi_trace<W: Write>(mut out: W, trace: &[(u32, Option<PixelRect>)]) -> io::Result<()> {
    writeln!(out, "{ROI_TRACE_HEADER}")?;
    for (frame, roi) in trace {
        match roi {
            Some(r) => writeln!(out, "{frame},{},{},{},{},{}", r.x0, r.y0, r.x1, r.y1, r.area())?,
            None => writeln!(out, "{frame},,,,,")?,
        }
    }
    Ok(())
}

/// One frame of the closed motion-foveation loop.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionStep {
    pub frame: u32,
    pub roi: Option<PixelRect>,
    pub pattern: ScanPattern,
}

/// Settings for [`motion_loop`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionLoopConfig {
    pub background: BackgroundParams,
    /// Rate of the dense full-FOV scan whose per-pixel density the ROI keeps.
    pub dense_fps: f64,
    /// Density outside the ROI relative to the dense scan.
    pub outside_density: f64,
}

impl Default for MotionLoopConfig {
    fn default() -> Self {
        Self {
            background: BackgroundParams::default(),
            dense_fps: 6.0,
            outside_density: 0.0,
        }
    }
}

/// Runs background subtraction over `frames` and schedules an amortized
/// foveated scan on the detected ROI, or the dense full-FOV scan when
/// nothing moves.
pub fn motion_loop<'a, I>(
    frames: I,
    model: &MirrorModel,
    geometry: &ScanGeometry,
    config: &MotionLoopConfig,
) -> Result<Vec<MotionStep>, FoveationError>
where
    I: IntoIterator<Item = (u32, &'a RgbImage)>,
{
    let k = &geometry.intrinsics;
    let mut bg = BackgroundModel::new(k.width, k.height, config.background)?;
    let mut steps = Vec::new();
    for (frame, rgb) in frames {
        let roi = bg.update_and_detect(rgb)?;
        let pattern = match roi {
            Some(rect) => scan::gen_amortized_foveated(
                model,
                geometry,
                config.dense_fps,
                &Roi {
                    rect,
                    inside_density: 1.0,
                    outside_density: config.outside_density,
                },
            )?,
            None => scan::gen_full_fov(model, geometry, config.dense_fps)?,
        };
        steps.push(MotionStep { frame, roi, pattern });
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray_to_rgb(g: &GrayImage) -> RgbImage {
        g.map(|&v| [v; 3])
    }

    #[test]
    fn constant_image_has_zero_entropy() {
        let img = Grid::new(20, 15, [77u8; 3]);
        let e = entropy_map(&img, 5).unwrap();
        assert!(e.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn checker_entropy_is_one_bit() {
        let g = Grid::from_fn(64, 64, |x, y| if (x + y) % 2 == 0 { 0u8 } else { 255 });
        let e = entropy_map_gray(&g, 31).unwrap();
        let v = *e.get(32, 32);
        assert!((v - 1.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn window_validation() {
        let g = Grid::new(4, 4, 0u8);
        assert_eq!(entropy_map_gray(&g, 4), Err(FoveationError::InvalidWindow(4)));
        assert_eq!(entropy_map_gray(&g, 1), Err(FoveationError::InvalidWindow(1)));
    }

    #[test]
    fn roi_corner_and_tie_break() {
        let mut m = Grid::new(20, 10, 0.0);
        m.set(19, 9, 5.0);
        assert_eq!(max_entropy_roi(&m, 4, 3).unwrap(), PixelRect::new(16, 7, 20, 10));
        let flat = Grid::new(20, 10, 1.0);
        assert_eq!(max_entropy_roi(&flat, 4, 3).unwrap(), PixelRect::new(0, 0, 4, 3));
        assert!(max_entropy_roi(&flat, 21, 3).is_err());
    }

    #[test]
    fn jump_in_box_detected() {
        let params = BackgroundParams::default();
        let mut bg = BackgroundModel::new(120, 90, params).unwrap();
        let dark = Grid::new(120, 90, 10u8);
        for _ in 0..3 {
            assert_eq!(bg.update_and_detect(&gray_to_rgb(&dark)).unwrap(), None);
        }
        let lit = Grid::from_fn(120, 90, |x, y| if (30..70).contains(&x) && (20..60).contains(&y) { 240 } else { 10 });
        let roi = bg.update_and_detect(&gray_to_rgb(&lit)).unwrap().unwrap();
        let truth = PixelRect::new(30, 20, 70, 60);
        assert_eq!(roi, truth.dilate(params.margin, 120, 90));
    }

    #[test]
    fn small_blob_ignored() {
        let params = BackgroundParams::default();
        let mut bg = BackgroundModel::new(100, 60, params).unwrap();
        bg.update_and_detect(&Grid::new(100, 60, [0u8; 3])).unwrap();
        // 25×20 = 500 px and 10×5 = 50 px
        let frame = Grid::from_fn(100, 60, |x, y| {
            let big = (5..30).contains(&x) && (5..25).contains(&y);
            let small = (70..80).contains(&x) && (40..45).contains(&y);
            [if big || small { 200u8 } else { 0 }; 3]
        });
        let roi = bg.update_and_detect(&frame).unwrap().unwrap();
        assert_eq!(roi, PixelRect::new(5, 5, 30, 25).dilate(10, 100, 60));
    }

    #[test]
    fn dims_checked() {
        let mut bg = BackgroundModel::new(10, 10, BackgroundParams::default()).unwrap();
        assert!(matches!(
            bg.update_and_detect(&Grid::new(9, 10, [0u8; 3])),
            Err(FoveationError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn trace_csv() {
        let mut buf = Vec::new();
        write_roi_trace(&mut buf, &[(0, None), (1, Some(PixelRect::new(1, 2, 4, 6)))]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "frame,x0,y0,x1,y1,area_px\n0,,,,,\n1,1,2,4,6,12\n");
    }
}
