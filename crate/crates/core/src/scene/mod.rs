//! RGB + ground-truth depth sequences and their on-disk layout.
//!
//! A scene directory holds `meta.json` plus one `NNNN.ppm` (8-bit P6 color)
//! and one `NNNN.pgm` (16-bit big-endian P5, depth in millimeters, `0` =
//! invalid) per frame.

mod synthetic;

pub mod presets;

pub use synthetic::{generate_synthetic, Primitive, Shape, SyntheticSpec, Texture};

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::Intrinsics;
use crate::image::{DepthMap, Grid, RgbImage};
use crate::pnm::{self, PnmError};

/// Largest depth a 16-bit millimeter PGM can hold.
pub const MAX_ENCODABLE_DEPTH_M: f64 = 65.535;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: frame has no matching {missing} file")]
    MissingPair { path: PathBuf, missing: &'static str },
    #[error("{path}: dimensions {found:?} do not match expected {expected:?}")]
    DimensionMismatch {
        path: PathBuf,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{path}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("{path}: invalid metadata: {reason}")]
    InvalidMeta { path: PathBuf, reason: String },
    #[error("{path}: depth {depth} m cannot be stored as 16-bit millimeters")]
    DepthNotEncodable { path: PathBuf, depth: f64 },
    #[error("no primitive is visible in any frame")]
    EmptyScene,
    #[error("scene directory contains no frames")]
    NoFrames,
}

fn pnm_error(path: &Path, err: PnmError) -> SceneError {
    match err {
        PnmError::Io(source) => SceneError::Io {
            path: path.to_owned(),
            source,
        },
        other => SceneError::MalformedHeader {
            path: path.to_owned(),
            reason: other.to_string(),
        },
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> SceneError + '_ {
    move |source| SceneError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub z_max_m: f64,
    pub fx_px: f64,
    pub fy_px: f64,
    pub cx_px: f64,
    pub cy_px: f64,
    pub mirror_fov_deg: f64,
}

impl SceneMeta {
    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics {
            width: self.width,
            height: self.height,
            fx: self.fx_px,
            fy: self.fy_px,
            cx: self.cx_px,
            cy: self.cy_px,
        }
    }

    pub fn from_intrinsics(k: &Intrinsics, fps: f64, z_max_m: f64, mirror_fov_deg: f64) -> Self {
        Self {
            width: k.width,
            height: k.height,
            fps,
            z_max_m,
            fx_px: k.fx,
            fy_px: k.fy,
            cx_px: k.cx,
            cy_px: k.cy,
            mirror_fov_deg,
        }
    }

    pub fn mirror_fov(&self) -> f64 {
        self.mirror_fov_deg.to_radians()
    }

    fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("zero image dimension".into());
        }
        if !(self.fps > 0.0) {
            return Err(format!("fps must be > 0, got {}", self.fps));
        }
        if !(self.z_max_m > 0.0 && self.z_max_m <= MAX_ENCODABLE_DEPTH_M) {
            return Err(format!(
                "z_max_m must lie in (0, {MAX_ENCODABLE_DEPTH_M}], got {}",
                self.z_max_m
            ));
        }
        if !(self.fx_px > 0.0 && self.fy_px > 0.0) {
            return Err("focal lengths must be > 0".into());
        }
        if !(self.mirror_fov_deg > 0.0 && self.mirror_fov_deg <= 180.0) {
            return Err(format!("mirror_fov_deg out of range: {}", self.mirror_fov_deg));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneFrame {
    pub rgb: RgbImage,
    /// Meters; `0.0` is invalid.
    pub depth: DepthMap,
    pub intrinsics: Intrinsics,
    pub frame_index: u32,
    pub timestamp: f64,
}

impl SceneFrame {
    pub fn valid_depth_count(&self) -> usize {
        self.depth.data().iter().filter(|&&d| d > 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSequence {
    pub meta: SceneMeta,
    pub frames: Vec<SceneFrame>,
}

impl SceneSequence {
    pub fn intrinsics(&self) -> Intrinsics {
        self.meta.intrinsics()
    }
}

/// Millimeter quantization used by the depth PGMs.
pub fn depth_to_mm(depth: f64) -> Option<u16> {
    if !(depth >= 0.0) || depth > MAX_ENCODABLE_DEPTH_M + 0.0005 {
        return None;
    }
    Some((depth * 1000.0).round() as u16)
}

pub fn mm_to_depth(mm: u16) -> f64 {
    f64::from(mm) / 1000.0
}

/// Rounds every depth to the nearest millimeter.
pub fn quantize_depth(depth: f64) -> f64 {
    (depth * 1000.0).round() / 1000.0
}

pub fn encode_depth(depth: &DepthMap, path: &Path) -> Result<Grid<u16>, SceneError> {
    let mut out = Grid::new(depth.width(), depth.height(), 0u16);
    for (o, &d) in out.data_mut().iter_mut().zip(depth.data()) {
        *o = depth_to_mm(d).ok_or_else(|| SceneError::DepthNotEncodable {
            path: path.to_owned(),
            depth: d,
        })?;
    }
    Ok(out)
}

pub fn write_depth_pgm(path: &Path, depth: &DepthMap) -> Result<(), SceneError> {
    let mm = encode_depth(depth, path)?;
    pnm::write_pgm16(path, &mm).map_err(|e| pnm_error(path, e))
}

pub fn read_depth_pgm(path: &Path) -> Result<DepthMap, SceneError> {
    let mm = pnm::read_pgm16(path).map_err(|e| pnm_error(path, e))?;
    Ok(mm.map(|&v| mm_to_depth(v)))
}

pub fn read_rgb_ppm(path: &Path) -> Result<RgbImage, SceneError> {
    pnm::read_ppm(path).map_err(|e| pnm_error(path, e))
}

pub fn write_rgb_ppm(path: &Path, rgb: &RgbImage) -> Result<(), SceneError> {
    pnm::write_ppm(path, rgb).map_err(|e| pnm_error(path, e))
}

pub fn frame_stem(index: u32) -> String {
    format!("{index:04}")
}

fn read_meta(dir: &Path) -> Result<SceneMeta, SceneError> {
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path).map_err(io_error(&path))?;
    let meta: SceneMeta = serde_json::from_str(&text).map_err(|e| SceneError::InvalidMeta {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    meta.validate()
        .map_err(|reason| SceneError::InvalidMeta { path, reason })?;
    Ok(meta)
}

/// Loads a scene directory. Frames are ordered by index, depth is converted
/// to meters and values beyond `z_max_m` are marked invalid.
pub fn load_scene(dir: &Path) -> Result<SceneSequence, SceneError> {
    let meta = read_meta(dir)?;
    let intrinsics = meta.intrinsics();

    #[derive(Default)]
    struct Pair {
        ppm: Option<PathBuf>,
        pgm: Option<PathBuf>,
    }
    let mut pairs: BTreeMap<u32, Pair> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io_error(dir))? {
        let path = entry.map_err(io_error(dir))?.path();
        let (Some(stem), Some(ext)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        if stem.len() < 4 || !stem.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let Ok(index) = stem.parse::<u32>() else {
            continue;
        };
        match ext {
            "ppm" => pairs.entry(index).or_default().ppm = Some(path),
            "pgm" => pairs.entry(index).or_default().pgm = Some(path),
            _ => {}
        }
    }
    if pairs.is_empty() {
        return Err(SceneError::NoFrames);
    }

    let expected = (meta.width, meta.height);
    let mut frames = Vec::with_capacity(pairs.len());
    for (index, pair) in pairs {
        let (ppm, pgm) = match (pair.ppm, pair.pgm) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => {
                return Err(SceneError::MissingPair {
                    path: a,
                    missing: "depth .pgm",
                })
            }
            (None, Some(b)) => {
                return Err(SceneError::MissingPair {
                    path: b,
                    missing: "color .ppm",
                })
            }
            (None, None) => unreachable!(),
        };
        let rgb = read_rgb_ppm(&ppm)?;
        if rgb.dims() != expected {
            return Err(SceneError::DimensionMismatch {
                path: ppm,
                expected,
                found: rgb.dims(),
            });
        }
        let mut depth = read_depth_pgm(&pgm)?;
        if depth.dims() != expected {
            return Err(SceneError::DimensionMismatch {
                path: pgm,
                expected,
                found: depth.dims(),
            });
        }
        for d in depth.data_mut() {
            if *d > meta.z_max_m {
                *d = 0.0;
            }
        }
        frames.push(SceneFrame {
            rgb,
            depth,
            intrinsics,
            frame_index: index,
            timestamp: f64::from(index) / meta.fps,
        });
    }
    Ok(SceneSequence { meta, frames })
}

pub fn write_meta(dir: &Path, meta: &SceneMeta) -> Result<(), SceneError> {
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(meta).expect("meta serializes");
    fs::write(&path, text + "\n").map_err(io_error(&path))
}

/// Writes a scene directory readable by [`load_scene`].
pub fn save_scene(seq: &SceneSequence, dir: &Path) -> Result<(), SceneError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    write_meta(dir, &seq.meta)?;
    for frame in &seq.frames {
        let stem = frame_stem(frame.frame_index);
        write_rgb_ppm(&dir.join(format!("{stem}.ppm")), &frame.rgb)?;
        write_depth_pgm(&dir.join(format!("{stem}.pgm")), &frame.depth)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(w: usize, h: usize) -> SceneMeta {
        let k = Intrinsics::from_hfov(w, h, 25f64.to_radians());
        SceneMeta::from_intrinsics(&k, 30.0, 3.0, 25.0)
    }

    fn write_frame(dir: &Path, index: u32, rgb: &RgbImage, mm: &Grid<u16>) {
        let stem = frame_stem(index);
        pnm::write_ppm(&dir.join(format!("{stem}.ppm")), rgb).unwrap();
        pnm::write_pgm16(&dir.join(format!("{stem}.pgm")), mm).unwrap();
    }

    #[test]
    fn zero_depth_frame_and_unit_conversion() {
        let dir = tempfile::tempdir().unwrap();
        write_meta(dir.path(), &meta(4, 3)).unwrap();
        let rgb = Grid::new(4, 3, [9u8, 9, 9]);
        write_frame(dir.path(), 0, &rgb, &Grid::new(4, 3, 0));
        let mut mm = Grid::new(4, 3, 0u16);
        mm.set(1, 1, 1500);
        mm.set(2, 2, 4000); // beyond z_max
        write_frame(dir.path(), 1, &rgb, &mm);
        let seq = load_scene(dir.path()).unwrap();
        assert_eq!(seq.frames.len(), 2);
        assert_eq!(seq.frames[0].valid_depth_count(), 0);
        assert_eq!(*seq.frames[1].depth.get(1, 1), 1.5);
        assert_eq!(*seq.frames[1].depth.get(2, 2), 0.0);
        assert!(seq.frames[1].timestamp > seq.frames[0].timestamp);
    }

    #[test]
    fn dimension_mismatch_names_file() {
        let dir = tempfile::tempdir().unwrap();
        write_meta(dir.path(), &meta(640, 480)).unwrap();
        write_frame(
            dir.path(),
            0,
            &Grid::new(640, 480, [0u8; 3]),
            &Grid::new(320, 240, 0),
        );
        match load_scene(dir.path()) {
            Err(SceneError::DimensionMismatch { path, found, .. }) => {
                assert!(path.ends_with("0000.pgm"));
                assert_eq!(found, (320, 240));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_pair_and_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        write_meta(dir.path(), &meta(2, 2)).unwrap();
        pnm::write_ppm(&dir.path().join("0003.ppm"), &Grid::new(2, 2, [0u8; 3])).unwrap();
        assert!(matches!(
            load_scene(dir.path()),
            Err(SceneError::MissingPair { path, .. }) if path.ends_with("0003.ppm")
        ));
        fs::write(dir.path().join("0003.pgm"), b"P5\n2 x\n").unwrap();
        assert!(matches!(
            load_scene(dir.path()),
            Err(SceneError::MalformedHeader { path, .. }) if path.ends_with("0003.pgm")
        ));
    }

    #[test]
    fn depth_encoding_limits() {
        assert_eq!(depth_to_mm(1.5), Some(1500));
        assert_eq!(depth_to_mm(65.535), Some(65535));
        assert_eq!(depth_to_mm(70.0), None);
        assert_eq!(depth_to_mm(-1.0), None);
        assert_eq!(mm_to_depth(1500), 1.5);
    }
}
