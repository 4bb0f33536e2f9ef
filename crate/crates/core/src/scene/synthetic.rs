//! Ray-cast renderer for simple fronto-parallel scenes with linear motion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{quantize_depth, SceneError, SceneFrame, SceneMeta, SceneSequence};
use crate::camera::Intrinsics;
use crate::image::Grid;

/// Geometry in camera coordinates (x right, y down, z forward), meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    /// Infinite fronto-parallel plane at depth `z`.
    Plane { z: f64 },
    /// Fronto-parallel rectangle at depth `z`.
    Quad { center: [f64; 2], size: [f64; 2], z: f64 },
    /// Axis-aligned box.
    Box { min: [f64; 3], max: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Texture {
    Flat {
        color: [u8; 3],
    },
    Checker {
        a: [u8; 3],
        b: [u8; 3],
        cell_m: f64,
    },
    /// Per-texel uniform noise of ±`amplitude` gray levels around `base`.
    Noise {
        base: [u8; 3],
        amplitude: u8,
        cell_m: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub texture: Texture,
    /// Linear motion in m/s.
    #[serde(default)]
    pub velocity: [f64; 3],
}

impl Primitive {
    pub fn new(shape: Shape, texture: Texture) -> Self {
        Self {
            shape,
            texture,
            velocity: [0.0; 3],
        }
    }

    pub fn moving(mut self, velocity: [f64; 3]) -> Self {
        self.velocity = velocity;
        self
    }
}

fn default_fov() -> f64 {
    25.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// Horizontal camera apex FOV, degrees.
    #[serde(default = "default_fov")]
    pub hfov_deg: f64,
    #[serde(default = "default_fov")]
    pub mirror_fov_deg: f64,
    pub fps: f64,
    pub frames: u32,
    pub z_max_m: f64,
    pub background: [u8; 3],
    pub primitives: Vec<Primitive>,
}

impl SyntheticSpec {
    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics::from_hfov(self.width, self.height, self.hfov_deg.to_radians())
    }
}

const NOISE_TEXELS: usize = 64;

/// Texture with any random tables it needs already drawn.
struct Material {
    texture: Texture,
    noise: Vec<i16>,
}

impl Material {
    fn new(texture: &Texture, seed: u64, index: usize) -> Self {
        let noise = match texture {
            Texture::Noise { amplitude, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let amp = i16::from(*amplitude);
                (0..NOISE_TEXELS * NOISE_TEXELS)
                    .map(|_| rng.random_range(-amp..=amp))
                    .collect()
            }
            _ => Vec::new(),
        };
        Self {
            texture: texture.clone(),
            noise,
        }
    }

    fn shade(&self, u: f64, v: f64) -> [u8; 3] {
        match &self.texture {
            Texture::Flat { color } => *color,
            Texture::Checker { a, b, cell_m } => {
                let parity = ((u / cell_m).floor() as i64 + (v / cell_m).floor() as i64).rem_euclid(2);
                if parity == 0 {
                    *a
                } else {
                    *b
                }
            }
            Texture::Noise { base, cell_m, .. } => {
                let iu = ((u / cell_m).floor() as i64).rem_euclid(NOISE_TEXELS as i64) as usize;
                let iv = ((v / cell_m).floor() as i64).rem_euclid(NOISE_TEXELS as i64) as usize;
                let offset = self.noise[iv * NOISE_TEXELS + iu];
                base.map(|c| (i16::from(c) + offset).clamp(0, 255) as u8)
            }
        }
    }
}

/// Depth and surface coordinates where the ray `(dx, dy, 1)` first hits `shape`.
fn intersect(shape: &Shape, offset: [f64; 3], dx: f64, dy: f64) -> Option<(f64, f64, f64)> {
    match shape {
        Shape::Plane { z } => {
            let z = z + offset[2];
            (z > 0.0).then(|| (z, dx * z - offset[0], dy * z - offset[1]))
        }
        Shape::Quad { center, size, z } => {
            let z = z + offset[2];
            if z <= 0.0 {
                return None;
            }
            let x0 = center[0] + offset[0] - size[0] / 2.0;
            let y0 = center[1] + offset[1] - size[1] / 2.0;
            let (px, py) = (dx * z, dy * z);
            let (u, v) = (px - x0, py - y0);
            (u >= 0.0 && u < size[0] && v >= 0.0 && v < size[1]).then_some((z, u, v))
        }
        Shape::Box { min, max } => {
            let dir = [dx, dy, 1.0];
            let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
            let mut near_axis = 2;
            for axis in 0..3 {
                let lo = min[axis] + offset[axis];
                let hi = max[axis] + offset[axis];
                if dir[axis] == 0.0 {
                    if 0.0 < lo || 0.0 >= hi {
                        return None;
                    }
                    continue;
                }
                let (mut t0, mut t1) = (lo / dir[axis], hi / dir[axis]);
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                if t0 > t_near {
                    t_near = t0;
                    near_axis = axis;
                }
                t_far = t_far.min(t1);
            }
            if t_near > t_far || t_near <= 0.0 {
                return None;
            }
            let p = [dx * t_near, dy * t_near, t_near];
            let local = |a: usize| p[a] - (min[a] + offset[a]);
            let (u, v) = match near_axis {
                0 => (local(2), local(1)),
                1 => (local(0), local(2)),
                _ => (local(0), local(1)),
            };
            Some((t_near, u, v))
        }
    }
}

fn render_frame(
    spec: &SyntheticSpec,
    materials: &[Material],
    k: &Intrinsics,
    index: u32,
) -> SceneFrame {
    let t = f64::from(index) / spec.fps;
    let offsets: Vec<[f64; 3]> = spec
        .primitives
        .iter()
        .map(|p| p.velocity.map(|v| v * t))
        .collect();
    let mut rgb = Grid::new(spec.width, spec.height, spec.background);
    let mut depth = Grid::new(spec.width, spec.height, 0.0);
    for y in 0..spec.height {
        let dy = (y as f64 + 0.5 - k.cy) / k.fy;
        for x in 0..spec.width {
            let dx = (x as f64 + 0.5 - k.cx) / k.fx;
            let mut best: Option<(f64, usize, f64, f64)> = None;
            for (i, prim) in spec.primitives.iter().enumerate() {
                if let Some((z, u, v)) = intersect(&prim.shape, offsets[i], dx, dy) {
                    if best.is_none_or(|b| z < b.0) {
                        best = Some((z, i, u, v));
                    }
                }
            }
            if let Some((z, i, u, v)) = best {
                rgb.set(x, y, materials[i].shade(u, v));
                let zq = quantize_depth(z);
                if zq > 0.0 && zq <= spec.z_max_m {
                    depth.set(x, y, zq);
                }
            }
        }
    }
    SceneFrame {
        rgb,
        depth,
        intrinsics: *k,
        frame_index: index,
        timestamp: t,
    }
}

/// Renders every frame of `spec`. Depths are quantized to whole millimeters
/// so a save/load cycle is lossless; depths past `z_max_m` are invalid.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SceneSequence, SceneError> {
    let k = spec.intrinsics();
    let meta = SceneMeta::from_intrinsics(&k, spec.fps, spec.z_max_m, spec.mirror_fov_deg);
    meta.validate().map_err(|reason| SceneError::InvalidMeta {
        path: "<synthetic spec>".into(),
        reason,
    })?;
    let materials: Vec<Material> = spec
        .primitives
        .iter()
        .enumerate()
        .map(|(i, p)| Material::new(&p.texture, seed, i))
        .collect();
    let frames: Vec<SceneFrame> = (0..spec.frames)
        .into_par_iter()
        .map(|i| render_frame(spec, &materials, &k, i))
        .collect();
    if frames.iter().all(|f| f.valid_depth_count() == 0) {
        return Err(SceneError::EmptyScene);
    }
    Ok(SceneSequence { meta, frames })
}
