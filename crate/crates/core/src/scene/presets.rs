//! Ready-made synthetic scenes used by the CLI, tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::synthetic::{Primitive, Shape, SyntheticSpec, Texture};

fn base(width: usize, height: usize, frames: u32, primitives: Vec<Primitive>) -> SyntheticSpec {
    SyntheticSpec {
        width,
        height,
        hfov_deg: 25.0,
        mirror_fov_deg: 25.0,
        fps: 30.0,
        frames,
        z_max_m: 3.0,
        background: [0, 0, 0],
        primitives,
    }
}

fn noise(base: u8, amplitude: u8, cell_m: f64) -> Texture {
    Texture::Noise {
        base: [base; 3],
        amplitude,
        cell_m,
    }
}

/// Single textured fronto-parallel plane filling the view.
pub fn fronto_plane(width: usize, height: usize, z: f64) -> SyntheticSpec {
    base(
        width,
        height,
        1,
        vec![Primitive::new(Shape::Plane { z }, noise(128, 40, 0.01))],
    )
}

/// Near strip at 0.5 m in front of a 3 m wall.
pub fn two_planes(width: usize, height: usize) -> SyntheticSpec {
    base(
        width,
        height,
        1,
        vec![
            Primitive::new(Shape::Plane { z: 3.0 }, noise(90, 30, 0.02)),
            Primitive::new(
                Shape::Quad {
                    center: [-0.05, 0.0],
                    size: [0.1, 1.0],
                    z: 0.5,
                },
                Texture::Flat { color: [220, 40, 40] },
            ),
        ],
    )
}

/// Parameters of [`moving_box`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingBox {
    pub width: usize,
    pub height: usize,
    pub frames: u32,
    /// Side of the square target, in pixels at its depth.
    pub box_px: f64,
    /// Horizontal motion, pixels per frame.
    pub speed_px: f64,
    /// Frame at which the target's right edge reaches the left image border.
    pub enter_frame: u32,
    pub box_depth: f64,
    pub wall_depth: f64,
}

impl Default for MovingBox {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            frames: 32,
            box_px: 64.0,
            speed_px: 12.0,
            enter_frame: 5,
            box_depth: 1.5,
            wall_depth: 2.5,
        }
    }
}

impl MovingBox {
    /// Left edge of the target in image columns at frame `k`.
    pub fn left_edge_px(&self, k: u32) -> f64 {
        (f64::from(k) - f64::from(self.enter_frame)) * self.speed_px - self.box_px
    }

    pub fn spec(&self) -> SyntheticSpec {
        let mut spec = base(self.width, self.height, self.frames, Vec::new());
        let k = spec.intrinsics();
        let z = self.box_depth;
        let size = self.box_px * z / k.fx;
        // image column → camera x at depth z
        let x_at = |col: f64| (col - k.cx) * z / k.fx;
        let left0 = x_at(self.left_edge_px(0));
        let velocity = self.speed_px * z / k.fx * spec.fps;
        spec.primitives = vec![
            Primitive::new(Shape::Plane { z: self.wall_depth }, noise(40, 12, 0.01)),
            Primitive::new(
                Shape::Quad {
                    center: [left0 + size / 2.0, 0.0],
                    size: [size, size],
                    z,
                },
                Texture::Flat { color: [110, 110, 110] },
            )
            .moving([velocity, 0.0, 0.0]),
        ];
        spec
    }
}

pub fn moving_box() -> SyntheticSpec {
    MovingBox::default().spec()
}

fn random_texture(rng: &mut ChaCha8Rng) -> Texture {
    let shade = |rng: &mut ChaCha8Rng| [rng.random(), rng.random(), rng.random()];
    if rng.random_bool(0.5) {
        Texture::Checker {
            a: shade(rng),
            b: shade(rng),
            cell_m: rng.random_range(0.01..0.05),
        }
    } else {
        Texture::Noise {
            base: shade(rng),
            amplitude: rng.random_range(20..70),
            cell_m: rng.random_range(0.003..0.02),
        }
    }
}

/// Textured wall with a handful of boxes and quads scattered through the view.
pub fn cluttered(width: usize, height: usize, seed: u64) -> SyntheticSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wall = rng.random_range(2.4..2.9);
    let mut prims = vec![Primitive::new(Shape::Plane { z: wall }, random_texture(&mut rng))];
    let half_w = (12.5f64).to_radians().tan();
    let half_h = half_w * height as f64 / width as f64;
    for _ in 0..rng.random_range(3..7) {
        let z = rng.random_range(0.6..wall - 0.2);
        let cx = rng.random_range(-0.8..0.8) * half_w * z;
        let cy = rng.random_range(-0.8..0.8) * half_h * z;
        let sx = rng.random_range(0.15..0.45) * half_w * z;
        let sy = rng.random_range(0.15..0.45) * half_h * z;
        let shape = if rng.random_bool(0.5) {
            Shape::Box {
                min: [cx - sx, cy - sy, z],
                max: [cx + sx, cy + sy, z + rng.random_range(0.05..0.3)],
            }
        } else {
            Shape::Quad {
                center: [cx, cy],
                size: [2.0 * sx, 2.0 * sy],
                z,
            }
        };
        prims.push(Primitive::new(shape, random_texture(&mut rng)));
    }
    base(width, height, 1, prims)
}

/// Flat, untextured wall with textured clutter confined to one randomly
/// chosen quarter of the image. The quarter is returned as pixel bounds
/// `(x0, y0, x1, y1)`.
pub fn textured_quadrant(width: usize, height: usize, seed: u64) -> (SyntheticSpec, [usize; 4]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wall = 2.6;
    let mut spec = base(
        width,
        height,
        1,
        vec![Primitive::new(
            Shape::Plane { z: wall },
            Texture::Flat { color: [90, 100, 110] },
        )],
    );
    let k = spec.intrinsics();
    let (qw, qh) = (width / 2, height / 2);
    let qx = rng.random_range(0..=width - qw);
    let qy = rng.random_range(0..=height - qh);
    // camera x/y at depth z for an image coordinate
    let to_x = |col: f64, z: f64| (col - k.cx) * z / k.fx;
    let to_y = |row: f64, z: f64| (row - k.cy) * z / k.fy;
    for _ in 0..rng.random_range(4..8) {
        let z = rng.random_range(0.8..2.2);
        let w = rng.random_range(0.2..0.5) * qw as f64;
        let h = rng.random_range(0.2..0.5) * qh as f64;
        let x0 = qx as f64 + rng.random_range(0.0..qw as f64 - w);
        let y0 = qy as f64 + rng.random_range(0.0..qh as f64 - h);
        spec.primitives.push(Primitive::new(
            Shape::Quad {
                center: [to_x(x0 + w / 2.0, z), to_y(y0 + h / 2.0, z)],
                size: [w * z / k.fx, h * z / k.fy],
                z,
            },
            random_texture(&mut rng),
        ));
    }
    (spec, [qx, qy, qx + qw, qy + qh])
}
