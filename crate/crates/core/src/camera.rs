//! Pinhole intrinsics shared by the camera and the co-located MEMS scanner.
//!
//! Pixel `(x, y)` covers `[x, x+1) × [y, y+1)` in image coordinates, so its
//! center sits at `x + 0.5`. Scan directions use the separable tangent map
//! `x = cx + fx·tan(θ)`, `y = cy + fy·tan(φ)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Square pixels, principal point at the image center, horizontal apex FOV.
    pub fn from_hfov(width: usize, height: usize, hfov_rad: f64) -> Self {
        let fx = (width as f64 / 2.0) / (hfov_rad / 2.0).tan();
        Self {
            width,
            height,
            fx,
            fy: fx,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Scan angles through the center of pixel `(x, y)`.
    pub fn pixel_to_angles(&self, x: usize, y: usize) -> (f64, f64) {
        (
            self.column_edge_angle(x as f64 + 0.5),
            self.row_edge_angle(y as f64 + 0.5),
        )
    }

    /// Azimuth of the vertical image line at (possibly fractional) column `x`.
    pub fn column_edge_angle(&self, x: f64) -> f64 {
        ((x - self.cx) / self.fx).atan()
    }

    /// Elevation of the horizontal image line at row `y`.
    pub fn row_edge_angle(&self, y: f64) -> f64 {
        ((y - self.cy) / self.fy).atan()
    }

    /// Continuous image coordinates hit by a scan direction.
    pub fn angles_to_image(&self, theta: f64, phi: f64) -> (f64, f64) {
        (self.cx + self.fx * theta.tan(), self.cy + self.fy * phi.tan())
    }

    /// Pixel containing the scan direction, or `None` when it leaves the image.
    pub fn angles_to_pixel(&self, theta: f64, phi: f64) -> Option<(usize, usize)> {
        let (x, y) = self.angles_to_image(theta, phi);
        let (xf, yf) = (x.floor(), y.floor());
        if xf < 0.0 || yf < 0.0 || xf >= self.width as f64 || yf >= self.height as f64 {
            return None;
        }
        Some((xf as usize, yf as usize))
    }

    /// Horizontal and vertical apex FOV of the full image.
    pub fn fov(&self) -> (f64, f64) {
        (
            self.column_edge_angle(self.width as f64) - self.column_edge_angle(0.0),
            self.row_edge_angle(self.height as f64) - self.row_edge_angle(0.0),
        )
    }

    /// Camera-frame point at z-depth `depth` along the pixel-center ray.
    pub fn backproject(&self, x: usize, y: usize, depth: f64) -> [f64; 3] {
        let (theta, phi) = self.pixel_to_angles(x, y);
        backproject_angles(theta, phi, depth)
    }
}

/// Camera-frame point at z-depth `depth` along the scan direction `(θ, φ)`.
pub fn backproject_angles(theta: f64, phi: f64, depth: f64) -> [f64; 3] {
    [depth * theta.tan(), depth * phi.tan(), depth]
}
