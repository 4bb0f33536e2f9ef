//! Closed-form transmitter/receiver design-space model.
//!
//! All angles are cone apex angles in radians. Solid angles only appear in
//! [`acuity_gain`], via [`apex_to_solid_angle`]. Lengths are SI meters.
//!
//! Received radiance is a normalized area–solid-angle proxy in 1/m for a
//! white Lambertian fronto-parallel plane, not a power in watts.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("invalid {param}: {value} ({reason})")]
    InvalidParameter {
        param: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("range Z = {z} m equals the focal length; the in-focus image distance is unbounded")]
    DegenerateFocus { z: f64 },
    #[error("range Z = {z} m is inside the focal length {f} m; no real image forms")]
    RangeInsideFocus { z: f64, f: f64 },
    #[error("kernel angle is exactly zero at Z = {z} m (detector sits on the in-focus plane)")]
    ZeroKernel { z: f64 },
    #[error("operation requires an under-focused single detector (u < f)")]
    InvalidVariant,
    #[error("{param} = {value} lies outside the sweep bounds [{min}, {max}]")]
    OutOfBounds {
        param: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
}

fn positive(param: &'static str, value: f64) -> Result<f64, OpticsError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(OpticsError::InvalidParameter {
            param,
            value,
            reason: "must be finite and > 0",
        })
    }
}

/// Solid angle in steradians of a cone with the given apex angle.
pub fn apex_to_solid_angle(apex: f64) -> f64 {
    2.0 * PI * (1.0 - (apex / 2.0).cos())
}

/// Apex angle of the cone subtending `solid` steradians.
pub fn solid_angle_to_apex(solid: f64) -> f64 {
    2.0 * (1.0 - solid / (2.0 * PI)).acos()
}

/// Laser + MEMS mirror.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmitterSpec {
    beam_quality: f64,
    waist_radius: f64,
    wavelength: f64,
    mirror_fov: f64,
}

impl TransmitterSpec {
    pub fn new(
        beam_quality: f64,
        waist_radius: f64,
        wavelength: f64,
        mirror_fov: f64,
    ) -> Result<Self, OpticsError> {
        if !(beam_quality.is_finite() && beam_quality >= 1.0) {
            return Err(OpticsError::InvalidParameter {
                param: "beam_quality",
                value: beam_quality,
                reason: "must be >= 1 (diffraction limit)",
            });
        }
        positive("waist_radius", waist_radius)?;
        positive("wavelength", wavelength)?;
        if !(mirror_fov > 0.0 && mirror_fov <= PI) {
            return Err(OpticsError::InvalidParameter {
                param: "mirror_fov",
                value: mirror_fov,
                reason: "must lie in (0, pi]",
            });
        }
        Ok(Self {
            beam_quality,
            waist_radius,
            wavelength,
            mirror_fov,
        })
    }

    pub fn beam_quality(&self) -> f64 {
        self.beam_quality
    }

    pub fn waist_radius(&self) -> f64 {
        self.waist_radius
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn mirror_fov(&self) -> f64 {
        self.mirror_fov
    }

    /// A divergence cone of π or wider has no forward-facing apex.
    pub fn divergence_is_physical(&self) -> bool {
        beam_divergence(self) < PI
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    Retroreflective,
    ReceiverArray,
    SingleDetector,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 3] = [
        ReceiverKind::Retroreflective,
        ReceiverKind::ReceiverArray,
        ReceiverKind::SingleDetector,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ReceiverKind::Retroreflective => "retroreflective",
            ReceiverKind::ReceiverArray => "receiver_array",
            ReceiverKind::SingleDetector => "single_detector",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Receiver optics `{n, A, u, f}` plus the design family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverSpec {
    kind: ReceiverKind,
    detector_count: u32,
    aperture: f64,
    image_distance: f64,
    focal_length: f64,
}

impl ReceiverSpec {
    /// Builds any receiver. Retroreflective and single-detector designs force
    /// `n = 1`; the retroreflective aperture is the transmitter waist and is
    /// overridden in [`characterize`].
    pub fn new(
        kind: ReceiverKind,
        detector_count: u32,
        aperture: f64,
        image_distance: f64,
        focal_length: f64,
    ) -> Result<Self, OpticsError> {
        if detector_count == 0 {
            return Err(OpticsError::InvalidParameter {
                param: "detector_count",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        positive("aperture", aperture)?;
        positive("image_distance", image_distance)?;
        positive("focal_length", focal_length)?;
        let detector_count = match kind {
            ReceiverKind::ReceiverArray => detector_count,
            _ => 1,
        };
        Ok(Self {
            kind,
            detector_count,
            aperture,
            image_distance,
            focal_length,
        })
    }

    /// The MEMS mirror doubles as the receive aperture.
    pub fn retroreflective(
        tx: &TransmitterSpec,
        image_distance: f64,
        focal_length: f64,
    ) -> Result<Self, OpticsError> {
        Self::new(
            ReceiverKind::Retroreflective,
            1,
            tx.waist_radius,
            image_distance,
            focal_length,
        )
    }

    pub fn receiver_array(
        detector_count: u32,
        aperture: f64,
        image_distance: f64,
        focal_length: f64,
    ) -> Result<Self, OpticsError> {
        Self::new(
            ReceiverKind::ReceiverArray,
            detector_count,
            aperture,
            image_distance,
            focal_length,
        )
    }

    pub fn single_detector(
        aperture: f64,
        image_distance: f64,
        focal_length: f64,
    ) -> Result<Self, OpticsError> {
        Self::new(
            ReceiverKind::SingleDetector,
            1,
            aperture,
            image_distance,
            focal_length,
        )
    }

    pub fn kind(&self) -> ReceiverKind {
        self.kind
    }

    pub fn detector_count(&self) -> u32 {
        self.detector_count
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn image_distance(&self) -> f64 {
        self.image_distance
    }

    pub fn focal_length(&self) -> f64 {
        self.focal_length
    }

    /// Single detector placed inside the focal length.
    pub fn is_underfocused(&self) -> bool {
        self.kind == ReceiverKind::SingleDetector && self.image_distance < self.focal_length
    }

    /// Aperture actually used by the model for a given transmitter.
    pub fn effective_aperture(&self, tx: &TransmitterSpec) -> f64 {
        match self.kind {
            ReceiverKind::Retroreflective => tx.waist_radius,
            _ => self.aperture,
        }
    }
}

/// Co-located guide camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    fov: f64,
    pixel_count: usize,
}

impl CameraSpec {
    pub fn new(fov: f64, pixel_count: usize) -> Result<Self, OpticsError> {
        if !(fov > 0.0 && fov <= 2.0 * PI) {
            return Err(OpticsError::InvalidParameter {
                param: "camera_fov",
                value: fov,
                reason: "must lie in (0, 2pi]",
            });
        }
        if pixel_count == 0 {
            return Err(OpticsError::InvalidParameter {
                param: "pixel_count",
                value: 0.0,
                reason: "must be > 0",
            });
        }
        Ok(Self { fov, pixel_count })
    }

    pub fn fov(&self) -> f64 {
        self.fov
    }

    pub fn pixel_count(&self) -> usize {
        self.pixel_count
    }

    /// Average solid angle seen by one pixel, in steradians.
    pub fn pixel_support(&self) -> f64 {
        apex_to_solid_angle(self.fov) / self.pixel_count as f64
    }
}

/// Far-field beam divergence `M²λ / (w₀π)` as an apex angle.
pub fn beam_divergence(tx: &TransmitterSpec) -> f64 {
    tx.beam_quality * tx.beam_quality * tx.wavelength / (tx.waist_radius * PI)
}

/// How many camera pixels one laser dot spans.
pub fn acuity_gain(tx: &TransmitterSpec, cam: &CameraSpec) -> f64 {
    acuity_gain_from_solid_angle(apex_to_solid_angle(beam_divergence(tx)), cam)
}

pub fn acuity_gain_from_solid_angle(laser_solid_angle: f64, cam: &CameraSpec) -> f64 {
    laser_solid_angle / cam.pixel_support()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignFlag {
    Ok,
    NonPhysicalDivergence,
    DegenerateFocus,
    RangeInsideFocus,
    ZeroKernel,
}

impl DesignFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            DesignFlag::Ok => "ok",
            DesignFlag::NonPhysicalDivergence => "nonphysical_divergence",
            DesignFlag::DegenerateFocus => "degenerate_focus",
            DesignFlag::RangeInsideFocus => "range_inside_focus",
            DesignFlag::ZeroKernel => "zero_kernel",
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            DesignFlag::DegenerateFocus | DesignFlag::RangeInsideFocus | DesignFlag::ZeroKernel
        )
    }
}

/// `{Ω, s, V}` at range `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignCharacterization {
    /// Apex angle of the sensitivity cone, radians.
    pub fov: f64,
    /// Normalized received radiance, 1/m.
    pub received_radiance: f64,
    /// Baffle volume, m³.
    pub volume: f64,
    pub range: f64,
    pub flag: DesignFlag,
}

/// Baffle volume: a cone for retroreflective and single-detector designs,
/// a cuboid for arrays.
pub fn receiver_volume(tx: &TransmitterSpec, rx: &ReceiverSpec) -> f64 {
    let a = rx.effective_aperture(tx);
    let u = rx.image_distance;
    match rx.kind {
        ReceiverKind::ReceiverArray => u * a * a,
        ReceiverKind::Retroreflective | ReceiverKind::SingleDetector => PI * u * a * a / 12.0,
    }
}

/// `atan` argument of the single-detector kernel angle,
/// `A(Z−f)·|(Zu − fu − fZ)/(Z−f)| / (2ufZ)`.
fn kernel_argument(rx: &ReceiverSpec, z: f64) -> f64 {
    let (a, u, f) = (rx.aperture, rx.image_distance, rx.focal_length);
    a * (z - f) * ((z * u - f * u - f * z) / (z - f)).abs() / (2.0 * u * f * z)
}

/// Laser fall-off `1 / (2Z tan(ω/2))`; zero once the cone is non-physical.
fn falloff(divergence: f64, z: f64) -> f64 {
    if divergence >= PI {
        0.0
    } else {
        1.0 / (2.0 * z * (divergence / 2.0).tan())
    }
}

/// Evaluates the closed-form receiver model.
///
/// Singular geometries are errors here; use [`characterize_or_sentinel`]
/// to get a flagged row instead.
pub fn characterize(
    tx: &TransmitterSpec,
    rx: &ReceiverSpec,
    z: f64,
) -> Result<DesignCharacterization, OpticsError> {
    positive("range", z)?;
    let divergence = beam_divergence(tx);
    let flag = if divergence >= PI {
        DesignFlag::NonPhysicalDivergence
    } else {
        DesignFlag::Ok
    };
    let volume = receiver_volume(tx, rx);
    let (fov, received_radiance) = match rx.kind {
        ReceiverKind::Retroreflective => {
            // received angle can never exceed the transmitted one
            let received = (2.0 * (tx.waist_radius / (2.0 * z)).atan()).min(divergence);
            (tx.mirror_fov, received / divergence * falloff(divergence, z))
        }
        ReceiverKind::ReceiverArray => {
            let fov = (2.0 * (rx.aperture / (2.0 * rx.image_distance)).atan()).min(tx.mirror_fov);
            (fov, falloff(divergence, z))
        }
        ReceiverKind::SingleDetector => {
            let f = rx.focal_length;
            if z == f {
                return Err(OpticsError::DegenerateFocus { z });
            }
            if z < f {
                return Err(OpticsError::RangeInsideFocus { z, f });
            }
            let arg = kernel_argument(rx, z);
            if arg == 0.0 {
                return Err(OpticsError::ZeroKernel { z });
            }
            let half_kernel = arg.atan();
            let fov = (2.0 * half_kernel).min(tx.mirror_fov);
            let s = if divergence >= PI {
                0.0
            } else {
                1.0 / (4.0 * z * half_kernel * (divergence / 2.0).tan())
            };
            (fov, s)
        }
    };
    Ok(DesignCharacterization {
        fov,
        received_radiance,
        volume,
        range: z,
        flag,
    })
}

/// Like [`characterize`], but singular geometries come back as flagged rows:
/// a zero kernel reports `Ω = 0, s = +∞`; an unbounded or virtual focus
/// reports `Ω = s = −∞`. Invalid parameters still error.
pub fn characterize_or_sentinel(
    tx: &TransmitterSpec,
    rx: &ReceiverSpec,
    z: f64,
) -> Result<DesignCharacterization, OpticsError> {
    let sentinel = |fov, received_radiance, flag| DesignCharacterization {
        fov,
        received_radiance,
        volume: receiver_volume(tx, rx),
        range: z,
        flag,
    };
    match characterize(tx, rx, z) {
        Ok(c) => Ok(c),
        Err(OpticsError::ZeroKernel { .. }) => {
            Ok(sentinel(0.0, f64::INFINITY, DesignFlag::ZeroKernel))
        }
        Err(OpticsError::DegenerateFocus { .. }) => Ok(sentinel(
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
            DesignFlag::DegenerateFocus,
        )),
        Err(OpticsError::RangeInsideFocus { .. }) => Ok(sentinel(
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
            DesignFlag::RangeInsideFocus,
        )),
        Err(e) => Err(e),
    }
}

/// FOV of the under-focused single detector as `Z → ∞`: `2·atan(A(f−u)/(2uf))`.
/// Not mirror-capped.
pub fn fov_limit_underfocused(rx: &ReceiverSpec) -> Result<f64, OpticsError> {
    if !rx.is_underfocused() {
        return Err(OpticsError::InvalidVariant);
    }
    let (a, u, f) = (rx.aperture, rx.image_distance, rx.focal_length);
    Ok(2.0 * (a * (f - u) / (2.0 * u * f)).atan())
}

/// Parameter box explored by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepBounds {
    pub beam_quality: (f64, f64),
    pub waist_radius: (f64, f64),
    pub max_aperture: f64,
    pub max_focal_length: f64,
    pub max_image_distance: f64,
}

impl Default for SweepBounds {
    fn default() -> Self {
        Self {
            beam_quality: (1.0, 100.0),
            waist_radius: (0.1e-3, 5e-3),
            max_aperture: 0.1,
            max_focal_length: 0.05,
            max_image_distance: 0.05,
        }
    }
}

impl SweepBounds {
    fn check(&self, param: &'static str, value: f64, (min, max): (f64, f64)) -> Result<(), OpticsError> {
        // unit conversions (mm → m) may land a hair outside an inclusive bound
        let slack = 1e-9 * max.abs().max(min.abs());
        if value < min - slack || value > max + slack {
            Err(OpticsError::OutOfBounds {
                param,
                value,
                min,
                max,
            })
        } else {
            Ok(())
        }
    }

    pub fn validate(&self, tx: &[TransmitterSpec], rx: &[ReceiverSpec]) -> Result<(), OpticsError> {
        for t in tx {
            self.check("M", t.beam_quality, self.beam_quality)?;
            self.check("w0", t.waist_radius, self.waist_radius)?;
        }
        for r in rx {
            if r.kind != ReceiverKind::Retroreflective {
                self.check("A", r.aperture, (0.0, self.max_aperture))?;
            }
            self.check("f", r.focal_length, (0.0, self.max_focal_length))?;
            self.check("u", r.image_distance, (0.0, self.max_image_distance))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub tx_index: usize,
    pub rx_index: usize,
    pub tx: TransmitterSpec,
    pub rx: ReceiverSpec,
    pub result: DesignCharacterization,
}

/// Evaluates the Cartesian product `tx × rx × Z` in lexicographic index
/// order. Singular rows are kept with sentinel values.
pub fn sweep(
    tx_grid: &[TransmitterSpec],
    rx_grid: &[ReceiverSpec],
    ranges: &[f64],
) -> Result<Vec<SweepRow>, OpticsError> {
    sweep_with_bounds(tx_grid, rx_grid, ranges, &SweepBounds::default())
}

pub fn sweep_with_bounds(
    tx_grid: &[TransmitterSpec],
    rx_grid: &[ReceiverSpec],
    ranges: &[f64],
    bounds: &SweepBounds,
) -> Result<Vec<SweepRow>, OpticsError> {
    bounds.validate(tx_grid, rx_grid)?;
    for &z in ranges {
        positive("range", z)?;
    }
    let (nr, nz) = (rx_grid.len(), ranges.len());
    let total = tx_grid.len() * nr * nz;
    (0..total)
        .into_par_iter()
        .map(|i| {
            let (ti, rest) = (i / (nr * nz), i % (nr * nz));
            let (ri, zi) = (rest / nz, rest % nz);
            let tx = tx_grid[ti];
            let mut rx = rx_grid[ri];
            if rx.kind == ReceiverKind::Retroreflective {
                rx.aperture = tx.waist_radius;
            }
            let result = characterize_or_sentinel(&tx, &rx, ranges[zi])?;
            Ok(SweepRow {
                tx_index: ti,
                rx_index: ri,
                tx,
                rx,
                result,
            })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "design_kind,M,w0_m,lambda_m,n,A_m,u_m,f_m,Z_m,fov_rad,rr_per_m,volume_m3,flag";

/// Nine significant digits in scientific notation; infinities print as `inf`/`-inf`.
pub fn format_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        let (t, r, c) = (&row.tx, &row.rx, &row.result);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.kind,
            format_sig9(t.beam_quality),
            format_sig9(t.waist_radius),
            format_sig9(t.wavelength),
            r.detector_count,
            format_sig9(r.aperture),
            format_sig9(r.image_distance),
            format_sig9(r.focal_length),
            format_sig9(c.range),
            format_sig9(c.fov),
            format_sig9(c.received_radiance),
            format_sig9(c.volume),
            c.flag.as_str(),
        )?;
    }
    Ok(())
}

/// Ranges where `a` and `b` swap order, linearly interpolated on `ln(a/b)`.
/// Non-finite or non-positive samples break the scan.
pub fn find_crossovers(ranges: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let log_ratio: Vec<Option<f64>> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            (x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()).then(|| (x / y).ln())
        })
        .collect();
    let mut out = Vec::new();
    for i in 1..ranges.len().min(log_ratio.len()) {
        let (Some(d0), Some(d1)) = (log_ratio[i - 1], log_ratio[i]) else {
            continue;
        };
        if (d0 < 0.0 && d1 >= 0.0) || (d0 > 0.0 && d1 <= 0.0) {
            let t = d0 / (d0 - d1);
            out.push(ranges[i - 1] + t * (ranges[i] - ranges[i - 1]));
        }
    }
    out
}

/// One design-pair comparison extracted from a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverRecord {
    pub tx_index: usize,
    pub rx_a: usize,
    pub rx_b: usize,
    pub kind_a: ReceiverKind,
    pub kind_b: ReceiverKind,
    /// Ranges where the received-radiance ordering of `a` and `b` flips.
    pub ranges: Vec<f64>,
}

/// Received-radiance crossovers between every pair of receivers of different
/// kind sharing a transmitter. `rows` must come from [`sweep`] with
/// `n_ranges` range samples.
pub fn received_radiance_crossovers(rows: &[SweepRow], n_ranges: usize) -> Vec<CrossoverRecord> {
    if n_ranges == 0 {
        return Vec::new();
    }
    let curves: Vec<&[SweepRow]> = rows.chunks(n_ranges).collect();
    let mut out = Vec::new();
    for (i, ca) in curves.iter().enumerate() {
        for cb in curves.iter().skip(i + 1) {
            let (ra, rb) = (&ca[0], &cb[0]);
            if ra.tx_index != rb.tx_index || ra.rx.kind == rb.rx.kind {
                continue;
            }
            let zs: Vec<f64> = ca.iter().map(|r| r.result.range).collect();
            let sa: Vec<f64> = ca.iter().map(|r| r.result.received_radiance).collect();
            let sb: Vec<f64> = cb.iter().map(|r| r.result.received_radiance).collect();
            out.push(CrossoverRecord {
                tx_index: ra.tx_index,
                rx_a: ra.rx_index,
                rx_b: rb.rx_index,
                kind_a: ra.rx.kind,
                kind_b: rb.rx.kind,
                ranges: find_crossovers(&zs, &sa, &sb),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const MM: f64 = 1e-3;

    fn tx(m: f64, w0: f64) -> TransmitterSpec {
        TransmitterSpec::new(m, w0, 1e-6, 25f64.to_radians()).unwrap()
    }

    #[test]
    fn divergence_values() {
        assert_relative_eq!(beam_divergence(&tx(1.0, 6.0 * MM)), 5.305e-5, max_relative = 1e-3);
        assert_relative_eq!(
            beam_divergence(&tx(2.0, 6.0 * MM)),
            4.0 * beam_divergence(&tx(1.0, 6.0 * MM)),
            max_relative = 1e-15
        );
        let diode = tx(300.0, 6.0 * MM);
        assert_relative_eq!(beam_divergence(&diode), 4.775, max_relative = 1e-3);
        assert!(!diode.divergence_is_physical());
    }

    #[test]
    fn acuity_gain_from_dot_size() {
        let cam = CameraSpec::new(25f64.to_radians(), 640 * 480).unwrap();
        // 2π(1 − cos 12.5°) / 307200 sr per pixel
        let pix = 2.0 * PI * (1.0 - 12.5f64.to_radians().cos()) / 307_200.0;
        let gain = acuity_gain_from_solid_angle(6e-4, &cam);
        assert_relative_eq!(gain, 6e-4 / pix, max_relative = 1e-12);
        assert_relative_eq!(gain, 1249.0, max_relative = 0.01);
        assert_relative_eq!(acuity_gain_from_solid_angle(cam.pixel_support(), &cam), 1.0);
        let cam2 = CameraSpec::new(25f64.to_radians(), 2 * 640 * 480).unwrap();
        assert_relative_eq!(
            acuity_gain_from_solid_angle(6e-4, &cam2),
            2.0 * gain,
            max_relative = 1e-12
        );
    }

    #[test]
    fn solid_angle_roundtrip() {
        for apex in [1e-4, 0.1, 1.0, 3.0] {
            assert_relative_eq!(solid_angle_to_apex(apex_to_solid_angle(apex)), apex, max_relative = 1e-6);
        }
    }

    #[test]
    fn retro_volume_example() {
        let t = tx(1.0, 3.6 * MM);
        let rx = ReceiverSpec::retroreflective(&t, 15.0 * MM, 15.0 * MM).unwrap();
        let c = characterize(&t, &rx, 1.0).unwrap();
        assert_relative_eq!(c.volume, PI * 0.015 * 0.0036f64.powi(2) / 12.0, max_relative = 1e-15);
        assert_relative_eq!(c.volume, 5.089e-8, max_relative = 1e-3);
        assert_eq!(c.fov, t.mirror_fov());
    }

    #[test]
    fn array_fov_is_mirror_capped() {
        let t = tx(1.0, 5.0 * MM);
        let rx = ReceiverSpec::receiver_array(4, 10.0 * MM, 15.0 * MM, 15.0 * MM).unwrap();
        let c = characterize(&t, &rx, 2.0).unwrap();
        assert!(2.0 * (1.0f64 / 3.0).atan() > 25f64.to_radians());
        assert_relative_eq!(c.fov, 0.4363, max_relative = 1e-3);
    }

    #[test]
    fn conventional_kernel_simplifies_at_focus() {
        let t = TransmitterSpec::new(1.0, 5.0 * MM, 1e-6, PI).unwrap();
        let rx = ReceiverSpec::single_detector(100.0 * MM, 15.0 * MM, 15.0 * MM).unwrap();
        let c = characterize(&t, &rx, 1.0).unwrap();
        assert_relative_eq!(c.fov, 2.0 * (0.1f64 / 2.0).atan(), max_relative = 1e-12);
        assert_relative_eq!(c.fov, 0.0999, max_relative = 1e-3);
    }

    #[test]
    fn singular_geometries() {
        let t = tx(1.0, 5.0 * MM);
        let rx = ReceiverSpec::single_detector(0.1, 0.02, 0.015).unwrap();
        assert_eq!(
            characterize(&t, &rx, 0.015),
            Err(OpticsError::DegenerateFocus { z: 0.015 })
        );
        assert!(matches!(
            characterize(&t, &rx, 0.01),
            Err(OpticsError::RangeInsideFocus { .. })
        ));
        // f = 1, Z = 2 puts the in-focus plane at u' = 2 exactly
        let t = TransmitterSpec::new(1.0, 5.0 * MM, 1e-6, PI).unwrap();
        let rx = ReceiverSpec::single_detector(0.1, 2.0, 1.0).unwrap();
        assert_eq!(characterize(&t, &rx, 2.0), Err(OpticsError::ZeroKernel { z: 2.0 }));
        let s = characterize_or_sentinel(&t, &rx, 2.0).unwrap();
        assert_eq!((s.fov, s.received_radiance, s.flag), (0.0, f64::INFINITY, DesignFlag::ZeroKernel));
        assert!(s.volume > 0.0);
    }

    #[test]
    fn underfocused_limit() {
        let rx = ReceiverSpec::single_detector(100.0 * MM, 10.0 * MM, 15.0 * MM).unwrap();
        let lim = fov_limit_underfocused(&rx).unwrap();
        assert_relative_eq!(lim, 2.0 * (500.0f64 / 300.0).atan(), max_relative = 1e-12);
        assert_relative_eq!(lim, 2.0608, max_relative = 1e-4);
        let t = TransmitterSpec::new(1.0, 5.0 * MM, 1e-6, PI).unwrap();
        let far = characterize(&t, &rx, 100.0).unwrap();
        assert!((far.fov - lim).abs() / lim < 0.01);
        let near = ReceiverSpec::single_detector(100.0 * MM, 14.9999 * MM, 15.0 * MM).unwrap();
        assert!(fov_limit_underfocused(&near).unwrap() < 1e-3);
        let conv = ReceiverSpec::single_detector(100.0 * MM, 15.0 * MM, 15.0 * MM).unwrap();
        assert_eq!(fov_limit_underfocused(&conv), Err(OpticsError::InvalidVariant));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(TransmitterSpec::new(0.5, 1e-3, 1e-6, 0.4).is_err());
        assert!(TransmitterSpec::new(1.0, 0.0, 1e-6, 0.4).is_err());
        assert!(TransmitterSpec::new(1.0, 1e-3, 1e-6, 4.0).is_err());
        assert!(ReceiverSpec::receiver_array(0, 0.01, 0.01, 0.01).is_err());
        let single = ReceiverSpec::new(ReceiverKind::SingleDetector, 9, 0.01, 0.01, 0.01).unwrap();
        assert_eq!(single.detector_count(), 1);
    }

    #[test]
    fn sweep_single_point_matches_characterize() {
        let t = tx(1.0, 5.0 * MM);
        let rx = ReceiverSpec::single_detector(100.0 * MM, 10.0 * MM, 15.0 * MM).unwrap();
        let rows = sweep(&[t], &[rx], &[3.0]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].result, characterize(&t, &rx, 3.0).unwrap());
    }

    #[test]
    fn sweep_rejects_out_of_bounds() {
        let t = tx(300.0, 5.0 * MM);
        let rx = ReceiverSpec::single_detector(100.0 * MM, 10.0 * MM, 15.0 * MM).unwrap();
        assert!(matches!(
            sweep(&[t], &[rx], &[1.0]),
            Err(OpticsError::OutOfBounds { param: "M", .. })
        ));
    }

    #[test]
    fn sweep_keeps_singular_rows() {
        let t = tx(1.0, 5.0 * MM);
        let rx = ReceiverSpec::single_detector(0.1, 0.02, 0.015).unwrap();
        let rows = sweep(&[t], &[rx], &[0.01, 0.015, 1.0]).unwrap();
        let flags: Vec<_> = rows.iter().map(|r| r.result.flag).collect();
        assert_eq!(
            flags,
            [DesignFlag::RangeInsideFocus, DesignFlag::DegenerateFocus, DesignFlag::Ok]
        );
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains("NaN"));
        assert!(text.lines().nth(2).unwrap().contains("-inf"));
    }

    #[test]
    fn csv_format() {
        assert_eq!(format_sig9(0.015), "1.50000000e-2");
        assert_eq!(format_sig9(f64::INFINITY), "inf");
        let t = tx(1.0, 5.0 * MM);
        let rx = ReceiverSpec::retroreflective(&t, 15.0 * MM, 15.0 * MM).unwrap();
        let rows = sweep(&[t], &[rx], &[1.0]).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_CSV_HEADER);
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 13);
        assert_eq!(fields[0], "retroreflective");
        assert_eq!(fields[12], "ok");
    }

    #[test]
    fn crossover_interpolation() {
        let z = [1.0, 2.0, 3.0];
        let a = [1.0, 2.0, 4.0];
        let b = [2.0, 2.0, 2.0];
        // ln(a/b) = [−ln2, 0, ln2] → flips exactly at Z = 2
        assert_eq!(find_crossovers(&z, &a, &b), vec![2.0]);
        assert!(find_crossovers(&z, &b, &b).is_empty());
    }
}
