//! Simulation and design-space tools for an adaptive, MEMS-scanned LIDAR.
//!
//! The pipeline runs bottom-up:
//!
//! * [`optics`] evaluates transmitter/receiver designs in closed form.
//! * [`scene`] loads or renders RGB + ground-truth depth sequences.
//! * [`scan`] turns a frame budget into mirror scan patterns.
//! * [`foveation`] finds regions of interest from entropy or motion.
//! * [`lidar`] samples a scene along a scan pattern.
//! * [`completion`] fills sparse depth guided by the RGB image.
//! * [`metrics`] scores depth against ground truth.

pub mod camera;
pub mod completion;
pub mod foveation;
pub mod image;
pub mod lidar;
pub mod linfit;
pub mod metrics;
pub mod optics;
pub mod pnm;
pub mod scan;
pub mod scene;

pub use camera::Intrinsics;
pub use image::{DepthMap, GrayImage, Grid, Mask, PixelRect, RgbImage};
pub use optics::{
    CameraSpec, DesignCharacterization, DesignFlag, ReceiverKind, ReceiverSpec, TransmitterSpec,
};
pub use scene::{SceneFrame, SceneMeta, SceneSequence};
pub use scan::{MirrorModel, Regime, Roi, ScanGeometry, ScanPattern, ScanSample};
pub use foveation::{BackgroundModel, BackgroundParams};
pub use metrics::{MetricsError, MetricsReport};
pub use lidar::{CalibrationModel, CaptureParams, SparseDepth};
pub use completion::{DenseDepth, GuidedFillParams};
