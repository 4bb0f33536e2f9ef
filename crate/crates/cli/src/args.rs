//! Command-line surface. Every argument struct is also the `run.json` schema,
//! so a run can be rebuilt from its record alone.

use std::path::PathBuf;

use adalidar::completion::KnnSearch;
use adalidar::lidar::{DEFAULT_NOISE_COEFF, DOT_SOLID_ANGLE_SR};
use adalidar::{BackgroundParams, GuidedFillParams, MirrorModel};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "adalidar", version, about = "Adaptive MEMS-scanned LIDAR simulator and design explorer")]
pub struct Cli {
    /// Worker threads; 0 uses every core. Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Sweep transmitter/receiver designs over range; writes sweep.csv.
    OpticsSweep(OpticsSweepArgs),
    /// Fit mirror sample rate and frame overhead to (fps, samples) pairs.
    FitBudget(FitBudgetArgs),
    /// Render a synthetic RGB + depth sequence.
    GenScene(GenSceneArgs),
    /// Plan per-frame scan patterns for a scene.
    Scan(ScanArgs),
    /// Simulate LIDAR capture of a scene; writes sparse depth per frame.
    Capture(CaptureArgs),
    /// Trace regions of interest through a scene.
    Fovea(FoveaArgs),
    /// Fill sparse depth into dense depth guided by the RGB frames.
    Complete(CompleteArgs),
    /// Score dense depth against ground truth, or run and score the whole pipeline.
    Eval(EvalArgs),
    /// Re-run a command from its run.json.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn out(&self) -> Option<&PathBuf> {
        Some(match self {
            Command::OpticsSweep(a) => &a.out,
            Command::FitBudget(a) => &a.out,
            Command::GenScene(a) => &a.out,
            Command::Scan(a) => &a.out,
            Command::Capture(a) => &a.out,
            Command::Fovea(a) => &a.out,
            Command::Complete(a) => &a.out,
            Command::Eval(a) => &a.out,
            Command::Replay(_) => return None,
        })
    }

    pub fn out_mut(&mut self) -> Option<&mut PathBuf> {
        Some(match self {
            Command::OpticsSweep(a) => &mut a.out,
            Command::FitBudget(a) => &mut a.out,
            Command::GenScene(a) => &mut a.out,
            Command::Scan(a) => &mut a.out,
            Command::Capture(a) => &mut a.out,
            Command::Fovea(a) => &mut a.out,
            Command::Complete(a) => &mut a.out,
            Command::Eval(a) => &mut a.out,
            Command::Replay(_) => return None,
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignSel {
    All,
    Retro,
    Array,
    Single,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OpticsSweepArgs {
    /// Receiver designs to evaluate.
    #[arg(long, value_enum, default_value = "all")]
    pub design: DesignSel,
    /// Beam quality factors M (dimensionless, >= 1), comma separated.
    #[arg(long = "M", value_delimiter = ',', default_value = "1")]
    pub m: Vec<f64>,
    /// Beam waist radii, mm, comma separated.
    #[arg(long = "w0-mm", value_delimiter = ',', default_value = "5")]
    pub w0_mm: Vec<f64>,
    /// Laser wavelength, m. Required: there is no safe default.
    #[arg(long = "lambda-m")]
    pub lambda_m: f64,
    /// Ranges Z, m: `a:b:logN`, `a:b:N` or a comma list.
    #[arg(long = "Z-m", default_value = "0.5:100:log50")]
    pub z_m: String,
    /// Receiver apertures A, mm, comma separated. Ignored by retroreflection.
    #[arg(long = "A-mm", value_delimiter = ',', default_value = "100")]
    pub a_mm: Vec<f64>,
    /// Lens-to-detector distances u, mm, comma separated.
    #[arg(long = "u-mm", value_delimiter = ',', default_value = "10")]
    pub u_mm: Vec<f64>,
    /// Focal lengths f, mm, comma separated.
    #[arg(long = "f-mm", value_delimiter = ',', default_value = "15")]
    pub f_mm: Vec<f64>,
    /// Detector count of the receiver array.
    #[arg(long, default_value_t = 4)]
    pub n: u32,
    /// Mirror scan FOV (full apex), degrees.
    #[arg(long = "mirror-fov-deg", default_value_t = 25.0)]
    pub mirror_fov_deg: f64,
    /// Also write crossovers.csv: ranges Z* (m) where two designs swap received radiance.
    #[arg(long)]
    pub crossovers: bool,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

fn reference_pairs() -> Vec<String> {
    adalidar::scan::REFERENCE_FRAME_BUDGETS
        .iter()
        .map(|(f, s)| format!("{f}:{s}"))
        .collect()
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FitBudgetArgs {
    /// Observed `fps:samples` pairs (frames/s : samples/frame); repeat or comma separate.
    #[arg(long = "pair", value_delimiter = ',', default_values_t = reference_pairs())]
    pub pairs: Vec<String>,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    FrontoPlane,
    TwoPlanes,
    MovingBox,
    Cluttered,
    TexturedQuadrant,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GenSceneArgs {
    /// Built-in scene.
    #[arg(long, value_enum, default_value = "cluttered", conflicts_with = "spec")]
    pub preset: Preset,
    /// Scene description JSON; replaces --preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Image width, px (presets only; moving-box is fixed at 320).
    #[arg(long, default_value_t = 320)]
    pub width: usize,
    /// Image height, px (presets only; moving-box is fixed at 240).
    #[arg(long, default_value_t = 240)]
    pub height: usize,
    /// Plane depth for fronto-plane, m.
    #[arg(long = "depth-m", default_value_t = 2.0)]
    pub depth_m: f64,
    /// Override the frame count.
    #[arg(long)]
    pub frames: Option<u32>,
    /// Seed for scene layout and textures.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output scene directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeArg {
    FullFov,
    Entropy,
    Foveated,
    DensitySweep,
}

fn calibrated() -> MirrorModel {
    MirrorModel::calibrated()
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MirrorArgs {
    /// Mirror measurement rate, samples/s (default: fit to the reference budgets).
    #[arg(long = "sample-rate-hz", default_value_t = calibrated().sample_rate)]
    pub sample_rate_hz: f64,
    /// Dead time per frame, s (default: fit to the reference budgets).
    #[arg(long = "frame-overhead-s", default_value_t = calibrated().frame_overhead)]
    pub frame_overhead_s: f64,
}

impl MirrorArgs {
    pub fn model(&self, mirror_fov_rad: f64) -> MirrorModel {
        MirrorModel {
            fov: mirror_fov_rad,
            sample_rate: self.sample_rate_hz,
            frame_overhead: self.frame_overhead_s,
            ..MirrorModel::default()
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundArgs {
    /// Background running-mean learning rate, (0, 1].
    #[arg(long = "bg-learning-rate", default_value_t = BackgroundParams::default().learning_rate)]
    pub learning_rate: f64,
    /// Foreground threshold, gray levels.
    #[arg(long = "bg-threshold", default_value_t = BackgroundParams::default().diff_threshold)]
    pub diff_threshold: f64,
    /// Smallest moving blob kept, px.
    #[arg(long = "bg-min-blob-px", default_value_t = BackgroundParams::default().min_blob_area)]
    pub min_blob_area: usize,
    /// Margin added around a detected blob, px.
    #[arg(long = "bg-margin-px", default_value_t = BackgroundParams::default().margin)]
    pub margin: usize,
}

impl BackgroundArgs {
    pub fn params(&self) -> BackgroundParams {
        BackgroundParams {
            learning_rate: self.learning_rate,
            diff_threshold: self.diff_threshold,
            min_blob_area: self.min_blob_area,
            margin: self.margin,
        }
    }
}

/// How each frame's scan pattern is chosen.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PatternArgs {
    /// Scan regime.
    #[arg(long, value_enum, default_value = "full-fov")]
    pub regime: RegimeArg,
    /// Region of interest: `x0,y0,x1,y1` (px, half-open), `auto-entropy` or
    /// `auto-motion`. Foveated scans need one; other regimes use a rectangle
    /// only for --roi-only scoring.
    #[arg(long)]
    pub roi: Option<String>,
    /// Side of the auto-entropy ROI as a fraction of the image side.
    #[arg(long, default_value_t = 0.5)]
    pub roi_scale: f64,
    /// Per-pixel sample density outside the ROI relative to inside, [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub outside_density: f64,
    /// Entropy window side, px (odd).
    #[arg(long, default_value_t = 15)]
    pub entropy_window: usize,
    #[command(flatten)]
    pub mirror: MirrorArgs,
    #[command(flatten)]
    pub background: BackgroundArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ScanArgs {
    /// Scene directory (meta.json + NNNN.ppm/.pgm).
    #[arg(long)]
    pub scene: PathBuf,
    /// Frame rate, frames/s. With auto-motion this is the dense full-scan rate.
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Frame rates for --regime density-sweep, frames/s.
    #[arg(long, value_delimiter = ',', default_value = "30,24,18,12,6")]
    pub sweep_fps: Vec<f64>,
    #[command(flatten)]
    pub pattern: PatternArgs,
    /// Seed for randomized patterns; frame i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SensorArgs {
    /// Range noise σ = coeff · Z (dimensionless).
    #[arg(long, default_value_t = DEFAULT_NOISE_COEFF)]
    pub noise_coeff: f64,
    /// Laser dot solid angle, sr.
    #[arg(long = "dot-sr", default_value_t = DOT_SOLID_ANGLE_SR)]
    pub dot_sr: f64,
    /// Maximum range, m (default: the scene's z_max_m).
    #[arg(long = "z-max-m")]
    pub z_max_m: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CaptureArgs {
    /// Scene directory (meta.json + NNNN.ppm/.pgm).
    #[arg(long)]
    pub scene: PathBuf,
    /// Frame rate, frames/s. With auto-motion this is the dense full-scan rate.
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Frame rates for --regime density-sweep, frames/s.
    #[arg(long, value_delimiter = ',', default_value = "30,24,18,12,6")]
    pub sweep_fps: Vec<f64>,
    #[command(flatten)]
    pub pattern: PatternArgs,
    #[command(flatten)]
    pub sensor: SensorArgs,
    /// Noise and pattern seed; frame i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoveaMode {
    Motion,
    Entropy,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FoveaArgs {
    /// Scene directory.
    #[arg(long)]
    pub scene: PathBuf,
    /// ROI source.
    #[arg(long, value_enum, default_value = "motion")]
    pub mode: FoveaMode,
    /// Entropy window side, px (odd).
    #[arg(long, default_value_t = 15)]
    pub entropy_window: usize,
    /// Side of the entropy ROI as a fraction of the image side.
    #[arg(long, default_value_t = 0.5)]
    pub roi_scale: f64,
    #[command(flatten)]
    pub background: BackgroundArgs,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchArg {
    Grid,
    BruteForce,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FillArgs {
    /// Spatial weight σ, px.
    #[arg(long = "sigma-spatial-px", default_value_t = GuidedFillParams::default().sigma_spatial)]
    pub sigma_spatial_px: f64,
    /// Color weight σ, RGB distance; `inf` ignores color.
    #[arg(long, default_value_t = GuidedFillParams::default().sigma_color)]
    pub sigma_color: f64,
    /// Samples averaged per missing pixel.
    #[arg(long = "k", default_value_t = GuidedFillParams::default().k_neighbors)]
    pub k_neighbors: usize,
    /// Neighbour search.
    #[arg(long, value_enum, default_value = "grid")]
    pub search: SearchArg,
}

impl FillArgs {
    pub fn params(&self) -> GuidedFillParams {
        GuidedFillParams {
            sigma_spatial: self.sigma_spatial_px,
            sigma_color: self.sigma_color,
            k_neighbors: self.k_neighbors,
            search: match self.search {
                SearchArg::Grid => KnnSearch::Grid,
                SearchArg::BruteForce => KnnSearch::BruteForce,
            },
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CompleteArgs {
    /// Scene directory providing the RGB guide frames.
    #[arg(long)]
    pub scene: PathBuf,
    /// Directory of sparse captures (NNNN.json).
    #[arg(long)]
    pub sparse: PathBuf,
    #[command(flatten)]
    pub fill: FillArgs,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Scene directory holding the ground-truth depth.
    #[arg(long)]
    pub scene: PathBuf,
    /// Directory of dense predictions (NNNN.pgm). Without it the pipeline runs
    /// once per --fps-list entry.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Frame rates of the pipeline sweep, frames/s.
    #[arg(long, value_delimiter = ',', default_value = "30,24,18,12,6")]
    pub fps_list: Vec<f64>,
    #[command(flatten)]
    pub pattern: PatternArgs,
    #[command(flatten)]
    pub sensor: SensorArgs,
    #[command(flatten)]
    pub fill: FillArgs,
    /// Score only pixels inside the ROI (--roi rectangle, --roi-trace, or the
    /// pipeline's own per-frame ROI).
    #[arg(long)]
    pub roi_only: bool,
    /// ROI trace CSV (frame,x0,y0,x1,y1,area_px) for --roi-only.
    #[arg(long)]
    pub roi_trace: Option<PathBuf>,
    /// Noise and pattern seed; frame i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    /// A run.json written by an earlier run.
    pub run_json: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}
