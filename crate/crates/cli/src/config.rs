//! Run configuration: a JSON file whose keys match the long flag names
//! (with `_` for `-`), overridden by flags given on the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

macro_rules! run_config {
    ($($(#[$meta:meta])* $field:ident : $ty:ty,)*) => {
        #[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct RunConfig {
            $(
                $(#[$meta])*
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl RunConfig {
            /// Fields set in `over` replace those in `self`.
            pub fn merged(mut self, over: RunConfig) -> RunConfig {
                $(if over.$field.is_some() { self.$field = over.$field; })*
                self
            }
        }
    };
}

run_config! {
    /// URDF robot description.
    #[arg(long)]
    urdf: PathBuf,
    /// Base directory for mesh filenames (default: the URDF's directory).
    #[arg(long)]
    meshes: PathBuf,
    /// Camera JSON (intrinsics, image size, extrinsics).
    #[arg(long)]
    camera: PathBuf,
    /// Action sequence JSON.
    #[arg(long)]
    actions: PathBuf,
    /// Link pose sequence JSON written by `fk`, used instead of --actions.
    #[arg(long)]
    poses: PathBuf,
    /// Rigid transform JSON from the robot base to the reconstruction frame.
    #[arg(long)]
    calibration: PathBuf,
    /// Initial world image (PNG).
    #[arg(long)]
    world_image: PathBuf,
    /// Directory of robot RGB frames.
    #[arg(long)]
    robot_rgb: PathBuf,
    /// Pointmap tensor (.kpm).
    #[arg(long)]
    pointmap: PathBuf,
    /// Directory of raw episode directories.
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long, short = 'o')]
    output: PathBuf,
    /// Predicted pointmap tensor or episode directory.
    #[arg(long)]
    pred: PathBuf,
    /// Reference pointmap tensor or episode directory.
    #[arg(long)]
    gt: PathBuf,
    /// Predicted RGB frame directory.
    #[arg(long)]
    pred_rgb: PathBuf,
    /// Reference RGB frame directory.
    #[arg(long)]
    gt_rgb: PathBuf,
    /// Success flag files of simulated and real policy rollouts.
    #[arg(long, num_args = 2, value_names = ["SIM", "REAL"])]
    policy: Vec<PathBuf>,
    /// End-effector link for `ik`.
    #[arg(long)]
    ee_link: String,
    /// Target pose JSON for `ik`.
    #[arg(long)]
    target: PathBuf,
    /// IK seed: a JSON array inline or a file holding one.
    #[arg(long)]
    ik_seed: String,
    /// IK damping λ.
    #[arg(long)]
    damping: f64,
    #[arg(long)]
    max_iterations: usize,
    #[arg(long)]
    position_tolerance: f64,
    #[arg(long)]
    rotation_tolerance: f64,
    /// Run seed; every random stage derives its stream from it.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    target_frames: usize,
    /// Repeat the last frame of short sequences instead of rejecting them.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pad_short: bool,
    #[arg(long)]
    soft_ratio: f64,
    #[arg(long)]
    soft_value: f32,
    /// Pointmap perturbation, e.g. remove:0.05, gaussian:0.01, translate:3,-2, rotate:5.
    #[arg(long)]
    perturb: String,
    /// Allow perturbations beyond ±5 px / ±5°.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    allow_large: bool,
    /// World image extension: zero_pad or robot_rgb.
    #[arg(long)]
    extend_mode: String,
    /// Also render robot RGB frames.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    rgb: bool,
    /// Tessellation segments for cylinders and spheres.
    #[arg(long)]
    segments: usize,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: usize,
    /// F-score threshold.
    #[arg(long)]
    tau: f64,
    /// Units of evaluated clouds: metric or normalized.
    #[arg(long)]
    units: String,
    /// Row label in the metric table.
    #[arg(long)]
    label: String,
    /// Synthesize failure trajectories for curated episodes.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    failures: bool,
    /// Noise intensities for failure synthesis.
    #[arg(long, value_delimiter = ',')]
    sigmas: Vec<f64>,
    /// Validation fraction for the stratified split.
    #[arg(long)]
    split_fraction: f64,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input("IoFailure", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn flag(v: Option<bool>) -> bool {
        v.unwrap_or(false)
    }
}
