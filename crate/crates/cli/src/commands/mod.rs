//! Subcommand implementations. Each takes the merged run configuration and
//! returns a short human-readable summary for stdout.

mod curate;
mod eval;
mod kinematics;
mod signals;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use kinema::kinematics::{IkParams, RigidTransform};
use kinema::robot_model::{parse_urdf, RobotGeometry, RobotModel, DEFAULT_SEGMENTS};

use crate::config::RunConfig;
use crate::error::CliError;

pub use curate::cmd_curate;
pub use eval::{cmd_eval, read_flags};
pub use kinematics::{cmd_fk, cmd_ik};
pub use signals::{cmd_perturb, cmd_project, cmd_signal};

pub(crate) fn require<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    value.as_ref().ok_or_else(|| CliError::missing(name))
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input("IoFailure", format!("{}: {e}", path.display())))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::input(kind, format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::input("IoFailure", format!("{}: {e}", path.display())))
}

pub(crate) fn output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = require(&cfg.output, "output")?.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::input("IoFailure", format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

pub(crate) fn load_model(cfg: &RunConfig) -> Result<RobotModel, CliError> {
    let path = require(&cfg.urdf, "urdf")?;
    let model = parse_urdf(&read_text(path)?)?;
    for w in model.warnings() {
        log::warn!("{}: {w}", path.display());
    }
    Ok(model)
}

pub(crate) fn load_geometry(cfg: &RunConfig, model: &RobotModel) -> Result<RobotGeometry, CliError> {
    let base = match (&cfg.meshes, &cfg.urdf) {
        (Some(m), _) => m.clone(),
        (None, Some(u)) => u.parent().map(Path::to_path_buf).unwrap_or_default(),
        (None, None) => PathBuf::new(),
    };
    let geometry = RobotGeometry::load_from_dir(model, &base, cfg.segments.unwrap_or(DEFAULT_SEGMENTS))?;
    log::info!(
        "loaded {} triangles over {} links",
        geometry.triangle_count(),
        geometry.links.len()
    );
    Ok(geometry)
}

pub(crate) fn ik_params(cfg: &RunConfig) -> IkParams {
    let d = IkParams::default();
    IkParams {
        damping: cfg.damping.unwrap_or(d.damping),
        max_iterations: cfg.max_iterations.unwrap_or(d.max_iterations),
        position_tolerance: cfg.position_tolerance.unwrap_or(d.position_tolerance),
        rotation_tolerance: cfg.rotation_tolerance.unwrap_or(d.rotation_tolerance),
        step_scale: d.step_scale,
    }
}

pub(crate) fn read_transform(path: &Path) -> Result<RigidTransform, CliError> {
    let t: RigidTransform = read_json(path, "InvalidTransform")?;
    if (t.quaternion_norm() - 1.0).abs() > 1e-9 {
        return Err(CliError::input("NonUnitQuaternion", path.display()));
    }
    Ok(t)
}
