//! `fk` and `ik`.

use kinema::kinematics::{
    apply_base_calibration, expand_trajectory, inverse_kinematics, ActionSequence, JointConfiguration,
};

use super::{ik_params, load_model, output_dir, read_text, read_transform, require, write_json};
use crate::config::RunConfig;
use crate::error::CliError;

/// Writes `link_poses.json`, `joints.json` and, for end-effector actions,
/// `ik_report.json`; clamped velocity steps go to `clamp_events.json`.
pub fn cmd_fk(cfg: &RunConfig) -> Result<String, CliError> {
    let model = load_model(cfg)?;
    let actions = ActionSequence::read(require(&cfg.actions, "actions")?)?;
    let out = output_dir(cfg)?;
    let expansion = expand_trajectory(&model, &actions, &ik_params(cfg))?;
    let poses = match &cfg.calibration {
        Some(p) => apply_base_calibration(&read_transform(p)?, &expansion.poses),
        None => expansion.poses.clone(),
    };
    write_json(&out.join("link_poses.json"), &poses)?;
    write_json(&out.join("joints.json"), &expansion.joints)?;
    if !expansion.ik.is_empty() {
        write_json(&out.join("ik_report.json"), &expansion.ik)?;
    }
    if !expansion.clamp_events.is_empty() {
        log::warn!("{} joint values clamped to limits", expansion.clamp_events.len());
        write_json(&out.join("clamp_events.json"), &expansion.clamp_events)?;
    }
    let diverged = expansion.diverged_frames();
    if !diverged.is_empty() {
        log::warn!("IK did not converge on frames {diverged:?}");
    }
    Ok(format!(
        "fk: {} frames, {} links, {} IK frames unconverged",
        poses.frame_count(),
        model.links().len(),
        diverged.len()
    ))
}

/// Solves one target pose; prints the solution and writes `ik.json` when an
/// output directory is given.
pub fn cmd_ik(cfg: &RunConfig) -> Result<String, CliError> {
    let model = load_model(cfg)?;
    let ee = require(&cfg.ee_link, "ee_link")?;
    let target = read_transform(require(&cfg.target, "target")?)?;
    let seed = match &cfg.ik_seed {
        None => JointConfiguration(model.mid_configuration()),
        Some(s) => {
            let text = if s.trim_start().starts_with('[') {
                s.clone()
            } else {
                read_text(std::path::Path::new(s))?
            };
            serde_json::from_str::<JointConfiguration>(&text).map_err(|e| CliError::input("InvalidSeed", e))?
        }
    };
    let solution = inverse_kinematics(&model, ee, &target, &seed, &ik_params(cfg))?;
    let json = serde_json::to_string_pretty(&solution).map_err(|e| CliError::Internal(e.to_string()))?;
    if cfg.output.is_some() {
        write_json(&output_dir(cfg)?.join("ik.json"), &solution)?;
    }
    Ok(json)
}
