//! `project`, `perturb` and `signal`.

use std::path::Path;

use kinema::control_signal::{
    concat_width, downsample_temporal, export_pseudo_rgb, extend_world_image, normalize_sequence, perturb, soft_mask,
    ExtendMode, OccupancyMaskSequence, Perturbation, PerturbationSpec, DEFAULT_SOFT_RATIO, DEFAULT_SOFT_VALUE,
};
use kinema::image_io::{read_rgb_dir, read_rgb_png, write_rgb_dir};
use kinema::kinematics::{apply_base_calibration, expand_trajectory, ActionSequence, LinkPoseSequence};
use kinema::projection::{
    read_pointmap_tensor, render_sequence, write_mask_tensor, write_pointmap_tensor, CameraModel, Mask,
    PointMapSequence, PointMapSidecar,
};

use super::{ik_params, load_geometry, load_model, output_dir, read_json, read_transform, require, write_json};
use crate::config::RunConfig;
use crate::error::CliError;

fn perturbation_spec(cfg: &RunConfig) -> Result<Option<PerturbationSpec>, CliError> {
    let Some(text) = &cfg.perturb else {
        return Ok(None);
    };
    let perturbation: Perturbation = text.parse()?;
    let spec = PerturbationSpec {
        perturbation,
        seed: cfg.seed_or_default(),
        allow_large: RunConfig::flag(cfg.allow_large),
    };
    spec.check()?;
    Ok(Some(spec))
}

fn soft(cfg: &RunConfig, occupancy: &[Mask]) -> Result<OccupancyMaskSequence, CliError> {
    Ok(soft_mask(
        occupancy,
        cfg.soft_ratio.unwrap_or(DEFAULT_SOFT_RATIO),
        cfg.soft_value.unwrap_or(DEFAULT_SOFT_VALUE),
        cfg.seed_or_default(),
    )?)
}

fn write_masks(dir: &Path, occupancy: &[Mask], mask: &OccupancyMaskSequence) -> Result<(), CliError> {
    let binary: Vec<Vec<f32>> = occupancy
        .iter()
        .map(|m| m.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
        .collect();
    write_mask_tensor(&dir.join("occupancy.kmask"), mask.width, mask.height, &binary)?;
    write_mask_tensor(&dir.join("mask.kmask"), mask.width, mask.height, &mask.frames)?;
    Ok(())
}

/// Renders the robot into `pointmap.kpm` (+ sidecar), `occupancy.kmask`,
/// the soft `mask.kmask` and, with `--rgb`, `rgb/frame_*.png`.
pub fn cmd_project(cfg: &RunConfig) -> Result<String, CliError> {
    let camera = CameraModel::read(require(&cfg.camera, "camera")?)?;
    let model = load_model(cfg)?;
    let poses: LinkPoseSequence = match (&cfg.poses, &cfg.actions) {
        (Some(p), _) => read_json(p, "InvalidPoses")?,
        (None, Some(a)) => {
            let actions = ActionSequence::read(a)?;
            let expansion = expand_trajectory(&model, &actions, &ik_params(cfg))?;
            let diverged = expansion.diverged_frames();
            if !diverged.is_empty() {
                log::warn!("IK did not converge on frames {diverged:?}");
            }
            match &cfg.calibration {
                Some(c) => apply_base_calibration(&read_transform(c)?, &expansion.poses),
                None => expansion.poses,
            }
        }
        (None, None) => return Err(CliError::Usage("project needs --poses or --actions".into())),
    };
    let spec = perturbation_spec(cfg)?;
    let geometry = load_geometry(cfg, &model)?;
    let out = output_dir(cfg)?;
    let want_rgb = RunConfig::flag(cfg.rgb);
    let render = render_sequence(&geometry, &poses, &camera, want_rgb)?;
    let baseline = render.pointmaps.valid_count();
    let pointmaps = match &spec {
        Some(s) => perturb(&render.pointmaps, s)?,
        None => render.pointmaps,
    };
    let occupancy: Vec<Mask> = pointmaps.frames.iter().map(|f| f.validity()).collect();
    let mask = soft(cfg, &occupancy)?;
    let sidecar = PointMapSidecar::new(&pointmaps, Some(&camera), "meters");
    write_pointmap_tensor(&out.join("pointmap.kpm"), &pointmaps, &sidecar)?;
    write_masks(&out, &occupancy, &mask)?;
    if let Some(rgb) = &render.rgb {
        write_rgb_dir(&out.join("rgb"), rgb)?;
    }
    Ok(format!(
        "project: {} frames at {}x{}, {} valid pixels ({} before perturbation)",
        pointmaps.len(),
        camera.width,
        camera.height,
        pointmaps.valid_count(),
        baseline
    ))
}

fn read_pointmap(cfg: &RunConfig) -> Result<(PointMapSequence, Option<PointMapSidecar>), CliError> {
    Ok(read_pointmap_tensor(require(&cfg.pointmap, "pointmap")?)?)
}

/// Applies `--perturb` to `--pointmap` and writes `pointmap.kpm`,
/// `occupancy.kmask`, `mask.kmask` and `stats.json`.
pub fn cmd_perturb(cfg: &RunConfig) -> Result<String, CliError> {
    let spec = perturbation_spec(cfg)?.ok_or_else(|| CliError::missing("perturb"))?;
    let (pm, sidecar) = read_pointmap(cfg)?;
    let out = output_dir(cfg)?;
    let perturbed = perturb(&pm, &spec)?;
    let sidecar = PointMapSidecar {
        frame_count: perturbed.len(),
        ..sidecar.unwrap_or_else(|| PointMapSidecar::new(&perturbed, None, "meters"))
    };
    write_pointmap_tensor(&out.join("pointmap.kpm"), &perturbed, &sidecar)?;
    let occupancy: Vec<Mask> = perturbed.frames.iter().map(|f| f.validity()).collect();
    write_masks(&out, &occupancy, &soft(cfg, &occupancy)?)?;
    let stats = serde_json::json!({
        "spec": spec,
        "valid_before": pm.frames.iter().map(|f| f.valid_count()).collect::<Vec<_>>(),
        "valid_after": perturbed.frames.iter().map(|f| f.valid_count()).collect::<Vec<_>>(),
    });
    write_json(&out.join("stats.json"), &stats)?;
    Ok(format!(
        "perturb: {} → {} valid pixels over {} frames",
        pm.valid_count(),
        perturbed.valid_count(),
        perturbed.len()
    ))
}

/// Builds the conditioning signals from a rendered pointmap: the normalized
/// pseudo-RGB export, the soft mask, and (with `--world-image`) the
/// width-concatenated conditioning frames.
pub fn cmd_signal(cfg: &RunConfig) -> Result<String, CliError> {
    let (mut pm, _) = read_pointmap(cfg)?;
    let mut robot_rgb = match &cfg.robot_rgb {
        Some(dir) => Some(read_rgb_dir(dir)?),
        None => None,
    };
    if let Some(target) = cfg.target_frames {
        let pad = RunConfig::flag(cfg.pad_short);
        if pm.len() != target {
            pm = PointMapSequence::new(downsample_temporal(&pm.frames, target, pad)?);
            if let Some(rgb) = robot_rgb.as_mut() {
                *rgb = downsample_temporal(rgb, target, pad)?;
            }
        }
    }
    let out = output_dir(cfg)?;
    let norm = normalize_sequence(&pm)?;
    if norm.degenerate {
        log::warn!("pointmap values are all equal; normalized to 0.5");
    }
    export_pseudo_rgb(&norm, &out.join("pseudo_rgb"))?;
    let occupancy: Vec<Mask> = pm.frames.iter().map(|f| f.validity()).collect();
    write_masks(&out, &occupancy, &soft(cfg, &occupancy)?)?;
    let mut summary = format!("signal: {} frames, extrema [{}, {}]", pm.len(), norm.min, norm.max);
    if let Some(world_path) = &cfg.world_image {
        let world = read_rgb_png(world_path)?;
        let mode = match cfg.extend_mode.as_deref() {
            None if robot_rgb.is_some() => ExtendMode::RobotRgb,
            None | Some("zero_pad") => ExtendMode::ZeroPad,
            Some("robot_rgb") => ExtendMode::RobotRgb,
            Some(other) => return Err(CliError::Usage(format!("unknown extend mode '{other}'"))),
        };
        let robot = match mode {
            ExtendMode::RobotRgb => Some(robot_rgb.as_deref().ok_or_else(|| CliError::missing("robot_rgb"))?),
            ExtendMode::ZeroPad => None,
        };
        let extended = extend_world_image(&world, pm.len(), mode, robot)?;
        let cond = concat_width(&extended, &norm)?;
        write_rgb_dir(&out.join("conditioning"), &cond.frames)?;
        summary.push_str(&format!(", conditioning frames {}x{}", world.width * 2, world.height));
    }
    Ok(summary)
}
