//! `curate`: batch curation of raw episode directories.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use kinema::control_signal::DEFAULT_TARGET_FRAMES;
use kinema::curation::{
    append_manifest, curate_episode, stratified_split, synthesize_failures, write_episode, CurationOptions, Episode,
    FailureSynthesisConfig, RawEpisode, SplitFractions, MANIFEST_FILE,
};
use kinema::kinematics::ActionSequence;
use kinema::projection::CameraModel;

use super::{output_dir, require, write_json};
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Serialize)]
struct EpisodeFailure {
    episode: String,
    error: String,
    message: String,
}

#[derive(Debug, Serialize)]
struct Split {
    train: Vec<String>,
    validation: Vec<String>,
}

fn failure(episode: &str, e: CliError) -> EpisodeFailure {
    EpisodeFailure {
        episode: episode.to_string(),
        error: e.kind().to_string(),
        message: e.to_string(),
    }
}

fn process(
    dir: &Path,
    out: &std::path::Path,
    options: &CurationOptions,
    camera: Option<&CameraModel>,
    failures: Option<&FailureSynthesisConfig>,
) -> Result<Episode, CliError> {
    let raw = RawEpisode::load(dir, camera)?;
    let curated = curate_episode(&raw, options)?;
    write_episode(&curated, out)?;
    if let Some(cfg) = failures {
        match &curated.episode.actions {
            ActionSequence::JointSpace { frames } => {
                let rows: Vec<Vec<f64>> = frames.iter().map(|q| q.0.clone()).collect();
                let width = rows.first().map_or(0, Vec::len);
                let trajectories = synthesize_failures(&rows, &cfg.fit_width(width))?;
                write_json(&out.join(&curated.episode.id).join("failures.json"), &trajectories)?;
            }
            other => log::warn!(
                "{}: failure synthesis needs per-frame vectors, actions are '{}'",
                raw.id,
                other.mode()
            ),
        }
    }
    Ok(curated.episode)
}

/// Curates every subdirectory of `--input` into `--output`, recording
/// per-episode failures in `errors.jsonl` and continuing.
pub fn cmd_curate(cfg: &RunConfig) -> Result<String, CliError> {
    let input = require(&cfg.input, "input")?;
    let out = output_dir(cfg)?;
    let camera = match &cfg.camera {
        Some(p) => Some(CameraModel::read(p)?),
        None => None,
    };
    let options = CurationOptions {
        target_frames: cfg.target_frames.unwrap_or(DEFAULT_TARGET_FRAMES),
        pad_short: RunConfig::flag(cfg.pad_short),
    };
    let failures = RunConfig::flag(cfg.failures).then(|| {
        let mut f = FailureSynthesisConfig {
            seed: cfg.seed_or_default(),
            ..Default::default()
        };
        if let Some(s) = &cfg.sigmas {
            f.sigmas = s.clone();
        }
        f
    });
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let results: Vec<Result<Episode, EpisodeFailure>> = pool.install(|| {
        dirs.par_iter()
            .map(|d| {
                let id = d
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                process(d, &out, &options, camera.as_ref(), failures.as_ref()).map_err(|e| failure(&id, e))
            })
            .collect()
    });

    let mut episodes = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(ep) => episodes.push(ep),
            Err(f) => {
                log::warn!("{}: {} {}", f.episode, f.error, f.message);
                errors.push(f);
            }
        }
    }
    let manifest = out.join(MANIFEST_FILE);
    if manifest.exists() {
        std::fs::remove_file(&manifest)?;
    }
    append_manifest(&manifest, &episodes)?;
    if !errors.is_empty() {
        let lines: String = errors
            .iter()
            .map(|e| serde_json::to_string(e).expect("error serializes") + "\n")
            .collect();
        std::fs::write(out.join("errors.jsonl"), lines)?;
    }
    if let Some(f) = cfg.split_fraction {
        let (train, val) = stratified_split(
            &episodes,
            |e| &e.source,
            &SplitFractions::uniform(f),
            cfg.seed_or_default(),
        );
        let ids = |v: Vec<Episode>| v.into_iter().map(|e| e.id).collect();
        write_json(
            &out.join("split.json"),
            &Split {
                train: ids(train),
                validation: ids(val),
            },
        )?;
    }
    if episodes.is_empty() && !dirs.is_empty() {
        return Err(CliError::input(
            "NoValidEpisodes",
            format!("all {} episodes failed; see errors.jsonl", dirs.len()),
        ));
    }
    Ok(format!(
        "curate: {} episodes curated, {} failed",
        episodes.len(),
        errors.len()
    ))
}
