//! Fixed-length episode curation, failure synthesis and train/validation
//! splitting.
//!
//! On-disk episode layout, relative to a corpus root:
//!
//! ```text
//! {id}/rgb/frame_00000.png …
//! {id}/pointmap.kpm  (+ pointmap.json sidecar)
//! {id}/actions.json
//! {id}/camera.json
//! {id}/episode.json  (raw inputs: optional; curated outputs: always)
//! manifest.jsonl     (one Episode per line)
//! ```

mod failures;
mod split;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control_signal::{downsample_indices, SignalError, DEFAULT_TARGET_FRAMES};
use crate::image_io::{read_rgb_dir, write_rgb_dir};
use crate::kinematics::{ActionSequence, ActionsError};
use crate::projection::{
    read_pointmap_tensor, write_pointmap_tensor, CameraModel, PointMapSequence, PointMapSidecar, RgbFrame,
};

pub use failures::{synthesize_failures, FailureSynthesisConfig, FailureTrajectory, NoiseMode};
pub use split::{stratified_split, SplitFractions};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum CurationError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("sequence of {len} frames is shorter than the target {target}")]
    TooShort { len: usize, target: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CurationError {
    pub fn kind(&self) -> &'static str {
        match self {
            CurationError::LengthMismatch(_) => "LengthMismatch",
            CurationError::TooShort { .. } => "TooShort",
            CurationError::InvalidConfig(_) => "InvalidConfig",
            CurationError::Io { .. } => "IoFailure",
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CurationError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

impl From<SignalError> for CurationError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::TooShort { len, target } => CurationError::TooShort { len, target },
            SignalError::LengthMismatch(m) | SignalError::ShapeMismatch(m) => CurationError::LengthMismatch(m),
            other => CurationError::InvalidConfig(other.to_string()),
        }
    }
}

/// Curated episode record, as stored in `episode.json` and the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    /// Domain tag such as `droid`, `bridge`, `rt1`, `libero` or `custom`.
    pub source: String,
    pub frame_count: usize,
    /// Directory of RGB frames, relative to the corpus root.
    pub rgb_ref: String,
    /// Pointmap tensor, relative to the corpus root.
    pub pointmap_ref: String,
    pub actions: ActionSequence,
    pub success: bool,
    pub camera: CameraModel,
    /// Raw frame index of every curated frame.
    pub source_indices: Vec<usize>,
}

impl Episode {
    /// Checks that the referenced artifacts exist and hold `frame_count`
    /// frames.
    pub fn verify(&self, root: &Path) -> Result<(), CurationError> {
        let pm_path = root.join(&self.pointmap_ref);
        let (pm, _) = read_pointmap_tensor(&pm_path).map_err(|e| CurationError::io(&pm_path, e))?;
        let rgb_dir = root.join(&self.rgb_ref);
        let rgb = read_rgb_dir(&rgb_dir).map_err(|e| CurationError::io(&rgb_dir, e))?;
        for (what, n) in [
            ("pointmap", pm.len()),
            ("rgb", rgb.len()),
            ("actions", self.actions.len()),
            ("source_indices", self.source_indices.len()),
        ] {
            if n != self.frame_count {
                return Err(CurationError::LengthMismatch(format!(
                    "episode {}: {what} has {n} frames, expected {}",
                    self.id, self.frame_count
                )));
            }
        }
        Ok(())
    }
}

/// Optional `episode.json` of a raw episode directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawEpisodeMeta {
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub success: Option<bool>,
}

/// Uncurated streams of one demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEpisode {
    pub id: String,
    pub source: String,
    pub rgb: Vec<RgbFrame>,
    pub pointmaps: PointMapSequence,
    pub actions: ActionSequence,
    pub success: bool,
    pub camera: CameraModel,
}

impl RawEpisode {
    /// Loads `{dir}/rgb/`, `{dir}/pointmap.kpm`, `{dir}/actions.json`,
    /// `{dir}/camera.json` (or `fallback_camera`) and the optional
    /// `{dir}/episode.json`. The episode id is the directory name.
    pub fn load(dir: &Path, fallback_camera: Option<&CameraModel>) -> Result<Self, CurationError> {
        let id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| CurationError::InvalidConfig(format!("{} has no name", dir.display())))?;
        let rgb_dir = dir.join("rgb");
        let rgb = read_rgb_dir(&rgb_dir).map_err(|e| CurationError::io(&rgb_dir, e))?;
        let pm_path = dir.join("pointmap.kpm");
        let (pointmaps, sidecar) = read_pointmap_tensor(&pm_path).map_err(|e| CurationError::io(&pm_path, e))?;
        let actions_path = dir.join("actions.json");
        let actions = ActionSequence::read(&actions_path).map_err(|e| CurationError::io(&actions_path, e))?;
        let camera_path = dir.join("camera.json");
        let camera = if camera_path.exists() {
            CameraModel::read(&camera_path).map_err(|e| CurationError::io(&camera_path, e))?
        } else if let Some(c) = sidecar.and_then(|s| s.camera).or_else(|| fallback_camera.cloned()) {
            c
        } else {
            return Err(CurationError::io(&camera_path, "no camera for episode"));
        };
        let meta_path = dir.join("episode.json");
        let meta: RawEpisodeMeta = if meta_path.exists() {
            let text = std::fs::read_to_string(&meta_path).map_err(|e| CurationError::io(&meta_path, e))?;
            serde_json::from_str(&text).map_err(|e| CurationError::io(&meta_path, e))?
        } else {
            RawEpisodeMeta::default()
        };
        Ok(Self {
            id,
            source: meta.source.unwrap_or_else(|| "custom".to_string()),
            rgb,
            pointmaps,
            actions,
            success: meta.success.unwrap_or(true),
            camera,
        })
    }
}

/// Curated episode with its frames in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct CuratedEpisode {
    pub episode: Episode,
    pub rgb: Vec<RgbFrame>,
    pub pointmaps: PointMapSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationOptions {
    pub target_frames: usize,
    /// Repeat the last frame of episodes shorter than the target instead of
    /// rejecting them.
    pub pad_short: bool,
}

impl Default for CurationOptions {
    fn default() -> Self {
        Self {
            target_frames: DEFAULT_TARGET_FRAMES,
            pad_short: false,
        }
    }
}

/// Downsamples RGB, pointmaps and actions with one shared index set.
pub fn curate_episode(raw: &RawEpisode, options: &CurationOptions) -> Result<CuratedEpisode, CurationError> {
    let t_in = raw.rgb.len();
    if raw.pointmaps.len() != t_in || raw.actions.len() != t_in {
        return Err(CurationError::LengthMismatch(format!(
            "episode {}: rgb {}, pointmap {}, actions {}",
            raw.id,
            t_in,
            raw.pointmaps.len(),
            raw.actions.len()
        )));
    }
    let indices = downsample_indices(t_in, options.target_frames, options.pad_short)?;
    let actions = raw
        .actions
        .select(&indices)
        .map_err(|e: ActionsError| CurationError::LengthMismatch(format!("episode {}: {e}", raw.id)))?;
    Ok(CuratedEpisode {
        episode: Episode {
            id: raw.id.clone(),
            source: raw.source.clone(),
            frame_count: indices.len(),
            rgb_ref: format!("{}/rgb", raw.id),
            pointmap_ref: format!("{}/pointmap.kpm", raw.id),
            actions,
            success: raw.success,
            camera: raw.camera.clone(),
            source_indices: indices.clone(),
        },
        rgb: indices.iter().map(|&i| raw.rgb[i].clone()).collect(),
        pointmaps: PointMapSequence::new(indices.iter().map(|&i| raw.pointmaps.frames[i].clone()).collect()),
    })
}

/// Writes the episode's artifacts under `root` using the refs it carries.
pub fn write_episode(curated: &CuratedEpisode, root: &Path) -> Result<(), CurationError> {
    let ep = &curated.episode;
    let dir = root.join(&ep.id);
    std::fs::create_dir_all(&dir).map_err(|e| CurationError::io(&dir, e))?;
    let rgb_dir = root.join(&ep.rgb_ref);
    write_rgb_dir(&rgb_dir, &curated.rgb).map_err(|e| CurationError::io(&rgb_dir, e))?;
    let pm_path = root.join(&ep.pointmap_ref);
    let sidecar = PointMapSidecar::new(&curated.pointmaps, Some(&ep.camera), "meters");
    write_pointmap_tensor(&pm_path, &curated.pointmaps, &sidecar).map_err(|e| CurationError::io(&pm_path, e))?;
    let actions_path = dir.join("actions.json");
    ep.actions
        .write(&actions_path)
        .map_err(|e| CurationError::io(&actions_path, e))?;
    let camera_path = dir.join("camera.json");
    std::fs::write(&camera_path, ep.camera.to_json()).map_err(|e| CurationError::io(&camera_path, e))?;
    let ep_path = dir.join("episode.json");
    let text = serde_json::to_string_pretty(ep).map_err(|e| CurationError::io(&ep_path, e))?;
    std::fs::write(&ep_path, text).map_err(|e| CurationError::io(&ep_path, e))?;
    Ok(())
}

/// Appends one line per episode to the manifest.
pub fn append_manifest(path: &Path, episodes: &[Episode]) -> Result<(), CurationError> {
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CurationError::io(path, e))?;
    let mut buf = Vec::new();
    for ep in episodes {
        serde_json::to_writer(&mut buf, ep).map_err(|e| CurationError::io(path, e))?;
        buf.push(b'\n');
    }
    file.write_all(&buf).map_err(|e| CurationError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<Episode>, CurationError> {
    let text = std::fs::read_to_string(path).map_err(|e| CurationError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| CurationError::io(path, format!("line {}: {e}", n + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{JointConfiguration, RigidTransform};
    use crate::projection::PointMapFrame;

    fn raw(t_rgb: usize, t_pm: usize, t_act: usize) -> RawEpisode {
        RawEpisode {
            id: "ep0".into(),
            source: "droid".into(),
            rgb: (0..t_rgb)
                .map(|t| RgbFrame::filled(3, 2, [t as f32 / 255.0; 3]))
                .collect(),
            pointmaps: PointMapSequence::new(
                (0..t_pm)
                    .map(|t| {
                        let mut f = PointMapFrame::empty(3, 2);
                        f.set(0, 0, [t as f32, 0.0, 1.0]);
                        f
                    })
                    .collect(),
            ),
            actions: ActionSequence::JointSpace {
                frames: (0..t_act).map(|t| JointConfiguration(vec![t as f64])).collect(),
            },
            success: true,
            camera: CameraModel::new(10.0, 10.0, 1.5, 1.0, 3, 2, RigidTransform::identity()).unwrap(),
        }
    }

    #[test]
    fn identity_curation() {
        let r = raw(49, 49, 49);
        let c = curate_episode(&r, &CurationOptions::default()).unwrap();
        assert_eq!(c.rgb, r.rgb);
        assert_eq!(c.pointmaps, r.pointmaps);
        assert_eq!(c.episode.actions, r.actions);
    }

    #[test]
    fn shared_indices() {
        let r = raw(147, 147, 147);
        let c = curate_episode(&r, &CurationOptions::default()).unwrap();
        let expected: Vec<usize> = (0..49).map(|i| i * 146 / 48).collect();
        assert_eq!(c.episode.source_indices, expected);
        let ActionSequence::JointSpace { frames } = &c.episode.actions else {
            unreachable!()
        };
        for (k, &i) in expected.iter().enumerate() {
            assert_eq!(frames[k].0[0], i as f64);
            assert_eq!(c.pointmaps.frames[k].coords[0][0], i as f32);
            assert_eq!(c.rgb[k].data[0][0], i as f32 / 255.0);
        }
    }

    #[test]
    fn rejects_mismatch_and_short() {
        assert!(matches!(
            curate_episode(&raw(100, 99, 100), &CurationOptions::default()),
            Err(CurationError::LengthMismatch(_))
        ));
        assert!(matches!(
            curate_episode(&raw(20, 20, 20), &CurationOptions::default()),
            Err(CurationError::TooShort { len: 20, target: 49 })
        ));
        let padded = CurationOptions {
            pad_short: true,
            ..Default::default()
        };
        assert_eq!(
            curate_episode(&raw(20, 20, 20), &padded).unwrap().episode.frame_count,
            49
        );
    }

    #[test]
    fn persistence_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let c = curate_episode(&raw(60, 60, 60), &CurationOptions::default()).unwrap();
        write_episode(&c, dir.path()).unwrap();
        c.episode.verify(dir.path()).unwrap();
        let manifest = dir.path().join(MANIFEST_FILE);
        append_manifest(&manifest, std::slice::from_ref(&c.episode)).unwrap();
        append_manifest(&manifest, std::slice::from_ref(&c.episode)).unwrap();
        assert_eq!(
            read_manifest(&manifest).unwrap(),
            vec![c.episode.clone(), c.episode.clone()]
        );

        // a curated directory reloads as a raw episode of the same frames
        let back = RawEpisode::load(&dir.path().join("ep0"), None).unwrap();
        assert_eq!(back.pointmaps, c.pointmaps);
        assert_eq!(back.rgb, c.rgb);
        assert_eq!(back.source, "droid");
    }
}
