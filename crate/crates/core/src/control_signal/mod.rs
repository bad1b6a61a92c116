//! Conditioning signals derived from rendered robot sequences: soft
//! occupancy masks, sequence-normalized pointmaps, temporally extended world
//! images, width-concatenated frames, temporal downsampling and pointmap
//! perturbations.

mod export;
mod perturb;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::projection::{Mask, PointMapFrame, PointMapSequence, RgbFrame};
use crate::rng;

pub use export::{export_pseudo_rgb, import_pseudo_rgb, PseudoRgbMeta};
pub use perturb::{perturb, Perturbation, PerturbationSpec, MAX_DEFAULT_ROTATION_DEG, MAX_DEFAULT_SHIFT_PX};

/// Fraction of occupied pixels lowered to [`DEFAULT_SOFT_VALUE`].
pub const DEFAULT_SOFT_RATIO: f64 = 0.1;
pub const DEFAULT_SOFT_VALUE: f32 = 0.5;
/// Frames per curated episode.
pub const DEFAULT_TARGET_FRAMES: usize = 49;

#[derive(Debug, thiserror::Error)]
pub enum SignalError {
    #[error("sequence has no valid pixels")]
    EmptySequence,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sequence of {len} frames is shorter than the target {target}")]
    TooShort { len: usize, target: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("I/O: {0}")]
    IoFailure(String),
}

impl SignalError {
    pub fn kind(&self) -> &'static str {
        match self {
            SignalError::EmptySequence => "EmptySequence",
            SignalError::LengthMismatch(_) => "LengthMismatch",
            SignalError::ShapeMismatch(_) => "ShapeMismatch",
            SignalError::TooShort { .. } => "TooShort",
            SignalError::InvalidParameter(_) => "InvalidParameter",
            SignalError::IoFailure(_) => "IoFailure",
        }
    }
}

/// `T × H × W` mask with values in `{0, soft_value, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMaskSequence {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Vec<f32>>,
}

impl OccupancyMaskSequence {
    pub fn count_value(&self, frame: usize, value: f32) -> usize {
        self.frames[frame].iter().filter(|&&v| v == value).count()
    }
}

/// Softens a binary occupancy sequence: in every frame exactly
/// `round(soft_ratio · occupied)` occupied pixels, drawn uniformly, take
/// `soft_value`; the rest of the occupied pixels are 1, background is 0.
pub fn soft_mask(
    occupancy: &[Mask],
    soft_ratio: f64,
    soft_value: f32,
    seed: u64,
) -> Result<OccupancyMaskSequence, SignalError> {
    if !(0.0..=1.0).contains(&soft_ratio) {
        return Err(SignalError::InvalidParameter(format!(
            "soft_ratio {soft_ratio} outside [0, 1]"
        )));
    }
    let (width, height) = occupancy.first().map_or((0, 0), |m| (m.width, m.height));
    if occupancy.iter().any(|m| (m.width, m.height) != (width, height)) {
        return Err(SignalError::ShapeMismatch("occupancy frames differ in size".into()));
    }
    let frames = occupancy
        .par_iter()
        .enumerate()
        .map(|(t, m)| {
            let occupied: Vec<usize> = (0..m.data.len()).filter(|&i| m.data[i]).collect();
            let mut out: Vec<f32> = m.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let k = (soft_ratio * occupied.len() as f64).round() as usize;
            if k > 0 {
                let mut rng = rng::stream(seed, rng::stage::SOFT_MASK, t as u64);
                for i in index::sample(&mut rng, occupied.len(), k) {
                    out[occupied[i]] = soft_value;
                }
            }
            out
        })
        .collect();
    Ok(OccupancyMaskSequence { width, height, frames })
}

/// Pointmap sequence affinely mapped into `[0, 1]` by its global extrema.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPointMapSequence {
    pub frames: Vec<PointMapFrame>,
    pub min: f64,
    pub max: f64,
    /// All valid values were equal; every valid value maps to 0.5.
    pub degenerate: bool,
}

/// `v' = (v − min) / (max − min)` with min/max over every coordinate of every
/// valid pixel in the sequence. Invalid pixels are left untouched.
pub fn normalize_sequence(pm: &PointMapSequence) -> Result<NormalizedPointMapSequence, SignalError> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for f in &pm.frames {
        for (c, _) in f.coords.iter().zip(&f.valid).filter(|(_, &v)| v) {
            for &x in c {
                min = min.min(x as f64);
                max = max.max(x as f64);
            }
        }
    }
    if !min.is_finite() {
        return Err(SignalError::EmptySequence);
    }
    let degenerate = min == max;
    let span = max - min;
    let frames = pm
        .frames
        .iter()
        .map(|f| {
            let mut out = f.clone();
            for (c, _) in out.coords.iter_mut().zip(&f.valid).filter(|(_, &v)| v) {
                for x in c.iter_mut() {
                    *x = if degenerate {
                        0.5
                    } else {
                        ((*x as f64 - min) / span) as f32
                    };
                }
            }
            out
        })
        .collect();
    Ok(NormalizedPointMapSequence {
        frames,
        min,
        max,
        degenerate,
    })
}

/// Inverse of [`normalize_sequence`]; a degenerate sequence maps back to its
/// shared extremum.
pub fn denormalize(norm: &NormalizedPointMapSequence) -> PointMapSequence {
    let span = norm.max - norm.min;
    PointMapSequence::new(
        norm.frames
            .iter()
            .map(|f| {
                let mut out = f.clone();
                for (c, _) in out.coords.iter_mut().zip(&f.valid).filter(|(_, &v)| v) {
                    for x in c.iter_mut() {
                        *x = if norm.degenerate {
                            norm.min as f32
                        } else {
                            (norm.min + *x as f64 * span) as f32
                        };
                    }
                }
                out
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtendMode {
    ZeroPad,
    RobotRgb,
}

/// Extends the initial world image to `t` frames. Frame 0 is always the
/// world image; later frames are black (`ZeroPad`) or the robot RGB render
/// (`RobotRgb`, which accepts `t − 1` frames, or `t` frames whose first is
/// replaced by the world image).
pub fn extend_world_image(
    world: &RgbFrame,
    t: usize,
    mode: ExtendMode,
    robot_rgb: Option<&[RgbFrame]>,
) -> Result<Vec<RgbFrame>, SignalError> {
    if t == 0 {
        return Err(SignalError::InvalidParameter("T must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(t);
    out.push(world.clone());
    match (mode, robot_rgb) {
        (ExtendMode::ZeroPad, None) => {
            out.extend((1..t).map(|_| RgbFrame::black(world.width, world.height)));
        }
        (ExtendMode::RobotRgb, Some(robot)) => {
            let rest = if robot.len() + 1 == t {
                robot
            } else if robot.len() == t {
                &robot[1..]
            } else {
                return Err(SignalError::LengthMismatch(format!(
                    "{} robot frames for T = {t} (need {} or {t})",
                    robot.len(),
                    t - 1
                )));
            };
            if let Some(f) = rest.iter().find(|f| (f.width, f.height) != (world.width, world.height)) {
                return Err(SignalError::ShapeMismatch(format!(
                    "robot frame {}×{} vs world {}×{}",
                    f.width, f.height, world.width, world.height
                )));
            }
            out.extend(rest.iter().cloned());
        }
        (ExtendMode::ZeroPad, Some(_)) => {
            return Err(SignalError::LengthMismatch(
                "robot RGB frames given in zero_pad mode".into(),
            ))
        }
        (ExtendMode::RobotRgb, None) => {
            return Err(SignalError::LengthMismatch(
                "robot_rgb mode needs robot RGB frames".into(),
            ))
        }
    }
    Ok(out)
}

/// Frames of width `2W`: RGB on the left, the normalized pointmap as
/// pseudo-RGB (x→R, y→G, z→B, invalid pixels black) on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningSequence {
    pub frames: Vec<RgbFrame>,
}

pub fn pseudo_rgb(frame: &PointMapFrame) -> RgbFrame {
    RgbFrame {
        width: frame.width,
        height: frame.height,
        data: frame
            .coords
            .iter()
            .zip(&frame.valid)
            .map(|(c, &v)| if v { *c } else { [0.0; 3] })
            .collect(),
    }
}

pub fn concat_width(rgb: &[RgbFrame], pm: &NormalizedPointMapSequence) -> Result<ConditioningSequence, SignalError> {
    if rgb.len() != pm.frames.len() {
        return Err(SignalError::ShapeMismatch(format!(
            "{} RGB frames vs {} pointmap frames",
            rgb.len(),
            pm.frames.len()
        )));
    }
    let frames = rgb
        .iter()
        .zip(&pm.frames)
        .map(|(a, b)| {
            if (a.width, a.height) != (b.width, b.height) {
                return Err(SignalError::ShapeMismatch(format!(
                    "RGB {}×{} vs pointmap {}×{}",
                    a.width, a.height, b.width, b.height
                )));
            }
            let right = pseudo_rgb(b);
            let w = a.width;
            let mut data = Vec::with_capacity(2 * w * a.height);
            for row in 0..a.height {
                data.extend_from_slice(&a.data[row * w..(row + 1) * w]);
                data.extend_from_slice(&right.data[row * w..(row + 1) * w]);
            }
            Ok(RgbFrame {
                width: 2 * w,
                height: a.height,
                data,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(ConditioningSequence { frames })
}

/// Indices `⌊i·(T_in − 1)/(target − 1)⌋` for `i = 0..target`.
///
/// With `pad_short`, inputs shorter than `target` keep every frame and
/// repeat the last one.
pub fn downsample_indices(t_in: usize, target: usize, pad_short: bool) -> Result<Vec<usize>, SignalError> {
    if target == 0 {
        return Err(SignalError::InvalidParameter("target must be positive".into()));
    }
    if t_in == 0 {
        return Err(SignalError::TooShort { len: 0, target });
    }
    if t_in < target {
        if !pad_short {
            return Err(SignalError::TooShort { len: t_in, target });
        }
        return Ok((0..target).map(|i| i.min(t_in - 1)).collect());
    }
    if target == 1 {
        return Ok(vec![0]);
    }
    Ok((0..target).map(|i| i * (t_in - 1) / (target - 1)).collect())
}

/// Uniform temporal downsampling of any frame sequence.
pub fn downsample_temporal<T: Clone>(seq: &[T], target: usize, pad_short: bool) -> Result<Vec<T>, SignalError> {
    Ok(downsample_indices(seq.len(), target, pad_short)?
        .into_iter()
        .map(|i| seq[i].clone())
        .collect())
}
