//! Controlled failure trajectories from successful demonstrations.
//!
//! The trajectory is cut into `segments` equal parts by frame index (the
//! remainder goes to the last part). For every `(segment, σ)` pair, noise
//! starts at the segment's first frame and lasts to the end of the
//! trajectory. Gripper dimensions are copied unchanged.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CurationError;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// A fresh draw per frame is added to the running deviation, so the
    /// error accumulates as it would for executed actions.
    #[default]
    Delta,
    /// A fresh independent draw per frame, added to the source pose.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailureSynthesisConfig {
    pub sigmas: Vec<f64>,
    pub segments: usize,
    pub pose_dims: Vec<usize>,
    pub gripper_dims: Vec<usize>,
    pub mode: NoiseMode,
    pub seed: u64,
}

impl Default for FailureSynthesisConfig {
    fn default() -> Self {
        Self {
            sigmas: vec![0.5, 0.8, 1.2],
            segments: 3,
            pose_dims: (0..6).collect(),
            gripper_dims: vec![6],
            mode: NoiseMode::Delta,
            seed: 0,
        }
    }
}

impl FailureSynthesisConfig {
    pub fn check(&self) -> Result<(), CurationError> {
        let bad = |m: String| Err(CurationError::InvalidConfig(m));
        if self.sigmas.is_empty() {
            return bad("sigmas must be nonempty".into());
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return bad(format!("sigma {s} must be positive"));
        }
        if self.segments == 0 {
            return bad("segments must be positive".into());
        }
        if let Some(d) = self.pose_dims.iter().find(|d| self.gripper_dims.contains(d)) {
            return bad(format!("dimension {d} is both a pose and a gripper dimension"));
        }
        Ok(())
    }

    /// Drops pose and gripper dimensions that do not exist in `width`-wide
    /// action vectors, e.g. the gripper channel of an arm without a gripper.
    pub fn fit_width(&self, width: usize) -> Self {
        let keep = |dims: &[usize]| dims.iter().copied().filter(|&d| d < width).collect();
        Self {
            pose_dims: keep(&self.pose_dims),
            gripper_dims: keep(&self.gripper_dims),
            ..self.clone()
        }
    }

    /// First frame of each segment for a trajectory of `len` frames.
    pub fn segment_starts(&self, len: usize) -> Vec<usize> {
        let seg = len / self.segments;
        (0..self.segments).map(|s| s * seg).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureTrajectory {
    pub segment: usize,
    pub sigma: f64,
    pub start_frame: usize,
    pub frames: Vec<Vec<f64>>,
}

/// Returns `segments × |sigmas|` trajectories ordered by segment, then σ.
/// Output `k` draws from its own stream keyed by `(config.seed, k)`.
pub fn synthesize_failures(
    actions: &[Vec<f64>],
    config: &FailureSynthesisConfig,
) -> Result<Vec<FailureTrajectory>, CurationError> {
    config.check()?;
    if actions.len() < config.segments {
        return Err(CurationError::TooShort {
            len: actions.len(),
            target: config.segments,
        });
    }
    let width = actions[0].len();
    if let Some((t, a)) = actions.iter().enumerate().find(|(_, a)| a.len() != width) {
        return Err(CurationError::LengthMismatch(format!(
            "frame {t} has {} values, frame 0 has {width}",
            a.len()
        )));
    }
    if let Some(d) = config
        .pose_dims
        .iter()
        .chain(&config.gripper_dims)
        .find(|&&d| d >= width)
    {
        return Err(CurationError::InvalidConfig(format!(
            "dimension {d} out of range for {width}-vectors"
        )));
    }
    let starts = config.segment_starts(actions.len());
    let jobs: Vec<(usize, usize)> = (0..config.segments)
        .flat_map(|s| (0..config.sigmas.len()).map(move |k| (s, k)))
        .collect();
    Ok(jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(segment, k))| {
            let sigma = config.sigmas[k];
            let start = starts[segment];
            let normal = Normal::new(0.0, sigma).expect("sigma checked");
            let mut rng = rng::stream(config.seed, rng::stage::FAILURES, index as u64);
            let mut deviation = vec![0.0; config.pose_dims.len()];
            let mut frames = actions.to_vec();
            for frame in &mut frames[start..] {
                for (j, &d) in config.pose_dims.iter().enumerate() {
                    let draw = normal.sample(&mut rng);
                    let offset = match config.mode {
                        NoiseMode::Delta => {
                            deviation[j] += draw;
                            deviation[j]
                        }
                        NoiseMode::Absolute => draw,
                    };
                    frame[d] += offset;
                }
            }
            FailureTrajectory {
                segment,
                sigma,
                start_frame: start,
                frames,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo(len: usize) -> Vec<Vec<f64>> {
        (0..len)
            .map(|t| {
                let x = t as f64 * 0.01;
                vec![x, -x, 0.3, 0.1 * x, 0.0, 1.0, if t < len / 2 { 1.0 } else { -1.0 }]
            })
            .collect()
    }

    #[test]
    fn counts() {
        let a = demo(30);
        assert_eq!(
            synthesize_failures(&a, &FailureSynthesisConfig::default())
                .unwrap()
                .len(),
            9
        );
        let one = FailureSynthesisConfig {
            sigmas: vec![0.5],
            ..Default::default()
        };
        assert_eq!(synthesize_failures(&a, &one).unwrap().len(), 3);
        assert!(matches!(
            synthesize_failures(&demo(2), &FailureSynthesisConfig::default()),
            Err(CurationError::TooShort { len: 2, target: 3 })
        ));
    }

    #[test]
    fn gripper_untouched_and_prefix_clean() {
        let a = demo(31);
        let cfg = FailureSynthesisConfig::default();
        assert_eq!(cfg.segment_starts(31), vec![0, 10, 20]);
        for mode in [NoiseMode::Delta, NoiseMode::Absolute] {
            let cfg = FailureSynthesisConfig { mode, ..cfg.clone() };
            for f in synthesize_failures(&a, &cfg).unwrap() {
                for (t, (src, out)) in a.iter().zip(&f.frames).enumerate() {
                    assert_eq!(src[6].to_bits(), out[6].to_bits());
                    if t < f.start_frame {
                        assert_eq!(src, out);
                    } else {
                        assert!(src[..6].iter().zip(&out[..6]).any(|(x, y)| x != y));
                    }
                }
            }
        }
    }

    #[test]
    fn delta_accumulates() {
        let a = vec![vec![0.0; 7]; 3];
        let cfg = FailureSynthesisConfig {
            sigmas: vec![1.0],
            segments: 1,
            ..Default::default()
        };
        let d = synthesize_failures(&a, &cfg).unwrap();
        let abs = synthesize_failures(
            &a,
            &FailureSynthesisConfig {
                mode: NoiseMode::Absolute,
                ..cfg
            },
        )
        .unwrap();
        // same stream: delta frames are running sums of the absolute draws
        for k in 0..6 {
            let sum: f64 = abs[0].frames.iter().map(|f| f[k]).sum();
            assert!((d[0].frames[2][k] - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let a = demo(9);
        for cfg in [
            FailureSynthesisConfig {
                sigmas: vec![],
                ..Default::default()
            },
            FailureSynthesisConfig {
                sigmas: vec![0.0],
                ..Default::default()
            },
            FailureSynthesisConfig {
                gripper_dims: vec![5],
                ..Default::default()
            },
            FailureSynthesisConfig {
                pose_dims: vec![7],
                ..Default::default()
            },
        ] {
            assert!(synthesize_failures(&a, &cfg).is_err());
        }
    }

    #[test]
    fn fit_width_drops_missing_dims() {
        let six: Vec<Vec<f64>> = demo(12)
            .into_iter()
            .map(|mut f| {
                f.pop();
                f
            })
            .collect();
        let cfg = FailureSynthesisConfig::default();
        assert!(synthesize_failures(&six, &cfg).is_err());
        let fitted = cfg.fit_width(6);
        assert_eq!((fitted.pose_dims.len(), fitted.gripper_dims.len()), (6, 0));
        assert_eq!(synthesize_failures(&six, &fitted).unwrap().len(), 9);
        assert_eq!(cfg.fit_width(7), cfg);
    }
}
