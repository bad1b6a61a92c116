//! Action sequences and their JSON file format.
//!
//! ```json
//! {"mode": "joint", "frames": [[0.0, 0.1], ...]}
//! {"mode": "ee", "ee_link": "tool0",
//!  "frames": [{"translation": [x, y, z], "quaternion": [w, x, y, z]}, ...],
//!  "gripper": [0.0, ...], "gripper_joints": ["finger"], "initial": [...]}
//! {"mode": "joint_velocity", "dt": 0.1, "initial": [...], "frames": [[...], ...]}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{JointConfiguration, RigidTransform};

#[derive(Debug, thiserror::Error)]
pub enum ActionsError {
    #[error("cannot read actions: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid actions JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("frame index {index} out of range for {len} frames")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Control input `a_{1:T}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum ActionSequence {
    #[serde(rename = "joint")]
    JointSpace { frames: Vec<JointConfiguration> },
    #[serde(rename = "ee")]
    EndEffector {
        ee_link: String,
        frames: Vec<RigidTransform>,
        /// Per-frame gripper command, applied to `gripper_joints` when the
        /// model has them and carried along otherwise.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gripper: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        gripper_joints: Vec<String>,
        /// Seed for the first frame's IK.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<JointConfiguration>,
    },
    #[serde(rename = "joint_velocity")]
    JointVelocity {
        dt: f64,
        initial: JointConfiguration,
        frames: Vec<Vec<f64>>,
    },
}

impl ActionSequence {
    pub fn len(&self) -> usize {
        match self {
            ActionSequence::JointSpace { frames } => frames.len(),
            ActionSequence::EndEffector { frames, .. } => frames.len(),
            ActionSequence::JointVelocity { frames, .. } => frames.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> &'static str {
        match self {
            ActionSequence::JointSpace { .. } => "joint",
            ActionSequence::EndEffector { .. } => "ee",
            ActionSequence::JointVelocity { .. } => "joint_velocity",
        }
    }

    /// Keeps the frames at `indices`, in order.
    ///
    /// Velocity sequences are first integrated (without limits) into joint
    /// positions, since dropping velocity samples would change the path.
    pub fn select(&self, indices: &[usize]) -> Result<ActionSequence, ActionsError> {
        let len = self.len();
        if let Some(&index) = indices.iter().find(|&&i| i >= len) {
            return Err(ActionsError::IndexOutOfRange { index, len });
        }
        Ok(match self {
            ActionSequence::JointSpace { frames } => ActionSequence::JointSpace {
                frames: indices.iter().map(|&i| frames[i].clone()).collect(),
            },
            ActionSequence::EndEffector {
                ee_link,
                frames,
                gripper,
                gripper_joints,
                initial,
            } => ActionSequence::EndEffector {
                ee_link: ee_link.clone(),
                frames: indices.iter().map(|&i| frames[i]).collect(),
                gripper: gripper
                    .as_ref()
                    .map(|g| indices.iter().filter_map(|&i| g.get(i).copied()).collect()),
                gripper_joints: gripper_joints.clone(),
                initial: initial.clone(),
            },
            ActionSequence::JointVelocity { dt, initial, frames } => {
                let mut q = initial.values().to_vec();
                let positions: Vec<JointConfiguration> = frames
                    .iter()
                    .map(|v| {
                        for (qi, vi) in q.iter_mut().zip(v) {
                            *qi += vi * dt;
                        }
                        JointConfiguration(q.clone())
                    })
                    .collect();
                ActionSequence::JointSpace {
                    frames: indices.iter().map(|&i| positions[i].clone()).collect(),
                }
            }
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ActionsError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("actions serialize")
    }

    pub fn read(path: &Path) -> Result<Self, ActionsError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), ActionsError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
