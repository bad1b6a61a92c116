//! Forward/inverse kinematics and expansion of action sequences into
//! full-body link pose sequences.

mod actions;
mod transform;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::robot_model::{JointKind, RobotModel};

pub use actions::{ActionSequence, ActionsError};
pub use transform::{rotation_log, NonUnitQuaternion, RigidTransform, UNIT_QUATERNION_TOLERANCE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, found {found}")]
    DofMismatch { expected: usize, found: usize },
    #[error("unknown link '{0}'")]
    UnknownLink(String),
    #[error("time step must be positive, got {0}")]
    NonpositiveDt(f64),
    #[error("end-effector actions need an end-effector link")]
    MissingEeLink,
    #[error("action sequence is empty")]
    EmptyActions,
    #[error("invalid IK parameters: {0}")]
    InvalidParams(String),
}

impl KinematicsError {
    pub fn kind(&self) -> &'static str {
        match self {
            KinematicsError::DofMismatch { .. } => "DofMismatch",
            KinematicsError::UnknownLink(_) => "UnknownLink",
            KinematicsError::NonpositiveDt(_) => "NonpositiveDt",
            KinematicsError::MissingEeLink => "MissingEeLink",
            KinematicsError::EmptyActions => "EmptyActions",
            KinematicsError::InvalidParams(_) => "InvalidParams",
        }
    }
}

/// Joint values aligned with [`RobotModel::actuated_order`]; radians for
/// revolute/continuous joints, meters for prismatic ones.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfiguration(pub Vec<f64>);

impl JointConfiguration {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dof: usize) -> Self {
        Self(vec![0.0; dof])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for JointConfiguration {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Pose of every link, keyed by link name.
pub type LinkPoses = BTreeMap<String, RigidTransform>;

/// Per-frame link poses in the canonical (reconstruction) frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkPoseSequence {
    pub frames: Vec<LinkPoses>,
}

impl LinkPoseSequence {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn link_count(&self) -> usize {
        self.frames.first().map_or(0, BTreeMap::len)
    }
}

fn check_dof(model: &RobotModel, found: usize) -> Result<(), KinematicsError> {
    if found != model.dof() {
        return Err(KinematicsError::DofMismatch {
            expected: model.dof(),
            found,
        });
    }
    Ok(())
}

/// Link poses indexed like [`RobotModel::links`], plus the world pose of
/// every joint frame (parent pose ∘ joint origin), indexed like the joints.
fn fk_indexed(model: &RobotModel, q: &[f64]) -> (Vec<RigidTransform>, Vec<RigidTransform>) {
    let joints = model.joints();
    let mut dof_of_joint = vec![None; joints.len()];
    for (k, &ji) in model.actuated_joint_indices().iter().enumerate() {
        dof_of_joint[ji] = Some(k);
    }
    let mut link_pose = vec![RigidTransform::identity(); model.links().len()];
    let mut joint_frame = vec![RigidTransform::identity(); joints.len()];
    for &ji in model.joints_topological() {
        let j = &joints[ji];
        let parent = model.link_index(&j.parent).expect("validated tree");
        let child = model.link_index(&j.child).expect("validated tree");
        let frame = link_pose[parent].compose(&j.origin);
        let value = dof_of_joint[ji].map_or(0.0, |k| q[k]);
        link_pose[child] = frame.compose(&j.motion(value));
        joint_frame[ji] = frame;
    }
    (link_pose, joint_frame)
}

/// Pose of every link for configuration `q`; the root link sits at identity.
pub fn forward_kinematics(model: &RobotModel, q: &JointConfiguration) -> Result<LinkPoses, KinematicsError> {
    check_dof(model, q.len())?;
    let (poses, _) = fk_indexed(model, q.values());
    Ok(model
        .links()
        .iter()
        .zip(poses)
        .map(|(l, p)| (l.name.clone(), p))
        .collect())
}

fn ee_index(model: &RobotModel, ee_link: &str) -> Result<usize, KinematicsError> {
    model
        .link_index(ee_link)
        .ok_or_else(|| KinematicsError::UnknownLink(ee_link.to_string()))
}

fn jacobian_indexed(model: &RobotModel, ee: usize, q: &[f64]) -> (DMatrix<f64>, RigidTransform) {
    let (poses, frames) = fk_indexed(model, q);
    let ee_pose = poses[ee];
    let p_ee = ee_pose.translation();
    let mut jac = DMatrix::zeros(6, model.dof());
    let chain = model.chain_to(ee);
    for (k, &ji) in model.actuated_joint_indices().iter().enumerate() {
        if !chain.contains(&ji) {
            continue;
        }
        let j = &model.joints()[ji];
        let n = j.axis.norm();
        if n == 0.0 {
            continue;
        }
        // the joint motion leaves its own axis invariant, so the axis in the
        // world is the joint frame applied to the local axis
        let axis = frames[ji].transform_vector(&(j.axis / n));
        let (lin, ang) = match j.kind {
            JointKind::Revolute | JointKind::Continuous => {
                let origin = frames[ji].translation();
                (axis.cross(&(p_ee - origin)), axis)
            }
            JointKind::Prismatic => (axis, Vector3::zeros()),
            JointKind::Fixed => unreachable!("fixed joints are not actuated"),
        };
        jac.fixed_view_mut::<3, 1>(0, k).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, k).copy_from(&ang);
    }
    (jac, ee_pose)
}

/// Geometric Jacobian of `ee_link`: rows 0..3 map joint rates to the linear
/// velocity of the link origin, rows 3..6 to angular velocity, both in the
/// root frame. Columns follow the configuration order.
pub fn jacobian(model: &RobotModel, ee_link: &str, q: &JointConfiguration) -> Result<DMatrix<f64>, KinematicsError> {
    check_dof(model, q.len())?;
    let ee = ee_index(model, ee_link)?;
    Ok(jacobian_indexed(model, ee, q.values()).0)
}

/// Stacked `[translation; rotation-log]` error taking `current` onto `target`.
pub fn pose_error(target: &RigidTransform, current: &RigidTransform) -> Vector6<f64> {
    let dp = target.translation() - current.translation();
    let dr = rotation_log(&(target.rotation() * current.rotation().inverse()));
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    pub damping: f64,
    pub max_iterations: usize,
    pub position_tolerance: f64,
    pub rotation_tolerance: f64,
    pub step_scale: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: 1e-3,
            max_iterations: 100,
            position_tolerance: 1e-4,
            rotation_tolerance: 1e-3,
            step_scale: 1.0,
        }
    }
}

impl IkParams {
    pub fn check(&self) -> Result<(), KinematicsError> {
        let positive = [
            ("damping", self.damping),
            ("position_tolerance", self.position_tolerance),
            ("rotation_tolerance", self.rotation_tolerance),
            ("step_scale", self.step_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(KinematicsError::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_iterations == 0 {
            return Err(KinematicsError::InvalidParams("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub q: JointConfiguration,
    pub converged: bool,
    /// Remaining translation error in meters.
    pub position_residual: f64,
    /// Remaining rotation error in radians.
    pub rotation_residual: f64,
    pub iterations: usize,
}

fn residuals(e: &Vector6<f64>) -> (f64, f64) {
    (e.fixed_rows::<3>(0).norm(), e.fixed_rows::<3>(3).norm())
}

/// Damped least-squares IK seeded at `seed`.
///
/// Each iteration solves `Δq = Jᵀ (J Jᵀ + λ² I)⁻¹ e` on the 6-D pose error,
/// halving the step while the error grows, and clamps to joint limits. The
/// best iterate is returned whether or not it converged.
pub fn inverse_kinematics(
    model: &RobotModel,
    ee_link: &str,
    target: &RigidTransform,
    seed: &JointConfiguration,
    params: &IkParams,
) -> Result<IkSolution, KinematicsError> {
    check_dof(model, seed.len())?;
    params.check()?;
    let ee = ee_index(model, ee_link)?;
    let joints = model.joints();
    let actuated = model.actuated_joint_indices();
    let converged = |e: &Vector6<f64>| {
        let (p, r) = residuals(e);
        p < params.position_tolerance && r < params.rotation_tolerance
    };
    let error_at = |q: &[f64]| pose_error(target, &fk_indexed(model, q).0[ee]);

    let mut q: Vec<f64> = seed.values().to_vec();
    let mut e = error_at(&q);
    let mut best = (q.clone(), e, 0usize);
    if converged(&e) {
        let (p, r) = residuals(&e);
        return Ok(IkSolution {
            q: seed.clone(),
            converged: true,
            position_residual: p,
            rotation_residual: r,
            iterations: 0,
        });
    }

    let lambda_sq = params.damping * params.damping;
    for iter in 1..=params.max_iterations {
        let (jac, _) = jacobian_indexed(model, ee, &q);
        let jjt: Matrix6<f64> =
            (&jac * jac.transpose()).fixed_view::<6, 6>(0, 0).into_owned() + Matrix6::identity() * lambda_sq;
        let Some(chol) = jjt.cholesky() else {
            break;
        };
        let y = chol.solve(&e);
        let dq: DVector<f64> = jac.transpose() * DVector::from_column_slice(y.as_slice());

        let mut step = params.step_scale;
        let mut candidate;
        let mut e_candidate;
        let mut halvings = 0;
        loop {
            candidate = q
                .iter()
                .zip(dq.iter())
                .zip(actuated)
                .map(|((qi, di), &ji)| joints[ji].clamp(qi + step * di))
                .collect::<Vec<_>>();
            e_candidate = error_at(&candidate);
            if e_candidate.norm() < e.norm() || halvings >= 8 {
                break;
            }
            step *= 0.5;
            halvings += 1;
        }
        q = candidate;
        e = e_candidate;
        if e.norm() < best.1.norm() {
            best = (q.clone(), e, iter);
        }
        if converged(&e) {
            break;
        }
    }

    let (q, e, iterations) = best;
    let (p, r) = residuals(&e);
    Ok(IkSolution {
        q: JointConfiguration(q),
        converged: converged(&e),
        position_residual: p,
        rotation_residual: r,
        iterations,
    })
}

/// A joint value pushed back inside its limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampEvent {
    pub frame: usize,
    pub joint: String,
    pub requested: f64,
    pub clamped: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Integration {
    pub configurations: Vec<JointConfiguration>,
    pub clamp_events: Vec<ClampEvent>,
}

/// Forward-Euler integration `q_t = clamp(q_{t-1} + v_t·dt)`.
pub fn integrate_velocities(
    model: &RobotModel,
    initial: &JointConfiguration,
    velocities: &[Vec<f64>],
    dt: f64,
) -> Result<Integration, KinematicsError> {
    check_dof(model, initial.len())?;
    if !(dt > 0.0) {
        return Err(KinematicsError::NonpositiveDt(dt));
    }
    let joints = model.joints();
    let actuated = model.actuated_joint_indices();
    let mut out = Integration::default();
    let mut q = initial.values().to_vec();
    for (t, v) in velocities.iter().enumerate() {
        check_dof(model, v.len())?;
        for (k, &ji) in actuated.iter().enumerate() {
            let requested = q[k] + v[k] * dt;
            let clamped = joints[ji].clamp(requested);
            if clamped != requested {
                out.clamp_events.push(ClampEvent {
                    frame: t,
                    joint: joints[ji].name.clone(),
                    requested,
                    clamped,
                });
            }
            q[k] = clamped;
        }
        out.configurations.push(JointConfiguration(q.clone()));
    }
    Ok(out)
}

/// Outcome of IK for one frame of an end-effector trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameIkReport {
    pub frame: usize,
    pub converged: bool,
    pub position_residual: f64,
    pub rotation_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expansion {
    pub poses: LinkPoseSequence,
    pub joints: Vec<JointConfiguration>,
    /// One entry per frame for end-effector actions, empty otherwise.
    pub ik: Vec<FrameIkReport>,
    pub clamp_events: Vec<ClampEvent>,
}

impl Expansion {
    /// Frames whose IK did not reach tolerance.
    pub fn diverged_frames(&self) -> Vec<usize> {
        self.ik.iter().filter(|r| !r.converged).map(|r| r.frame).collect()
    }
}

/// Resolves a joint configuration per frame, then runs FK on every frame.
///
/// End-effector frames are solved sequentially, each seeded by the previous
/// solution; the first frame is seeded by the sequence's `initial`
/// configuration or, failing that, the mid-range of the joint limits.
pub fn expand_trajectory(
    model: &RobotModel,
    actions: &ActionSequence,
    params: &IkParams,
) -> Result<Expansion, KinematicsError> {
    if actions.is_empty() {
        return Err(KinematicsError::EmptyActions);
    }
    let mut ik = Vec::new();
    let mut clamp_events = Vec::new();
    let joints: Vec<JointConfiguration> = match actions {
        ActionSequence::JointSpace { frames } => {
            for f in frames {
                check_dof(model, f.len())?;
            }
            frames.clone()
        }
        ActionSequence::JointVelocity { dt, initial, frames } => {
            let integ = integrate_velocities(model, initial, frames, *dt)?;
            clamp_events = integ.clamp_events;
            integ.configurations
        }
        ActionSequence::EndEffector {
            ee_link,
            frames,
            gripper,
            gripper_joints,
            initial,
        } => {
            if ee_link.is_empty() {
                return Err(KinematicsError::MissingEeLink);
            }
            let mut seed = match initial {
                Some(q) => {
                    check_dof(model, q.len())?;
                    q.clone()
                }
                None => JointConfiguration(model.mid_configuration()),
            };
            let gripper_dofs: Vec<usize> = gripper_joints.iter().filter_map(|name| model.dof_index(name)).collect();
            let mut out = Vec::with_capacity(frames.len());
            for (t, target) in frames.iter().enumerate() {
                let sol = inverse_kinematics(model, ee_link, target, &seed, params)?;
                ik.push(FrameIkReport {
                    frame: t,
                    converged: sol.converged,
                    position_residual: sol.position_residual,
                    rotation_residual: sol.rotation_residual,
                    iterations: sol.iterations,
                });
                if !sol.converged {
                    log::warn!(
                        "frame {t}: IK diverged (residual {:.3e} m, {:.3e} rad)",
                        sol.position_residual,
                        sol.rotation_residual
                    );
                }
                let mut q = sol.q;
                if let Some(g) = gripper.as_ref().and_then(|g| g.get(t)) {
                    for &k in &gripper_dofs {
                        let ji = model.actuated_joint_indices()[k];
                        q.0[k] = model.joints()[ji].clamp(*g);
                    }
                }
                seed = q.clone();
                out.push(q);
            }
            out
        }
    };

    let frames = joints
        .par_iter()
        .map(|q| forward_kinematics(model, q))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Expansion {
        poses: LinkPoseSequence { frames },
        joints,
        ik,
        clamp_events,
    })
}

/// Left-multiplies every pose by `calibration` (base frame → reconstruction frame).
pub fn apply_base_calibration(calibration: &RigidTransform, poses: &LinkPoseSequence) -> LinkPoseSequence {
    LinkPoseSequence {
        frames: poses
            .frames
            .iter()
            .map(|f| f.iter().map(|(k, p)| (k.clone(), calibration.compose(p))).collect())
            .collect(),
    }
}
