//! Robot description: a kinematic tree of links and joints with attached
//! visual geometry, parsed from URDF.

mod geometry;
mod mesh;
mod urdf;

use std::collections::{HashMap, VecDeque};

use nalgebra::Vector3;
use serde::Serialize;

use crate::kinematics::RigidTransform;

pub use geometry::{resolve_mesh_path, GeometryError, LinkGeometry, RobotGeometry};
pub use mesh::{load_mesh, tessellate, MeshError, MeshFormat, TriangleMesh, DEFAULT_SEGMENTS};
pub use urdf::{parse_urdf, to_urdf};

/// Tolerance on `|axis| = 1` for articulated joints.
pub const AXIS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("kinematic cycle through link '{0}'")]
    KinematicCycle(String),
    #[error("joint '{joint}' has unknown type '{kind}'")]
    UnknownJointType { joint: String, kind: String },
    #[error("joint '{joint}' references undeclared link '{link}'")]
    MissingLink { joint: String, link: String },
    #[error("link '{0}' declared more than once")]
    DuplicateLink(String),
    #[error("joint '{0}' declared more than once")]
    DuplicateJoint(String),
    #[error("link '{link}' has more than one parent joint ('{first}', '{second}')")]
    MultipleParents {
        link: String,
        first: String,
        second: String,
    },
    #[error("links {0:?} are not connected to the root")]
    Disconnected(Vec<String>),
    #[error("robot has no links")]
    Empty,
    #[error("invalid attribute '{attribute}' on <{element}>: {reason}")]
    InvalidAttribute {
        element: String,
        attribute: String,
        reason: String,
    },
}

impl ModelError {
    /// Stable kind name for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::MalformedXml(_) => "MalformedXml",
            ModelError::KinematicCycle(_) => "KinematicCycle",
            ModelError::UnknownJointType { .. } => "UnknownJointType",
            ModelError::MissingLink { .. } => "MissingLink",
            ModelError::DuplicateLink(_) => "DuplicateLink",
            ModelError::DuplicateJoint(_) => "DuplicateJoint",
            ModelError::MultipleParents { .. } => "MultipleParents",
            ModelError::Disconnected(_) => "Disconnected",
            ModelError::Empty => "Empty",
            ModelError::InvalidAttribute { .. } => "InvalidAttribute",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Continuous,
    Prismatic,
    Fixed,
}

impl JointKind {
    pub fn from_urdf(s: &str) -> Option<Self> {
        match s {
            "revolute" => Some(JointKind::Revolute),
            "continuous" => Some(JointKind::Continuous),
            "prismatic" => Some(JointKind::Prismatic),
            "fixed" => Some(JointKind::Fixed),
            _ => None,
        }
    }

    pub fn as_urdf(&self) -> &'static str {
        match self {
            JointKind::Revolute => "revolute",
            JointKind::Continuous => "continuous",
            JointKind::Prismatic => "prismatic",
            JointKind::Fixed => "fixed",
        }
    }

    pub fn is_actuated(&self) -> bool {
        !matches!(self, JointKind::Fixed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimits {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.max(self.lower).min(self.upper)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    pub origin: RigidTransform,
    pub axis: Vector3<f64>,
    /// Absent for continuous joints and for joints declared without limits.
    pub limits: Option<JointLimits>,
}

impl Joint {
    pub fn fixed(name: &str, parent: &str, child: &str, origin: RigidTransform) -> Self {
        Self {
            name: name.to_string(),
            kind: JointKind::Fixed,
            parent: parent.to_string(),
            child: child.to_string(),
            origin,
            axis: Vector3::x(),
            limits: None,
        }
    }

    pub fn revolute(
        name: &str,
        parent: &str,
        child: &str,
        origin: RigidTransform,
        axis: Vector3<f64>,
        limits: Option<JointLimits>,
    ) -> Self {
        Self {
            name: name.to_string(),
            kind: JointKind::Revolute,
            parent: parent.to_string(),
            child: child.to_string(),
            origin,
            axis,
            limits,
        }
    }

    pub fn prismatic(
        name: &str,
        parent: &str,
        child: &str,
        origin: RigidTransform,
        axis: Vector3<f64>,
        limits: Option<JointLimits>,
    ) -> Self {
        Self {
            kind: JointKind::Prismatic,
            ..Self::revolute(name, parent, child, origin, axis, limits)
        }
    }

    /// Transform contributed by the joint's own motion at value `q`.
    pub fn motion(&self, q: f64) -> RigidTransform {
        match self.kind {
            JointKind::Fixed => RigidTransform::identity(),
            JointKind::Revolute | JointKind::Continuous => RigidTransform::from_axis_angle(&self.axis, q),
            JointKind::Prismatic => {
                let n = self.axis.norm();
                if n > 0.0 {
                    RigidTransform::from_translation(self.axis * (q / n))
                } else {
                    RigidTransform::identity()
                }
            }
        }
    }

    /// Clamps `q` into the joint limits; unlimited joints pass through.
    pub fn clamp(&self, q: f64) -> f64 {
        match (self.kind, self.limits) {
            (JointKind::Continuous, _) | (_, None) => q,
            (_, Some(l)) => l.clamp(q),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Mesh { filename: String, scale: [f64; 3] },
    Box { size: [f64; 3] },
    Cylinder { radius: f64, length: f64 },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryInstance {
    /// Pose of the shape in the link frame.
    pub origin: RigidTransform,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub visuals: Vec<GeometryInstance>,
}

impl Link {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            visuals: Vec::new(),
        }
    }

    pub fn with_visual(mut self, origin: RigidTransform, shape: Shape) -> Self {
        self.visuals.push(GeometryInstance { origin, shape });
        self
    }
}

/// A non-fatal finding about a model, naming the offending element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub element: String,
    pub message: String,
}

/// Parsed kinematic tree. Immutable after construction.
#[derive(Debug, Clone)]
pub struct RobotModel {
    name: String,
    links: Vec<Link>,
    joints: Vec<Joint>,
    root: usize,
    actuated: Vec<usize>,
    link_index: HashMap<String, usize>,
    /// Parent joint index of each link (`None` for the root).
    parent_joint: Vec<Option<usize>>,
    /// Joint indices ordered so that every joint comes after its parent's joint.
    topo_joints: Vec<usize>,
    warnings: Vec<String>,
}

impl RobotModel {
    /// Builds the tree and checks its structural invariants. Soft invariants
    /// (limit ordering, axis norm) are reported by [`RobotModel::validate`].
    pub fn new(name: &str, links: Vec<Link>, joints: Vec<Joint>) -> Result<Self, ModelError> {
        if links.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut link_index = HashMap::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateLink(l.name.clone()));
            }
        }
        let mut joint_names = HashMap::with_capacity(joints.len());
        let mut parent_joint: Vec<Option<usize>> = vec![None; links.len()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (ji, j) in joints.iter().enumerate() {
            if joint_names.insert(j.name.clone(), ji).is_some() {
                return Err(ModelError::DuplicateJoint(j.name.clone()));
            }
            let lookup = |link: &str| {
                link_index.get(link).copied().ok_or_else(|| ModelError::MissingLink {
                    joint: j.name.clone(),
                    link: link.to_string(),
                })
            };
            let p = lookup(&j.parent)?;
            let c = lookup(&j.child)?;
            if p == c {
                return Err(ModelError::KinematicCycle(j.child.clone()));
            }
            if let Some(prev) = parent_joint[c] {
                return Err(ModelError::MultipleParents {
                    link: j.child.clone(),
                    first: joints[prev].name.clone(),
                    second: j.name.clone(),
                });
            }
            parent_joint[c] = Some(ji);
            children[p].push(ji);
        }

        let roots: Vec<usize> = (0..links.len()).filter(|&i| parent_joint[i].is_none()).collect();
        let root = match roots.as_slice() {
            // every link has a parent: the parent chains must loop
            [] => return Err(ModelError::KinematicCycle(links[0].name.clone())),
            [r] => *r,
            [first, ..] => {
                // one tree is rooted at the first declared root; report the rest
                let mut reached = vec![false; links.len()];
                let mut queue = VecDeque::from([*first]);
                reached[*first] = true;
                while let Some(l) = queue.pop_front() {
                    for &ji in &children[l] {
                        let c = link_index[&joints[ji].child];
                        if !reached[c] {
                            reached[c] = true;
                            queue.push_back(c);
                        }
                    }
                }
                let stray = (0..links.len())
                    .filter(|&i| !reached[i])
                    .map(|i| links[i].name.clone())
                    .collect();
                return Err(ModelError::Disconnected(stray));
            }
        };

        // breadth-first from the root; anything unreached sits on a cycle
        let mut visited = vec![false; links.len()];
        let mut topo_joints = Vec::with_capacity(joints.len());
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(l) = queue.pop_front() {
            for &ji in &children[l] {
                let c = link_index[&joints[ji].child];
                if visited[c] {
                    return Err(ModelError::KinematicCycle(links[c].name.clone()));
                }
                visited[c] = true;
                topo_joints.push(ji);
                queue.push_back(c);
            }
        }
        if let Some(i) = visited.iter().position(|v| !v) {
            return Err(ModelError::KinematicCycle(links[i].name.clone()));
        }

        let actuated = joints
            .iter()
            .enumerate()
            .filter(|(_, j)| j.kind.is_actuated())
            .map(|(i, _)| i)
            .collect();

        Ok(Self {
            name: name.to_string(),
            links,
            joints,
            root,
            actuated,
            link_index,
            parent_joint,
            topo_joints,
            warnings: Vec::new(),
        })
    }

    pub(crate) fn with_warnings(mut self, warnings: Vec<String>) -> Self {
        self.warnings = warnings;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn root_link(&self) -> &str {
        &self.links[self.root].name
    }

    pub fn root_index(&self) -> usize {
        self.root
    }

    /// Names of the non-fixed joints in document order.
    pub fn actuated_order(&self) -> Vec<&str> {
        self.actuated.iter().map(|&i| self.joints[i].name.as_str()).collect()
    }

    /// Joint indices of the actuated joints, in configuration order.
    pub fn actuated_joint_indices(&self) -> &[usize] {
        &self.actuated
    }

    pub fn dof(&self) -> usize {
        self.actuated.len()
    }

    /// Unsupported elements skipped during parsing.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.link_index.get(name).copied()
    }

    pub fn link(&self, name: &str) -> Option<&Link> {
        self.link_index(name).map(|i| &self.links[i])
    }

    pub fn joint(&self, name: &str) -> Option<&Joint> {
        self.joints.iter().find(|j| j.name == name)
    }

    /// Index of a joint in [`RobotModel::joints`].
    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Position of a joint within the configuration vector.
    pub fn dof_index(&self, joint_name: &str) -> Option<usize> {
        self.actuated.iter().position(|&i| self.joints[i].name == joint_name)
    }

    pub fn parent_joint_of(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    /// Joints in an order where each joint follows the joint of its parent link.
    pub fn joints_topological(&self) -> &[usize] {
        &self.topo_joints
    }

    /// Joint indices from the root down to `link`.
    pub fn chain_to(&self, link: usize) -> Vec<usize> {
        let mut chain = Vec::new();
        let mut cur = link;
        while let Some(ji) = self.parent_joint[cur] {
            chain.push(ji);
            cur = self.link_index[&self.joints[ji].parent];
        }
        chain.reverse();
        chain
    }

    /// Links visited by a parent→child traversal from the root.
    pub fn traverse(&self) -> Vec<&str> {
        std::iter::once(self.root_link())
            .chain(self.topo_joints.iter().map(|&ji| self.joints[ji].child.as_str()))
            .collect()
    }

    /// Names of the links in the subtree rooted at `link` (inclusive).
    pub fn subtree<'a>(&'a self, link: &'a str) -> Vec<&'a str> {
        let mut out = vec![link];
        let mut i = 0;
        while i < out.len() {
            let cur = out[i];
            out.extend(self.joints.iter().filter(|j| j.parent == cur).map(|j| j.child.as_str()));
            i += 1;
        }
        out
    }

    /// Default configuration: mid-range of limits, 0 for unlimited joints.
    pub fn mid_configuration(&self) -> Vec<f64> {
        self.actuated
            .iter()
            .map(|&i| {
                let j = &self.joints[i];
                match (j.kind, j.limits) {
                    (JointKind::Continuous, _) | (_, None) => 0.0,
                    (_, Some(l)) => l.midpoint(),
                }
            })
            .collect()
    }

    /// Checks the soft invariants; an empty list means the model is valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for j in &self.joints {
            if !j.kind.is_actuated() {
                continue;
            }
            let n = j.axis.norm();
            if !n.is_finite() || (n - 1.0).abs() > AXIS_TOLERANCE {
                out.push(Diagnostic {
                    element: format!("joint:{}", j.name),
                    message: format!("axis norm is {n}, expected 1"),
                });
            }
            if let Some(l) = j.limits {
                if j.kind != JointKind::Continuous && !(l.lower <= l.upper) {
                    out.push(Diagnostic {
                        element: format!("joint:{}", j.name),
                        message: format!("lower limit {} exceeds upper limit {}", l.lower, l.upper),
                    });
                }
            }
            if (j.origin.quaternion_norm() - 1.0).abs() > AXIS_TOLERANCE {
                out.push(Diagnostic {
                    element: format!("joint:{}", j.name),
                    message: "origin rotation is not a unit quaternion".to_string(),
                });
            }
        }
        for l in &self.links {
            for (vi, v) in l.visuals.iter().enumerate() {
                let t = v.origin.translation();
                if (v.origin.quaternion_norm() - 1.0).abs() > AXIS_TOLERANCE || !t.iter().all(|x| x.is_finite()) {
                    out.push(Diagnostic {
                        element: format!("link:{}/visual[{vi}]", l.name),
                        message: "visual origin is not a valid rigid transform".to_string(),
                    });
                }
            }
        }
        out
    }
}

/// Free-function form of [`RobotModel::validate`].
pub fn validate(model: &RobotModel) -> Vec<Diagnostic> {
    model.validate()
}
