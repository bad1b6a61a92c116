//! Toy robots, cameras and trajectories shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::{Path, PathBuf};

use kinema::kinematics::{ActionSequence, JointConfiguration, RigidTransform};
use kinema::projection::CameraModel;
use kinema::robot_model::{to_urdf, Joint, JointLimits, Link, RobotGeometry, RobotModel, Shape, DEFAULT_SEGMENTS};
use nalgebra::Vector3;

fn at_z(z: f64) -> RigidTransform {
    RigidTransform::from_translation(Vector3::new(0.0, 0.0, z))
}

/// Two unit links rotating about +z; the tip link sits at the end of link 2.
pub fn planar_2r() -> RobotModel {
    let x = |d: f64| RigidTransform::from_translation(Vector3::new(d, 0.0, 0.0));
    RobotModel::new(
        "planar_2r",
        vec![
            Link::new("base"),
            Link::new("link1"),
            Link::new("link2"),
            Link::new("tip"),
        ],
        vec![
            Joint::revolute("j1", "base", "link1", RigidTransform::identity(), Vector3::z(), None),
            Joint::revolute("j2", "link1", "link2", x(1.0), Vector3::z(), None),
            Joint::fixed("tip_joint", "link2", "tip", x(1.0)),
        ],
    )
    .expect("valid model")
}

/// Six revolute joints (yaw, pitch, pitch, roll, pitch, roll) on a 1 m tall
/// arm built from primitive visuals; the end effector is `tool`.
pub fn arm6() -> RobotModel {
    let limits = |l: f64| Some(JointLimits::new(-l, l));
    let links = vec![
        Link::new("base").with_visual(
            at_z(0.05),
            Shape::Cylinder {
                radius: 0.1,
                length: 0.1,
            },
        ),
        Link::new("shoulder").with_visual(
            at_z(0.05),
            Shape::Cylinder {
                radius: 0.06,
                length: 0.1,
            },
        ),
        Link::new("upper_arm").with_visual(
            at_z(0.2),
            Shape::Box {
                size: [0.08, 0.08, 0.4],
            },
        ),
        Link::new("forearm").with_visual(
            at_z(0.175),
            Shape::Cylinder {
                radius: 0.04,
                length: 0.35,
            },
        ),
        Link::new("wrist1").with_visual(RigidTransform::identity(), Shape::Sphere { radius: 0.045 }),
        Link::new("wrist2").with_visual(
            at_z(0.03),
            Shape::Cylinder {
                radius: 0.035,
                length: 0.06,
            },
        ),
        Link::new("tool").with_visual(
            at_z(0.03),
            Shape::Box {
                size: [0.1, 0.02, 0.06],
            },
        ),
    ];
    let y = Vector3::y();
    let z = Vector3::z();
    let joints = vec![
        Joint::revolute("j1", "base", "shoulder", at_z(0.1), z, limits(2.9)),
        Joint::revolute("j2", "shoulder", "upper_arm", at_z(0.1), y, limits(2.9)),
        Joint::revolute("j3", "upper_arm", "forearm", at_z(0.4), y, limits(2.6)),
        Joint::revolute("j4", "forearm", "wrist1", at_z(0.35), z, limits(2.9)),
        Joint::revolute("j5", "wrist1", "wrist2", at_z(0.06), y, limits(2.9)),
        Joint::revolute("j6", "wrist2", "tool", at_z(0.06), z, limits(2.9)),
    ];
    RobotModel::new("arm6", links, joints).expect("valid model")
}

pub fn arm6_geometry() -> RobotGeometry {
    RobotGeometry::load(&arm6(), DEFAULT_SEGMENTS, |f| {
        Err(std::io::Error::new(std::io::ErrorKind::NotFound, f.to_string()))
    })
    .expect("primitive geometry")
}

/// Camera 3 m in front of the arm (world -y), 0.5 m up, looking along +y
/// with image rows pointing down the world z axis.
pub fn front_camera(width: usize, height: usize) -> CameraModel {
    let f = 0.7 * width as f64;
    let extrinsics =
        RigidTransform::from_parts([0.0, 0.5, 3.0], [FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0]).expect("unit");
    CameraModel::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height, extrinsics).expect("valid camera")
}

/// Smooth joint-space sweep of `frames` configurations.
pub fn sweep(frames: usize) -> ActionSequence {
    let frames = (0..frames)
        .map(|t| {
            let s = t as f64 / frames.max(2) as f64;
            JointConfiguration(vec![
                -0.8 + 1.6 * s,
                0.3 * (3.0 * s).sin(),
                0.6 + 0.4 * s,
                0.5 * s,
                0.7 - 0.5 * s,
                1.2 * s,
            ])
        })
        .collect();
    ActionSequence::JointSpace { frames }
}

/// Writes `robot.urdf`, `camera.json` and `actions.json` for the arm.
pub struct Fixture {
    pub urdf: PathBuf,
    pub camera: PathBuf,
    pub actions: PathBuf,
}

pub fn write_fixture(dir: &Path, width: usize, height: usize, frames: usize) -> Fixture {
    std::fs::create_dir_all(dir).unwrap();
    let fx = Fixture {
        urdf: dir.join("robot.urdf"),
        camera: dir.join("camera.json"),
        actions: dir.join("actions.json"),
    };
    std::fs::write(&fx.urdf, to_urdf(&arm6())).unwrap();
    std::fs::write(&fx.camera, front_camera(width, height).to_json()).unwrap();
    sweep(frames).write(&fx.actions).unwrap();
    fx
}

pub fn arg(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}
