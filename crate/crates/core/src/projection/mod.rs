//! Pinhole projection of posed link geometry into per-frame pointmaps,
//! occupancy masks, depth maps and RGB renders.
//!
//! A pixel `(row i, column j)` covers `[j, j+1) × [i, i+1)` in image
//! coordinates and is sampled at its center `(j + 0.5, i + 0.5)`.

mod frames;
mod io;
mod raster;

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::kinematics::RigidTransform;

pub use frames::{depth_from_pointmap, DepthFrame, Mask, PointMapFrame, PointMapSequence, RgbFrame, INVALID};
pub use io::{
    decode_pointmap, encode_pointmap, read_mask_tensor, read_pointmap_tensor, write_mask_tensor, write_pointmap_tensor,
    PointMapSidecar, TensorError, MASK_MAGIC, POINTMAP_MAGIC,
};
pub use raster::{
    rasterize_frame, rasterize_frame_with, render_sequence, FrameRender, RasterOptions, SequenceRender, UNTEXTURED_GREY,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProjectionError {
    #[error("point lies at or behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("depth must be positive, got {0}")]
    NonpositiveDepth(f64),
    #[error("no pose for link '{0}'")]
    MissingLinkPose(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

impl ProjectionError {
    pub fn kind(&self) -> &'static str {
        match self {
            ProjectionError::BehindCamera(_) => "BehindCamera",
            ProjectionError::NonpositiveDepth(_) => "NonpositiveDepth",
            ProjectionError::MissingLinkPose(_) => "MissingLinkPose",
            ProjectionError::InvalidCamera(_) => "InvalidCamera",
        }
    }
}

/// Pinhole camera. `extrinsics` maps world (reconstruction) coordinates
/// into the camera frame, whose +z axis looks into the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub extrinsics: RigidTransform,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        extrinsics: RigidTransform,
    ) -> Result<Self, ProjectionError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            extrinsics,
        };
        cam.check()?;
        Ok(cam)
    }

    pub fn check(&self) -> Result<(), ProjectionError> {
        let bad = |msg: String| Err(ProjectionError::InvalidCamera(msg));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad(format!("focal lengths must be positive ({}, {})", self.fx, self.fy));
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be nonzero".into());
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return bad(format!("cx = {} outside (0, {})", self.cx, self.width));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return bad(format!("cy = {} outside (0, {})", self.cy, self.height));
        }
        if (self.extrinsics.quaternion_norm() - 1.0).abs() > 1e-9 {
            return bad("extrinsics rotation is not a unit quaternion".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ProjectionError> {
        let cam: CameraModel = serde_json::from_str(text).map_err(|e| ProjectionError::InvalidCamera(e.to_string()))?;
        cam.check()?;
        Ok(cam)
    }

    pub fn read(path: &Path) -> Result<Self, ProjectionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProjectionError::InvalidCamera(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("camera serializes")
    }

    /// Projects a camera-frame point; `z` must be positive.
    pub fn project_camera_point(&self, p: &Vector3<f64>) -> Result<(f64, f64, f64), ProjectionError> {
        if !(p.z > 0.0) {
            return Err(ProjectionError::BehindCamera(p.z));
        }
        Ok((self.cx + self.fx * p.x / p.z, self.cy + self.fy * p.y / p.z, p.z))
    }

    /// Camera-frame point seen at sub-pixel `(u, v)` with depth `z`.
    pub fn unproject_camera(&self, u: f64, v: f64, z: f64) -> Result<Vector3<f64>, ProjectionError> {
        if !(z > 0.0) {
            return Err(ProjectionError::NonpositiveDepth(z));
        }
        Ok(Vector3::new(
            (u - self.cx) * z / self.fx,
            (v - self.cy) * z / self.fy,
            z,
        ))
    }
}

/// `[u·z, v·z, z]ᵀ = K · T_cam · x`: sub-pixel coordinates and depth of a
/// world point.
pub fn project_point(camera: &CameraModel, x_world: &Vector3<f64>) -> Result<(f64, f64, f64), ProjectionError> {
    camera.project_camera_point(&camera.extrinsics.transform_point(x_world))
}

/// World point that projects to `(u, v)` at depth `z`.
pub fn unproject(camera: &CameraModel, u: f64, v: f64, z: f64) -> Result<Vector3<f64>, ProjectionError> {
    let p = camera.unproject_camera(u, v, z)?;
    Ok(camera.extrinsics.inverse().transform_point(&p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cam() -> CameraModel {
        CameraModel::new(100.0, 100.0, 320.0, 240.0, 640, 480, RigidTransform::identity()).unwrap()
    }

    #[test]
    fn optical_axis() {
        let c = CameraModel::new(525.0, 500.0, 319.5, 239.5, 640, 480, RigidTransform::identity()).unwrap();
        assert_eq!(
            project_point(&c, &Vector3::new(0.0, 0.0, 1.0)).unwrap(),
            (319.5, 239.5, 1.0)
        );
    }

    #[test]
    fn worked_projection() {
        assert_eq!(
            project_point(&cam(), &Vector3::new(0.5, 0.0, 1.0)).unwrap(),
            (370.0, 240.0, 1.0)
        );
        assert_eq!(
            project_point(&cam(), &Vector3::new(0.0, 0.0, -1.0)),
            Err(ProjectionError::BehindCamera(-1.0))
        );
    }

    #[test]
    fn unproject_cases() {
        assert_eq!(
            unproject(&cam(), 320.0, 240.0, 2.0).unwrap(),
            Vector3::new(0.0, 0.0, 2.0)
        );
        assert_eq!(
            unproject(&cam(), 1.0, 1.0, 0.0),
            Err(ProjectionError::NonpositiveDepth(0.0))
        );
        let mut c = cam();
        c.extrinsics = RigidTransform::from_xyz_rpy([0.1, -0.2, 0.5], [0.2, -0.1, 0.3]);
        let x = Vector3::new(0.3, 0.1, 1.5);
        let (u, v, z) = project_point(&c, &x).unwrap();
        assert_relative_eq!(unproject(&c, u, v, z).unwrap(), x, epsilon = 1e-12);
    }

    #[test]
    fn camera_validation() {
        let id = RigidTransform::identity();
        assert!(CameraModel::new(0.0, 1.0, 1.0, 1.0, 4, 4, id).is_err());
        assert!(CameraModel::new(1.0, 1.0, 4.0, 1.0, 4, 4, id).is_err());
        assert!(CameraModel::new(1.0, 1.0, 1.0, 0.0, 4, 4, id).is_err());
        let json = r#"{"fx":100,"fy":100,"cx":320,"cy":240,"width":640,"height":480,
            "extrinsics":{"translation":[0,0,0],"quaternion":[1,0,0,0]}}"#;
        assert_eq!(CameraModel::from_json(json).unwrap(), cam());
        assert_eq!(CameraModel::from_json(&cam().to_json()).unwrap(), cam());
    }
}
