//! Python bindings for the `kinema` crate.
//!
//! Poses cross the boundary as `(translation [x, y, z], quaternion [w, x, y, z])`
//! tuples, images as nested `[row][col][rgb]` lists in `[0, 1]`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

use kinema::control_signal::{self, Perturbation, PerturbationSpec};
use kinema::curation::{self, FailureSynthesisConfig};
use kinema::kinematics::{self, IkParams, JointConfiguration, LinkPoseSequence, RigidTransform};
use kinema::metrics::{self, ChamferOrder, PointCloud};
use kinema::projection::{self, PointMapSequence, PointMapSidecar, RgbFrame};
use kinema::robot_model::{self, RobotGeometry, DEFAULT_SEGMENTS};

type Pose = ([f64; 3], [f64; 4]);
/// `(segment, sigma, start_frame, frames)`.
type Failure = (usize, f64, usize, Vec<Vec<f64>>);

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pose_of(t: &RigidTransform) -> Pose {
    (t.translation_array(), t.quaternion_wxyz())
}

fn transform((translation, wxyz): Pose) -> PyResult<RigidTransform> {
    RigidTransform::from_parts(translation, wxyz).map_err(err)
}

/// Kinematic tree parsed from URDF.
#[pyclass(name = "RobotModel", module = "kinema_py", frozen)]
struct PyRobotModel {
    inner: robot_model::RobotModel,
    mesh_dir: Option<PathBuf>,
}

#[pymethods]
impl PyRobotModel {
    #[staticmethod]
    fn from_urdf(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: robot_model::parse_urdf(text).map_err(err)?,
            mesh_dir: None,
        })
    }

    /// Reads a URDF file; mesh references resolve against its directory.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(err)?;
        Ok(Self {
            inner: robot_model::parse_urdf(&text).map_err(err)?,
            mesh_dir: path.parent().map(PathBuf::from),
        })
    }

    fn to_urdf(&self) -> String {
        robot_model::to_urdf(&self.inner)
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn dof(&self) -> usize {
        self.inner.dof()
    }

    #[getter]
    fn root_link(&self) -> &str {
        self.inner.root_link()
    }

    /// Actuated joints in configuration order.
    #[getter]
    fn joint_names(&self) -> Vec<String> {
        self.inner.actuated_order().into_iter().map(String::from).collect()
    }

    #[getter]
    fn link_names(&self) -> Vec<String> {
        self.inner.links().iter().map(|l| l.name.clone()).collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings().to_vec()
    }

    fn mid_configuration(&self) -> Vec<f64> {
        self.inner.mid_configuration()
    }

    /// Link name to pose for configuration `q`.
    fn fk(&self, q: Vec<f64>) -> PyResult<BTreeMap<String, Pose>> {
        let poses = kinematics::forward_kinematics(&self.inner, &JointConfiguration(q)).map_err(err)?;
        Ok(poses.iter().map(|(k, v)| (k.clone(), pose_of(v))).collect())
    }

    /// 6 × dof geometric Jacobian (linear rows first) as nested lists.
    fn jacobian(&self, ee_link: &str, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = kinematics::jacobian(&self.inner, ee_link, &JointConfiguration(q)).map_err(err)?;
        Ok((0..6).map(|r| j.row(r).iter().copied().collect()).collect())
    }

    /// Returns `(q, converged, position_residual, rotation_residual, iterations)`.
    #[pyo3(signature = (ee_link, target, seed, damping=1e-3, max_iterations=100, position_tolerance=1e-4, rotation_tolerance=1e-3))]
    #[allow(clippy::too_many_arguments)]
    fn ik(
        &self,
        ee_link: &str,
        target: Pose,
        seed: Vec<f64>,
        damping: f64,
        max_iterations: usize,
        position_tolerance: f64,
        rotation_tolerance: f64,
    ) -> PyResult<(Vec<f64>, bool, f64, f64, usize)> {
        let params = IkParams {
            damping,
            max_iterations,
            position_tolerance,
            rotation_tolerance,
            ..IkParams::default()
        };
        let sol = kinematics::inverse_kinematics(
            &self.inner,
            ee_link,
            &transform(target)?,
            &JointConfiguration(seed),
            &params,
        )
        .map_err(err)?;
        Ok((
            sol.q.0,
            sol.converged,
            sol.position_residual,
            sol.rotation_residual,
            sol.iterations,
        ))
    }
}

/// Pinhole camera; `extrinsics` maps world points into the camera frame.
#[pyclass(name = "Camera", module = "kinema_py", frozen)]
struct PyCamera {
    inner: projection::CameraModel,
}

#[pymethods]
impl PyCamera {
    #[new]
    #[pyo3(signature = (fx, fy, cx, cy, width, height, extrinsics=None))]
    fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        extrinsics: Option<Pose>,
    ) -> PyResult<Self> {
        let ext = extrinsics
            .map(transform)
            .transpose()?
            .unwrap_or_else(RigidTransform::identity);
        Ok(Self {
            inner: projection::CameraModel::new(fx, fy, cx, cy, width, height, ext).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: projection::CameraModel::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn size(&self) -> (usize, usize) {
        (self.inner.width, self.inner.height)
    }

    /// World point to `(u, v, z)`.
    fn project(&self, point: [f64; 3]) -> PyResult<(f64, f64, f64)> {
        projection::project_point(&self.inner, &point.into()).map_err(err)
    }

    fn unproject(&self, u: f64, v: f64, z: f64) -> PyResult<[f64; 3]> {
        Ok(projection::unproject(&self.inner, u, v, z).map_err(err)?.into())
    }
}

/// Sequence of per-pixel 3D coordinate frames with validity.
#[pyclass(name = "PointMaps", module = "kinema_py", frozen)]
struct PyPointMaps {
    inner: PointMapSequence,
}

#[pymethods]
impl PyPointMaps {
    /// Renders `model` at each configuration in `frames`.
    #[staticmethod]
    fn render(model: &PyRobotModel, camera: &PyCamera, frames: Vec<Vec<f64>>) -> PyResult<Self> {
        let poses = frames
            .into_iter()
            .map(|q| kinematics::forward_kinematics(&model.inner, &JointConfiguration(q)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let base = model.mesh_dir.clone().unwrap_or_default();
        let geometry = RobotGeometry::load_from_dir(&model.inner, &base, DEFAULT_SEGMENTS).map_err(err)?;
        let render = projection::render_sequence(&geometry, &LinkPoseSequence { frames: poses }, &camera.inner, false)
            .map_err(err)?;
        Ok(Self {
            inner: render.pointmaps,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: projection::read_pointmap_tensor(&path).map_err(err)?.0,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let sidecar = PointMapSidecar::new(&self.inner, None, "meters");
        projection::write_pointmap_tensor(&path, &self.inner, &sidecar).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(width, height)` of the frames.
    #[getter]
    fn size(&self) -> Option<(usize, usize)> {
        self.inner.dims()
    }

    fn valid_counts(&self) -> Vec<usize> {
        self.inner.frames.iter().map(|f| f.valid_count()).collect()
    }

    /// Valid points of frame `t` in row-major order.
    fn points(&self, t: usize) -> PyResult<Vec<[f64; 3]>> {
        let frame = self
            .inner
            .frames
            .get(t)
            .ok_or_else(|| PyIndexError::new_err(format!("frame {t} of {}", self.inner.len())))?;
        Ok(frame.valid_points())
    }

    /// Applies a perturbation written as `remove:0.05`, `gaussian:0.01`,
    /// `translate:3,-2` or `rotate:2`.
    #[pyo3(signature = (spec, seed=0, allow_large=false))]
    fn perturb(&self, spec: &str, seed: u64, allow_large: bool) -> PyResult<Self> {
        let perturbation: Perturbation = spec.parse().map_err(err)?;
        let spec = PerturbationSpec {
            perturbation,
            seed,
            allow_large,
        };
        spec.check().map_err(err)?;
        Ok(Self {
            inner: control_signal::perturb(&self.inner, &spec).map_err(err)?,
        })
    }

    /// Per-frame flat row-major soft masks: 0 background, `soft_value` on a
    /// `soft_ratio` share of occupied pixels, 1 elsewhere.
    #[pyo3(signature = (soft_ratio=0.1, soft_value=0.5, seed=0))]
    fn soft_mask(&self, soft_ratio: f64, soft_value: f32, seed: u64) -> PyResult<Vec<Vec<f32>>> {
        let occupancy: Vec<_> = self.inner.frames.iter().map(|f| f.validity()).collect();
        Ok(control_signal::soft_mask(&occupancy, soft_ratio, soft_value, seed)
            .map_err(err)?
            .frames)
    }

    /// Min-max normalized copy plus `(min, max, degenerate)`.
    fn normalize(&self) -> PyResult<(Self, (f64, f64, bool))> {
        let n = control_signal::normalize_sequence(&self.inner).map_err(err)?;
        let stats = (n.min, n.max, n.degenerate);
        Ok((
            Self {
                inner: PointMapSequence::new(n.frames),
            },
            stats,
        ))
    }

    /// Keeps `target` frames at `floor(i·(T−1)/(target−1))`.
    #[pyo3(signature = (target=49, pad_short=false))]
    fn downsample(&self, target: usize, pad_short: bool) -> PyResult<Self> {
        let frames = control_signal::downsample_temporal(&self.inner.frames, target, pad_short).map_err(err)?;
        Ok(Self {
            inner: PointMapSequence::new(frames),
        })
    }
}

fn cloud(points: Vec<[f64; 3]>) -> PointCloud {
    PointCloud::new(points)
}

fn image(rows: Vec<Vec<[f32; 3]>>) -> PyResult<RgbFrame> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("image rows have different lengths"));
    }
    Ok(RgbFrame {
        width,
        height,
        data: rows.into_iter().flatten().collect(),
    })
}

/// Symmetric Chamfer distance; `order` is `"l1"` (distances) or `"l2"` (squared).
#[pyfunction]
#[pyo3(signature = (a, b, order="l1"))]
fn chamfer(a: Vec<[f64; 3]>, b: Vec<[f64; 3]>, order: &str) -> PyResult<f64> {
    let order = match order {
        "l1" | "L1" => ChamferOrder::L1,
        "l2" | "L2" => ChamferOrder::L2,
        other => return Err(PyValueError::new_err(format!("unknown order '{other}'"))),
    };
    metrics::chamfer(&cloud(a), &cloud(b), order).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, tau=metrics::DEFAULT_FSCORE_TAU))]
fn fscore(a: Vec<[f64; 3]>, b: Vec<[f64; 3]>, tau: f64) -> PyResult<f64> {
    metrics::fscore(&cloud(a), &cloud(b), tau).map_err(err)
}

/// PSNR with peak 1; `inf` for identical images.
#[pyfunction]
fn psnr(a: Vec<Vec<[f32; 3]>>, b: Vec<Vec<[f32; 3]>>) -> PyResult<f64> {
    metrics::psnr(&image(a)?, &image(b)?).map_err(err)
}

#[pyfunction]
fn ssim(a: Vec<Vec<[f32; 3]>>, b: Vec<Vec<[f32; 3]>>) -> PyResult<f64> {
    metrics::ssim(&image(a)?, &image(b)?).map_err(err)
}

/// Returns `(rate_sim, rate_real, |rate_sim − rate_real|)`.
#[pyfunction]
fn success_rate_diff(sim: Vec<bool>, real: Vec<bool>) -> PyResult<(f64, f64, f64)> {
    let r = metrics::success_rate_diff(&sim, &real).map_err(err)?;
    Ok((r.rate_sim, r.rate_real, r.diff))
}

#[pyfunction]
#[pyo3(signature = (t_in, target=49, pad_short=false))]
fn downsample_indices(t_in: usize, target: usize, pad_short: bool) -> PyResult<Vec<usize>> {
    control_signal::downsample_indices(t_in, target, pad_short).map_err(err)
}

/// Noisy copies of a demonstration, as `(segment, sigma, start_frame, frames)`.
/// Dimensions beyond the action width are ignored.
#[pyfunction]
#[pyo3(signature = (actions, sigmas=None, segments=3, seed=0))]
fn synthesize_failures(
    actions: Vec<Vec<f64>>,
    sigmas: Option<Vec<f64>>,
    segments: usize,
    seed: u64,
) -> PyResult<Vec<Failure>> {
    let mut cfg = FailureSynthesisConfig {
        segments,
        seed,
        ..Default::default()
    };
    if let Some(s) = sigmas {
        cfg.sigmas = s;
    }
    let width = actions.first().map_or(0, Vec::len);
    Ok(curation::synthesize_failures(&actions, &cfg.fit_width(width))
        .map_err(err)?
        .into_iter()
        .map(|f| (f.segment, f.sigma, f.start_frame, f.frames))
        .collect())
}

#[pymodule]
fn kinema_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRobotModel>()?;
    m.add_class::<PyCamera>()?;
    m.add_class::<PyPointMaps>()?;
    m.add_function(wrap_pyfunction!(chamfer, m)?)?;
    m.add_function(wrap_pyfunction!(fscore, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(success_rate_diff, m)?)?;
    m.add_function(wrap_pyfunction!(downsample_indices, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_failures, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
