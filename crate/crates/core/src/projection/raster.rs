//! Triangle rasterization with a z-buffer.
//!
//! Triangles own the pixels whose centers they cover; centers lying exactly
//! on an edge go to one side only (top-left style tie rule). Attributes are
//! interpolated perspective-correctly, so a stored pointmap coordinate is
//! the exact ray/triangle intersection at the pixel center. Back faces are
//! kept: winding in robot meshes is not reliable.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::{CameraModel, Mask, PointMapFrame, PointMapSequence, ProjectionError, RgbFrame};
use crate::kinematics::{LinkPoseSequence, LinkPoses};
use crate::robot_model::RobotGeometry;

/// Color of geometry without per-vertex colors.
pub const UNTEXTURED_GREY: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterOptions {
    /// Near clipping plane in meters (camera z).
    pub near: f64,
    /// Rows per independently rasterized band.
    pub band_rows: usize,
}

impl Default for RasterOptions {
    fn default() -> Self {
        Self {
            near: 1e-4,
            band_rows: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRender {
    pub pointmap: PointMapFrame,
    /// Robot occupancy; equal to the pointmap validity grid.
    pub occupancy: Mask,
    pub rgb: Option<RgbFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRender {
    pub pointmaps: PointMapSequence,
    pub occupancy: Vec<Mask>,
    pub rgb: Option<Vec<RgbFrame>>,
}

#[derive(Clone, Copy)]
struct Vertex {
    cam: Vector3<f64>,
    color: [f64; 3],
}

struct ScreenTriangle {
    uv: [[f64; 2]; 3],
    cam: [Vector3<f64>; 3],
    inv_z: [f64; 3],
    color: [[f64; 3]; 3],
    area: f64,
    rows: (usize, usize),
    cols: (usize, usize),
}

fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Tie rule for centers exactly on edge `a → b`: an edge shared by two
/// triangles is traversed in opposite directions, so exactly one accepts.
fn owns_edge(a: [f64; 2], b: [f64; 2]) -> bool {
    let dv = b[1] - a[1];
    dv > 0.0 || (dv == 0.0 && b[0] - a[0] < 0.0)
}

fn clip_near(poly: &[Vertex; 3], near: f64) -> Vec<Vertex> {
    let mut out = Vec::with_capacity(4);
    for k in 0..3 {
        let a = poly[k];
        let b = poly[(k + 1) % 3];
        let a_in = a.cam.z >= near;
        let b_in = b.cam.z >= near;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (near - a.cam.z) / (b.cam.z - a.cam.z);
            let color: [f64; 3] = std::array::from_fn(|c| a.color[c] + t * (b.color[c] - a.color[c]));
            let mut cam = a.cam + (b.cam - a.cam) * t;
            cam.z = near;
            out.push(Vertex { cam, color });
        }
    }
    out
}

fn setup(camera: &CameraModel, v: [Vertex; 3]) -> Option<ScreenTriangle> {
    let mut v = v;
    let proj = |p: &Vector3<f64>| [camera.cx + camera.fx * p.x / p.z, camera.cy + camera.fy * p.y / p.z];
    let mut uv = [proj(&v[0].cam), proj(&v[1].cam), proj(&v[2].cam)];
    let mut area = edge(uv[0], uv[1], uv[2]);
    if !area.is_finite() || area == 0.0 {
        return None;
    }
    if area < 0.0 {
        v.swap(1, 2);
        uv.swap(1, 2);
        area = -area;
    }
    let (w, h) = (camera.width as f64, camera.height as f64);
    let umin = uv.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let umax = uv.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let vmin = uv.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let vmax = uv.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    // pixel k is sampled at k + 0.5
    let first = |lo: f64| (lo - 0.5).ceil().max(0.0);
    let last = |hi: f64, n: f64| (hi - 0.5).floor().min(n - 1.0);
    let (c0, c1) = (first(umin), last(umax, w));
    let (r0, r1) = (first(vmin), last(vmax, h));
    if c0 > c1 || r0 > r1 {
        return None;
    }
    Some(ScreenTriangle {
        uv,
        cam: [v[0].cam, v[1].cam, v[2].cam],
        inv_z: [1.0 / v[0].cam.z, 1.0 / v[1].cam.z, 1.0 / v[2].cam.z],
        color: [v[0].color, v[1].color, v[2].color],
        area,
        rows: (r0 as usize, r1 as usize),
        cols: (c0 as usize, c1 as usize),
    })
}

fn collect_triangles(
    geometry: &RobotGeometry,
    link_poses: &LinkPoses,
    camera: &CameraModel,
    near: f64,
) -> Result<Vec<ScreenTriangle>, ProjectionError> {
    let grey = [UNTEXTURED_GREY; 3];
    let mut tris = Vec::with_capacity(geometry.triangle_count());
    for lg in &geometry.links {
        let pose = link_poses
            .get(&lg.link)
            .ok_or_else(|| ProjectionError::MissingLinkPose(lg.link.clone()))?;
        let cam_from_link = camera.extrinsics.compose(pose);
        let mesh = &lg.mesh;
        let cam_pts: Vec<Vector3<f64>> = mesh.vertices.iter().map(|p| cam_from_link.transform_point(p)).collect();
        let color_of = |i: u32| mesh.colors.as_ref().map_or(grey, |c| c[i as usize]);
        for t in &mesh.triangles {
            let verts = t.map(|i| Vertex {
                cam: cam_pts[i as usize],
                color: color_of(i),
            });
            if verts.iter().all(|v| v.cam.z >= near) {
                tris.extend(setup(camera, verts));
                continue;
            }
            let poly = clip_near(&verts, near);
            for k in 1..poly.len().saturating_sub(1) {
                tris.extend(setup(camera, [poly[0], poly[k], poly[k + 1]]));
            }
        }
    }
    Ok(tris)
}

struct Band {
    coords: Vec<[f32; 3]>,
    valid: Vec<bool>,
    rgb: Vec<[f32; 3]>,
}

fn rasterize_band(tris: &[ScreenTriangle], width: usize, row_start: usize, row_end: usize, want_rgb: bool) -> Band {
    let n = (row_end - row_start) * width;
    let mut depth = vec![f64::INFINITY; n];
    let mut points = vec![Vector3::<f64>::zeros(); n];
    let mut colors = if want_rgb { vec![[0.0f64; 3]; n] } else { Vec::new() };
    for tri in tris {
        let r0 = tri.rows.0.max(row_start);
        let r1 = tri.rows.1.min(row_end - 1);
        if r0 > r1 {
            continue;
        }
        let [a, b, c] = tri.uv;
        let tie = [owns_edge(b, c), owns_edge(c, a), owns_edge(a, b)];
        for row in r0..=r1 {
            for col in tri.cols.0..=tri.cols.1 {
                let p = [col as f64 + 0.5, row as f64 + 0.5];
                let w = [edge(b, c, p), edge(c, a, p), edge(a, b, p)];
                if (0..3).any(|k| w[k] < 0.0 || (w[k] == 0.0 && !tie[k])) {
                    continue;
                }
                // screen-space barycentrics, then 1/z weighting
                let l = [w[0] / tri.area, w[1] / tri.area, w[2] / tri.area];
                let pw = [l[0] * tri.inv_z[0], l[1] * tri.inv_z[1], l[2] * tri.inv_z[2]];
                let sum = pw[0] + pw[1] + pw[2];
                let point = (tri.cam[0] * pw[0] + tri.cam[1] * pw[1] + tri.cam[2] * pw[2]) / sum;
                let i = (row - row_start) * width + col;
                if point.z < depth[i] {
                    depth[i] = point.z;
                    points[i] = point;
                    if want_rgb {
                        colors[i] = std::array::from_fn(|ch| {
                            (tri.color[0][ch] * pw[0] + tri.color[1][ch] * pw[1] + tri.color[2][ch] * pw[2]) / sum
                        });
                    }
                }
            }
        }
    }
    let valid: Vec<bool> = depth.iter().map(|d| d.is_finite()).collect();
    Band {
        coords: points
            .iter()
            .zip(&valid)
            .map(|(p, &v)| {
                if v {
                    [p.x as f32, p.y as f32, p.z as f32]
                } else {
                    super::INVALID
                }
            })
            .collect(),
        rgb: colors.iter().map(|c| c.map(|x| x.clamp(0.0, 1.0) as f32)).collect(),
        valid,
    }
}

/// Rasterizes every link's geometry at its pose into a single frame.
pub fn rasterize_frame(
    geometry: &RobotGeometry,
    link_poses: &LinkPoses,
    camera: &CameraModel,
    want_rgb: bool,
) -> Result<FrameRender, ProjectionError> {
    rasterize_frame_with(geometry, link_poses, camera, want_rgb, &RasterOptions::default())
}

/// [`rasterize_frame`] with explicit options. The result does not depend on
/// `band_rows`.
pub fn rasterize_frame_with(
    geometry: &RobotGeometry,
    link_poses: &LinkPoses,
    camera: &CameraModel,
    want_rgb: bool,
    options: &RasterOptions,
) -> Result<FrameRender, ProjectionError> {
    let (w, h) = (camera.width, camera.height);
    let tris = collect_triangles(geometry, link_poses, camera, options.near)?;
    let band_rows = options.band_rows.max(1);
    let bands: Vec<Band> = (0..h.div_ceil(band_rows))
        .into_par_iter()
        .map(|b| {
            let start = b * band_rows;
            rasterize_band(&tris, w, start, (start + band_rows).min(h), want_rgb)
        })
        .collect();

    let mut pointmap = PointMapFrame {
        width: w,
        height: h,
        coords: Vec::with_capacity(w * h),
        valid: Vec::with_capacity(w * h),
    };
    let mut rgb = want_rgb.then(|| RgbFrame {
        width: w,
        height: h,
        data: Vec::with_capacity(w * h),
    });
    for band in bands {
        pointmap.coords.extend(band.coords);
        pointmap.valid.extend(band.valid);
        if let Some(rgb) = rgb.as_mut() {
            rgb.data.extend(band.rgb);
        }
    }
    Ok(FrameRender {
        occupancy: pointmap.validity(),
        pointmap,
        rgb,
    })
}

/// Renders every frame of a pose sequence; frame `t` depends only on pose `t`.
pub fn render_sequence(
    geometry: &RobotGeometry,
    poses: &LinkPoseSequence,
    camera: &CameraModel,
    want_rgb: bool,
) -> Result<SequenceRender, ProjectionError> {
    let frames: Vec<FrameRender> = poses
        .frames
        .par_iter()
        .map(|p| rasterize_frame(geometry, p, camera, want_rgb))
        .collect::<Result<_, _>>()?;
    let mut pointmaps = Vec::with_capacity(frames.len());
    let mut occupancy = Vec::with_capacity(frames.len());
    let mut rgb = want_rgb.then(|| Vec::with_capacity(frames.len()));
    for f in frames {
        pointmaps.push(f.pointmap);
        occupancy.push(f.occupancy);
        if let (Some(seq), Some(frame)) = (rgb.as_mut(), f.rgb) {
            seq.push(frame);
        }
    }
    Ok(SequenceRender {
        pointmaps: PointMapSequence::new(pointmaps),
        occupancy,
        rgb,
    })
}
