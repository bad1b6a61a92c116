//! Triangle meshes: OBJ and STL loaders plus tessellation of URDF primitives.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Vector3;

use super::Shape;
use crate::kinematics::RigidTransform;

/// Default number of segments around cylinders and spheres.
pub const DEFAULT_SEGMENTS: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt geometry: {0}")]
    CorruptGeometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    StlBinary,
    StlAscii,
}

impl MeshFormat {
    /// Guesses the format from a file name and, for STL, the leading bytes.
    pub fn detect(filename: &str, bytes: &[u8]) -> Result<Self, MeshError> {
        let ext = filename.rsplit('.').next().unwrap_or("").to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "stl" => {
                // binary files may also begin with "solid"; trust the size check first
                let binary_len = bytes
                    .get(80..84)
                    .map(|b| 84 + 50 * u32::from_le_bytes(b.try_into().unwrap()) as usize);
                if binary_len == Some(bytes.len()) {
                    Ok(MeshFormat::StlBinary)
                } else if bytes.trim_ascii_start().starts_with(b"solid") {
                    Ok(MeshFormat::StlAscii)
                } else {
                    Ok(MeshFormat::StlBinary)
                }
            }
            _ => Err(MeshError::UnsupportedFormat(filename.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    /// Optional per-vertex RGB in `[0, 1]`.
    pub colors: Option<Vec<[f64; 3]>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let mesh = Self {
            vertices,
            triangles,
            colors: None,
        };
        mesh.check()?;
        Ok(mesh)
    }

    pub fn with_colors(mut self, colors: Vec<[f64; 3]>) -> Result<Self, MeshError> {
        self.colors = Some(colors);
        self.check()?;
        Ok(self)
    }

    fn check(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(MeshError::CorruptGeometry(format!(
                "triangle {t:?} indexes past {n} vertices"
            )));
        }
        if let Some(c) = &self.colors {
            if c.len() != n {
                return Err(MeshError::CorruptGeometry(format!(
                    "{} colors for {n} vertices",
                    c.len()
                )));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Applies a per-axis scale, then a rigid transform, to every vertex.
    pub fn transformed(&self, scale: [f64; 3], transform: &RigidTransform) -> Self {
        let s = Vector3::from(scale);
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| transform.transform_point(&v.component_mul(&s)))
                .collect(),
            triangles: self.triangles.clone(),
            colors: self.colors.clone(),
        }
    }

    /// Appends another mesh, offsetting its indices.
    pub fn append(&mut self, other: &TriangleMesh) {
        let offset = self.vertices.len() as u32;
        // keep colors only if both sides have them
        match (&mut self.colors, &other.colors) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (None, _) if self.vertices.is_empty() => self.colors = other.colors.clone(),
            (c, _) => *c = None,
        }
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(
            other
                .triangles
                .iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
    }
}

/// Decodes mesh bytes. STL vertices are welded by exact coordinate match;
/// OBJ vertex order is preserved. Normals are discarded.
pub fn load_mesh(bytes: &[u8], format: MeshFormat) -> Result<TriangleMesh, MeshError> {
    match format {
        MeshFormat::Obj => load_obj(bytes),
        MeshFormat::StlBinary => load_stl_binary(bytes),
        MeshFormat::StlAscii => load_stl_ascii(bytes),
    }
}

#[derive(Default)]
struct Welder {
    index: HashMap<[u64; 3], u32>,
    vertices: Vec<Vector3<f64>>,
}

impl Welder {
    fn push(&mut self, v: [f64; 3]) -> u32 {
        // -0.0 and 0.0 are the same point
        let key = v.map(|x| if x == 0.0 { 0 } else { x.to_bits() });
        *self.index.entry(key).or_insert_with(|| {
            self.vertices.push(Vector3::from(v));
            (self.vertices.len() - 1) as u32
        })
    }
}

fn load_stl_binary(bytes: &[u8]) -> Result<TriangleMesh, MeshError> {
    if bytes.len() < 84 {
        return Err(MeshError::CorruptGeometry(format!(
            "binary STL is {} bytes, shorter than its 84-byte header",
            bytes.len()
        )));
    }
    let declared = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let body = &bytes[84..];
    if body.len() != declared * 50 {
        return Err(MeshError::CorruptGeometry(format!(
            "header declares {declared} facets but body holds {} bytes ({} facets)",
            body.len(),
            body.len() as f64 / 50.0
        )));
    }
    let mut welder = Welder::default();
    let mut triangles = Vec::with_capacity(declared);
    for facet in body.chunks_exact(50) {
        let f = |o: usize| f32::from_le_bytes(facet[o..o + 4].try_into().unwrap()) as f64;
        let mut tri = [0u32; 3];
        for (k, slot) in tri.iter_mut().enumerate() {
            let o = 12 + 12 * k;
            *slot = welder.push([f(o), f(o + 4), f(o + 8)]);
        }
        triangles.push(tri);
    }
    TriangleMesh::new(welder.vertices, triangles)
}

fn load_stl_ascii(bytes: &[u8]) -> Result<TriangleMesh, MeshError> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| MeshError::CorruptGeometry(format!("ASCII STL is not UTF-8: {e}")))?;
    let mut welder = Welder::default();
    let mut triangles = Vec::new();
    let mut pending: Vec<u32> = Vec::with_capacity(3);
    for (lineno, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("vertex") => {
                let coords: Vec<f64> = tok
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| MeshError::CorruptGeometry(format!("line {}: {e}", lineno + 1)))?;
                let [x, y, z] = coords[..] else {
                    return Err(MeshError::CorruptGeometry(format!(
                        "line {}: vertex needs 3 coordinates",
                        lineno + 1
                    )));
                };
                pending.push(welder.push([x, y, z]));
            }
            Some("endloop") => {
                if pending.len() != 3 {
                    return Err(MeshError::CorruptGeometry(format!(
                        "line {}: facet with {} vertices",
                        lineno + 1,
                        pending.len()
                    )));
                }
                triangles.push([pending[0], pending[1], pending[2]]);
                pending.clear();
            }
            _ => {}
        }
    }
    if !pending.is_empty() {
        return Err(MeshError::CorruptGeometry("unterminated facet".to_string()));
    }
    TriangleMesh::new(welder.vertices, triangles)
}

fn load_obj(bytes: &[u8]) -> Result<TriangleMesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| MeshError::CorruptGeometry(format!("OBJ is not UTF-8: {e}")))?;
    let mut vertices = Vec::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut triangles = Vec::new();
    let corrupt = |lineno: usize, msg: String| MeshError::CorruptGeometry(format!("line {}: {msg}", lineno + 1));
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let vals: Vec<f64> = tok
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| corrupt(lineno, e.to_string()))?;
                match vals.len() {
                    3 | 4 => {}
                    6 | 7 => colors.push([vals[3], vals[4], vals[5]]),
                    n => return Err(corrupt(lineno, format!("vertex with {n} values"))),
                }
                vertices.push(Vector3::new(vals[0], vals[1], vals[2]));
            }
            Some("f") => {
                let n = vertices.len() as i64;
                let idx: Vec<u32> = tok
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| corrupt(lineno, format!("bad index '{t}'")))?;
                        // 1-based, negative counts back from the latest vertex
                        let resolved = if i < 0 { n + i } else { i - 1 };
                        if resolved < 0 || resolved >= n {
                            return Err(corrupt(lineno, format!("index {i} out of range")));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(corrupt(lineno, "face with fewer than 3 vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let mesh = TriangleMesh::new(vertices, triangles)?;
    if colors.is_empty() {
        Ok(mesh)
    } else {
        mesh.with_colors(colors)
    }
}

/// Tessellates a primitive shape in its own frame. Mesh shapes yield `None`.
///
/// Box: centered, edge lengths `size`. Cylinder: axis along z, centered.
/// Sphere: latitude/longitude grid with `segments` longitudes.
pub fn tessellate(shape: &Shape, segments: usize) -> Option<TriangleMesh> {
    let segments = segments.max(3);
    let mesh = match *shape {
        Shape::Mesh { .. } => return None,
        Shape::Box { size } => {
            let h = Vector3::from(size) * 0.5;
            let vertices = (0..8)
                .map(|i| {
                    Vector3::new(
                        if i & 1 == 0 { -h.x } else { h.x },
                        if i & 2 == 0 { -h.y } else { h.y },
                        if i & 4 == 0 { -h.z } else { h.z },
                    )
                })
                .collect();
            let triangles = vec![
                [0, 2, 1],
                [1, 2, 3],
                [4, 5, 6],
                [5, 7, 6],
                [0, 1, 4],
                [1, 5, 4],
                [2, 6, 3],
                [3, 6, 7],
                [0, 4, 2],
                [2, 4, 6],
                [1, 3, 5],
                [3, 7, 5],
            ];
            TriangleMesh {
                vertices,
                triangles,
                colors: None,
            }
        }
        Shape::Cylinder { radius, length } => {
            let n = segments as u32;
            let hz = 0.5 * length;
            let mut vertices = Vec::with_capacity(2 * segments + 2);
            for z in [-hz, hz] {
                for k in 0..segments {
                    let a = 2.0 * PI * k as f64 / segments as f64;
                    vertices.push(Vector3::new(radius * a.cos(), radius * a.sin(), z));
                }
            }
            vertices.push(Vector3::new(0.0, 0.0, -hz));
            vertices.push(Vector3::new(0.0, 0.0, hz));
            let (bc, tc) = (2 * n, 2 * n + 1);
            let mut triangles = Vec::with_capacity(4 * segments);
            for k in 0..n {
                let k1 = (k + 1) % n;
                triangles.push([k, k1, n + k]);
                triangles.push([k1, n + k1, n + k]);
                triangles.push([bc, k1, k]);
                triangles.push([tc, n + k, n + k1]);
            }
            TriangleMesh {
                vertices,
                triangles,
                colors: None,
            }
        }
        Shape::Sphere { radius } => {
            let rings = (segments / 2).max(2);
            let n = segments as u32;
            let mut vertices = vec![Vector3::new(0.0, 0.0, radius)];
            for r in 1..rings {
                let theta = PI * r as f64 / rings as f64;
                for k in 0..segments {
                    let phi = 2.0 * PI * k as f64 / segments as f64;
                    vertices.push(Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()) * radius);
                }
            }
            vertices.push(Vector3::new(0.0, 0.0, -radius));
            let south = vertices.len() as u32 - 1;
            let ring = |r: u32, k: u32| 1 + r * n + (k % n);
            let mut triangles = Vec::new();
            for k in 0..n {
                triangles.push([0, ring(0, k), ring(0, k + 1)]);
            }
            for r in 0..(rings as u32 - 2) {
                for k in 0..n {
                    triangles.push([ring(r, k), ring(r + 1, k), ring(r + 1, k + 1)]);
                    triangles.push([ring(r, k), ring(r + 1, k + 1), ring(r, k + 1)]);
                }
            }
            let last = rings as u32 - 2;
            for k in 0..n {
                triangles.push([south, ring(last, k + 1), ring(last, k)]);
            }
            TriangleMesh {
                vertices,
                triangles,
                colors: None,
            }
        }
    };
    Some(mesh)
}
