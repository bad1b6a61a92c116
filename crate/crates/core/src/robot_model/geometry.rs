//! Per-link render geometry: every visual of a link resolved, scaled and
//! baked into the link frame as one triangle mesh.

use std::path::{Path, PathBuf};

use super::mesh::{load_mesh, tessellate, MeshError, MeshFormat, TriangleMesh};
use super::{RobotModel, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkGeometry {
    pub link: String,
    /// Link-frame mesh with visual origins and scales applied.
    pub mesh: TriangleMesh,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RobotGeometry {
    pub links: Vec<LinkGeometry>,
}

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("cannot read mesh '{filename}': {source}")]
    Io {
        filename: String,
        #[source]
        source: std::io::Error,
    },
    #[error("mesh '{filename}': {source}")]
    Mesh {
        filename: String,
        #[source]
        source: MeshError,
    },
}

/// Maps a URDF mesh URI onto a candidate path below `base`.
///
/// `package://pkg/rest` tries `base/pkg/rest` then `base/rest`;
/// `file://` prefixes are stripped; absolute paths are used as-is.
pub fn resolve_mesh_path(base: &Path, filename: &str) -> PathBuf {
    if let Some(rest) = filename.strip_prefix("package://") {
        let with_pkg = base.join(rest);
        if with_pkg.exists() {
            return with_pkg;
        }
        let without_pkg = rest.split_once('/').map(|(_, r)| r).unwrap_or(rest);
        return base.join(without_pkg);
    }
    let path = Path::new(filename.strip_prefix("file://").unwrap_or(filename));
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl RobotGeometry {
    /// Builds render geometry, reading mesh files through `read`.
    ///
    /// `read` receives the URDF file name verbatim; primitives are tessellated
    /// with `segments` subdivisions.
    pub fn load<F>(model: &RobotModel, segments: usize, mut read: F) -> Result<Self, GeometryError>
    where
        F: FnMut(&str) -> std::io::Result<Vec<u8>>,
    {
        let mut links = Vec::new();
        for link in model.links() {
            let mut mesh = TriangleMesh::default();
            for visual in &link.visuals {
                let (local, scale) = match &visual.shape {
                    Shape::Mesh { filename, scale } => {
                        let bytes = read(filename).map_err(|source| GeometryError::Io {
                            filename: filename.clone(),
                            source,
                        })?;
                        let wrap = |source| GeometryError::Mesh {
                            filename: filename.clone(),
                            source,
                        };
                        let format = MeshFormat::detect(filename, &bytes).map_err(wrap)?;
                        (load_mesh(&bytes, format).map_err(wrap)?, *scale)
                    }
                    primitive => (tessellate(primitive, segments).expect("primitive shape"), [1.0; 3]),
                };
                mesh.append(&local.transformed(scale, &visual.origin));
            }
            if !mesh.is_empty() {
                links.push(LinkGeometry {
                    link: link.name.clone(),
                    mesh,
                });
            }
        }
        Ok(Self { links })
    }

    /// Loads mesh files relative to `base` (see [`resolve_mesh_path`]).
    pub fn load_from_dir(model: &RobotModel, base: &Path, segments: usize) -> Result<Self, GeometryError> {
        Self::load(model, segments, |f| std::fs::read(resolve_mesh_path(base, f)))
    }

    pub fn triangle_count(&self) -> usize {
        self.links.iter().map(|l| l.mesh.triangles.len()).sum()
    }
}
