//! Binary tensor files for pointmap and mask sequences.
//!
//! Pointmap tensor (`*.kpm`), all integers and floats little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `KPM1` |
//! | 16 | `u32` T, H, W, C (= 3) |
//! | 4·T·H·W·3 | `f32` coordinates, order (t, row, col, channel) |
//! | ⌈T·H·W / 8⌉ | validity bitmask, pixel `k` in bit `k % 8` of byte `k / 8` |
//!
//! Mask tensor (`*.kmask`): magic `KMS1`, `u32` T, H, W, then `f32` values
//! in (t, row, col) order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CameraModel, PointMapFrame, PointMapSequence};

pub const POINTMAP_MAGIC: &[u8; 4] = b"KPM1";
pub const MASK_MAGIC: &[u8; 4] = b"KMS1";

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad tensor file: {0}")]
    Format(String),
    #[error("sidecar JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// JSON metadata written next to a pointmap tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMapSidecar {
    pub format: String,
    pub frame_count: usize,
    pub height: usize,
    pub width: usize,
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraModel>,
}

impl PointMapSidecar {
    pub fn new(seq: &PointMapSequence, camera: Option<&CameraModel>, units: &str) -> Self {
        let (width, height) = seq.dims().unwrap_or((0, 0));
        Self {
            format: "kinema-pointmap/1".to_string(),
            frame_count: seq.len(),
            height,
            width,
            units: units.to_string(),
            camera: camera.cloned(),
        }
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, TensorError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| TensorError::Format("truncated header".into()))
}

pub fn encode_pointmap(seq: &PointMapSequence) -> Vec<u8> {
    let (w, h) = seq.dims().unwrap_or((0, 0));
    let pixels = seq.len() * w * h;
    let mut out = Vec::with_capacity(20 + pixels * 12 + pixels.div_ceil(8));
    out.extend_from_slice(POINTMAP_MAGIC);
    for d in [seq.len(), h, w, 3] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for f in &seq.frames {
        for c in &f.coords {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let mut mask = vec![0u8; pixels.div_ceil(8)];
    for (k, &v) in seq.frames.iter().flat_map(|f| f.valid.iter()).enumerate() {
        if v {
            mask[k / 8] |= 1 << (k % 8);
        }
    }
    out.extend_from_slice(&mask);
    out
}

pub fn decode_pointmap(bytes: &[u8]) -> Result<PointMapSequence, TensorError> {
    if bytes.get(..4) != Some(POINTMAP_MAGIC) {
        return Err(TensorError::Format("missing KPM1 magic".into()));
    }
    let (t, h, w, c) = (
        read_u32(bytes, 4)? as usize,
        read_u32(bytes, 8)? as usize,
        read_u32(bytes, 12)? as usize,
        read_u32(bytes, 16)? as usize,
    );
    if c != 3 {
        return Err(TensorError::Format(format!("expected 3 channels, found {c}")));
    }
    let pixels = t * h * w;
    let expected = 20 + pixels * 12 + pixels.div_ceil(8);
    if bytes.len() != expected {
        return Err(TensorError::Format(format!(
            "expected {expected} bytes for ({t}, {h}, {w}, 3), found {}",
            bytes.len()
        )));
    }
    let data = &bytes[20..20 + pixels * 12];
    let mask = &bytes[20 + pixels * 12..];
    let frames = (0..t)
        .map(|ti| {
            let base = ti * h * w;
            let coords = (0..h * w)
                .map(|i| {
                    let o = (base + i) * 12;
                    let f = |k: usize| f32::from_le_bytes(data[o + 4 * k..o + 4 * k + 4].try_into().unwrap());
                    [f(0), f(1), f(2)]
                })
                .collect();
            let valid = (0..h * w)
                .map(|i| {
                    let k = base + i;
                    mask[k / 8] & (1 << (k % 8)) != 0
                })
                .collect();
            PointMapFrame {
                width: w,
                height: h,
                coords,
                valid,
            }
        })
        .collect();
    Ok(PointMapSequence::new(frames))
}

/// Writes `path` (tensor) and `path` with extension `.json` (sidecar).
pub fn write_pointmap_tensor(
    path: &Path,
    seq: &PointMapSequence,
    sidecar: &PointMapSidecar,
) -> Result<(), TensorError> {
    std::fs::write(path, encode_pointmap(seq))?;
    std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

/// Reads a tensor and, when present, its sidecar.
pub fn read_pointmap_tensor(path: &Path) -> Result<(PointMapSequence, Option<PointMapSidecar>), TensorError> {
    let seq = decode_pointmap(&std::fs::read(path)?)?;
    let sidecar_path = path.with_extension("json");
    let sidecar = if sidecar_path.exists() {
        Some(serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)?)
    } else {
        None
    };
    Ok((seq, sidecar))
}

/// Mask values per frame, each `height × width`, row-major.
pub fn write_mask_tensor(path: &Path, width: usize, height: usize, frames: &[Vec<f32>]) -> Result<(), TensorError> {
    let mut out = Vec::with_capacity(16 + frames.len() * width * height * 4);
    out.extend_from_slice(MASK_MAGIC);
    for d in [frames.len(), height, width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for f in frames {
        if f.len() != width * height {
            return Err(TensorError::Format(format!(
                "mask frame has {} values, expected {}",
                f.len(),
                width * height
            )));
        }
        for v in f {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Returns `(width, height, frames)`.
pub fn read_mask_tensor(path: &Path) -> Result<(usize, usize, Vec<Vec<f32>>), TensorError> {
    let bytes = std::fs::read(path)?;
    if bytes.get(..4) != Some(MASK_MAGIC) {
        return Err(TensorError::Format("missing KMS1 magic".into()));
    }
    let (t, h, w) = (
        read_u32(&bytes, 4)? as usize,
        read_u32(&bytes, 8)? as usize,
        read_u32(&bytes, 12)? as usize,
    );
    if bytes.len() != 16 + t * h * w * 4 {
        return Err(TensorError::Format("mask tensor size mismatch".into()));
    }
    let frames = bytes[16..]
        .chunks_exact(h * w * 4)
        .take(t)
        .map(|chunk| {
            chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect()
        })
        .collect();
    Ok((w, h, frames))
}
