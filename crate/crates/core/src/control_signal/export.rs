//! Pseudo-RGB export of normalized pointmaps, quantized to 8 bits per channel.
//!
//! Layout: `frame_00000.png`, `frame_00001.png`, … (8-bit RGBA, channel =
//! `round(255·v)` with x→R, y→G, z→B, alpha 255 on valid pixels and 0
//! elsewhere) plus `meta.json` holding the extrema and shape.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NormalizedPointMapSequence, SignalError};
use crate::image_io::{frame_file_name, quantize, read_png, write_png, Image8};
use crate::projection::PointMapFrame;

pub const PSEUDO_RGB_FORMAT: &str = "kinema-pseudo-rgb/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoRgbMeta {
    pub format: String,
    pub frame_count: usize,
    pub height: usize,
    pub width: usize,
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
    pub channel_order: String,
}

fn io_err(e: impl std::fmt::Display) -> SignalError {
    SignalError::IoFailure(e.to_string())
}

pub fn export_pseudo_rgb(norm: &NormalizedPointMapSequence, dir: &Path) -> Result<PseudoRgbMeta, SignalError> {
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let (width, height) = norm.frames.first().map_or((0, 0), |f| (f.width, f.height));
    for (t, f) in norm.frames.iter().enumerate() {
        let data = f
            .coords
            .iter()
            .zip(&f.valid)
            .flat_map(|(c, &v)| {
                if v {
                    [quantize(c[0]), quantize(c[1]), quantize(c[2]), 255]
                } else {
                    [0; 4]
                }
            })
            .collect();
        let img = Image8 {
            width: f.width,
            height: f.height,
            channels: 4,
            data,
        };
        write_png(&dir.join(frame_file_name(t)), &img).map_err(io_err)?;
    }
    let meta = PseudoRgbMeta {
        format: PSEUDO_RGB_FORMAT.to_string(),
        frame_count: norm.frames.len(),
        height,
        width,
        min: norm.min,
        max: norm.max,
        degenerate: norm.degenerate,
        channel_order: "xyz->rgb".to_string(),
    };
    std::fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&meta).map_err(io_err)?,
    )
    .map_err(io_err)?;
    Ok(meta)
}

/// Reads an export back; values are `byte / 255`.
pub fn import_pseudo_rgb(dir: &Path) -> Result<NormalizedPointMapSequence, SignalError> {
    let text = std::fs::read_to_string(dir.join("meta.json")).map_err(io_err)?;
    let meta: PseudoRgbMeta = serde_json::from_str(&text).map_err(io_err)?;
    let frames = (0..meta.frame_count)
        .map(|t| {
            let img = read_png(&dir.join(frame_file_name(t))).map_err(io_err)?;
            if img.channels != 4 || (img.width, img.height) != (meta.width, meta.height) {
                return Err(SignalError::ShapeMismatch(format!(
                    "frame {t}: {}×{}×{}, expected {}×{}×4",
                    img.width, img.height, img.channels, meta.width, meta.height
                )));
            }
            let mut f = PointMapFrame::empty(img.width, img.height);
            for (i, px) in img.data.chunks_exact(4).enumerate() {
                if px[3] != 0 {
                    f.coords[i] = [px[0], px[1], px[2]].map(|b| b as f32 / 255.0);
                    f.valid[i] = true;
                }
            }
            Ok(f)
        })
        .collect::<Result<_, _>>()?;
    Ok(NormalizedPointMapSequence {
        frames,
        min: meta.min,
        max: meta.max,
        degenerate: meta.degenerate,
    })
}
