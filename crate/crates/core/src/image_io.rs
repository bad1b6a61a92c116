//! 8-bit PNG reading and writing for RGB frames.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::projection::RgbFrame;

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("PNG encode: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("PNG decode: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("unsupported PNG layout: {0}")]
    Layout(String),
}

/// Decoded 8-bit image with 3 (RGB) or 4 (RGBA) channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image8 {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

pub fn quantize(v: f32) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

pub fn write_png(path: &Path, image: &Image8) -> Result<(), ImageError> {
    let color = match image.channels {
        3 => png::ColorType::Rgb,
        4 => png::ColorType::Rgba,
        c => return Err(ImageError::Layout(format!("{c} channels"))),
    };
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, image.width as u32, image.height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(&image.data)?;
    writer.finish()?;
    Ok(())
}

pub fn read_png(path: &Path) -> Result<Image8, ImageError> {
    let decoder = png::Decoder::new(std::io::BufReader::new(File::open(path)?));
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::Layout(format!("bit depth {:?}", info.bit_depth)));
    }
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Grayscale => 1,
        other => return Err(ImageError::Layout(format!("{other:?}"))),
    };
    buf.truncate(info.buffer_size());
    Ok(Image8 {
        width: info.width as usize,
        height: info.height as usize,
        channels,
        data: buf,
    })
}

/// Writes an RGB frame as an 8-bit PNG (`round(255·v)` per channel).
pub fn write_rgb_png(path: &Path, frame: &RgbFrame) -> Result<(), ImageError> {
    let data = frame.data.iter().flat_map(|c| c.map(quantize)).collect();
    write_png(
        path,
        &Image8 {
            width: frame.width,
            height: frame.height,
            channels: 3,
            data,
        },
    )
}

/// Reads an 8-bit PNG into `[0, 1]` RGB; alpha is dropped, grey is replicated.
pub fn read_rgb_png(path: &Path) -> Result<RgbFrame, ImageError> {
    let img = read_png(path)?;
    let data = img
        .data
        .chunks_exact(img.channels)
        .map(|px| {
            let c = |k: usize| px[k.min(img.channels - 1)] as f32 / 255.0;
            if img.channels == 1 {
                [c(0); 3]
            } else {
                [c(0), c(1), c(2)]
            }
        })
        .collect();
    Ok(RgbFrame {
        width: img.width,
        height: img.height,
        data,
    })
}

/// Reads `frame_00000.png`, `frame_00001.png`, … from `dir` until one is missing.
pub fn read_rgb_dir(dir: &Path) -> Result<Vec<RgbFrame>, ImageError> {
    let mut frames = Vec::new();
    loop {
        let p = dir.join(frame_file_name(frames.len()));
        if !p.exists() {
            break;
        }
        frames.push(read_rgb_png(&p)?);
    }
    Ok(frames)
}

pub fn write_rgb_dir(dir: &Path, frames: &[RgbFrame]) -> Result<(), ImageError> {
    std::fs::create_dir_all(dir)?;
    for (t, f) in frames.iter().enumerate() {
        write_rgb_png(&dir.join(frame_file_name(t)), f)?;
    }
    Ok(())
}

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:05}.png")
}
