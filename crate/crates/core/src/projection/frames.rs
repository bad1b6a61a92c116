//! Image-shaped frame containers, stored row-major.

use serde::{Deserialize, Serialize};

/// Coordinate stored at invalid pointmap pixels.
pub const INVALID: [f32; 3] = [0.0, 0.0, 0.0];

/// Binary per-pixel grid (occupancy, validity).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Camera-space `(x, y, z)` per pixel plus a validity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMapFrame {
    pub width: usize,
    pub height: usize,
    pub coords: Vec<[f32; 3]>,
    pub valid: Vec<bool>,
}

impl PointMapFrame {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            coords: vec![INVALID; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn get(&self, row: usize, col: usize) -> Option<[f32; 3]> {
        let i = self.index(row, col);
        self.valid[i].then_some(self.coords[i])
    }

    pub fn set(&mut self, row: usize, col: usize, p: [f32; 3]) {
        let i = self.index(row, col);
        self.coords[i] = p;
        self.valid[i] = true;
    }

    pub fn invalidate(&mut self, index: usize) {
        self.coords[index] = INVALID;
        self.valid[index] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }

    /// Indices of valid pixels in row-major order.
    pub fn valid_indices(&self) -> Vec<usize> {
        (0..self.valid.len()).filter(|&i| self.valid[i]).collect()
    }

    /// Coordinates of the valid pixels, as a point cloud.
    pub fn valid_points(&self) -> Vec<[f64; 3]> {
        self.coords
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .map(|(c, _)| c.map(f64::from))
            .collect()
    }

    pub fn validity(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.valid.clone(),
        }
    }
}

/// `T` pointmap frames of identical size.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointMapSequence {
    pub frames: Vec<PointMapFrame>,
}

impl PointMapSequence {
    pub fn new(frames: Vec<PointMapFrame>) -> Self {
        debug_assert!(frames
            .windows(2)
            .all(|w| (w[0].width, w[0].height) == (w[1].width, w[1].height)));
        Self { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(width, height)` of the frames, if any.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width, f.height))
    }

    pub fn valid_count(&self) -> usize {
        self.frames.iter().map(PointMapFrame::valid_count).sum()
    }
}

/// RGB per pixel, channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 3]>,
}

impl RgbFrame {
    pub fn black(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![rgb; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> [f32; 3] {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, rgb: [f32; 3]) {
        self.data[row * self.width + col] = rgb;
    }
}

/// Per-pixel depth `z` in meters plus a validity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f32>,
    pub valid: Vec<bool>,
}

/// Extracts the z channel of a pointmap; validity is copied unchanged.
pub fn depth_from_pointmap(frame: &PointMapFrame) -> DepthFrame {
    DepthFrame {
        width: frame.width,
        height: frame.height,
        depth: frame.coords.iter().map(|c| c[2]).collect(),
        valid: frame.valid.clone(),
    }
}
