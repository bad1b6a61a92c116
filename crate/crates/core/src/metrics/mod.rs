//! Geometric and image metrics.
//!
//! Chamfer distance uses the halved symmetric mean
//! `½·[mean_{p∈a} d(p, b) + mean_{q∈b} d(q, a)]` with `d` the nearest
//! neighbour distance (L1 order) or its square (L2 order).

mod image;
mod kdtree;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::projection::{PointMapFrame, PointMapSequence};

pub use image::{psnr, psnr_sequence, ssim, ssim_sequence, MAX_VALUE, SSIM_SIGMA, SSIM_WINDOW};
pub use kdtree::{dist2, KdTree};
pub use report::{evaluate, EvalInputs, MetricReport, MetricValue, Units, CHAMFER_CONVENTION};

/// Default F-score threshold, in the units of the clouds.
pub const DEFAULT_FSCORE_TAU: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("input is empty")]
    EmptyInput,
    #[error("at least 2 frames are needed, got {0}")]
    TooFewFrames(usize),
    #[error("frame {0} has no valid pixels")]
    EmptyFrame(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("frame {width}×{height} is smaller than the {window}×{window} window")]
    FrameTooSmall { width: usize, height: usize, window: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl MetricsError {
    pub fn kind(&self) -> &'static str {
        match self {
            MetricsError::EmptyCloud => "EmptyCloud",
            MetricsError::EmptyInput => "EmptyInput",
            MetricsError::TooFewFrames(_) => "TooFewFrames",
            MetricsError::EmptyFrame(_) => "EmptyFrame",
            MetricsError::ShapeMismatch(_) => "ShapeMismatch",
            MetricsError::FrameTooSmall { .. } => "FrameTooSmall",
            MetricsError::InvalidParameter(_) => "InvalidParameter",
        }
    }
}

/// Unordered 3-d points with a nearest-neighbour index.
pub struct PointCloud {
    points: Vec<[f64; 3]>,
    tree: KdTree,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        let tree = KdTree::new(&points);
        Self { points, tree }
    }

    /// Points of the valid pixels.
    pub fn from_frame(frame: &PointMapFrame) -> Self {
        Self::new(frame.valid_points())
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance from `q` to its nearest neighbour in the cloud.
    pub fn nearest_dist2(&self, q: &[f64; 3]) -> f64 {
        self.tree.nearest_dist2(q)
    }
}

impl std::fmt::Debug for PointCloud {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointCloud").field("len", &self.points.len()).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChamferOrder {
    L1,
    L2,
}

/// Mean over `from` of the nearest-neighbour distance into `to`.
fn directed(from: &PointCloud, to: &PointCloud, order: ChamferOrder) -> f64 {
    let per: Vec<f64> = from
        .points
        .par_iter()
        .map(|p| {
            let d2 = to.nearest_dist2(p);
            match order {
                ChamferOrder::L1 => d2.sqrt(),
                ChamferOrder::L2 => d2,
            }
        })
        .collect();
    per.iter().sum::<f64>() / per.len() as f64
}

pub fn chamfer(a: &PointCloud, b: &PointCloud, order: ChamferOrder) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    Ok(0.5 * (directed(a, b, order) + directed(b, a, order)))
}

/// Harmonic mean of precision (share of `a` within `tau` of `b`) and
/// recall (share of `b` within `tau` of `a`); 0 when both are 0.
pub fn fscore(a: &PointCloud, b: &PointCloud, tau: f64) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    if !(tau > 0.0) {
        return Err(MetricsError::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let t2 = tau * tau;
    let share = |from: &PointCloud, to: &PointCloud| {
        from.points.par_iter().filter(|p| to.nearest_dist2(p) <= t2).count() as f64 / from.len() as f64
    };
    let p = share(a, b);
    let r = share(b, a);
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum PairMetric {
    ChamferL1,
    ChamferL2,
    Fscore { tau: f64 },
}

impl PairMetric {
    pub fn eval(&self, a: &PointCloud, b: &PointCloud) -> Result<f64, MetricsError> {
        match *self {
            PairMetric::ChamferL1 => chamfer(a, b, ChamferOrder::L1),
            PairMetric::ChamferL2 => chamfer(a, b, ChamferOrder::L2),
            PairMetric::Fscore { tau } => fscore(a, b, tau),
        }
    }
}

fn clouds(seq: &PointMapSequence) -> Result<Vec<PointCloud>, MetricsError> {
    seq.frames
        .par_iter()
        .enumerate()
        .map(|(t, f)| {
            let c = PointCloud::from_frame(f);
            if c.is_empty() {
                Err(MetricsError::EmptyFrame(t))
            } else {
                Ok(c)
            }
        })
        .collect()
}

/// Metric between each pair of consecutive frames, in frame order.
pub fn temporal_per_pair(seq: &PointMapSequence, metric: PairMetric) -> Result<Vec<f64>, MetricsError> {
    if seq.len() < 2 {
        return Err(MetricsError::TooFewFrames(seq.len()));
    }
    let c = clouds(seq)?;
    (0..c.len() - 1)
        .into_par_iter()
        .map(|t| metric.eval(&c[t], &c[t + 1]))
        .collect()
}

/// Mean of the metric over consecutive frame pairs.
pub fn temporal_metric(seq: &PointMapSequence, metric: PairMetric) -> Result<f64, MetricsError> {
    let per = temporal_per_pair(seq, metric)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Metric between frame `t` of `pred` and frame `t` of `gt`, per frame.
pub fn framewise(pred: &PointMapSequence, gt: &PointMapSequence, metric: PairMetric) -> Result<Vec<f64>, MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{} vs {} frames",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let a = clouds(pred)?;
    let b = clouds(gt)?;
    a.par_iter().zip(&b).map(|(x, y)| metric.eval(x, y)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRates {
    pub rate_sim: f64,
    pub rate_real: f64,
    pub diff: f64,
}

/// Success rates of two sets of trials and their absolute difference.
///
/// The difference is formed from integer counts before dividing, so equal
/// trial counts give the exactly rounded value of `|s_sim − s_real| / n`.
pub fn success_rate_diff(sim: &[bool], real: &[bool]) -> Result<SuccessRates, MetricsError> {
    if sim.is_empty() || real.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let count = |v: &[bool]| v.iter().filter(|&&b| b).count() as u128;
    let (s1, n1, s2, n2) = (count(sim), sim.len() as u128, count(real), real.len() as u128);
    let num = (s1 * n2).abs_diff(s2 * n1);
    Ok(SuccessRates {
        rate_sim: s1 as f64 / n1 as f64,
        rate_real: s2 as f64 / n2 as f64,
        diff: num as f64 / (n1 * n2) as f64,
    })
}
