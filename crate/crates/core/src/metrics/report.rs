//! Aggregated evaluation report with JSON and plain-text table output.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{framewise, psnr, psnr_sequence, ssim, temporal_per_pair, MetricsError, PairMetric, DEFAULT_FSCORE_TAU};
use crate::projection::{PointMapSequence, RgbFrame};

pub const CHAMFER_CONVENTION: &str = "0.5*(mean_a NN(a,b) + mean_b NN(b,a)); L1: distance, L2: squared distance";

/// Scalar that serializes `±∞` as the strings `"inf"` / `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue(pub f64);

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            v if v == f64::INFINITY => s.serialize_str("inf"),
            v if v == f64::NEG_INFINITY => s.serialize_str("-inf"),
            v => s.serialize_f64(v),
        }
    }
}

impl<'de> Deserialize<'de> for MetricValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(MetricValue(v)),
            Raw::Str(s) if s == "inf" => Ok(MetricValue(f64::INFINITY)),
            Raw::Str(s) if s == "-inf" => Ok(MetricValue(f64::NEG_INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unknown metric value '{s}'"))),
        }
    }
}

/// Units of the evaluated point clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Metric,
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub units: Units,
    pub chamfer_convention: String,
    pub fscore_tau: f64,
    pub scalars: BTreeMap<String, MetricValue>,
    pub per_frame: BTreeMap<String, Vec<MetricValue>>,
}

/// Columns of the text table: report key and heading.
const COLUMNS: [(&str, &str); 8] = [
    ("cd_l1", "CD-L1"),
    ("cd_l1_temp", "CD-L1 (temp)"),
    ("cd_l2", "CD-L2"),
    ("cd_l2_temp", "CD-L2 (temp)"),
    ("fscore", "F-Score"),
    ("fscore_temp", "F-Score (temp)"),
    ("psnr", "PSNR"),
    ("ssim", "SSIM"),
];

impl MetricReport {
    pub fn new(units: Units, fscore_tau: f64) -> Self {
        Self {
            units,
            chamfer_convention: CHAMFER_CONVENTION.to_string(),
            fscore_tau,
            scalars: BTreeMap::new(),
            per_frame: BTreeMap::new(),
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.scalars.get(key).map(|v| v.0)
    }

    fn insert(&mut self, key: &str, per: Vec<f64>, scalar: f64) {
        self.scalars.insert(key.to_string(), MetricValue(scalar));
        self.per_frame
            .insert(key.to_string(), per.into_iter().map(MetricValue).collect());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Two-line aligned table; absent metrics print as `-`.
    pub fn table(&self, label: &str) -> String {
        let cells: Vec<String> = COLUMNS
            .iter()
            .map(|(k, _)| match self.get(k) {
                None => "-".to_string(),
                Some(v) if v.is_infinite() => "inf".to_string(),
                Some(v) => format!("{v:.4}"),
            })
            .collect();
        let first = label.len().max("Method".len());
        let mut out = String::new();
        let _ = write!(out, "{:<first$}", "Method");
        for ((_, h), c) in COLUMNS.iter().zip(&cells) {
            let _ = write!(out, "  {:>w$}", h, w = h.len().max(c.len()));
        }
        out.push('\n');
        let _ = write!(out, "{label:<first$}");
        for ((_, h), c) in COLUMNS.iter().zip(&cells) {
            let _ = write!(out, "  {:>w$}", c, w = h.len().max(c.len()));
        }
        out.push('\n');
        out
    }
}

/// Whatever subset of inputs is available.
#[derive(Debug, Clone, Copy)]
pub struct EvalInputs<'a> {
    pub pred_pointmaps: Option<&'a PointMapSequence>,
    pub gt_pointmaps: Option<&'a PointMapSequence>,
    pub pred_rgb: Option<&'a [RgbFrame]>,
    pub gt_rgb: Option<&'a [RgbFrame]>,
    pub fscore_tau: f64,
    pub units: Units,
}

impl Default for EvalInputs<'_> {
    fn default() -> Self {
        Self {
            pred_pointmaps: None,
            gt_pointmaps: None,
            pred_rgb: None,
            gt_rgb: None,
            fscore_tau: DEFAULT_FSCORE_TAU,
            units: Units::Metric,
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pointmap metrics need `pred_pointmaps` (plus `gt_pointmaps` for the
/// non-temporal columns); image metrics need both RGB sequences.
pub fn evaluate(inputs: &EvalInputs) -> Result<MetricReport, MetricsError> {
    let tau = inputs.fscore_tau;
    let mut report = MetricReport::new(inputs.units, tau);
    let metrics = [
        ("cd_l1", PairMetric::ChamferL1),
        ("cd_l2", PairMetric::ChamferL2),
        ("fscore", PairMetric::Fscore { tau }),
    ];
    if let Some(pred) = inputs.pred_pointmaps {
        if let Some(gt) = inputs.gt_pointmaps {
            for (key, m) in metrics {
                let per = framewise(pred, gt, m)?;
                let s = mean(&per);
                report.insert(key, per, s);
            }
        }
        if pred.len() >= 2 {
            for (key, m) in metrics {
                let per = temporal_per_pair(pred, m)?;
                let s = mean(&per);
                report.insert(&format!("{key}_temp"), per, s);
            }
        }
    }
    if let (Some(a), Some(b)) = (inputs.pred_rgb, inputs.gt_rgb) {
        let p = psnr_sequence(a, b)?;
        let per: Vec<f64> = a.iter().zip(b).map(|(x, y)| psnr(x, y)).collect::<Result<_, _>>()?;
        report.insert("psnr", per, p);
        let per: Vec<f64> = a.iter().zip(b).map(|(x, y)| ssim(x, y)).collect::<Result<_, _>>()?;
        let s = mean(&per);
        report.insert("ssim", per, s);
    }
    if report.scalars.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(report)
}
