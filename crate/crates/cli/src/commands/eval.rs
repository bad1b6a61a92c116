//! `eval`: pointmap, image and policy metrics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use kinema::image_io::read_rgb_dir;
use kinema::metrics::{evaluate, success_rate_diff, EvalInputs, MetricReport, SuccessRates, Units, DEFAULT_FSCORE_TAU};
use kinema::projection::{read_pointmap_tensor, PointMapSequence};

use super::{output_dir, read_json, write_json};
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Serialize)]
struct EvalOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<SuccessRates>,
}

/// A tensor file, or a directory holding `pointmap.kpm`.
fn load_pointmap(path: &Path) -> Result<PointMapSequence, CliError> {
    let file = if path.is_dir() {
        path.join("pointmap.kpm")
    } else {
        path.to_path_buf()
    };
    Ok(read_pointmap_tensor(&file)?.0)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Flag {
    Bool(bool),
    Int(u8),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FlagFile {
    List(Vec<Flag>),
    Object { success: Vec<Flag> },
}

/// Success flags from `[true, false, …]`, `[1, 0, …]` or `{"success": […]}`.
pub fn read_flags(path: &Path) -> Result<Vec<bool>, CliError> {
    let file: FlagFile = read_json(path, "InvalidFlags")?;
    let (FlagFile::List(v) | FlagFile::Object { success: v }) = file;
    v.into_iter()
        .map(|f| match f {
            Flag::Bool(b) => Ok(b),
            Flag::Int(0) => Ok(false),
            Flag::Int(1) => Ok(true),
            Flag::Int(n) => Err(CliError::input(
                "InvalidFlags",
                format!("{}: flag value {n}", path.display()),
            )),
        })
        .collect()
}

/// Prints the metric table (and the policy line); writes `report.json` and
/// `table.txt` when `--output` is given.
pub fn cmd_eval(cfg: &RunConfig) -> Result<String, CliError> {
    let pred = cfg.pred.as_deref().map(load_pointmap).transpose()?;
    let gt = cfg.gt.as_deref().map(load_pointmap).transpose()?;
    let pred_rgb = cfg.pred_rgb.as_deref().map(read_rgb_dir).transpose()?;
    let gt_rgb = cfg.gt_rgb.as_deref().map(read_rgb_dir).transpose()?;
    let units = match cfg.units.as_deref() {
        None | Some("metric") => Units::Metric,
        Some("normalized") => Units::Normalized,
        Some(other) => return Err(CliError::Usage(format!("unknown units '{other}'"))),
    };
    let has_metric_inputs = pred.is_some() || (pred_rgb.is_some() && gt_rgb.is_some());
    let metrics = if has_metric_inputs {
        Some(evaluate(&EvalInputs {
            pred_pointmaps: pred.as_ref(),
            gt_pointmaps: gt.as_ref(),
            pred_rgb: pred_rgb.as_deref(),
            gt_rgb: gt_rgb.as_deref(),
            fscore_tau: cfg.tau.unwrap_or(DEFAULT_FSCORE_TAU),
            units,
        })?)
    } else {
        None
    };
    let policy = match cfg.policy.as_deref() {
        Some([sim, real]) => Some(success_rate_diff(&read_flags(sim)?, &read_flags(real)?)?),
        Some(_) => return Err(CliError::Usage("--policy takes two files: SIM REAL".into())),
        None => None,
    };
    if metrics.is_none() && policy.is_none() {
        return Err(CliError::Usage(
            "eval needs --pred, --pred-rgb/--gt-rgb or --policy".into(),
        ));
    }
    let mut text = String::new();
    if let Some(m) = &metrics {
        text.push_str(&m.table(cfg.label.as_deref().unwrap_or("prediction")));
    }
    if let Some(p) = &policy {
        text.push_str(&format!(
            "{:<8}  {:>6}  {:>6}  {:>6}\n{:<8}  {:>6.2}  {:>6.2}  {:>6.2}\n",
            "Policy", "Sim", "Real", "Diff", "success", p.rate_sim, p.rate_real, p.diff
        ));
    }
    if cfg.output.is_some() {
        let out = output_dir(cfg)?;
        write_json(&out.join("report.json"), &EvalOutput { metrics, policy })?;
        std::fs::write(out.join("table.txt"), &text)?;
    }
    Ok(text.trim_end().to_string())
}
