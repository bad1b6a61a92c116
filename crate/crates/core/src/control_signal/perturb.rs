//! Pointmap perturbations for robustness studies.

use std::str::FromStr;

use rand::seq::index;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SignalError;
use crate::projection::{PointMapFrame, PointMapSequence};
use crate::rng;

/// Default bound on `|du|` and `|dv|`.
pub const MAX_DEFAULT_SHIFT_PX: i32 = 5;
/// Default bound on `|angle|`.
pub const MAX_DEFAULT_ROTATION_DEG: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Invalidate this fraction of the valid pixels of every frame.
    Remove { fraction: f64 },
    /// Add `N(0, σ²)` meters to each coordinate of valid pixels.
    Gaussian { sigma: f64 },
    /// Move valid pixels by `du` columns and `dv` rows.
    Translate { du: i32, dv: i32 },
    /// Rotate valid pixels about the per-frame centroid of the valid region.
    /// Positive angles turn from +u towards +v.
    Rotate { degrees: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    #[serde(flatten)]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub seed: u64,
    /// Lifts the ±5 px / ±5° bounds.
    #[serde(default)]
    pub allow_large: bool,
}

impl PerturbationSpec {
    pub fn new(perturbation: Perturbation, seed: u64) -> Self {
        Self {
            perturbation,
            seed,
            allow_large: false,
        }
    }

    pub fn check(&self) -> Result<(), SignalError> {
        let bad = |m: String| Err(SignalError::InvalidParameter(m));
        match self.perturbation {
            Perturbation::Remove { fraction } if !(0.0..=1.0).contains(&fraction) => {
                bad(format!("remove fraction {fraction} outside [0, 1]"))
            }
            Perturbation::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                bad(format!("gaussian sigma {sigma} must be finite and nonnegative"))
            }
            Perturbation::Translate { du, dv }
                if !self.allow_large && (du.abs() > MAX_DEFAULT_SHIFT_PX || dv.abs() > MAX_DEFAULT_SHIFT_PX) =>
            {
                bad(format!("translate ({du}, {dv}) exceeds ±{MAX_DEFAULT_SHIFT_PX} px"))
            }
            Perturbation::Rotate { degrees } if !degrees.is_finite() => {
                bad(format!("rotation {degrees} is not finite"))
            }
            Perturbation::Rotate { degrees } if !self.allow_large && degrees.abs() > MAX_DEFAULT_ROTATION_DEG => {
                bad(format!("rotation {degrees}° exceeds ±{MAX_DEFAULT_ROTATION_DEG}°"))
            }
            _ => Ok(()),
        }
    }
}

/// `remove:0.05`, `gaussian:0.01`, `translate:3,-2`, `rotate:5`.
impl FromStr for Perturbation {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, SignalError> {
        let bad = || SignalError::InvalidParameter(format!("cannot parse perturbation '{s}'"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        Ok(match kind.trim() {
            "remove" => Perturbation::Remove { fraction: num(arg)? },
            "gaussian" | "gaus" => Perturbation::Gaussian { sigma: num(arg)? },
            "translate" | "trans" => {
                let (du, dv) = arg.split_once(',').ok_or_else(bad)?;
                Perturbation::Translate {
                    du: du.trim().parse().map_err(|_| bad())?,
                    dv: dv.trim().parse().map_err(|_| bad())?,
                }
            }
            "rotate" | "rot" => Perturbation::Rotate { degrees: num(arg)? },
            _ => return Err(bad()),
        })
    }
}

/// Applies `spec` to every frame. Frame `t` draws from its own stream keyed
/// by `(spec.seed, t)`.
pub fn perturb(pm: &PointMapSequence, spec: &PerturbationSpec) -> Result<PointMapSequence, SignalError> {
    spec.check()?;
    let frames = pm
        .frames
        .par_iter()
        .enumerate()
        .map(|(t, f)| perturb_frame(f, spec, t as u64))
        .collect();
    Ok(PointMapSequence::new(frames))
}

fn perturb_frame(f: &PointMapFrame, spec: &PerturbationSpec, t: u64) -> PointMapFrame {
    let mut rng = rng::stream(spec.seed, rng::stage::PERTURB, t);
    match spec.perturbation {
        Perturbation::Remove { fraction } => {
            let valid = f.valid_indices();
            let k = (fraction * valid.len() as f64).round() as usize;
            let mut out = f.clone();
            for i in index::sample(&mut rng, valid.len(), k) {
                out.invalidate(valid[i]);
            }
            out
        }
        Perturbation::Gaussian { sigma } => {
            if sigma == 0.0 {
                return f.clone();
            }
            let normal = Normal::new(0.0, sigma).expect("sigma checked");
            let mut out = f.clone();
            for (c, _) in out.coords.iter_mut().zip(&f.valid).filter(|(_, &v)| v) {
                for x in c.iter_mut() {
                    *x = (*x as f64 + normal.sample(&mut rng)) as f32;
                }
            }
            out
        }
        Perturbation::Translate { du, dv } => {
            let mut out = PointMapFrame::empty(f.width, f.height);
            for i in f.valid_indices() {
                let row = (i / f.width) as i64 + dv as i64;
                let col = (i % f.width) as i64 + du as i64;
                if (0..f.height as i64).contains(&row) && (0..f.width as i64).contains(&col) {
                    out.set(row as usize, col as usize, f.coords[i]);
                }
            }
            out
        }
        Perturbation::Rotate { degrees } => rotate_frame(f, degrees.to_radians()),
    }
}

/// Inverse-maps every output pixel center into the source and copies the
/// nearest source pixel.
fn rotate_frame(f: &PointMapFrame, angle: f64) -> PointMapFrame {
    let valid = f.valid_indices();
    if angle == 0.0 || valid.is_empty() {
        return f.clone();
    }
    let n = valid.len() as f64;
    let (su, sv) = valid.iter().fold((0.0, 0.0), |(u, v), &i| {
        (u + (i % f.width) as f64 + 0.5, v + (i / f.width) as f64 + 0.5)
    });
    let (cu, cv) = (su / n, sv / n);
    let (s, c) = angle.sin_cos();
    let mut out = PointMapFrame::empty(f.width, f.height);
    for row in 0..f.height {
        for col in 0..f.width {
            let du = col as f64 + 0.5 - cu;
            let dv = row as f64 + 0.5 - cv;
            let src_u = cu + c * du + s * dv;
            let src_v = cv - s * du + c * dv;
            if src_u < 0.0 || src_v < 0.0 {
                continue;
            }
            let (sc, sr) = (src_u.floor() as usize, src_v.floor() as usize);
            if sc < f.width && sr < f.height {
                if let Some(p) = f.get(sr, sc) {
                    out.set(row, col, p);
                }
            }
        }
    }
    out
}
