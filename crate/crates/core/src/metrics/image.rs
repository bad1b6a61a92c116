//! PSNR and SSIM on `[0, 1]` RGB frames.

use rayon::prelude::*;

use super::MetricsError;
use crate::projection::RgbFrame;

/// Peak signal value of float images.
pub const MAX_VALUE: f64 = 1.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn check_shapes(a: &[RgbFrame], b: &[RgbFrame]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{} vs {} frames",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    for (x, y) in a.iter().zip(b) {
        if (x.width, x.height) != (y.width, y.height) {
            return Err(MetricsError::ShapeMismatch(format!(
                "{}×{} vs {}×{}",
                x.width, x.height, y.width, y.height
            )));
        }
    }
    Ok(())
}

/// `10·log10(MAX² / MSE)` over every channel of every pixel of every frame;
/// `+∞` when the inputs are identical.
pub fn psnr_sequence(a: &[RgbFrame], b: &[RgbFrame]) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let per_frame: Vec<(f64, usize)> = a
        .par_iter()
        .zip(b)
        .map(|(x, y)| {
            let sse = x
                .data
                .iter()
                .zip(&y.data)
                .flat_map(|(p, q)| (0..3).map(move |k| (p[k] as f64 - q[k] as f64).powi(2)))
                .sum::<f64>();
            (sse, x.data.len() * 3)
        })
        .collect();
    let (sse, n) = per_frame.iter().fold((0.0, 0), |(s, n), &(fs, fn_)| (s + fs, n + fn_));
    if n == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let mse = sse / n as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (MAX_VALUE * MAX_VALUE / mse).log10()
    })
}

pub fn psnr(a: &RgbFrame, b: &RgbFrame) -> Result<f64, MetricsError> {
    psnr_sequence(std::slice::from_ref(a), std::slice::from_ref(b))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian filter, valid region only.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut rows = vec![0.0; ow * h];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..SSIM_WINDOW).map(|i| k[i] * img[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..SSIM_WINDOW).map(|i| k[i] * rows[(r + i) * ow + c]).sum();
        }
    }
    out
}

fn ssim_channel(x: &[f64], y: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> f64 {
    let c1 = (0.01 * MAX_VALUE).powi(2);
    let c2 = (0.03 * MAX_VALUE).powi(2);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, w, h, k);
    let my = filter_valid(y, w, h, k);
    let sxx = filter_valid(&xx, w, h, k);
    let syy = filter_valid(&yy, w, h, k);
    let sxy = filter_valid(&xy, w, h, k);
    let n = mx.len();
    (0..n)
        .map(|i| {
            let (mx, my) = (mx[i], my[i]);
            let vx = sxx[i] - mx * mx;
            let vy = syy[i] - my * my;
            let cxy = sxy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum::<f64>()
        / n as f64
}

/// Mean local SSIM (Gaussian window 11×11, σ = 1.5, no border padding),
/// averaged over the three channels.
pub fn ssim(a: &RgbFrame, b: &RgbFrame) -> Result<f64, MetricsError> {
    check_shapes(std::slice::from_ref(a), std::slice::from_ref(b))?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(MetricsError::FrameTooSmall {
            width: a.width,
            height: a.height,
            window: SSIM_WINDOW,
        });
    }
    if a.data == b.data {
        return Ok(1.0);
    }
    let k = gaussian_kernel();
    let total: f64 = (0..3)
        .map(|ch| {
            let x: Vec<f64> = a.data.iter().map(|p| p[ch] as f64).collect();
            let y: Vec<f64> = b.data.iter().map(|p| p[ch] as f64).collect();
            ssim_channel(&x, &y, a.width, a.height, &k)
        })
        .sum();
    Ok(total / 3.0)
}

/// Mean of per-frame SSIM.
pub fn ssim_sequence(a: &[RgbFrame], b: &[RgbFrame]) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let per: Vec<f64> = a.par_iter().zip(b).map(|(x, y)| ssim(x, y)).collect::<Result<_, _>>()?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(w: usize, h: usize) -> RgbFrame {
        let mut f = RgbFrame::black(w, h);
        for r in 0..h {
            for c in 0..w {
                let v = ((r * 7 + c * 13) % 31) as f32 / 30.0;
                f.set(r, c, [v, 1.0 - v, (r as f32 / h as f32)]);
            }
        }
        f
    }

    #[test]
    fn psnr_cases() {
        let a = pattern(16, 12);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let q = |v: u8| v as f32 / 255.0;
        let x = RgbFrame::filled(8, 8, [q(100), q(20), q(200)]);
        let y = RgbFrame::filled(8, 8, [q(116), q(4), q(216)]);
        let expected = 20.0 * (255.0f64 / 16.0).log10();
        assert!((psnr(&x, &y).unwrap() - expected).abs() < 1e-5);
        assert!((expected - 24.0484).abs() < 1e-4);
        assert_eq!(psnr(&x, &y).unwrap(), psnr(&y, &x).unwrap());
        assert!(psnr(&x, &RgbFrame::black(8, 7)).is_err());
    }

    #[test]
    fn ssim_cases() {
        let a = pattern(24, 20);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let inv = RgbFrame {
            data: a.data.iter().map(|p| p.map(|v| 1.0 - v)).collect(),
            ..a.clone()
        };
        assert!(ssim(&a, &inv).unwrap() < 1.0);
        let c = RgbFrame::filled(11, 11, [0.3; 3]);
        let c2 = RgbFrame {
            data: c.data.iter().map(|p| p.map(|v| v + 0.0)).collect(),
            ..c.clone()
        };
        assert_eq!(ssim(&c, &c2).unwrap(), 1.0);
        assert!(matches!(
            ssim(&RgbFrame::black(10, 20), &RgbFrame::black(10, 20)),
            Err(MetricsError::FrameTooSmall { .. })
        ));
        let k = gaussian_kernel();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ssim_constant_frames_use_stability_constants() {
        // both inputs constant but different: only the luminance term remains
        let a = RgbFrame::filled(12, 12, [0.2; 3]);
        let b = RgbFrame::filled(12, 12, [0.4; 3]);
        let c1 = 1e-4;
        let expected = (2.0 * 0.2 * 0.4 + c1) / (0.04 + 0.16 + c1);
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-6);
    }
}
