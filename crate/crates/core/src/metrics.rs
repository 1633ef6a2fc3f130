//! Reconstruction and disparity metrics.

use crate::error::{Error, Result};
use crate::plane::SymbolPlane;
use crate::tensor::{resize_bilinear, Tensor};
use crate::warp::DisparityMap;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
/// Disparity error above which a pixel counts as bad.
pub const BAD_PIXEL_THRESHOLD: f64 = 3.0;
/// Per-scale weights of the supervised disparity loss, finest first.
pub const DISPARITY_LOSS_WEIGHTS: [f64; 3] = [1.0, 0.5, 0.25];

fn same_shape(a: &SymbolPlane, b: &SymbolPlane) -> Result<()> {
    if (a.channels, a.height, a.width) != (b.channels, b.height, b.width) {
        return Err(Error::Dimension(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.channels, a.height, a.width, b.channels, b.height, b.width
        )));
    }
    Ok(())
}

/// PSNR over all channels jointly with peak 255. Identical inputs give
/// `f64::INFINITY`.
pub fn psnr(a: &SymbolPlane, b: &SymbolPlane) -> Result<f64> {
    same_shape(a, b)?;
    if a.is_empty() {
        return Err(Error::Dimension("empty image".into()));
    }
    let sse: f64 = a
        .symbols
        .iter()
        .zip(&b.symbols)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / a.len() as f64;
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let x = i as f64 - r;
            (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

fn luma(p: &SymbolPlane) -> Vec<f64> {
    let plane = p.height * p.width;
    (0..plane)
        .map(|i| (0..p.channels).map(|c| p.symbols[c * plane + i] as f64).sum::<f64>() / p.channels as f64)
        .collect()
}

/// Mean SSIM on the channel-averaged image, 11x11 Gaussian window
/// (sigma 1.5), valid windows only.
pub fn ssim(a: &SymbolPlane, b: &SymbolPlane) -> Result<f64> {
    same_shape(a, b)?;
    let (h, w) = (a.height, a.width);
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, image is {w}x{h}"
        )));
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let g = gaussian_window();
    let (x, y) = (luma(a), luma(b));
    let mut total = 0.0;
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    for i in 0..oh {
        for j in 0..ow {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (u, gu) in g.iter().enumerate() {
                for (v, gv) in g.iter().enumerate() {
                    let k = gu * gv;
                    let idx = (i + u) * w + j + v;
                    let (p, q) = (x[idx], y[idx]);
                    mx += k * p;
                    my += k * q;
                    xx += k * p * p;
                    yy += k * q * q;
                    xy += k * p * q;
                }
            }
            let vx = xx - mx * mx;
            let vy = yy - my * my;
            let cov = xy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    Ok(total / (oh * ow) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisparityEval {
    /// Mean absolute error over valid pixels.
    pub epe: f64,
    /// Fraction of valid pixels with error strictly above 3.
    pub bad3: f64,
    pub valid: usize,
}

/// Compares a disparity estimate with ground truth where `mask` is set.
pub fn disparity_eval(pred: &DisparityMap, gt: &DisparityMap, mask: &[bool]) -> Result<DisparityEval> {
    if (pred.height, pred.width) != (gt.height, gt.width) || mask.len() != gt.values.len() {
        return Err(Error::Dimension("disparity maps and mask differ in size".into()));
    }
    let mut sum = 0.0;
    let mut bad = 0usize;
    let mut valid = 0usize;
    for ((&p, &g), &m) in pred.values.iter().zip(&gt.values).zip(mask) {
        if !m {
            continue;
        }
        let e = (p as f64 - g as f64).abs();
        sum += e;
        if e > BAD_PIXEL_THRESHOLD {
            bad += 1;
        }
        valid += 1;
    }
    if valid == 0 {
        return Err(Error::InvalidArgument("mask selects no pixels".into()));
    }
    Ok(DisparityEval {
        epe: sum / valid as f64,
        bad3: bad as f64 / valid as f64,
        valid,
    })
}

/// `lambda * sum_s alpha_s * mean |gt - up(pred_s)|`, where `preds[s]` is at
/// `1 / 2^s` of the ground-truth resolution and is upsampled bilinearly with
/// its values multiplied by `2^s`.
pub fn supervised_disparity_loss(preds: &[DisparityMap], gt: &DisparityMap, lambda: f64) -> Result<f64> {
    if preds.len() > DISPARITY_LOSS_WEIGHTS.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scales given, weights exist for {}",
            preds.len(),
            DISPARITY_LOSS_WEIGHTS.len()
        )));
    }
    if gt.values.is_empty() {
        return Err(Error::Dimension("empty ground truth".into()));
    }
    let mut loss = 0.0;
    for (s, (pred, alpha)) in preds.iter().zip(DISPARITY_LOSS_WEIGHTS).enumerate() {
        let factor = (1usize << s) as f64;
        let t = Tensor::new(vec![1, 1, pred.height, pred.width], pred.values.clone())?;
        let up = resize_bilinear(&t, gt.height, gt.width)?;
        let mean = up
            .data()
            .iter()
            .zip(&gt.values)
            .map(|(&p, &g)| (g as f64 - factor * p as f64).abs())
            .sum::<f64>()
            / gt.values.len() as f64;
        loss += alpha * mean;
    }
    Ok(lambda * loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(h: usize, w: usize, f: impl Fn(usize) -> u8) -> SymbolPlane {
        SymbolPlane::rgb(h, w, (0..3 * h * w).map(f).collect()).unwrap()
    }

    #[test]
    fn psnr_values() {
        let a = plane(4, 4, |_| 100);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = plane(4, 4, |_| 110);
        let expected = 10.0 * (255.0f64 * 255.0 / 100.0).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_identity_and_size() {
        let a = plane(16, 16, |i| (i * 7 % 256) as u8);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = plane(16, 16, |i| 255 - (i * 7 % 256) as u8);
        assert!(ssim(&a, &b).unwrap() < 0.5);
        assert!(ssim(&plane(8, 16, |_| 0), &plane(8, 16, |_| 0)).is_err());
    }

    #[test]
    fn disparity_eval_counts() {
        let gt = DisparityMap::new(1, 4, vec![0.0, 0.0, 0.0, 0.0]).unwrap();
        let pred = DisparityMap::new(1, 4, vec![1.0, 3.0, 3.5, 100.0]).unwrap();
        let e = disparity_eval(&pred, &gt, &[true, true, true, false]).unwrap();
        assert!((e.epe - 7.5 / 3.0).abs() < 1e-12);
        assert!((e.bad3 - 1.0 / 3.0).abs() < 1e-12);
        assert!(disparity_eval(&pred, &gt, &[false; 4]).is_err());
    }

    #[test]
    fn supervised_loss_constant_maps() {
        let gt = DisparityMap::constant(8, 8, 4.0);
        let preds = [
            DisparityMap::constant(8, 8, 5.0),
            DisparityMap::constant(4, 4, 2.5),
            DisparityMap::constant(2, 2, 1.25),
        ];
        let l = supervised_disparity_loss(&preds, &gt, 0.01).unwrap();
        assert!((l - 0.0175).abs() < 1e-12);
    }
}
