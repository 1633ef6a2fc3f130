//! Cost volumes between left/right feature maps, disparity probabilities and
//! soft warping of left-view planes into right-view predictions.
//!
//! Right pixel `w` is matched against left pixel `w + d` for `d` in `0..D`.
//! Cost entries whose left column falls past the right border are exactly
//! zero; in [`soft_warp`] such columns clamp to the last column so every
//! output stays a convex combination of left values.

use crate::error::{Error, Result};
use crate::tensor::{resize_bilinear, softmax, Tensor};

/// Per-pixel horizontal disparity, in pixels of the plane it was estimated on.
#[derive(Clone, Debug, PartialEq)]
pub struct DisparityMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
}

impl DisparityMap {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::shape(format!(
                "disparity map {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        Ok(DisparityMap {
            height,
            width,
            values,
        })
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Self {
        DisparityMap {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    #[inline]
    pub fn get(&self, h: usize, w: usize) -> f32 {
        self.values[h * self.width + w]
    }

    pub fn max_value(&self) -> f32 {
        self.values.iter().cloned().fold(0.0, f32::max)
    }

    /// Crops to the top-left `height x width` region.
    pub fn crop(&self, height: usize, width: usize) -> Self {
        let height = height.min(self.height);
        let width = width.min(self.width);
        let mut values = Vec::with_capacity(height * width);
        for h in 0..height {
            values.extend_from_slice(&self.values[h * self.width..h * self.width + width]);
        }
        DisparityMap {
            height,
            width,
            values,
        }
    }
}

/// Absolute-difference cost volume `(N, C, D, H, W)`:
/// `cv[n,c,d,h,w] = |left[n,c,h,w+d] - right[n,c,h,w]|` for `w + d < W`, else 0.
pub fn build_cost_volume(left: &Tensor, right: &Tensor, max_disp: usize) -> Result<Tensor> {
    let (n, c, h, w) = left.dims4()?;
    if right.shape() != left.shape() {
        return Err(Error::shape(format!(
            "cost volume: left {:?} vs right {:?}",
            left.shape(),
            right.shape()
        )));
    }
    if max_disp == 0 || max_disp > w {
        return Err(Error::InvalidArgument(format!(
            "disparity range {max_disp} outside 1..={w}"
        )));
    }
    let plane = h * w;
    let mut out = vec![0.0f32; n * c * max_disp * plane];
    let (ld, rd) = (left.data(), right.data());
    for nc in 0..n * c {
        let lp = &ld[nc * plane..(nc + 1) * plane];
        let rp = &rd[nc * plane..(nc + 1) * plane];
        for d in 0..max_disp {
            let dst = &mut out[(nc * max_disp + d) * plane..(nc * max_disp + d + 1) * plane];
            for y in 0..h {
                let lrow = &lp[y * w..(y + 1) * w];
                let rrow = &rp[y * w..(y + 1) * w];
                let orow = &mut dst[y * w..(y + 1) * w];
                for x in 0..w - d {
                    orow[x] = (lrow[x + d] - rrow[x]).abs();
                }
            }
        }
    }
    Tensor::new(vec![n, c, max_disp, h, w], out)
}

/// Softmax of the negated cost along the disparity axis of `(N, D, H, W)`,
/// so low cost means high probability.
pub fn normalize_volume(aggregated: &Tensor) -> Result<Tensor> {
    aggregated.dims4()?;
    softmax(&aggregated.map(|v| -v), 1)
}

/// `out[n,c,h,w] = sum_d prob[n,d,h,w] * left[n,c,h,min(w+d, W-1)]`,
/// clamped to the range of the gathered taps.
pub fn soft_warp(left_plane: &Tensor, prob: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = left_plane.dims4()?;
    let (pn, d, ph, pw) = prob.dims4()?;
    if (pn, ph, pw) != (n, h, w) {
        return Err(Error::shape(format!(
            "soft warp: plane {:?} vs probability volume {:?}",
            left_plane.shape(),
            prob.shape()
        )));
    }
    let plane = h * w;
    let mut out = vec![0.0f32; n * c * plane];
    for b in 0..n {
        let pv = &prob.data()[b * d * plane..(b + 1) * d * plane];
        for ch in 0..c {
            let lp = &left_plane.data()[(b * c + ch) * plane..(b * c + ch + 1) * plane];
            let op = &mut out[(b * c + ch) * plane..(b * c + ch + 1) * plane];
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0f32;
                    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
                    for k in 0..d {
                        let v = lp[y * w + (x + k).min(w - 1)];
                        acc += pv[k * plane + y * w + x] * v;
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    // rounding must not leave the hull of the taps
                    op[y * w + x] = acc.clamp(lo, hi);
                }
            }
        }
    }
    Tensor::new(vec![n, c, h, w], out)
}

/// Soft-argmax `sum_d d * prob[d]`, one map per batch item.
pub fn disparity_from_volume(prob: &Tensor) -> Result<Vec<DisparityMap>> {
    let (n, d, h, w) = prob.dims4()?;
    let plane = h * w;
    let mut maps = Vec::with_capacity(n);
    for b in 0..n {
        let pv = &prob.data()[b * d * plane..(b + 1) * d * plane];
        let values = (0..plane)
            .map(|i| {
                let mut acc = 0.0f32;
                for k in 0..d {
                    acc += k as f32 * pv[k * plane + i];
                }
                acc.clamp(0.0, (d - 1) as f32)
            })
            .collect();
        maps.push(DisparityMap::new(h, w, values)?);
    }
    Ok(maps)
}

/// Bilinear upsampling by `factor` with disparity values multiplied by
/// `factor`, since a disparity in pixels scales with resolution.
pub fn upscale_disparity(map: &DisparityMap, factor: usize) -> Result<DisparityMap> {
    if factor == 0 {
        return Err(Error::InvalidArgument("upscale factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(map.clone());
    }
    let t = Tensor::new(vec![1, 1, map.height, map.width], map.values.clone())?;
    let up = resize_bilinear(&t, map.height * factor, map.width * factor)?;
    let f = factor as f32;
    DisparityMap::new(
        map.height * factor,
        map.width * factor,
        up.into_data().into_iter().map(|v| v * f).collect(),
    )
}
