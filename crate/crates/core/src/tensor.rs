//! Dense `f32` tensors and the deterministic kernels the network is built from.
//!
//! Layout is row-major with width fastest: `(N, C, H, W)` for images and
//! feature maps, `(N, C, D, H, W)` for cost volumes. Rank-1 tensors are
//! allowed so that biases can live in the same weight store.
//!
//! Convolutions accumulate every output element from `+0.0` in the order
//! input channel, kernel row, kernel column (kernel depth first for 3-D),
//! adding the bias last. Work is split across output planes only, so the
//! per-element summation order never depends on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense tensor of 32-bit reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 5 {
            return Err(Error::shape(format!("unsupported rank {}", shape.len())));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f32) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::shape(format!(
                "expected a 4-D tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn dims5(&self) -> Result<(usize, usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, c, d, h, w] => Ok((n, c, d, h, w)),
            _ => Err(Error::shape(format!(
                "expected a 5-D tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    /// Value at `(n, c, h, w)` of a 4-D tensor.
    #[inline]
    pub fn at4(&self, n: usize, c: usize, h: usize, w: usize) -> f32 {
        let [_, cs, hs, ws] = self.shape[..] else {
            panic!("at4 on shape {:?}", self.shape)
        };
        self.data[((n * cs + c) * hs + h) * ws + w]
    }

    /// Value at `(n, c, d, h, w)` of a 5-D tensor.
    #[inline]
    pub fn at5(&self, n: usize, c: usize, d: usize, h: usize, w: usize) -> f32 {
        let [_, cs, ds, hs, ws] = self.shape[..] else {
            panic!("at5 on shape {:?}", self.shape)
        };
        self.data[(((n * cs + c) * ds + d) * hs + h) * ws + w]
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Tensor::new(shape.to_vec(), self.data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "cannot add {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Concatenates 4-D or 5-D tensors along the channel axis.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat of zero tensors"))?;
        if first.rank() < 4 {
            return Err(Error::shape("concat needs 4-D or 5-D tensors"));
        }
        let batch = first.shape[0];
        let tail = &first.shape[2..];
        for p in parts {
            if p.rank() != first.rank() || p.shape[0] != batch || &p.shape[2..] != tail {
                return Err(Error::shape(format!(
                    "cannot concat {:?} with {:?}",
                    first.shape, p.shape
                )));
            }
        }
        let plane: usize = tail.iter().product();
        let channels: usize = parts.iter().map(|p| p.shape[1]).sum();
        let mut data = Vec::with_capacity(batch * channels * plane);
        for n in 0..batch {
            for p in parts {
                let c = p.shape[1];
                data.extend_from_slice(&p.data[n * c * plane..(n + 1) * c * plane]);
            }
        }
        let mut shape = first.shape.clone();
        shape[1] = channels;
        Tensor::new(shape, data)
    }
}

/// Stride, dilation and zero padding of a 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dOptions {
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
}

impl Default for Conv2dOptions {
    fn default() -> Self {
        Conv2dOptions {
            stride: 1,
            dilation: 1,
            padding: 0,
        }
    }
}

impl Conv2dOptions {
    pub fn same(kernel: usize) -> Self {
        Conv2dOptions {
            padding: kernel / 2,
            ..Default::default()
        }
    }
}

/// Range of output positions `x` with `0 <= x * stride + offset < len`.
fn valid_range(out_len: usize, len: usize, stride: usize, offset: isize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if offset < 0 { (-offset + s - 1) / s } else { 0 };
    let last = len as isize - 1 - offset;
    let hi = if last < 0 { 0 } else { last / s + 1 };
    let lo = lo.max(0) as usize;
    let hi = (hi.max(0) as usize).min(out_len);
    (lo, hi.max(lo))
}

fn check_bias(bias: &[f32], out_ch: usize) -> Result<()> {
    if bias.len() != out_ch {
        return Err(Error::shape(format!(
            "bias has {} entries for {} output channels",
            bias.len(),
            out_ch
        )));
    }
    Ok(())
}

/// 2-D cross-correlation with zero padding.
///
/// `weight` is `(out_ch, in_ch, kH, kW)`; output spatial size is
/// `floor((H + 2p - dilation*(k-1) - 1) / stride) + 1`.
pub fn conv2d(input: &Tensor, weight: &Tensor, bias: &[f32], opts: Conv2dOptions) -> Result<Tensor> {
    let (n, c_in, h, w) = input.dims4()?;
    let [oc, wc, kh, kw] = weight.shape[..] else {
        return Err(Error::shape(format!(
            "conv2d weight must be 4-D, got {:?}",
            weight.shape
        )));
    };
    if wc != c_in {
        return Err(Error::shape(format!(
            "conv2d input has {c_in} channels, weight expects {wc}"
        )));
    }
    if opts.stride == 0 || opts.dilation == 0 {
        return Err(Error::InvalidArgument("stride and dilation must be >= 1".into()));
    }
    check_bias(bias, oc)?;
    let span_h = opts.dilation * (kh - 1) + 1;
    let span_w = opts.dilation * (kw - 1) + 1;
    if h + 2 * opts.padding < span_h || w + 2 * opts.padding < span_w {
        return Err(Error::shape(format!(
            "kernel {kh}x{kw} (dilation {}) larger than padded input {h}x{w}",
            opts.dilation
        )));
    }
    let oh = (h + 2 * opts.padding - span_h) / opts.stride + 1;
    let ow = (w + 2 * opts.padding - span_w) / opts.stride + 1;
    let mut out = vec![0.0f32; n * oc * oh * ow];
    let pad = opts.padding as isize;
    let dil = opts.dilation;
    let stride = opts.stride;
    let in_data = &input.data;
    let w_data = &weight.data;

    out.par_chunks_mut(oh * ow).enumerate().for_each(|(idx, plane)| {
        let b = idx / oc;
        let o = idx % oc;
        for y in 0..oh {
            let row_out = &mut plane[y * ow..(y + 1) * ow];
            for ci in 0..c_in {
                let in_plane = &in_data[(b * c_in + ci) * h * w..(b * c_in + ci + 1) * h * w];
                for ki in 0..kh {
                    let iy = (y * stride + ki * dil) as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let row_in = &in_plane[iy as usize * w..(iy as usize + 1) * w];
                    for kj in 0..kw {
                        let wv = w_data[((o * c_in + ci) * kh + ki) * kw + kj];
                        let x_off = (kj * dil) as isize - pad;
                        let (x_lo, x_hi) = valid_range(ow, w, stride, x_off);
                        if x_lo >= x_hi {
                            continue;
                        }
                        if stride == 1 {
                            let start = (x_lo as isize + x_off) as usize;
                            let src = &row_in[start..start + (x_hi - x_lo)];
                            for (acc, &v) in row_out[x_lo..x_hi].iter_mut().zip(src) {
                                *acc += wv * v;
                            }
                        } else {
                            for x in x_lo..x_hi {
                                let ix = ((x * stride) as isize + x_off) as usize;
                                row_out[x] += wv * row_in[ix];
                            }
                        }
                    }
                }
            }
        }
        let bv = bias[o];
        for v in plane.iter_mut() {
            *v += bv;
        }
    });
    Tensor::new(vec![n, oc, oh, ow], out)
}

/// 3-D cross-correlation (stride 1) over `(N, C, D, H, W)` with equal zero
/// padding on all three spatial axes.
pub fn conv3d(input: &Tensor, weight: &Tensor, bias: &[f32], padding: usize) -> Result<Tensor> {
    let (n, c_in, d, h, w) = input.dims5()?;
    let [oc, wc, kd, kh, kw] = weight.shape[..] else {
        return Err(Error::shape(format!(
            "conv3d weight must be 5-D, got {:?}",
            weight.shape
        )));
    };
    if wc != c_in {
        return Err(Error::shape(format!(
            "conv3d input has {c_in} channels, weight expects {wc}"
        )));
    }
    check_bias(bias, oc)?;
    if d + 2 * padding < kd || h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(Error::shape(format!(
            "kernel {kd}x{kh}x{kw} larger than padded input {d}x{h}x{w}"
        )));
    }
    let od = d + 2 * padding - kd + 1;
    let oh = h + 2 * padding - kh + 1;
    let ow = w + 2 * padding - kw + 1;
    let vol = d * h * w;
    let plane = od * oh * ow;
    let mut out = vec![0.0f32; n * oc * plane];
    let pad = padding as isize;
    let w_data = &weight.data;

    for (b, out_b) in out.chunks_mut(oc * plane).enumerate() {
        let in_b = &input.data[b * c_in * vol..(b + 1) * c_in * vol];
        out_b
            .par_chunks_mut(CONV3D_GROUP * plane)
            .enumerate()
            .for_each(|(gi, block)| {
                let o0 = gi * CONV3D_GROUP;
                if block.len() == CONV3D_GROUP * plane {
                    conv3d_group::<CONV3D_GROUP>(block, o0, in_b, w_data, [c_in, d, h, w, kd, kh, kw, od, oh, ow], pad);
                } else {
                    for (g, single) in block.chunks_mut(plane).enumerate() {
                        conv3d_group::<1>(single, o0 + g, in_b, w_data, [c_in, d, h, w, kd, kh, kw, od, oh, ow], pad);
                    }
                }
                for (g, p) in block.chunks_mut(plane).enumerate() {
                    let bv = bias[o0 + g];
                    for v in p.iter_mut() {
                        *v += bv;
                    }
                }
            });
    }
    Tensor::new(vec![n, oc, od, oh, ow], out)
}

const CONV3D_GROUP: usize = 4;

/// `G` consecutive output channels starting at `o0`, written into `block`.
/// One output row at a time; every element sums in (ci, kz, ky, kx) order.
fn conv3d_group<const G: usize>(
    block: &mut [f32],
    o0: usize,
    in_b: &[f32],
    w_data: &[f32],
    [c_in, d, h, w, kd, kh, kw, od, oh, ow]: [usize; 10],
    pad: isize,
) {
    let plane = od * oh * ow;
    let mut planes = block.chunks_mut(plane);
    let mut planes: [&mut [f32]; G] = std::array::from_fn(|_| planes.next().unwrap());
    let vol = d * h * w;
    for z in 0..od {
        for y in 0..oh {
            let off = (z * oh + y) * ow;
            let mut rows = planes.each_mut().map(|p| &mut p[off..off + ow]);
            for ci in 0..c_in {
                let in_vol = &in_b[ci * vol..(ci + 1) * vol];
                for kz in 0..kd {
                    let iz = z as isize + kz as isize - pad;
                    if iz < 0 || iz >= d as isize {
                        continue;
                    }
                    for ky in 0..kh {
                        let iy = y as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let in_row = &in_vol[(iz as usize * h + iy as usize) * w..][..w];
                        let taps: [&[f32]; G] = std::array::from_fn(|g| {
                            &w_data[((((o0 + g) * c_in + ci) * kd + kz) * kh + ky) * kw..][..kw]
                        });
                        accumulate_rows(&mut rows, in_row, &taps, pad as usize);
                    }
                }
            }
        }
    }
}

/// `rows[g][x] += taps[g][kx] * src[x + kx - pad]` over in-bounds taps, in
/// kx order for every element.
fn accumulate_rows<const G: usize>(rows: &mut [&mut [f32]; G], src: &[f32], taps: &[&[f32]; G], pad: usize) {
    let (ow, w, kw) = (rows[0].len(), src.len(), taps[0].len());
    let edge = |x: usize, g: usize, acc: &mut f32| {
        for (kx, &t) in taps[g].iter().enumerate() {
            let ix = x + kx;
            if ix >= pad && ix - pad < w {
                *acc += t * src[ix - pad];
            }
        }
    };
    // interior columns read every tap in bounds
    let lo = pad.min(ow);
    let hi = (w + pad + 1).saturating_sub(kw).min(ow).max(lo);
    let n = hi - lo;
    for g in 0..G {
        for x in (0..lo).chain(hi..ow) {
            edge(x, g, &mut rows[g][x]);
        }
    }
    if n == 0 {
        return;
    }
    let base = lo - pad;
    if kw == 3 {
        let (s0, s1, s2) = (&src[base..base + n], &src[base + 1..base + 1 + n], &src[base + 2..base + 2 + n]);
        let t: [[f32; 3]; G] = std::array::from_fn(|g| [taps[g][0], taps[g][1], taps[g][2]]);
        let inner = rows.each_mut().map(|r| &mut r[lo..hi]);
        for x in 0..n {
            let (a, b, c) = (s0[x], s1[x], s2[x]);
            for g in 0..G {
                let acc = &mut inner[g][x];
                let mut v = *acc + t[g][0] * a;
                v += t[g][1] * b;
                v += t[g][2] * c;
                *acc = v;
            }
        }
    } else {
        for g in 0..G {
            for x in 0..n {
                let window = &src[base + x..base + x + kw];
                let mut v = rows[g][lo + x];
                for (&t, &a) in taps[g].iter().zip(window) {
                    v += t * a;
                }
                rows[g][lo + x] = v;
            }
        }
    }
}

/// Sub-pixel upsampling: `(N, C*r*r, H, W) -> (N, C, H*r, W*r)`.
pub fn pixel_shuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    if r == 0 || c % (r * r) != 0 {
        return Err(Error::shape(format!(
            "pixel_shuffle: {c} channels not divisible by {r}^2"
        )));
    }
    let oc = c / (r * r);
    let (oh, ow) = (h * r, w * r);
    let mut out = vec![0.0f32; n * oc * oh * ow];
    for b in 0..n {
        for co in 0..oc {
            for i in 0..r {
                for j in 0..r {
                    let ci = co * r * r + i * r + j;
                    for y in 0..h {
                        for x in 0..w {
                            out[((b * oc + co) * oh + y * r + i) * ow + x * r + j] =
                                input.data[((b * c + ci) * h + y) * w + x];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, oc, oh, ow], out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpMode {
    Bilinear,
    Trilinear,
}

/// Source index pair and blend weight for one output coordinate
/// (align-corners false, clamped to the border).
#[inline]
fn sample_coord(dst: usize, in_len: usize, out_len: usize) -> (usize, usize, f32) {
    let scale = in_len as f32 / out_len as f32;
    let src = ((dst as f32 + 0.5) * scale - 0.5).max(0.0);
    let i0 = (src.floor() as usize).min(in_len - 1);
    let i1 = (i0 + 1).min(in_len - 1);
    let t = if i0 == i1 { 0.0 } else { src - i0 as f32 };
    (i0, i1, t)
}

#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + t * (b - a)
}

/// Bilinear resize of a 4-D tensor to `(out_h, out_w)`.
pub fn resize_bilinear(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    if out_h == 0 || out_w == 0 || h == 0 || w == 0 {
        return Err(Error::InvalidArgument("bilinear resize to or from empty extent".into()));
    }
    let ys: Vec<_> = (0..out_h).map(|y| sample_coord(y, h, out_h)).collect();
    let xs: Vec<_> = (0..out_w).map(|x| sample_coord(x, w, out_w)).collect();
    let mut out = Vec::with_capacity(n * c * out_h * out_w);
    for plane in input.data.chunks(h * w) {
        for &(y0, y1, ty) in &ys {
            let r0 = &plane[y0 * w..(y0 + 1) * w];
            let r1 = &plane[y1 * w..(y1 + 1) * w];
            for &(x0, x1, tx) in &xs {
                let top = lerp(r0[x0], r0[x1], tx);
                let bottom = lerp(r1[x0], r1[x1], tx);
                out.push(lerp(top, bottom, ty));
            }
        }
    }
    Tensor::new(vec![n, c, out_h, out_w], out)
}

/// Trilinear resize of a 5-D tensor to `(out_d, out_h, out_w)`.
pub fn resize_trilinear(input: &Tensor, out_d: usize, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (n, c, d, h, w) = input.dims5()?;
    if out_d == 0 || out_h == 0 || out_w == 0 || d == 0 || h == 0 || w == 0 {
        return Err(Error::InvalidArgument("trilinear resize to or from empty extent".into()));
    }
    let zs: Vec<_> = (0..out_d).map(|z| sample_coord(z, d, out_d)).collect();
    let ys: Vec<_> = (0..out_h).map(|y| sample_coord(y, h, out_h)).collect();
    let xs: Vec<_> = (0..out_w).map(|x| sample_coord(x, w, out_w)).collect();
    let mut out = Vec::with_capacity(n * c * out_d * out_h * out_w);
    let at = |vol: &[f32], z: usize, y: usize, x: usize| vol[(z * h + y) * w + x];
    for vol in input.data.chunks(d * h * w) {
        for &(z0, z1, tz) in &zs {
            for &(y0, y1, ty) in &ys {
                for &(x0, x1, tx) in &xs {
                    let c00 = lerp(at(vol, z0, y0, x0), at(vol, z0, y0, x1), tx);
                    let c01 = lerp(at(vol, z0, y1, x0), at(vol, z0, y1, x1), tx);
                    let c10 = lerp(at(vol, z1, y0, x0), at(vol, z1, y0, x1), tx);
                    let c11 = lerp(at(vol, z1, y1, x0), at(vol, z1, y1, x1), tx);
                    let near = lerp(c00, c01, ty);
                    let far = lerp(c10, c11, ty);
                    out.push(lerp(near, far, tz));
                }
            }
        }
    }
    Tensor::new(vec![n, c, out_d, out_h, out_w], out)
}

/// Resamples every spatial axis by `scale` (output extent `floor(len * scale)`).
///
/// Bilinear acts on the two trailing axes of a 4-D tensor, trilinear on the
/// three trailing axes of a 5-D tensor.
pub fn interpolate(input: &Tensor, scale: f64, mode: InterpMode) -> Result<Tensor> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "interpolation scale must be positive, got {scale}"
        )));
    }
    let sized = |len: usize| ((len as f64 * scale).floor() as usize).max(1);
    match mode {
        InterpMode::Bilinear => {
            let (_, _, h, w) = input.dims4()?;
            resize_bilinear(input, sized(h), sized(w))
        }
        InterpMode::Trilinear => {
            let (_, _, d, h, w) = input.dims5().map_err(|_| {
                Error::InvalidArgument("trilinear interpolation needs a 5-D tensor".into())
            })?;
            resize_trilinear(input, sized(d), sized(h), sized(w))
        }
    }
}

/// Numerically stable softmax along `axis`; normalization is accumulated in
/// `f64` so every fiber sums to one within a few ulps.
pub fn softmax(input: &Tensor, axis: usize) -> Result<Tensor> {
    if axis >= input.rank() {
        return Err(Error::InvalidArgument(format!(
            "softmax axis {axis} out of range for rank {}",
            input.rank()
        )));
    }
    let len = input.shape[axis];
    let inner: usize = input.shape[axis + 1..].iter().product();
    let outer: usize = input.shape[..axis].iter().product();
    let mut out = vec![0.0f32; input.len()];
    let mut fiber = vec![0.0f64; len];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let max = (0..len)
                .map(|k| input.data[base + k * inner])
                .fold(f32::NEG_INFINITY, f32::max);
            let mut sum = 0.0f64;
            for (k, e) in fiber.iter_mut().enumerate() {
                *e = ((input.data[base + k * inner] - max) as f64).exp();
                sum += *e;
            }
            for (k, e) in fiber.iter().enumerate() {
                out[base + k * inner] = (e / sum) as f32;
            }
        }
    }
    Tensor::new(input.shape.clone(), out)
}

pub fn leaky_relu(input: &Tensor, slope: f32) -> Tensor {
    input.map(|v| if v >= 0.0 { v } else { v * slope })
}

pub fn leaky_relu_inplace(t: &mut Tensor, slope: f32) {
    for v in t.data.iter_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

#[inline]
pub fn sigmoid_scalar(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    input.map(sigmoid_scalar)
}
