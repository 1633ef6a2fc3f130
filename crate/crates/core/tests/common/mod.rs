#![allow(dead_code)]

use l3cs::tensor::{Conv2dOptions, Tensor};
use l3cs::{ModelConfig, StereoPair, SymbolPlane};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small model used by the property and fuzz tests.
pub fn small_config() -> ModelConfig {
    ModelConfig {
        scales: 3,
        channels: 5,
        hidden: 4,
        components: 2,
        max_disparity: 8,
        ..ModelConfig::default()
    }
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..len).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

pub fn random_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> SymbolPlane {
    SymbolPlane::rgb(h, w, (0..3 * h * w).map(|_| rng.gen()).collect()).unwrap()
}

pub fn random_pair(h: usize, w: usize, rng: &mut ChaCha8Rng) -> StereoPair {
    StereoPair::new(random_image(h, w, rng), random_image(h, w, rng)).unwrap()
}

/// Smooth left view with the right view cut `shift` columns further along,
/// so a true disparity of `shift` exists.
pub fn shifted_pair(h: usize, w: usize, shift: usize, rng: &mut ChaCha8Rng) -> StereoPair {
    let wide = w + shift;
    let phase: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let value = |c: usize, y: usize, x: usize| {
        let t = (x as f64 * 0.21 + y as f64 * 0.07 + phase[c] * 6.0).sin();
        (127.5 + 100.0 * t).round() as u8
    };
    let mut left = Vec::with_capacity(3 * h * w);
    let mut right = Vec::with_capacity(3 * h * w);
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                left.push(value(c, y, x));
            }
        }
    }
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                right.push(value(c, y, (x + shift).min(wide - 1)));
            }
        }
    }
    StereoPair::new(SymbolPlane::rgb(h, w, left).unwrap(), SymbolPlane::rgb(h, w, right).unwrap()).unwrap()
}

/// Direct 2-D correlation: every output starts at +0.0, adds in-bounds
/// taps in (channel, row, column) order, then the bias.
pub fn brute_conv2d(x: &Tensor, wt: &Tensor, bias: &[f32], o: Conv2dOptions) -> Tensor {
    let (n, c, h, w) = x.dims4().unwrap();
    let s = wt.shape();
    let (oc, kh, kw) = (s[0], s[2], s[3]);
    let oh = (h + 2 * o.padding - o.dilation * (kh - 1) - 1) / o.stride + 1;
    let ow = (w + 2 * o.padding - o.dilation * (kw - 1) - 1) / o.stride + 1;
    let mut out = Vec::with_capacity(n * oc * oh * ow);
    for b in 0..n {
        for f in 0..oc {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = 0.0f32;
                    for ci in 0..c {
                        for i in 0..kh {
                            for j in 0..kw {
                                let iy = (y * o.stride + i * o.dilation) as isize - o.padding as isize;
                                let ix = (xo * o.stride + j * o.dilation) as isize - o.padding as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += wt.data()[((f * c + ci) * kh + i) * kw + j]
                                    * x.at4(b, ci, iy as usize, ix as usize);
                            }
                        }
                    }
                    out.push(acc + bias[f]);
                }
            }
        }
    }
    Tensor::new(vec![n, oc, oh, ow], out).unwrap()
}

pub fn brute_conv3d(x: &Tensor, wt: &Tensor, bias: &[f32], pad: usize) -> Tensor {
    let (n, c, d, h, w) = x.dims5().unwrap();
    let s = wt.shape();
    let (oc, kd, kh, kw) = (s[0], s[2], s[3], s[4]);
    let (od, oh, ow) = (d + 2 * pad - kd + 1, h + 2 * pad - kh + 1, w + 2 * pad - kw + 1);
    let p = pad as isize;
    let mut out = Vec::with_capacity(n * oc * od * oh * ow);
    for b in 0..n {
        for f in 0..oc {
            for z in 0..od {
                for y in 0..oh {
                    for xo in 0..ow {
                        let mut acc = 0.0f32;
                        for ci in 0..c {
                            for a in 0..kd {
                                for i in 0..kh {
                                    for j in 0..kw {
                                        let iz = (z + a) as isize - p;
                                        let iy = (y + i) as isize - p;
                                        let ix = (xo + j) as isize - p;
                                        if iz < 0
                                            || iy < 0
                                            || ix < 0
                                            || iz >= d as isize
                                            || iy >= h as isize
                                            || ix >= w as isize
                                        {
                                            continue;
                                        }
                                        acc += wt.data()[(((f * c + ci) * kd + a) * kh + i) * kw + j]
                                            * x.at5(b, ci, iz as usize, iy as usize, ix as usize);
                                    }
                                }
                            }
                        }
                        out.push(acc + bias[f]);
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, oc, od, oh, ow], out).unwrap()
}

pub fn brute_cost_volume(l: &Tensor, r: &Tensor, dmax: usize) -> Tensor {
    let (n, c, h, w) = l.dims4().unwrap();
    let mut out = Vec::with_capacity(n * c * dmax * h * w);
    for b in 0..n {
        for ch in 0..c {
            for d in 0..dmax {
                for y in 0..h {
                    for x in 0..w {
                        out.push(if x + d < w {
                            (l.at4(b, ch, y, x + d) - r.at4(b, ch, y, x)).abs()
                        } else {
                            0.0
                        });
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, c, dmax, h, w], out).unwrap()
}

pub fn bitwise_eq(a: &Tensor, b: &Tensor) -> bool {
    a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
}
