//! Discretized logistic mixtures and their conversion to integer CDF tables.
//!
//! Image pixels are modelled on symbols `0..=255` with unit bins; the network
//! predicts means in `[-1, 1]` units which are mapped to the symbol domain by
//! `127.5 * (mu + 1)`. Channels 2 and 3 shift their means by a linear function
//! of the already decoded channels of the same pixel (normalized to `[-1, 1]`).
//! Feature planes use the 25 quantizer levels with bin width `1/12` and no
//! autoregression.
//!
//! The outermost bins are open: the lowest symbol takes all mass below its
//! upper edge and the highest all mass above its lower edge, so a PMF always
//! telescopes to one.
//!
//! All probability math is `f64`. The mapping from PMF to [`CdfTable`] is part
//! of the bitstream definition and must not change.

use crate::error::{Error, Result};

/// Bits of probability resolution in a [`CdfTable`].
pub const CDF_BITS: u32 = 16;
/// Total mass of every [`CdfTable`].
pub const CDF_TOTAL: u32 = 1 << CDF_BITS;

pub const IMAGE_ALPHABET: usize = 256;
pub const FEATURE_ALPHABET: usize = 25;

/// Bin width of the feature alphabet, equal to the quantizer level spacing.
pub const FEATURE_BIN: f64 = 1.0 / 12.0;

const LOG_SCALE_MIN: f32 = -7.0;
const LOG_SCALE_MAX: f32 = 7.0;
const IMAGE_HALF_RANGE: f64 = 127.5;

/// Cumulative integer counts `c_0 = 0 < c_1 < ... < c_A = CDF_TOTAL`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CdfTable {
    cum: Vec<u32>,
}

impl CdfTable {
    /// Builds a table from per-symbol counts; every count must be positive
    /// and they must sum to [`CDF_TOTAL`].
    pub fn from_counts(counts: &[u32]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidArgument("empty alphabet".into()));
        }
        let mut cum = Vec::with_capacity(counts.len() + 1);
        cum.push(0u32);
        let mut acc = 0u64;
        for &c in counts {
            if c == 0 {
                return Err(Error::InvalidArgument("zero-width symbol interval".into()));
            }
            acc += c as u64;
            if acc > CDF_TOTAL as u64 {
                return Err(Error::InvalidArgument("counts exceed table total".into()));
            }
            cum.push(acc as u32);
        }
        if acc != CDF_TOTAL as u64 {
            return Err(Error::InvalidArgument(format!(
                "counts sum to {acc}, expected {CDF_TOTAL}"
            )));
        }
        Ok(CdfTable { cum })
    }

    pub fn alphabet(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn cumulative(&self) -> &[u32] {
        &self.cum
    }

    /// `(c_s, c_{s+1})`.
    #[inline]
    pub fn interval(&self, symbol: usize) -> (u32, u32) {
        (self.cum[symbol], self.cum[symbol + 1])
    }

    #[inline]
    pub fn count(&self, symbol: usize) -> u32 {
        self.cum[symbol + 1] - self.cum[symbol]
    }

    pub fn counts(&self) -> Vec<u32> {
        self.cum.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// The symbol `s` with `c_s <= value < c_{s+1}`.
    #[inline]
    pub fn find(&self, value: u32) -> usize {
        // partition_point gives the first index with cum > value
        self.cum.partition_point(|&c| c <= value) - 1
    }

    /// `-log2(count / total)`, the ideal code length of `symbol`.
    pub fn ideal_bits(&self, symbol: usize) -> f64 {
        CDF_BITS as f64 - (self.count(symbol) as f64).log2()
    }
}

/// Uniform table; the `CDF_TOTAL % alphabet` leftover counts go to the first
/// symbols.
pub fn uniform_cdf(alphabet: usize) -> CdfTable {
    assert!(alphabet >= 1 && alphabet <= CDF_TOTAL as usize);
    let base = CDF_TOTAL / alphabet as u32;
    let extra = (CDF_TOTAL % alphabet as u32) as usize;
    let counts: Vec<u32> = (0..alphabet)
        .map(|s| base + u32::from(s < extra))
        .collect();
    CdfTable::from_counts(&counts).expect("uniform counts are valid")
}

/// Quantizes a PMF to a [`CdfTable`].
///
/// Each symbol gets `max(1, floor(p * 2^16))` counts. A positive residual
/// adds one count to each of the most probable symbols; a negative residual
/// removes one count at a time from the most probable symbols that still
/// hold more than one, cycling until the total is exact. Ties in probability
/// are broken by lower symbol index. Non-finite or negative entries count as
/// zero.
pub fn pmf_to_cdf(pmf: &[f64]) -> CdfTable {
    let a = pmf.len();
    assert!(a >= 1 && a <= CDF_TOTAL as usize, "alphabet size {a}");
    let clean = |p: f64| if p > 0.0 && p < f64::INFINITY { p } else { 0.0 };
    let mut counts: Vec<u32> = pmf
        .iter()
        .map(|&p| ((clean(p) * CDF_TOTAL as f64) as u32).clamp(1, CDF_TOTAL))
        .collect();
    let sum: i64 = counts.iter().map(|&c| c as i64).sum();
    let mut residual = CDF_TOTAL as i64 - sum;
    if residual == 0 {
        return CdfTable::from_counts(&counts).expect("quantized counts are valid");
    }
    // non-negative doubles order like their bit patterns, so ascending keys
    // give probability descending; equal keys fall back to index order
    let keys: Vec<u64> = pmf.iter().map(|&p| !clean(p).to_bits()).collect();
    let mut scratch = Vec::with_capacity(a);
    while residual > 0 {
        let take = (residual as usize).min(a);
        for_most_probable(&keys, |_| true, take, &mut scratch, |s| counts[s] += 1);
        residual -= take as i64;
    }
    while residual < 0 {
        // one round-robin pass: every symbol that can still give a count
        // gives one, most probable first, until the total is exact
        let open: Vec<bool> = counts.iter().map(|&c| c > 1).collect();
        let m = open.iter().filter(|&&o| o).count();
        assert!(m > 0, "cdf residual cannot be absorbed");
        let deficit = (-residual) as usize;
        if deficit >= m {
            // whole passes, as many as every open symbol can afford
            let room = counts.iter().filter(|&&c| c > 1).map(|&c| c as usize - 1).min().unwrap_or(0);
            let passes = (deficit / m).min(room);
            for c in counts.iter_mut().filter(|c| **c > 1) {
                *c -= passes as u32;
            }
            residual += (passes * m) as i64;
            continue;
        }
        let take = deficit;
        for_most_probable(&keys, |s| open[s], take, &mut scratch, |s| counts[s] -= 1);
        residual += take as i64;
    }
    CdfTable::from_counts(&counts).expect("quantized counts are valid")
}

/// Calls `f` on the `n` eligible symbols with the smallest keys, ties going
/// to the lower index.
fn for_most_probable(
    keys: &[u64],
    eligible: impl Fn(usize) -> bool,
    n: usize,
    scratch: &mut Vec<u64>,
    mut f: impl FnMut(usize),
) {
    scratch.clear();
    scratch.extend((0..keys.len()).filter(|&s| eligible(s)).map(|s| keys[s]));
    if n == 0 {
        return;
    }
    let threshold = if n < scratch.len() {
        *scratch.select_nth_unstable(n - 1).1
    } else {
        u64::MAX
    };
    let below = scratch.iter().filter(|&&k| k < threshold).count();
    let mut at = n - below.min(n);
    for (s, &k) in keys.iter().enumerate() {
        if !eligible(s) {
            continue;
        }
        if k < threshold {
            f(s);
        } else if k == threshold && at > 0 {
            f(s);
            at -= 1;
        }
    }
}

const SATURATION: f64 = 40.0;

#[inline]
fn logistic_cdf(x: f64) -> f64 {
    if x < -SATURATION {
        0.0
    } else if x > SATURATION {
        1.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Probability of the bin of width `b` centred on `z` under a logistic with
/// location `mu` and scale `sigma`. Bins at or below `lowest` are open to
/// `-inf`, bins at or above `highest` open to `+inf`.
pub fn logistic_bin(z: f64, mu: f64, sigma: f64, b: f64, lowest: f64, highest: f64) -> f64 {
    let upper = if z >= highest {
        1.0
    } else {
        logistic_cdf((z + b / 2.0 - mu) / sigma)
    };
    let lower = if z <= lowest {
        0.0
    } else {
        logistic_cdf((z - b / 2.0 - mu) / sigma)
    };
    upper - lower
}

#[inline]
fn scale_from_raw(raw: f32) -> f64 {
    (raw.clamp(LOG_SCALE_MIN, LOG_SCALE_MAX) as f64).exp()
}

fn softmax_weights(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let mut w: Vec<f64> = logits.iter().map(|&l| ((l - max) as f64).exp()).collect();
    let sum: f64 = w.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        let u = 1.0 / w.len() as f64;
        w.iter_mut().for_each(|v| *v = u);
    } else {
        w.iter_mut().for_each(|v| *v /= sum);
    }
    w
}

/// Fills `pmf` from the mixture CDF evaluated at `len - 1` interior bin
/// edges `first + i * step`.
///
/// Inside the unsaturated band each component's `exp(-x)` is advanced by a
/// constant factor per edge instead of being re-evaluated.
fn mixture_pmf(weights: &[f64], means: &[f64], scales: &[f64], first: f64, step: f64, pmf: &mut [f64]) {
    let edges = pmf.len() - 1;
    pmf.iter_mut().for_each(|p| *p = 0.0);
    for k in 0..weights.len() {
        let (w, mu, sigma) = (weights[k], means[k], scales[k]);
        let ratio = (-step / sigma).exp();
        let x_at = |i: usize| (first + i as f64 * step - mu) / sigma;
        // x is non-decreasing in i, so the band edges can be searched
        let lo = partition_point(edges, |i| x_at(i) < -SATURATION);
        let hi = lo + partition_point(edges - lo, |i| !(x_at(lo + i) > SATURATION));
        if lo < hi {
            let mut e = (-x_at(lo)).exp();
            pmf[lo] += w / (1.0 + e);
            for slot in pmf[lo + 1..hi].iter_mut() {
                e *= ratio;
                *slot += w / (1.0 + e);
            }
        }
        for slot in pmf[hi..edges].iter_mut() {
            *slot += w;
        }
    }
    let mut prev = 0.0f64;
    for slot in pmf[..edges].iter_mut() {
        let cdf = *slot;
        *slot = cdf - prev;
        prev = cdf;
    }
    pmf[edges] = 1.0 - prev;
}

/// First `i` in `0..n` where `pred` is false; `pred` must hold on a prefix.
fn partition_point(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Number of raw parameters per pixel emitted for the image scale.
pub fn image_param_count(k: usize) -> usize {
    3 * 3 * k + 3 * k
}

/// Number of raw parameters per pixel emitted for a feature scale.
pub fn feature_param_count(k: usize, channels: usize) -> usize {
    channels * 3 * k
}

/// Activated mixture parameters of one RGB pixel.
///
/// Raw layout (`K` components): `pi[c*K + k]`, then `mu`, then log-scale in
/// the same `3K` arrangement, followed by `lambda_alpha[k]`,
/// `lambda_beta[k]`, `lambda_gamma[k]`.
#[derive(Clone, Debug)]
pub struct ImageMixture {
    k: usize,
    weights: [Vec<f64>; 3],
    means: [Vec<f64>; 3],
    scales: [Vec<f64>; 3],
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
}

impl ImageMixture {
    pub fn from_raw(raw: &[f32], k: usize) -> Result<Self> {
        if k == 0 || raw.len() != image_param_count(k) {
            return Err(Error::shape(format!(
                "image mixture with K={k} needs {} parameters, got {}",
                image_param_count(k),
                raw.len()
            )));
        }
        let block = |off: usize, c: usize| &raw[off + c * k..off + (c + 1) * k];
        let weights = [0, 1, 2].map(|c| softmax_weights(block(0, c)));
        let means = [0, 1, 2].map(|c| block(3 * k, c).iter().map(|&m| m as f64).collect());
        let scales = [0, 1, 2].map(|c| block(6 * k, c).iter().map(|&s| scale_from_raw(s)).collect());
        let lam = |i: usize| raw[9 * k + i * k..9 * k + (i + 1) * k].iter().map(|&v| v as f64).collect();
        Ok(ImageMixture {
            k,
            weights,
            means,
            scales,
            alpha: lam(0),
            beta: lam(1),
            gamma: lam(2),
        })
    }

    pub fn components(&self) -> usize {
        self.k
    }

    /// Per-component means in the symbol domain for `channel`, given the
    /// decoded symbols of the earlier channels of the same pixel.
    pub fn symbol_means(&self, channel: usize, prev: &[u8]) -> Result<Vec<f64>> {
        if channel > 2 {
            return Err(Error::InvalidArgument(format!("image channel {channel}")));
        }
        if prev.len() < channel {
            return Err(Error::InvalidArgument(format!(
                "channel {} needs {} decoded channels, got {}",
                channel + 1,
                channel,
                prev.len()
            )));
        }
        let norm = |s: u8| s as f64 / IMAGE_HALF_RANGE - 1.0;
        Ok((0..self.k)
            .map(|k| {
                let mut mu = self.means[channel][k];
                match channel {
                    1 => mu += self.alpha[k] * norm(prev[0]),
                    2 => mu += self.beta[k] * norm(prev[0]) + self.gamma[k] * norm(prev[1]),
                    _ => {}
                }
                IMAGE_HALF_RANGE * (mu + 1.0)
            })
            .collect())
    }

    /// 256-bin PMF of `channel` (0 = R, 1 = G, 2 = B).
    pub fn pmf(&self, channel: usize, prev: &[u8], pmf: &mut [f64]) -> Result<()> {
        if pmf.len() != IMAGE_ALPHABET {
            return Err(Error::shape("image pmf buffer must hold 256 bins"));
        }
        let means = self.symbol_means(channel, prev)?;
        let scales: Vec<f64> = self.scales[channel]
            .iter()
            .map(|s| s * IMAGE_HALF_RANGE)
            .collect();
        mixture_pmf(&self.weights[channel], &means, &scales, 0.5, 1.0, pmf);
        Ok(())
    }
}

/// Activated mixture parameters of one feature pixel (`channels` planes).
///
/// Raw layout: `pi[c*K + k]` for all channels, then `mu`, then log-scale.
#[derive(Clone, Debug)]
pub struct FeatureMixture {
    k: usize,
    channels: usize,
    weights: Vec<Vec<f64>>,
    means: Vec<Vec<f64>>,
    scales: Vec<Vec<f64>>,
}

impl FeatureMixture {
    pub fn from_raw(raw: &[f32], k: usize, channels: usize) -> Result<Self> {
        if k == 0 || raw.len() != feature_param_count(k, channels) {
            return Err(Error::shape(format!(
                "feature mixture with K={k}, C={channels} needs {} parameters, got {}",
                feature_param_count(k, channels),
                raw.len()
            )));
        }
        let stride = channels * k;
        let block = |off: usize, c: usize| &raw[off + c * k..off + (c + 1) * k];
        Ok(FeatureMixture {
            k,
            channels,
            weights: (0..channels).map(|c| softmax_weights(block(0, c))).collect(),
            means: (0..channels)
                .map(|c| block(stride, c).iter().map(|&m| m as f64).collect())
                .collect(),
            scales: (0..channels)
                .map(|c| block(2 * stride, c).iter().map(|&s| scale_from_raw(s)).collect())
                .collect(),
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// 25-bin PMF over the quantizer levels for `channel`.
    pub fn pmf(&self, channel: usize, pmf: &mut [f64]) -> Result<()> {
        if channel >= self.channels {
            return Err(Error::InvalidArgument(format!("feature channel {channel}")));
        }
        if pmf.len() != FEATURE_ALPHABET {
            return Err(Error::shape("feature pmf buffer must hold 25 bins"));
        }
        mixture_pmf(
            &self.weights[channel],
            &self.means[channel],
            &self.scales[channel],
            -1.0 + 0.5 * FEATURE_BIN,
            FEATURE_BIN,
            pmf,
        );
        debug_assert_eq!(self.k, self.weights[channel].len());
        Ok(())
    }
}

/// `sum_i p_i * -log2 p_i` in bits.
pub fn entropy_bits(pmf: &[f64]) -> f64 {
    pmf.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Residual rule applied literally: sort once, then walk the order.
    fn reference_cdf_counts(pmf: &[f64]) -> Vec<u32> {
        let clean = |p: f64| if p.is_finite() && p > 0.0 { p } else { 0.0 };
        let total = CDF_TOTAL as f64;
        let mut counts: Vec<u32> = pmf
            .iter()
            .map(|&p| ((clean(p) * total).floor().min(total) as u32).max(1))
            .collect();
        let mut residual = CDF_TOTAL as i64 - counts.iter().map(|&c| c as i64).sum::<i64>();
        let mut order: Vec<usize> = (0..pmf.len()).collect();
        order.sort_by(|&a, &b| clean(pmf[b]).total_cmp(&clean(pmf[a])).then(a.cmp(&b)));
        while residual > 0 {
            for &s in &order {
                if residual == 0 {
                    break;
                }
                counts[s] += 1;
                residual -= 1;
            }
        }
        while residual < 0 {
            for &s in &order {
                if residual < 0 && counts[s] > 1 {
                    counts[s] -= 1;
                    residual += 1;
                }
            }
        }
        counts
    }

    /// Per-edge scan with the same recurrence, used to check the band search.
    fn scan_mixture_pmf(weights: &[f64], means: &[f64], scales: &[f64], first: f64, step: f64, pmf: &mut [f64]) {
        let edges = pmf.len() - 1;
        pmf.iter_mut().for_each(|p| *p = 0.0);
        for k in 0..weights.len() {
            let (w, mu, sigma) = (weights[k], means[k], scales[k]);
            let ratio = (-step / sigma).exp();
            let mut decay: Option<f64> = None;
            for (i, slot) in pmf[..edges].iter_mut().enumerate() {
                let x = (first + i as f64 * step - mu) / sigma;
                if x < -SATURATION {
                    continue;
                }
                if x > SATURATION {
                    *slot += w;
                    continue;
                }
                let e = decay.map_or_else(|| (-x).exp(), |prev| prev * ratio);
                decay = Some(e);
                *slot += w / (1.0 + e);
            }
        }
        let mut prev = 0.0f64;
        for slot in pmf[..edges].iter_mut() {
            let cdf = *slot;
            *slot = cdf - prev;
            prev = cdf;
        }
        pmf[edges] = 1.0 - prev;
    }

    #[test]
    fn band_search_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for case in 0..5000 {
            let k = 1 + case % 4;
            let weights = softmax_weights(&(0..k).map(|_| rng.gen_range(-3.0f32..3.0)).collect::<Vec<_>>());
            let means: Vec<f64> = (0..k).map(|_| rng.gen_range(-80.0..340.0)).collect();
            let scales: Vec<f64> = (0..k).map(|_| rng.gen_range(-8.0f64..6.0).exp()).collect();
            let (mut a, mut b) = (vec![0.0; 256], vec![0.0; 256]);
            mixture_pmf(&weights, &means, &scales, 0.5, 1.0, &mut a);
            scan_mixture_pmf(&weights, &means, &scales, 0.5, 1.0, &mut b);
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()), "case {case}");
        }
    }

    #[test]
    fn cdf_matches_reference_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for case in 0..3000 {
            let a = [2, 3, 25, 256][case % 4];
            let mut pmf: Vec<f64> = match case % 5 {
                // many tiny bins push the residual negative
                0 => (0..a).map(|i| if i == 0 { 1.0 } else { 1e-9 }).collect(),
                // repeated values exercise the index tie-break
                1 => (0..a).map(|i| [0.1, 0.1, 0.3, 1e-7][i % 4]).collect(),
                2 => (0..a).map(|_| rng.gen::<f64>().powi(8)).collect(),
                3 => (0..a).map(|i| if i % 7 == 0 { 0.0 } else { rng.gen() }).collect(),
                _ => (0..a).map(|_| rng.gen()).collect(),
            };
            let sum: f64 = pmf.iter().sum();
            pmf.iter_mut().for_each(|p| *p /= sum);
            assert_eq!(pmf_to_cdf(&pmf).counts(), reference_cdf_counts(&pmf), "case {case}");
        }
    }

    #[test]
    fn single_bin_value() {
        let p = logistic_bin(0.0, 0.0, 1.0, 1.0, -1e9, 1e9);
        assert!((p - (sigmoid(0.5) - sigmoid(-0.5))).abs() < 1e-15);
        assert!((p - 0.244_918_662).abs() < 1e-8);
    }

    #[test]
    fn bins_telescope_to_one() {
        let sum: f64 = (0..256)
            .map(|z| logistic_bin(z as f64, 100.3, 7.0, 1.0, 0.0, 255.0))
            .sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let top = logistic_bin(255.0, 1e6, 1.0, 1.0, 0.0, 255.0);
        assert_eq!(top, 1.0);
    }

    fn raw_image(k: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
        (0..image_param_count(k)).map(|_| rng.gen_range(-2.0..2.0)).collect()
    }

    #[test]
    fn image_k1_equals_single_logistic() {
        // pi irrelevant for K=1, mu in [-1,1] units, log-scale, lambdas zero
        let raw = vec![0.0, 0.0, 0.0, -0.2, 0.1, 0.5, -3.0, -2.0, -1.0, 0.0, 0.0, 0.0];
        let m = ImageMixture::from_raw(&raw, 1).unwrap();
        let mut pmf = vec![0.0; 256];
        for c in 0..3 {
            m.pmf(c, &[17, 200], &mut pmf).unwrap();
            let mu = 127.5 * (raw[3 + c] as f64 + 1.0);
            let s = 127.5 * (raw[6 + c] as f64).exp();
            for z in 0..256 {
                let want = logistic_bin(z as f64, mu, s, 1.0, 0.0, 255.0);
                assert!((pmf[z] - want).abs() < 1e-12, "c={c} z={z}");
            }
        }
    }

    #[test]
    fn image_two_component_average() {
        let k = 2;
        let mut raw = vec![0.0f32; image_param_count(k)];
        // means -0.9 and 0.9 for every channel, log-scales -3
        for c in 0..3 {
            raw[3 * k + c * k] = -0.9;
            raw[3 * k + c * k + 1] = 0.9;
            raw[6 * k + c * k] = -3.0;
            raw[6 * k + c * k + 1] = -3.0;
        }
        let m = ImageMixture::from_raw(&raw, k).unwrap();
        let mut pmf = vec![0.0; 256];
        m.pmf(0, &[], &mut pmf).unwrap();
        let s = 127.5 * (-3.0f64).exp();
        let (m0, m1) = (127.5 * (1.0 - 0.9f32 as f64), 127.5 * (1.0 + 0.9f32 as f64));
        for z in 0..256 {
            let a = logistic_bin(z as f64, m0, s, 1.0, 0.0, 255.0);
            let b = logistic_bin(z as f64, m1, s, 1.0, 0.0, 255.0);
            assert!((pmf[z] - 0.5 * (a + b)).abs() < 1e-12);
        }
    }

    #[test]
    fn autoregressive_mean_shift() {
        let k = 1;
        let mut raw = vec![0.0f32; image_param_count(k)];
        raw[9] = 0.5; // alpha
        raw[10] = -0.25; // beta
        raw[11] = 1.0; // gamma
        let m = ImageMixture::from_raw(&raw, k).unwrap();
        let x1 = 255u8; // normalized 1.0
        let x2 = 0u8; // normalized -1.0
        assert_eq!(m.symbol_means(1, &[x1]).unwrap(), vec![127.5 * 1.5]);
        assert_eq!(
            m.symbol_means(2, &[x1, x2]).unwrap(),
            vec![127.5 * (1.0 - 0.25 - 1.0)]
        );
        assert!(m.symbol_means(1, &[]).is_err());
        let mut pmf = vec![0.0; 256];
        assert!(m.pmf(2, &[3], &mut pmf).is_err());
    }

    #[test]
    fn random_image_pmfs_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pmf = vec![0.0; 256];
        for _ in 0..200 {
            let k = rng.gen_range(1..6);
            let m = ImageMixture::from_raw(&raw_image(k, &mut rng), k).unwrap();
            for c in 0..3 {
                m.pmf(c, &[rng.gen(), rng.gen()], &mut pmf).unwrap();
                let s: f64 = pmf.iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
                assert!(pmf.iter().all(|&p| p >= -1e-15));
            }
        }
    }

    #[test]
    fn feature_pmf_cases() {
        let k = 1;
        // mu = 0 (level 12), small scale
        let raw = vec![0.0f32, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -5.0, -5.0, -5.0, -5.0, -5.0];
        let m = FeatureMixture::from_raw(&raw, k, 5).unwrap();
        let mut pmf = vec![0.0; 25];
        m.pmf(0, &mut pmf).unwrap();
        let mode = (0..25).max_by(|&a, &b| pmf[a].total_cmp(&pmf[b])).unwrap();
        assert_eq!(mode, 12);
        // direct evaluation of the central bin
        let s = (-5.0f64).exp();
        let want = logistic_bin(0.0, 0.0, s, FEATURE_BIN, -1.0, 1.0);
        assert!((pmf[12] - want).abs() < 1e-12);

        let flat = vec![0.0f32, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 7.0, 7.0, 7.0, 7.0, 7.0];
        let m = FeatureMixture::from_raw(&flat, 1, 5).unwrap();
        m.pmf(3, &mut pmf).unwrap();
        // interior bins share the nearly flat density, the open end bins take the tails
        for j in 2..24 {
            assert!((pmf[j] - pmf[1]).abs() < 1e-9);
        }
        assert!((pmf[0] - pmf[24]).abs() < 1e-9);
        assert!(pmf[0] > 0.49);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_to_cdf_examples() {
        let t = pmf_to_cdf(&vec![1.0 / 256.0; 256]);
        assert!(t.counts().iter().all(|&c| c == 256));
        let t = pmf_to_cdf(&[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(t.counts(), vec![65533, 1, 1, 1]);
        assert_eq!(*t.cumulative().last().unwrap(), CDF_TOTAL);
        // positive residual goes to the most probable symbols
        let t = pmf_to_cdf(&[0.5, 0.3, 0.2]);
        assert_eq!(t.counts().iter().sum::<u32>(), CDF_TOTAL);
        let t = pmf_to_cdf(&[f64::NAN, f64::NAN]);
        assert_eq!(t.counts(), vec![32768, 32768]);
    }

    #[test]
    fn uniform_tables() {
        assert!(uniform_cdf(256).counts().iter().all(|&c| c == 256));
        let c = uniform_cdf(25).counts();
        assert!(c[..11].iter().all(|&v| v == 2622));
        assert!(c[11..].iter().all(|&v| v == 2621));
        assert_eq!(c.iter().sum::<u32>(), 65536);
    }

    #[test]
    fn find_symbol() {
        let t = CdfTable::from_counts(&[10, 65516, 10]).unwrap();
        assert_eq!(t.find(0), 0);
        assert_eq!(t.find(9), 0);
        assert_eq!(t.find(10), 1);
        assert_eq!(t.find(65525), 1);
        assert_eq!(t.find(65526), 2);
        assert_eq!(t.find(65535), 2);
        assert!(CdfTable::from_counts(&[0, 65536]).is_err());
        assert!(CdfTable::from_counts(&[1, 65534]).is_err());
    }

    #[test]
    fn sampled_cross_entropy_matches_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = FeatureMixture::from_raw(
            &[0.3f32, -0.2, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.3, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.5, -2.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0],
            2,
            5,
        )
        .unwrap();
        let mut pmf = vec![0.0; 25];
        m.pmf(0, &mut pmf).unwrap();
        let h = entropy_bits(&pmf);
        let n = 200_000;
        let mut cdf = Vec::with_capacity(25);
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        let mut bits = 0.0;
        for _ in 0..n {
            let u: f64 = rng.gen();
            let s = cdf.iter().position(|&c| u < c).unwrap_or(24);
            bits += -pmf[s].log2();
        }
        let ce = bits / n as f64;
        assert!((ce - h).abs() / h < 0.02, "ce {ce} vs h {h}");
    }
}
