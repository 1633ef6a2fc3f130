//! Scalar quantization of encoder outputs onto a fixed level set.

use crate::error::{Error, Result};

/// Number of levels in the default level set.
pub const DEFAULT_LEVELS: usize = 25;

/// Softness used by the training-time surrogate when none is given.
pub const DEFAULT_SIGMA_Q: f32 = 2.0;

/// Ordered quantization levels plus the softness of the soft assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizerSpec {
    levels: Vec<f32>,
    sigma_q: f32,
}

impl Default for QuantizerSpec {
    /// 25 levels evenly spaced over `[-1, 1]`, spacing `1/12`.
    fn default() -> Self {
        let levels = (0..DEFAULT_LEVELS)
            .map(|j| -1.0 + j as f32 / 12.0)
            .collect();
        QuantizerSpec {
            levels,
            sigma_q: DEFAULT_SIGMA_Q,
        }
    }
}

impl QuantizerSpec {
    pub fn new(levels: Vec<f32>, sigma_q: f32) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("empty level set".into()));
        }
        if levels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "levels must be strictly increasing".into(),
            ));
        }
        if !(sigma_q > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "softness must be positive, got {sigma_q}"
            )));
        }
        Ok(QuantizerSpec { levels, sigma_q })
    }

    pub fn with_sigma(mut self, sigma_q: f32) -> Result<Self> {
        if !(sigma_q > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "softness must be positive, got {sigma_q}"
            )));
        }
        self.sigma_q = sigma_q;
        Ok(self)
    }

    pub fn levels(&self) -> &[f32] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn sigma_q(&self) -> f32 {
        self.sigma_q
    }

    pub fn level(&self, index: usize) -> f32 {
        self.levels[index]
    }

    /// Nearest level and its index. Exact midpoints resolve to the lower
    /// index; the index is what gets entropy coded, so the rule is fixed.
    pub fn quantize_hard(&self, z: f32) -> (f32, usize) {
        let mut best = 0;
        let mut best_dist = (self.levels[0] - z).abs();
        for (j, &l) in self.levels.iter().enumerate().skip(1) {
            let dist = (l - z).abs();
            if dist < best_dist {
                best = j;
                best_dist = dist;
            }
        }
        (self.levels[best], best)
    }

    pub fn index_of(&self, z: f32) -> usize {
        self.quantize_hard(z).1
    }

    /// Softmax-weighted level average with weights `exp(-sigma_q |l_j - z|)`.
    pub fn quantize_soft(&self, z: f32) -> f32 {
        let sigma = self.sigma_q as f64;
        let z = z as f64;
        // largest weight <=> smallest distance
        let min_dist = self
            .levels
            .iter()
            .map(|&l| (l as f64 - z).abs())
            .fold(f64::INFINITY, f64::min);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for &l in &self.levels {
            let wgt = (-sigma * ((l as f64 - z).abs() - min_dist)).exp();
            num += wgt * l as f64;
            den += wgt;
        }
        (num / den) as f32
    }

    /// Forward value of the straight-through estimator; equal to the hard
    /// assignment. The matching backward surrogate is [`Self::quantize_soft`].
    pub fn quantize_ste(&self, z: f32) -> f32 {
        self.quantize_hard(z).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scan_nearest(levels: &[f32], z: f32) -> usize {
        // independent oracle: collect distances, take the first minimum
        let d: Vec<f32> = levels.iter().map(|l| (l - z).abs()).collect();
        let m = d.iter().cloned().fold(f32::INFINITY, f32::min);
        d.iter().position(|&v| v == m).unwrap()
    }

    #[test]
    fn default_levels() {
        let q = QuantizerSpec::default();
        assert_eq!(q.len(), 25);
        assert_eq!(q.level(0), -1.0);
        assert_eq!(q.level(12), 0.0);
        assert_eq!(q.level(24), 1.0);
    }

    #[test]
    fn hard_examples() {
        let q = QuantizerSpec::default();
        let top = q.level(23);
        assert!((top - 11.0 / 12.0).abs() < 1e-7);
        assert_eq!(q.quantize_hard(top), (top, 23));
        let (v, i) = q.quantize_hard(0.9);
        assert_eq!(i, scan_nearest(q.levels(), 0.9));
        assert_eq!(i, 23);
        assert!((v - 0.916_666_7).abs() < 1e-6);
    }

    #[test]
    fn midpoint_tie_goes_low() {
        let q = QuantizerSpec::new(vec![-1.0, -0.5, 0.0, 0.5, 1.0], 2.0).unwrap();
        assert_eq!(q.quantize_hard(-0.75), (-1.0, 0));
        assert_eq!(q.quantize_hard(0.25), (0.0, 2));

        let q = QuantizerSpec::default();
        let mid = (q.level(0) + q.level(1)) / 2.0;
        assert!((mid - (-23.0 / 24.0)).abs() < 1e-7);
        assert_eq!(q.quantize_hard(mid).1, scan_nearest(q.levels(), mid));
        assert_eq!(q.quantize_hard(mid), (-1.0, 0));
        assert_eq!(q.quantize_ste(mid), -1.0);
    }

    #[test]
    fn soft_examples() {
        let two = QuantizerSpec::new(vec![-1.0, 1.0], 1.0).unwrap();
        assert_eq!(two.quantize_soft(0.0), 0.0);
        assert!(two.clone().with_sigma(7.0).unwrap().quantize_soft(0.0).abs() < 1e-7);
        // (e^-0.5 - e^-1.5) / (e^-0.5 + e^-1.5) = tanh(0.5)
        assert!((two.quantize_soft(0.5) - 0.5f32.tanh()).abs() < 1e-6);

        let sharp = QuantizerSpec::default().with_sigma(1000.0).unwrap();
        assert!((sharp.quantize_soft(0.9) - sharp.quantize_hard(0.9).0).abs() < 1e-6);
    }

    #[test]
    fn ste_forward_equals_hard() {
        let q = QuantizerSpec::default();
        assert_eq!(q.quantize_ste(0.9), q.quantize_hard(0.9).0);
        for &l in q.levels() {
            assert_eq!(q.quantize_ste(l), l);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(QuantizerSpec::new(vec![], 1.0).is_err());
        assert!(QuantizerSpec::new(vec![0.0, 0.0], 1.0).is_err());
        assert!(QuantizerSpec::new(vec![0.0, 1.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn hard_is_idempotent(z in -3.0f32..3.0) {
            let q = QuantizerSpec::default();
            let (v, i) = q.quantize_hard(z);
            prop_assert_eq!(q.quantize_hard(v), (v, i));
            prop_assert_eq!(q.level(i), v);
            prop_assert_eq!(i, scan_nearest(q.levels(), z));
        }

        #[test]
        fn soft_is_monotone(mut zs in proptest::collection::vec(-1.5f32..1.5, 2..40)) {
            let q = QuantizerSpec::default();
            zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let out: Vec<f32> = zs.iter().map(|&z| q.quantize_soft(z)).collect();
            for w in out.windows(2) {
                prop_assert!(w[0] <= w[1] + 1e-6);
            }
        }
    }
}
