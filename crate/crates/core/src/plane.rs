use crate::error::{Error, Result};
use crate::mixture::IMAGE_ALPHABET;
use crate::tensor::Tensor;

/// Integer symbols laid out `channels x height x width`, plus their alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolPlane {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub alphabet: usize,
    pub symbols: Vec<u8>,
}

impl SymbolPlane {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        alphabet: usize,
        symbols: Vec<u8>,
    ) -> Result<Self> {
        if symbols.len() != channels * height * width {
            return Err(Error::shape(format!(
                "plane {channels}x{height}x{width} needs {} symbols, got {}",
                channels * height * width,
                symbols.len()
            )));
        }
        if alphabet == 0 || alphabet > IMAGE_ALPHABET {
            return Err(Error::InvalidArgument(format!("alphabet {alphabet}")));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s as usize >= alphabet) {
            return Err(Error::SymbolOutOfRange {
                symbol: s as u32,
                alphabet,
            });
        }
        Ok(SymbolPlane {
            channels,
            height,
            width,
            alphabet,
            symbols,
        })
    }

    /// 8-bit RGB image, channel-planar.
    pub fn rgb(height: usize, width: usize, symbols: Vec<u8>) -> Result<Self> {
        Self::new(3, height, width, IMAGE_ALPHABET, symbols)
    }

    /// Builds an RGB plane from interleaved `RGBRGB...` bytes.
    pub fn from_interleaved_rgb(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 3 * height * width {
            return Err(Error::shape(format!(
                "interleaved RGB {height}x{width} needs {} bytes, got {}",
                3 * height * width,
                bytes.len()
            )));
        }
        let plane = height * width;
        let mut symbols = vec![0u8; 3 * plane];
        for (i, px) in bytes.chunks_exact(3).enumerate() {
            for c in 0..3 {
                symbols[c * plane + i] = px[c];
            }
        }
        Self::rgb(height, width, symbols)
    }

    pub fn to_interleaved_rgb(&self) -> Vec<u8> {
        let plane = self.height * self.width;
        let mut out = Vec::with_capacity(self.channels * plane);
        for i in 0..plane {
            for c in 0..self.channels {
                out.push(self.symbols[c * plane + i]);
            }
        }
        out
    }

    #[inline]
    pub fn get(&self, c: usize, h: usize, w: usize) -> u8 {
        self.symbols[(c * self.height + h) * self.width + w]
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Replicates the last row/column until the plane is `height x width`.
    pub fn pad_replicate(&self, height: usize, width: usize) -> Self {
        let mut symbols = Vec::with_capacity(self.channels * height * width);
        for c in 0..self.channels {
            for y in 0..height {
                let sy = y.min(self.height - 1);
                for x in 0..width {
                    symbols.push(self.get(c, sy, x.min(self.width - 1)));
                }
            }
        }
        SymbolPlane {
            channels: self.channels,
            height,
            width,
            alphabet: self.alphabet,
            symbols,
        }
    }

    /// Top-left `height x width` region.
    pub fn crop(&self, height: usize, width: usize) -> Self {
        let mut symbols = Vec::with_capacity(self.channels * height * width);
        for c in 0..self.channels {
            for y in 0..height {
                let row = (c * self.height + y) * self.width;
                symbols.extend_from_slice(&self.symbols[row..row + width]);
            }
        }
        SymbolPlane {
            channels: self.channels,
            height,
            width,
            alphabet: self.alphabet,
            symbols,
        }
    }

    /// Image symbols mapped to `[-1, 1]` as `x / 127.5 - 1`, shape `(1, C, H, W)`.
    pub fn to_normalized_tensor(&self) -> Tensor {
        let data = self.symbols.iter().map(|&s| s as f32 / 127.5 - 1.0).collect();
        Tensor::new(vec![1, self.channels, self.height, self.width], data)
            .expect("plane extents match")
    }

    /// Inverse of [`Self::to_normalized_tensor`], rounding and clamping to `0..=255`.
    pub fn from_normalized_tensor(t: &Tensor) -> Result<Self> {
        let (_, c, h, w) = t.dims4()?;
        let symbols = t.data()[..c * h * w]
            .iter()
            .map(|&v| (127.5 * (v + 1.0)).round().clamp(0.0, 255.0) as u8)
            .collect();
        Self::new(c, h, w, IMAGE_ALPHABET, symbols)
    }
}

/// Left and right views of equal size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StereoPair {
    pub left: SymbolPlane,
    pub right: SymbolPlane,
}

impl StereoPair {
    pub fn new(left: SymbolPlane, right: SymbolPlane) -> Result<Self> {
        for (name, v) in [("left", &left), ("right", &right)] {
            if v.channels != 3 || v.alphabet != IMAGE_ALPHABET {
                return Err(Error::Dimension(format!(
                    "{name} view must be 8-bit RGB, got {} channels over {} symbols",
                    v.channels, v.alphabet
                )));
            }
        }
        if (left.height, left.width) != (right.height, right.width) {
            return Err(Error::Dimension(format!(
                "views differ in size: {}x{} vs {}x{}",
                left.width, left.height, right.width, right.height
            )));
        }
        Ok(StereoPair { left, right })
    }

    pub fn height(&self) -> usize {
        self.left.height
    }

    pub fn width(&self) -> usize {
        self.left.width
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleave_roundtrip() {
        let bytes: Vec<u8> = (0..24).collect();
        let p = SymbolPlane::from_interleaved_rgb(2, 4, &bytes).unwrap();
        assert_eq!(p.get(0, 0, 1), 3);
        assert_eq!(p.get(2, 1, 3), 23);
        assert_eq!(p.to_interleaved_rgb(), bytes);
    }

    #[test]
    fn pad_then_crop() {
        let p = SymbolPlane::rgb(2, 3, (0..18).collect()).unwrap();
        let q = p.pad_replicate(4, 8);
        assert_eq!(q.get(1, 3, 7), p.get(1, 1, 2));
        assert_eq!(q.crop(2, 3), p);
    }

    #[test]
    fn normalized_roundtrip() {
        let p = SymbolPlane::rgb(1, 86, (0..258).map(|v| (v % 256) as u8).collect()).unwrap();
        let t = p.to_normalized_tensor();
        assert_eq!(SymbolPlane::from_normalized_tensor(&t).unwrap(), p);
    }

    #[test]
    fn pair_validation() {
        let a = SymbolPlane::rgb(2, 2, vec![0; 12]).unwrap();
        let b = SymbolPlane::rgb(2, 3, vec![0; 18]).unwrap();
        assert!(matches!(StereoPair::new(a.clone(), b), Err(Error::Dimension(_))));
        assert!(StereoPair::new(a.clone(), a).is_ok());
        assert!(SymbolPlane::new(1, 1, 1, 25, vec![25]).is_err());
    }
}
