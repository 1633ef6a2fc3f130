//! Image and disparity files: binary PPM (P6), PNG, PGM (P5) and PFM.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::plane::SymbolPlane;
use crate::warp::DisparityMap;

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn word(&mut self) -> Result<&'a str> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Truncated("image header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Format("non-ASCII image header".into()))
    }

    fn number(&mut self) -> Result<usize> {
        let w = self.word()?;
        w.parse()
            .map_err(|_| Error::Format(format!("bad header number {w:?}")))
    }

    /// Consumes the single whitespace byte that ends a header.
    fn raster(mut self) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(&self.bytes[self.pos..])
            }
            _ => Err(Error::Format("missing whitespace after header".into())),
        }
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<SymbolPlane> {
    let mut t = Tokens { bytes, pos: 0 };
    if t.word()? != "P6" {
        return Err(Error::Format("not a binary PPM".into()));
    }
    let width = t.number()?;
    let height = t.number()?;
    let maxval = t.number()?;
    if maxval != 255 {
        return Err(Error::Format(format!("only 8-bit PPM is supported, maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Dimension("image has zero extent".into()));
    }
    let raster = t.raster()?;
    let need = 3 * width * height;
    if raster.len() < need {
        return Err(Error::Truncated(format!("PPM raster has {} of {need} bytes", raster.len())));
    }
    SymbolPlane::from_interleaved_rgb(height, width, &raster[..need])
}

pub fn encode_ppm(image: &SymbolPlane) -> Result<Vec<u8>> {
    if image.channels != 3 {
        return Err(Error::Dimension("PPM needs three channels".into()));
    }
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.to_interleaved_rgb());
    Ok(out)
}

fn decode_png(bytes: &[u8]) -> Result<SymbolPlane> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG: {e}")))?
        .into_rgb8();
    let (w, h) = img.dimensions();
    SymbolPlane::from_interleaved_rgb(h as usize, w as usize, img.as_raw())
}

fn encode_png(image: &SymbolPlane) -> Result<Vec<u8>> {
    if image.channels != 3 {
        return Err(Error::Dimension("PNG output needs three channels".into()));
    }
    let buf = image::RgbImage::from_raw(
        image.width as u32,
        image.height as u32,
        image.to_interleaved_rgb(),
    )
    .ok_or_else(|| Error::Dimension("image too large".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG: {e}")))?;
    Ok(out.into_inner())
}

/// Reads an RGB image, PPM or PNG by content.
pub fn read_image(path: impl AsRef<Path>) -> Result<SymbolPlane> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else {
        decode_ppm(&bytes)
    }
}

/// Writes PNG when the extension is `.png`, PPM otherwise.
pub fn write_image(path: impl AsRef<Path>, image: &SymbolPlane) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png { encode_png(image)? } else { encode_ppm(image)? };
    fs::write(path, bytes)?;
    Ok(())
}

/// 8-bit PGM with values scaled by `256 / max_disparity`.
pub fn encode_pgm(map: &DisparityMap, max_disparity: usize) -> Vec<u8> {
    let scale = 256.0 / max_disparity.max(1) as f32;
    let mut out = format!("P5\n{} {}\n255\n", map.width, map.height).into_bytes();
    out.extend(map.values.iter().map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8));
    out
}

/// Grayscale little-endian PFM, rows stored bottom to top.
pub fn encode_pfm(map: &DisparityMap) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", map.width, map.height).into_bytes();
    for row in map.values.chunks(map.width.max(1)).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DisparityMap> {
    let mut t = Tokens { bytes, pos: 0 };
    if t.word()? != "Pf" {
        return Err(Error::Format("not a grayscale PFM".into()));
    }
    let width = t.number()?;
    let height = t.number()?;
    let scale: f32 = t
        .word()?
        .parse()
        .map_err(|_| Error::Format("bad PFM scale".into()))?;
    let raster = t.raster()?;
    let need = 4 * width * height;
    if raster.len() < need {
        return Err(Error::Truncated(format!("PFM raster has {} of {need} bytes", raster.len())));
    }
    let read = |c: &[u8]| {
        let b = [c[0], c[1], c[2], c[3]];
        if scale < 0.0 {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        }
    };
    let mut values = vec![0.0f32; width * height];
    for (y, row) in raster[..need].chunks(4 * width.max(1)).enumerate() {
        let dst = (height - 1 - y) * width;
        for (x, c) in row.chunks(4).enumerate() {
            values[dst + x] = read(c);
        }
    }
    DisparityMap::new(height, width, values)
}
