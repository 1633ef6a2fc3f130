//! Compression, decompression and bit accounting for stereo pairs.
//!
//! One driver walks the coding order for all three uses: the encoder feeds
//! it known symbols and writes them, the decoder reads symbols back and the
//! evaluator only accumulates `-log2 p`. Every table is computed from data
//! the decoder already holds at that point, so the three paths see the same
//! table sequence.
//!
//! Order, for `S` scales:
//!
//! 1. `Z_L^(S)`, `Z_R^(S)` under a uniform prior;
//! 2. for `s = S-1 .. 1`: `Z_L^(s)` from `P_L^(s+1)`, then `Z_R^(s)` from the
//!    right head on features fused with the warped `Z_L^(s)`;
//! 3. `X_L`, then `X_R` (warped `X_L` feeds the right head).
//!
//! Feature planes are coded channel by channel in raster order. Image planes
//! are coded pixel by pixel in raster order with R, G, B interleaved, since
//! the G and B distributions depend on the decoded R (and G) of the pixel.

use crate::container::{Container, Header, Role, Segment, SegmentId};
use crate::entropy::{RangeDecoder, RangeEncoder};
use crate::error::{Error, Result};
use crate::metrics::{psnr, ssim};
use crate::mixture::{
    pmf_to_cdf, uniform_cdf, CdfTable, FeatureMixture, ImageMixture, FEATURE_ALPHABET,
    IMAGE_ALPHABET,
};
use crate::model::{Model, ModelConfig, View};
use crate::plane::{StereoPair, SymbolPlane};
use crate::quantizer::QuantizerSpec;
use crate::tensor::Tensor;
use crate::warp::DisparityMap;
use crate::weights::{fnv1a64, WeightStore};

/// Where coding tables come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TableSource {
    /// The network, with the uniform prior for the deepest feature planes.
    #[default]
    Model,
    /// Uniform tables for every plane.
    Uniform,
    /// One-hot tables on the true symbol. Encoder and evaluator only; output
    /// is not decodable.
    Oracle,
}

#[derive(Clone, Debug, Default)]
pub struct CodecOptions {
    pub tables: TableSource,
    /// Record a digest of every coding table in order.
    pub trace_tables: bool,
}

/// Bits spent on one coded plane.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentStats {
    pub id: SegmentId,
    pub symbols: usize,
    /// `sum -log2(count / 2^16)` over the tables actually used.
    pub ideal_bits: f64,
    /// Payload size when the plane went through the coder.
    pub coded_bytes: Option<usize>,
}

/// Reconstruction of the right view from the warped left view.
#[derive(Clone, Debug)]
pub struct WarpQuality {
    pub warped_right: SymbolPlane,
    pub psnr: f64,
    /// `None` when the image is smaller than the SSIM window.
    pub ssim: Option<f64>,
}

/// Bit accounting of one compress or evaluate run.
#[derive(Clone, Debug)]
pub struct CodingReport {
    pub width: usize,
    pub height: usize,
    pub padded_width: usize,
    pub padded_height: usize,
    pub segments: Vec<SegmentStats>,
    pub container_bytes: Option<usize>,
    pub quality: Option<WarpQuality>,
    /// Disparity of `Warp^(s)` at index `s - 1`, cropped to the image area.
    pub disparity: Vec<DisparityMap>,
    pub table_trace: Vec<u64>,
}

impl CodingReport {
    fn subpixels(&self) -> f64 {
        3.0 * self.width as f64 * self.height as f64
    }

    fn views(&self) -> usize {
        if self.segments.iter().any(|s| s.id.view == View::Right) {
            2
        } else {
            1
        }
    }

    pub fn ideal_bits(&self, view: Option<View>) -> f64 {
        self.segments
            .iter()
            .filter(|s| view.map_or(true, |v| s.id.view == v))
            .map(|s| s.ideal_bits)
            .sum()
    }

    /// Coded payload bits, `None` if nothing was coded.
    pub fn actual_bits(&self, view: Option<View>) -> Option<f64> {
        self.segments
            .iter()
            .filter(|s| view.map_or(true, |v| s.id.view == v))
            .map(|s| s.coded_bytes.map(|b| 8.0 * b as f64))
            .sum()
    }

    pub fn symbols(&self, role: Option<Role>) -> usize {
        self.segments
            .iter()
            .filter(|s| role.map_or(true, |r| s.id.role == r))
            .map(|s| s.symbols)
            .sum()
    }

    /// Ideal bits per subpixel of one view, or of all views when `None`.
    pub fn ideal_bpsp(&self, view: Option<View>) -> f64 {
        let n = if view.is_some() { 1 } else { self.views() };
        self.ideal_bits(view) / (n as f64 * self.subpixels())
    }

    pub fn actual_bpsp(&self, view: Option<View>) -> Option<f64> {
        let n = if view.is_some() { 1 } else { self.views() };
        self.actual_bits(view).map(|b| b / (n as f64 * self.subpixels()))
    }

    /// Whole container, framing included, per subpixel of all views.
    pub fn container_bpsp(&self) -> Option<f64> {
        self.container_bytes
            .map(|b| 8.0 * b as f64 / (self.views() as f64 * self.subpixels()))
    }
}

/// Output of a decode run.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub left: SymbolPlane,
    pub right: Option<SymbolPlane>,
    pub disparity: Vec<DisparityMap>,
    pub table_trace: Vec<u64>,
}

trait SymbolCoder {
    fn begin(&mut self, id: SegmentId, symbols: usize) -> Result<()>;
    /// Codes one symbol; `known` is `None` only when decoding.
    fn code(&mut self, table: &CdfTable, known: Option<usize>) -> Result<usize>;
    fn end(&mut self) -> Result<()>;
    fn stats(&mut self) -> &mut Vec<SegmentStats>;
}

fn push_stats(stats: &mut Vec<SegmentStats>, id: SegmentId, symbols: usize) {
    stats.push(SegmentStats {
        id,
        symbols,
        ideal_bits: 0.0,
        coded_bytes: None,
    });
}

fn add_bits(stats: &mut [SegmentStats], bits: f64) {
    if let Some(s) = stats.last_mut() {
        s.ideal_bits += bits;
    }
}

struct Encoder {
    current: Option<(SegmentId, RangeEncoder)>,
    segments: Vec<Segment>,
    stats: Vec<SegmentStats>,
}

impl SymbolCoder for Encoder {
    fn begin(&mut self, id: SegmentId, symbols: usize) -> Result<()> {
        self.current = Some((id, RangeEncoder::new()));
        push_stats(&mut self.stats, id, symbols);
        Ok(())
    }

    fn code(&mut self, table: &CdfTable, known: Option<usize>) -> Result<usize> {
        let symbol = known.expect("encoder needs the symbol");
        let (_, enc) = self.current.as_mut().expect("segment open");
        enc.encode(symbol, table)?;
        add_bits(&mut self.stats, table.ideal_bits(symbol));
        Ok(symbol)
    }

    fn end(&mut self) -> Result<()> {
        let (id, enc) = self.current.take().expect("segment open");
        let payload = enc.finish();
        if let Some(s) = self.stats.last_mut() {
            s.coded_bytes = Some(payload.len());
        }
        self.segments.push(Segment { id, payload });
        Ok(())
    }

    fn stats(&mut self) -> &mut Vec<SegmentStats> {
        &mut self.stats
    }
}

struct Decoder<'c> {
    segments: std::slice::Iter<'c, Segment>,
    current: Option<RangeDecoder<'c>>,
    stats: Vec<SegmentStats>,
}

impl<'c> SymbolCoder for Decoder<'c> {
    fn begin(&mut self, id: SegmentId, symbols: usize) -> Result<()> {
        let seg = self
            .segments
            .next()
            .ok_or_else(|| Error::Corrupt(format!("missing segment {id:?}")))?;
        if seg.id != id {
            return Err(Error::Corrupt(format!(
                "expected segment {id:?}, found {:?}",
                seg.id
            )));
        }
        self.current = Some(RangeDecoder::new(&seg.payload)?);
        push_stats(&mut self.stats, id, symbols);
        if let Some(s) = self.stats.last_mut() {
            s.coded_bytes = Some(seg.payload.len());
        }
        Ok(())
    }

    fn code(&mut self, table: &CdfTable, _known: Option<usize>) -> Result<usize> {
        let symbol = self.current.as_mut().expect("segment open").decode(table)?;
        add_bits(&mut self.stats, table.ideal_bits(symbol));
        Ok(symbol)
    }

    fn end(&mut self) -> Result<()> {
        let dec = self.current.take().expect("segment open");
        if dec.remaining() != 0 {
            return Err(Error::Corrupt(format!(
                "{} unread bytes at end of segment",
                dec.remaining()
            )));
        }
        Ok(())
    }

    fn stats(&mut self) -> &mut Vec<SegmentStats> {
        &mut self.stats
    }
}

#[derive(Default)]
struct Evaluator {
    stats: Vec<SegmentStats>,
}

impl SymbolCoder for Evaluator {
    fn begin(&mut self, id: SegmentId, symbols: usize) -> Result<()> {
        push_stats(&mut self.stats, id, symbols);
        Ok(())
    }

    fn code(&mut self, table: &CdfTable, known: Option<usize>) -> Result<usize> {
        let symbol = known.expect("evaluator needs the symbol");
        add_bits(&mut self.stats, table.ideal_bits(symbol));
        Ok(symbol)
    }

    fn end(&mut self) -> Result<()> {
        Ok(())
    }

    fn stats(&mut self) -> &mut Vec<SegmentStats> {
        &mut self.stats
    }
}

/// Quantized encoder outputs of one view.
struct ViewTargets {
    /// `features[s - 1]` is `Z^(s)` as level indices.
    features: Vec<SymbolPlane>,
    image: SymbolPlane,
}

/// Pads, normalizes and runs the encoder chain of one view.
fn extract_targets(model: &Model<'_>, image: &SymbolPlane, quantizer: &QuantizerSpec) -> Result<ViewTargets> {
    let cfg = model.config();
    let mut input = image.to_normalized_tensor();
    let mut features = Vec::with_capacity(cfg.scales);
    for s in 1..=cfg.scales {
        let (z, skip) = model.encoder_forward(&input, s)?;
        let (_, c, h, w) = z.dims4()?;
        let symbols = z
            .data()
            .iter()
            .map(|&v| quantizer.index_of(v) as u8)
            .collect();
        features.push(SymbolPlane::new(c, h, w, FEATURE_ALPHABET, symbols)?);
        input = skip;
    }
    Ok(ViewTargets {
        features,
        image: image.clone(),
    })
}

fn known_feature(t: Option<&ViewTargets>, scale: usize) -> Option<&SymbolPlane> {
    t.map(|t| &t.features[scale - 1])
}

fn dequantize(plane: &SymbolPlane, quantizer: &QuantizerSpec) -> Tensor {
    let data = plane
        .symbols
        .iter()
        .map(|&s| quantizer.level(s as usize))
        .collect();
    Tensor::new(vec![1, plane.channels, plane.height, plane.width], data).expect("plane extents")
}

fn table_digest(table: &CdfTable) -> u64 {
    let bytes: Vec<u8> = table
        .cumulative()
        .iter()
        .flat_map(|c| c.to_le_bytes())
        .collect();
    fnv1a64(&bytes)
}

struct Driver<'a, C: SymbolCoder> {
    model: Model<'a>,
    quantizer: QuantizerSpec,
    coder: C,
    tables: TableSource,
    trace: Option<Vec<u64>>,
    padded: (usize, usize),
}

struct DriverOutput {
    left: SymbolPlane,
    right: Option<SymbolPlane>,
    disparity: Vec<DisparityMap>,
    warped_right: Option<Tensor>,
}

impl<'a, C: SymbolCoder> Driver<'a, C> {
    fn table(&mut self, model_pmf: Option<&[f64]>, alphabet: usize, known: Option<usize>) -> CdfTable {
        let table = match (self.tables, model_pmf) {
            (TableSource::Oracle, _) => {
                let mut one_hot = vec![0.0; alphabet];
                one_hot[known.expect("oracle tables need the symbol")] = 1.0;
                pmf_to_cdf(&one_hot)
            }
            (TableSource::Model, Some(pmf)) => pmf_to_cdf(pmf),
            _ => uniform_cdf(alphabet),
        };
        if let Some(trace) = self.trace.as_mut() {
            trace.push(table_digest(&table));
        }
        table
    }

    fn feature_shape(&self, scale: usize) -> (usize, usize, usize) {
        let (h, w) = self.padded;
        (self.model.config().channels, h >> scale, w >> scale)
    }

    /// Codes `Z^(scale)`; `params` is `None` for the uniform prior.
    fn code_feature(
        &mut self,
        scale: usize,
        view: View,
        params: Option<&Tensor>,
        known: Option<&SymbolPlane>,
    ) -> Result<SymbolPlane> {
        let (c, h, w) = self.feature_shape(scale);
        let cfg = self.model.config();
        let k = cfg.components;
        let plane = h * w;
        self.coder.begin(SegmentId::feature(scale, view), c * plane)?;
        let mixtures = match params {
            Some(p) => {
                let (_, pc, ph, pw) = p.dims4()?;
                if (ph, pw) != (h, w) {
                    return Err(Error::shape(format!(
                        "feature head produced {ph}x{pw}, plane is {h}x{w}"
                    )));
                }
                let mut raw = vec![0.0f32; pc];
                let mut out = Vec::with_capacity(plane);
                for i in 0..plane {
                    for (j, r) in raw.iter_mut().enumerate() {
                        *r = p.data()[j * plane + i];
                    }
                    out.push(FeatureMixture::from_raw(&raw, k, c)?);
                }
                Some(out)
            }
            None => None,
        };
        let mut symbols = vec![0u8; c * plane];
        let mut pmf = vec![0.0f64; FEATURE_ALPHABET];
        for ch in 0..c {
            for i in 0..plane {
                let known_symbol = known.map(|k| k.symbols[ch * plane + i] as usize);
                let model_pmf = match &mixtures {
                    Some(m) if self.tables == TableSource::Model => {
                        m[i].pmf(ch, &mut pmf)?;
                        Some(pmf.as_slice())
                    }
                    _ => None,
                };
                let table = self.table(model_pmf, FEATURE_ALPHABET, known_symbol);
                symbols[ch * plane + i] = self.coder.code(&table, known_symbol)? as u8;
            }
        }
        self.coder.end()?;
        SymbolPlane::new(c, h, w, FEATURE_ALPHABET, symbols)
    }

    fn code_image(&mut self, view: View, params: &Tensor, known: Option<&SymbolPlane>) -> Result<SymbolPlane> {
        let (h, w) = self.padded;
        let k = self.model.config().components;
        let (_, pc, ph, pw) = params.dims4()?;
        if (ph, pw) != (h, w) {
            return Err(Error::shape(format!(
                "image head produced {ph}x{pw}, image is {h}x{w}"
            )));
        }
        let plane = h * w;
        self.coder.begin(SegmentId::image(view), 3 * plane)?;
        let mut symbols = vec![0u8; 3 * plane];
        let mut raw = vec![0.0f32; pc];
        let mut pmf = vec![0.0f64; IMAGE_ALPHABET];
        let use_model = self.tables == TableSource::Model;
        for i in 0..plane {
            let mixture = if use_model {
                for (j, r) in raw.iter_mut().enumerate() {
                    *r = params.data()[j * plane + i];
                }
                Some(ImageMixture::from_raw(&raw, k)?)
            } else {
                None
            };
            let mut decoded = [0u8; 3];
            for ch in 0..3 {
                let known_symbol = known.map(|p| p.symbols[ch * plane + i] as usize);
                let model_pmf = match &mixture {
                    Some(m) => {
                        m.pmf(ch, &decoded[..ch], &mut pmf)?;
                        Some(pmf.as_slice())
                    }
                    None => None,
                };
                let table = self.table(model_pmf, IMAGE_ALPHABET, known_symbol);
                let s = self.coder.code(&table, known_symbol)? as u8;
                decoded[ch] = s;
                symbols[ch * plane + i] = s;
            }
        }
        self.coder.end()?;
        SymbolPlane::rgb(h, w, symbols)
    }

    fn run(&mut self, left: Option<&ViewTargets>, right: Option<&ViewTargets>, stereo: bool) -> Result<DriverOutput> {
        let model = self.model;
        let scales = model.config().scales;

        let zl = self.code_feature(scales, View::Left, None, known_feature(left, scales))?;
        let zr = if stereo {
            Some(self.code_feature(scales, View::Right, None, known_feature(right, scales))?)
        } else {
            None
        };
        let mut f_left = model.decoder_forward(&dequantize(&zl, &self.quantizer), None, scales)?;
        let mut f_right = match &zr {
            Some(z) => Some(model.decoder_forward(&dequantize(z, &self.quantizer), None, scales)?),
            None => None,
        };
        let mut coarser_cost: Option<Tensor> = None;
        let mut disparity = vec![DisparityMap::constant(0, 0, 0.0); if stereo { scales } else { 0 }];
        let mut warped_right = None;
        let mut left_image = None;
        let mut right_image = None;

        for s in (1..=scales).rev() {
            let params_left = model.prob_head_forward(&f_left, s, View::Left)?;
            let (left_plane, zl_next) = if s > 1 {
                let z = self.code_feature(s - 1, View::Left, Some(&params_left), known_feature(left, s - 1))?;
                (dequantize(&z, &self.quantizer), Some(z))
            } else {
                let x = self.code_image(View::Left, &params_left, left.map(|t| &t.image))?;
                let t = x.to_normalized_tensor();
                left_image = Some(x);
                (t, None)
            };

            let mut zr_next = None;
            if let Some(fr) = &f_right {
                let warp = model.warp_block_forward(s, &f_left, fr, coarser_cost.as_ref(), &left_plane)?;
                let fused = model.fuse_right(s, fr, &warp.warped)?;
                let params_right = model.prob_head_forward(&fused, s, View::Right)?;
                if s > 1 {
                    zr_next = Some(self.code_feature(s - 1, View::Right, Some(&params_right), known_feature(right, s - 1))?);
                } else {
                    right_image = Some(self.code_image(View::Right, &params_right, right.map(|t| &t.image))?);
                    warped_right = Some(warp.warped.clone());
                }
                disparity[s - 1] = warp.disparity.into_iter().next().expect("batch of one");
                coarser_cost = Some(warp.cost);
            }

            if s > 1 {
                let zl = zl_next.expect("left plane coded");
                f_left = model.decoder_forward(&dequantize(&zl, &self.quantizer), Some(&f_left), s - 1)?;
                if let (Some(fr), Some(zr)) = (f_right.as_ref(), zr_next.as_ref()) {
                    f_right = Some(model.decoder_forward(&dequantize(zr, &self.quantizer), Some(fr), s - 1)?);
                }
            }
        }
        Ok(DriverOutput {
            left: left_image.expect("image coded"),
            right: right_image,
            disparity,
            warped_right,
        })
    }
}

fn padded_dims(config: &ModelConfig, height: usize, width: usize) -> (usize, usize) {
    let b = config.block();
    (height.div_ceil(b) * b, width.div_ceil(b) * b)
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::Dimension("image has zero extent".into()));
    }
    if height > u32::MAX as usize / 2 || width > u32::MAX as usize / 2 {
        return Err(Error::Dimension(format!("image {width}x{height} too large")));
    }
    Ok(())
}

fn header_for(store: &WeightStore, height: usize, width: usize) -> Result<Header> {
    let c = store.config();
    let narrow = |v: usize, max: usize, what: &str| {
        if v > max {
            Err(Error::Config(format!("{what} = {v} does not fit the container header")))
        } else {
            Ok(v)
        }
    };
    Ok(Header {
        width: width as u32,
        height: height as u32,
        scales: narrow(c.scales, u8::MAX as usize, "scales")? as u8,
        channels: narrow(c.channels, u8::MAX as usize, "channels")? as u8,
        components: narrow(c.components, u8::MAX as usize, "components")? as u8,
        max_disparity: narrow(c.max_disparity, u16::MAX as usize, "max disparity")? as u16,
        weight_digest: store.digest(),
    })
}

fn check_header(header: &Header, store: &WeightStore) -> Result<()> {
    if header.weight_digest != store.digest() {
        return Err(Error::DigestMismatch {
            expected: header.weight_digest,
            found: store.digest(),
        });
    }
    let c = store.config();
    let matches = header.scales as usize == c.scales
        && header.channels as usize == c.channels
        && header.components as usize == c.components
        && header.max_disparity as usize == c.max_disparity;
    if !matches {
        return Err(Error::ConfigMismatch(format!(
            "container was written for S={} C={} K={} Dmax={}, weights have S={} C={} K={} Dmax={}",
            header.scales,
            header.channels,
            header.components,
            header.max_disparity,
            c.scales,
            c.channels,
            c.components,
            c.max_disparity
        )));
    }
    check_dims(header.height as usize, header.width as usize)
}

fn finish_report(
    stats: Vec<SegmentStats>,
    height: usize,
    width: usize,
    padded: (usize, usize),
    disparity: Vec<DisparityMap>,
    trace: Option<Vec<u64>>,
) -> CodingReport {
    let disparity = disparity
        .into_iter()
        .enumerate()
        .map(|(i, d)| d.crop(height.div_ceil(1 << i), width.div_ceil(1 << i)))
        .collect();
    CodingReport {
        width,
        height,
        padded_width: padded.1,
        padded_height: padded.0,
        segments: stats,
        container_bytes: None,
        quality: None,
        disparity,
        table_trace: trace.unwrap_or_default(),
    }
}

fn encode_impl(
    left: &SymbolPlane,
    right: Option<&SymbolPlane>,
    store: &WeightStore,
    options: &CodecOptions,
) -> Result<(Container, CodingReport)> {
    let (height, width) = (left.height, left.width);
    check_dims(height, width)?;
    let model = Model::new(store);
    let cfg = model.config();
    let quantizer = cfg.quantizer();
    let padded = padded_dims(cfg, height, width);
    let header = header_for(store, height, width)?;

    let lt = extract_targets(&model, &left.pad_replicate(padded.0, padded.1), &quantizer)?;
    let rt = match right {
        Some(r) => Some(extract_targets(&model, &r.pad_replicate(padded.0, padded.1), &quantizer)?),
        None => None,
    };
    let mut driver = Driver {
        model,
        quantizer,
        coder: Encoder {
            current: None,
            segments: Vec::new(),
            stats: Vec::new(),
        },
        tables: options.tables,
        trace: options.trace_tables.then(Vec::new),
        padded,
    };
    let out = driver.run(Some(&lt), rt.as_ref(), right.is_some())?;
    let Encoder { segments, stats, .. } = driver.coder;
    let container = Container { header, segments };
    let mut report = finish_report(stats, height, width, padded, out.disparity, driver.trace);
    report.container_bytes = Some(container.encoded_len());
    Ok((container, report))
}

fn decode_impl(container: &Container, store: &WeightStore, options: &CodecOptions) -> Result<Decoded> {
    check_header(&container.header, store)?;
    if options.tables == TableSource::Oracle {
        return Err(Error::InvalidArgument("oracle tables cannot be decoded".into()));
    }
    let height = container.header.height as usize;
    let width = container.header.width as usize;
    let model = Model::new(store);
    let cfg = model.config();
    let padded = padded_dims(cfg, height, width);
    let stereo = container.has_view(View::Right);
    let mut driver = Driver {
        model,
        quantizer: cfg.quantizer(),
        coder: Decoder {
            segments: container.segments.iter(),
            current: None,
            stats: Vec::new(),
        },
        tables: options.tables,
        trace: options.trace_tables.then(Vec::new),
        padded,
    };
    let out = driver.run(None, None, stereo)?;
    if driver.coder.segments.next().is_some() {
        return Err(Error::Corrupt("container holds extra segments".into()));
    }
    let report = finish_report(
        std::mem::take(driver.coder.stats()),
        height,
        width,
        padded,
        out.disparity,
        driver.trace,
    );
    Ok(Decoded {
        left: out.left.crop(height, width),
        right: out.right.map(|r| r.crop(height, width)),
        disparity: report.disparity,
        table_trace: report.table_trace,
    })
}

/// Compresses a stereo pair.
pub fn compress(pair: &StereoPair, store: &WeightStore) -> Result<(Container, CodingReport)> {
    compress_with(pair, store, &CodecOptions::default())
}

pub fn compress_with(
    pair: &StereoPair,
    store: &WeightStore,
    options: &CodecOptions,
) -> Result<(Container, CodingReport)> {
    StereoPair::new(pair.left.clone(), pair.right.clone())?;
    encode_impl(&pair.left, Some(&pair.right), store, options)
}

/// Compresses a single view with the left-view path only.
pub fn compress_single(image: &SymbolPlane, store: &WeightStore) -> Result<(Container, CodingReport)> {
    compress_single_with(image, store, &CodecOptions::default())
}

pub fn compress_single_with(
    image: &SymbolPlane,
    store: &WeightStore,
    options: &CodecOptions,
) -> Result<(Container, CodingReport)> {
    if image.channels != 3 || image.alphabet != IMAGE_ALPHABET {
        return Err(Error::Dimension("expected an 8-bit RGB image".into()));
    }
    encode_impl(image, None, store, options)
}

/// Decodes any container written by this crate.
pub fn decode(container: &Container, store: &WeightStore) -> Result<Decoded> {
    decode_impl(container, store, &CodecOptions::default())
}

pub fn decode_with(container: &Container, store: &WeightStore, options: &CodecOptions) -> Result<Decoded> {
    decode_impl(container, store, options)
}

/// Decodes a stereo container.
pub fn decompress(container: &Container, store: &WeightStore) -> Result<StereoPair> {
    let d = decode(container, store)?;
    let right = d
        .right
        .ok_or_else(|| Error::Format("container holds a single view".into()))?;
    StereoPair::new(d.left, right)
}

/// Decodes a single-view container.
pub fn decompress_single(container: &Container, store: &WeightStore) -> Result<SymbolPlane> {
    let d = decode(container, store)?;
    if d.right.is_some() {
        return Err(Error::Format("container holds a stereo pair".into()));
    }
    Ok(d.left)
}

/// Ideal code length of a pair under the model, without running the coder.
/// Also reports the warped right view and the per-scale disparities.
pub fn evaluate(pair: &StereoPair, store: &WeightStore) -> Result<CodingReport> {
    evaluate_with(pair, store, &CodecOptions::default())
}

pub fn evaluate_with(pair: &StereoPair, store: &WeightStore, options: &CodecOptions) -> Result<CodingReport> {
    StereoPair::new(pair.left.clone(), pair.right.clone())?;
    let (height, width) = (pair.height(), pair.width());
    check_dims(height, width)?;
    let model = Model::new(store);
    let cfg = model.config();
    let quantizer = cfg.quantizer();
    let padded = padded_dims(cfg, height, width);
    let lt = extract_targets(&model, &pair.left.pad_replicate(padded.0, padded.1), &quantizer)?;
    let rt = extract_targets(&model, &pair.right.pad_replicate(padded.0, padded.1), &quantizer)?;
    let mut driver = Driver {
        model,
        quantizer,
        coder: Evaluator::default(),
        tables: options.tables,
        trace: options.trace_tables.then(Vec::new),
        padded,
    };
    let out = driver.run(Some(&lt), Some(&rt), true)?;
    let stats = std::mem::take(&mut driver.coder.stats);
    let mut report = finish_report(stats, height, width, padded, out.disparity, driver.trace);
    if let Some(warped) = out.warped_right {
        let reconstructed = SymbolPlane::from_normalized_tensor(&warped)?.crop(height, width);
        report.quality = Some(WarpQuality {
            psnr: psnr(&reconstructed, &pair.right)?,
            ssim: ssim(&reconstructed, &pair.right).ok(),
            warped_right: reconstructed,
        });
    }
    Ok(report)
}
