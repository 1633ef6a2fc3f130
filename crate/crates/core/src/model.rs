//! Network graph: per-scale encoders, decoders, probability heads, warp
//! aggregation and right-view fusion.
//!
//! Scale `s` runs from 1 (finest) to `S`. `E^(s)` halves the resolution and
//! projects to `C` channels before quantization. `D^(s)` consumes the
//! dequantized `Z^(s)` plus the lower-scale feature `f^(s+1)` and upsamples
//! by two with a pixel shuffle, so `f^(s)` lives at the resolution of scale
//! `s-1`. The head `P^(s)` on `f^(s)` predicts `Z^(s-1)`, and for `s = 1` the
//! image itself. Both views share `E` and `D`; each view has its own heads.

use crate::error::{Error, Result};
use crate::mixture::{feature_param_count, image_param_count};
use crate::quantizer::{QuantizerSpec, DEFAULT_LEVELS, DEFAULT_SIGMA_Q};
use crate::tensor::{
    conv2d, conv3d, leaky_relu_inplace, pixel_shuffle, resize_trilinear, Conv2dOptions, Tensor,
};
use crate::warp::{
    build_cost_volume, disparity_from_volume, normalize_volume, soft_warp, DisparityMap,
};
use crate::weights::WeightStore;

/// Slope of every leaky-relu in the graph.
pub const LEAKY_SLOPE: f32 = 0.2;
/// Width of the 3-D aggregation convolutions.
pub const AGGREGATION_WIDTH: usize = 16;
const RES_BLOCKS: usize = 2;
const DILATIONS: [usize; 3] = [1, 2, 4];

/// Architecture hyper-parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub scales: usize,
    pub channels: usize,
    pub hidden: usize,
    pub components: usize,
    pub max_disparity: usize,
    pub sigma_q: f32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            scales: 3,
            channels: 5,
            hidden: 64,
            components: 10,
            max_disparity: 64,
            sigma_q: DEFAULT_SIGMA_Q,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 || self.scales > 16 {
            return Err(Error::Config(format!("scales must be in 1..=16, got {}", self.scales)));
        }
        if self.channels == 0 || self.hidden == 0 || self.components == 0 {
            return Err(Error::Config("channels, hidden and components must be >= 1".into()));
        }
        let step = 1usize << (self.scales - 1);
        if self.max_disparity == 0 || self.max_disparity % step != 0 {
            return Err(Error::Config(format!(
                "max disparity {} must be a positive multiple of {step}",
                self.max_disparity
            )));
        }
        Ok(())
    }

    /// Nominal disparity range of `Warp^(s)`.
    pub fn disparity_at(&self, scale: usize) -> usize {
        self.max_disparity >> (scale - 1)
    }

    pub fn levels(&self) -> usize {
        DEFAULT_LEVELS
    }

    pub fn quantizer(&self) -> QuantizerSpec {
        QuantizerSpec::default()
            .with_sigma(self.sigma_q)
            .unwrap_or_default()
    }

    /// Images are padded to a multiple of this in both dimensions.
    pub fn block(&self) -> usize {
        1 << self.scales
    }

    /// Raw parameter channels emitted by `P^(s)`.
    pub fn head_outputs(&self, scale: usize) -> usize {
        if scale == 1 {
            image_param_count(self.components)
        } else {
            feature_param_count(self.components, self.channels)
        }
    }

    /// Channels of the plane warped by `Warp^(s)`.
    pub fn warped_channels(&self, scale: usize) -> usize {
        if scale == 1 {
            3
        } else {
            self.channels
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum View {
    Left,
    Right,
}

impl View {
    pub fn tag(self) -> u8 {
        match self {
            View::Left => 0,
            View::Right => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(View::Left),
            1 => Some(View::Right),
            _ => None,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            View::Left => "prob_l",
            View::Right => "prob_r",
        }
    }
}

/// Every parameter name with its shape, in generation order.
pub fn param_specs(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let h = config.hidden;
    let c = config.channels;
    let mut specs = Vec::new();
    let mut conv = |name: String, out: usize, inp: usize, k: usize| {
        specs.push((format!("{name}.w"), vec![out, inp, k, k]));
        specs.push((format!("{name}.b"), vec![out]));
    };
    for s in 1..=config.scales {
        conv(format!("enc{s}.head"), h, if s == 1 { 3 } else { h }, 3);
        for j in 0..RES_BLOCKS {
            conv(format!("enc{s}.res{j}.a"), h, h, 3);
            conv(format!("enc{s}.res{j}.b"), h, h, 3);
        }
        conv(format!("enc{s}.proj"), c, h, 3);

        conv(format!("dec{s}.head"), h, c, 3);
        for j in 0..RES_BLOCKS {
            conv(format!("dec{s}.res{j}.a"), h, h, 3);
            conv(format!("dec{s}.res{j}.b"), h, h, 3);
        }
        conv(format!("dec{s}.up"), 4 * h, h, 3);

        for view in [View::Left, View::Right] {
            for r in DILATIONS {
                conv(format!("{}{s}.dil{r}", view.prefix()), h, h, 3);
            }
            conv(
                format!("{}{s}.out", view.prefix()),
                config.head_outputs(s),
                DILATIONS.len() * h,
                1,
            );
        }
        conv(format!("fuse{s}"), h, h + config.warped_channels(s), 1);
    }
    for s in 1..=config.scales {
        let cv_in = h + usize::from(s < config.scales);
        let a = AGGREGATION_WIDTH;
        specs.push((format!("warp{s}.agg0.w"), vec![a, cv_in, 3, 3, 3]));
        specs.push((format!("warp{s}.agg0.b"), vec![a]));
        specs.push((format!("warp{s}.agg1.w"), vec![a, a, 3, 3, 3]));
        specs.push((format!("warp{s}.agg1.b"), vec![a]));
        specs.push((format!("warp{s}.agg2.w"), vec![1, a, 1, 1, 1]));
        specs.push((format!("warp{s}.agg2.b"), vec![1]));
    }
    specs
}

/// Output of one warp block.
#[derive(Clone, Debug)]
pub struct WarpOutput {
    /// Left plane warped into the right view.
    pub warped: Tensor,
    /// Aggregated cost `(N, D, H, W)` before the softmax; fed to the next
    /// finer scale.
    pub cost: Tensor,
    pub disparity: Vec<DisparityMap>,
}

/// Forward passes over a borrowed weight store.
#[derive(Clone, Copy, Debug)]
pub struct Model<'a> {
    store: &'a WeightStore,
}

impl<'a> Model<'a> {
    pub fn new(store: &'a WeightStore) -> Self {
        Model { store }
    }

    pub fn config(&self) -> &'a ModelConfig {
        self.store.config()
    }

    pub fn store(&self) -> &'a WeightStore {
        self.store
    }

    fn conv(&self, name: &str, x: &Tensor, opts: Conv2dOptions) -> Result<Tensor> {
        let w = self.store.get(&format!("{name}.w"))?;
        let b = self.store.get(&format!("{name}.b"))?;
        conv2d(x, w, b.data(), opts)
    }

    fn conv3(&self, name: &str, x: &Tensor, padding: usize) -> Result<Tensor> {
        let w = self.store.get(&format!("{name}.w"))?;
        let b = self.store.get(&format!("{name}.b"))?;
        conv3d(x, w, b.data(), padding)
    }

    fn res_block(&self, name: &str, x: Tensor) -> Result<Tensor> {
        let mut y = self.conv(&format!("{name}.a"), &x, Conv2dOptions::same(3))?;
        leaky_relu_inplace(&mut y, LEAKY_SLOPE);
        let y = self.conv(&format!("{name}.b"), &y, Conv2dOptions::same(3))?;
        y.add(&x)
    }

    fn check_scale(&self, scale: usize) -> Result<()> {
        if scale == 0 || scale > self.config().scales {
            return Err(Error::InvalidArgument(format!(
                "scale {scale} outside 1..={}",
                self.config().scales
            )));
        }
        Ok(())
    }

    /// `E^(s)`: returns the unquantized `Z~^(s)` and the hidden features
    /// passed on to `E^(s+1)`.
    pub fn encoder_forward(&self, input: &Tensor, scale: usize) -> Result<(Tensor, Tensor)> {
        self.check_scale(scale)?;
        let name = format!("enc{scale}");
        let opts = Conv2dOptions {
            stride: 2,
            dilation: 1,
            padding: 1,
        };
        let mut x = self.conv(&format!("{name}.head"), input, opts)?;
        for j in 0..RES_BLOCKS {
            x = self.res_block(&format!("{name}.res{j}"), x)?;
        }
        let z = self.conv(&format!("{name}.proj"), &x, Conv2dOptions::same(3))?;
        Ok((z, x))
    }

    /// `D^(s)`: a missing lower-scale feature is treated as zeros.
    pub fn decoder_forward(&self, z: &Tensor, lower: Option<&Tensor>, scale: usize) -> Result<Tensor> {
        self.check_scale(scale)?;
        let name = format!("dec{scale}");
        let mut x = self.conv(&format!("{name}.head"), z, Conv2dOptions::same(3))?;
        if let Some(f) = lower {
            x = x.add(f)?;
        }
        for j in 0..RES_BLOCKS {
            x = self.res_block(&format!("{name}.res{j}"), x)?;
        }
        let up = self.conv(&format!("{name}.up"), &x, Conv2dOptions::same(3))?;
        pixel_shuffle(&up, 2)
    }

    /// `P^(s)`: dilated 3x3 convolutions at rates 1, 2, 4, concatenated and
    /// projected by a 1x1 convolution to raw mixture parameters.
    pub fn prob_head_forward(&self, f: &Tensor, scale: usize, view: View) -> Result<Tensor> {
        self.check_scale(scale)?;
        let name = format!("{}{scale}", view.prefix());
        let branches = DILATIONS
            .iter()
            .map(|&r| {
                let opts = Conv2dOptions {
                    stride: 1,
                    dilation: r,
                    padding: r,
                };
                self.conv(&format!("{name}.dil{r}"), f, opts)
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor> = branches.iter().collect();
        let mut cat = Tensor::concat_channels(&refs)?;
        leaky_relu_inplace(&mut cat, LEAKY_SLOPE);
        self.conv(&format!("{name}.out"), &cat, Conv2dOptions::default())
    }

    /// Disparity range actually used at `scale` for a plane of width `width`.
    pub fn effective_disparity(&self, scale: usize, width: usize) -> usize {
        self.config().disparity_at(scale).min(width).max(1)
    }

    /// `Warp^(s)`: cost volume of the two feature maps, optional coarser
    /// aggregated cost resampled onto this scale's `(D, H, W)` grid,
    /// 3-D aggregation, softmax over disparity, soft warp of `left_plane`.
    pub fn warp_block_forward(
        &self,
        scale: usize,
        f_left: &Tensor,
        f_right: &Tensor,
        coarser_cost: Option<&Tensor>,
        left_plane: &Tensor,
    ) -> Result<WarpOutput> {
        self.check_scale(scale)?;
        let (n, _, h, w) = f_left.dims4()?;
        let d = self.effective_disparity(scale, w);
        let cv = build_cost_volume(f_left, f_right, d)?;
        let input = match coarser_cost {
            Some(prev) => {
                let (pn, pd, ph, pw) = prev.dims4()?;
                if pn != n {
                    return Err(Error::shape("coarser cost batch mismatch"));
                }
                let prev5 = prev.clone().reshape(&[pn, 1, pd, ph, pw])?;
                let up = resize_trilinear(&prev5, d, h, w)?;
                Tensor::concat_channels(&[&cv, &up])?
            }
            None => cv,
        };
        let name = format!("warp{scale}");
        let mut x = self.conv3(&format!("{name}.agg0"), &input, 1)?;
        leaky_relu_inplace(&mut x, LEAKY_SLOPE);
        let mut x = self.conv3(&format!("{name}.agg1"), &x, 1)?;
        leaky_relu_inplace(&mut x, LEAKY_SLOPE);
        let x = self.conv3(&format!("{name}.agg2"), &x, 0)?;
        let cost = x.reshape(&[n, d, h, w])?;
        let prob = normalize_volume(&cost)?;
        let warped = soft_warp(left_plane, &prob)?;
        let disparity = disparity_from_volume(&prob)?;
        Ok(WarpOutput {
            warped,
            cost,
            disparity,
        })
    }

    /// Channel concatenation of `f_R^(s)` and the warped plane, fused by a
    /// 1x1 convolution back to the hidden width.
    pub fn fuse_right(&self, scale: usize, f_right: &Tensor, warped: &Tensor) -> Result<Tensor> {
        self.check_scale(scale)?;
        let cat = Tensor::concat_channels(&[f_right, warped])?;
        self.conv(&format!("fuse{scale}"), &cat, Conv2dOptions::default())
    }
}
