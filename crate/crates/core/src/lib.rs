//! Lossless stereo image compression.
//!
//! Both views are encoded into a hierarchy of quantized feature planes.
//! Every plane, and finally the pixels themselves, is range coded under a
//! discretized logistic mixture predicted from the coarser levels. The right
//! view additionally sees the left view warped through a soft disparity
//! estimate at every scale.
//!
//! ```no_run
//! use l3cs::{compress, decompress, init_weights, ModelConfig, StereoPair};
//! # fn pair() -> StereoPair { unimplemented!() }
//! let store = init_weights(&ModelConfig::default(), 0).unwrap();
//! let (container, report) = compress(&pair(), &store).unwrap();
//! println!("{:.3} bpsp", report.container_bpsp().unwrap());
//! let back = decompress(&container, &store).unwrap();
//! ```

pub mod container;
pub mod entropy;
pub mod error;
pub mod imageio;
pub mod metrics;
pub mod mixture;
pub mod model;
pub mod pipeline;
pub mod plane;
pub mod quantizer;
pub mod tensor;
pub mod warp;
pub mod weights;

pub use container::{Container, Header, Role, Segment, SegmentId};
pub use error::{Error, Result};
pub use metrics::{disparity_eval, psnr, ssim, supervised_disparity_loss, DisparityEval};
pub use model::{Model, ModelConfig, View};
pub use pipeline::{
    compress, compress_single, compress_single_with, compress_with, decode, decode_with, decompress,
    decompress_single, evaluate, evaluate_with, CodecOptions, CodingReport, Decoded, SegmentStats,
    TableSource, WarpQuality,
};
pub use plane::{StereoPair, SymbolPlane};
pub use quantizer::QuantizerSpec;
pub use tensor::Tensor;
pub use warp::DisparityMap;
pub use weights::{init_weights, WeightStore};
