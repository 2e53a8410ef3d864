//! Temporal-coherence machinery for video generation and evaluation.
//!
//! The crate is generic over the pixel scalar (`f32` or `f64`, see
//! [`Scalar`]); the concrete aliases below are what most callers want.
//!
//! * [`imgseq`]: frames, sequences, PNG I/O and the evaluation crop protocol
//! * [`warp`]: backward warping and boundary zeroing
//! * [`flow`]: dense Farnebäck optical flow and `.flo` I/O
//! * [`metrics`]: PSNR, T-diff, tOF, tLP and per-scene reports
//! * [`perceptual`]: pluggable perceptual distances
//! * [`losses`]: generator/discriminator loss terms and presets
//! * [`pipeline`]: ping-pong sequences, discriminator triplets, curriculum
//! * [`btmodel`]: Bradley-Terry fitting of pairwise votes

pub mod btmodel;
pub mod error;
pub mod flow;
pub mod imgseq;
pub mod losses;
pub mod metrics;
pub mod perceptual;
pub mod pipeline;
mod scalar;
pub mod warp;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Frame32 = imgseq::Frame<f32>;
pub type Frame64 = imgseq::Frame<f64>;
pub type Sequence32 = imgseq::Sequence<f32>;
pub type Sequence64 = imgseq::Sequence<f64>;
pub type FlowField32 = warp::FlowField<f32>;
pub type FlowField64 = warp::FlowField<f64>;
pub type FeatureMap32 = losses::FeatureMap<f32>;
pub type FeatureMap64 = losses::FeatureMap<f64>;
pub type Triplet32 = pipeline::Triplet<f32>;
pub type Triplet64 = pipeline::Triplet<f64>;
