//! Power control for N-pair Gaussian interference networks via contrastive
//! self-supervised pre-training.
//!
//! The pipeline: sample Rayleigh-fading channel matrices, label a prefix
//! with the WMMSE oracle, pre-train an MLP backbone with a contrastive loss
//! over TIN-condition channel augmentations, fine-tune on the labeled
//! prefix, and score the result as sum-rate normalized by WMMSE.
//!
//! All numeric code is generic over [`real::Real`]; the aliases below fix
//! `f64`, which is what the file formats and the CLI use.

pub mod error;
pub mod harness;
pub mod io;
pub mod losses;
pub mod netsim;
pub mod neuralnet;
pub mod real;
pub mod rng;
pub mod tinaug;
pub mod wmmse;

pub use error::{Error, Result};

/// Scalar type used by the training pipeline and file formats.
pub type Scalar = f64;

pub type NetworkConfig = netsim::NetworkConfig<Scalar>;
pub type ChannelMatrix = netsim::ChannelMatrix<Scalar>;
pub type PowerVector = netsim::PowerVector<Scalar>;
pub type Dataset = netsim::Dataset<Scalar>;
pub type WmmseSettings = wmmse::WmmseSettings<Scalar>;
pub type MlpModel = neuralnet::MlpModel<Scalar>;
pub type GradientSet = neuralnet::GradientSet<Scalar>;
