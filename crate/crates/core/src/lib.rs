//! Steganalysis workbench.
//!
//! * [`tensor`]: convolution (cross-correlation), activations and pooling.
//! * [`network`]: the two-stage convolutional detector, backpropagation and
//!   finite-difference gradient checks.
//! * [`stego`]: LSB-matching, cost-adaptive and block-DCT embedding
//!   simulators with fixed or per-image keys.
//! * [`dataset`]: PGM I/O, procedural covers, normalization and splits.
//! * [`trainer`]: minibatch SGD, evaluation and detection reports.
//! * [`checkpoint`]: exact save/load of trained networks.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod network;
pub mod rng;
pub mod stego;
pub mod tensor;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use dataset::{assemble, normalize, Corpus, CorpusItem, Normalization};
pub use error::{Error, Result};
pub use network::{
    backward, build_network, forward, loss, parameter_count, ClassLogProbs, ConvLayerSpec, NetworkSpec, ParamClass,
    ParameterCount, ParameterStore,
};
pub use rng::SplitMix64;
pub use stego::{count_modified, embed, Algorithm, EmbedResult, KeyMode, StegoConfig};
pub use tensor::{
    activate, conv2d, conv_layer_forward, pool, ActivationKind, ConvGeometry, ImageGrid, Kernel, PoolMode, PoolSpec,
};
pub use trainer::{evaluate, sgd_step, train, DetectionReport, TrainConfig, TrainHistory, TrainOutcome};
