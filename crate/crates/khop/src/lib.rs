//! Kernelized modern Hopfield associative memories.
//!
//! This crate implements dense associative memory retrieval with learnable
//! kernel feature maps. Memories are stored as columns of a pattern matrix
//! and retrieved by iterating
//!
//! ```text
//! x_{t+1} = Xi * norm(beta * K(Xi, x_t))
//! ```
//!
//! where `norm` is one of softmax, sparsemax, or 1.5-entmax and `K` is either
//! the raw dot product (the classical modern Hopfield model) or a learned
//! linear-feature kernel `K(a, b) = <W^T a, W^T b>`.
//!
//! On top of the retrieval dynamics the crate provides
//!
//! * a projected-gradient separation-learning loop ([`uhop`]) that trains the
//!   feature map to push stored patterns apart on the feature sphere,
//! * capacity estimates and well-separation certificates ([`capacity`]),
//! * spherical-code constructions and a brute-force code optimizer
//!   ([`spherical`]),
//! * metastable-state statistics, energy landscapes and basin maps
//!   ([`analysis`]).
//!
//! The `khop` binary exposes the same functionality as a CLI with
//! reproducible, seeded outputs.

pub mod analysis;
pub mod capacity;
pub mod error;
pub mod hopfield;
pub mod io;
pub mod kernel;
pub mod norms;
pub mod patterns;
pub mod presets;
pub mod spherical;
pub mod uhop;

pub use error::{Error, Result};
pub use hopfield::{retrieve, update_step, RetrievalConfig, RetrievalResult};
pub use kernel::{FeatureMap, SeparationStats};
pub use norms::NormKind;
pub use patterns::PatternSet;
pub use uhop::{uhop_plus, TrainConfig, TrainResult};
