//! Named experiment presets shipped with the CLI.
//!
//! Each preset bundles the full hyperparameter set for one of the stock
//! experiments so a run is reproducible from a name and a seed. Derived
//! seeds keep the random streams for patterns, initial feature-map weights,
//! and queries independent of each other.

use crate::norms::NormKind;
use crate::uhop::{LipschitzMode, TrainConfig};
use serde::Serialize;

/// Added to the base seed to draw the initial feature-map weights.
pub const W0_SEED_OFFSET: u64 = 1_000_003;
/// Added to the base seed to draw queries.
pub const QUERY_SEED_OFFSET: u64 = 2_000_003;

/// Metastable-state distribution experiment on synthetic patterns.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetaPreset {
    pub name: &'static str,
    pub m: usize,
    pub d: usize,
    pub d_phi: usize,
    pub beta: f64,
    pub norm: NormKind,
    pub train_iters: usize,
    pub lr: f64,
    pub tau: f64,
    /// Retrieval updates applied to each query before reading off weights.
    pub update_iters: usize,
    /// Support threshold used when the normalization is dense (softmax).
    pub threshold: f64,
    pub queries: usize,
}

impl MetaPreset {
    pub fn train_config(&self, base_seed: u64) -> TrainConfig {
        TrainConfig {
            iters: self.train_iters,
            lr: self.lr,
            tau: self.tau,
            lipschitz: LipschitzMode::Backtracking,
            seed: base_seed.wrapping_add(W0_SEED_OFFSET),
        }
    }
}

/// Ten random unit patterns in five dimensions, feature space of the same
/// width, retrieval at beta = 4 with twenty update steps per query.
pub fn synthetic_meta() -> MetaPreset {
    MetaPreset {
        name: "synthetic-meta",
        m: 10,
        d: 5,
        d_phi: 5,
        beta: 4.0,
        norm: NormKind::Softmax,
        train_iters: 20,
        lr: 0.1,
        tau: 1.0,
        update_iters: 20,
        threshold: 0.01,
        queries: 500,
    }
}

/// Metastable-state distribution experiment on image data loaded from an
/// IDX file (or the built-in generated stand-in).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MnistPreset {
    pub name: &'static str,
    /// Patterns kept from the front of the file by default; the full-set
    /// run is opt-in because it is much slower.
    pub subsample: usize,
    pub d: usize,
    pub d_phi: usize,
    pub beta: f64,
    pub norm: NormKind,
    pub train_iters: usize,
    pub lr: f64,
    pub tau: f64,
    pub update_iters: usize,
    pub threshold: f64,
}

impl MnistPreset {
    pub fn train_config(&self, base_seed: u64) -> TrainConfig {
        TrainConfig {
            iters: self.train_iters,
            lr: self.lr,
            tau: self.tau,
            lipschitz: LipschitzMode::Backtracking,
            seed: base_seed.wrapping_add(W0_SEED_OFFSET),
        }
    }
}

/// 28x28 image patterns, 200-dimensional feature space, beta = 0.1, five
/// update steps per query. Queries default to the stored patterns
/// themselves.
pub fn mnist_meta() -> MnistPreset {
    MnistPreset {
        name: "mnist-meta",
        subsample: 2_000,
        d: 784,
        d_phi: 200,
        beta: 0.1,
        norm: NormKind::Sparsemax,
        train_iters: 20,
        lr: 0.1,
        tau: 1.0,
        update_iters: 5,
        threshold: 0.01,
    }
}

/// Energy-landscape contour experiment over a planar grid (d = d_phi = 2).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContourPreset {
    pub name: &'static str,
    pub m: usize,
    pub beta: f64,
    pub train_iters: usize,
    pub lr: f64,
    pub tau: f64,
    pub grid_n: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
}

impl ContourPreset {
    pub fn train_config(&self, base_seed: u64) -> TrainConfig {
        TrainConfig {
            iters: self.train_iters,
            lr: self.lr,
            tau: self.tau,
            lipschitz: LipschitzMode::Backtracking,
            seed: base_seed.wrapping_add(W0_SEED_OFFSET),
        }
    }
}

/// Two planar patterns, sharp weights (beta = 20), 40x40 grid.
pub fn contours_two_point() -> ContourPreset {
    ContourPreset {
        name: "contours-2pt",
        m: 2,
        beta: 20.0,
        train_iters: 5,
        lr: 0.1,
        tau: 1.0,
        grid_n: 40,
        grid_lo: -1.5,
        grid_hi: 1.5,
    }
}

/// Four planar patterns at a much flatter temperature (beta = 1/0.9).
pub fn contours_four_point() -> ContourPreset {
    ContourPreset {
        name: "contours-4pt",
        m: 4,
        beta: 1.0 / 0.9,
        train_iters: 5,
        lr: 0.1,
        tau: 1.0,
        grid_n: 40,
        grid_lo: -1.5,
        grid_hi: 1.5,
    }
}

/// Basins-of-attraction experiment over a planar grid (d = d_phi = 2).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BasinPreset {
    pub name: &'static str,
    pub m: usize,
    pub beta: f64,
    pub norm: NormKind,
    pub train_iters: usize,
    pub lr: f64,
    pub tau: f64,
    pub update_iters: usize,
    pub eps: f64,
    pub grid_n: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
}

impl BasinPreset {
    pub fn train_config(&self, base_seed: u64) -> TrainConfig {
        TrainConfig {
            iters: self.train_iters,
            lr: self.lr,
            tau: self.tau,
            lipschitz: LipschitzMode::Backtracking,
            seed: base_seed.wrapping_add(W0_SEED_OFFSET),
        }
    }
}

/// Five planar patterns, beta = 20, five update steps, 100x100 grid;
/// a cell is claimed by a memory when the iterate ends within eps of it.
pub fn basins_five_point() -> BasinPreset {
    BasinPreset {
        name: "basins-5pt",
        m: 5,
        beta: 20.0,
        norm: NormKind::Softmax,
        train_iters: 5,
        lr: 0.1,
        tau: 1.0,
        update_iters: 5,
        eps: 0.05,
        grid_n: 100,
        grid_lo: -1.5,
        grid_hi: 1.5,
    }
}
