//! Rain removal by temporal photon-number fluctuation correlation.
//!
//! The library covers the full pipeline: synthesis of physically modelled
//! rainy photon-count frame stacks ([`rainsim`]), per-pixel temporal
//! statistics and their decomposition into scene / fog / streak parts
//! ([`photonstats`], [`derain`]), image quality metrics ([`metrics`]), and
//! reproducible experiment drivers ([`harness`]).
//!
//! All randomness flows through keyed substreams ([`rng`]), so a given seed
//! produces byte-identical stacks and reconstructions whether the work runs
//! sequentially or on a thread pool (the `parallel` feature, on by default).

pub mod derain;
pub mod error;
pub mod harness;
pub mod imgio;
pub mod metrics;
pub mod parallel;
pub mod photonstats;
pub mod rainsim;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
