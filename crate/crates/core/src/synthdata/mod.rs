//! Synthetic factorised data and combination-level train/test splits.
//!
//! Observations are produced by a frozen random tanh MLP applied to factor
//! values normalised to `[-1, 1]`, so every combination has a distinct,
//! bounded observation vector.

pub mod export;
pub mod grid;
pub mod render;
pub mod split;

pub use export::{read_header, read_observations, Dataset, DatasetConfig, DatasetHeader, DATA_MAGIC};
pub use grid::{enumerate_combinations, FactorGrid};
pub use render::{ObservationSpec, Renderer, INJECTIVITY_TOLERANCE};
pub use split::{sample_batch, split_combinations, Batch, Side, SplitMask, DEFAULT_BATCH};
