//! Vector-based disentangled representation learning lab.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: seeded random streams, PCA, discretised mutual information,
//!   Pearson correlation, a finite-difference gradient oracle and L-BFGS.
//! - [`neural`]: a small reverse-mode MLP stack with Adam, reparameterised
//!   sampling with one shared standard deviation per latent unit, and
//!   checkpoints.
//! - [`synthdata`]: a synthetic factorised dataset and combination-level
//!   train/test splits.
//! - [`losses`]: vectorised KL, the minibatch and per-dimension total
//!   correlation estimators, the permutation discriminator and training.
//! - [`metrics`]: compositional-generalisation probes (ridge R², logistic ACC)
//!   and disentanglement scores (FactorVAE, DCI, MIG, β-VAE).
//! - [`idealrep`]: ideal, corrupted and mapped representations.
//! - [`harness`]: configuration, runs, sweeps and reports.

mod digest;
pub mod error;
pub mod harness;
pub mod idealrep;
pub mod losses;
pub mod metrics;
pub mod neural;
pub mod numerics;
pub mod synthdata;

pub use error::{Error, Result};
