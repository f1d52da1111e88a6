//! Vectorised VAE objectives and training.

pub mod config;
pub mod discriminator;
pub mod kl;
pub mod model;
pub mod tc;
pub mod theorem2;

pub use config::{Method, ModelConfig, TcWeighting};
pub use discriminator::{
    discriminator_loss, discriminator_spec, discriminator_tc, discriminator_tc_with_grad, permute_units,
    DiscriminatorLoss,
};
pub use kl::{kl_vec_spherical, kl_vec_spherical_with_grad, CodeGradient, LatentCode};
pub use model::{train, GeneratorGradients, LogRow, LossBreakdown, Model, Network, TrainOutcome};
pub use tc::{
    f32_underflow_check, tc_from_table, tc_minibatch, tc_minibatch_with_grad, tc_per_dimension,
    tc_per_dimension_with_grad, LogDensityTable, TcEstimate, TcEstimator, UnderflowReport,
};
pub use theorem2::{theorem2_independence_check, DEFAULT_LABEL_BINS, DEFAULT_X_BINS};
