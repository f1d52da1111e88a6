//! Shared numerical building blocks.

pub mod gradcheck;
pub mod info;
pub mod optim;
pub mod pca;
pub mod rng;
pub mod stats;

pub use gradcheck::{finite_difference_gradient, max_relative_error};
pub use info::{discretized_mutual_information, entropy, equal_count_bins, mutual_information};
pub use optim::{lbfgs, LbfgsConfig, LbfgsResult};
pub use pca::{pca_fit, pca_project, PcaModel, PcaStatus};
pub use rng::RngStream;
pub use stats::{mean, pearson_correlation, std_dev};
