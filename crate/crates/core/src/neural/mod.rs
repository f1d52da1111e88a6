//! Differentiable building blocks: MLPs, Adam, Gaussian units, checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gaussian;
pub mod mlp;

pub use adam::{adam_step, clip_grad_norm, AdamState};
pub use checkpoint::{Checkpoint, NamedNetwork, CHECKPOINT_MAGIC};
pub use gaussian::{
    diag_gaussian_log_density, log_density_with_constants, reparameterize, reparameterize_backward, reparameterize_with_noise, sigma_from_raw,
    sigmoid, softplus, standard_normal_matrix, LN_2PI, SIGMA_FLOOR,
};
pub use mlp::{backprop, backprop_with_input, mlp_forward, Activation, Gradients, LayerLayout, MlpSpec, ParamBlock, Tape};
