//! Dense networks with exact gradients, Adam, and categorical policies.

mod adam;
mod categorical;
pub mod checkpoint;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use categorical::Categorical;
pub use mlp::{forward_reference, Activation, ForwardCache, MlpGradients, MlpParams};
