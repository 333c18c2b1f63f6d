//! Generator and discriminator networks, expressed over [`crate::autodiff`].

mod discriminator;
mod generator;
mod params;

pub use discriminator::{
    gcn_layer, normalized_adjacency, Aggregation, Discriminator, DiscriminatorConfig,
    DiscriminatorOutput, InputFeatures,
};
pub use generator::{discretize, one_hot, Generator, GeneratorConfig};
pub use params::{ParamSet, ParamShape};

use thiserror::Error;

use crate::autodiff::AutodiffError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("{0}")]
    Config(String),
    #[error("parameter `{name}` missing or shaped {found:?}, expected {expected:?}")]
    Param {
        name: String,
        expected: Vec<usize>,
        found: Option<Vec<usize>>,
    },
}
