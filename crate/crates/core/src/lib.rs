//! Labeled-graph generative modeling.
//!
//! The crate is organized around the pieces of a labeled-graph GAN pipeline:
//!
//! - [`graph`]: labeled graphs, BFS canonical ordering, ego networks, dense
//!   padding and the dataset text format.
//! - [`autodiff`]: a small dense tensor tape with reverse-mode gradients that
//!   can themselves be differentiated (needed by the gradient penalty).
//! - [`model`]: the MLP generator and the residual GCN discriminator.
//! - [`training`]: adversarial objectives, penalties and the training loop.
//! - [`baselines`]: Erdős–Rényi, Barabási–Albert and MMSB generators.
//! - [`stats`]: graph statistics and MMD evaluation.
//! - [`kernels`]: WL / shortest-path / graphlet kernels, kernel SVM and
//!   diversity analysis.
//! - [`checkpoint`]: the named-tensor text format shared by models and
//!   baselines.

pub mod autodiff;
pub mod baselines;
pub mod checkpoint;
pub mod graph;
pub mod kernels;
pub mod model;
pub mod rng;
pub mod stats;
pub mod training;

pub use graph::{DenseGraph, GraphDataset, GraphError, LabeledGraph};
