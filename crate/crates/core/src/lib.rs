//! Automated search over weighted graph self-supervised pretext tasks.
//!
//! A one-layer graph-convolution encoder is trained on a weighted sum of
//! pretext losses. The weights are chosen to maximize pseudo-homophily, the
//! homophily of the graph under k-means clusters of the learned embeddings,
//! either by an evolution strategy ([`es`]) or by one-step meta-gradients
//! ([`ds`]).

pub mod cluster;
pub mod ds;
pub mod encoder;
pub mod error;
pub mod es;
pub mod eval;
pub mod graph;
pub mod numeric;
pub mod tasks;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
