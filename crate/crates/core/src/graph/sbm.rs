use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::numeric::{DenseMatrix, RngStream};

/// Planted-partition stochastic block model with indicator features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    /// Standard deviation of the Gaussian noise added to the one-hot block
    /// indicator features.
    #[serde(default)]
    pub feature_noise: f64,
    /// Extra feature columns holding only `N(0, feature_noise²)` noise.
    #[serde(default)]
    pub noise_dims: usize,
}

/// Samples an SBM graph. Labels are block ids, features are the one-hot
/// block indicator plus `N(0, feature_noise²)` noise, followed by
/// `noise_dims` pure-noise columns.
pub fn sbm_generate(spec: &SbmSpec, seed: u64) -> Result<Graph> {
    if spec.block_sizes.len() < 2 {
        return Err(Error::Config("an SBM needs at least two blocks".into()));
    }
    for (name, p) in [("p_in", spec.p_in), ("p_out", spec.p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{name} = {p} is not a probability")));
        }
    }
    if !(spec.feature_noise >= 0.0 && spec.feature_noise.is_finite()) {
        return Err(Error::Config("feature_noise must be a finite non-negative stddev".into()));
    }
    let labels: Vec<usize> = spec
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let n = labels.len();
    let root = RngStream::new(seed);
    let mut edge_rng = root.fork(0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { spec.p_in } else { spec.p_out };
            if edge_rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    if edges.is_empty() {
        log::warn!("SBM sample has no edges (p_in={}, p_out={})", spec.p_in, spec.p_out);
    }
    let blocks = spec.block_sizes.len();
    let mut noise_rng = root.fork(1);
    let mut features = DenseMatrix::zeros(n, blocks + spec.noise_dims);
    for (u, &b) in labels.iter().enumerate() {
        let row = features.row_mut(u);
        for (j, x) in row.iter_mut().enumerate() {
            let indicator = if j == b { 1.0 } else { 0.0 };
            *x = indicator + spec.feature_noise * noise_rng.normal();
        }
    }
    Graph::new(n, edges, features, Some(labels))
}
