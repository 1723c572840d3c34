//! Stochastic block model graphs with block-id labels.

use ndarray::Array2;
use rand::Rng;

use crate::graph::{Graph, GraphError};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub n_features: usize,
}

impl SbmConfig {
    pub fn two_block(n: usize, p_in: f64, p_out: f64, n_features: usize) -> Self {
        Self {
            block_sizes: vec![n / 2, n - n / 2],
            p_in,
            p_out,
            n_features,
        }
    }
}

/// Samples every pair independently; features are uniform on `[0, 1)`.
pub fn generate_sbm(config: &SbmConfig, seed: u64) -> Result<Graph, GraphError> {
    for p in [config.p_in, config.p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(GraphError::Inconsistent(format!(
                "edge probability {p} outside [0, 1]"
            )));
        }
    }
    let labels: Vec<usize> = config
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let n = labels.len();
    if n == 0 {
        return Err(GraphError::EmptyGraph);
    }
    let mut rng = stream(seed, Stream::Sampler);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] {
                config.p_in
            } else {
                config.p_out
            };
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let features = Array2::from_shape_simple_fn((n, config.n_features), || rng.gen::<f64>());
    Graph::new(n, edges, features, labels, (0..n).collect())
}
