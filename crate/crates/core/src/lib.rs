//! Laplacian renormalization of graphs: spectral entropy and heat capacity of
//! the diffusion propagator, macro-node coarse-graining at a chosen scale,
//! and a small neural stack for testing whether multi-scale graph encoders
//! beat single-scale ones on node classification.

pub mod experiment;
pub mod graph;
pub mod linalg;
pub mod nn;
pub mod renorm;
pub mod rng;
pub mod sbm;
pub mod spectral;
pub mod union_find;

pub use graph::{
    largest_connected_component, laplacian, load_graph, load_masks, write_graph, write_masks,
    Dataset, Graph, GraphError, LaplacianMatrix, SplitTag,
};
pub use renorm::{
    macro_node_partition, propagator_matrix, renormalize_at, rewire, MacroNodePartition,
    Propagator, RenormError, RenormalizedGraph, Renormalizer,
};
pub use spectral::{
    detect_peaks, eigendecompose, entropy_scan, find_peaks, log_grid, propagator_eigenvalues,
    von_neumann_entropy, EntropyScan, LaplacianSpectrum, Peak, SpectralError,
};
pub use experiment::ExperimentError;
