//! Diffusion-scale renormalisation of a graph.
//!
//! At scale `τ` two nodes `i != j` are fused when the information they
//! exchange exceeds the smaller of their self-informations,
//! `ρ_ij > min(ρ_ii, ρ_jj)`. Macro-nodes are the connected components of that
//! relation. The graph is then rewired so that every member of a macro-node
//! inherits the union of the members' neighbourhoods, and links inside a
//! macro-node are removed. The node set is left untouched.

use std::collections::BTreeSet;

use ndarray::Array2;
use thiserror::Error;

use crate::graph::{laplacian, Graph, GraphError};
use crate::spectral::{eigendecompose, propagator_eigenvalues, LaplacianSpectrum, SpectralError};
use crate::union_find::DisjointSet;

#[derive(Debug, Error)]
pub enum RenormError {
    #[error("partition covers {partition} nodes but the graph has {graph}")]
    PartitionSizeMismatch { partition: usize, graph: usize },
    #[error("renormalisation needs a connected graph")]
    Disconnected,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Trace-normalised heat kernel `e^{-τL} / Tr e^{-τL}`.
#[derive(Debug, Clone)]
pub struct Propagator {
    values: Array2<f64>,
    tau: f64,
}

impl Propagator {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Wraps an explicit matrix, e.g. one built by hand in tests.
    pub fn from_values(values: Array2<f64>, tau: f64) -> Self {
        assert!(values.is_square());
        Self { values, tau }
    }
}

/// `ρ(τ) = Q diag(μ(τ)) Qᵀ`; requires `tau > 0`.
pub fn propagator_matrix(
    spectrum: &LaplacianSpectrum,
    tau: f64,
) -> Result<Propagator, SpectralError> {
    if tau.is_nan() || tau <= 0.0 || tau.is_infinite() {
        return Err(SpectralError::NegativeTau(tau));
    }
    let mu = propagator_eigenvalues(spectrum, tau)?;
    let values = crate::linalg::weighted_gram(spectrum.eigenvectors(), &mu);
    Ok(Propagator { values, tau })
}

/// Node → macro-node assignment at a given scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroNodePartition {
    assignment: Vec<usize>,
    n_macro: usize,
    tau: f64,
}

impl MacroNodePartition {
    /// Canonicalises arbitrary labels: macro ids become dense and ordered by
    /// each macro-node's smallest member.
    pub fn from_labels(labels: &[usize], tau: f64) -> Self {
        let mut remap = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = remap.len();
                *remap.entry(*l).or_insert(next)
            })
            .collect();
        Self {
            assignment,
            n_macro: remap.len(),
            tau,
        }
    }

    pub fn singletons(n: usize, tau: f64) -> Self {
        Self {
            assignment: (0..n).collect(),
            n_macro: n,
            tau,
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn macro_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn n_macro(&self) -> usize {
        self.n_macro
    }

    pub fn n_nodes(&self) -> usize {
        self.assignment.len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Members of each macro-node, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_macro];
        for (node, &m) in self.assignment.iter().enumerate() {
            out[m].push(node);
        }
        out
    }

    pub fn is_all_singleton(&self) -> bool {
        self.n_macro == self.assignment.len()
    }
}

/// Connected components of the merge relation `ρ_ij > min(ρ_ii, ρ_jj)`.
pub fn macro_node_partition(rho: &Propagator) -> MacroNodePartition {
    let n = rho.n();
    let v = rho.values();
    let mut sets = DisjointSet::new(n);
    for i in 0..n {
        let row = v.row(i);
        let self_i = row[i];
        for j in (i + 1)..n {
            if row[j] > self_i.min(v[[j, j]]) {
                sets.union(i, j);
            }
        }
    }
    let (assignment, n_macro) = sets.labels();
    MacroNodePartition {
        assignment,
        n_macro,
        tau: rho.tau(),
    }
}

/// A rewired graph on the original node set together with the partition it
/// was built from.
#[derive(Debug, Clone)]
pub struct RenormalizedGraph {
    graph: Graph,
    partition: MacroNodePartition,
    macro_edges: Vec<(usize, usize)>,
}

impl RenormalizedGraph {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn into_graph(self) -> Graph {
        self.graph
    }

    pub fn partition(&self) -> &MacroNodePartition {
        &self.partition
    }

    /// Pairs `(A, B)`, `A < B`, of adjacent macro-nodes. Node `u` and `v` are
    /// linked in the rewired graph exactly when their macro-nodes form one of
    /// these pairs.
    pub fn macro_edges(&self) -> &[(usize, usize)] {
        &self.macro_edges
    }
}

/// Macro-nodes become complete bipartite blocks towards every macro-node they
/// touched in `g`; intra-macro links are removed.
pub fn rewire(g: &Graph, p: &MacroNodePartition) -> Result<RenormalizedGraph, RenormError> {
    if p.n_nodes() != g.n_nodes() {
        return Err(RenormError::PartitionSizeMismatch {
            partition: p.n_nodes(),
            graph: g.n_nodes(),
        });
    }
    let macro_edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .filter_map(|&(u, v)| {
            let (a, b) = (p.macro_of(u), p.macro_of(v));
            (a != b).then_some((a.min(b), a.max(b)))
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let members = p.members();
    let edges = macro_edges.iter().flat_map(|&(a, b)| {
        let (ma, mb) = (&members[a], &members[b]);
        ma.iter().flat_map(move |&u| mb.iter().map(move |&v| (u, v)))
    });
    let graph = g.with_edges(edges)?;
    Ok(RenormalizedGraph {
        graph,
        partition: p.clone(),
        macro_edges,
    })
}

/// Caches the spectrum of a connected graph so it can be renormalised at
/// several scales.
#[derive(Debug, Clone)]
pub struct Renormalizer<'g> {
    graph: &'g Graph,
    spectrum: LaplacianSpectrum,
}

impl<'g> Renormalizer<'g> {
    pub fn new(graph: &'g Graph) -> Result<Self, RenormError> {
        if !graph.is_connected() {
            return Err(RenormError::Disconnected);
        }
        let spectrum = eigendecompose(&laplacian(graph))?;
        Ok(Self { graph, spectrum })
    }

    pub fn with_spectrum(graph: &'g Graph, spectrum: LaplacianSpectrum) -> Self {
        assert_eq!(graph.n_nodes(), spectrum.n());
        Self { graph, spectrum }
    }

    pub fn spectrum(&self) -> &LaplacianSpectrum {
        &self.spectrum
    }

    pub fn partition_at(&self, tau: f64) -> Result<MacroNodePartition, RenormError> {
        let rho = propagator_matrix(&self.spectrum, tau)?;
        Ok(macro_node_partition(&rho))
    }

    pub fn at(&self, tau: f64) -> Result<RenormalizedGraph, RenormError> {
        let partition = self.partition_at(tau)?;
        let out = rewire(self.graph, &partition)?;
        log::info!(
            "renormalised at tau={tau}: {} macro-nodes, {} -> {} edges",
            partition.n_macro(),
            self.graph.n_edges(),
            out.graph().n_edges()
        );
        Ok(out)
    }
}

/// Laplacian → spectrum → propagator → partition → rewiring, at one scale.
pub fn renormalize_at(g: &Graph, tau: f64) -> Result<RenormalizedGraph, RenormError> {
    Renormalizer::new(g)?.at(tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn k2() -> Graph {
        Graph::from_edges(2, [(0, 1)]).unwrap()
    }

    #[test]
    fn k2_propagator_closed_form() {
        let s = eigendecompose(&laplacian(&k2())).unwrap();
        let rho = propagator_matrix(&s, 0.5).unwrap();
        // diag 1/2, off-diagonal (1 - e^-1) / (2 (1 + e^-1))
        let off = 0.231_058_578_630_004_88;
        assert_abs_diff_eq!(rho.values()[[0, 0]], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.values()[[1, 1]], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.values()[[0, 1]], off, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.values()[[1, 0]], off, epsilon = 1e-12);

        let early = propagator_matrix(&s, 1e-12).unwrap();
        assert_abs_diff_eq!(early.values()[[0, 0]], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(early.values()[[0, 1]], 0.0, epsilon = 1e-10);

        for bad in [0.0, -1.0, f64::NAN] {
            assert!(propagator_matrix(&s, bad).is_err());
        }
    }

    #[test]
    fn propagator_rows_sum_to_inverse_partition_function() {
        // e^{-τL} 1 = 1, so every row of ρ sums to 1 / Tr e^{-τL}; P3 has
        // spectrum {0, 1, 3}.
        let p3 = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let s = eigendecompose(&laplacian(&p3)).unwrap();
        for tau in [0.01, 0.3, 1.0, 7.0, 100.0] {
            let rho = propagator_matrix(&s, tau).unwrap();
            let z = 1.0 + (-tau).exp() + (-3.0 * tau).exp();
            for row in rho.values().rows() {
                assert_abs_diff_eq!(row.sum(), 1.0 / z, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(rho.values().diag().sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn k2_never_merges() {
        let s = eigendecompose(&laplacian(&k2())).unwrap();
        for tau in [1e-3, 0.5, 3.0, 30.0] {
            let p = macro_node_partition(&propagator_matrix(&s, tau).unwrap());
            assert!(p.is_all_singleton(), "tau={tau}");
        }
    }

    #[test]
    fn complete_merge_relation_gives_one_macro_node() {
        let rho = Propagator::from_values(
            array![[0.1, 0.3, 0.3], [0.3, 0.1, 0.3], [0.3, 0.3, 0.1]],
            1.0,
        );
        let p = macro_node_partition(&rho);
        assert_eq!(p.n_macro(), 1);
        assert_eq!(p.assignment(), &[0, 0, 0]);
    }

    #[test]
    fn merge_uses_strict_inequality_and_closure() {
        // 0~1 (0.2 > min(0.2, 0.5) is false), 1~2 and 2~3 merge, closure joins 1..3
        let rho = Propagator::from_values(
            array![
                [0.2, 0.2, 0.0, 0.0],
                [0.2, 0.5, 0.4, 0.0],
                [0.0, 0.4, 0.3, 0.35],
                [0.0, 0.0, 0.35, 0.6],
            ],
            1.0,
        );
        let p = macro_node_partition(&rho);
        assert_eq!(p.assignment(), &[0, 1, 1, 1]);
    }

    #[test]
    fn rewire_sketch() {
        // nodes 1,2 share a macro-node, 3 is alone; node 0 is an isolated spectator
        let g = Graph::from_edges(4, [(1, 2), (1, 3)]).unwrap();
        let p = MacroNodePartition::from_labels(&[0, 1, 1, 2], 1.0);
        let r = rewire(&g, &p).unwrap();
        assert_eq!(r.graph().edges(), &[(1, 3), (2, 3)]);
        assert_eq!(r.macro_edges(), &[(1, 2)]);
    }

    #[test]
    fn rewire_identity_and_collapse() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
        let same = rewire(&g, &MacroNodePartition::singletons(5, 1.0)).unwrap();
        assert_eq!(same.graph(), &g);
        let one = rewire(&g, &MacroNodePartition::from_labels(&[7; 5], 1.0)).unwrap();
        assert_eq!(one.graph().n_edges(), 0);
        assert_eq!(one.graph().n_nodes(), 5);
        assert!(matches!(
            rewire(&g, &MacroNodePartition::singletons(4, 1.0)),
            Err(RenormError::PartitionSizeMismatch { .. })
        ));
    }

    #[test]
    fn labels_are_canonicalised() {
        let p = MacroNodePartition::from_labels(&[9, 3, 9, 4, 3], 2.0);
        assert_eq!(p.assignment(), &[0, 1, 0, 2, 1]);
        assert_eq!(p.n_macro(), 3);
        assert_eq!(p.members(), vec![vec![0, 2], vec![1, 4], vec![3]]);
    }

    #[test]
    fn renormalize_requires_connected_graph() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            renormalize_at(&g, 1.0),
            Err(RenormError::Disconnected)
        ));
    }
}
