use ndarray::{Array2, Zip};

use crate::graph::Graph;
use crate::renorm::RenormalizedGraph;

/// Graph structure in block form: nodes are grouped into blocks and two nodes
/// are adjacent exactly when their blocks are adjacent. An ordinary graph is
/// the all-singleton case; a rewired graph uses its macro-nodes, which keeps
/// propagation linear in the number of macro-edges even when the expanded
/// edge set has hundreds of thousands of entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    block_of: Vec<usize>,
    member_offsets: Vec<usize>,
    members: Vec<usize>,
    adj_offsets: Vec<usize>,
    adj: Vec<usize>,
}

fn csr(n: usize, pairs: &[(usize, usize)], symmetric: bool) -> (Vec<usize>, Vec<usize>) {
    let mut count = vec![0usize; n];
    for &(a, b) in pairs {
        count[a] += 1;
        if symmetric {
            count[b] += 1;
        }
    }
    let mut offsets = vec![0];
    for c in &count {
        offsets.push(offsets.last().unwrap() + c);
    }
    let mut fill = offsets[..n].to_vec();
    let mut out = vec![0; offsets[n]];
    for &(a, b) in pairs {
        out[fill[a]] = b;
        fill[a] += 1;
        if symmetric {
            out[fill[b]] = a;
            fill[b] += 1;
        }
    }
    for i in 0..n {
        out[offsets[i]..offsets[i + 1]].sort_unstable();
    }
    (offsets, out)
}

impl Topology {
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.n_nodes();
        let (adj_offsets, adj) = csr(n, g.edges(), true);
        Self {
            block_of: (0..n).collect(),
            member_offsets: (0..=n).collect(),
            members: (0..n).collect(),
            adj_offsets,
            adj,
        }
    }

    pub fn from_renormalized(r: &RenormalizedGraph) -> Self {
        let p = r.partition();
        let block_of = p.assignment().to_vec();
        let pairs: Vec<(usize, usize)> =
            block_of.iter().enumerate().map(|(u, &b)| (b, u)).collect();
        let (member_offsets, members) = csr(p.n_macro(), &pairs, false);
        let (adj_offsets, adj) = csr(p.n_macro(), r.macro_edges(), true);
        Self {
            block_of,
            member_offsets,
            members,
            adj_offsets,
            adj,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.block_of.len()
    }

    fn n_blocks(&self) -> usize {
        self.member_offsets.len() - 1
    }

    fn block_members(&self, b: usize) -> &[usize] {
        &self.members[self.member_offsets[b]..self.member_offsets[b + 1]]
    }

    fn block_adj(&self, b: usize) -> &[usize] {
        &self.adj[self.adj_offsets[b]..self.adj_offsets[b + 1]]
    }

    /// Node-level degree.
    pub fn degree(&self, u: usize) -> usize {
        self.block_adj(self.block_of[u])
            .iter()
            .map(|&b| self.block_members(b).len())
            .sum()
    }

    pub fn n_edges(&self) -> usize {
        (0..self.n_nodes()).map(|u| self.degree(u)).sum::<usize>() / 2
    }

    /// Sorted node-level neighbours of `u`.
    pub fn neighbors(&self, u: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .block_adj(self.block_of[u])
            .iter()
            .flat_map(|&b| self.block_members(b).iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Subgraph induced by `nodes`, re-indexed in the given order. Blocks
    /// keep their ids and may become empty.
    pub fn restricted(&self, nodes: &[usize]) -> Self {
        let block_of: Vec<usize> = nodes.iter().map(|&u| self.block_of[u]).collect();
        let pairs: Vec<(usize, usize)> =
            block_of.iter().enumerate().map(|(u, &b)| (b, u)).collect();
        let (member_offsets, members) = csr(self.n_blocks(), &pairs, false);
        Self {
            block_of,
            member_offsets,
            members,
            adj_offsets: self.adj_offsets.clone(),
            adj: self.adj.clone(),
        }
    }

    pub fn gcn_operator(&self) -> GcnOperator {
        let norm = (0..self.n_nodes())
            .map(|u| 1.0 / ((1 + self.degree(u)) as f64).sqrt())
            .collect();
        GcnOperator {
            topology: self.clone(),
            norm,
        }
    }

    pub fn attention_csr(&self) -> AttentionCsr {
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        for u in 0..self.n_nodes() {
            let mut nb = self.neighbors(u);
            nb.push(u);
            nb.sort_unstable();
            targets.extend(nb);
            offsets.push(targets.len());
        }
        AttentionCsr { offsets, targets }
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` applied through the block structure.
#[derive(Debug, Clone)]
pub struct GcnOperator {
    topology: Topology,
    norm: Vec<f64>,
}

impl GcnOperator {
    pub fn n_nodes(&self) -> usize {
        self.norm.len()
    }

    /// `Â H`. The operator is symmetric, so this also maps output gradients
    /// back to input gradients.
    pub fn apply(&self, h: &Array2<f64>) -> Array2<f64> {
        let t = &self.topology;
        assert_eq!(h.nrows(), t.n_nodes());
        let mut g = h.clone();
        Zip::from(g.rows_mut())
            .and(&self.norm)
            .for_each(|mut row, &s| row *= s);
        let mut block_sum = Array2::<f64>::zeros((t.n_blocks(), h.ncols()));
        for (b, mut row) in block_sum.rows_mut().into_iter().enumerate() {
            for &v in t.block_members(b) {
                row += &g.row(v);
            }
        }
        let mut out = g;
        for u in 0..t.n_nodes() {
            let mut row = out.row_mut(u);
            for &b in t.block_adj(t.block_of[u]) {
                row += &block_sum.row(b);
            }
            row *= self.norm[u];
        }
        out
    }

    /// Dense matrix of the operator; for tests on small graphs.
    pub fn to_dense(&self) -> Array2<f64> {
        self.apply(&Array2::eye(self.n_nodes()))
    }
}

/// Neighbourhoods including the node itself, CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionCsr {
    pub offsets: Vec<usize>,
    pub targets: Vec<usize>,
}

impl AttentionCsr {
    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}
