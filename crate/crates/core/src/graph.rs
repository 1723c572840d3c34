//! Undirected simple graphs with dense node features and class labels.
//!
//! The on-disk layout is a directory of plain UTF-8 files:
//!
//! ```text
//! edges.tsv     one edge per line, two whitespace-separated node ids
//! features.csv  one comma-separated row of reals per node (row index = node id)
//! labels.csv    one integer class id per line
//! masks.csv     optional, one of train/val/test per line
//! ```
//!
//! Lines starting with `#` and blank lines are ignored everywhere.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line_no}: malformed line: {reason}")]
    MalformedLine {
        file: String,
        line_no: usize,
        reason: String,
    },
    #[error("node index {index} out of range (graph has {n_nodes} nodes)")]
    NodeIndexOutOfRange { index: usize, n_nodes: usize },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("inconsistent graph: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which split a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }

    fn parse(token: &str) -> Option<Self> {
        match token {
            "train" => Some(SplitTag::Train),
            "val" => Some(SplitTag::Val),
            "test" => Some(SplitTag::Test),
            _ => None,
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An undirected, unweighted simple graph.
///
/// Edges are stored once as `(i, j)` with `i < j`, sorted. A CSR view of the
/// symmetric adjacency is kept alongside for neighbourhood queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    features: Array2<f64>,
    labels: Vec<usize>,
    node_ids: Vec<usize>,
}

impl Graph {
    /// Builds a graph, normalising the edge list: pairs are unordered,
    /// duplicates collapse and self-loops are dropped.
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Array2<f64>,
        labels: Vec<usize>,
        node_ids: Vec<usize>,
    ) -> Result<Self, GraphError> {
        if features.nrows() != n_nodes {
            return Err(GraphError::Inconsistent(format!(
                "{} feature rows for {} nodes",
                features.nrows(),
                n_nodes
            )));
        }
        if labels.len() != n_nodes {
            return Err(GraphError::Inconsistent(format!(
                "{} labels for {} nodes",
                labels.len(),
                n_nodes
            )));
        }
        if node_ids.len() != n_nodes {
            return Err(GraphError::Inconsistent(format!(
                "{} node ids for {} nodes",
                node_ids.len(),
                n_nodes
            )));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for index in [a, b] {
                if index >= n_nodes {
                    return Err(GraphError::NodeIndexOutOfRange { index, n_nodes });
                }
            }
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let (offsets, targets) = build_csr(n_nodes, &edges);
        Ok(Self {
            n_nodes,
            edges,
            offsets,
            targets,
            features,
            labels,
            node_ids,
        })
    }

    /// Graph with the given edges, zero-width features, all-zero labels and
    /// identity node ids. Handy for purely structural work.
    pub fn from_edges(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        Self::new(
            n_nodes,
            edges,
            Array2::zeros((n_nodes, 0)),
            vec![0; n_nodes],
            (0..n_nodes).collect(),
        )
    }

    /// Same nodes, features, labels and ids; different edge set.
    pub fn with_edges(
        &self,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        Self::new(
            self.n_nodes,
            edges,
            self.features.clone(),
            self.labels.clone(),
            self.node_ids.clone(),
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbours of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.targets[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    /// External identifier of each node (row index in the source files).
    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    /// Dense symmetric 0/1 adjacency.
    pub fn adjacency(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n_nodes, self.n_nodes));
        for &(i, j) in &self.edges {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
        a
    }

    /// Component id per node (ids ordered by smallest member) and component count.
    pub fn connected_components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.n_nodes];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.n_nodes {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        queue.push_back(v);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    pub fn is_connected(&self) -> bool {
        self.n_nodes > 0 && self.connected_components().1 == 1
    }

    /// Subgraph induced by `nodes` (taken in the given order), with node ids,
    /// features and labels carried over.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Self, GraphError> {
        let mut remap = vec![usize::MAX; self.n_nodes];
        for (new, &old) in nodes.iter().enumerate() {
            if old >= self.n_nodes {
                return Err(GraphError::NodeIndexOutOfRange {
                    index: old,
                    n_nodes: self.n_nodes,
                });
            }
            remap[old] = new;
        }
        let edges = self.edges.iter().filter_map(|&(a, b)| {
            let (na, nb) = (remap[a], remap[b]);
            (na != usize::MAX && nb != usize::MAX).then_some((na, nb))
        });
        let features = self.features.select(ndarray::Axis(0), nodes);
        let labels = nodes.iter().map(|&i| self.labels[i]).collect();
        let node_ids = nodes.iter().map(|&i| self.node_ids[i]).collect();
        Self::new(nodes.len(), edges, features, labels, node_ids)
    }
}

fn build_csr(n_nodes: usize, edges: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
    let mut degree = vec![0usize; n_nodes];
    for &(a, b) in edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut offsets = Vec::with_capacity(n_nodes + 1);
    offsets.push(0);
    for d in &degree {
        offsets.push(offsets.last().unwrap() + d);
    }
    let mut fill = offsets[..n_nodes].to_vec();
    let mut targets = vec![0; offsets[n_nodes]];
    for &(a, b) in edges {
        targets[fill[a]] = b;
        fill[a] += 1;
        targets[fill[b]] = a;
        fill[b] += 1;
    }
    for u in 0..n_nodes {
        targets[offsets[u]..offsets[u + 1]].sort_unstable();
    }
    (offsets, targets)
}

/// Induced subgraph on the largest connected component, nodes re-indexed
/// densely in ascending original order. Equal-size components are resolved in
/// favour of the one holding the smallest original node id.
pub fn largest_connected_component(g: &Graph) -> Result<Graph, GraphError> {
    if g.n_nodes() == 0 {
        return Err(GraphError::EmptyGraph);
    }
    let (comp, count) = g.connected_components();
    let mut size = vec![0usize; count];
    let mut min_id = vec![usize::MAX; count];
    for (node, &c) in comp.iter().enumerate() {
        size[c] += 1;
        min_id[c] = min_id[c].min(g.node_ids()[node]);
    }
    let best = (0..count)
        .min_by(|&a, &b| size[b].cmp(&size[a]).then(min_id[a].cmp(&min_id[b])))
        .expect("at least one component");
    let nodes: Vec<usize> = (0..g.n_nodes()).filter(|&i| comp[i] == best).collect();
    let dropped = g.n_nodes() - nodes.len();
    if dropped > 0 {
        log::info!(
            "largest component keeps {} of {} nodes ({} components, {} nodes dropped)",
            nodes.len(),
            g.n_nodes(),
            count,
            dropped
        );
    }
    g.induced_subgraph(&nodes)
}

/// Combinatorial Laplacian `D - A` stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    values: Array2<f64>,
}

impl LaplacianMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }
}

pub fn laplacian(g: &Graph) -> LaplacianMatrix {
    let n = g.n_nodes();
    let mut values = Array2::zeros((n, n));
    for &(i, j) in g.edges() {
        values[[i, j]] = -1.0;
        values[[j, i]] = -1.0;
    }
    for i in 0..n {
        values[[i, i]] = g.degree(i) as f64;
    }
    LaplacianMatrix { values }
}

struct DataLines {
    file: String,
    text: String,
}

impl DataLines {
    fn read(path: &Path) -> Result<Self, GraphError> {
        if !path.is_file() {
            return Err(GraphError::MissingFile(path.to_path_buf()));
        }
        Ok(Self {
            file: path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
            text: fs::read_to_string(path)?,
        })
    }

    /// Non-comment, non-blank lines with 1-based line numbers.
    fn lines(&self) -> impl Iterator<Item = (usize, &str)> {
        self.text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
    }

    fn malformed(&self, line_no: usize, reason: impl Into<String>) -> GraphError {
        GraphError::MalformedLine {
            file: self.file.clone(),
            line_no,
            reason: reason.into(),
        }
    }
}

/// Reads a dataset directory. Edge direction is discarded, duplicate and
/// reversed edges collapse, self-loops are dropped.
pub fn load_graph(dir: impl AsRef<Path>) -> Result<Graph, GraphError> {
    let dir = dir.as_ref();
    let edge_file = DataLines::read(&dir.join("edges.tsv"))?;
    let feature_file = DataLines::read(&dir.join("features.csv"))?;
    let label_file = DataLines::read(&dir.join("labels.csv"))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in feature_file.lines() {
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| feature_file.malformed(line_no, e.to_string()))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(feature_file.malformed(
                    line_no,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let n_nodes = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    let features = Array2::from_shape_vec((n_nodes, width), rows.into_iter().flatten().collect())
        .map_err(|e| GraphError::Inconsistent(e.to_string()))?;

    let mut labels = Vec::with_capacity(n_nodes);
    for (line_no, line) in label_file.lines() {
        let label = line
            .parse::<usize>()
            .map_err(|e| label_file.malformed(line_no, e.to_string()))?;
        labels.push(label);
    }
    if labels.len() != n_nodes {
        return Err(GraphError::Inconsistent(format!(
            "{} labels but {} feature rows",
            labels.len(),
            n_nodes
        )));
    }

    let mut edges = Vec::new();
    for (line_no, line) in edge_file.lines() {
        let mut tokens = line.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(edge_file.malformed(line_no, "expected two node ids"));
        };
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|e| edge_file.malformed(line_no, e.to_string()))
        };
        edges.push((parse(a)?, parse(b)?));
    }
    Graph::new(n_nodes, edges, features, labels, (0..n_nodes).collect())
}

/// Reads `masks.csv` if present. One tag per node of the file-level graph.
pub fn load_masks(dir: impl AsRef<Path>) -> Result<Option<Vec<SplitTag>>, GraphError> {
    let path = dir.as_ref().join("masks.csv");
    if !path.exists() {
        return Ok(None);
    }
    let file = DataLines::read(&path)?;
    file.lines()
        .map(|(line_no, line)| {
            SplitTag::parse(line)
                .ok_or_else(|| file.malformed(line_no, format!("unknown split tag {line:?}")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

/// Writes `g` in the dataset layout. Node ids are rewritten densely: row `i`
/// of the output is node `i` of `g`.
pub fn write_graph(g: &Graph, dir: impl AsRef<Path>) -> Result<(), GraphError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut out = BufWriter::new(fs::File::create(dir.join("edges.tsv"))?);
    for &(a, b) in g.edges() {
        writeln!(out, "{a}\t{b}")?;
    }
    out.flush()?;

    let mut out = BufWriter::new(fs::File::create(dir.join("features.csv"))?);
    for row in g.features().rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.write_all(b",")?;
            }
            first = false;
            write!(out, "{v}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;

    let mut out = BufWriter::new(fs::File::create(dir.join("labels.csv"))?);
    for l in g.labels() {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_masks(masks: &[SplitTag], dir: impl AsRef<Path>) -> Result<(), GraphError> {
    let mut out = BufWriter::new(fs::File::create(dir.as_ref().join("masks.csv"))?);
    for m in masks {
        writeln!(out, "{m}")?;
    }
    out.flush()?;
    Ok(())
}

/// A loaded dataset restricted to its largest connected component, with the
/// optional split carried through the re-indexing.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub masks: Option<Vec<SplitTag>>,
}

impl Dataset {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, GraphError> {
        let dir = dir.as_ref();
        let full = load_graph(dir)?;
        let masks = load_masks(dir)?;
        if let Some(m) = &masks {
            if m.len() != full.n_nodes() {
                return Err(GraphError::Inconsistent(format!(
                    "{} mask entries for {} nodes",
                    m.len(),
                    full.n_nodes()
                )));
            }
        }
        let graph = largest_connected_component(&full)?;
        let masks = masks.map(|m| graph.node_ids().iter().map(|&id| m[id]).collect());
        let name = dir
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_owned());
        Ok(Self { name, graph, masks })
    }
}
