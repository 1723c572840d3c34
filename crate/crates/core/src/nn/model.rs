use ndarray::{s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;
use super::gat::{GatCache, GatEncoder};
use super::gcn::{GcnCache, GcnEncoder};
use super::params::{Grads, ParamId, ParamStore};
use super::topology::{AttentionCsr, GcnOperator, Topology};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Gcn,
    Gat,
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Gcn => "gcn",
            EncoderKind::Gat => "gat",
        }
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(EncoderKind::Gcn),
            "gat" => Ok(EncoderKind::Gat),
            other => Err(format!("unknown encoder kind '{other}' (expected gcn or gat)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub gat_heads: usize,
}

impl EncoderConfig {
    pub const DEFAULT_HIDDEN: usize = 64;
    pub const DEFAULT_OUT: usize = 64;

    pub fn new(kind: EncoderKind, in_dim: usize) -> Self {
        Self {
            kind,
            in_dim,
            hidden_dim: Self::DEFAULT_HIDDEN,
            out_dim: Self::DEFAULT_OUT,
            gat_heads: 1,
        }
    }

    pub fn with_dims(mut self, hidden_dim: usize, out_dim: usize) -> Self {
        self.hidden_dim = hidden_dim;
        self.out_dim = out_dim;
        self
    }

    pub fn with_heads(mut self, heads: usize) -> Self {
        self.gat_heads = heads;
        self
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.in_dim == 0 || self.hidden_dim == 0 || self.out_dim == 0 {
            return Err(NnError::InvalidConfig(format!(
                "encoder dims must be positive, got {}→{}→{}",
                self.in_dim, self.hidden_dim, self.out_dim
            )));
        }
        if self.kind == EncoderKind::Gat && self.gat_heads == 0 {
            return Err(NnError::InvalidConfig("GAT needs at least one head".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Encoder {
    Gcn(GcnEncoder),
    Gat(GatEncoder),
}

/// Graph structure precomputed for one encoder kind.
#[derive(Debug, Clone)]
pub enum PreparedGraph {
    Gcn(GcnOperator),
    Gat(AttentionCsr),
}

impl PreparedGraph {
    pub fn new(topology: &Topology, kind: EncoderKind) -> Self {
        match kind {
            EncoderKind::Gcn => PreparedGraph::Gcn(topology.gcn_operator()),
            EncoderKind::Gat => PreparedGraph::Gat(topology.attention_csr()),
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            PreparedGraph::Gcn(op) => op.n_nodes(),
            PreparedGraph::Gat(csr) => csr.n_nodes(),
        }
    }
}

#[derive(Debug)]
pub enum EncoderCache {
    Gcn(GcnCache),
    Gat(GatCache),
}

impl Encoder {
    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::Gcn(_) => EncoderKind::Gcn,
            Encoder::Gat(_) => EncoderKind::Gat,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Encoder::Gcn(e) => e.out_dim,
            Encoder::Gat(e) => e.out_dim,
        }
    }

    pub fn forward(
        &self,
        params: &ParamStore,
        x: &FeatureMatrix,
        graph: &PreparedGraph,
    ) -> Result<(Array2<f64>, EncoderCache), NnError> {
        match (self, graph) {
            (Encoder::Gcn(e), PreparedGraph::Gcn(op)) => {
                let (out, c) = e.forward(params, x, op);
                Ok((out, EncoderCache::Gcn(c)))
            }
            (Encoder::Gat(e), PreparedGraph::Gat(csr)) => {
                let (out, c) = e.forward(params, x, csr);
                Ok((out, EncoderCache::Gat(c)))
            }
            _ => Err(NnError::InvalidConfig(
                "graph was prepared for a different encoder kind".into(),
            )),
        }
    }

    pub fn backward(
        &self,
        params: &ParamStore,
        x: &FeatureMatrix,
        graph: &PreparedGraph,
        cache: &EncoderCache,
        d_out: &Array2<f64>,
        grads: &mut Grads,
    ) {
        match (self, graph, cache) {
            (Encoder::Gcn(e), PreparedGraph::Gcn(op), EncoderCache::Gcn(c)) => {
                e.backward(params, x, op, c, d_out, grads)
            }
            (Encoder::Gat(e), PreparedGraph::Gat(csr), EncoderCache::Gat(c)) => {
                e.backward(params, x, csr, c, d_out, grads)
            }
            _ => unreachable!("cache produced by a different encoder"),
        }
    }
}

/// Parallel graph encoders whose embeddings are concatenated and fed to a
/// linear classifier. Encoder `k` reads graph slot `k`.
#[derive(Debug, Clone)]
pub struct MultiScaleModel {
    configs: Vec<EncoderConfig>,
    encoders: Vec<Encoder>,
    cls_w: ParamId,
    cls_b: ParamId,
    n_classes: usize,
    pub params: ParamStore,
}

pub struct ForwardCache {
    embedding: Array2<f64>,
    encoders: Vec<EncoderCache>,
}

impl MultiScaleModel {
    pub fn new<R: Rng>(
        configs: &[EncoderConfig],
        n_classes: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if configs.is_empty() {
            return Err(NnError::InvalidConfig("model needs at least one encoder".into()));
        }
        if n_classes == 0 {
            return Err(NnError::InvalidConfig("n_classes must be positive".into()));
        }
        let in_dim = configs[0].in_dim;
        let mut params = ParamStore::new();
        let mut encoders = Vec::with_capacity(configs.len());
        for (k, c) in configs.iter().enumerate() {
            c.validate()?;
            if c.in_dim != in_dim {
                return Err(NnError::DimMismatch {
                    what: "encoder input dims",
                    expected: in_dim,
                    got: c.in_dim,
                });
            }
            let prefix = format!("enc{k}");
            let dims = (c.in_dim, c.hidden_dim, c.out_dim);
            encoders.push(match c.kind {
                EncoderKind::Gcn => Encoder::Gcn(GcnEncoder::new(&mut params, &prefix, dims, rng)),
                EncoderKind::Gat => Encoder::Gat(GatEncoder::new(
                    &mut params,
                    &prefix,
                    dims,
                    c.gat_heads,
                    rng,
                )),
            });
        }
        let width: usize = configs.iter().map(|c| c.out_dim).sum();
        let cls_w = params.add_glorot("cls.w", width, n_classes, (width, n_classes), rng);
        let cls_b = params.add_zeros("cls.b", (1, n_classes));
        Ok(Self {
            configs: configs.to_vec(),
            encoders,
            cls_w,
            cls_b,
            n_classes,
            params,
        })
    }

    pub fn configs(&self) -> &[EncoderConfig] {
        &self.configs
    }

    pub fn encoders(&self) -> &[Encoder] {
        &self.encoders
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn in_dim(&self) -> usize {
        self.configs[0].in_dim
    }

    /// Prepares topologies for each slot's encoder kind.
    pub fn prepare(&self, topologies: &[&Topology]) -> Result<Vec<PreparedGraph>, NnError> {
        if topologies.len() != self.encoders.len() {
            return Err(NnError::SlotCountMismatch {
                encoders: self.encoders.len(),
                graphs: topologies.len(),
            });
        }
        Ok(topologies
            .iter()
            .zip(&self.encoders)
            .map(|(t, e)| PreparedGraph::new(t, e.kind()))
            .collect())
    }

    fn check_inputs(&self, x: &FeatureMatrix, graphs: &[PreparedGraph]) -> Result<(), NnError> {
        if graphs.len() != self.encoders.len() {
            return Err(NnError::SlotCountMismatch {
                encoders: self.encoders.len(),
                graphs: graphs.len(),
            });
        }
        if x.ncols() != self.in_dim() {
            return Err(NnError::DimMismatch {
                what: "feature columns",
                expected: self.in_dim(),
                got: x.ncols(),
            });
        }
        for g in graphs {
            if g.n_nodes() != x.nrows() {
                return Err(NnError::DimMismatch {
                    what: "graph node count",
                    expected: x.nrows(),
                    got: g.n_nodes(),
                });
            }
        }
        Ok(())
    }

    /// Class logits `[n × n_classes]` with the cache needed for backward.
    pub fn forward_cached(
        &self,
        x: &FeatureMatrix,
        graphs: &[PreparedGraph],
    ) -> Result<(Array2<f64>, ForwardCache), NnError> {
        self.check_inputs(x, graphs)?;
        let mut parts = Vec::with_capacity(graphs.len());
        let mut caches = Vec::with_capacity(graphs.len());
        for (enc, g) in self.encoders.iter().zip(graphs) {
            let (h, c) = enc.forward(&self.params, x, g)?;
            parts.push(h);
            caches.push(c);
        }
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        let embedding = ndarray::concatenate(Axis(1), &views).expect("row counts checked");
        let mut logits = embedding.dot(self.params.get(self.cls_w));
        logits += &self.params.get(self.cls_b).row(0);
        Ok((
            logits,
            ForwardCache {
                embedding,
                encoders: caches,
            },
        ))
    }

    pub fn forward(&self, x: &FeatureMatrix, graphs: &[PreparedGraph]) -> Result<Array2<f64>, NnError> {
        Ok(self.forward_cached(x, graphs)?.0)
    }

    /// Mean cross-entropy over `rows` and its gradient w.r.t. all parameters.
    pub fn loss_and_grad(
        &self,
        x: &FeatureMatrix,
        graphs: &[PreparedGraph],
        labels: &[usize],
        rows: &[usize],
    ) -> Result<(f64, Grads), NnError> {
        if rows.is_empty() {
            return Err(NnError::EmptyMask("loss rows"));
        }
        let (logits, cache) = self.forward_cached(x, graphs)?;
        let (loss, d_logits) = cross_entropy(&logits, labels, rows);
        let mut grads = self.params.zeros_like();
        grads.accumulate(self.cls_w, &cache.embedding.t().dot(&d_logits));
        grads.accumulate(self.cls_b, &d_logits.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let d_emb = d_logits.dot(&self.params.get(self.cls_w).t());
        let mut col = 0;
        for ((enc, g), c) in self.encoders.iter().zip(graphs).zip(&cache.encoders) {
            let w = enc.out_dim();
            let d_h = d_emb.slice(s![.., col..col + w]).to_owned();
            enc.backward(&self.params, x, g, c, &d_h, &mut grads);
            col += w;
        }
        Ok((loss, grads))
    }

    pub fn loss(
        &self,
        x: &FeatureMatrix,
        graphs: &[PreparedGraph],
        labels: &[usize],
        rows: &[usize],
    ) -> Result<f64, NnError> {
        if rows.is_empty() {
            return Err(NnError::EmptyMask("loss rows"));
        }
        let logits = self.forward(x, graphs)?;
        Ok(cross_entropy(&logits, labels, rows).0)
    }
}

/// Mean softmax cross-entropy over `rows` and its gradient w.r.t. the logits.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[usize], rows: &[usize]) -> (f64, Array2<f64>) {
    let mut grad = Array2::<f64>::zeros(logits.raw_dim());
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for &i in rows {
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let z: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + z.ln();
        loss += log_z - row[labels[i]];
        let mut g = grad.row_mut(i);
        for (c, &v) in row.iter().enumerate() {
            g[c] = (v - log_z).exp() * scale;
        }
        g[labels[i]] -= scale;
    }
    (loss * scale, grad)
}

/// Row-wise argmax, first index on ties.
pub fn predictions(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Convenience: logits for a model on plain topologies.
pub fn forward(
    model: &MultiScaleModel,
    topologies: &[&Topology],
    x: &FeatureMatrix,
) -> Result<Array2<f64>, NnError> {
    let graphs = model.prepare(topologies)?;
    model.forward(x, &graphs)
}
