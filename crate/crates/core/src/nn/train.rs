use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::features::FeatureMatrix;
use super::model::{predictions, MultiScaleModel, PreparedGraph};
use super::params::ParamStore;
use super::topology::Topology;
use super::NnError;

/// Node indices of each split, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    fn check(&self, n: usize) -> Result<(), NnError> {
        for (name, idx) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            if idx.is_empty() {
                return Err(NnError::EmptyMask(name));
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                return Err(NnError::DimMismatch {
                    what: "split node index",
                    expected: n,
                    got: bad,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    /// 1-based epoch whose parameters were kept.
    pub checkpoint_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
    /// Test node indices, aligned with `test_scores`.
    pub test_nodes: Vec<usize>,
    pub test_scores: Vec<u8>,
    pub checkpoint: ParamStore,
}

impl TrainRecord {
    pub fn write_metrics_jsonl(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for m in &self.epochs {
            serde_json::to_writer(&mut out, m)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    /// `node_id,score` using external ids.
    pub fn write_scores_csv(&self, path: impl AsRef<Path>, node_ids: &[usize]) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "node_id,score")?;
        for (&u, &s) in self.test_nodes.iter().zip(&self.test_scores) {
            writeln!(out, "{},{}", node_ids[u], s)?;
        }
        out.flush()
    }
}

fn accuracy(pred: &[usize], labels: &[usize], idx: &[usize]) -> f64 {
    let hits = idx.iter().filter(|&&i| pred[i] == labels[i]).count();
    hits as f64 / idx.len() as f64
}

/// Full-batch training with Adam. Propagation during training sees only the
/// subgraph induced by the training nodes; evaluation uses all edges. The
/// parameters with the best validation accuracy (earliest on ties) are kept
/// and left in `model`.
pub fn train(
    model: &mut MultiScaleModel,
    topologies: &[&Topology],
    features: &FeatureMatrix,
    labels: &[usize],
    split: &Split,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainRecord, NnError> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(NnError::DimMismatch {
            what: "label count",
            expected: n,
            got: labels.len(),
        });
    }
    split.check(n)?;
    let full_graphs = model.prepare(topologies)?;
    let train_topologies: Vec<Topology> =
        topologies.iter().map(|t| t.restricted(&split.train)).collect();
    let train_graphs: Vec<PreparedGraph> = model.prepare(&train_topologies.iter().collect::<Vec<_>>())?;
    let train_x = features.select_rows(&split.train);
    let train_labels: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    let train_rows: Vec<usize> = (0..split.train.len()).collect();

    let mut adam = Adam::new(config.adam, &model.params);
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Vec<usize>, ParamStore)> = None;
    for epoch in 1..=config.epochs {
        let (loss, grads) = model.loss_and_grad(&train_x, &train_graphs, &train_labels, &train_rows)?;
        adam.step(&mut model.params, &grads);
        let pred = predictions(&model.forward(features, &full_graphs)?);
        let val_acc = accuracy(&pred, labels, &split.val);
        epochs.push(EpochMetrics {
            epoch,
            train_loss: loss,
            train_acc: accuracy(&pred, labels, &split.train),
            val_acc,
            test_acc: accuracy(&pred, labels, &split.test),
        });
        if best.as_ref().is_none_or(|b| val_acc > b.1) {
            best = Some((epoch, val_acc, pred, model.params.clone()));
        }
        if epoch % 100 == 0 {
            log::debug!("seed {seed} epoch {epoch}: loss {loss:.4} val {val_acc:.4}");
        }
    }
    let Some((checkpoint_epoch, best_val_acc, pred, checkpoint)) = best else {
        return Err(NnError::InvalidConfig("training needs at least one epoch".into()));
    };
    model.params = checkpoint.clone();
    let test_scores: Vec<u8> = split
        .test
        .iter()
        .map(|&i| u8::from(pred[i] == labels[i]))
        .collect();
    let test_acc = accuracy(&pred, labels, &split.test);
    Ok(TrainRecord {
        seed,
        epochs,
        checkpoint_epoch,
        best_val_acc,
        test_acc,
        test_nodes: split.test.clone(),
        test_scores,
        checkpoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{EncoderConfig, EncoderKind};
    use crate::sbm::{generate_sbm, SbmConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sbm_setup() -> (crate::graph::Graph, Split) {
        let g = generate_sbm(&SbmConfig::two_block(60, 0.5, 0.02, 8), 7).unwrap();
        let mut split = Split {
            train: vec![],
            val: vec![],
            test: vec![],
        };
        for i in 0..60 {
            match i % 5 {
                0..=2 => split.train.push(i),
                3 => split.val.push(i),
                _ => split.test.push(i),
            }
        }
        (g, split)
    }

    fn model_for(g: &crate::graph::Graph, seed: u64) -> MultiScaleModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = EncoderConfig::new(EncoderKind::Gcn, g.n_features()).with_dims(16, 8);
        MultiScaleModel::new(&[cfg], 2, &mut rng).unwrap()
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let (g, split) = sbm_setup();
        let mut model = model_for(&g, 1);
        let before = model.params.clone();
        let t = Topology::from_graph(&g);
        let x = FeatureMatrix::new(g.features());
        let cfg = TrainConfig {
            epochs: 5,
            adam: AdamConfig {
                lr: 0.0,
                ..Default::default()
            },
        };
        let rec = train(&mut model, &[&t], &x, g.labels(), &split, &cfg, 1).unwrap();
        assert_eq!(model.params, before);
        let losses: Vec<f64> = rec.epochs.iter().map(|m| m.train_loss).collect();
        assert!(losses.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(rec.checkpoint_epoch, 1);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let (g, mut split) = sbm_setup();
        split.val.clear();
        let mut model = model_for(&g, 1);
        let t = Topology::from_graph(&g);
        let x = FeatureMatrix::new(g.features());
        let err = train(&mut model, &[&t], &x, g.labels(), &split, &TrainConfig::default(), 1);
        assert!(matches!(err, Err(NnError::EmptyMask("val"))));
    }

    #[test]
    fn checkpoint_scores_replay_and_runs_are_deterministic() {
        let (g, split) = sbm_setup();
        let t = Topology::from_graph(&g);
        let x = FeatureMatrix::new(g.features());
        let cfg = TrainConfig {
            epochs: 60,
            adam: AdamConfig {
                lr: 1e-2,
                ..Default::default()
            },
        };
        let mut m1 = model_for(&g, 5);
        let r1 = train(&mut m1, &[&t], &x, g.labels(), &split, &cfg, 5).unwrap();
        let mut m2 = model_for(&g, 5);
        let r2 = train(&mut m2, &[&t], &x, g.labels(), &split, &cfg, 5).unwrap();
        assert_eq!(r1, r2);

        let max_val = r1.epochs.iter().map(|m| m.val_acc).fold(0.0, f64::max);
        let first = r1.epochs.iter().find(|m| m.val_acc == max_val).unwrap();
        assert_eq!(r1.checkpoint_epoch, first.epoch);
        assert_eq!(r1.test_acc, first.test_acc);

        let pred = predictions(&crate::nn::model::forward(&m1, &[&t], &x).unwrap());
        let replay: Vec<u8> = split
            .test
            .iter()
            .map(|&i| u8::from(pred[i] == g.labels()[i]))
            .collect();
        assert_eq!(replay, r1.test_scores);
    }
}
