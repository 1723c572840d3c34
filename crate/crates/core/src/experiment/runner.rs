use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scores::ScoreTable;
use super::split::{split_from_tags, stratified_split, SplitMode};
use super::ExperimentError;
use crate::graph::{laplacian, Dataset};
use crate::nn::{
    train, AdamConfig, EncoderConfig, EncoderKind, EpochMetrics, FeatureMatrix, MultiScaleModel,
    Split, Topology, TrainConfig,
};
use crate::renorm::{macro_node_partition, propagator_matrix, rewire, MacroNodePartition};
use crate::rng::{stream, Stream};
use crate::spectral::{eigendecompose, entropy_scan, EntropyScan, LaplacianSpectrum, SpectralError};

/// Single or multiple encoders, fed the base graph only or also
/// renormalized graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    SB,
    SR,
    MB,
    MR,
}

impl Variant {
    pub fn is_multi(self) -> bool {
        matches!(self, Variant::MB | Variant::MR)
    }

    pub fn uses_renormalized(self) -> bool {
        matches!(self, Variant::SR | Variant::MR)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::SB => "SB",
            Variant::SR => "SR",
            Variant::MB => "MB",
            Variant::MR => "MR",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SB" => Ok(Variant::SB),
            "SR" => Ok(Variant::SR),
            "MB" => Ok(Variant::MB),
            "MR" => Ok(Variant::MR),
            other => Err(format!("unknown variant '{other}' (expected SB, SR, MB or MR)")),
        }
    }
}

/// Grid on which the characteristic scale is searched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub tau_min: f64,
    pub tau_max: f64,
    pub points: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            tau_min: 1e-2,
            tau_max: 1e3,
            points: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub gat_heads: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            hidden_dim: EncoderConfig::DEFAULT_HIDDEN,
            out_dim: EncoderConfig::DEFAULT_OUT,
            gat_heads: 1,
            epochs: 1000,
            lr: AdamConfig::default().lr,
        }
    }
}

pub fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub encoder: EncoderKind,
    pub variant: Variant,
    pub n_encoders: usize,
    /// Scales of the renormalized slots; empty means the top heat-capacity
    /// peaks.
    pub taus: Vec<f64>,
    pub seeds: Vec<u64>,
    pub split: SplitMode,
    /// Seed of the stratified split, shared by all training seeds.
    pub split_seed: u64,
    pub model: ModelSettings,
    pub scan: ScanSettings,
}

impl ExperimentConfig {
    pub fn new(encoder: EncoderKind, variant: Variant) -> Self {
        Self {
            encoder,
            variant,
            n_encoders: if variant.is_multi() { 2 } else { 1 },
            taus: Vec::new(),
            seeds: default_seeds(),
            split: SplitMode::Auto,
            split_seed: 0,
            model: ModelSettings::default(),
            scan: ScanSettings::default(),
        }
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.encoder.as_str().to_ascii_uppercase(), self.variant)
    }

    /// Number of renormalized slots the variant needs.
    pub fn n_renormalized(&self) -> usize {
        match self.variant {
            Variant::SB | Variant::MB => 0,
            Variant::SR => 1,
            Variant::MR => self.n_encoders.saturating_sub(1),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.variant.is_multi() && self.n_encoders < 2 {
            return bad(format!("{} needs at least 2 encoders", self.variant));
        }
        if !self.variant.is_multi() && self.n_encoders != 1 {
            return bad(format!("{} uses exactly 1 encoder", self.variant));
        }
        if !self.variant.uses_renormalized() && !self.taus.is_empty() {
            return bad(format!("{} takes no scales", self.variant));
        }
        if !self.taus.is_empty() && self.taus.len() != self.n_renormalized() {
            return bad(format!(
                "{} with {} encoders needs {} scales, got {}",
                self.variant,
                self.n_encoders,
                self.n_renormalized(),
                self.taus.len()
            ));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return bad(format!("scale must be positive and finite, got {t}"));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let m = &self.model;
        if m.hidden_dim == 0 || m.out_dim == 0 || m.gat_heads == 0 || m.epochs == 0 {
            return bad("model dims, heads and epochs must be positive".into());
        }
        if !(m.lr >= 0.0 && m.lr.is_finite()) {
            return bad(format!("learning rate must be non-negative, got {}", m.lr));
        }
        Ok(())
    }
}

/// A dataset prepared for training: largest component, sparse features, the
/// base topology and a lazily computed Laplacian spectrum.
#[derive(Debug)]
pub struct ExperimentData {
    pub dataset: Dataset,
    pub features: FeatureMatrix,
    pub base: Arc<Topology>,
    spectrum: OnceLock<LaplacianSpectrum>,
}

impl ExperimentData {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        Ok(Self::new(Dataset::load(dir)?))
    }

    pub fn new(dataset: Dataset) -> Self {
        let features = FeatureMatrix::new(dataset.graph.features());
        let base = Arc::new(Topology::from_graph(&dataset.graph));
        Self {
            dataset,
            features,
            base,
            spectrum: OnceLock::new(),
        }
    }

    pub fn spectrum(&self) -> Result<&LaplacianSpectrum, ExperimentError> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let s = eigendecompose(&laplacian(&self.dataset.graph))?;
        Ok(self.spectrum.get_or_init(|| s))
    }

    pub fn scan(&self, settings: &ScanSettings) -> Result<EntropyScan, ExperimentError> {
        Ok(entropy_scan(
            self.spectrum()?,
            settings.tau_min,
            settings.tau_max,
            settings.points,
        )?)
    }

    /// Scales of the `k` highest heat-capacity peaks.
    pub fn characteristic_taus(
        &self,
        settings: &ScanSettings,
        k: usize,
    ) -> Result<Vec<f64>, ExperimentError> {
        let peaks = self.scan(settings)?.characteristic_scales;
        if peaks.is_empty() {
            return Err(SpectralError::NoPeak.into());
        }
        if peaks.len() < k {
            return Err(ExperimentError::InvalidConfig(format!(
                "{k} scales requested but only {} heat-capacity peaks found",
                peaks.len()
            )));
        }
        Ok(peaks.iter().take(k).map(|p| p.tau).collect())
    }

    pub fn partition(&self, tau: f64) -> Result<MacroNodePartition, ExperimentError> {
        let rho = propagator_matrix(self.spectrum()?, tau)?;
        Ok(macro_node_partition(&rho))
    }

    pub fn renormalized(&self, partition: &MacroNodePartition) -> Result<Topology, ExperimentError> {
        let r = rewire(&self.dataset.graph, partition)?;
        log::info!(
            "tau={}: {} macro-nodes, {} rewired edges",
            partition.tau(),
            partition.n_macro(),
            r.graph().n_edges()
        );
        Ok(Topology::from_renormalized(&r))
    }

    pub fn split(&self, mode: SplitMode, split_seed: u64) -> Result<Split, ExperimentError> {
        let labels = self.dataset.graph.labels();
        match (mode, &self.dataset.masks) {
            (SplitMode::Provided | SplitMode::Auto, Some(tags)) => Ok(split_from_tags(tags)),
            (SplitMode::Provided, None) => Err(ExperimentError::InvalidConfig(format!(
                "dataset '{}' has no masks.csv",
                self.dataset.name
            ))),
            (SplitMode::Stratified | SplitMode::Auto, _) => Ok(stratified_split(labels, split_seed)),
        }
    }
}

/// Resolved scales for the renormalized slots.
pub fn resolve_taus(data: &ExperimentData, cfg: &ExperimentConfig) -> Result<Vec<f64>, ExperimentError> {
    cfg.validate()?;
    let k = cfg.n_renormalized();
    if k == 0 || !cfg.taus.is_empty() {
        return Ok(cfg.taus.clone());
    }
    let taus = data.characteristic_taus(&cfg.scan, k)?;
    log::info!("characteristic scales: {taus:?}");
    Ok(taus)
}

/// Graph per encoder slot: base graphs first, then renormalized ones. Base
/// slots share one topology.
pub fn build_slots(
    data: &ExperimentData,
    cfg: &ExperimentConfig,
    taus: &[f64],
) -> Result<Vec<Arc<Topology>>, ExperimentError> {
    let mut slots = Vec::with_capacity(cfg.n_encoders);
    let n_base = cfg.n_encoders - taus.len();
    for _ in 0..n_base {
        slots.push(Arc::clone(&data.base));
    }
    for &tau in taus {
        slots.push(Arc::new(data.renormalized(&data.partition(tau)?)?));
    }
    Ok(slots)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub test_acc: f64,
    pub checkpoint_epoch: usize,
    pub best_val_acc: f64,
    pub epochs: Vec<EpochMetrics>,
    pub test_scores: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct VariantRun {
    pub label: String,
    pub dataset: String,
    pub config: ExperimentConfig,
    pub taus: Vec<f64>,
    pub runs: Vec<SeedRun>,
    pub table: ScoreTable,
}

impl VariantRun {
    pub fn mean_accuracy(&self) -> f64 {
        self.table.mean_accuracy()
    }

    pub fn std_accuracy(&self) -> f64 {
        let acc = self.table.seed_accuracies();
        let m = acc.iter().sum::<f64>() / acc.len() as f64;
        (acc.iter().map(|a| (a - m).powi(2)).sum::<f64>() / acc.len() as f64).sqrt()
    }

    /// `variant,dataset,seed,test_accuracy,checkpoint_epoch`.
    pub fn write_results_csv(&self, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
        let mut out = String::from("variant,dataset,seed,test_accuracy,checkpoint_epoch\n");
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.label, self.dataset, r.seed, r.test_acc, r.checkpoint_epoch
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Accuracy-vs-epoch curves for every seed.
    pub fn write_curves_csv(&self, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "variant,seed,epoch,train_loss,train_acc,val_acc,test_acc")?;
        for r in &self.runs {
            for m in &r.epochs {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    self.label, r.seed, m.epoch, m.train_loss, m.train_acc, m.val_acc, m.test_acc
                )?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `results.csv`, `curves.csv`, `scores.csv` and per-seed
    /// `seed_<s>/metrics.jsonl` + `seed_<s>/scores.csv` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>, ExperimentError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = vec![dir.join("results.csv"), dir.join("curves.csv"), dir.join("scores.csv")];
        self.write_results_csv(&written[0])?;
        self.write_curves_csv(&written[1])?;
        self.table.write_csv(&written[2])?;
        for r in &self.runs {
            let sub = dir.join(format!("seed_{}", r.seed));
            std::fs::create_dir_all(&sub)?;
            let mut out = std::io::BufWriter::new(std::fs::File::create(sub.join("metrics.jsonl"))?);
            for m in &r.epochs {
                serde_json::to_writer(&mut out, m)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
            let mut s = String::from("node_id,score\n");
            for (id, v) in self.table.node_ids.iter().zip(&r.test_scores) {
                s.push_str(&format!("{id},{v}\n"));
            }
            std::fs::write(sub.join("scores.csv"), s)?;
            written.push(sub);
        }
        Ok(written)
    }
}

/// Trains one model per seed on the given slot graphs.
pub fn run_with_slots(
    data: &ExperimentData,
    cfg: &ExperimentConfig,
    slots: &[Arc<Topology>],
    taus: &[f64],
) -> Result<VariantRun, ExperimentError> {
    cfg.validate()?;
    if slots.len() != cfg.n_encoders {
        return Err(ExperimentError::InvalidConfig(format!(
            "{} slot graphs for {} encoders",
            slots.len(),
            cfg.n_encoders
        )));
    }
    let graph = &data.dataset.graph;
    let split = data.split(cfg.split, cfg.split_seed)?;
    let enc = EncoderConfig::new(cfg.encoder, graph.n_features())
        .with_dims(cfg.model.hidden_dim, cfg.model.out_dim)
        .with_heads(cfg.model.gat_heads);
    let encoders = vec![enc; cfg.n_encoders];
    let train_cfg = TrainConfig {
        epochs: cfg.model.epochs,
        adam: AdamConfig {
            lr: cfg.model.lr,
            ..AdamConfig::default()
        },
    };
    let topologies: Vec<&Topology> = slots.iter().map(|t| t.as_ref()).collect();
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = stream(seed, Stream::Init);
            let mut model = MultiScaleModel::new(&encoders, graph.n_classes(), &mut rng)?;
            let rec = train(
                &mut model,
                &topologies,
                &data.features,
                graph.labels(),
                &split,
                &train_cfg,
                seed,
            )?;
            log::info!(
                "{} seed {seed}: test accuracy {:.4} at epoch {}",
                cfg.label(),
                rec.test_acc,
                rec.checkpoint_epoch
            );
            Ok(SeedRun {
                seed,
                test_acc: rec.test_acc,
                checkpoint_epoch: rec.checkpoint_epoch,
                best_val_acc: rec.best_val_acc,
                epochs: rec.epochs,
                test_scores: rec.test_scores,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let node_ids: Vec<usize> = split.test.iter().map(|&i| graph.node_ids()[i]).collect();
    let columns: Vec<Vec<u8>> = runs.iter().map(|r| r.test_scores.clone()).collect();
    let table = ScoreTable::new(cfg.label(), node_ids, cfg.seeds.clone(), &columns)?;
    Ok(VariantRun {
        label: cfg.label(),
        dataset: data.dataset.name.clone(),
        config: cfg.clone(),
        taus: taus.to_vec(),
        runs,
        table,
    })
}

/// Resolves scales, builds the slot graphs and trains every seed.
pub fn run_variant(data: &ExperimentData, cfg: &ExperimentConfig) -> Result<VariantRun, ExperimentError> {
    let taus = resolve_taus(data, cfg)?;
    let slots = build_slots(data, cfg, &taus)?;
    let mut resolved = cfg.clone();
    resolved.taus = taus.clone();
    run_with_slots(data, &resolved, &slots, &taus)
}
