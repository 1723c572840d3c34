use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::runner::{resolve_taus, run_with_slots, ExperimentConfig, ExperimentData, Variant};
use super::scores::ScoreTable;
use super::wilcoxon::{wilcoxon_signed_rank, Alternative, Method};
use super::ExperimentError;
use crate::rng::{stream, Stream};

/// Scales at or below this are redrawn: they leave every node a singleton.
pub const TAU_FLOOR: f64 = 1e-2;
/// The study always spans three ranges, which fixes the Bonferroni divisor.
pub const N_RANGES: usize = 3;
pub const FAMILY_ALPHA: f64 = 0.05;

/// Half-open sampling interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub lo: f64,
    pub hi: f64,
}

impl ScaleRange {
    pub const STANDARD: [ScaleRange; N_RANGES] = [
        ScaleRange { lo: 0.0, hi: 1.0 },
        ScaleRange { lo: 0.0, hi: 10.0 },
        ScaleRange { lo: 0.0, hi: 100.0 },
    ];

    pub fn new(lo: f64, hi: f64) -> Result<Self, ExperimentError> {
        if !(lo >= 0.0 && hi > lo.max(TAU_FLOOR) && hi.is_finite()) {
            return Err(ExperimentError::InvalidConfig(format!(
                "scale range [{lo}, {hi}) must satisfy 0 <= lo < hi and hi > {TAU_FLOOR}"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Samples `n` scales uniformly, redrawing any at or below [`TAU_FLOOR`].
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| loop {
                let t = rng.gen_range(self.lo..self.hi);
                if t > TAU_FLOOR {
                    break t;
                }
            })
            .collect()
    }
}

impl fmt::Display for ScaleRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.lo, self.hi)
    }
}

impl std::str::FromStr for ScaleRange {
    type Err = String;

    /// `"lo,hi"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| format!("expected 'lo,hi', got '{s}'"))?;
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
        ScaleRange::new(parse(lo)?, parse(hi)?).map_err(|e| e.to_string())
    }
}

pub fn bonferroni_threshold(n_samples: usize) -> f64 {
    FAMILY_ALPHA / (N_RANGES * n_samples) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    /// MR configuration; its scale (explicit or detected) is the reference.
    pub base: ExperimentConfig,
    pub ranges: Vec<ScaleRange>,
    pub n_samples: usize,
    pub sampler_seed: u64,
}

impl ControlConfig {
    pub fn new(base: ExperimentConfig) -> Self {
        Self {
            base,
            ranges: ScaleRange::STANDARD.to_vec(),
            n_samples: 10,
            sampler_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSample {
    pub range: String,
    pub tau: f64,
    pub n_macro: usize,
    pub mean_accuracy: f64,
    /// One-sided test that the random scale scores higher.
    pub p_value: f64,
    pub statistic: f64,
    pub n_effective: usize,
    pub method: Method,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub dataset: String,
    pub model: String,
    pub seeds: Vec<u64>,
    pub characteristic_tau: f64,
    pub characteristic_n_macro: usize,
    pub characteristic_accuracy: f64,
    pub n_samples_per_range: usize,
    pub bonferroni_threshold: f64,
    pub samples: Vec<ControlSample>,
    pub best: Option<ControlSample>,
    pub worst: Option<ControlSample>,
    pub n_significant: usize,
    /// Distinct partitions actually trained (identical partitions share a run).
    pub distinct_partitions: usize,
}

impl ControlReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

struct Trained {
    table: ScoreTable,
    n_macro: usize,
}

/// Compares the MR model at the characteristic scale with MR models at
/// randomly drawn scales, flagging random scales that do significantly
/// better at the Bonferroni-corrected level.
pub fn random_scale_control(
    data: &ExperimentData,
    cfg: &ControlConfig,
) -> Result<ControlReport, ExperimentError> {
    let base = &cfg.base;
    if base.variant != Variant::MR || base.n_encoders != 2 {
        return Err(ExperimentError::InvalidConfig(
            "the control study uses MR with two encoders".into(),
        ));
    }
    if cfg.n_samples == 0 || cfg.ranges.is_empty() {
        return Err(ExperimentError::InvalidConfig(
            "need at least one range and one sample".into(),
        ));
    }
    let characteristic_tau = resolve_taus(data, base)?[0];

    let mut cache: HashMap<Vec<usize>, Arc<Trained>> = HashMap::new();
    let mut train_at = |tau: f64| -> Result<Arc<Trained>, ExperimentError> {
        let partition = data.partition(tau)?;
        if let Some(hit) = cache.get(partition.assignment()) {
            log::info!("tau={tau}: partition already trained, reusing scores");
            return Ok(Arc::clone(hit));
        }
        let slots = vec![Arc::clone(&data.base), Arc::new(data.renormalized(&partition)?)];
        let mut c = base.clone();
        c.taus = vec![tau];
        let run = run_with_slots(data, &c, &slots, &[tau])?;
        let trained = Arc::new(Trained {
            table: run.table,
            n_macro: partition.n_macro(),
        });
        cache.insert(partition.assignment().to_vec(), Arc::clone(&trained));
        Ok(trained)
    };

    let reference = train_at(characteristic_tau)?;
    let threshold = bonferroni_threshold(cfg.n_samples);
    let reference_scores = reference.table.flattened();
    let mut samples = Vec::new();
    for range in &cfg.ranges {
        let mut rng = stream(cfg.sampler_seed ^ range.hi.to_bits(), Stream::Sampler);
        for tau in range.sample(cfg.n_samples, &mut rng) {
            let trained = train_at(tau)?;
            trained.table.check_aligned(&reference.table)?;
            let w = wilcoxon_signed_rank(
                &trained.table.flattened(),
                &reference_scores,
                Alternative::Greater,
            )?;
            samples.push(ControlSample {
                range: range.to_string(),
                tau,
                n_macro: trained.n_macro,
                mean_accuracy: trained.table.mean_accuracy(),
                p_value: w.p_value,
                statistic: w.statistic,
                n_effective: w.n_effective,
                method: w.method,
                significant: w.p_value < threshold,
            });
        }
    }
    let by_acc = |a: &&ControlSample, b: &&ControlSample| a.mean_accuracy.total_cmp(&b.mean_accuracy);
    let best = samples.iter().max_by(by_acc).cloned();
    let worst = samples.iter().min_by(by_acc).cloned();
    let n_significant = samples.iter().filter(|s| s.significant).count();
    Ok(ControlReport {
        dataset: data.dataset.name.clone(),
        model: base.label(),
        seeds: base.seeds.clone(),
        characteristic_tau,
        characteristic_n_macro: reference.n_macro,
        characteristic_accuracy: reference.table.mean_accuracy(),
        n_samples_per_range: cfg.n_samples,
        bonferroni_threshold: threshold,
        samples,
        best,
        worst,
        n_significant,
        distinct_partitions: cache.len(),
    })
}
