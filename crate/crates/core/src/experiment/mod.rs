//! Multi-seed training of model variants, paired significance tests on
//! per-node scores, and the random-scale control study.

pub mod compare;
pub mod control;
pub mod runner;
pub mod scores;
pub mod split;
pub mod wilcoxon;

pub use compare::{compare, write_comparisons_csv, Comparison, Verdict};
pub use control::{random_scale_control, ControlConfig, ControlReport, ScaleRange};
pub use runner::{
    build_slots, resolve_taus, run_variant, run_with_slots, ExperimentConfig, ExperimentData,
    ModelSettings, ScanSettings, SeedRun, Variant, VariantRun,
};
pub use scores::ScoreTable;
pub use split::{split_from_tags, stratified_split, SplitMode};
pub use wilcoxon::{
    mid_ranks, wilcoxon_signed_rank, wilcoxon_signed_rank_with, Alternative, Method, PValue,
    WilcoxonResult,
};

use crate::graph::GraphError;
use crate::nn::NnError;
use crate::renorm::RenormError;
use crate::spectral::SpectralError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Stats(#[from] wilcoxon::LengthMismatch),
    #[error("misaligned score tables: {0}")]
    MisalignedTables(String),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
