//! Graph encoders, a multi-encoder classifier and its training loop, with
//! hand-written backpropagation.

pub mod adam;
pub mod features;
pub mod gat;
pub mod gcn;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod topology;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use features::FeatureMatrix;
pub use gradcheck::{gradient_check, GradCheckReport};
pub use model::{
    cross_entropy, forward, predictions, Encoder, EncoderConfig, EncoderKind, MultiScaleModel,
    PreparedGraph,
};
pub use params::{Grads, ParamId, ParamStore};
pub use topology::{AttentionCsr, GcnOperator, Topology};
pub use train::{train, EpochMetrics, Split, TrainConfig, TrainRecord};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("{what}: expected {expected}, got {got}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("model has {encoders} encoders but {graphs} graphs were supplied")]
    SlotCountMismatch { encoders: usize, graphs: usize },
    #[error("{0} mask is empty")]
    EmptyMask(&'static str),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
}
