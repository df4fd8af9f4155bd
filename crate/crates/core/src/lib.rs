//! Multi-task learning of nominal and ordinal attributes with a shared MLP
//! trunk and uncertainty-weighted task losses.
//!
//! Ordinal attributes are learned as `K - 1` binary "rank exceeds k"
//! subproblems and decoded by counting positives. Task losses are combined as
//! `Σ exp(-s_t)·L_t + ½·s_t` where each `s_t` is a learned log-variance.

pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model_file;
pub mod net;
pub mod optim;
pub mod report;
pub mod task;
pub mod trainer;
pub mod uncertainty;

pub use data::{Dataset, GenConfig};
pub use error::{Error, Result};
pub use net::{Gradients, HeadKind, LossDef, ModelParams, NetConfig, Weighting};
pub use optim::OptimState;
pub use task::{TaskKind, TaskSpec};
pub use trainer::{EpochTrace, Mode, Model, TrainConfig, TrainOutcome};
