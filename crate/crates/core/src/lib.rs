//! Memory-efficient training with hybrid state-full/state-free updates.
//!
//! Each 2-D parameter is split column-wise into a state-full block, updated
//! by AdamW, and a state-free complement, updated by SignSGD. The size of
//! the state-full block decays linearly over training, and the interval
//! between block redefinitions grows when validation loss plateaus.

pub mod engine;
pub mod error;
pub mod memory;
pub mod optim;
pub mod projectors;
pub mod rng;
pub mod schedules;
pub mod tensor;

pub use engine::{
    redefinition_count, run, EngineConfig, LossGrad, MetricsRow, MetricsTrace, Mode, StateStrategy, Trainer,
    TrainingTask,
};
pub use error::{Error, Result};
pub use memory::{count_states, dynamic_memory_timeline, scaling_extrapolation, MemoryReport, ModelShape};
pub use optim::{adamw_step, sgd_step, signsgd_step, AdamSubState, OptimHyper};
pub use projectors::{BlockProjector, ProjectorSnapshot, SelectionRule, SplitGradient};
pub use rng::Rng;
pub use schedules::{rel_loss_change, RhoSchedule, TController, TControllerConfig, TEvent};
pub use tensor::ParamTensor;
