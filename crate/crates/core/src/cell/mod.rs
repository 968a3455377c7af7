//! Executable recurrent cells compiled from genotypes, with reverse-mode
//! gradients through time and plain SGD training.

mod model;
mod params;
mod program;

use thiserror::Error;

pub use model::{mse_loss, train, Model, TrainingSequence};
pub use params::{init_params, init_scale, sgd_step, LinearParams, ParamStore, TrainConfig, CHECKPOINT_SCHEMA_VERSION};
pub use program::{
    CellDims, CellProgram, Instruction, Op, ParamShape, StepGrad, StepState, StepTrace, Tape, DEFAULT_LEAKY_SLOPE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CellError {
    #[error("architecture contains a cycle")]
    CycleDetected,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value at step {step}")]
    NonFiniteValue { step: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("training diverged in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

#[cfg(test)]
mod tests;
