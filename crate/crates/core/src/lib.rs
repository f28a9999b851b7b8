//! A desk-scale lab for learned per-step compute allocation in autoregressive
//! decoding.
//!
//! A small frozen decoder-only transformer ([`tinylm`]) exposes three
//! inference-time efficiency knobs ([`effknobs`]): Quest-style page-sparse
//! attention, magnitude-based MLP channel pruning, and per-token activation
//! fake-quantization. A lightweight policy transformer ([`controller`]) picks
//! a discrete knob tuple at every decode step and is trained with
//! group-relative policy optimization over teacher-forced counterfactual
//! compute schedules ([`grpo`]). The [`evalbench`] module measures the
//! resulting quality/efficiency trade-offs against fixed, random, and
//! hand-crafted baselines.

pub mod actionspace;
pub mod checkpoint;
pub mod config;
pub mod controller;
pub mod corpus;
pub mod effknobs;
pub mod evalbench;
pub mod grpo;
pub mod math;
pub mod rng;
pub mod tinylm;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad configuration or preset.
    #[error("config error: {0}")]
    Config(String),
    /// An operation was called with arguments outside its contract.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Training or evaluation produced non-finite numbers.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
