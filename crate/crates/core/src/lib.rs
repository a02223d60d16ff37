//! Running gait event detection from bilateral tibial acceleration.
//!
//! The crate covers the full pipeline: IIR filtering and signal calculus
//! ([`signal`]), force-plate ground truth and step windowing ([`dataset`]),
//! per-sample features ([`features`]), the rule-based M-method baseline
//! ([`heuristic`]), an averaged structured perceptron with constrained Viterbi
//! decoding ([`structperc`]), a bidirectional LSTM trained end to end with the
//! structural hinge loss ([`neural`]) on top of a constrained peak decoder
//! ([`decoder`]), evaluation metrics ([`eval`]), and a synthetic recording
//! generator with exact ground truth ([`synthgen`]).

pub mod dataset;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod extrema;
pub mod features;
pub mod heuristic;
pub mod labels;
pub mod neural;
pub mod pipeline;
pub mod signal;
pub mod structperc;
pub mod synthgen;

pub use error::{Error, Result};
pub use labels::{EventPair, Label, LabelSequence};

/// Default sample rate of every sensor stream, in Hz.
pub const DEFAULT_SAMPLE_RATE: u32 = 1000;
