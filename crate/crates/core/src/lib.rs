//! Dual-level graph self-supervised pretraining with motif discovery.

pub mod config;
pub mod cross;
pub mod edgepool;
pub mod error;
pub mod eval;
pub mod gin;
pub mod graph;
pub mod motifs;
pub mod plot;
pub mod tensor;
pub mod train;
pub mod wwl;

pub use error::{Error, Result};
