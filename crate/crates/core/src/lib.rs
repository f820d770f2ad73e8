//! Delay-robust optimal control of a linearized muscle, and the translation
//! of the resulting controller into circuits of linear rate neurons.

pub mod cli;
pub mod config;
pub mod delay;
pub mod delay_compat;
pub mod delayed_lqr;
pub mod error;
pub mod muscle_plant;
pub mod neural_circuit;
pub mod realization;
pub mod simulation;
pub mod structure_graph;
pub mod svg;
pub mod transfer_fn;

pub use error::{Error, Result};
