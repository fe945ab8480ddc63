//! Data-driven identification of grid frequency dynamics.
//!
//! The pipeline cuts 1 Hz frequency recordings into chunks, smooths the
//! angular deviation `ω`, reconstructs the bulk angle `θ`, and regresses `ω̇`
//! onto a library of candidate functions of `(θ, ω, T)` with one of three
//! sparse optimizers. Identified models are simulated forward and scored
//! against the raw data.

pub mod error;
pub mod evaluate;
pub mod gridsearch;
pub mod ingest;
pub mod library;
pub mod preprocess;
pub mod regression;
pub mod simulate;

pub use error::{Error, Result};
