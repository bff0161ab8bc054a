//! Multi-period patient and resource redistribution across a network of
//! capacitated facilities.
//!
//! The usual pipeline is [`dataio::load_scenario`] to obtain an instance,
//! [`model::build_model`] to formulate it, a [`solver::SolverBackend`] to
//! solve, and [`evaluation::compute_metrics`] to score the plan.

pub mod builder;
pub mod census;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod geo;
pub mod grid;
pub mod los;
pub mod model;
pub mod network;
pub mod pipeline;
pub mod service;
pub mod solver;
pub mod validate;

pub use error::{Error, Result};
