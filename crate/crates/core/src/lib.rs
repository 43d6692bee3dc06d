//! Detection of turn-by-turn GNSS spoofing from in-vehicle sensor traces.
//!
//! The pipeline has four stages:
//!
//! 1. [`data`] ingests or synthesizes time-synchronized GPS + CAN traces and
//!    computes the per-step great-circle distance ([`geo`]).
//! 2. [`attack`] injects location-shift attacks with ground-truth labels.
//! 3. [`predictor`] learns the per-step distance from CAN signals and the
//!    previous GPS step; the absolute gap between predicted and measured
//!    distance is the differential distance (DD).
//! 4. [`rl`] trains a deep Q-learning agent that tunes the DD threshold, and
//!    [`detector`] / [`eval`] apply and score that threshold.
//!
//! [`pipeline`] wires the stages to files for the command-line driver.

pub mod attack;
pub mod config;
pub mod data;
pub mod detector;
pub mod error;
pub mod eval;
pub mod geo;
pub mod io;
pub mod mlp;
pub mod pipeline;
pub mod predictor;
pub mod rl;

pub use error::{Error, Result};
