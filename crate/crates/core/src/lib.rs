//! Causal effect estimation for two-point (baseline/follow-up) panels in which
//! every individual is treated between the visits.
//!
//! The central estimator draws many one-row-per-individual subsamples, runs
//! propensity-score matching on each, averages the effects and judges
//! significance by shuffling treatment labels within subsamples. Pooled and
//! difference-in-differences baselines, a mediation decomposition and a
//! Monte-Carlo harness for comparing the estimators sit alongside it.

pub mod error;
pub mod inference;
pub mod matching;
pub mod mediation;
pub mod panel;
pub mod propensity;
pub mod rng;
pub mod simulation;
pub mod subsample;
pub mod synth;

pub use error::{Error, Result};
