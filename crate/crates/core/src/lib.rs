//! Landscape-aware performance prediction and module attribution for
//! modular CMA-ES.
//!
//! The crate is organized as a pipeline:
//!
//! * [`problems`] — a BBOB-style suite of 24 noiseless functions with
//!   seeded per-instance transformations and known optima.
//! * [`sampling`] — deterministic Sobol/Halton/uniform sample sources and
//!   the design used for landscape feature extraction.
//! * [`modcma`] — a modular CMA-ES over seven module axes (elitism,
//!   mirrored sampling, base sampler, recombination weights, restarts,
//!   bound correction, step-size adaptation) producing fixed-budget
//!   best-precision records.
//! * [`ela`] — the 46 "cheap" exploratory landscape analysis features in
//!   six groups, with median aggregation over repetitions.
//! * [`forest`] — CART trees and random forests (regression and
//!   classification), grid search and leave-one-group-out validation.
//! * [`attribution`] — exact interventional Shapley values for tree
//!   ensembles plus fold/instance aggregation.
//! * [`analysis`] — configuration-pair mining, top-k feature-frequency
//!   tables and module-status classification.
//! * [`pipeline`] — experiment specs, CSV storage, scheduling, reports.

pub mod analysis;
pub mod attribution;
pub mod ela;
pub mod error;
pub mod forest;
pub mod modcma;
pub mod pipeline;
pub mod problems;
pub mod sampling;
pub mod seeding;

pub use error::{Error, Result};
