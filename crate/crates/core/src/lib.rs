//! Mutation analysis for C-like code bases.
//!
//! The crate covers the whole analysis flow: statement-level mutant
//! generation, compilation with executable hashing across optimization
//! levels, mutant sampling with sequential confidence intervals,
//! coverage-distance test prioritization, test execution with early stop,
//! and coverage-based classification of equivalent and duplicate mutants.

pub mod analyze;
pub mod bench;
pub mod config;
pub mod build;
pub mod coverage;
pub mod error;
pub mod exec;
pub mod mutator;
pub mod pipeline;
pub mod prioritize;
pub mod report;
pub mod sampler;
pub mod seed;
pub mod stats;

pub use crate::coverage::{CoverageVector, DistanceMetric};
pub use crate::error::{Error, Result};
pub use crate::mutator::{Mutant, MutantStatus, MutationOperator, SourceUnit, Statement, StatementKind};
pub use crate::stats::interval::ConfidenceInterval;
