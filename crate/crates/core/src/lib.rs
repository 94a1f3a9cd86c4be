//! Bankruptcy-prediction laboratory core.
//!
//! Pure algorithmic building blocks: the corporate-registry data model,
//! feature engineering for financial ratios, generated accounting features
//! and restructuring-behavior features, information-value feature selection,
//! sliding-window sample construction, four model families behind one
//! fit/score contract, ROC/AUC evaluation with ablation and drift reports,
//! and a synthetic registry generator with planted ground truth.
//!
//! The crate is `no_std` (alloc required). File formats, CLI, and pipeline
//! orchestration live in the companion `solvencylab` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod ablate;
pub mod date;
pub mod error;
pub mod eval;
pub mod features;
pub mod math;
pub mod matrix;
pub mod models;
pub mod registry;
pub mod seeding;
pub mod selection;
pub mod synth;
pub mod windows;

/// Crate version, re-exported for run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use date::Date;
pub use error::CoreError;
pub use matrix::{FeatureFamily, FeatureMatrix, FeatureVector, SampleKey};
pub use registry::{
    BalanceSheetSnapshot, CompanyRecord, FilingEvent, Registry, ValidationReport,
};
