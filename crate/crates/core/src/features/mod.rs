//! The three feature families: financial ratios (FR), grammar-generated
//! accounting features (AFE) and restructuring-behavior features (RB),
//! plus matrix sanitation.

mod afe;
mod behavior;
mod ratios;
mod sanitize;

pub use afe::{afe_candidates, AfeGrammar};
pub use behavior::{behavior_features, rb_feature_names};
pub use ratios::{financial_ratios, FR_FEATURE_NAMES};
pub use sanitize::{sanitize_matrix, SanitizeReport};

use serde::{Deserialize, Serialize};

/// Which feature families to compute when building samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub enable_fr: bool,
    pub enable_afe: bool,
    pub enable_rb: bool,
    pub afe_grammar: AfeGrammar,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            enable_fr: true,
            enable_afe: true,
            enable_rb: true,
            afe_grammar: AfeGrammar::default(),
        }
    }
}

impl FeatureConfig {
    pub fn any_enabled(&self) -> bool {
        self.enable_fr || self.enable_afe || self.enable_rb
    }
}

/// Missing-aware division. Zero denominator yields a signed infinity which
/// sanitation later clamps; 0/0 is missing.
pub(crate) fn ratio(numerator: Option<f64>, denominator: Option<f64>) -> Option<f64> {
    let (n, d) = (numerator?, denominator?);
    if d == 0.0 {
        if n > 0.0 {
            Some(f64::INFINITY)
        } else if n < 0.0 {
            Some(f64::NEG_INFINITY)
        } else {
            None
        }
    } else {
        Some(n / d)
    }
}

pub(crate) fn add(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? + b?)
}

pub(crate) fn sub(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}
