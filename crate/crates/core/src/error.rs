//! Error types shared across the core modules.

use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Duplicate (company_id, fiscal_year) balance-sheet row.
    DuplicateSnapshot { company_id: String, fiscal_year: i32 },
    /// Filing event type not in the canonical catalog.
    UnknownEventType { token: String },
    /// Snapshot or event references a company_id absent from the registry.
    UnknownCompany { company_id: String },
    /// Duplicate company_id row.
    DuplicateCompany { company_id: String },
    /// A record violates a type invariant (non-finite value, bad date, ...).
    InvalidRecord { detail: String },
    /// Column has no non-missing values; IV binning is undefined.
    Unbinnable { feature: String },
    /// Labels contain a single class where both are required.
    SingleClass,
    /// Model configuration value outside its legal range.
    InvalidConfig { detail: String },
    /// Scoring input schema does not match the trained model schema.
    SchemaMismatch { detail: String },
    /// Sample-set assembly is missing required reference years.
    MissingYears { years: alloc::vec::Vec<i32> },
    /// Reference year whose label year lies beyond the data horizon.
    LabelOutOfHorizon { t0: i32 },
    /// Synthetic-generator configuration is infeasible.
    InfeasibleSynthConfig { detail: String },
    /// Ablation feature sets were built over different sample keys.
    SampleKeyMismatch { detail: String },
    /// Mismatched lengths between paired inputs (scores vs labels, ...).
    LengthMismatch { left: usize, right: usize },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::DuplicateSnapshot { company_id, fiscal_year } => {
                write!(f, "duplicate balance sheet for ({company_id}, {fiscal_year})")
            }
            CoreError::UnknownEventType { token } => {
                write!(f, "unknown filing event type `{token}`")
            }
            CoreError::UnknownCompany { company_id } => {
                write!(f, "record references unknown company `{company_id}`")
            }
            CoreError::DuplicateCompany { company_id } => {
                write!(f, "duplicate company `{company_id}`")
            }
            CoreError::InvalidRecord { detail } => write!(f, "invalid record: {detail}"),
            CoreError::Unbinnable { feature } => {
                write!(f, "feature `{feature}` has no non-missing values; cannot bin")
            }
            CoreError::SingleClass => write!(f, "labels contain a single class"),
            CoreError::InvalidConfig { detail } => write!(f, "invalid config: {detail}"),
            CoreError::SchemaMismatch { detail } => write!(f, "schema mismatch: {detail}"),
            CoreError::MissingYears { years } => {
                write!(f, "missing reference years: {years:?}")
            }
            CoreError::LabelOutOfHorizon { t0 } => {
                write!(f, "labels for reference year {t0} lie beyond the data horizon")
            }
            CoreError::InfeasibleSynthConfig { detail } => {
                write!(f, "infeasible synth config: {detail}")
            }
            CoreError::SampleKeyMismatch { detail } => {
                write!(f, "sample key mismatch: {detail}")
            }
            CoreError::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}
