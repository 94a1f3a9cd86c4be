//! Grammar-driven automatic feature generation over balance-sheet line items.
//!
//! Candidates are enumerated in a fixed documented order and truncated at
//! `max_features`:
//!   1. `afe_log1p_<item>` unary transforms (when enabled)
//!   2. `afe_lag<k>_delta_<item>` year-over-year deltas, k = 1..=lag_depth
//!   3. `afe_div_<a>_<b>` for every ordered pair a != b (when enabled)
//!   4. `afe_sub_<a>_<b>` for every pair a < b (when enabled)
//!   5. `afe_subdiv_<a>_<b>_<c>` = (a - b) / |c| for a < b, c not in {a, b}
//!      (when enabled)
//!
//! Items and pairs iterate in [`LINE_ITEM_NAMES`] order restricted to
//! `grammar.items`, so generated names are a pure function of the grammar.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::ratio;
use crate::math;
use crate::matrix::{FeatureFamily, FeatureVector};
use crate::registry::{BalanceSheetSnapshot, LINE_ITEM_NAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfeGrammar {
    /// log1p applied to non-negative items (negative values -> missing).
    pub unary_log1p: bool,
    pub binary_div: bool,
    pub binary_sub: bool,
    /// (a - b) / |c| triples.
    pub binary_sub_div_abs: bool,
    /// Hard cap on generated features; enumeration stops here.
    pub max_features: usize,
    /// Year-over-year delta depth; 0 disables lagged deltas.
    pub lag_depth: usize,
    /// Line items the grammar ranges over, subset of [`LINE_ITEM_NAMES`].
    pub items: Vec<String>,
}

impl Default for AfeGrammar {
    fn default() -> Self {
        AfeGrammar {
            unary_log1p: false,
            binary_div: true,
            binary_sub: false,
            binary_sub_div_abs: true,
            max_features: 200,
            lag_depth: 1,
            items: LINE_ITEM_NAMES.iter().map(|s| String::from(*s)).collect(),
        }
    }
}

impl AfeGrammar {
    /// Indices into [`LINE_ITEM_NAMES`] for the grammar's items, in canonical
    /// line-item order.
    fn item_indices(&self) -> Vec<usize> {
        LINE_ITEM_NAMES
            .iter()
            .enumerate()
            .filter(|(_, n)| self.items.iter().any(|i| i == *n))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Generates AFE features for the latest year of a per-company,
/// year-ordered snapshot history. Requires at least one snapshot.
pub fn afe_candidates(snapshots: &[&BalanceSheetSnapshot], grammar: &AfeGrammar) -> FeatureVector {
    assert!(!snapshots.is_empty(), "afe_candidates requires at least one snapshot");
    let latest = snapshots[snapshots.len() - 1];
    let items = grammar.item_indices();
    let mut out = FeatureVector::new();
    let full = |out: &FeatureVector| out.len() >= grammar.max_features;

    if grammar.unary_log1p {
        for &i in &items {
            if full(&out) {
                return out;
            }
            let v = latest.line_item(i).and_then(|v| {
                if v >= 0.0 {
                    Some(math::log1p(v))
                } else {
                    None
                }
            });
            out.push(
                alloc::format!("afe_log1p_{}", LINE_ITEM_NAMES[i]),
                FeatureFamily::Afe,
                v,
            );
        }
    }
    for lag in 1..=grammar.lag_depth {
        let lag_year = latest.fiscal_year - lag as i32;
        let prior = snapshots.iter().find(|s| s.fiscal_year == lag_year);
        for &i in &items {
            if full(&out) {
                return out;
            }
            let v = prior.and_then(|p| Some(latest.line_item(i)? - p.line_item(i)?));
            out.push(
                alloc::format!("afe_lag{lag}_delta_{}", LINE_ITEM_NAMES[i]),
                FeatureFamily::Afe,
                v,
            );
        }
    }
    if grammar.binary_div {
        for &a in &items {
            for &b in &items {
                if a == b {
                    continue;
                }
                if full(&out) {
                    return out;
                }
                out.push(
                    alloc::format!("afe_div_{}_{}", LINE_ITEM_NAMES[a], LINE_ITEM_NAMES[b]),
                    FeatureFamily::Afe,
                    ratio(latest.line_item(a), latest.line_item(b)),
                );
            }
        }
    }
    if grammar.binary_sub {
        for (ai, &a) in items.iter().enumerate() {
            for &b in &items[ai + 1..] {
                if full(&out) {
                    return out;
                }
                let v = (|| Some(latest.line_item(a)? - latest.line_item(b)?))();
                out.push(
                    alloc::format!("afe_sub_{}_{}", LINE_ITEM_NAMES[a], LINE_ITEM_NAMES[b]),
                    FeatureFamily::Afe,
                    v,
                );
            }
        }
    }
    if grammar.binary_sub_div_abs {
        for (ai, &a) in items.iter().enumerate() {
            for &b in &items[ai + 1..] {
                for &c in &items {
                    if c == a || c == b {
                        continue;
                    }
                    if full(&out) {
                        return out;
                    }
                    let diff = (|| Some(latest.line_item(a)? - latest.line_item(b)?))();
                    let v = ratio(diff, latest.line_item(c).map(math::abs));
                    out.push(
                        alloc::format!(
                            "afe_subdiv_{}_{}_{}",
                            LINE_ITEM_NAMES[a],
                            LINE_ITEM_NAMES[b],
                            LINE_ITEM_NAMES[c]
                        ),
                        FeatureFamily::Afe,
                        v,
                    );
                }
            }
        }
    }
    out
}
