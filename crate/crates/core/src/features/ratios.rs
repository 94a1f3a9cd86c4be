//! The 18 balance-sheet financial ratios.
//!
//! `current_ratio` and `current_assets_to_current_liabilities` share a
//! formula; both columns are emitted to keep the 18-count faithful, and the
//! IV filter de-weights the duplicate downstream.

use super::{add, ratio, sub};
use crate::matrix::{FeatureFamily, FeatureVector};
use crate::registry::BalanceSheetSnapshot;

pub const FR_FEATURE_NAMES: [&str; 18] = [
    "current_ratio",
    "debt_to_equity",
    "working_capital_to_total_assets",
    "total_liabilities_to_total_assets",
    "equity_to_total_assets",
    "quick_ratio",
    "current_assets_to_total_assets",
    "cash_to_total_assets",
    "cash_to_current_liabilities",
    "long_term_debt_to_equity",
    "total_assets_growth_rate",
    "quick_assets_to_total_assets",
    "current_assets_to_current_liabilities",
    "cash_and_securities_to_total_assets",
    "total_debt_to_total_assets",
    "equity_to_fixed_assets",
    "current_assets_to_total_liabilities",
    "short_term_liabilities_to_total_assets",
];

/// Computes the 18 FR features. Any ratio with a missing operand is missing;
/// division by zero yields a signed infinity (clamped by sanitation).
/// `total_assets_growth_rate` needs `prior` and is missing without it.
pub fn financial_ratios(
    snapshot: &BalanceSheetSnapshot,
    prior: Option<&BalanceSheetSnapshot>,
) -> FeatureVector {
    let s = snapshot;
    // total debt = current liabilities + long-term debt
    let total_debt = add(s.current_liabilities, s.long_term_debt);
    let growth = prior.and_then(|p| {
        ratio(sub(s.total_assets, p.total_assets), p.total_assets)
    });
    let values = [
        ratio(s.current_assets, s.current_liabilities),
        ratio(s.total_liabilities, s.equity),
        ratio(sub(s.current_assets, s.current_liabilities), s.total_assets),
        ratio(s.total_liabilities, s.total_assets),
        ratio(s.equity, s.total_assets),
        ratio(s.quick_assets, s.current_liabilities),
        ratio(s.current_assets, s.total_assets),
        ratio(s.cash, s.total_assets),
        ratio(s.cash, s.current_liabilities),
        ratio(s.long_term_debt, s.equity),
        growth,
        ratio(s.quick_assets, s.total_assets),
        ratio(s.current_assets, s.current_liabilities),
        ratio(add(s.cash, s.marketable_securities), s.total_assets),
        ratio(total_debt, s.total_assets),
        ratio(s.equity, s.fixed_assets),
        ratio(s.current_assets, s.total_liabilities),
        ratio(s.current_liabilities, s.total_assets),
    ];
    let mut out = FeatureVector::new();
    for (name, value) in FR_FEATURE_NAMES.iter().zip(values) {
        out.push(*name, FeatureFamily::Fr, value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap() -> BalanceSheetSnapshot {
        BalanceSheetSnapshot {
            company_id: "c".into(),
            fiscal_year: 2015,
            total_assets: Some(500.0),
            current_assets: Some(200.0),
            quick_assets: Some(150.0),
            cash: Some(10.0),
            marketable_securities: Some(40.0),
            fixed_assets: Some(300.0),
            total_liabilities: Some(400.0),
            current_liabilities: Some(100.0),
            long_term_debt: Some(250.0),
            equity: Some(100.0),
        }
    }

    #[test]
    fn direct_arithmetic() {
        let fv = financial_ratios(&snap(), None);
        assert_eq!(fv.len(), 18);
        assert_eq!(fv.get("current_ratio"), Some(Some(2.0)));
        assert_eq!(fv.get("debt_to_equity"), Some(Some(4.0)));
        assert_eq!(fv.get("working_capital_to_total_assets"), Some(Some(0.2)));
        assert_eq!(fv.get("cash_and_securities_to_total_assets"), Some(Some(0.1)));
        assert_eq!(fv.get("total_debt_to_total_assets"), Some(Some(0.7)));
        assert_eq!(fv.get("short_term_liabilities_to_total_assets"), Some(Some(0.2)));
    }

    #[test]
    fn zero_numerator_is_zero() {
        let mut s = snap();
        s.equity = Some(0.0);
        let fv = financial_ratios(&s, None);
        assert_eq!(fv.get("equity_to_total_assets"), Some(Some(0.0)));
        // zero denominator with positive numerator -> +inf pre-sanitize
        assert_eq!(fv.get("debt_to_equity"), Some(Some(f64::INFINITY)));
    }

    #[test]
    fn division_by_zero_is_signed_infinity() {
        let mut s = snap();
        s.current_liabilities = Some(0.0);
        s.cash = Some(10.0);
        let fv = financial_ratios(&s, None);
        assert_eq!(fv.get("cash_to_current_liabilities"), Some(Some(f64::INFINITY)));
    }

    #[test]
    fn missing_operand_is_missing() {
        let mut s = snap();
        s.current_liabilities = None;
        let fv = financial_ratios(&s, None);
        assert_eq!(fv.get("current_ratio"), Some(None));
        assert_eq!(fv.get("quick_ratio"), Some(None));
        // unrelated ratios unaffected
        assert_eq!(fv.get("equity_to_total_assets"), Some(Some(0.2)));
    }

    #[test]
    fn growth_rate_uses_prior() {
        let fv = financial_ratios(&snap(), None);
        assert_eq!(fv.get("total_assets_growth_rate"), Some(None));

        let mut prior = snap();
        prior.fiscal_year = 2014;
        prior.total_assets = Some(400.0);
        let fv = financial_ratios(&snap(), Some(&prior));
        assert_eq!(fv.get("total_assets_growth_rate"), Some(Some(0.25)));
    }

    #[test]
    fn names_match_declared_order() {
        let fv = financial_ratios(&snap(), None);
        let names: alloc::vec::Vec<&str> =
            fv.entries().iter().map(|(n, _, _)| n.as_str()).collect();
        assert_eq!(names, FR_FEATURE_NAMES);
    }
}
