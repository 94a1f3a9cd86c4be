//! Restructuring-behavior (RB) features: per-type counts, aggregates and
//! per-type trends over a calendar-year window.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::date::Date;
use crate::matrix::{FeatureFamily, FeatureVector};
use crate::registry::{FilingEvent, EVENT_CATALOG};

/// Computes RB features for one company over `[start_year, end_year]`
/// (inclusive). Events outside the window are ignored.
///
/// Per catalog type: `rb_count_<type>` over the window and
/// `rb_trend_<type>` = count in the final year minus the mean yearly count
/// over the earlier window years (missing for 1-year windows). Plus
/// `rb_total_events`, `rb_distinct_event_types` and
/// `rb_months_since_last_event` relative to Dec of the final year (missing
/// when no event falls in the window).
pub fn behavior_features(events: &[&FilingEvent], start_year: i32, end_year: i32) -> FeatureVector {
    assert!(start_year <= end_year, "window must be non-empty");
    let n_years = (end_year - start_year + 1) as usize;
    // counts[type][year - start_year]
    let mut counts = [[0u32; 8]; EVENT_CATALOG.len()];
    assert!(n_years <= 8);
    let mut last_event: Option<Date> = None;
    let mut total = 0u32;
    let mut distinct: BTreeSet<usize> = BTreeSet::new();
    for e in events {
        let y = e.event_date.year;
        if y < start_year || y > end_year {
            continue;
        }
        let ty = EVENT_CATALOG
            .binary_search(&e.event_type.as_str())
            .expect("registry guarantees catalog membership");
        counts[ty][(y - start_year) as usize] += 1;
        total += 1;
        distinct.insert(ty);
        if last_event.map_or(true, |d| e.event_date > d) {
            last_event = Some(e.event_date);
        }
    }

    let mut out = FeatureVector::new();
    for (ty, name) in EVENT_CATALOG.iter().enumerate() {
        let count: u32 = counts[ty][..n_years].iter().sum();
        out.push(alloc::format!("rb_count_{name}"), FeatureFamily::Rb, Some(count as f64));
    }
    out.push("rb_total_events", FeatureFamily::Rb, Some(total as f64));
    out.push("rb_distinct_event_types", FeatureFamily::Rb, Some(distinct.len() as f64));
    let months_since = last_event.map(|d| {
        (Date::year_end(end_year).month_index() - d.month_index()) as f64
    });
    out.push("rb_months_since_last_event", FeatureFamily::Rb, months_since);
    for (ty, name) in EVENT_CATALOG.iter().enumerate() {
        let trend = if n_years >= 2 {
            let final_year = counts[ty][n_years - 1] as f64;
            let earlier: u32 = counts[ty][..n_years - 1].iter().sum();
            Some(final_year - earlier as f64 / (n_years - 1) as f64)
        } else {
            None
        };
        out.push(alloc::format!("rb_trend_{name}"), FeatureFamily::Rb, trend);
    }
    out
}

/// RB feature names for a given window arity, in emission order.
pub fn rb_feature_names() -> Vec<alloc::string::String> {
    let mut names = Vec::new();
    for name in EVENT_CATALOG.iter() {
        names.push(alloc::format!("rb_count_{name}"));
    }
    names.push("rb_total_events".into());
    names.push("rb_distinct_event_types".into());
    names.push("rb_months_since_last_event".into());
    for name in EVENT_CATALOG.iter() {
        names.push(alloc::format!("rb_trend_{name}"));
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn event(date: &str, ty: &str) -> FilingEvent {
        FilingEvent {
            company_id: "c".into(),
            event_date: Date::parse(date).unwrap(),
            event_type: ty.into(),
        }
    }

    #[test]
    fn no_events() {
        let fv = behavior_features(&[], 2015, 2015);
        assert_eq!(fv.len(), 28 + 3 + 28);
        assert_eq!(fv.get("rb_count_manager_change"), Some(Some(0.0)));
        assert_eq!(fv.get("rb_total_events"), Some(Some(0.0)));
        assert_eq!(fv.get("rb_months_since_last_event"), Some(None));
        // 1-year window: trends undefined
        assert_eq!(fv.get("rb_trend_manager_change"), Some(None));
    }

    #[test]
    fn counts_inside_window() {
        let e1 = event("2015-02-01", "registered_office_change");
        let e2 = event("2015-11-30", "registered_office_change");
        let outside = event("2014-06-01", "registered_office_change");
        let fv = behavior_features(&[&e1, &e2, &outside], 2015, 2015);
        assert_eq!(fv.get("rb_count_registered_office_change"), Some(Some(2.0)));
        assert_eq!(fv.get("rb_total_events"), Some(Some(2.0)));
        assert_eq!(fv.get("rb_distinct_event_types"), Some(Some(1.0)));
        // last event Nov 2015, window end Dec 2015 -> 1 month
        assert_eq!(fv.get("rb_months_since_last_event"), Some(Some(1.0)));
    }

    #[test]
    fn trend_formula() {
        // per-year counts (0, 1, 3) over a 3-year window -> 3 - 0.5 = 2.5
        let events = vec![
            event("2014-03-01", "manager_change"),
            event("2015-01-01", "manager_change"),
            event("2015-05-01", "manager_change"),
            event("2015-09-01", "manager_change"),
        ];
        let refs: Vec<&FilingEvent> = events.iter().collect();
        let fv = behavior_features(&refs, 2013, 2015);
        assert_eq!(fv.get("rb_count_manager_change"), Some(Some(4.0)));
        assert_eq!(fv.get("rb_trend_manager_change"), Some(Some(2.5)));
    }

    #[test]
    fn window_additivity_of_counts() {
        let events = vec![
            event("2013-03-01", "address_change"),
            event("2014-06-01", "address_change"),
            event("2015-09-01", "address_change"),
        ];
        let refs: Vec<&FilingEvent> = events.iter().collect();
        let left = behavior_features(&refs, 2013, 2013);
        let right = behavior_features(&refs, 2014, 2015);
        let whole = behavior_features(&refs, 2013, 2015);
        let c = |fv: &FeatureVector| fv.get("rb_count_address_change").unwrap().unwrap();
        assert_eq!(c(&left) + c(&right), c(&whole));
    }

    #[test]
    fn names_match_helper() {
        let fv = behavior_features(&[], 2015, 2016);
        let got: Vec<&str> = fv.entries().iter().map(|e| e.0.as_str()).collect();
        let want = rb_feature_names();
        let want: Vec<&str> = want.iter().map(|s| s.as_str()).collect();
        assert_eq!(got, want);
    }
}
