//! Corporate-registry data model: companies, balance-sheet snapshots and
//! restructuring filing events, plus validation and population filtering.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::date::Date;
use crate::error::CoreError;

/// Canonical catalog of the 28 restructuring filing categories, normalized
/// to snake_case tokens. Unknown tokens are hard errors so feature columns
/// stay stable across datasets.
pub const EVENT_CATALOG: [&str; 28] = [
    "accounts_auditor_change",
    "activities_change",
    "address_change",
    "administrator_change",
    "associate_change",
    "authorized_signatory_change",
    "branch_representative_change",
    "business_sector_change",
    "chairman_director_change",
    "commitment_power_change",
    "daily_management_delegate_change",
    "depositary_change",
    "duration_change",
    "legal_form_change",
    "manager_change",
    "managing_director_change",
    "merger_demerger",
    "ministerial_approval",
    "name_change",
    "name_or_corporate_name_change",
    "reason_change",
    "registered_office_change",
    "seat_change",
    "social_capital_change",
    "social_exercise_change",
    "social_object_change",
    "trading_name_change",
    "transfer_of_business_assets",
];

pub fn is_catalog_event(token: &str) -> bool {
    EVENT_CATALOG.binary_search(&token).is_ok()
}

/// Balance-sheet line item names, in CSV column order. All feature
/// construction iterates these in this fixed order.
pub const LINE_ITEM_NAMES: [&str; 10] = [
    "total_assets",
    "current_assets",
    "quick_assets",
    "cash",
    "marketable_securities",
    "fixed_assets",
    "total_liabilities",
    "current_liabilities",
    "long_term_debt",
    "equity",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyRecord {
    pub company_id: String,
    pub sector: String,
    pub incorporated_year: i32,
    pub bankrupt_date: Option<Date>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceSheetSnapshot {
    pub company_id: String,
    pub fiscal_year: i32,
    pub total_assets: Option<f64>,
    pub current_assets: Option<f64>,
    pub quick_assets: Option<f64>,
    pub cash: Option<f64>,
    pub marketable_securities: Option<f64>,
    pub fixed_assets: Option<f64>,
    pub total_liabilities: Option<f64>,
    pub current_liabilities: Option<f64>,
    pub long_term_debt: Option<f64>,
    pub equity: Option<f64>,
}

impl BalanceSheetSnapshot {
    pub fn line_item(&self, idx: usize) -> Option<f64> {
        match idx {
            0 => self.total_assets,
            1 => self.current_assets,
            2 => self.quick_assets,
            3 => self.cash,
            4 => self.marketable_securities,
            5 => self.fixed_assets,
            6 => self.total_liabilities,
            7 => self.current_liabilities,
            8 => self.long_term_debt,
            9 => self.equity,
            _ => None,
        }
    }

    pub fn line_items(&self) -> [Option<f64>; 10] {
        [
            self.total_assets,
            self.current_assets,
            self.quick_assets,
            self.cash,
            self.marketable_securities,
            self.fixed_assets,
            self.total_liabilities,
            self.current_liabilities,
            self.long_term_debt,
            self.equity,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FilingEvent {
    pub company_id: String,
    pub event_date: Date,
    pub event_type: String,
}

/// Immutable collection of companies, snapshots and filing events; the
/// single source of truth for all downstream stages. Construction enforces
/// referential integrity, so readers never re-check it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    companies: BTreeMap<String, CompanyRecord>,
    snapshots: BTreeMap<(String, i32), BalanceSheetSnapshot>,
    events: Vec<FilingEvent>,
}

impl Registry {
    /// Assembles a registry from raw rows, enforcing all type invariants.
    /// Row order does not affect the result: storage is canonically sorted.
    pub fn build(
        companies: Vec<CompanyRecord>,
        snapshots: Vec<BalanceSheetSnapshot>,
        events: Vec<FilingEvent>,
    ) -> Result<Self, CoreError> {
        let mut company_map = BTreeMap::new();
        for c in companies {
            if let Some(bd) = c.bankrupt_date {
                if bd < Date::year_start(c.incorporated_year) {
                    return Err(CoreError::InvalidRecord {
                        detail: alloc::format!(
                            "company {}: bankrupt_date {} precedes incorporation year {}",
                            c.company_id, bd, c.incorporated_year
                        ),
                    });
                }
            }
            if company_map.insert(c.company_id.clone(), c.clone()).is_some() {
                return Err(CoreError::DuplicateCompany { company_id: c.company_id });
            }
        }
        let mut snapshot_map = BTreeMap::new();
        for s in snapshots {
            if !company_map.contains_key(&s.company_id) {
                return Err(CoreError::UnknownCompany { company_id: s.company_id });
            }
            for (idx, v) in s.line_items().iter().enumerate() {
                if let Some(v) = v {
                    if !v.is_finite() {
                        return Err(CoreError::InvalidRecord {
                            detail: alloc::format!(
                                "snapshot ({}, {}): non-finite {}",
                                s.company_id, s.fiscal_year, LINE_ITEM_NAMES[idx]
                            ),
                        });
                    }
                }
            }
            let key = (s.company_id.clone(), s.fiscal_year);
            if snapshot_map.insert(key, s.clone()).is_some() {
                return Err(CoreError::DuplicateSnapshot {
                    company_id: s.company_id,
                    fiscal_year: s.fiscal_year,
                });
            }
        }
        let mut events = events;
        for e in &events {
            if !company_map.contains_key(&e.company_id) {
                return Err(CoreError::UnknownCompany { company_id: e.company_id.clone() });
            }
            if !is_catalog_event(&e.event_type) {
                return Err(CoreError::UnknownEventType { token: e.event_type.clone() });
            }
        }
        events.sort();
        Ok(Registry { companies: company_map, snapshots: snapshot_map, events })
    }

    pub fn companies(&self) -> impl Iterator<Item = &CompanyRecord> {
        self.companies.values()
    }

    pub fn company(&self, id: &str) -> Option<&CompanyRecord> {
        self.companies.get(id)
    }

    pub fn n_companies(&self) -> usize {
        self.companies.len()
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &BalanceSheetSnapshot> {
        self.snapshots.values()
    }

    pub fn n_snapshots(&self) -> usize {
        self.snapshots.len()
    }

    pub fn snapshot(&self, company_id: &str, fiscal_year: i32) -> Option<&BalanceSheetSnapshot> {
        self.snapshots.get(&(company_id.to_string(), fiscal_year))
    }

    /// Events in canonical (company_id, date, type) order.
    pub fn events(&self) -> &[FilingEvent] {
        &self.events
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn company_events<'a>(
        &'a self,
        company_id: &'a str,
    ) -> impl Iterator<Item = &'a FilingEvent> + 'a {
        // Events are sorted by company_id first.
        let start = self.events.partition_point(|e| e.company_id.as_str() < company_id);
        self.events[start..]
            .iter()
            .take_while(move |e| e.company_id == company_id)
    }

    /// Snapshot fiscal years observed, or None for an empty registry.
    pub fn year_range(&self) -> Option<(i32, i32)> {
        let mut min = i32::MAX;
        let mut max = i32::MIN;
        for s in self.snapshots.values() {
            min = min.min(s.fiscal_year);
            max = max.max(s.fiscal_year);
        }
        if min <= max {
            Some((min, max))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnomalyRule {
    /// Snapshot fiscal_year before the company's incorporation year.
    ReportBeforeIncorporation,
    /// Snapshot or event dated after the company's bankrupt_date.
    RecordAfterBankruptcy,
    /// Company has no balance-sheet snapshots at all.
    NoSnapshots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub company_id: String,
    pub rule: AnomalyRule,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub anomalies: Vec<Anomaly>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.anomalies.is_empty()
    }

    /// Companies flagged by the rules that make a company droppable
    /// (pre-incorporation reports and post-bankruptcy records).
    pub fn droppable_companies(&self) -> BTreeSet<String> {
        self.anomalies
            .iter()
            .filter(|a| {
                matches!(
                    a.rule,
                    AnomalyRule::ReportBeforeIncorporation | AnomalyRule::RecordAfterBankruptcy
                )
            })
            .map(|a| a.company_id.clone())
            .collect()
    }
}

/// Flags abnormal companies without failing: reports are deterministic and
/// sorted by (company_id, rule).
pub fn validate_registry(registry: &Registry) -> ValidationReport {
    let mut anomalies = Vec::new();
    let mut has_snapshot: BTreeSet<&str> = BTreeSet::new();
    for s in registry.snapshots() {
        has_snapshot.insert(&s.company_id);
        let company = registry.company(&s.company_id).expect("registry integrity");
        if s.fiscal_year < company.incorporated_year {
            anomalies.push(Anomaly {
                company_id: s.company_id.clone(),
                rule: AnomalyRule::ReportBeforeIncorporation,
                detail: alloc::format!(
                    "snapshot for fiscal year {} but incorporated {}",
                    s.fiscal_year, company.incorporated_year
                ),
            });
        }
        if let Some(bd) = company.bankrupt_date {
            if s.fiscal_year > bd.year {
                anomalies.push(Anomaly {
                    company_id: s.company_id.clone(),
                    rule: AnomalyRule::RecordAfterBankruptcy,
                    detail: alloc::format!(
                        "snapshot for fiscal year {} after bankruptcy on {}",
                        s.fiscal_year, bd
                    ),
                });
            }
        }
    }
    for e in registry.events() {
        let company = registry.company(&e.company_id).expect("registry integrity");
        if let Some(bd) = company.bankrupt_date {
            if e.event_date > bd {
                anomalies.push(Anomaly {
                    company_id: e.company_id.clone(),
                    rule: AnomalyRule::RecordAfterBankruptcy,
                    detail: alloc::format!(
                        "event {} on {} after bankruptcy on {}",
                        e.event_type, e.event_date, bd
                    ),
                });
            }
        }
    }
    for c in registry.companies() {
        if !has_snapshot.contains(c.company_id.as_str()) {
            anomalies.push(Anomaly {
                company_id: c.company_id.clone(),
                rule: AnomalyRule::NoSnapshots,
                detail: String::from("company has no balance-sheet snapshots"),
            });
        }
    }
    anomalies.sort_by(|a, b| {
        (&a.company_id, a.rule, &a.detail).cmp(&(&b.company_id, b.rule, &b.detail))
    });
    ValidationReport { anomalies }
}

/// Returns a new registry with companies in `excluded_sectors` removed and,
/// if `drop_anomalous`, companies flagged by the droppable validation rules
/// removed together with all their records.
pub fn filter_registry(
    registry: &Registry,
    excluded_sectors: &BTreeSet<String>,
    drop_anomalous: bool,
) -> Registry {
    let dropped: BTreeSet<String> = if drop_anomalous {
        validate_registry(registry).droppable_companies()
    } else {
        BTreeSet::new()
    };
    let keep = |id: &str, sector: Option<&str>| -> bool {
        if dropped.contains(id) {
            return false;
        }
        match sector {
            Some(s) => !excluded_sectors.contains(s),
            None => true,
        }
    };
    let companies: Vec<CompanyRecord> = registry
        .companies()
        .filter(|c| keep(&c.company_id, Some(&c.sector)))
        .cloned()
        .collect();
    let kept_ids: BTreeSet<&str> = companies.iter().map(|c| c.company_id.as_str()).collect();
    let snapshots = registry
        .snapshots()
        .filter(|s| kept_ids.contains(s.company_id.as_str()))
        .cloned()
        .collect();
    let events = registry
        .events()
        .iter()
        .filter(|e| kept_ids.contains(e.company_id.as_str()))
        .cloned()
        .collect();
    Registry::build(companies, snapshots, events).expect("filtering preserves integrity")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn company(id: &str, sector: &str, inc: i32, bankrupt: Option<&str>) -> CompanyRecord {
        CompanyRecord {
            company_id: id.into(),
            sector: sector.into(),
            incorporated_year: inc,
            bankrupt_date: bankrupt.map(|d| Date::parse(d).unwrap()),
        }
    }

    fn snapshot(id: &str, year: i32) -> BalanceSheetSnapshot {
        BalanceSheetSnapshot {
            company_id: id.into(),
            fiscal_year: year,
            total_assets: Some(100.0),
            ..Default::default()
        }
    }

    fn event(id: &str, date: &str, ty: &str) -> FilingEvent {
        FilingEvent {
            company_id: id.into(),
            event_date: Date::parse(date).unwrap(),
            event_type: ty.into(),
        }
    }

    #[test]
    fn catalog_is_sorted_with_28_entries() {
        assert_eq!(EVENT_CATALOG.len(), 28);
        let mut sorted = EVENT_CATALOG;
        sorted.sort_unstable();
        assert_eq!(sorted, EVENT_CATALOG);
        assert!(is_catalog_event("registered_office_change"));
        assert!(is_catalog_event("merger_demerger"));
        assert!(!is_catalog_event("coffee_machine_change"));
    }

    #[test]
    fn build_rejects_duplicate_snapshot() {
        let err = Registry::build(
            vec![company("a", "retail", 2010, None)],
            vec![snapshot("a", 2012), snapshot("a", 2012)],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::DuplicateSnapshot { .. }));
    }

    #[test]
    fn build_rejects_unknown_company_and_event_type() {
        let companies = vec![company("a", "retail", 2010, None)];
        let err =
            Registry::build(companies.clone(), vec![snapshot("zzz", 2012)], vec![]).unwrap_err();
        assert!(matches!(err, CoreError::UnknownCompany { .. }));

        let err = Registry::build(
            companies,
            vec![],
            vec![event("a", "2012-05-01", "not_a_real_event")],
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::UnknownEventType { .. }));
    }

    #[test]
    fn build_rejects_bankruptcy_before_incorporation() {
        let err = Registry::build(
            vec![company("a", "retail", 2010, Some("2009-06-01"))],
            vec![],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::InvalidRecord { .. }));
    }

    #[test]
    fn row_order_does_not_matter() {
        let companies = vec![company("a", "retail", 2010, None), company("b", "crafts", 2011, None)];
        let snaps = vec![snapshot("a", 2012), snapshot("b", 2012), snapshot("a", 2013)];
        let events = vec![
            event("b", "2012-02-01", "manager_change"),
            event("a", "2013-07-01", "address_change"),
        ];
        let fwd = Registry::build(companies.clone(), snaps.clone(), events.clone()).unwrap();
        let mut rc = companies;
        rc.reverse();
        let mut rs = snaps;
        rs.reverse();
        let mut re = events;
        re.reverse();
        let rev = Registry::build(rc, rs, re).unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn validate_flags_the_three_rules() {
        let registry = Registry::build(
            vec![
                company("early", "retail", 2015, None),
                company("late", "retail", 2010, Some("2014-06-30")),
                company("empty", "retail", 2010, None),
            ],
            vec![snapshot("early", 2010), snapshot("late", 2012)],
            vec![event("late", "2014-09-01", "manager_change")],
        )
        .unwrap();
        let report = validate_registry(&registry);
        let rules: Vec<(&str, AnomalyRule)> = report
            .anomalies
            .iter()
            .map(|a| (a.company_id.as_str(), a.rule))
            .collect();
        assert_eq!(
            rules,
            vec![
                ("early", AnomalyRule::ReportBeforeIncorporation),
                ("empty", AnomalyRule::NoSnapshots),
                ("late", AnomalyRule::RecordAfterBankruptcy),
            ]
        );
    }

    #[test]
    fn validate_clean_registry_is_empty() {
        let registry = Registry::build(
            vec![company("a", "retail", 2010, None)],
            vec![snapshot("a", 2012)],
            vec![event("a", "2012-03-01", "address_change")],
        )
        .unwrap();
        assert!(validate_registry(&registry).is_clean());
    }

    #[test]
    fn filter_by_sector() {
        let mut companies: Vec<CompanyRecord> =
            (0..9).map(|i| company(&alloc::format!("f{i}"), "finance", 2010, None)).collect();
        companies.push(company("shop", "retail", 2010, None));
        let snaps = companies.iter().map(|c| snapshot(&c.company_id, 2012)).collect();
        let registry = Registry::build(companies, snaps, vec![]).unwrap();
        let excluded: BTreeSet<String> = [String::from("finance")].into();
        let filtered = filter_registry(&registry, &excluded, false);
        assert_eq!(filtered.n_companies(), 1);
        assert_eq!(filtered.companies().next().unwrap().company_id, "shop");
    }

    #[test]
    fn filter_identity_and_idempotence() {
        let registry = Registry::build(
            vec![company("a", "retail", 2015, None), company("b", "retail", 2010, None)],
            vec![snapshot("a", 2010), snapshot("b", 2012)],
            vec![],
        )
        .unwrap();
        let none = BTreeSet::new();
        assert_eq!(filter_registry(&registry, &none, false), registry);

        let once = filter_registry(&registry, &none, true);
        assert_eq!(once.n_companies(), 1); // "a" dropped by rule (a)
        let twice = filter_registry(&once, &none, true);
        assert_eq!(once, twice);
    }
}
