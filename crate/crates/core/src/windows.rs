//! Sliding-window sample construction, the four-way split and training-set
//! under-sampling.
//!
//! A sample pairs W years of statements (fiscal years t0-W+1 ..= t0) and 12*W
//! months of filing events with a label that is 1 iff the company declared
//! bankruptcy during calendar year t0+1. Feature functions only ever see
//! records dated on or before Dec 31 of t0.

use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::features::{afe_candidates, behavior_features, financial_ratios, FeatureConfig};
use crate::matrix::{ColumnDef, FeatureMatrix, FeatureVector, SampleKey};
use crate::registry::{BalanceSheetSnapshot, Registry};
use crate::seeding;

pub const TRAIN_YEAR_FIRST: i32 = 2012;
pub const TRAIN_YEAR_LAST: i32 = 2018;
pub const PRE_COVID_YEAR: i32 = 2019;
pub const POST_COVID_YEAR_FIRST: i32 = 2020;
pub const POST_COVID_YEAR_LAST: i32 = 2021;
pub const DEFAULT_SPLIT_FRACTION: f64 = 0.70;
pub const DEFAULT_UNDERSAMPLE_RATE: f64 = 0.25;

/// Labeled samples for one (window length, reference year) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub window_length: u8,
    pub reference_year: i32,
    pub matrix: FeatureMatrix,
}

impl SampleSet {
    pub fn n_samples(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn n_positive(&self) -> usize {
        self.matrix.labels().iter().filter(|&&y| y == 1).count()
    }

    pub fn n_negative(&self) -> usize {
        self.n_samples() - self.n_positive()
    }
}

/// The train / test / pre-Covid / post-Covid partition for one window length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitBundle {
    pub window_length: u8,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub pre_covid: FeatureMatrix,
    pub post_covid: FeatureMatrix,
    pub split_seed: u64,
    pub split_fraction: f64,
}

/// Latest calendar year any record in the registry refers to; labels are
/// defined only up to it.
pub fn data_horizon(registry: &Registry) -> Option<i32> {
    let mut horizon: Option<i32> = None;
    let mut push = |y: i32| horizon = Some(horizon.map_or(y, |h: i32| h.max(y)));
    for s in registry.snapshots() {
        push(s.fiscal_year);
    }
    for e in registry.events() {
        push(e.event_date.year);
    }
    for c in registry.companies() {
        if let Some(bd) = c.bankrupt_date {
            push(bd.year);
        }
    }
    horizon
}

fn suffixed(vector: FeatureVector, lag: usize) -> FeatureVector {
    if lag == 0 {
        return vector;
    }
    let mut out = FeatureVector::new();
    for (name, family, value) in vector.entries() {
        out.push(alloc::format!("{name}_lag{lag}"), *family, *value);
    }
    out
}

fn company_feature_vector(
    registry: &Registry,
    cfg: &FeatureConfig,
    company_id: &str,
    w: u8,
    t0: i32,
) -> FeatureVector {
    let mut vector = FeatureVector::new();
    for lag in 0..w as usize {
        let year = t0 - lag as i32;
        let snapshot = registry.snapshot(company_id, year).expect("inclusion rule");
        if cfg.enable_fr {
            let prior = registry.snapshot(company_id, year - 1);
            vector.extend(suffixed(financial_ratios(snapshot, prior), lag));
        }
        if cfg.enable_afe {
            let history: Vec<&BalanceSheetSnapshot> = registry
                .snapshots()
                .filter(|s| s.company_id == company_id && s.fiscal_year <= year)
                .collect();
            vector.extend(suffixed(afe_candidates(&history, &cfg.afe_grammar), lag));
        }
    }
    if cfg.enable_rb {
        let events: Vec<_> = registry.company_events(company_id).collect();
        vector.extend(behavior_features(&events, t0 - w as i32 + 1, t0));
    }
    vector
}

/// Builds the sample set for one (W, t0): companies with a balance sheet for
/// every window year and not bankrupt on or before Dec 31 of t0, labeled by
/// bankruptcy during t0+1.
pub fn build_samples(
    registry: &Registry,
    cfg: &FeatureConfig,
    w: u8,
    t0: i32,
) -> Result<SampleSet, CoreError> {
    if !(1..=3).contains(&w) {
        return Err(CoreError::InvalidConfig {
            detail: alloc::format!("window length {w} not in {{1,2,3}}"),
        });
    }
    if !cfg.any_enabled() {
        return Err(CoreError::InvalidConfig {
            detail: String::from("no feature family enabled"),
        });
    }
    let horizon = data_horizon(registry).unwrap_or(i32::MIN);
    if t0 + 1 > horizon {
        return Err(CoreError::LabelOutOfHorizon { t0 });
    }

    let mut matrix: Option<FeatureMatrix> = None;
    for company in registry.companies() {
        if let Some(bd) = company.bankrupt_date {
            if bd.year <= t0 {
                continue; // already bankrupt at reference time
            }
        }
        let window_years = (t0 - w as i32 + 1)..=t0;
        if !window_years.clone().all(|y| registry.snapshot(&company.company_id, y).is_some()) {
            continue;
        }
        let label = match company.bankrupt_date {
            Some(bd) if bd.year == t0 + 1 => 1,
            _ => 0,
        };
        let vector = company_feature_vector(registry, cfg, &company.company_id, w, t0);
        let matrix = match &mut matrix {
            Some(m) => m,
            None => {
                let columns: Vec<ColumnDef> = vector
                    .entries()
                    .iter()
                    .map(|(name, family, _)| ColumnDef { name: name.clone(), family: *family })
                    .collect();
                matrix.insert(FeatureMatrix::new(columns)?)
            }
        };
        matrix.push_row(
            SampleKey {
                company_id: company.company_id.clone(),
                reference_year: t0,
                window_length: w,
            },
            label,
            &vector,
        )?;
    }
    let matrix = match matrix {
        Some(m) => m,
        // empty sample set still needs a stable (empty) column layout
        None => FeatureMatrix::new(Vec::new())?,
    };
    Ok(SampleSet { window_length: w, reference_year: t0, matrix })
}

/// Stratified 70/30 split of the 2012-2018 sample sets by (t0, label),
/// with 2019 as the pre-Covid set and 2020-2021 as the post-Covid set.
pub fn assemble_splits(
    samplesets: &[SampleSet],
    split_fraction: f64,
    split_seed: u64,
) -> Result<SplitBundle, CoreError> {
    assemble_splits_impl(samplesets, split_fraction, split_seed, false)
}

/// Like [`assemble_splits`], but the shuffle unit is the company: every
/// sample of a company lands on the same side of the train/test divide.
/// Off by default; for analysts who want to rule out cross-year leakage of
/// company identity.
pub fn assemble_splits_by_company(
    samplesets: &[SampleSet],
    split_fraction: f64,
    split_seed: u64,
) -> Result<SplitBundle, CoreError> {
    assemble_splits_impl(samplesets, split_fraction, split_seed, true)
}

fn assemble_splits_impl(
    samplesets: &[SampleSet],
    split_fraction: f64,
    split_seed: u64,
    group_by_company: bool,
) -> Result<SplitBundle, CoreError> {
    if !(0.0..1.0).contains(&split_fraction) || split_fraction == 0.0 {
        return Err(CoreError::InvalidConfig {
            detail: alloc::format!("split fraction {split_fraction} not in (0,1)"),
        });
    }
    let w = samplesets
        .first()
        .map(|s| s.window_length)
        .ok_or(CoreError::MissingYears { years: (TRAIN_YEAR_FIRST..=POST_COVID_YEAR_LAST).collect() })?;
    let mut by_year: alloc::collections::BTreeMap<i32, &SampleSet> = Default::default();
    for s in samplesets {
        if s.window_length != w {
            return Err(CoreError::InvalidConfig {
                detail: String::from("mixed window lengths in one split"),
            });
        }
        by_year.insert(s.reference_year, s);
    }
    let missing: Vec<i32> = (TRAIN_YEAR_FIRST..=POST_COVID_YEAR_LAST)
        .filter(|y| !by_year.contains_key(y))
        .collect();
    if !missing.is_empty() {
        return Err(CoreError::MissingYears { years: missing });
    }

    // company-grouped mode: one coin flip per company, shared by all years
    let train_companies: Option<alloc::collections::BTreeSet<String>> = if group_by_company {
        let mut companies: Vec<String> = Vec::new();
        for t0 in TRAIN_YEAR_FIRST..=TRAIN_YEAR_LAST {
            for key in by_year[&t0].matrix.keys() {
                companies.push(key.company_id.clone());
            }
        }
        companies.sort_unstable();
        companies.dedup();
        companies.shuffle(&mut seeding::rng(split_seed, &[0x9209]));
        let n_train = (libm::round(split_fraction * companies.len() as f64) as usize)
            .min(companies.len());
        Some(companies.into_iter().take(n_train).collect())
    } else {
        None
    };

    let mut train_parts: Vec<FeatureMatrix> = Vec::new();
    let mut test_parts: Vec<FeatureMatrix> = Vec::new();
    for t0 in TRAIN_YEAR_FIRST..=TRAIN_YEAR_LAST {
        let set = by_year[&t0];
        if let Some(train_companies) = &train_companies {
            let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = (0..set.matrix.n_rows())
                .partition(|&r| train_companies.contains(&set.matrix.keys()[r].company_id));
            train_parts.push(set.matrix.select_rows(&train_idx));
            test_parts.push(set.matrix.select_rows(&test_idx));
            continue;
        }
        for label in [0u8, 1u8] {
            let mut idx: Vec<usize> = (0..set.matrix.n_rows())
                .filter(|&r| set.matrix.labels()[r] == label)
                .collect();
            if idx.is_empty() {
                continue;
            }
            let mut rng = seeding::rng(split_seed, &[t0 as u64, label as u64]);
            idx.shuffle(&mut rng);
            let n_train = libm::round(split_fraction * idx.len() as f64) as usize;
            let n_train = n_train.min(idx.len());
            let (train_idx, test_idx) = idx.split_at(n_train);
            let mut train_idx = train_idx.to_vec();
            let mut test_idx = test_idx.to_vec();
            train_idx.sort_unstable();
            test_idx.sort_unstable();
            train_parts.push(set.matrix.select_rows(&train_idx));
            test_parts.push(set.matrix.select_rows(&test_idx));
        }
    }
    let train = FeatureMatrix::concat(&train_parts.iter().collect::<Vec<_>>())?;
    let test = FeatureMatrix::concat(&test_parts.iter().collect::<Vec<_>>())?;
    let pre_covid = by_year[&PRE_COVID_YEAR].matrix.clone();
    let post_parts: Vec<&FeatureMatrix> = (POST_COVID_YEAR_FIRST..=POST_COVID_YEAR_LAST)
        .map(|y| &by_year[&y].matrix)
        .collect();
    let post_covid = FeatureMatrix::concat(&post_parts)?;
    Ok(SplitBundle { window_length: w, train, test, pre_covid, post_covid, split_seed, split_fraction })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndersampleOutcome {
    /// False when the set already met or exceeded the target rate and was
    /// returned unchanged.
    pub changed: bool,
    pub kept_negatives: usize,
    pub positives: usize,
}

/// Keeps every positive and uniformly drops negatives until the positive
/// rate is within one sample of `target_rate`.
pub fn undersample(
    matrix: &FeatureMatrix,
    target_rate: f64,
    seed: u64,
) -> Result<(FeatureMatrix, UndersampleOutcome), CoreError> {
    if !(0.0..1.0).contains(&target_rate) || target_rate == 0.0 {
        return Err(CoreError::InvalidConfig {
            detail: alloc::format!("target rate {target_rate} not in (0,1)"),
        });
    }
    let labels = matrix.labels();
    let positives: Vec<usize> = (0..matrix.n_rows()).filter(|&r| labels[r] == 1).collect();
    let negatives: Vec<usize> = (0..matrix.n_rows()).filter(|&r| labels[r] == 0).collect();
    if positives.is_empty() {
        return Err(CoreError::SingleClass);
    }
    let p = positives.len() as f64;
    let current_rate = p / matrix.n_rows() as f64;
    if target_rate <= current_rate {
        return Ok((
            matrix.clone(),
            UndersampleOutcome {
                changed: false,
                kept_negatives: negatives.len(),
                positives: positives.len(),
            },
        ));
    }
    let keep = libm::round(p * (1.0 - target_rate) / target_rate) as usize;
    let mut shuffled = negatives;
    shuffled.shuffle(&mut seeding::rng(seed, &[0x5eed]));
    shuffled.truncate(keep);
    let mut kept: Vec<usize> = positives.iter().chain(shuffled.iter()).copied().collect();
    kept.sort_unstable();
    Ok((
        matrix.select_rows(&kept),
        UndersampleOutcome { changed: true, kept_negatives: keep, positives: positives.len() },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::Date;
    use crate::registry::{CompanyRecord, FilingEvent};
    use alloc::vec;

    fn snapshot(id: &str, year: i32, assets: f64) -> BalanceSheetSnapshot {
        BalanceSheetSnapshot {
            company_id: id.into(),
            fiscal_year: year,
            total_assets: Some(assets),
            current_assets: Some(assets * 0.4),
            current_liabilities: Some(assets * 0.2),
            total_liabilities: Some(assets * 0.6),
            equity: Some(assets * 0.4),
            ..Default::default()
        }
    }

    fn small_registry() -> Registry {
        // horizon 2016; solvent "a" with 2013-2016 statements, "b" bankrupt
        // mid-2016, "c" missing the 2014 statement
        let companies = vec![
            CompanyRecord {
                company_id: "a".into(),
                sector: "retail".into(),
                incorporated_year: 2010,
                bankrupt_date: None,
            },
            CompanyRecord {
                company_id: "b".into(),
                sector: "retail".into(),
                incorporated_year: 2010,
                bankrupt_date: Some(Date::parse("2016-06-15").unwrap()),
            },
            CompanyRecord {
                company_id: "c".into(),
                sector: "retail".into(),
                incorporated_year: 2010,
                bankrupt_date: None,
            },
        ];
        let mut snaps = Vec::new();
        for y in 2013..=2016 {
            snaps.push(snapshot("a", y, 1000.0 + y as f64));
        }
        for y in 2013..=2015 {
            snaps.push(snapshot("b", y, 500.0));
        }
        snaps.push(snapshot("c", 2013, 800.0));
        snaps.push(snapshot("c", 2015, 820.0));
        snaps.push(snapshot("c", 2016, 830.0));
        let events = vec![FilingEvent {
            company_id: "b".into(),
            event_date: Date::parse("2015-04-01").unwrap(),
            event_type: "manager_change".into(),
        }];
        Registry::build(companies, snaps, events).unwrap()
    }

    fn fr_only() -> FeatureConfig {
        FeatureConfig { enable_afe: false, ..FeatureConfig::default() }
    }

    #[test]
    fn label_one_for_bankruptcy_in_t0_plus_1() {
        let set = build_samples(&small_registry(), &fr_only(), 1, 2015).unwrap();
        assert_eq!(set.n_samples(), 3);
        let idx = set.matrix.keys().iter().position(|k| k.company_id == "b").unwrap();
        assert_eq!(set.matrix.labels()[idx], 1);
        let idx = set.matrix.keys().iter().position(|k| k.company_id == "a").unwrap();
        assert_eq!(set.matrix.labels()[idx], 0);
    }

    #[test]
    fn missing_window_statement_excludes_company() {
        // 2-year window at t0=2015 needs 2014 and 2015 statements; "c" lacks 2014
        let set = build_samples(&small_registry(), &fr_only(), 2, 2015).unwrap();
        let ids: Vec<&str> = set.matrix.keys().iter().map(|k| k.company_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn bankrupt_before_t0_excluded() {
        // b went bankrupt mid-2016, so it cannot be sampled at t0=2016
        let err = build_samples(&small_registry(), &fr_only(), 1, 2016).unwrap_err();
        // horizon is 2016, labels for 2017 undefined
        assert_eq!(err, CoreError::LabelOutOfHorizon { t0: 2016 });
    }

    #[test]
    fn window_out_of_range_rejected() {
        assert!(build_samples(&small_registry(), &fr_only(), 4, 2015).is_err());
        assert!(build_samples(&small_registry(), &fr_only(), 0, 2015).is_err());
    }

    #[test]
    fn multi_year_columns_carry_lag_suffixes() {
        let set = build_samples(&small_registry(), &fr_only(), 2, 2015).unwrap();
        let names = set.matrix.column_names();
        assert!(names.contains(&"current_ratio"));
        assert!(names.contains(&"current_ratio_lag1"));
        assert!(names.contains(&"rb_total_events"));
    }

    #[test]
    fn undersample_table4_fixture() {
        // 2625 positives, 110805 negatives, target 0.25 -> 7875 kept
        let p = 2625.0;
        let keep = libm::round(p * (1.0 - 0.25) / 0.25) as usize;
        assert_eq!(keep, 7875);
        assert!((p / (p + keep as f64) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn undersample_behavior_on_small_matrix() {
        let set = build_samples(&small_registry(), &fr_only(), 1, 2015).unwrap();
        // 1 positive, 2 negatives -> rate 1/3; target 0.5 keeps 1 negative
        let (out, outcome) = undersample(&set.matrix, 0.5, 7).unwrap();
        assert!(outcome.changed);
        assert_eq!(outcome.kept_negatives, 1);
        assert_eq!(out.n_rows(), 2);
        assert_eq!(out.labels().iter().filter(|&&y| y == 1).count(), 1);

        // already above target -> unchanged
        let (same, outcome) = undersample(&set.matrix, 0.25, 7).unwrap();
        assert!(!outcome.changed);
        assert_eq!(same, set.matrix);

        // determinism
        let (a, _) = undersample(&set.matrix, 0.5, 99).unwrap();
        let (b, _) = undersample(&set.matrix, 0.5, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn company_grouped_split_keeps_companies_on_one_side() {
        let cfg = crate::synth::SynthConfig { n_companies: 150, ..Default::default() };
        let (registry, _) = crate::synth::generate_registry(&cfg, 31).unwrap();
        let sets: Vec<SampleSet> = (2012..=2021)
            .map(|t0| build_samples(&registry, &fr_only(), 1, t0).unwrap())
            .collect();
        let bundle = assemble_splits_by_company(&sets, 0.7, 5).unwrap();
        let train_ids: alloc::collections::BTreeSet<&str> =
            bundle.train.keys().iter().map(|k| k.company_id.as_str()).collect();
        for key in bundle.test.keys() {
            assert!(!train_ids.contains(key.company_id.as_str()));
        }
        let total = bundle.train.n_rows() + bundle.test.n_rows();
        let sample_level = assemble_splits(&sets, 0.7, 5).unwrap();
        assert_eq!(total, sample_level.train.n_rows() + sample_level.test.n_rows());
    }

    #[test]
    fn undersample_requires_positives() {
        let set = build_samples(&small_registry(), &fr_only(), 1, 2013).unwrap();
        assert_eq!(set.n_positive(), 0);
        assert_eq!(undersample(&set.matrix, 0.25, 7).unwrap_err(), CoreError::SingleClass);
    }
}
