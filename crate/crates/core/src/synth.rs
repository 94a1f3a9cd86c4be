//! Synthetic corporate-registry generator with planted ground truth.
//!
//! Each company carries two independent AR(1) latent processes: a financial
//! distress level that drives balance-sheet line items, and a behavioral
//! distress level that drives restructuring-filing intensities. The annual
//! bankruptcy hazard is a logistic function of a weighted sum of both, with
//! the intercept calibrated so the population hazard matches the configured
//! base rate. Because the behavioral latent never touches the balance sheet,
//! behavior features carry signal that financial ratios cannot recover.
//!
//! The optional Covid-like regime multiplies hazards down from its start
//! year and independently delays each filing past year-end with a configured
//! probability, landing it in the next calendar year — the mechanism that
//! breaks window-aligned behavior features.

use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::date::Date;
use crate::error::CoreError;
use crate::math;
use crate::registry::{BalanceSheetSnapshot, CompanyRecord, FilingEvent, Registry};
use crate::seeding;

/// Filing categories whose intensity rises with behavioral distress. The
/// remaining catalog types fire at a constant background rate.
pub const DISTRESS_EVENT_TYPES: [&str; 6] = [
    "accounts_auditor_change",
    "legal_form_change",
    "manager_change",
    "merger_demerger",
    "registered_office_change",
    "social_capital_change",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovidRegime {
    pub start_year: i32,
    /// Hazards in regime years are multiplied by this factor (>= 0).
    pub hazard_multiplier: f64,
    /// Probability that a filing is delayed past Dec 31 into the next year.
    pub filing_delay_probability: f64,
}

impl CovidRegime {
    /// Regime used by the drift experiments: start 2020, hazards scaled to
    /// 0.3, half of all filings delayed past year-end.
    pub fn standard() -> Self {
        CovidRegime { start_year: 2020, hazard_multiplier: 0.3, filing_delay_probability: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorWeight {
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_companies: usize,
    pub year_first: i32,
    pub year_last: i32,
    pub sectors: Vec<SectorWeight>,
    /// Target population-mean annual bankruptcy hazard, in (0, 1).
    pub base_hazard: f64,
    /// AR(1) persistence of both latent processes, in [0, 1).
    pub persistence: f64,
    /// Stationary standard deviation of both latent processes.
    pub noise_scale: f64,
    /// Slope of the logistic hazard in the combined latent.
    pub hazard_slope: f64,
    /// Weight of the financial latent inside the hazard.
    pub financial_weight: f64,
    /// Weight of the behavioral latent inside the hazard.
    pub behavior_weight: f64,
    /// Baseline Poisson intensity per distress-linked filing type per year.
    pub event_base_rate: f64,
    /// Intensity increase per unit of positive behavioral distress.
    pub event_distress_slope: f64,
    /// Per-line-item missingness probability in emitted snapshots.
    pub missing_rate: f64,
    pub covid: Option<CovidRegime>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_companies: 10_000,
            year_first: 2010,
            year_last: 2022,
            sectors: alloc::vec![
                SectorWeight { name: "services".into(), weight: 0.30 },
                SectorWeight { name: "retail".into(), weight: 0.20 },
                SectorWeight { name: "construction".into(), weight: 0.15 },
                SectorWeight { name: "manufacturing".into(), weight: 0.15 },
                SectorWeight { name: "hospitality".into(), weight: 0.10 },
                SectorWeight { name: "finance".into(), weight: 0.10 },
            ],
            base_hazard: 0.022,
            persistence: 0.8,
            noise_scale: 1.0,
            hazard_slope: 1.5,
            financial_weight: 0.6,
            behavior_weight: 0.9,
            event_base_rate: 0.04,
            event_distress_slope: 0.6,
            missing_rate: 0.05,
            covid: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        let err = |detail: &str| {
            Err(CoreError::InfeasibleSynthConfig { detail: String::from(detail) })
        };
        if self.n_companies == 0 {
            return err("n_companies must be >= 1");
        }
        if self.year_first > self.year_last {
            return err("year range is empty");
        }
        if !(self.base_hazard > 0.0 && self.base_hazard < 1.0) {
            return err("base_hazard must be in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.persistence) {
            return err("persistence must be in [0, 1)");
        }
        if !(self.noise_scale > 0.0) {
            return err("noise_scale must be > 0");
        }
        if !(self.hazard_slope >= 0.0) {
            return err("hazard_slope must be >= 0");
        }
        if self.sectors.is_empty() || self.sectors.iter().any(|s| !(s.weight > 0.0)) {
            return err("sectors need positive weights");
        }
        if !(self.event_base_rate >= 0.0) || !(self.event_distress_slope >= 0.0) {
            return err("event rates must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.missing_rate) {
            return err("missing_rate must be in [0, 1]");
        }
        if let Some(c) = &self.covid {
            if !(c.hazard_multiplier >= 0.0) {
                return err("covid hazard_multiplier must be >= 0");
            }
            if !(0.0..=1.0).contains(&c.filing_delay_probability) {
                return err("covid filing_delay_probability must be in [0, 1]");
            }
        }
        Ok(())
    }

    /// Standard deviation of the combined latent inside the hazard logit.
    fn latent_std(&self) -> f64 {
        self.noise_scale
            * math::sqrt(
                self.financial_weight * self.financial_weight
                    + self.behavior_weight * self.behavior_weight,
            )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearTruth {
    pub year: i32,
    /// Financial distress latent (higher = worse balance sheet).
    pub financial: f64,
    /// Behavioral distress latent (higher = more filings).
    pub behavioral: f64,
    /// Annual bankruptcy probability after any regime multiplier.
    pub hazard: f64,
    /// Poisson intensity per distress-linked filing type this year.
    pub event_intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyTruth {
    pub company_id: String,
    pub years: Vec<YearTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Calibrated hazard-logit intercept.
    pub intercept: f64,
    /// Per-company trajectories, sorted by company_id.
    pub companies: Vec<CompanyTruth>,
}

/// Finds the intercept `a` with E[sigmoid(a + z)] = target for z ~ N(0, std),
/// by bisection over a Gauss-style quadrature of the normal expectation.
fn calibrate_intercept(target: f64, std: f64) -> f64 {
    let expectation = |a: f64| -> f64 {
        if std == 0.0 {
            return math::sigmoid(a);
        }
        // midpoint quadrature over +-5 std
        let steps = 200;
        let width = 10.0 * std / steps as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..steps {
            let z = -5.0 * std + (i as f64 + 0.5) * width;
            let w = math::exp(-0.5 * (z / std) * (z / std));
            num += w * math::sigmoid(a + z);
            den += w;
        }
        num / den
    };
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if expectation(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Balance-sheet line items as monotone noisy functions of the financial
/// distress latent: equity, cash and liquid assets fall with distress,
/// liabilities rise, and total_assets ~ total_liabilities + equity holds up
/// to small noise.
fn snapshot_items<R: Rng>(
    company_id: &str,
    year: i32,
    size: f64,
    financial: f64,
    missing_rate: f64,
    rng: &mut R,
) -> BalanceSheetSnapshot {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut n = || normal.sample(rng);
    // distress in (0,1); 0.5 at neutral health
    let d = math::sigmoid(financial);
    let total_assets = size * (1.0 + 0.10 * n());
    let equity = total_assets * (0.45 - 0.55 * d + 0.12 * n());
    let total_liabilities = total_assets - equity + total_assets * 0.02 * n();
    let cl_share = clamp(0.45 + 0.25 * d + 0.08 * n(), 0.05, 0.95);
    let current_liabilities = total_liabilities.abs() * cl_share;
    let long_term_debt = (total_liabilities - current_liabilities).max(0.0);
    let ca_share = clamp(0.55 - 0.20 * d + 0.08 * n(), 0.05, 0.90);
    let current_assets = total_assets * ca_share;
    let cash = current_assets * clamp(0.30 * (1.0 - d) + 0.04 * n(), 0.0, 1.0);
    let marketable_securities = current_assets * clamp(0.06 * (1.0 - d) + 0.02 * n(), 0.0, 1.0);
    let quick_assets =
        (cash + marketable_securities + current_assets * clamp(0.20 + 0.05 * n(), 0.0, 0.5))
            .min(current_assets);
    let fixed_assets = (total_assets - current_assets).max(0.0);

    let mut keep = |v: f64| -> Option<f64> {
        if rng.gen::<f64>() < missing_rate {
            None
        } else {
            Some(v)
        }
    };
    BalanceSheetSnapshot {
        company_id: company_id.into(),
        fiscal_year: year,
        total_assets: keep(total_assets),
        current_assets: keep(current_assets),
        quick_assets: keep(quick_assets),
        cash: keep(cash),
        marketable_securities: keep(marketable_securities),
        fixed_assets: keep(fixed_assets),
        total_liabilities: keep(total_liabilities),
        current_liabilities: keep(current_liabilities),
        long_term_debt: keep(long_term_debt),
        equity: keep(equity),
    }
}

pub fn generate_registry(cfg: &SynthConfig, seed: u64) -> Result<(Registry, GroundTruth), CoreError> {
    cfg.validate()?;
    let intercept = calibrate_intercept(cfg.base_hazard, cfg.hazard_slope * cfg.latent_std());
    let total_weight: f64 = cfg.sectors.iter().map(|s| s.weight).sum();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let innovation_std = math::sqrt(1.0 - cfg.persistence * cfg.persistence);

    let mut companies = Vec::with_capacity(cfg.n_companies);
    let mut snapshots = Vec::new();
    let mut events = Vec::new();
    let mut truths = Vec::with_capacity(cfg.n_companies);

    for idx in 0..cfg.n_companies {
        let company_id = alloc::format!("c{idx:06}");
        let mut rng = seeding::rng(seed, &[0x5e0c, idx as u64]);

        let mut pick = rng.gen::<f64>() * total_weight;
        let sector = cfg
            .sectors
            .iter()
            .find(|s| {
                pick -= s.weight;
                pick <= 0.0
            })
            .unwrap_or(&cfg.sectors[cfg.sectors.len() - 1])
            .name
            .clone();
        let incorporated_year = cfg.year_first - rng.gen_range(0..=15);
        let size = math::exp(12.0 + normal.sample(&mut rng));

        let mut financial = normal.sample(&mut rng) * cfg.noise_scale;
        let mut behavioral = normal.sample(&mut rng) * cfg.noise_scale;
        let mut bankrupt_date: Option<Date> = None;
        let mut years = Vec::new();
        let mut pending_events: Vec<FilingEvent> = Vec::new();
        let mut pending_snapshots: Vec<BalanceSheetSnapshot> = Vec::new();

        for year in cfg.year_first..=cfg.year_last {
            if year > cfg.year_first {
                financial = cfg.persistence * financial
                    + innovation_std * cfg.noise_scale * normal.sample(&mut rng);
                behavioral = cfg.persistence * behavioral
                    + innovation_std * cfg.noise_scale * normal.sample(&mut rng);
            }
            let in_regime =
                cfg.covid.as_ref().map(|c| year >= c.start_year).unwrap_or(false);
            let mut hazard = math::sigmoid(
                intercept
                    + cfg.hazard_slope
                        * (cfg.financial_weight * financial + cfg.behavior_weight * behavioral),
            );
            if in_regime {
                hazard *= cfg.covid.as_ref().unwrap().hazard_multiplier;
            }
            let event_intensity =
                cfg.event_base_rate + cfg.event_distress_slope * behavioral.max(0.0);
            years.push(YearTruth { year, financial, behavioral, hazard, event_intensity });

            if rng.gen::<f64>() < hazard {
                bankrupt_date = Some(
                    Date::new(year, rng.gen_range(1..=12), rng.gen_range(1..=28)).unwrap(),
                );
                break;
            }
            pending_snapshots.push(snapshot_items(
                &company_id,
                year,
                size,
                financial,
                cfg.missing_rate,
                &mut rng,
            ));
            for event_type in crate::registry::EVENT_CATALOG {
                let distressed = DISTRESS_EVENT_TYPES.contains(&event_type);
                let lambda = if distressed { event_intensity } else { cfg.event_base_rate * 0.5 };
                if lambda <= 0.0 {
                    continue;
                }
                let count = Poisson::new(lambda).unwrap().sample(&mut rng) as u64;
                for _ in 0..count {
                    let mut date =
                        Date::new(year, rng.gen_range(1..=12), rng.gen_range(1..=28)).unwrap();
                    if in_regime {
                        let delay = cfg.covid.as_ref().unwrap().filing_delay_probability;
                        if rng.gen::<f64>() < delay {
                            // filing lands past Dec 31 in the next year
                            date = Date::new(year + 1, rng.gen_range(1..=3), rng.gen_range(1..=28))
                                .unwrap();
                        }
                    }
                    pending_events.push(FilingEvent {
                        company_id: company_id.clone(),
                        event_date: date,
                        event_type: event_type.into(),
                    });
                }
            }
        }

        if pending_snapshots.is_empty() {
            // bankrupt before ever filing a balance sheet; such a company
            // would fail validation and can never enter a sample
            continue;
        }
        // delayed filings may now postdate the bankruptcy or the horizon
        pending_events.retain(|e| {
            e.event_date.year <= cfg.year_last
                && bankrupt_date.map(|bd| e.event_date <= bd).unwrap_or(true)
        });
        snapshots.append(&mut pending_snapshots);
        events.append(&mut pending_events);
        companies.push(CompanyRecord { company_id: company_id.clone(), sector, incorporated_year, bankrupt_date });
        truths.push(CompanyTruth { company_id, years });
    }

    let registry = Registry::build(companies, snapshots, events)?;
    Ok((registry, GroundTruth { intercept, companies: truths }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::validate_registry;
    use crate::selection::{information_value, quantile_bins};
    use alloc::vec::Vec;

    fn small_config(n: usize) -> SynthConfig {
        SynthConfig { n_companies: n, ..Default::default() }
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let cfg = small_config(200);
        let (a, ta) = generate_registry(&cfg, 7).unwrap();
        let (b, tb) = generate_registry(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn generated_registry_is_clean() {
        let mut cfg = small_config(300);
        cfg.covid = Some(CovidRegime::standard());
        let (registry, _) = generate_registry(&cfg, 1).unwrap();
        assert!(validate_registry(&registry).is_clean());
    }

    #[test]
    fn zero_multiplier_means_no_regime_bankruptcies() {
        let mut cfg = small_config(500);
        cfg.covid = Some(CovidRegime {
            start_year: 2020,
            hazard_multiplier: 0.0,
            filing_delay_probability: 0.5,
        });
        let (registry, _) = generate_registry(&cfg, 3).unwrap();
        assert!(registry
            .companies()
            .filter_map(|c| c.bankrupt_date)
            .all(|bd| bd.year < 2020));
    }

    #[test]
    fn realized_annual_rate_near_base() {
        let cfg = small_config(2000);
        let (registry, _) = generate_registry(&cfg, 11).unwrap();
        let mut company_years = 0usize;
        let mut bankruptcies = 0usize;
        for c in registry.companies() {
            let last_alive = c.bankrupt_date.map(|bd| bd.year).unwrap_or(cfg.year_last);
            company_years += (last_alive - cfg.year_first + 1) as usize;
            bankruptcies += c.bankrupt_date.is_some() as usize;
        }
        let rate = bankruptcies as f64 / company_years as f64;
        assert!((0.015..0.035).contains(&rate), "realized annual rate {rate}");
    }

    #[test]
    fn behavioral_signal_is_detectable_by_iv() {
        // event count in 2015 vs bankruptcy in 2016, straight from the
        // registry — the planted signal must survive into high IV
        let cfg = small_config(4000);
        let (registry, _) = generate_registry(&cfg, 5).unwrap();
        let mut values: Vec<Option<f64>> = Vec::new();
        let mut labels: Vec<u8> = Vec::new();
        for c in registry.companies() {
            if registry.snapshot(&c.company_id, 2015).is_none() {
                continue;
            }
            let count = registry
                .company_events(&c.company_id)
                .filter(|e| e.event_date.year == 2015)
                .count();
            values.push(Some(count as f64));
            labels.push(u8::from(c.bankrupt_date.map(|bd| bd.year == 2016).unwrap_or(false)));
        }
        let spec = quantile_bins(&values, &labels, 10).unwrap();
        let iv = information_value(&spec, 0.5).unwrap();
        assert!(iv > 0.1, "planted-signal IV {iv}");
    }

    #[test]
    fn infeasible_configs_rejected() {
        let mut cfg = small_config(10);
        cfg.base_hazard = 0.0;
        assert!(matches!(
            generate_registry(&cfg, 0),
            Err(CoreError::InfeasibleSynthConfig { .. })
        ));
        let mut cfg = small_config(10);
        cfg.persistence = 1.0;
        assert!(generate_registry(&cfg, 0).is_err());
    }

    #[test]
    fn regime_halves_the_bankruptcy_rate() {
        let mut cfg = small_config(3000);
        cfg.covid = Some(CovidRegime::standard());
        let (registry, _) = generate_registry(&cfg, 9).unwrap();
        let mut pre = (0usize, 0usize); // (bankruptcies, company-years)
        let mut post = (0usize, 0usize);
        for c in registry.companies() {
            let last_alive = c.bankrupt_date.map(|bd| bd.year).unwrap_or(cfg.year_last);
            for year in cfg.year_first..=last_alive {
                let slot = if year >= 2020 { &mut post } else { &mut pre };
                slot.1 += 1;
                slot.0 += (c.bankrupt_date.map(|bd| bd.year) == Some(year)) as usize;
            }
        }
        let pre_rate = pre.0 as f64 / pre.1 as f64;
        let post_rate = post.0 as f64 / post.1 as f64;
        assert!(
            post_rate < 0.5 * pre_rate,
            "pre {pre_rate} vs post {post_rate}"
        );
    }
}
