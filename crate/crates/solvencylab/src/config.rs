//! Declarative pipeline configuration: a TOML file whose every value can be
//! overridden on the command line with a dotted `--set key=value` flag.
//!
//! Partial sections are merged onto the library defaults, so a config file
//! only needs to state what differs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use solvencylab_core::features::{AfeGrammar, FeatureConfig};
use solvencylab_core::models::{
    ForestConfig, GbdtConfig, LogisticConfig, MlpConfig, ModelConfig, ModelFamily,
};
use solvencylab_core::synth::SynthConfig;
use solvencylab_core::windows::{DEFAULT_SPLIT_FRACTION, DEFAULT_UNDERSAMPLE_RATE};

use crate::error::{CliError, Stage};

fn cfg_err(detail: impl Into<String>) -> CliError {
    CliError::config(Stage::Config, detail)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    Synth,
    Csv,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub mode: InputMode,
    /// Directory holding companies.csv / balance_sheets.csv / filings.csv
    /// when mode = "csv".
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

impl Default for InputSection {
    fn default() -> Self {
        InputSection { mode: InputMode::Synth, dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSection {
    pub enable_fr: bool,
    pub enable_afe: bool,
    pub enable_rb: bool,
    pub afe_max_features: usize,
    pub afe_lag_depth: usize,
}

impl Default for FeatureSection {
    fn default() -> Self {
        let grammar = AfeGrammar::default();
        FeatureSection {
            enable_fr: true,
            enable_afe: true,
            enable_rb: true,
            afe_max_features: grammar.max_features,
            afe_lag_depth: grammar.lag_depth,
        }
    }
}

impl FeatureSection {
    pub fn to_feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            enable_fr: self.enable_fr,
            enable_afe: self.enable_afe,
            enable_rb: self.enable_rb,
            afe_grammar: AfeGrammar {
                max_features: self.afe_max_features,
                lag_depth: self.afe_lag_depth,
                ..AfeGrammar::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub excluded_sectors: Vec<String>,
    pub drop_anomalous: bool,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection { excluded_sectors: Vec::new(), drop_anomalous: true }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    pub bins: usize,
    pub iv_threshold: f64,
    pub missing_threshold: f64,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection { bins: 10, iv_threshold: 0.02, missing_threshold: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    pub lengths: Vec<u8>,
    pub split_fraction: f64,
    pub undersample_rate: f64,
    /// Keep all samples of a company on one side of the train/test split.
    pub group_by_company: bool,
}

impl Default for WindowSection {
    fn default() -> Self {
        WindowSection {
            lengths: vec![1, 2, 3],
            split_fraction: DEFAULT_SPLIT_FRACTION,
            undersample_rate: DEFAULT_UNDERSAMPLE_RATE,
            group_by_company: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub families: Vec<String>,
    pub cv_folds: usize,
    /// Per-family hyperparameter grids; each entry is a partial table merged
    /// onto that family's default config. Families without a grid run their
    /// default config.
    pub grids: BTreeMap<String, Vec<toml::Table>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            families: vec!["logistic".into(), "random_forest".into(), "gbdt".into(), "mlp".into()],
            cv_folds: 5,
            grids: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub input: InputSection,
    /// Only consulted when input.mode = "synth"; partial, merged onto the
    /// generator defaults.
    pub synth: toml::Table,
    pub features: FeatureSection,
    pub filter: FilterSection,
    pub selection: SelectionSection,
    pub windows: WindowSection,
    pub models: ModelSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            output_dir: PathBuf::from("out"),
            input: InputSection::default(),
            synth: toml::Table::new(),
            features: FeatureSection::default(),
            filter: FilterSection::default(),
            selection: SelectionSection::default(),
            windows: WindowSection::default(),
            models: ModelSection::default(),
        }
    }
}

/// Recursively merges `patch` into `base`: tables merge key-by-key, any
/// other value replaces the base value.
fn merge_toml(base: &mut toml::Value, patch: toml::Value) {
    match (base, patch) {
        (toml::Value::Table(base), toml::Value::Table(patch)) => {
            for (key, value) in patch {
                match base.get_mut(&key) {
                    Some(slot) => merge_toml(slot, value),
                    None => {
                        base.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

/// Merges a partial TOML table onto the serialized form of a default value
/// and deserializes the result. Goes through JSON values because TOML cannot
/// represent `None` fields of the default.
fn merge_onto_default<T: serde::Serialize + serde::de::DeserializeOwned>(
    default: &T,
    patch: &toml::Table,
    what: &str,
) -> Result<T, CliError> {
    let mut base = serde_json::to_value(default)
        .map_err(|e| cfg_err(format!("{what}: {e}")))?;
    let patch_json = serde_json::to_value(patch)
        .map_err(|e| cfg_err(format!("{what}: {e}")))?;
    merge_json(&mut base, patch_json);
    serde_json::from_value(base).map_err(|e| cfg_err(format!("{what}: {e}")))
}

fn merge_json(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(base), serde_json::Value::Object(patch)) => {
            for (key, value) in patch {
                match base.get_mut(&key) {
                    Some(slot) => merge_json(slot, value),
                    None => {
                        base.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

impl PipelineConfig {
    /// Parses a TOML document, then applies `--set dotted.key=value`
    /// overrides. Each override is itself parsed as a one-line TOML document,
    /// so dotted paths, strings, numbers, booleans and arrays all work.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut value: toml::Value =
            text.parse().map_err(|e| cfg_err(format!("config parse error: {e}")))?;
        for item in overrides {
            if !item.contains('=') {
                return Err(cfg_err(format!("override {item:?} is not of the form key=value")));
            }
            let patch: toml::Value = item
                .parse()
                .map_err(|e| cfg_err(format!("override {item:?}: {e}")))?;
            merge_toml(&mut value, patch);
        }
        let config: PipelineConfig =
            value.try_into().map_err(|e| cfg_err(format!("config error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.features.to_feature_config().any_enabled() {
            return Err(cfg_err("at least one feature family must be enabled"));
        }
        if self.windows.lengths.is_empty() {
            return Err(cfg_err("windows.lengths must not be empty"));
        }
        for &w in &self.windows.lengths {
            if !(1..=3).contains(&w) {
                return Err(cfg_err(format!("window length {w} not in {{1,2,3}}")));
            }
        }
        if !(0.0..1.0).contains(&self.windows.split_fraction) || self.windows.split_fraction <= 0.0 {
            return Err(cfg_err("windows.split_fraction must be in (0, 1)"));
        }
        if self.models.families.is_empty() {
            return Err(cfg_err("models.families must not be empty"));
        }
        self.model_families()?;
        self.model_grids()?;
        if matches!(self.input.mode, InputMode::Csv) && self.input.dir.is_none() {
            return Err(cfg_err("input.dir is required when input.mode = \"csv\""));
        }
        self.synth_config()?;
        Ok(())
    }

    pub fn model_families(&self) -> Result<Vec<ModelFamily>, CliError> {
        self.models
            .families
            .iter()
            .map(|name| {
                ModelFamily::parse(name)
                    .ok_or_else(|| cfg_err(format!("unknown model family {name:?}")))
            })
            .collect()
    }

    /// Full synthetic-generator config: defaults patched by the `[synth]`
    /// table.
    pub fn synth_config(&self) -> Result<SynthConfig, CliError> {
        let config = merge_onto_default(&SynthConfig::default(), &self.synth, "synth")?;
        config.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(config)
    }

    /// Resolved hyperparameter grids: each TOML entry patched onto the
    /// family's default config.
    pub fn model_grids(&self) -> Result<BTreeMap<ModelFamily, Vec<ModelConfig>>, CliError> {
        let mut grids = BTreeMap::new();
        for (name, entries) in &self.models.grids {
            let family = ModelFamily::parse(name)
                .ok_or_else(|| cfg_err(format!("unknown model family {name:?} in grids")))?;
            let mut grid = Vec::with_capacity(entries.len());
            for entry in entries {
                let what = format!("grids.{name}");
                let config = match family {
                    ModelFamily::Logistic => ModelConfig::Logistic(merge_onto_default(
                        &LogisticConfig::default(),
                        entry,
                        &what,
                    )?),
                    ModelFamily::RandomForest => ModelConfig::RandomForest(merge_onto_default(
                        &ForestConfig::default(),
                        entry,
                        &what,
                    )?),
                    ModelFamily::Gbdt => {
                        ModelConfig::Gbdt(merge_onto_default(&GbdtConfig::default(), entry, &what)?)
                    }
                    ModelFamily::Mlp => {
                        ModelConfig::Mlp(merge_onto_default(&MlpConfig::default(), entry, &what)?)
                    }
                };
                config.validate().map_err(|e| cfg_err(format!("grids.{name}: {e}")))?;
                grid.push(config);
            }
            grids.insert(family, grid);
        }
        Ok(grids)
    }
}
