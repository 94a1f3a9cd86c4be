//! Stage orchestration: registry acquisition, feature building, selection,
//! window splits, model training and the ablation evaluation, each leaving
//! its artifacts under the configured output directory.
//!
//! Artifact layout:
//! ```text
//! out/
//!   run_manifest.json
//!   registry/{companies,balance_sheets,filings}.csv
//!   validation_report.json
//!   features/w{W}.csv
//!   iv_report.csv
//!   windows/w{W}/{manifest.json,train.csv,test.csv,pre_covid.csv,post_covid.csv}
//!   models/{family}_w{W}.json
//!   reports/{auc_matrix.csv,hybrid_deltas.csv,drift_report.csv,roc_*.csv}
//! ```

use std::collections::BTreeSet;
use std::fs::File;
use std::path::PathBuf;

use sha2::Digest;
use solvencylab_core::ablate::{ablation_matrix, AblationOptions};
use solvencylab_core::eval::{auc_of_curve, drift_report, roc_curve, EvalSplit, FeatureSet};
use solvencylab_core::matrix::FeatureMatrix;
use solvencylab_core::models::{fit, grid_search_cv, ModelConfig, ModelFamily, TrainedModel};
use solvencylab_core::registry::{filter_registry, validate_registry, Registry, ValidationReport};
use solvencylab_core::seeding;
use solvencylab_core::selection::{select_features, IvReport};
use solvencylab_core::synth::generate_registry;
use solvencylab_core::windows::{
    assemble_splits, assemble_splits_by_company, build_samples, data_horizon, undersample,
    SampleSet, SplitBundle, POST_COVID_YEAR_LAST, TRAIN_YEAR_FIRST, TRAIN_YEAR_LAST,
};

use crate::config::{InputMode, PipelineConfig};
use crate::error::{CliError, Stage};
use crate::io;

/// Quiet-by-default, stage-prefixed line logger.
#[derive(Debug, Clone, Copy)]
pub struct StageLog {
    pub verbose: bool,
}

impl StageLog {
    pub fn line(&self, stage: Stage, msg: impl std::fmt::Display) {
        if self.verbose {
            eprintln!("[{stage}] {msg}");
        }
    }
}

/// Canonical artifact locations under one output directory.
#[derive(Debug, Clone)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutputLayout { root: root.into() }
    }

    pub fn registry_paths(&self) -> io::RegistryPaths {
        io::RegistryPaths::in_dir(&self.root.join("registry"))
    }

    pub fn validation_report(&self) -> PathBuf {
        self.root.join("validation_report.json")
    }

    pub fn features_csv(&self, w: u8) -> PathBuf {
        self.root.join("features").join(format!("w{w}.csv"))
    }

    pub fn iv_report(&self) -> PathBuf {
        self.root.join("iv_report.csv")
    }

    pub fn window_dir(&self, w: u8) -> PathBuf {
        self.root.join("windows").join(format!("w{w}"))
    }

    pub fn model_path(&self, family: ModelFamily, w: u8) -> PathBuf {
        self.root.join("models").join(format!("{}_w{w}.json", family.as_str()))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn run_manifest(&self) -> PathBuf {
        self.root.join("run_manifest.json")
    }

    fn lock_path(&self) -> PathBuf {
        self.root.join(".lock")
    }

    fn incomplete_marker(&self) -> PathBuf {
        self.root.join(".incomplete")
    }
}

/// Holds the output-directory lock for the duration of a run and tracks the
/// `.incomplete` marker that flags aborted runs.
pub struct RunGuard {
    layout: OutputLayout,
    completed: bool,
}

impl RunGuard {
    pub fn acquire(layout: &OutputLayout) -> Result<Self, CliError> {
        std::fs::create_dir_all(&layout.root).map_err(|e| {
            CliError::runtime(Stage::Config, format!("mkdir {}: {e}", layout.root.display()))
        })?;
        File::create_new(layout.lock_path()).map_err(|e| {
            CliError::runtime(
                Stage::Config,
                format!(
                    "cannot lock output directory {} (another run in progress?): {e}",
                    layout.root.display()
                ),
            )
        })?;
        std::fs::write(layout.incomplete_marker(), b"run in progress\n").map_err(|e| {
            CliError::runtime(Stage::Config, format!("cannot write marker: {e}"))
        })?;
        Ok(RunGuard { layout: layout.clone(), completed: false })
    }

    pub fn mark_complete(&mut self) -> Result<(), CliError> {
        std::fs::remove_file(self.layout.incomplete_marker()).map_err(|e| {
            CliError::runtime(Stage::Report, format!("cannot remove marker: {e}"))
        })?;
        self.completed = true;
        Ok(())
    }
}

impl Drop for RunGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(self.layout.lock_path());
    }
}

fn core_err(stage: Stage) -> impl Fn(solvencylab_core::CoreError) -> CliError {
    move |e| CliError::from_core(stage, e)
}

/// Stage 1: obtain a registry (generator or CSV ingestion), validate it and
/// apply the configured filters. Returns the filtered registry plus the
/// pre-filter validation report.
pub fn acquire_registry(
    config: &PipelineConfig,
    log: StageLog,
) -> Result<(Registry, ValidationReport), CliError> {
    let registry = match config.input.mode {
        InputMode::Synth => {
            let synth = config.synth_config()?;
            log.line(Stage::Synth, format!("generating {} companies", synth.n_companies));
            let (registry, _) =
                generate_registry(&synth, config.seed).map_err(core_err(Stage::Synth))?;
            registry
        }
        InputMode::Csv => {
            let dir = config.input.dir.as_ref().ok_or_else(|| {
                CliError::config(Stage::Config, "input.dir is required when input.mode = \"csv\"")
            })?;
            log.line(Stage::Ingest, format!("reading registry from {}", dir.display()));
            io::load_registry(&io::RegistryPaths::in_dir(dir))?
        }
    };
    let report = validate_registry(&registry);
    let excluded: BTreeSet<String> = config.filter.excluded_sectors.iter().cloned().collect();
    let filtered = filter_registry(&registry, &excluded, config.filter.drop_anomalous);
    log.line(
        Stage::Ingest,
        format!(
            "{} companies after filtering, {} anomalies",
            filtered.companies().count(),
            report.anomalies.len()
        ),
    );
    Ok((filtered, report))
}

/// Stage 2: per-reference-year sample sets for one window length, over every
/// t0 whose label year lies within the data horizon.
pub fn build_window_samples(
    registry: &Registry,
    config: &PipelineConfig,
    w: u8,
) -> Result<Vec<SampleSet>, CliError> {
    let features = config.features.to_feature_config();
    let horizon = data_horizon(registry).unwrap_or(i32::MIN);
    let last_t0 = POST_COVID_YEAR_LAST.min(horizon - 1);
    let mut sets = Vec::new();
    for t0 in TRAIN_YEAR_FIRST..=last_t0 {
        sets.push(build_samples(registry, &features, w, t0).map_err(core_err(Stage::Featurize))?);
    }
    if sets.is_empty() {
        return Err(CliError::data(
            Stage::Featurize,
            format!("no reference years within the data horizon ({horizon})"),
        ));
    }
    Ok(sets)
}

/// Concatenates a window's sample sets into one matrix (the `features/`
/// artifact form).
pub fn concat_samples(sets: &[SampleSet]) -> Result<FeatureMatrix, CliError> {
    let parts: Vec<&FeatureMatrix> = sets.iter().map(|s| &s.matrix).collect();
    FeatureMatrix::concat(&parts).map_err(core_err(Stage::Featurize))
}

/// Inverse of [`concat_samples`]: regroup a features artifact by reference
/// year.
pub fn split_into_sample_sets(matrix: &FeatureMatrix, w: u8) -> Vec<SampleSet> {
    let mut years: Vec<i32> = matrix.keys().iter().map(|k| k.reference_year).collect();
    years.sort_unstable();
    years.dedup();
    years
        .into_iter()
        .map(|year| {
            let rows: Vec<usize> = matrix
                .keys()
                .iter()
                .enumerate()
                .filter(|(_, k)| k.reference_year == year)
                .map(|(i, _)| i)
                .collect();
            SampleSet { window_length: w, reference_year: year, matrix: matrix.select_rows(&rows) }
        })
        .collect()
}

/// Stage 3: IV-based selection on the training-year rows of one window's
/// feature matrix.
pub fn run_selection(
    train_matrix: &FeatureMatrix,
    config: &PipelineConfig,
) -> Result<IvReport, CliError> {
    select_features(
        train_matrix,
        config.selection.bins,
        config.selection.iv_threshold,
        config.selection.missing_threshold,
    )
    .map_err(core_err(Stage::Select))
}

/// Rows whose reference year falls in the training range — the population
/// feature selection is allowed to see.
pub fn training_year_rows(matrix: &FeatureMatrix) -> FeatureMatrix {
    let rows: Vec<usize> = matrix
        .keys()
        .iter()
        .enumerate()
        .filter(|(_, k)| (TRAIN_YEAR_FIRST..=TRAIN_YEAR_LAST).contains(&k.reference_year))
        .map(|(i, _)| i)
        .collect();
    matrix.select_rows(&rows)
}

/// Drops every column not in `selected` (matched by name).
pub fn restrict_to_selected(
    matrix: &FeatureMatrix,
    selected: &BTreeSet<String>,
) -> Result<FeatureMatrix, CliError> {
    let idx: Vec<usize> = matrix
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| selected.contains(&c.name))
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(CliError::runtime(Stage::Select, "selection removed every feature column"));
    }
    Ok(matrix.select_columns(&idx))
}

fn restrict_bundle(
    bundle: &SplitBundle,
    selected: &BTreeSet<String>,
) -> Result<SplitBundle, CliError> {
    Ok(SplitBundle {
        window_length: bundle.window_length,
        train: restrict_to_selected(&bundle.train, selected)?,
        test: restrict_to_selected(&bundle.test, selected)?,
        pre_covid: restrict_to_selected(&bundle.pre_covid, selected)?,
        post_covid: restrict_to_selected(&bundle.post_covid, selected)?,
        split_seed: bundle.split_seed,
        split_fraction: bundle.split_fraction,
    })
}

/// Stage 4: train/test/pre-Covid/post-Covid assembly for one window.
pub fn assemble_bundle(
    sets: &[SampleSet],
    config: &PipelineConfig,
) -> Result<SplitBundle, CliError> {
    let split_seed = seeding::derive(config.seed, &[0x5311, sets[0].window_length as u64]);
    let result = if config.windows.group_by_company {
        assemble_splits_by_company(sets, config.windows.split_fraction, split_seed)
    } else {
        assemble_splits(sets, config.windows.split_fraction, split_seed)
    };
    result.map_err(core_err(Stage::Windows))
}

/// The feature set the standalone model artifacts are trained on: the
/// richest hybrid the enabled families allow.
pub fn primary_feature_set(config: &PipelineConfig) -> Result<FeatureSet, CliError> {
    let f = &config.features;
    let set = match (f.enable_fr, f.enable_afe, f.enable_rb) {
        (_, true, true) => FeatureSet::AfeRb,
        (true, _, true) => FeatureSet::FrRb,
        (_, true, false) => FeatureSet::Afe,
        (true, false, false) => FeatureSet::Fr,
        (false, false, _) => {
            return Err(CliError::config(
                Stage::Config,
                "model training requires the FR or AFE family",
            ))
        }
    };
    Ok(set)
}

/// The ablation feature sets the enabled families support, in canonical
/// order.
pub fn ablation_feature_sets(config: &PipelineConfig) -> Vec<FeatureSet> {
    let f = &config.features;
    let mut sets = Vec::new();
    if f.enable_fr {
        sets.push(FeatureSet::Fr);
    }
    if f.enable_afe {
        sets.push(FeatureSet::Afe);
    }
    if f.enable_fr && f.enable_rb {
        sets.push(FeatureSet::FrRb);
    }
    if f.enable_afe && f.enable_rb {
        sets.push(FeatureSet::AfeRb);
    }
    sets
}

/// Stage 5: one model per (family, window) on the undersampled primary
/// feature set; grid-search only when a multi-entry grid is configured.
pub fn train_models(
    bundle: &SplitBundle,
    config: &PipelineConfig,
) -> Result<Vec<(ModelFamily, TrainedModel)>, CliError> {
    let set = primary_feature_set(config)?;
    let matrix = bundle.train.select_families(set.families());
    let grids = config.model_grids()?;
    let mut models = Vec::new();
    for family in config.model_families()? {
        let seed = seeding::derive(
            config.seed,
            &[0x7a11, bundle.window_length as u64, family as u64],
        );
        let (train, _) = undersample(
            &matrix,
            config.windows.undersample_rate,
            seeding::derive(seed, &[0x05a0]),
        )
        .map_err(core_err(Stage::Train))?;
        let model_config = match grids.get(&family) {
            Some(grid) if grid.len() > 1 => {
                grid_search_cv(grid, &train, config.models.cv_folds, seed)
                    .map_err(core_err(Stage::Train))?
                    .best_config
            }
            Some(grid) => grid[0].clone(),
            None => ModelConfig::default_for(family),
        };
        let model = fit(&model_config, &train, seeding::derive(seed, &[0xf17]))
            .map_err(core_err(Stage::Train))?;
        models.push((family, model));
    }
    Ok(models)
}

/// Per-model scores on the three held-out splits; writes one ROC CSV per
/// (family, split) and returns `(family, split, auc)` rows.
pub fn evaluate_models(
    models: &[(ModelFamily, TrainedModel)],
    bundle: &SplitBundle,
    config: &PipelineConfig,
    layout: &OutputLayout,
) -> Result<Vec<(ModelFamily, EvalSplit, f64)>, CliError> {
    let set = primary_feature_set(config)?;
    let w = bundle.window_length;
    let mut rows = Vec::new();
    for (family, model) in models {
        for (split, matrix) in [
            (EvalSplit::Test, &bundle.test),
            (EvalSplit::PreCovid, &bundle.pre_covid),
            (EvalSplit::PostCovid, &bundle.post_covid),
        ] {
            let matrix = matrix.select_families(set.families());
            let scores = model.predict_proba(&matrix).map_err(core_err(Stage::Evaluate))?;
            let roc = roc_curve(&scores, matrix.labels()).map_err(core_err(Stage::Evaluate))?;
            let name = format!(
                "roc_{}_{}_{}y_{}.csv",
                family.as_str(),
                set.as_str(),
                w,
                split.as_str()
            );
            io::write_roc_csv(&roc, &layout.reports_dir().join(name))?;
            rows.push((*family, split, auc_of_curve(&roc)));
        }
    }
    Ok(rows)
}

/// Reproducibility record for one run: config identity, seeds and versions,
/// deliberately free of timestamps so identical runs are byte-identical.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub config: PipelineConfig,
    pub seed: u64,
    pub versions: std::collections::BTreeMap<String, String>,
    pub model_format_version: u32,
}

pub fn config_hash(config: &PipelineConfig) -> Result<String, CliError> {
    let canonical = toml::to_string(config)
        .map_err(|e| CliError::runtime(Stage::Config, e.to_string()))?;
    let digest = sha2::Sha256::digest(canonical.as_bytes());
    Ok(format!("{digest:x}"))
}

pub fn run_manifest(config: &PipelineConfig) -> Result<RunManifest, CliError> {
    let mut versions = std::collections::BTreeMap::new();
    versions.insert("solvencylab".to_string(), env!("CARGO_PKG_VERSION").to_string());
    versions
        .insert("solvencylab-core".to_string(), solvencylab_core::VERSION.to_string());
    Ok(RunManifest {
        config_sha256: config_hash(config)?,
        config: config.clone(),
        seed: config.seed,
        versions,
        model_format_version: solvencylab_core::models::MODEL_FORMAT_VERSION,
    })
}

fn write_bundle(bundle: &SplitBundle, layout: &OutputLayout) -> Result<(), CliError> {
    let dir = layout.window_dir(bundle.window_length);
    io::write_json(&io::split_manifest(bundle), &dir.join("manifest.json"))?;
    io::write_feature_matrix(&bundle.train, &dir.join("train.csv"))?;
    io::write_feature_matrix(&bundle.test, &dir.join("test.csv"))?;
    io::write_feature_matrix(&bundle.pre_covid, &dir.join("pre_covid.csv"))?;
    io::write_feature_matrix(&bundle.post_covid, &dir.join("post_covid.csv"))
}

/// The full pipeline: every stage in order, all artifacts written, output
/// directory locked for the duration.
pub fn run_pipeline(config: &PipelineConfig, log: StageLog) -> Result<(), CliError> {
    config.validate()?;
    let layout = OutputLayout::new(&config.output_dir);
    let mut guard = RunGuard::acquire(&layout)?;

    io::write_json(&run_manifest(config)?, &layout.run_manifest())?;

    let (registry, validation) = acquire_registry(config, log)?;
    io::write_registry(&registry, &layout.registry_paths())?;
    io::write_json(&validation, &layout.validation_report())?;

    // feature matrices and split bundles per window
    let mut bundles = Vec::new();
    for &w in &config.windows.lengths {
        log.line(Stage::Featurize, format!("window {w}y"));
        let sets = build_window_samples(&registry, config, w)?;
        let full = concat_samples(&sets)?;
        io::write_feature_matrix(&full, &layout.features_csv(w))?;
        bundles.push(assemble_bundle(&sets, config)?);
    }

    // selection on the first window's training rows, applied everywhere
    let first_w = config.windows.lengths[0];
    let selection_matrix = training_year_rows(&io::read_feature_matrix(&layout.features_csv(first_w))?);
    let iv = run_selection(&selection_matrix, config)?;
    io::write_iv_report(&iv, &layout.iv_report())?;
    let selected: BTreeSet<String> =
        iv.selected_features().into_iter().map(str::to_string).collect();
    log.line(Stage::Select, format!("{} of {} features selected", selected.len(), iv.rows.len()));
    let bundles: Vec<SplitBundle> = bundles
        .iter()
        .map(|b| restrict_bundle(b, &selected))
        .collect::<Result<_, _>>()?;
    for bundle in &bundles {
        write_bundle(bundle, &layout)?;
    }

    // standalone model artifacts
    for bundle in &bundles {
        log.line(Stage::Train, format!("window {}y", bundle.window_length));
        for (family, model) in train_models(bundle, config)? {
            io::save_model(&model, &layout.model_path(family, bundle.window_length))?;
        }
    }

    // ablation matrix over the supported feature sets
    let feature_sets = ablation_feature_sets(config);
    if feature_sets.is_empty() {
        return Err(CliError::config(
            Stage::Evaluate,
            "the ablation requires the FR or AFE family",
        ));
    }
    log.line(Stage::Evaluate, format!("{} feature sets", feature_sets.len()));
    let options = AblationOptions {
        undersample_rate: config.windows.undersample_rate,
        seed: config.seed,
        grids: config.model_grids()?,
        cv_folds: config.models.cv_folds,
    };
    let report = ablation_matrix(&bundles, &config.model_families()?, &feature_sets, &options)
        .map_err(core_err(Stage::Evaluate))?;
    let reports = layout.reports_dir();
    io::write_auc_matrix(&report, &reports.join("auc_matrix.csv"))?;
    io::write_hybrid_deltas(&report, &reports.join("hybrid_deltas.csv"))?;
    io::write_drift_report(&drift_report(&report), &reports.join("drift_report.csv"))?;
    io::emit_roc_csv(&report, &reports)?;

    guard.mark_complete()?;
    log.line(Stage::Report, format!("artifacts in {}", layout.root.display()));
    Ok(())
}

/// Loads a previously written window bundle from its artifact directory.
pub fn load_bundle(layout: &OutputLayout, w: u8) -> Result<SplitBundle, CliError> {
    let dir = layout.window_dir(w);
    let manifest: io::SplitManifest = io::read_json(&dir.join("manifest.json"))?;
    Ok(SplitBundle {
        window_length: manifest.window_length,
        train: io::read_feature_matrix(&dir.join("train.csv"))?,
        test: io::read_feature_matrix(&dir.join("test.csv"))?,
        pre_covid: io::read_feature_matrix(&dir.join("pre_covid.csv"))?,
        post_covid: io::read_feature_matrix(&dir.join("post_covid.csv"))?,
        split_seed: manifest.split_seed,
        split_fraction: manifest.split_fraction,
    })
}

/// Loads the registry artifact written by `synth` or `ingest`.
pub fn load_registry_artifact(layout: &OutputLayout) -> Result<Registry, CliError> {
    io::load_registry(&layout.registry_paths())
}
