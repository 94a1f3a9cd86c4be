//! Batch CLI: each subcommand runs one pipeline stage against the artifact
//! tree in the configured output directory; `run` chains all of them.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use solvencylab::config::{InputMode, PipelineConfig};
use solvencylab::error::{CliError, Stage};
use solvencylab::io;
use solvencylab::pipeline::{
    ablation_feature_sets, acquire_registry, assemble_bundle, build_window_samples,
    concat_samples, config_hash, evaluate_models, load_bundle, load_registry_artifact,
    run_pipeline, run_selection, split_into_sample_sets, train_models, training_year_rows,
    OutputLayout, RunGuard, StageLog,
};
use solvencylab_core::ablate::{ablation_matrix, AblationOptions};
use solvencylab_core::eval::drift_report;

#[derive(Parser)]
#[command(name = "solvencylab", version, about = "Bankruptcy-prediction experiment pipeline")]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config value by dotted path, e.g. --set synth.n_companies=500
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Print per-stage progress lines (quiet by default).
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic registry and write it with its validation report.
    Synth,
    /// Read a registry from CSV files and write it with its validation report.
    Ingest,
    /// Build per-window feature matrices from the registry artifact.
    Featurize,
    /// Run information-value feature selection on the training years.
    Select,
    /// Assemble train/test/pre-Covid/post-Covid splits per window.
    Windows,
    /// Train one model per family and window on the primary feature set.
    Train,
    /// Score the trained models on the held-out splits.
    Evaluate,
    /// Run the (family x feature set x window x split) ablation matrix.
    Ablate,
    /// Execute every stage in order.
    Run,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    match &cli.config {
        Some(path) => PipelineConfig::from_file(path, &cli.overrides),
        None => PipelineConfig::from_toml("", &cli.overrides),
    }
}

fn selected_columns(layout: &OutputLayout) -> Result<BTreeSet<String>, CliError> {
    // reuse the CSV reader indirectly: the IV report is small, parse by hand
    let path = layout.iv_report();
    let text = std::fs::read_to_string(&path).map_err(|e| {
        CliError::data(Stage::Select, format!("cannot read {} (run `select` first): {e}", path.display()))
    })?;
    let mut selected = BTreeSet::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() == 5 && fields[4] == "true" {
            selected.insert(fields[0].to_string());
        }
    }
    Ok(selected)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let log = StageLog { verbose: cli.verbose };
    let layout = OutputLayout::new(&config.output_dir);
    match cli.command {
        Command::Run => return run_pipeline(&config, log),
        _ => {}
    }
    let mut guard = RunGuard::acquire(&layout)?;
    match cli.command {
        Command::Run => unreachable!(),
        Command::Synth | Command::Ingest => {
            let mut config = config.clone();
            config.input.mode = match cli.command {
                Command::Synth => InputMode::Synth,
                _ => InputMode::Csv,
            };
            config.validate()?;
            let (registry, validation) = acquire_registry(&config, log)?;
            io::write_registry(&registry, &layout.registry_paths())?;
            io::write_json(&validation, &layout.validation_report())?;
        }
        Command::Featurize => {
            let registry = load_registry_artifact(&layout)?;
            for &w in &config.windows.lengths {
                let sets = build_window_samples(&registry, &config, w)?;
                io::write_feature_matrix(&concat_samples(&sets)?, &layout.features_csv(w))?;
                log.line(Stage::Featurize, format!("window {w}y written"));
            }
        }
        Command::Select => {
            let w = config.windows.lengths[0];
            let matrix = io::read_feature_matrix(&layout.features_csv(w))?;
            let iv = run_selection(&training_year_rows(&matrix), &config)?;
            io::write_iv_report(&iv, &layout.iv_report())?;
            log.line(
                Stage::Select,
                format!("{} of {} features selected", iv.selected_features().len(), iv.rows.len()),
            );
        }
        Command::Windows => {
            let selected = selected_columns(&layout)?;
            for &w in &config.windows.lengths {
                let matrix = io::read_feature_matrix(&layout.features_csv(w))?;
                let matrix = solvencylab::pipeline::restrict_to_selected(&matrix, &selected)?;
                let sets = split_into_sample_sets(&matrix, w);
                let bundle = assemble_bundle(&sets, &config)?;
                let dir = layout.window_dir(w);
                io::write_json(&io::split_manifest(&bundle), &dir.join("manifest.json"))?;
                io::write_feature_matrix(&bundle.train, &dir.join("train.csv"))?;
                io::write_feature_matrix(&bundle.test, &dir.join("test.csv"))?;
                io::write_feature_matrix(&bundle.pre_covid, &dir.join("pre_covid.csv"))?;
                io::write_feature_matrix(&bundle.post_covid, &dir.join("post_covid.csv"))?;
                log.line(Stage::Windows, format!("window {w}y split"));
            }
        }
        Command::Train => {
            for &w in &config.windows.lengths {
                let bundle = load_bundle(&layout, w)?;
                for (family, model) in train_models(&bundle, &config)? {
                    io::save_model(&model, &layout.model_path(family, w))?;
                }
                log.line(Stage::Train, format!("window {w}y trained"));
            }
        }
        Command::Evaluate => {
            let mut rows = Vec::new();
            for &w in &config.windows.lengths {
                let bundle = load_bundle(&layout, w)?;
                let models: Vec<_> = config
                    .model_families()?
                    .into_iter()
                    .map(|family| {
                        io::load_model(&layout.model_path(family, w)).map(|m| (family, m))
                    })
                    .collect::<Result<_, _>>()?;
                for (family, split, auc) in evaluate_models(&models, &bundle, &config, &layout)? {
                    rows.push((family, w, split, auc));
                }
            }
            let path = layout.reports_dir().join("model_scores.csv");
            let mut out = String::from("family,window,split,auc\n");
            for (family, w, split, auc) in rows {
                out.push_str(&format!("{},{w},{},{auc}\n", family.as_str(), split.as_str()));
            }
            std::fs::create_dir_all(layout.reports_dir())
                .and_then(|_| std::fs::write(&path, out))
                .map_err(|e| CliError::runtime(Stage::Report, e.to_string()))?;
        }
        Command::Ablate => {
            let bundles: Vec<_> = config
                .windows
                .lengths
                .iter()
                .map(|&w| load_bundle(&layout, w))
                .collect::<Result<_, _>>()?;
            let feature_sets = ablation_feature_sets(&config);
            if feature_sets.is_empty() {
                return Err(CliError::config(
                    Stage::Evaluate,
                    "the ablation requires the FR or AFE family",
                ));
            }
            let options = AblationOptions {
                undersample_rate: config.windows.undersample_rate,
                seed: config.seed,
                grids: config.model_grids()?,
                cv_folds: config.models.cv_folds,
            };
            let report =
                ablation_matrix(&bundles, &config.model_families()?, &feature_sets, &options)
                    .map_err(|e| CliError::from_core(Stage::Evaluate, e))?;
            let reports = layout.reports_dir();
            io::write_auc_matrix(&report, &reports.join("auc_matrix.csv"))?;
            io::write_hybrid_deltas(&report, &reports.join("hybrid_deltas.csv"))?;
            io::write_drift_report(&drift_report(&report), &reports.join("drift_report.csv"))?;
            io::emit_roc_csv(&report, &reports)?;
            log.line(Stage::Evaluate, format!("{} cells", report.cells.len()));
        }
    }
    // single-stage invocations share the run manifest for traceability
    log.line(Stage::Report, format!("config {}", config_hash(&config)?));
    guard.mark_complete()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
