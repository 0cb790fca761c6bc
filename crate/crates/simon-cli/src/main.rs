//! Command-line entry point: synthetic corpus generation, training,
//! transfer, prediction, and evaluation as reproducible seeded runs.
//!
//! Exit codes: 0 success, 1 operational failure, 2 usage or
//! configuration error. Identical flags and seed give byte-identical
//! primary outputs.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use simon::datagen::{
    apply_stat_heuristics, generate_base_column, generate_base_column_pooled, generate_geo_column,
    BaseClass, GeoClass, CATEGORICAL_LABEL, ORDINAL_LABEL,
};
use simon::encode::build_alphabet;
use simon::error::{Result, SimonError};
use simon::eval::{
    apply_override, baseline_dtype_annotate, render_metric_text,
    render_similarity_text, render_text_report, similarity_score, summarize_metrics,
    write_roc_csv, AnnotationReport, ColumnAnnotation, MetricSummary, OverridePolicy,
    SimilarityReport,
};
use simon::ingest::{load_geonames, read_csv_columns, save_corpus, DatasetManifest, GeoTable};
use simon::model::{
    build_model, evaluate_model, fit, load_model, save_model, select_labels, FitOptions,
    LabelSpace, LabeledDataset, LabeledExample, ModelConfig, Split,
};
use simon::tensor::optim::AdamParams;

const ENV_WORKERS: &str = "SIMON_WORKERS";

#[derive(Parser)]
#[command(name = "simon", version, about = "Semantic type inference for tabular text columns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Random seed; recorded in run output for replayability.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Parallel workers. Default: SIMON_WORKERS, else logical CPUs.
    /// The value shapes batch arithmetic, so results depend on it (and
    /// only on it, never on machine load).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Small document dimension for fast runs (max_cells 20).
    Desk,
    /// Full-scale architecture (max_cells 500).
    Full,
}

impl Profile {
    fn config(self) -> ModelConfig {
        match self {
            Profile::Desk => ModelConfig::desk(),
            Profile::Full => ModelConfig::full(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Validate,
    Test,
}

impl SplitArg {
    fn split(self) -> Split {
        match self {
            SplitArg::Train => Split::Train,
            SplitArg::Validate => Split::Validate,
            SplitArg::Test => Split::Test,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Validate => "validate",
            SplitArg::Test => "test",
        }
    }
}

#[derive(Args)]
struct TrainingFlags {
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Epochs without validation improvement before stopping early.
    /// 0 disables early stopping. Default 10.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    /// Per-epoch metrics JSON (default: next to the model file).
    #[arg(long)]
    history_out: Option<PathBuf>,
}

impl TrainingFlags {
    fn fit_options(&self, workers: usize) -> FitOptions {
        FitOptions {
            epochs: self.epochs,
            batch_size: self.batch_size,
            patience: match self.patience {
                Some(0) => None,
                Some(p) => Some(p),
                None => Some(10),
            },
            workers,
            adam: AdamParams { learning_rate: self.learning_rate, ..AdamParams::default() },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled corpus: one CSV per column plus a
    /// manifest with labels and split assignments.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated class names (base and geographic).
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "address,boolean,datetime,email,float,int,phone,text,uri"
        )]
        classes: Vec<String>,
        /// Columns per class.
        #[arg(long, default_value_t = 10)]
        columns: usize,
        /// Cells per column.
        #[arg(long, default_value_t = 100)]
        cells: usize,
        /// Draw each column's cells from a pool of this many values,
        /// producing low-cardinality (categorical) columns.
        #[arg(long)]
        pool: Option<usize>,
        /// Tab-separated place table, required for geographic classes.
        #[arg(long)]
        geonames: Option<PathBuf>,
        /// Corpus directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from scratch on a corpus manifest.
    Train {
        #[command(flatten)]
        common: Common,
        /// Corpus manifest JSON.
        #[arg(long)]
        data: PathBuf,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Profile::Desk)]
        profile: Profile,
        #[command(flatten)]
        training: TrainingFlags,
    },
    /// Retrain only the decision head of an existing model against a
    /// new label set; the encoder layers stay frozen.
    Transfer {
        #[command(flatten)]
        common: Common,
        /// Base model file.
        #[arg(long)]
        model: PathBuf,
        /// Corpus manifest carrying the new label set.
        #[arg(long)]
        data: PathBuf,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        training: TrainingFlags,
    },
    /// Annotate the columns of a CSV file.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// CSV file to annotate.
        #[arg(long)]
        data: PathBuf,
        /// Treat the first row as data rather than a header.
        #[arg(long)]
        no_header: bool,
        /// Replace categorical/ordinal decisions with statistics
        /// computed over each entire column.
        #[arg(long)]
        override_categorical: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Report file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a model against a labeled corpus manifest.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Corpus manifest JSON; its labels must match the model's.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write ROC points as two-column CSV.
        #[arg(long)]
        roc_out: Option<PathBuf>,
        /// ROC threshold steps.
        #[arg(long, default_value_t = 100)]
        roc_steps: usize,
        /// Report file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                SimonError::Usage(_) | SimonError::InvalidParameter(_) | SimonError::Config(_) => 2,
                _ => 1,
            })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { common, classes, columns, cells, pool, geonames, out } => {
            cmd_generate(&common, &classes, columns, cells, pool, geonames.as_deref(), &out)
        }
        Command::Train { common, data, out, profile, training } => {
            cmd_train(&common, &data, &out, profile, &training)
        }
        Command::Transfer { common, model, data, out, training } => {
            cmd_transfer(&common, &model, &data, &out, &training)
        }
        Command::Predict { common, model, data, no_header, override_categorical, format, out } => {
            cmd_predict(&common, &model, &data, no_header, override_categorical, format, out.as_deref())
        }
        Command::Evaluate { common, model, data, split, format, roc_out, roc_steps, out } => {
            cmd_evaluate(&common, &model, &data, split, format, roc_out.as_deref(), roc_steps, out.as_deref())
        }
    }
}

fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(ENV_WORKERS).ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1)
}

enum AnyClass {
    Base(BaseClass),
    Geo(GeoClass),
}

impl AnyClass {
    fn name(&self) -> &'static str {
        match self {
            AnyClass::Base(c) => c.name(),
            AnyClass::Geo(c) => c.name(),
        }
    }
}

fn resolve_class(name: &str) -> Result<AnyClass> {
    if let Some(c) = BaseClass::ALL.iter().find(|c| c.name() == name) {
        return Ok(AnyClass::Base(*c));
    }
    if let Some(c) = GeoClass::ALL.iter().find(|c| c.name() == name) {
        return Ok(AnyClass::Geo(*c));
    }
    let mut valid: Vec<&str> = BaseClass::ALL.iter().map(|c| c.name()).collect();
    valid.extend(GeoClass::ALL.iter().map(|c| c.name()));
    Err(SimonError::Usage(format!("unknown class '{name}'; valid classes: {}", valid.join(", "))))
}

fn load_manifest_dataset(path: &Path) -> Result<(DatasetManifest, LabeledDataset)> {
    let manifest = DatasetManifest::load(path)
        .map_err(|e| SimonError::Usage(format!("cannot load manifest '{}': {e}", path.display())))?;
    let root = path.parent().unwrap_or_else(|| Path::new("."));
    let dataset = manifest.materialize(root)?;
    Ok((manifest, dataset))
}

fn load_model_usage(path: &Path) -> Result<simon::model::SimonModel> {
    load_model(path)
        .map_err(|e| SimonError::Usage(format!("cannot load model '{}': {e}", path.display())))
}

fn write_history(history: &simon::model::TrainingHistory, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(history)
        .map_err(|e| SimonError::Format(format!("history serialization: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

fn default_history_path(model_out: &Path) -> PathBuf {
    let mut name = model_out.file_name().unwrap_or_default().to_os_string();
    name.push(".history.json");
    model_out.with_file_name(name)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_generate(
    common: &Common,
    class_names: &[String],
    columns: usize,
    cells: usize,
    pool: Option<usize>,
    geonames: Option<&Path>,
    out: &Path,
) -> Result<()> {
    if columns == 0 || cells == 0 {
        return Err(SimonError::Usage("--columns and --cells must be at least 1".into()));
    }
    if let Some(0) = pool {
        return Err(SimonError::Usage("--pool must be at least 1".into()));
    }
    let mut seen = BTreeSet::new();
    let mut classes = Vec::new();
    for name in class_names {
        if seen.insert(name.as_str()) {
            classes.push(resolve_class(name)?);
        }
    }
    if classes.is_empty() {
        return Err(SimonError::Usage("no classes requested".into()));
    }
    let geo_table: Option<GeoTable> = if classes.iter().any(|c| matches!(c, AnyClass::Geo(_))) {
        let path = geonames.ok_or_else(|| {
            SimonError::Usage("geographic classes need --geonames <place table>".into())
        })?;
        Some(load_geonames(path)?)
    } else {
        None
    };
    fs::create_dir_all(out).map_err(|e| {
        SimonError::Usage(format!("cannot create output directory '{}': {e}", out.display()))
    })?;

    let mut label_names: Vec<String> = classes.iter().map(|c| c.name().to_string()).collect();
    label_names.push(CATEGORICAL_LABEL.to_string());
    label_names.push(ORDINAL_LABEL.to_string());
    let labels = LabelSpace::new(label_names.clone())?;

    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let mut examples = Vec::with_capacity(classes.len() * columns);
    for class in &classes {
        for i in 0..columns {
            let mut column = match (class, pool) {
                (AnyClass::Base(c), None) => generate_base_column(*c, cells, &mut rng),
                (AnyClass::Base(c), Some(p)) => {
                    generate_base_column_pooled(*c, cells, p, &mut rng)
                }
                (AnyClass::Geo(c), _) => {
                    generate_geo_column(*c, cells, geo_table.as_ref().unwrap(), &mut rng)?
                }
            };
            column.source_name = format!("{}_{i:04}", class.name());
            let mut column_labels = BTreeSet::new();
            column_labels.insert(class.name().to_string());
            let column_labels = apply_stat_heuristics(&column, &column_labels);
            let targets =
                label_names.iter().map(|n| if column_labels.contains(n) { 1.0 } else { 0.0 }).collect();
            examples.push(LabeledExample { column, targets, split: Split::Train });
        }
    }
    let mut dataset = LabeledDataset::new(labels, examples)?;
    dataset.assign_splits(&mut rng);
    save_corpus(out, "synthetic", &dataset)?;
    println!(
        "wrote {} columns across {} classes to {} (seed {})",
        dataset.examples.len(),
        classes.len(),
        out.display(),
        common.seed
    );
    Ok(())
}

fn cmd_train(
    common: &Common,
    data: &Path,
    out: &Path,
    profile: Profile,
    training: &TrainingFlags,
) -> Result<()> {
    let (_, dataset) = load_manifest_dataset(data)?;
    let workers = resolve_workers(common.workers);
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let mut model = build_model(profile.config(), build_alphabet(), dataset.labels.clone(), &mut rng)?;
    let history = fit(&mut model, &dataset, &training.fit_options(workers), &mut rng)?;
    save_model(&model, out)?;
    let history_path =
        training.history_out.clone().unwrap_or_else(|| default_history_path(out));
    write_history(&history, &history_path)?;
    println!(
        "trained {} epochs (best validation accuracy {:.4} at epoch {}), saved {} (seed {})",
        history.epochs.len(),
        history.best_val_accuracy,
        history.best_epoch,
        out.display(),
        common.seed
    );
    Ok(())
}

fn cmd_transfer(
    common: &Common,
    model_path: &Path,
    data: &Path,
    out: &Path,
    training: &TrainingFlags,
) -> Result<()> {
    let base = load_model_usage(model_path)?;
    let (_, dataset) = load_manifest_dataset(data)?;
    let workers = resolve_workers(common.workers);
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let mut model = base.transfer_head(dataset.labels.clone(), &mut rng)?;
    let history = fit(&mut model, &dataset, &training.fit_options(workers), &mut rng)?;
    save_model(&model, out)?;
    let history_path =
        training.history_out.clone().unwrap_or_else(|| default_history_path(out));
    write_history(&history, &history_path)?;
    println!(
        "transferred to {} labels with frozen encoders, {} epochs (best validation accuracy {:.4}), saved {} (seed {})",
        dataset.labels.n_labels(),
        history.epochs.len(),
        history.best_val_accuracy,
        out.display(),
        common.seed
    );
    Ok(())
}

fn cmd_predict(
    common: &Common,
    model_path: &Path,
    data: &Path,
    no_header: bool,
    override_categorical: bool,
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let model = load_model_usage(model_path)?;
    let columns = read_csv_columns(data, !no_header)?;
    let mut kept = Vec::new();
    for column in columns {
        if column.cells.is_empty() {
            eprintln!("skipped column '{}': no rows", column.source_name);
        } else {
            kept.push(column);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let names = model.labels.names();
    let mut annotations = Vec::with_capacity(kept.len());
    for column in &kept {
        let prediction = model.predict_labels(column, &mut rng, true)?;
        annotations.push(ColumnAnnotation {
            column: column.source_name.clone(),
            probabilities: names
                .iter()
                .cloned()
                .zip(prediction.probabilities.iter().copied())
                .collect(),
            predicted: prediction.labels,
            truth: None,
            overridden: vec![],
        });
    }
    let report =
        AnnotationReport { threshold: model.config.p_threshold as f32, columns: annotations };
    let policy = if override_categorical { OverridePolicy::On } else { OverridePolicy::Off };
    let report = apply_override(&report, &kept, policy)?;
    let text = match format {
        Format::Text => format!("{}seed {}\n", render_text_report(&report), common.seed),
        Format::Json => {
            let mut value = serde_json::to_value(&report)
                .map_err(|e| SimonError::Format(format!("report serialization: {e}")))?;
            value["seed"] = common.seed.into();
            serde_json::to_string_pretty(&value)
                .map_err(|e| SimonError::Format(format!("report serialization: {e}")))?
                + "\n"
        }
    };
    emit(out, &text)
}

#[derive(Serialize)]
struct EvaluateOutput {
    seed: u64,
    split: &'static str,
    metrics: MetricSummary,
    model_similarity: SimilarityReport,
    baseline_similarity: SimilarityReport,
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    common: &Common,
    model_path: &Path,
    data: &Path,
    split: SplitArg,
    format: Format,
    roc_out: Option<&Path>,
    roc_steps: usize,
    out: Option<&Path>,
) -> Result<()> {
    let model = load_model_usage(model_path)?;
    let (_, dataset) = load_manifest_dataset(data)?;
    let workers = resolve_workers(common.workers);
    let evaluation = evaluate_model(&model, &dataset, split.split(), common.seed, workers)?;
    if evaluation.outputs.is_empty() {
        return Err(SimonError::Data(format!("the {} split has no examples", split.name())));
    }
    let probabilities: Vec<Vec<f32>> =
        evaluation.outputs.iter().map(|(_, p)| p.clone()).collect();
    let targets: Vec<Vec<f32>> = evaluation
        .outputs
        .iter()
        .map(|(i, _)| dataset.examples[*i].targets.clone())
        .collect();
    let threshold = model.config.p_threshold;
    let metrics = summarize_metrics(&probabilities, &targets, threshold as f32, roc_steps)?;
    if let Some(path) = roc_out {
        let file = fs::File::create(path)?;
        write_roc_csv(file, &metrics.roc_points)?;
    }

    let names = model.labels.names();
    let mut model_annotations = Vec::new();
    let mut baseline_annotations = Vec::new();
    let mut manual = Vec::new();
    for ((index, probs), targets_row) in evaluation.outputs.iter().zip(&targets) {
        let column = &dataset.examples[*index].column;
        // The first true label stands in for the single manual
        // annotation of the similarity comparison.
        let Some(manual_label) = targets_row
            .iter()
            .position(|&t| t >= 0.5)
            .map(|i| names[i].clone())
        else {
            continue;
        };
        let (picked, _) = select_labels(probs, threshold, true);
        let predicted: Vec<String> = picked.iter().map(|&i| names[i].clone()).collect();
        model_annotations.push((column.source_name.clone(), predicted));
        baseline_annotations.push((
            column.source_name.clone(),
            vec![baseline_dtype_annotate(column).to_string()],
        ));
        manual.push((column.source_name.clone(), manual_label));
    }
    let model_similarity = similarity_score(&model_annotations, &manual)?;
    let baseline_similarity = similarity_score(&baseline_annotations, &manual)?;

    let output = EvaluateOutput {
        seed: common.seed,
        split: split.name(),
        metrics,
        model_similarity,
        baseline_similarity,
    };
    let text = match format {
        Format::Text => {
            let mut t = format!("seed {}\nsplit {}\n", output.seed, output.split);
            t.push_str(&render_metric_text(&output.metrics));
            t.push_str("model vs manual annotations:\n");
            t.push_str(&render_similarity_text(&output.model_similarity));
            t.push_str("baseline dtypes vs manual annotations:\n");
            t.push_str(&render_similarity_text(&output.baseline_similarity));
            t
        }
        Format::Json => {
            serde_json::to_string_pretty(&output)
                .map_err(|e| SimonError::Format(format!("report serialization: {e}")))?
                + "\n"
        }
    };
    emit(out, &text)
}
