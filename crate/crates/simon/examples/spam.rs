//! Spam/ham classification by casting each email to a column of
//! sentences (one sentence per cell, up to 500 cells, 100 characters
//! per cell). Point it at two directories of plain-text emails:
//!
//!   cargo run --release -p simon --example spam -- \
//!       --ham corpus/easy_ham --spam corpus/spam [--limit 1500] \
//!       [--epochs 20] [--seed 7] [--workers N] [--out spam.simon]
//!
//! This is a long-running job on full public corpora; --limit caps the
//! number of emails taken per class for smaller budgets.

use std::path::{Path, PathBuf};
use std::process::exit;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use simon::encode::build_alphabet;
use simon::eval::{binary_accuracy, precision_recall_f1};
use simon::ingest::{cast_documents_to_table, SentenceSplitter};
use simon::model::{
    build_model, evaluate_model, fit, save_model, FitOptions, LabelSpace, LabeledDataset,
    LabeledExample, ModelConfig, Split,
};
use simon::tensor::optim::AdamParams;

struct Args {
    ham: PathBuf,
    spam: PathBuf,
    limit: usize,
    epochs: usize,
    seed: u64,
    workers: usize,
    out: PathBuf,
}

fn usage() -> ! {
    eprintln!(
        "usage: spam --ham DIR --spam DIR [--limit N] [--epochs N] [--seed N] \
         [--workers N] [--out FILE]"
    );
    exit(2);
}

fn parse_args() -> Args {
    let mut ham = None;
    let mut spam = None;
    let mut limit = usize::MAX;
    let mut epochs = 20;
    let mut seed = 7;
    let mut workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut out = PathBuf::from("spam.simon");
    let mut it = std::env::args().skip(1);
    while let Some(flag) = it.next() {
        let mut value = || it.next().unwrap_or_else(|| usage());
        match flag.as_str() {
            "--ham" => ham = Some(PathBuf::from(value())),
            "--spam" => spam = Some(PathBuf::from(value())),
            "--limit" => limit = value().parse().unwrap_or_else(|_| usage()),
            "--epochs" => epochs = value().parse().unwrap_or_else(|_| usage()),
            "--seed" => seed = value().parse().unwrap_or_else(|_| usage()),
            "--workers" => workers = value().parse().unwrap_or_else(|_| usage()),
            "--out" => out = PathBuf::from(value()),
            _ => usage(),
        }
    }
    match (ham, spam) {
        (Some(ham), Some(spam)) => Args { ham, spam, limit, epochs, seed, workers, out },
        _ => usage(),
    }
}

/// Every regular file under `dir`, recursively, in sorted order so one
/// seed reproduces one run.
fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> =
        std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Read an email file as lossy UTF-8 and drop the header block
/// (everything before the first blank line), keeping only the body.
fn read_body(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8_lossy(&bytes).replace("\r\n", "\n");
    Ok(match text.split_once("\n\n") {
        Some((_, body)) => body.to_string(),
        None => text,
    })
}

fn load_class(dir: &Path, limit: usize) -> Vec<String> {
    let mut files = Vec::new();
    if let Err(e) = collect_files(dir, &mut files) {
        eprintln!("error: cannot read {}: {e}", dir.display());
        exit(1);
    }
    files.truncate(limit);
    files
        .iter()
        .filter_map(|path| match read_body(path) {
            Ok(body) => Some(body),
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", path.display());
                None
            }
        })
        .collect()
}

fn main() {
    let args = parse_args();
    let config = ModelConfig { max_len: 100, max_cells: 500, ..ModelConfig::default() };
    let splitter = SentenceSplitter::default();

    let mut examples = Vec::new();
    let labels =
        LabelSpace::new(vec!["ham".to_string(), "spam".to_string()]).expect("two labels");
    for (dir, target) in [(&args.ham, vec![1.0, 0.0]), (&args.spam, vec![0.0, 1.0])] {
        let documents = load_class(dir, args.limit);
        let cast = cast_documents_to_table(&documents, &splitter, config.max_cells, config.max_len)
            .expect("casting parameters are fixed above");
        if !cast.skipped.is_empty() {
            eprintln!("warning: {} empty documents in {}", cast.skipped.len(), dir.display());
        }
        println!("{}: {} emails cast to columns", dir.display(), cast.columns.len());
        for column in cast.columns {
            examples.push(LabeledExample { column, targets: target.clone(), split: Split::Train });
        }
    }
    if examples.is_empty() {
        eprintln!("error: no emails found");
        exit(1);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut dataset = LabeledDataset::new(labels.clone(), examples).expect("valid targets");
    dataset.assign_splits(&mut rng);

    let mut model =
        build_model(config, build_alphabet(), labels, &mut rng).expect("default chain is valid");
    let opts = FitOptions {
        epochs: args.epochs,
        batch_size: 64,
        patience: Some(5),
        workers: args.workers,
        adam: AdamParams::default(),
    };
    let start = Instant::now();
    let history = fit(&mut model, &dataset, &opts, &mut rng).expect("training");
    println!(
        "trained {} epochs in {:.0}s (best epoch {}, best val accuracy {:.4})",
        history.epochs.len(),
        start.elapsed().as_secs_f64(),
        history.best_epoch,
        history.best_val_accuracy
    );

    let evaluation = evaluate_model(&model, &dataset, Split::Test, args.seed, args.workers)
        .expect("test split evaluation");
    let probabilities: Vec<Vec<f32>> =
        evaluation.outputs.iter().map(|(_, p)| p.clone()).collect();
    let targets: Vec<Vec<f32>> = evaluation
        .outputs
        .iter()
        .map(|(i, _)| dataset.examples[*i].targets.clone())
        .collect();
    let correct = probabilities
        .iter()
        .zip(&targets)
        .filter(|(p, t)| (p[1] > p[0]) == (t[1] > t[0]))
        .count();
    let (precision, recall, f1) = precision_recall_f1(&probabilities, &targets).expect("metrics");
    println!(
        "test accuracy {:.4} ({correct}/{} emails)",
        correct as f64 / targets.len() as f64,
        targets.len()
    );
    println!(
        "test binary accuracy {:.4}, precision {precision:.4}, recall {recall:.4}, f1 {f1:.4}",
        binary_accuracy(&probabilities, &targets).expect("metrics")
    );

    save_model(&model, &args.out).expect("model serialization");
    println!("saved model to {}", args.out.display());
}
