//! Mini-batch training: Adam on multilabel BCE with a best-validation
//! checkpoint. Deterministic under a seed for any fixed worker count:
//! cell sampling, shuffling, and dropout each draw from their own
//! counter-derived streams, and batch gradients are reduced in a fixed
//! chunk order no matter how chunks are scheduled.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{LabeledDataset, SimonModel, Split};
use crate::encode::encode_column;
use crate::error::{Result, SimonError};
use crate::tensor::optim::{Adam, AdamParams};
use crate::tensor::tape::Tape;
use crate::tensor::Tensor;
use crate::Mode;

const TAG_ENCODE: u64 = 1;
const TAG_SHUFFLE: u64 = 2;
const TAG_DROPOUT: u64 = 3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for an independent stream identified by (tag, index).
fn stream_seed(base: u64, tag: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(base) ^ tag) ^ index)
}

/// Knobs for one training run.
#[derive(Clone, Debug)]
pub struct FitOptions {
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without any validation improvement
    /// (accuracy or loss). `None` disables early stopping.
    pub patience: Option<usize>,
    /// Number of gradient chunks per batch. The chunking is part of the
    /// arithmetic, so results depend on this value but not on how many
    /// threads actually run.
    pub workers: usize,
    pub adam: AdamParams,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            epochs: 30,
            batch_size: 64,
            patience: Some(10),
            workers: 1,
            adam: AdamParams::default(),
        }
    }
}

/// Metrics for one epoch. Train numbers come from the training pass
/// itself (dropout active); validation numbers from a deterministic
/// inference pass.
#[derive(Clone, Debug, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
}

/// Loss, binary accuracy, and per-example probabilities over one split.
#[derive(Clone, Debug)]
pub struct SplitEvaluation {
    pub loss: f64,
    pub accuracy: f64,
    /// (dataset index, probabilities) in dataset order.
    pub outputs: Vec<(usize, Vec<f32>)>,
}

/// Train `model` on the dataset's train split, checkpointing on best
/// validation binary accuracy (ties keep the earliest epoch). The
/// checkpointed parameters are restored into `model` before returning.
///
/// A dataset with an empty validation split mirrors the training
/// metrics for checkpoint and patience decisions.
pub fn fit<R: Rng>(
    model: &mut SimonModel,
    dataset: &LabeledDataset,
    opts: &FitOptions,
    rng: &mut R,
) -> Result<TrainingHistory> {
    fit_with_callback(model, dataset, opts, rng, |_| true)
}

/// [`fit`] with a per-epoch callback; returning `false` stops training
/// after the current epoch (the best checkpoint is still restored).
pub fn fit_with_callback<R, F>(
    model: &mut SimonModel,
    dataset: &LabeledDataset,
    opts: &FitOptions,
    rng: &mut R,
    mut keep_going: F,
) -> Result<TrainingHistory>
where
    R: Rng,
    F: FnMut(&EpochStats) -> bool,
{
    if dataset.labels != model.labels {
        return Err(SimonError::Usage(format!(
            "dataset labels {:?} do not match model labels {:?}",
            dataset.labels.names(),
            model.labels.names()
        )));
    }
    if opts.epochs == 0 || opts.batch_size == 0 || opts.workers == 0 {
        return Err(SimonError::Usage(
            "epochs, batch_size, and workers must all be >= 1".into(),
        ));
    }
    let train_idx = dataset.indices_of(Split::Train);
    if train_idx.is_empty() {
        return Err(SimonError::DegenerateInput("no training examples".into()));
    }
    let val_idx = dataset.indices_of(Split::Validate);
    let base_seed: u64 = rng.gen();

    let targets: Vec<Tensor<f32>> = dataset
        .examples
        .iter()
        .map(|e| Tensor::new(vec![e.targets.len()], e.targets.clone()))
        .collect::<Result<Vec<_>>>()?;

    let plan = if model.encoders_frozen() {
        // Frozen encoders are deterministic feature extractors, so each
        // example's head input is computed once up front.
        let feats = map_indices(&(0..dataset.examples.len()).collect::<Vec<_>>(), opts.workers, |i| {
            model.head_input_features(&encode_example(model, dataset, base_seed, i)?)
        })?;
        Plan::Frozen { feats }
    } else {
        Plan::Full
    };

    let mut adam = Adam::new(opts.adam, model.parameters());
    let mut history: Vec<EpochStats> = Vec::with_capacity(opts.epochs);
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut snapshot = None;
    let mut stale = 0usize;
    let mut stopped_early = false;

    for epoch in 0..opts.epochs {
        let mut order = train_idx.clone();
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(stream_seed(base_seed, TAG_SHUFFLE, epoch as u64));
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut total = 0usize;
        for batch in order.chunks(opts.batch_size) {
            let outs = map_chunks(batch, opts.workers, |chunk| {
                step_chunk(model, dataset, &targets, &plan, chunk, epoch, base_seed)
            })?;
            let mut batch_grads: Vec<Option<Vec<f32>>> = grad_template(model);
            for out in outs {
                loss_sum += out.loss_sum;
                correct += out.correct;
                total += out.total;
                for (acc, g) in batch_grads.iter_mut().zip(out.grads) {
                    if let (Some(acc), Some(g)) = (acc, g) {
                        for (a, b) in acc.iter_mut().zip(g) {
                            *a += b;
                        }
                    }
                }
            }
            let scale = 1.0 / batch.len() as f32;
            for (param, g) in model.parameters_mut().iter_mut().zip(batch_grads) {
                if let Some(mut g) = g {
                    for v in &mut g {
                        *v *= scale;
                    }
                    param.value.set_grad(g);
                }
            }
            adam.update(model.parameters_mut())?;
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let train_accuracy = correct as f64 / total.max(1) as f64;

        let (val_loss, val_accuracy) = if val_idx.is_empty() {
            (train_loss, train_accuracy)
        } else {
            evaluate_indices(model, dataset, &targets, &plan, &val_idx, base_seed, opts.workers)?
        };

        let improved = val_accuracy > best_acc || val_loss < best_loss;
        if val_accuracy > best_acc {
            best_acc = val_accuracy;
            best_epoch = epoch;
            snapshot = Some(model.parameters().to_vec());
        }
        best_loss = best_loss.min(val_loss);
        stale = if improved { 0 } else { stale + 1 };

        let stats = EpochStats { epoch, train_loss, train_accuracy, val_loss, val_accuracy };
        history.push(stats);
        if !keep_going(history.last().expect("just pushed")) {
            stopped_early = true;
            break;
        }
        if let Some(patience) = opts.patience {
            if stale >= patience && epoch + 1 < opts.epochs {
                stopped_early = true;
                break;
            }
        }
    }

    if let Some(best) = snapshot {
        model.set_parameters(best);
    }
    Ok(TrainingHistory { epochs: history, best_epoch, best_val_accuracy: best_acc, stopped_early })
}

/// Deterministic inference metrics over one split. Cell sampling draws
/// from per-example streams derived from `seed`.
pub fn evaluate_model(
    model: &SimonModel,
    dataset: &LabeledDataset,
    split: Split,
    seed: u64,
    workers: usize,
) -> Result<SplitEvaluation> {
    if dataset.labels != model.labels {
        return Err(SimonError::Usage(format!(
            "dataset labels {:?} do not match model labels {:?}",
            dataset.labels.names(),
            model.labels.names()
        )));
    }
    let idxs = dataset.indices_of(split);
    if idxs.is_empty() {
        return Err(SimonError::DegenerateInput(format!("split {split:?} has no examples")));
    }
    let targets: Vec<Tensor<f32>> = dataset
        .examples
        .iter()
        .map(|e| Tensor::new(vec![e.targets.len()], e.targets.clone()))
        .collect::<Result<Vec<_>>>()?;
    let probs = map_indices(&idxs, workers.max(1), |i| {
        let enc = encode_example(model, dataset, seed, i)?;
        Ok(model.infer(&enc)?.data().to_vec())
    })?;
    let mut loss_sum = 0.0;
    let mut correct = 0;
    let mut total = 0;
    let mut outputs = Vec::with_capacity(idxs.len());
    for (&i, p) in idxs.iter().zip(probs) {
        loss_sum += bce_value(&p, &targets[i])?;
        let (c, t) = count_hits(&p, targets[i].data(), model.config.p_threshold);
        correct += c;
        total += t;
        outputs.push((i, p));
    }
    Ok(SplitEvaluation {
        loss: loss_sum / idxs.len() as f64,
        accuracy: correct as f64 / total.max(1) as f64,
        outputs,
    })
}

enum Plan {
    Full,
    Frozen { feats: Vec<Tensor<f32>> },
}

struct ChunkOut {
    grads: Vec<Option<Vec<f32>>>,
    loss_sum: f64,
    correct: usize,
    total: usize,
}

fn grad_template(model: &SimonModel) -> Vec<Option<Vec<f32>>> {
    model
        .parameters()
        .iter()
        .map(|p| p.trainable.then(|| vec![0.0f32; p.value.numel()]))
        .collect()
}

fn encode_example(
    model: &SimonModel,
    dataset: &LabeledDataset,
    base_seed: u64,
    idx: usize,
) -> Result<Tensor<f32>> {
    let mut erng = ChaCha8Rng::seed_from_u64(stream_seed(base_seed, TAG_ENCODE, idx as u64));
    encode_column(
        &dataset.examples[idx].column,
        &model.alphabet,
        model.config.max_len,
        model.config.max_cells,
        &mut erng,
    )
}

/// Forward/backward over one contiguous chunk of a batch, returning the
/// chunk's summed gradients and running metrics.
fn step_chunk(
    model: &SimonModel,
    dataset: &LabeledDataset,
    targets: &[Tensor<f32>],
    plan: &Plan,
    chunk: &[usize],
    epoch: usize,
    base_seed: u64,
) -> Result<ChunkOut> {
    let n = dataset.examples.len() as u64;
    let mut out = ChunkOut { grads: grad_template(model), loss_sum: 0.0, correct: 0, total: 0 };
    for &ex in chunk {
        let mut drng = ChaCha8Rng::seed_from_u64(stream_seed(
            base_seed,
            TAG_DROPOUT,
            epoch as u64 * n + ex as u64,
        ));
        let mut tape = Tape::<f32>::new();
        let (probs, harvest): (_, Vec<(usize, crate::tensor::tape::Var)>) = match plan {
            Plan::Full => {
                let enc = encode_example(model, dataset, base_seed, ex)?;
                let tp = model.insert_leaves(&mut tape, &[]);
                let probs = model.forward_graph(&mut tape, &tp, &enc, Mode::Train, &mut drng)?;
                let harvest = tp
                    .vars
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| model.parameters()[*i].trainable)
                    .map(|(i, &v)| (i, v))
                    .collect();
                (probs, harvest)
            }
            Plan::Frozen { feats } => {
                let hw_idx = model.head_weight_index();
                let f = tape.leaf(feats[ex].clone());
                let hw = tape.leaf(model.parameters()[hw_idx].value.clone());
                let hb = tape.leaf(model.parameters()[hw_idx + 1].value.clone());
                let probs = model.head_graph(&mut tape, f, hw, hb, Mode::Train, &mut drng)?;
                (probs, vec![(hw_idx, hw), (hw_idx + 1, hb)])
            }
        };
        let loss = tape.bce_multilabel_loss(probs, &targets[ex])?;
        tape.backward(loss)?;
        out.loss_sum += f64::from(tape.value(loss).item());
        let (c, t) = count_hits(tape.value(probs).data(), targets[ex].data(), model.config.p_threshold);
        out.correct += c;
        out.total += t;
        for (i, var) in harvest {
            let grad = tape.grad(var).expect("trainable leaf feeds the loss");
            let acc = out.grads[i].as_mut().expect("template has a slot per trainable");
            for (a, b) in acc.iter_mut().zip(grad) {
                *a += *b;
            }
        }
    }
    Ok(out)
}

fn evaluate_indices(
    model: &SimonModel,
    dataset: &LabeledDataset,
    targets: &[Tensor<f32>],
    plan: &Plan,
    idxs: &[usize],
    base_seed: u64,
    workers: usize,
) -> Result<(f64, f64)> {
    let probs = map_indices(idxs, workers, |i| match plan {
        Plan::Full => {
            let enc = encode_example(model, dataset, base_seed, i)?;
            Ok(model.infer(&enc)?.data().to_vec())
        }
        Plan::Frozen { feats } => {
            let mut tape = Tape::<f32>::new();
            let hw_idx = model.head_weight_index();
            let f = tape.leaf(feats[i].clone());
            let hw = tape.leaf(model.parameters()[hw_idx].value.clone());
            let hb = tape.leaf(model.parameters()[hw_idx + 1].value.clone());
            let mut rng = rand::rngs::mock::StepRng::new(0, 1);
            let p = model.head_graph(&mut tape, f, hw, hb, Mode::Inference, &mut rng)?;
            Ok(tape.value(p).data().to_vec())
        }
    })?;
    let mut loss_sum = 0.0;
    let mut correct = 0;
    let mut total = 0;
    for (&i, p) in idxs.iter().zip(&probs) {
        loss_sum += bce_value(p, &targets[i])?;
        let (c, t) = count_hits(p, targets[i].data(), model.config.p_threshold);
        correct += c;
        total += t;
    }
    Ok((loss_sum / idxs.len() as f64, correct as f64 / total.max(1) as f64))
}

/// Loss value of already-computed probabilities, via the same op the
/// training graph uses.
fn bce_value(probs: &[f32], targets: &Tensor<f32>) -> Result<f64> {
    let mut tape = Tape::<f32>::new();
    let p = tape.leaf(Tensor::new(vec![probs.len()], probs.to_vec())?);
    let l = tape.bce_multilabel_loss(p, targets)?;
    Ok(f64::from(tape.value(l).item()))
}

/// Elementwise binary hits at the decision threshold.
fn count_hits(probs: &[f32], targets: &[f32], threshold: f64) -> (usize, usize) {
    let correct = probs
        .iter()
        .zip(targets)
        .filter(|(p, t)| (f64::from(**p) > threshold) == (**t == 1.0))
        .count();
    (correct, probs.len())
}

/// Contiguous near-equal chunk boundaries: a pure function of the
/// lengths, independent of scheduling.
fn chunk_ranges(len: usize, workers: usize) -> Vec<std::ops::Range<usize>> {
    let w = workers.clamp(1, len.max(1));
    let base = len / w;
    let extra = len % w;
    let mut ranges = Vec::with_capacity(w);
    let mut start = 0;
    for i in 0..w {
        let size = base + usize::from(i < extra);
        if size == 0 {
            continue;
        }
        ranges.push(start..start + size);
        start += size;
    }
    ranges
}

/// Apply `f` to chunks of `items`, in parallel when workers > 1, and
/// return the per-chunk results in chunk order.
fn map_chunks<T, F>(items: &[usize], workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[usize]) -> Result<T> + Sync,
{
    let ranges = chunk_ranges(items.len(), workers);
    if workers <= 1 {
        ranges.into_iter().map(|r| f(&items[r])).collect()
    } else {
        ranges.into_par_iter().map(|r| f(&items[r])).collect()
    }
}

/// Apply `f` to each index, chunk-parallel, preserving input order.
fn map_indices<T, F>(idxs: &[usize], workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let per_chunk = map_chunks(idxs, workers, |chunk| {
        chunk.iter().map(|&i| f(i)).collect::<Result<Vec<T>>>()
    })?;
    Ok(per_chunk.into_iter().flatten().collect())
}
