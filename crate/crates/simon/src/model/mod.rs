//! The two-stage column classifier.
//!
//! A sentence encoder turns each one-hot cell [max_len, 71] into a
//! 512-wide feature vector (three conv/pool blocks, then a bidirectional
//! LSTM), and a document encoder turns the max_cells sentence encodings
//! into per-label probabilities (bidirectional LSTM, dense layer, sigmoid
//! head). One sentence encoder is shared across all cells of a column.
//!
//! Training, transfer learning, and serialization live in the `train`
//! and `io` submodules; this module owns the types, parameter layout,
//! and forward graph.

mod io;
mod train;

pub use io::{load_model, save_model, FORMAT_VERSION};
pub use train::{
    evaluate_model, fit, fit_with_callback, EpochStats, FitOptions, SplitEvaluation,
    TrainingHistory,
};

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encode::{encode_column, Alphabet, Column, ALPHABET_SIZE};
use crate::error::{Result, SimonError};
use crate::recurrent::{
    bidirectional_encode, init_cell_tensors, LstmCellParams, ReturnMode, CELL_TENSORS,
};
use crate::tensor::init::glorot_normal_init;
use crate::tensor::tape::{Activation, Tape, Var};
use crate::tensor::{Parameter, Scalar, Tensor};
use crate::Mode;

/// Ordered set of label names defining the prediction space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    names: Vec<String>,
}

impl LabelSpace {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(SimonError::Config("label space must not be empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(SimonError::Config("label names must be non-empty".into()));
            }
            if !seen.insert(n.as_str()) {
                return Err(SimonError::Config(format!("duplicate label name '{n}'")));
            }
        }
        Ok(LabelSpace { names })
    }

    pub fn n_labels(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Architecture hyperparameters.
///
/// The defaults reproduce the published stack: three conv blocks with
/// kernel lengths [1, 3, 3] and dimensions [40, 200, 1000], pool size 2,
/// a 256-unit sentence BiLSTM, a 128-unit document BiLSTM, and a
/// 128-unit dense layer before the head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub max_len: usize,
    pub max_cells: usize,
    pub p_threshold: f64,
    pub conv_kernels: Vec<usize>,
    pub conv_dims: Vec<usize>,
    pub conv_dropout: f64,
    pub pool_size: usize,
    pub sentence_lstm_units: usize,
    pub document_lstm_units: usize,
    pub gate_dropout: f64,
    pub recurrent_dropout: f64,
    pub merge_dropout: f64,
    pub dense_units: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_len: 20,
            max_cells: 500,
            p_threshold: 0.5,
            conv_kernels: vec![1, 3, 3],
            conv_dims: vec![40, 200, 1000],
            conv_dropout: 0.1,
            pool_size: 2,
            sentence_lstm_units: 256,
            document_lstm_units: 128,
            gate_dropout: 0.2,
            recurrent_dropout: 0.2,
            merge_dropout: 0.3,
            dense_units: 128,
        }
    }
}

impl ModelConfig {
    /// CI-speed profile: 20 cells per column instead of 500.
    pub fn desk() -> Self {
        ModelConfig { max_cells: 20, ..ModelConfig::default() }
    }

    /// Full-scale profile (max_cells 500).
    pub fn full() -> Self {
        ModelConfig::default()
    }

    /// Sequence length entering the sentence BiLSTM after the conv/pool
    /// stack, or a configuration error naming the smallest workable
    /// max_len.
    pub fn sentence_seq_len(&self) -> Result<usize> {
        match chain_len(self.max_len, &self.conv_kernels, self.pool_size) {
            Some(len) => Ok(len),
            None => {
                let minimum = (1..=1 << 16)
                    .find(|&m| chain_len(m, &self.conv_kernels, self.pool_size).is_some());
                Err(SimonError::Config(match minimum {
                    Some(m) => format!(
                        "max_len {} cannot pass the conv/pool stack; the minimum for this \
                         configuration is {m}",
                        self.max_len
                    ),
                    None => "conv/pool stack admits no max_len".to_string(),
                }))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.conv_kernels.len() != self.conv_dims.len() {
            return Err(SimonError::Config(format!(
                "{} conv kernels but {} conv dims",
                self.conv_kernels.len(),
                self.conv_dims.len()
            )));
        }
        if self.conv_kernels.is_empty() {
            return Err(SimonError::Config("at least one conv block is required".into()));
        }
        if self.max_cells == 0 || self.max_len == 0 {
            return Err(SimonError::Config("max_len and max_cells must be >= 1".into()));
        }
        if !(0.0 < self.p_threshold && self.p_threshold < 1.0) {
            return Err(SimonError::Config(format!(
                "p_threshold {} outside (0, 1)",
                self.p_threshold
            )));
        }
        for (name, rate) in [
            ("conv_dropout", self.conv_dropout),
            ("gate_dropout", self.gate_dropout),
            ("recurrent_dropout", self.recurrent_dropout),
            ("merge_dropout", self.merge_dropout),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return Err(SimonError::Config(format!("{name} {rate} outside [0, 1)")));
            }
        }
        if self.sentence_lstm_units == 0 || self.document_lstm_units == 0 || self.dense_units == 0
        {
            return Err(SimonError::Config("layer widths must be >= 1".into()));
        }
        self.sentence_seq_len().map(|_| ())
    }

    /// Width of one sentence encoding (two LSTM directions merged).
    pub fn sentence_width(&self) -> usize {
        2 * self.sentence_lstm_units
    }

    /// Width of the merged document encoding.
    pub fn document_width(&self) -> usize {
        2 * self.document_lstm_units
    }
}

fn chain_len(max_len: usize, kernels: &[usize], pool: usize) -> Option<usize> {
    let mut len = max_len;
    for &k in kernels {
        if len < k || k == 0 {
            return None;
        }
        len = len - k + 1;
        if len < pool || pool == 0 {
            return None;
        }
        len /= pool;
    }
    Some(len)
}

/// Index layout of the flat parameter list. Declaration order is also
/// the serialization order.
#[derive(Clone, Copy, Debug)]
struct Layout {
    n_conv: usize,
}

impl Layout {
    fn conv(&self, i: usize) -> usize {
        i
    }
    fn sentence_fw(&self) -> Range<usize> {
        self.n_conv..self.n_conv + CELL_TENSORS
    }
    fn sentence_bw(&self) -> Range<usize> {
        let s = self.n_conv + CELL_TENSORS;
        s..s + CELL_TENSORS
    }
    fn document_fw(&self) -> Range<usize> {
        let s = self.n_conv + 2 * CELL_TENSORS;
        s..s + CELL_TENSORS
    }
    fn document_bw(&self) -> Range<usize> {
        let s = self.n_conv + 3 * CELL_TENSORS;
        s..s + CELL_TENSORS
    }
    fn dense_w(&self) -> usize {
        self.n_conv + 4 * CELL_TENSORS
    }
    fn dense_b(&self) -> usize {
        self.dense_w() + 1
    }
    fn head_w(&self) -> usize {
        self.dense_w() + 2
    }
    fn head_b(&self) -> usize {
        self.dense_w() + 3
    }
    fn total(&self) -> usize {
        self.dense_w() + 4
    }
}

/// The assembled classifier: config, alphabet, labels, and one flat
/// list of named parameters in declaration order.
#[derive(Clone, Debug)]
pub struct SimonModel {
    pub config: ModelConfig,
    pub alphabet: Alphabet,
    pub labels: LabelSpace,
    params: Vec<Parameter<f32>>,
}

/// Per-label probabilities plus the thresholded label set.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub probabilities: Vec<f32>,
    /// Indices of labels whose probability exceeds p_threshold (or the
    /// argmax when the fallback fired).
    pub label_indices: Vec<usize>,
    pub labels: Vec<String>,
    pub fallback_used: bool,
}

/// Initialize a model with Glorot-normal weights drawn from `rng`.
pub fn build_model<R: Rng>(
    config: ModelConfig,
    alphabet: Alphabet,
    labels: LabelSpace,
    rng: &mut R,
) -> Result<SimonModel> {
    config.validate()?;
    if alphabet.size() != ALPHABET_SIZE {
        return Err(SimonError::Config(format!(
            "alphabet has {} characters, the encoder expects {ALPHABET_SIZE}",
            alphabet.size()
        )));
    }
    let mut params: Vec<Parameter<f32>> = Vec::new();

    let mut in_channels = alphabet.size();
    for (i, (&k, &d)) in config.conv_kernels.iter().zip(&config.conv_dims).enumerate() {
        let kernels = glorot_normal_init(vec![k, in_channels, d], in_channels, d, rng)?;
        params.push(Parameter::new(format!("conv.{i}.kernels"), kernels));
        in_channels = d;
    }

    let sent_in = *config.conv_dims.last().expect("validated non-empty");
    for (prefix, input_size, hidden) in [
        ("sentence.fw", sent_in, config.sentence_lstm_units),
        ("sentence.bw", sent_in, config.sentence_lstm_units),
        ("document.fw", config.sentence_width(), config.document_lstm_units),
        ("document.bw", config.sentence_width(), config.document_lstm_units),
    ] {
        for (name, tensor) in init_cell_tensors(prefix, input_size, hidden, 1.0, rng)? {
            params.push(Parameter::new(name, tensor));
        }
    }

    let dense_w = glorot_normal_init(
        vec![config.document_width(), config.dense_units],
        config.document_width(),
        config.dense_units,
        rng,
    )?;
    params.push(Parameter::new("dense.w", dense_w));
    params.push(Parameter::new("dense.b", Tensor::zeros(vec![config.dense_units])));

    let head_w = glorot_normal_init(
        vec![config.dense_units, labels.n_labels()],
        config.dense_units,
        labels.n_labels(),
        rng,
    )?;
    params.push(Parameter::new("head.w", head_w));
    params.push(Parameter::new("head.b", Tensor::zeros(vec![labels.n_labels()])));

    let model = SimonModel { config, alphabet, labels, params };
    debug_assert_eq!(model.params.len(), model.layout().total());
    Ok(model)
}

/// All of one model's parameters inserted as leaves on a tape.
pub(crate) struct TapedParams {
    pub vars: Vec<Var>,
    layout: Layout,
    sentence_units: usize,
    document_units: usize,
}

impl TapedParams {
    fn conv(&self, i: usize) -> Var {
        self.vars[self.layout.conv(i)]
    }
    fn cell(&self, range: Range<usize>, hidden: usize) -> LstmCellParams {
        LstmCellParams::from_leaf_slice(&self.vars[range], hidden)
    }
    fn sentence_fw(&self) -> LstmCellParams {
        self.cell(self.layout.sentence_fw(), self.sentence_units)
    }
    fn sentence_bw(&self) -> LstmCellParams {
        self.cell(self.layout.sentence_bw(), self.sentence_units)
    }
    fn document_fw(&self) -> LstmCellParams {
        self.cell(self.layout.document_fw(), self.document_units)
    }
    fn document_bw(&self) -> LstmCellParams {
        self.cell(self.layout.document_bw(), self.document_units)
    }
    fn dense_w(&self) -> Var {
        self.vars[self.layout.dense_w()]
    }
    fn dense_b(&self) -> Var {
        self.vars[self.layout.dense_b()]
    }
    pub fn head_w(&self) -> Var {
        self.vars[self.layout.head_w()]
    }
    pub fn head_b(&self) -> Var {
        self.vars[self.layout.head_b()]
    }
}

impl SimonModel {
    fn layout(&self) -> Layout {
        Layout { n_conv: self.config.conv_kernels.len() }
    }

    pub fn n_labels(&self) -> usize {
        self.labels.n_labels()
    }

    /// Parameters in declaration order (read-only view).
    pub fn parameters(&self) -> &[Parameter<f32>] {
        &self.params
    }

    pub(crate) fn parameters_mut(&mut self) -> &mut [Parameter<f32>] {
        &mut self.params
    }

    pub(crate) fn set_parameters(&mut self, params: Vec<Parameter<f32>>) {
        debug_assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    /// Index where the head weight tensor sits in the flat list.
    pub fn head_weight_index(&self) -> usize {
        self.layout().head_w()
    }

    /// Insert every parameter as a tape leaf (cast to `S`), optionally
    /// overriding single tensors by index.
    pub(crate) fn insert_leaves<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        overrides: &[(usize, Tensor<S>)],
    ) -> TapedParams {
        let vars = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                match overrides.iter().find(|(j, _)| *j == i) {
                    Some((_, t)) => tape.leaf(t.clone()),
                    None => tape.leaf(p.value.cast::<S>()),
                }
            })
            .collect();
        TapedParams {
            vars,
            layout: self.layout(),
            sentence_units: self.config.sentence_lstm_units,
            document_units: self.config.document_lstm_units,
        }
    }

    /// Record the encoder portion of the graph for one encoded column:
    /// conv/pool stack and sentence BiLSTM per cell, document BiLSTM,
    /// then the dense layer with ReLU. Returns the [dense_units]
    /// feature node that feeds the head.
    pub(crate) fn encoder_graph<S: Scalar, R: Rng>(
        &self,
        tape: &mut Tape<S>,
        tp: &TapedParams,
        encoded: &Tensor<S>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        let cfg = &self.config;
        let expect = [cfg.max_cells, cfg.max_len, self.alphabet.size()];
        if encoded.shape() != expect {
            return Err(SimonError::ShapeMismatch {
                op: "forward",
                left: encoded.shape().to_vec(),
                right: expect.to_vec(),
            });
        }
        let plane = cfg.max_len * self.alphabet.size();
        let mut sentence_rows = Vec::with_capacity(cfg.max_cells);
        for c in 0..cfg.max_cells {
            let cell = Tensor::new(
                vec![cfg.max_len, self.alphabet.size()],
                encoded.data()[c * plane..(c + 1) * plane].to_vec(),
            )?;
            let mut x = tape.leaf(cell);
            for i in 0..cfg.conv_kernels.len() {
                x = tape.conv1d(x, tp.conv(i))?;
                x = tape.activation(x, Activation::Relu);
                x = tape.dropout(x, cfg.conv_dropout, mode, rng)?;
                x = tape.maxpool1d(x, cfg.pool_size)?;
            }
            let enc = bidirectional_encode(
                tape,
                &tp.sentence_fw(),
                &tp.sentence_bw(),
                x,
                ReturnMode::Final,
                cfg.gate_dropout,
                cfg.recurrent_dropout,
                mode,
                rng,
            )?;
            let enc = tape.dropout(enc, cfg.merge_dropout, mode, rng)?;
            sentence_rows.push(enc);
        }
        let doc = tape.stack_rows(&sentence_rows)?;
        let denc = bidirectional_encode(
            tape,
            &tp.document_fw(),
            &tp.document_bw(),
            doc,
            ReturnMode::Final,
            cfg.gate_dropout,
            cfg.recurrent_dropout,
            mode,
            rng,
        )?;
        let denc = tape.dropout(denc, cfg.merge_dropout, mode, rng)?;
        let dense = tape.dense_affine(denc, tp.dense_w(), tp.dense_b())?;
        Ok(tape.activation(dense, Activation::Relu))
    }

    /// Record the head: dropout on the features, affine map to label
    /// logits, sigmoid. Returns the probabilities node [n_labels].
    pub(crate) fn head_graph<S: Scalar, R: Rng>(
        &self,
        tape: &mut Tape<S>,
        features: Var,
        head_w: Var,
        head_b: Var,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        let x = tape.dropout(features, self.config.merge_dropout, mode, rng)?;
        let logits = tape.dense_affine(x, head_w, head_b)?;
        Ok(tape.activation(logits, Activation::Sigmoid))
    }

    /// Record the full forward graph for one encoded column and return
    /// the probabilities node [n_labels].
    pub(crate) fn forward_graph<S: Scalar, R: Rng>(
        &self,
        tape: &mut Tape<S>,
        tp: &TapedParams,
        encoded: &Tensor<S>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        let features = self.encoder_graph(tape, tp, encoded, mode, rng)?;
        self.head_graph(tape, features, tp.head_w(), tp.head_b(), mode, rng)
    }

    /// Deterministic [dense_units] feature vector for one encoded
    /// column, computed with the encoders in inference mode. This is
    /// what the head consumes; the transfer fast path caches it.
    pub(crate) fn head_input_features(&self, encoded: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut tape = Tape::<f32>::new();
        let tp = self.insert_leaves(&mut tape, &[]);
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        let features = self.encoder_graph(&mut tape, &tp, encoded, Mode::Inference, &mut rng)?;
        Ok(tape.value(features).clone())
    }

    /// Probabilities [n_labels] for one encoded column.
    pub fn forward<R: Rng>(
        &self,
        encoded: &Tensor<f32>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor<f32>> {
        let mut tape = Tape::<f32>::new();
        let tp = self.insert_leaves(&mut tape, &[]);
        let probs = self.forward_graph(&mut tape, &tp, encoded, mode, rng)?;
        Ok(tape.value(probs).clone())
    }

    /// Deterministic inference on an encoded column.
    pub fn infer(&self, encoded: &Tensor<f32>) -> Result<Tensor<f32>> {
        // Inference mode never samples, so the generator is inert.
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        self.forward(encoded, Mode::Inference, &mut rng)
    }

    /// Encode a column (sampling cells under `rng`) and predict labels.
    /// With `fallback` set, an empty thresholded set is replaced by the
    /// argmax label.
    pub fn predict_labels<R: Rng>(
        &self,
        column: &Column,
        rng: &mut R,
        fallback: bool,
    ) -> Result<Prediction> {
        let encoded = encode_column::<f32, _>(
            column,
            &self.alphabet,
            self.config.max_len,
            self.config.max_cells,
            rng,
        )?;
        let probs = self.infer(&encoded)?;
        let (label_indices, fallback_used) =
            select_labels(probs.data(), self.config.p_threshold, fallback);
        let labels =
            label_indices.iter().map(|&i| self.labels.names()[i].clone()).collect();
        Ok(Prediction {
            probabilities: probs.data().to_vec(),
            label_indices,
            labels,
            fallback_used,
        })
    }

    /// Freeze every parameter and install a fresh Glorot head sized to
    /// `new_labels`. Subsequent fits update only the head.
    pub fn transfer_head<R: Rng>(&self, new_labels: LabelSpace, rng: &mut R) -> Result<SimonModel> {
        let mut out = self.clone();
        for p in &mut out.params {
            p.trainable = false;
        }
        let layout = out.layout();
        let head_w = glorot_normal_init(
            vec![out.config.dense_units, new_labels.n_labels()],
            out.config.dense_units,
            new_labels.n_labels(),
            rng,
        )?;
        out.params[layout.head_w()] = Parameter::new("head.w", head_w);
        out.params[layout.head_b()] =
            Parameter::new("head.b", Tensor::zeros(vec![new_labels.n_labels()]));
        out.labels = new_labels;
        Ok(out)
    }

    /// True when only the head is trainable (the transfer regime).
    pub fn encoders_frozen(&self) -> bool {
        let layout = self.layout();
        self.params
            .iter()
            .enumerate()
            .all(|(i, p)| p.trainable == (i == layout.head_w() || i == layout.head_b()))
    }

    /// f64 loss and head-parameter gradients for one encoded column in
    /// inference mode, with the head optionally overridden. This is the
    /// hook for finite-difference verification of the full model.
    pub fn head_loss_f64(
        &self,
        encoded: &Tensor<f64>,
        targets: &Tensor<f64>,
        head_override: Option<(&Tensor<f64>, &Tensor<f64>)>,
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let mut tape = Tape::<f64>::new();
        let layout = self.layout();
        let overrides: Vec<(usize, Tensor<f64>)> = match head_override {
            Some((w, b)) => {
                vec![(layout.head_w(), w.clone()), (layout.head_b(), b.clone())]
            }
            None => Vec::new(),
        };
        let tp = self.insert_leaves(&mut tape, &overrides);
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        let probs = self.forward_graph(&mut tape, &tp, encoded, Mode::Inference, &mut rng)?;
        let loss = tape.bce_multilabel_loss(probs, targets)?;
        tape.backward(loss)?;
        let gw = tape.grad(tp.head_w()).map(|g| g.to_vec()).unwrap_or_default();
        let gb = tape.grad(tp.head_b()).map(|g| g.to_vec()).unwrap_or_default();
        Ok((tape.value(loss).item(), gw, gb))
    }
}

/// Indices of labels above threshold; with `fallback`, an empty set
/// becomes the argmax singleton.
pub fn select_labels(probs: &[f32], threshold: f64, fallback: bool) -> (Vec<usize>, bool) {
    let mut picked: Vec<usize> = (0..probs.len())
        .filter(|&i| f64::from(probs[i]) > threshold)
        .collect();
    if picked.is_empty() && fallback && !probs.is_empty() {
        let argmax = (0..probs.len())
            .max_by(|&a, &b| probs[a].partial_cmp(&probs[b]).expect("finite probs"))
            .expect("non-empty");
        picked.push(argmax);
        return (picked, true);
    }
    (picked, false)
}

/// Train/validate/test assignment of one example.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Validate,
    Test,
}

/// One labeled training example.
#[derive(Clone, Debug)]
pub struct LabeledExample {
    pub column: Column,
    pub targets: Vec<f32>,
    pub split: Split,
}

/// A labeled corpus with per-example split assignments.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub labels: LabelSpace,
    pub examples: Vec<LabeledExample>,
}

/// The default 60/30/10 split fractions.
pub const SPLIT_FRACTIONS: (f64, f64) = (0.6, 0.3);

impl LabeledDataset {
    pub fn new(labels: LabelSpace, examples: Vec<LabeledExample>) -> Result<Self> {
        for (i, e) in examples.iter().enumerate() {
            if e.targets.len() != labels.n_labels() {
                return Err(SimonError::Data(format!(
                    "example {i} has {} targets, label space has {}",
                    e.targets.len(),
                    labels.n_labels()
                )));
            }
            if e.targets.iter().any(|&t| t != 0.0 && t != 1.0) {
                return Err(SimonError::Data(format!("example {i} has non-binary targets")));
            }
        }
        Ok(LabeledDataset { labels, examples })
    }

    /// Shuffle deterministically and assign 60% train / 30% validate /
    /// 10% test.
    pub fn assign_splits<R: Rng>(&mut self, rng: &mut R) {
        let n = self.examples.len();
        let mut order: Vec<usize> = (0..n).collect();
        // Fisher-Yates using the caller's generator.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let n_train = ((n as f64) * SPLIT_FRACTIONS.0).round() as usize;
        let n_val = ((n as f64) * SPLIT_FRACTIONS.1).round() as usize;
        for (rank, &idx) in order.iter().enumerate() {
            self.examples[idx].split = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Validate
            } else {
                Split::Test
            };
        }
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        (0..self.examples.len()).filter(|&i| self.examples[i].split == split).collect()
    }
}
