//! LSTM memory cell, sequence unrolling, and bidirectional encoding.
//!
//! The cell follows the standard formulation: input, forget, and output
//! gates are logistic sigmoids of affine maps over the current input and
//! previous hidden output; the candidate and the state squasher default
//! to tanh. One step computes
//!
//! ```text
//! s(t) = f(t) * s(t-1) + i(t) * g(t)
//! o(t) = out(t) * a(s(t))
//! ```
//!
//! All recurrent math is recorded on a [`Tape`], so backpropagation
//! through time is just the tape's reverse pass over the unrolled steps.

use rand::Rng;

use crate::error::{Result, SimonError};
use crate::tensor::init::glorot_normal_init;
use crate::tensor::tape::{Activation, Tape, Var};
use crate::tensor::{Scalar, Tensor};
use crate::Mode;

/// Gate order used everywhere parameters are listed flat.
pub const GATE_NAMES: [&str; 4] = ["input", "forget", "candidate", "output"];

/// Number of tensors in one cell's flat parameter list (4 gates x
/// {w_x, w_h, b}).
pub const CELL_TENSORS: usize = 12;

/// On-tape weights for one gate: input weights [input_size, hidden],
/// recurrent weights [hidden, hidden], bias [hidden].
#[derive(Clone, Copy, Debug)]
pub struct LstmGate {
    pub w_x: Var,
    pub w_h: Var,
    pub b: Var,
}

/// Squashing functions: `candidate` feeds the cell state, `state`
/// shapes the hidden output. Both default to tanh.
#[derive(Clone, Copy, Debug)]
pub struct LstmSquashers {
    pub candidate: Activation,
    pub state: Activation,
}

impl Default for LstmSquashers {
    fn default() -> Self {
        LstmSquashers { candidate: Activation::Tanh, state: Activation::Tanh }
    }
}

/// On-tape parameters of one LSTM cell.
#[derive(Clone, Copy, Debug)]
pub struct LstmCellParams {
    pub input: LstmGate,
    pub forget: LstmGate,
    pub candidate: LstmGate,
    pub output: LstmGate,
    pub hidden_size: usize,
    pub squash: LstmSquashers,
}

impl LstmCellParams {
    /// Assemble from 12 leaves in [`GATE_NAMES`] order, each gate
    /// contributing w_x, w_h, b.
    pub fn from_leaf_slice(vars: &[Var], hidden_size: usize) -> Self {
        assert_eq!(vars.len(), CELL_TENSORS, "expected {CELL_TENSORS} leaves");
        let gate = |i: usize| LstmGate { w_x: vars[3 * i], w_h: vars[3 * i + 1], b: vars[3 * i + 2] };
        LstmCellParams {
            input: gate(0),
            forget: gate(1),
            candidate: gate(2),
            output: gate(3),
            hidden_size,
            squash: LstmSquashers::default(),
        }
    }

    fn gates(&self) -> [LstmGate; 4] {
        [self.input, self.forget, self.candidate, self.output]
    }
}

/// Freshly initialized cell tensors in [`GATE_NAMES`] x {w_x, w_h, b}
/// order, named `{prefix}.{gate}.{part}`. Weights are Glorot-normal;
/// biases are zero except the forget bias, which starts at
/// `forget_bias` so early training does not erase the cell state.
pub fn init_cell_tensors<S: Scalar, R: Rng>(
    prefix: &str,
    input_size: usize,
    hidden_size: usize,
    forget_bias: f64,
    rng: &mut R,
) -> Result<Vec<(String, Tensor<S>)>> {
    let mut out = Vec::with_capacity(CELL_TENSORS);
    for gate in GATE_NAMES {
        let w_x = glorot_normal_init(vec![input_size, hidden_size], input_size, hidden_size, rng)?;
        let w_h = glorot_normal_init(vec![hidden_size, hidden_size], hidden_size, hidden_size, rng)?;
        let b = if gate == "forget" {
            Tensor::filled(vec![hidden_size], S::from_f64(forget_bias))
        } else {
            Tensor::zeros(vec![hidden_size])
        };
        out.push((format!("{prefix}.{gate}.w_x"), w_x));
        out.push((format!("{prefix}.{gate}.w_h"), w_h));
        out.push((format!("{prefix}.{gate}.b"), b));
    }
    Ok(out)
}

/// Cell state `s` and hidden output `o`, both [hidden_size].
#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub cell: Var,
    pub hidden: Var,
}

impl LstmState {
    pub fn zeros<S: Scalar>(tape: &mut Tape<S>, hidden_size: usize) -> Self {
        LstmState {
            cell: tape.leaf(Tensor::zeros(vec![hidden_size])),
            hidden: tape.leaf(Tensor::zeros(vec![hidden_size])),
        }
    }
}

/// One LSTM step. In train mode, each gate sees an independently
/// dropped-out copy of the input (`gate_dropout`) and of the previous
/// hidden output (`recurrent_dropout`); inference applies no dropout.
#[allow(clippy::too_many_arguments)]
pub fn lstm_cell_step<S: Scalar, R: Rng>(
    tape: &mut Tape<S>,
    params: &LstmCellParams,
    input_t: Var,
    prev: &LstmState,
    gate_dropout: f64,
    recurrent_dropout: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<LstmState> {
    let mut acts = [input_t; 4];
    for (gi, gate) in params.gates().iter().enumerate() {
        let xd = tape.dropout(input_t, gate_dropout, mode, rng)?;
        let hd = tape.dropout(prev.hidden, recurrent_dropout, mode, rng)?;
        let xw = tape.matvec(xd, gate.w_x)?;
        let hw = tape.matvec(hd, gate.w_h)?;
        let sum = tape.add(xw, hw)?;
        let pre = tape.add(sum, gate.b)?;
        let kind = if gi == 2 { params.squash.candidate } else { Activation::Sigmoid };
        acts[gi] = tape.activation(pre, kind);
    }
    let [i, f, g, o] = acts;
    let keep = tape.mul(f, prev.cell)?;
    let write = tape.mul(i, g)?;
    let cell = tape.add(keep, write)?;
    let squashed = tape.activation(cell, params.squash.state);
    let hidden = tape.mul(o, squashed)?;
    Ok(LstmState { cell, hidden })
}

/// Unroll the cell left to right over `inputs` [T, input_size] from
/// `initial` (zero state when `None`). Returns all hidden outputs
/// [T, hidden_size] and the final state.
#[allow(clippy::too_many_arguments)]
pub fn lstm_sequence_forward<S: Scalar, R: Rng>(
    tape: &mut Tape<S>,
    params: &LstmCellParams,
    inputs: Var,
    initial: Option<LstmState>,
    gate_dropout: f64,
    recurrent_dropout: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Var, LstmState)> {
    let shape = tape.value(inputs).shape().to_vec();
    if shape.len() != 2 {
        return Err(SimonError::ShapeMismatch {
            op: "lstm_sequence_forward",
            left: shape,
            right: vec![0, 0],
        });
    }
    let steps = shape[0];
    let mut state = initial.unwrap_or_else(|| LstmState::zeros(tape, params.hidden_size));
    let mut outputs = Vec::with_capacity(steps);
    for t in 0..steps {
        let x_t = tape.row(inputs, t)?;
        state = lstm_cell_step(tape, params, x_t, &state, gate_dropout, recurrent_dropout, mode, rng)?;
        outputs.push(state.hidden);
    }
    let all = tape.stack_rows(&outputs)?;
    Ok((all, state))
}

/// What a bidirectional run returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReturnMode {
    /// Last step of each direction, concatenated: [2 * hidden_size].
    Final,
    /// Per-step outputs aligned to input order: [T, 2 * hidden_size].
    Sequence,
}

/// Run the sequence once forward and once backward (the backward
/// direction consumes the reversed rows) and concatenate the two
/// directions' outputs, forward half first.
#[allow(clippy::too_many_arguments)]
pub fn bidirectional_encode<S: Scalar, R: Rng>(
    tape: &mut Tape<S>,
    forward_params: &LstmCellParams,
    backward_params: &LstmCellParams,
    inputs: Var,
    return_mode: ReturnMode,
    gate_dropout: f64,
    recurrent_dropout: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    let shape = tape.value(inputs).shape().to_vec();
    if shape.len() != 2 {
        return Err(SimonError::ShapeMismatch {
            op: "bidirectional_encode",
            left: shape,
            right: vec![0, 0],
        });
    }
    let steps = shape[0];

    let mut fw_state = LstmState::zeros(tape, forward_params.hidden_size);
    let mut fw_outputs = Vec::with_capacity(steps);
    for t in 0..steps {
        let x_t = tape.row(inputs, t)?;
        fw_state = lstm_cell_step(
            tape, forward_params, x_t, &fw_state, gate_dropout, recurrent_dropout, mode, rng,
        )?;
        fw_outputs.push(fw_state.hidden);
    }

    let mut bw_state = LstmState::zeros(tape, backward_params.hidden_size);
    let mut bw_outputs = Vec::with_capacity(steps);
    for t in (0..steps).rev() {
        let x_t = tape.row(inputs, t)?;
        bw_state = lstm_cell_step(
            tape, backward_params, x_t, &bw_state, gate_dropout, recurrent_dropout, mode, rng,
        )?;
        bw_outputs.push(bw_state.hidden);
    }

    match return_mode {
        ReturnMode::Final => tape.concat_features(&[fw_state.hidden, bw_state.hidden]),
        ReturnMode::Sequence => {
            let mut rows = Vec::with_capacity(steps);
            for t in 0..steps {
                // bw_outputs[0] belongs to the last input row, so the
                // output for row t sits at index steps-1-t.
                let merged = tape.concat_features(&[fw_outputs[t], bw_outputs[steps - 1 - t]])?;
                rows.push(merged);
            }
            tape.stack_rows(&rows)
        }
    }
}
