//! Reverse-mode differentiation tape.
//!
//! A [`Tape`] records every operation of a forward pass as a node whose
//! parents were recorded earlier, so the node list is already in
//! topological order. [`Tape::backward`] walks it once in reverse from a
//! scalar root and accumulates gradients for every node, including the
//! leaves that hold parameters and inputs.
//!
//! The operation set is exactly what the column classifier needs:
//! narrow 1-d convolution (stride 1, no padding), temporal max-pooling,
//! affine maps, elementwise activations and arithmetic, inverted
//! dropout, concatenation/stacking, row extraction, and a mean
//! binary-cross-entropy loss.

use rand::Rng;

use super::kernels;
use super::{Scalar, Tensor};
use crate::error::{Result, SimonError};
use crate::Mode;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Elementwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => {
                if x > S::zero() {
                    x
                } else {
                    S::zero()
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed in terms of the activation output `y`.
    #[inline]
    fn derivative_from_output<S: Scalar>(self, y: S) -> S {
        match self {
            Activation::Relu => {
                if y > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Sigmoid => y * (S::one() - y),
            Activation::Tanh => S::one() - y * y,
        }
    }
}

/// Standard logistic sigmoid, computed on the non-overflowing branch.
#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Clamp bound for probabilities entering the BCE log.
pub fn bce_epsilon<S: Scalar>() -> S {
    S::from_f64(1e-7)
}

enum Op<S: Scalar> {
    Leaf,
    Conv1d { input: Var, kernels: Var },
    MaxPool1d { input: Var, argmax: Vec<usize> },
    DenseAffine { input: Var, weight: Var, bias: Var },
    MatVec { input: Var, weight: Var },
    Activate { input: Var, kind: Activation },
    Dropout { input: Var, mask: Vec<S> },
    ConcatLast { parts: Vec<Var> },
    StackRows { parts: Vec<Var> },
    Row { input: Var, index: usize },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    BceMean { probs: Var, targets: Vec<S> },
}

struct Node<S: Scalar> {
    value: Tensor<S>,
    op: Op<S>,
}

/// Recorded forward pass plus, after [`Tape::backward`], its gradients.
pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
    grads: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), grads: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Insert a constant or parameter value as a leaf.
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` root with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[S]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn grad_tensor(&self, v: Var) -> Option<Tensor<S>> {
        self.grad(v).map(|g| {
            Tensor::new(self.value(v).shape().to_vec(), g.to_vec()).expect("grad shape")
        })
    }

    // ── Operations ─────────────────────────────────────────────────

    /// Narrow 1-d convolution, stride 1: input [len, cin] * kernels
    /// [ksize, cin, cout] -> [len - ksize + 1, cout].
    pub fn conv1d(&mut self, input: Var, kernels: Var) -> Result<Var> {
        let (ishape, kshape) = (self.value(input).shape(), self.value(kernels).shape());
        if ishape.len() != 2 || kshape.len() != 3 || ishape[1] != kshape[1] {
            return Err(SimonError::ShapeMismatch {
                op: "conv1d",
                left: ishape.to_vec(),
                right: kshape.to_vec(),
            });
        }
        let (len, cin, ksize, cout) = (ishape[0], ishape[1], kshape[0], kshape[2]);
        if len < ksize {
            return Err(SimonError::DegenerateInput(format!(
                "conv1d input length {len} shorter than kernel length {ksize} (no implicit padding)"
            )));
        }
        let out_len = len - ksize + 1;
        let mut out = vec![S::zero(); out_len * cout];
        kernels::conv1d_forward(
            self.value(input).data(),
            self.value(kernels).data(),
            &mut out,
            len,
            cin,
            ksize,
            cout,
        );
        let value = Tensor::new(vec![out_len, cout], out)?;
        Ok(self.push(value, Op::Conv1d { input, kernels }))
    }

    /// Per-channel max over consecutive non-overlapping windows; the
    /// remainder past the last full window is dropped. Gradient routes to
    /// the argmax position, lowest index on ties.
    pub fn maxpool1d(&mut self, input: Var, pool: usize) -> Result<Var> {
        let ishape = self.value(input).shape();
        if ishape.len() != 2 {
            return Err(SimonError::ShapeMismatch {
                op: "maxpool1d",
                left: ishape.to_vec(),
                right: vec![0, 0],
            });
        }
        if pool == 0 {
            return Err(SimonError::InvalidParameter("maxpool1d pool size must be >= 1".into()));
        }
        let (len, channels) = (ishape[0], ishape[1]);
        if len < pool {
            return Err(SimonError::DegenerateInput(format!(
                "maxpool1d input length {len} shorter than pool size {pool}"
            )));
        }
        let out_len = len / pool;
        let data = self.value(input).data();
        let mut out = vec![S::zero(); out_len * channels];
        let mut argmax = vec![0usize; out_len * channels];
        for i in 0..out_len {
            for c in 0..channels {
                let mut best = data[(i * pool) * channels + c];
                let mut best_at = (i * pool) * channels + c;
                for j in 1..pool {
                    let idx = (i * pool + j) * channels + c;
                    if data[idx] > best {
                        best = data[idx];
                        best_at = idx;
                    }
                }
                out[i * channels + c] = best;
                argmax[i * channels + c] = best_at;
            }
        }
        let value = Tensor::new(vec![out_len, channels], out)?;
        Ok(self.push(value, Op::MaxPool1d { input, argmax }))
    }

    /// y = x^T W + b with x [n_in], W [n_in, n_out], b [n_out].
    pub fn dense_affine(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (xs, ws, bs) = (
            self.value(input).shape().to_vec(),
            self.value(weight).shape().to_vec(),
            self.value(bias).shape().to_vec(),
        );
        if xs.len() != 1 || ws.len() != 2 || xs[0] != ws[0] {
            return Err(SimonError::ShapeMismatch { op: "dense_affine", left: xs, right: ws });
        }
        if bs.len() != 1 || bs[0] != ws[1] {
            return Err(SimonError::ShapeMismatch { op: "dense_affine", left: ws, right: bs });
        }
        let (n_in, n_out) = (ws[0], ws[1]);
        let mut y = self.value(bias).data().to_vec();
        kernels::matvec_forward(self.value(input).data(), self.value(weight).data(), &mut y, n_in, n_out);
        let value = Tensor::new(vec![n_out], y)?;
        Ok(self.push(value, Op::DenseAffine { input, weight, bias }))
    }

    /// y = x^T W, the bias-free half of [`Tape::dense_affine`].
    pub fn matvec(&mut self, input: Var, weight: Var) -> Result<Var> {
        let (xs, ws) = (self.value(input).shape().to_vec(), self.value(weight).shape().to_vec());
        if xs.len() != 1 || ws.len() != 2 || xs[0] != ws[0] {
            return Err(SimonError::ShapeMismatch { op: "matvec", left: xs, right: ws });
        }
        let (n_in, n_out) = (ws[0], ws[1]);
        let mut y = vec![S::zero(); n_out];
        kernels::matvec_forward(self.value(input).data(), self.value(weight).data(), &mut y, n_in, n_out);
        let value = Tensor::new(vec![n_out], y)?;
        Ok(self.push(value, Op::MatVec { input, weight }))
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Var {
        let data: Vec<S> = self.value(input).data().iter().map(|&x| kind.apply(x)).collect();
        let value = Tensor::new(self.value(input).shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Activate { input, kind })
    }

    /// Inverted dropout: in train mode each element is zeroed with
    /// probability `rate` and survivors are scaled by 1/(1-rate), so
    /// inference mode is the identity (the input var is returned as-is).
    pub fn dropout<R: Rng>(
        &mut self,
        input: Var,
        rate: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(SimonError::InvalidParameter(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if mode == Mode::Inference || rate == 0.0 {
            return Ok(input);
        }
        let scale = S::from_f64(1.0 / (1.0 - rate));
        let mask: Vec<S> = (0..self.value(input).numel())
            .map(|_| if rng.gen::<f64>() < rate { S::zero() } else { scale })
            .collect();
        let data: Vec<S> =
            self.value(input).data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let value = Tensor::new(self.value(input).shape().to_vec(), data).expect("same shape");
        Ok(self.push(value, Op::Dropout { input, mask }))
    }

    /// Concatenate along the last dimension; a single part is returned
    /// unchanged.
    pub fn concat_features(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(SimonError::DegenerateInput("concat_features of zero parts".into()));
        }
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let lead = self.value(parts[0]).shape();
        let lead_dims = lead[..lead.len() - 1].to_vec();
        let mut last_total = 0;
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != lead.len() || s[..s.len() - 1] != lead_dims[..] {
                return Err(SimonError::ShapeMismatch {
                    op: "concat_features",
                    left: lead.to_vec(),
                    right: s.to_vec(),
                });
            }
            last_total += s[s.len() - 1];
        }
        let rows: usize = lead_dims.iter().product();
        let mut out = Vec::with_capacity(rows * last_total);
        for r in 0..rows {
            for &p in parts {
                let t = self.value(p);
                let w = *t.shape().last().unwrap();
                out.extend_from_slice(&t.data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead_dims;
        shape.push(last_total);
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::ConcatLast { parts: parts.to_vec() }))
    }

    /// Stack rank-1 vectors of equal width into a [n, width] matrix.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(SimonError::DegenerateInput("stack_rows of zero parts".into()));
        }
        let width = self.value(parts[0]).numel();
        let mut out = Vec::with_capacity(parts.len() * width);
        for &p in parts {
            let t = self.value(p);
            if t.shape().len() != 1 || t.numel() != width {
                return Err(SimonError::ShapeMismatch {
                    op: "stack_rows",
                    left: vec![width],
                    right: t.shape().to_vec(),
                });
            }
            out.extend_from_slice(t.data());
        }
        let value = Tensor::new(vec![parts.len(), width], out)?;
        Ok(self.push(value, Op::StackRows { parts: parts.to_vec() }))
    }

    /// Extract row `index` of a [rows, width] matrix as a vector.
    pub fn row(&mut self, input: Var, index: usize) -> Result<Var> {
        let shape = self.value(input).shape();
        if shape.len() != 2 {
            return Err(SimonError::ShapeMismatch {
                op: "row",
                left: shape.to_vec(),
                right: vec![0, 0],
            });
        }
        let (rows, width) = (shape[0], shape[1]);
        if index >= rows {
            return Err(SimonError::Usage(format!("row {index} out of {rows}")));
        }
        let data = self.value(input).data()[index * width..(index + 1) * width].to_vec();
        let value = Tensor::new(vec![width], data)?;
        Ok(self.push(value, Op::Row { input, index }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("add", a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("mul", a, b)
    }

    fn binary_same_shape(&mut self, which: &'static str, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(SimonError::ShapeMismatch {
                op: which,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let data: Vec<S> = match which {
            "add" => da.iter().zip(db).map(|(&x, &y)| x + y).collect(),
            _ => da.iter().zip(db).map(|(&x, &y)| x * y).collect(),
        };
        let value = Tensor::new(sa.to_vec(), data).expect("same shape");
        let op = if which == "add" { Op::Add { a, b } } else { Op::Mul { a, b } };
        Ok(self.push(value, op))
    }

    /// Mean over labels of -[y ln p + (1-y) ln(1-p)], with p clamped to
    /// [1e-7, 1-1e-7] before the logs. Returns a scalar node.
    pub fn bce_multilabel_loss(&mut self, probs: Var, targets: &Tensor<S>) -> Result<Var> {
        let ps = self.value(probs).shape().to_vec();
        if ps != targets.shape() {
            return Err(SimonError::ShapeMismatch {
                op: "bce_multilabel_loss",
                left: ps,
                right: targets.shape().to_vec(),
            });
        }
        for &t in targets.data() {
            if t != S::zero() && t != S::one() {
                return Err(SimonError::Data(format!(
                    "bce target {t} is not in {{0, 1}}"
                )));
            }
        }
        let eps = bce_epsilon::<S>();
        let n = S::from_f64(targets.numel() as f64);
        let mut total = S::zero();
        for (&p, &y) in self.value(probs).data().iter().zip(targets.data()) {
            let pc = p.max(eps).min(S::one() - eps);
            total = total - (y * pc.ln() + (S::one() - y) * (S::one() - pc).ln());
        }
        let value = Tensor::scalar(total / n);
        Ok(self.push(value, Op::BceMean { probs, targets: targets.data().to_vec() }))
    }

    // ── Backward ───────────────────────────────────────────────────

    /// Accumulate d(root)/d(node) for every node reachable from `root`,
    /// which must be scalar.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).numel() != 1 {
            return Err(SimonError::Usage("backward root must be scalar".into()));
        }
        let mut grads: Vec<Option<Vec<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(vec![S::one()]);
        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, id: usize, g: &[S], grads: &mut [Option<Vec<S>>]) {
        let numel_of = |v: Var| self.nodes[v.0].value.numel();
        macro_rules! buf {
            ($v:expr) => {
                grads[$v.0].get_or_insert_with(|| vec![S::zero(); numel_of($v)])
            };
        }
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Conv1d { input, kernels } => {
                debug_assert_ne!(input.0, kernels.0);
                let ishape = self.nodes[input.0].value.shape();
                let kshape = self.nodes[kernels.0].value.shape();
                let (len, cin, ksize, cout) = (ishape[0], ishape[1], kshape[0], kshape[2]);
                let mut gi = grads[input.0].take().unwrap_or_else(|| vec![S::zero(); len * cin]);
                let mut gk =
                    grads[kernels.0].take().unwrap_or_else(|| vec![S::zero(); ksize * cin * cout]);
                kernels::conv1d_backward(
                    self.nodes[input.0].value.data(),
                    self.nodes[kernels.0].value.data(),
                    g,
                    &mut gi,
                    &mut gk,
                    len,
                    cin,
                    ksize,
                    cout,
                );
                grads[input.0] = Some(gi);
                grads[kernels.0] = Some(gk);
            }
            Op::MaxPool1d { input, argmax } => {
                let gi = buf!(*input);
                for (out_idx, &in_idx) in argmax.iter().enumerate() {
                    gi[in_idx] = gi[in_idx] + g[out_idx];
                }
            }
            Op::DenseAffine { input, weight, bias } => {
                debug_assert!(input.0 != weight.0 && weight.0 != bias.0 && input.0 != bias.0);
                let ws = self.nodes[weight.0].value.shape();
                let (n_in, n_out) = (ws[0], ws[1]);
                let mut gx = grads[input.0].take().unwrap_or_else(|| vec![S::zero(); n_in]);
                let mut gw =
                    grads[weight.0].take().unwrap_or_else(|| vec![S::zero(); n_in * n_out]);
                kernels::matvec_backward(
                    self.nodes[input.0].value.data(),
                    self.nodes[weight.0].value.data(),
                    g,
                    &mut gx,
                    &mut gw,
                    n_in,
                    n_out,
                );
                grads[input.0] = Some(gx);
                grads[weight.0] = Some(gw);
                let gb = buf!(*bias);
                for (bi, &gi) in gb.iter_mut().zip(g) {
                    *bi = *bi + gi;
                }
            }
            Op::MatVec { input, weight } => {
                debug_assert_ne!(input.0, weight.0);
                let ws = self.nodes[weight.0].value.shape();
                let (n_in, n_out) = (ws[0], ws[1]);
                let mut gx = grads[input.0].take().unwrap_or_else(|| vec![S::zero(); n_in]);
                let mut gw =
                    grads[weight.0].take().unwrap_or_else(|| vec![S::zero(); n_in * n_out]);
                kernels::matvec_backward(
                    self.nodes[input.0].value.data(),
                    self.nodes[weight.0].value.data(),
                    g,
                    &mut gx,
                    &mut gw,
                    n_in,
                    n_out,
                );
                grads[input.0] = Some(gx);
                grads[weight.0] = Some(gw);
            }
            Op::Activate { input, kind } => {
                let y = self.nodes[id].value.data();
                let gi = buf!(*input);
                for i in 0..gi.len() {
                    gi[i] = gi[i] + g[i] * kind.derivative_from_output(y[i]);
                }
            }
            Op::Dropout { input, mask } => {
                let gi = buf!(*input);
                for i in 0..gi.len() {
                    gi[i] = gi[i] + g[i] * mask[i];
                }
            }
            Op::ConcatLast { parts } => {
                let out_last = *self.nodes[id].value.shape().last().unwrap();
                let rows = self.nodes[id].value.numel() / out_last;
                let mut offset = 0;
                for &p in parts {
                    let w = *self.nodes[p.0].value.shape().last().unwrap();
                    let gp = buf!(p);
                    for r in 0..rows {
                        let src = &g[r * out_last + offset..r * out_last + offset + w];
                        for (dst, &sv) in gp[r * w..(r + 1) * w].iter_mut().zip(src) {
                            *dst = *dst + sv;
                        }
                    }
                    offset += w;
                }
            }
            Op::StackRows { parts } => {
                let width = self.nodes[id].value.shape()[1];
                for (r, &p) in parts.iter().enumerate() {
                    let gp = buf!(p);
                    for (dst, &sv) in gp.iter_mut().zip(&g[r * width..(r + 1) * width]) {
                        *dst = *dst + sv;
                    }
                }
            }
            Op::Row { input, index } => {
                let width = self.nodes[id].value.numel();
                let gi = buf!(*input);
                for (dst, &sv) in gi[index * width..(index + 1) * width].iter_mut().zip(g) {
                    *dst = *dst + sv;
                }
            }
            Op::Add { a, b } => {
                for &side in &[*a, *b] {
                    let gs = buf!(side);
                    for i in 0..gs.len() {
                        gs[i] = gs[i] + g[i];
                    }
                }
            }
            Op::Mul { a, b } => {
                let (da, db) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
                {
                    let ga = buf!(*a);
                    for i in 0..ga.len() {
                        ga[i] = ga[i] + g[i] * db[i];
                    }
                }
                let gb = buf!(*b);
                for i in 0..gb.len() {
                    gb[i] = gb[i] + g[i] * da[i];
                }
            }
            Op::BceMean { probs, targets } => {
                let eps = bce_epsilon::<S>();
                let n = S::from_f64(targets.len() as f64);
                let p = self.nodes[probs.0].value.data();
                let gp = buf!(*probs);
                let gscale = g[0] / n;
                for i in 0..targets.len() {
                    // Clamped coordinates are constants, so no gradient flows.
                    if p[i] <= eps || p[i] >= S::one() - eps {
                        continue;
                    }
                    let y = targets[i];
                    gp[i] = gp[i] + gscale * (-(y / p[i]) + (S::one() - y) / (S::one() - p[i]));
                }
            }
        }
    }
}
