//! Inner numeric loops shared by the tape's forward and backward passes.
//!
//! Layouts are row-major throughout. The loops are written so the
//! reduction-free ones autovectorize; `dot` keeps eight independent
//! accumulators because strict FP semantics would otherwise serialize it.

use super::Scalar;

/// y += alpha * x, skipping the whole pass when alpha is zero.
///
/// The zero skip matters: one-hot character planes and padded rows make
/// most `alpha` values zero in the first convolution.
#[inline]
pub fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    if alpha == S::zero() {
        return;
    }
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Dot product with unrolled partial sums.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [S::zero(); 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        let ai = &a[i * 8..i * 8 + 8];
        let bi = &b[i * 8..i * 8 + 8];
        for k in 0..8 {
            acc[k] = acc[k] + ai[k] * bi[k];
        }
    }
    let mut tail = S::zero();
    for i in chunks * 8..a.len() {
        tail = tail + a[i] * b[i];
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

/// out[i][o] += sum_{k,c} input[i+k][c] * kernels[k][c][o]
///
/// input: [len, cin], kernels: [ksize, cin, cout], out: [len-ksize+1, cout].
pub fn conv1d_forward<S: Scalar>(
    input: &[S],
    kernels: &[S],
    out: &mut [S],
    len: usize,
    cin: usize,
    ksize: usize,
    cout: usize,
) {
    let out_len = len - ksize + 1;
    for i in 0..out_len {
        let out_row = &mut out[i * cout..(i + 1) * cout];
        for k in 0..ksize {
            let in_row = &input[(i + k) * cin..(i + k + 1) * cin];
            let k_plane = &kernels[k * cin * cout..(k + 1) * cin * cout];
            for (c, &xv) in in_row.iter().enumerate() {
                axpy(xv, &k_plane[c * cout..(c + 1) * cout], out_row);
            }
        }
    }
}

/// Backward of [`conv1d_forward`] into both operands.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward<S: Scalar>(
    input: &[S],
    kernels: &[S],
    grad_out: &[S],
    grad_input: &mut [S],
    grad_kernels: &mut [S],
    len: usize,
    cin: usize,
    ksize: usize,
    cout: usize,
) {
    let out_len = len - ksize + 1;
    for i in 0..out_len {
        let go_row = &grad_out[i * cout..(i + 1) * cout];
        for k in 0..ksize {
            let in_row = &input[(i + k) * cin..(i + k + 1) * cin];
            let gi_row = &mut grad_input[(i + k) * cin..(i + k + 1) * cin];
            let k_plane = &kernels[k * cin * cout..(k + 1) * cin * cout];
            let gk_plane = &mut grad_kernels[k * cin * cout..(k + 1) * cin * cout];
            for c in 0..cin {
                gi_row[c] = gi_row[c] + dot(&k_plane[c * cout..(c + 1) * cout], go_row);
                axpy(in_row[c], go_row, &mut gk_plane[c * cout..(c + 1) * cout]);
            }
        }
    }
}

/// y[o] = sum_i x[i] * w[i][o]  (w is [in, out], row-major)
pub fn matvec_forward<S: Scalar>(x: &[S], w: &[S], y: &mut [S], n_in: usize, n_out: usize) {
    for (i, &xv) in x.iter().enumerate().take(n_in) {
        axpy(xv, &w[i * n_out..(i + 1) * n_out], y);
    }
}

/// Backward of [`matvec_forward`] into both operands.
pub fn matvec_backward<S: Scalar>(
    x: &[S],
    w: &[S],
    grad_y: &[S],
    grad_x: &mut [S],
    grad_w: &mut [S],
    n_in: usize,
    n_out: usize,
) {
    for i in 0..n_in {
        grad_x[i] = grad_x[i] + dot(&w[i * n_out..(i + 1) * n_out], grad_y);
        axpy(x[i], grad_y, &mut grad_w[i * n_out..(i + 1) * n_out]);
    }
}
