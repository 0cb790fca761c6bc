//! Finite-difference verification of analytic gradients.
//!
//! Checks run in f64: central differences with h = 1e-5 lose roughly
//! half the mantissa, which still leaves ~1e-10 of headroom below the
//! 1e-5 acceptance threshold, whereas f32 would drown the comparison in
//! roundoff.

/// Step size for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Default relative-error tolerance for a passing check.
pub const FD_TOLERANCE: f64 = 1e-5;

/// Outcome of comparing analytic against numeric gradients.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_error < self.tolerance
    }
}

/// |a - n| / max(1, |a|, |n|): absolute near zero, relative for large
/// magnitudes.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1.0f64.max(analytic.abs()).max(numeric.abs())
}

/// Compare two gradient vectors coordinate by coordinate.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64], tolerance: f64) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    let mut max_rel_error = 0.0;
    let mut worst_index = 0;
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let e = relative_error(a, n);
        if e > max_rel_error {
            max_rel_error = e;
            worst_index = i;
        }
    }
    GradCheckReport { checked: analytic.len(), max_rel_error, worst_index, tolerance }
}

/// Numeric gradient of `f` at `params` for the given coordinates, by
/// central differences. `params` is restored exactly before returning.
pub fn numeric_gradient<F>(params: &mut [f64], mut f: F, coords: &[usize]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut out = Vec::with_capacity(coords.len());
    for &i in coords {
        let saved = params[i];
        params[i] = saved + FD_STEP;
        let plus = f(params);
        params[i] = saved - FD_STEP;
        let minus = f(params);
        params[i] = saved;
        out.push((plus - minus) / (2.0 * FD_STEP));
    }
    out
}

/// Check every coordinate of `analytic` against central differences of
/// `f` around `params`.
pub fn finite_difference_check<F>(
    params: &mut [f64],
    f: F,
    analytic: &[f64],
    tolerance: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "param/gradient lengths differ");
    let coords: Vec<usize> = (0..params.len()).collect();
    let numeric = numeric_gradient(params, f, &coords);
    compare_gradients(analytic, &numeric, tolerance)
}

/// Check only the listed coordinates; `analytic` is still the full
/// gradient vector and is indexed by the same coordinates.
pub fn finite_difference_check_sampled<F>(
    params: &mut [f64],
    f: F,
    analytic: &[f64],
    coords: &[usize],
    tolerance: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    let numeric = numeric_gradient(params, f, coords);
    let picked: Vec<f64> = coords.iter().map(|&i| analytic[i]).collect();
    compare_gradients(&picked, &numeric, tolerance)
}
