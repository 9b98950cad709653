//! Dense kernel matrices shared by the density-targeted criteria.

use nalgebra::DMatrix;

use crate::density::{gaussian_kernel, DENOMINATOR_FLOOR, INV_SQRT_2PI};

/// Row-normalized x-kernel weights `W_{ij} = K1((X_j - X_i)/h1) / Σ_j K1(…)`
/// for the rows in `rows`, with the diagonal removed when `leave_out` is
/// set. Exponents are shifted by their row maximum before exponentiation;
/// the underflow check uses the unshifted sum. Returns the offending row
/// index on failure.
pub(crate) fn x_weight_rows(
    x: &[f64],
    h1: f64,
    rows: &[usize],
    leave_out: bool,
) -> std::result::Result<DMatrix<f64>, usize> {
    let n = x.len();
    let mut w = DMatrix::<f64>::zeros(rows.len(), n);
    let mut logs = vec![0.0; n];
    for (r, &i) in rows.iter().enumerate() {
        let mut max = f64::NEG_INFINITY;
        let mut raw = 0.0;
        for j in 0..n {
            if leave_out && j == i {
                logs[j] = f64::NEG_INFINITY;
                continue;
            }
            let t = (x[j] - x[i]) / h1;
            logs[j] = -0.5 * t * t;
            raw += gaussian_kernel(t);
            max = max.max(logs[j]);
        }
        if !(raw >= DENOMINATOR_FLOOR) {
            return Err(i);
        }
        let mut total = 0.0;
        for j in 0..n {
            let v = (logs[j] - max).exp();
            w[(r, j)] = v;
            total += v;
        }
        for j in 0..n {
            w[(r, j)] /= total;
        }
    }
    Ok(w)
}

/// Normalized x-kernel weights of the data `x` at arbitrary query points,
/// one row per query. Returns the failing query index on underflow.
pub(crate) fn query_weight_rows(
    x: &[f64],
    h1: f64,
    queries: &[f64],
) -> std::result::Result<DMatrix<f64>, usize> {
    let n = x.len();
    let mut w = DMatrix::<f64>::zeros(queries.len(), n);
    for (r, &q) in queries.iter().enumerate() {
        let mut max = f64::NEG_INFINITY;
        let mut raw = 0.0;
        for j in 0..n {
            let t = (x[j] - q) / h1;
            w[(r, j)] = -0.5 * t * t;
            raw += gaussian_kernel(t);
            max = max.max(w[(r, j)]);
        }
        if !(raw >= DENOMINATOR_FLOOR) {
            return Err(r);
        }
        let mut total = 0.0;
        for j in 0..n {
            let v = (w[(r, j)] - max).exp();
            w[(r, j)] = v;
            total += v;
        }
        for j in 0..n {
            w[(r, j)] /= total;
        }
    }
    Ok(w)
}

/// `K_h(a_j - b_k) = φ((a_j - b_k)/h)/h` as an `a.len() × b.len()` matrix.
pub(crate) fn scaled_kernel_matrix(a: &[f64], b: &[f64], h: f64) -> DMatrix<f64> {
    let c = INV_SQRT_2PI / h;
    let inv = 0.5 / (h * h);
    DMatrix::from_fn(a.len(), b.len(), |j, k| {
        let d = a[j] - b[k];
        c * (-d * d * inv).exp()
    })
}
