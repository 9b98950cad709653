use super::search::{minimize_criterion, Method, SearchSpec, SelectionResult};
use super::weights::{scaled_kernel_matrix, x_weight_rows};
use crate::density::{Bandwidths, Sample, WeightWindow};
use crate::error::{Error, Result};
use crate::modes::{LocalResponses, MeanShiftConfig};
use crate::setdist::point_to_set_slice;

/// Leave-one-out density criterion
/// `CV_D(h) = (1/n) Σ w(X_i) ∫ p̂_{-i}(y|X_i)² dy - (2/n) Σ w(X_i) p̂_{-i}(Y_i|X_i)`.
///
/// The integral is exact: for Gaussian `K2`,
/// `∫ K_h2(a - y) K_h2(b - y) dy = φ((a - b)/(√2 h2)) / (√2 h2)`, so the first
/// term is the quadratic form `w_iᵀ G w_i` in the leave-one-out weights.
pub fn cv_density(sample: &Sample, h: Bandwidths, window: &WeightWindow) -> Result<f64> {
    let x = sample.x();
    let y = sample.y();
    let rows: Vec<usize> = (0..sample.len()).filter(|&i| window.contains(x[i])).collect();
    if rows.is_empty() {
        return Ok(0.0);
    }
    let w = x_weight_rows(x, h.h1, &rows, true)
        .map_err(|index| Error::LeaveOneOutUndefined { index })?;
    let g = scaled_kernel_matrix(y, y, std::f64::consts::SQRT_2 * h.h2);
    let k = scaled_kernel_matrix(y, y, h.h2);
    let wg = &w * &g;
    let mut square = 0.0;
    let mut fit = 0.0;
    for (r, &i) in rows.iter().enumerate() {
        square += wg.row(r).dot(&w.row(r));
        fit += w.row(r).transpose().dot(&k.column(i));
    }
    let n = sample.len() as f64;
    Ok(square / n - 2.0 * fit / n)
}

/// Leave-one-out mode criterion
/// `CV_M(h) = (1/n) Σ d²(M̂_{-i}(X_i), Y_i) N_{-i}(X_i)² w(X_i)`.
///
/// Mean-shift starts for `M̂_{-i}` span the leave-one-out response range. A
/// retained observation without a leave-one-out mode set makes the criterion
/// undefined at `h`.
pub fn cv_mode(
    sample: &Sample,
    h: Bandwidths,
    window: &WeightWindow,
    cfg: &MeanShiftConfig,
) -> Result<f64> {
    cfg.validate()?;
    let x = sample.x();
    let y = sample.y();
    let mut total = 0.0;
    for i in 0..sample.len() {
        if !window.contains(x[i]) {
            continue;
        }
        let modes = LocalResponses::build(sample, h.h1, x[i], Some(i))
            .and_then(|local| local.modes(h.h2, x[i], cfg))
            .map_err(|_| Error::LeaveOneOutUndefined { index: i })?;
        let d = point_to_set_slice(y[i], modes.locations());
        let count = modes.len() as f64;
        total += d * d * count * count;
    }
    Ok(total / sample.len() as f64)
}

/// Minimizes [`cv_density`] over the search grid.
pub fn select_cv_density(
    sample: &Sample,
    window: &WeightWindow,
    spec: &SearchSpec,
) -> Result<SelectionResult> {
    sample.require_len(2, "density cross-validation")?;
    let m = minimize_criterion(
        |h| cv_density(sample, h, window).map_err(|e| e.to_string()),
        spec,
    )?;
    Ok(SelectionResult::from_minimum(Method::CvDensity, m))
}

/// Minimizes [`cv_mode`] over the search grid.
pub fn select_cv_mode(
    sample: &Sample,
    window: &WeightWindow,
    spec: &SearchSpec,
    cfg: &MeanShiftConfig,
) -> Result<SelectionResult> {
    sample.require_len(2, "mode cross-validation")?;
    cfg.validate()?;
    let m = minimize_criterion(
        |h| cv_mode(sample, h, window, cfg).map_err(|e| e.to_string()),
        spec,
    )?;
    Ok(SelectionResult::from_minimum(Method::CvMode, m))
}
