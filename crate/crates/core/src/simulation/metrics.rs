use serde::{Deserialize, Serialize};

use super::config::{true_modes, SimulationConfig};
use crate::density::{Bandwidths, Sample};
use crate::error::{Error, Result};
use crate::modes::{CurvePoint, ModeSet};
use crate::selectors::weights::{query_weight_rows, scaled_kernel_matrix};
use crate::setdist::hausdorff_slices;

/// Evaluation grids: `x_k = x_lo + k Δ` for `k = 0..=⌊(x_hi - x_lo)/Δ⌋`, and
/// `y_points` equally spaced responses over the observed range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub dx: f64,
    pub y_points: usize,
}

impl Default for EvalGrid {
    fn default() -> Self {
        Self {
            x_lo: -2.0,
            x_hi: 2.0,
            dx: 0.05,
            y_points: 201,
        }
    }
}

impl EvalGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.x_lo < self.x_hi && self.x_hi.is_finite() && self.x_lo.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "evaluation grid needs dx > 0 and x_lo < x_hi, got dx = {}, [{}, {}]",
                self.dx, self.x_lo, self.x_hi
            )));
        }
        if self.y_points < 2 {
            return Err(Error::InvalidConfig("evaluation grid needs at least 2 y points".into()));
        }
        Ok(())
    }

    pub fn x_points(&self) -> Vec<f64> {
        let m = ((self.x_hi - self.x_lo) / self.dx * (1.0 + 1e-12)).floor() as usize;
        (0..=m).map(|k| self.x_lo + k as f64 * self.dx).collect()
    }

    /// Response grid over `[lo, hi]` and its spacing.
    pub fn y_points_over(&self, lo: f64, hi: f64) -> (Vec<f64>, f64) {
        let step = (hi - lo) / (self.y_points - 1) as f64;
        ((0..self.y_points).map(|j| lo + j as f64 * step).collect(), step)
    }
}

/// Mode-based error with the count of grid points lacking an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EiseM {
    pub value: f64,
    pub missing: usize,
}

/// True mode sets on the grid's x-points.
pub fn true_mode_grid(config: &SimulationConfig, grid: &EvalGrid) -> Vec<ModeSet> {
    grid.x_points().into_iter().map(|x| true_modes(config, x)).collect()
}

/// `Σ_k Haus²(M̂(x_k), M(x_k)) p(x_k) Δ`; a missing or empty estimate costs
/// `y_range²` at its grid point.
pub fn eise_m(
    estimated: &[CurvePoint],
    config: &SimulationConfig,
    grid: &EvalGrid,
    y_range: f64,
) -> Result<EiseM> {
    eise_m_against(estimated, &true_mode_grid(config, grid), config, grid, y_range)
}

/// [`eise_m`] with precomputed true mode sets.
pub fn eise_m_against(
    estimated: &[CurvePoint],
    truth: &[ModeSet],
    config: &SimulationConfig,
    grid: &EvalGrid,
    y_range: f64,
) -> Result<EiseM> {
    let xs = grid.x_points();
    if estimated.len() != xs.len() || truth.len() != xs.len() {
        return Err(Error::InvalidConfig(format!(
            "estimates ({}) and truth ({}) must align with the {} grid points",
            estimated.len(),
            truth.len(),
            xs.len()
        )));
    }
    let mut value = 0.0;
    let mut missing = 0;
    for ((est, tr), &x) in estimated.iter().zip(truth).zip(&xs) {
        let d2 = match est.modes() {
            Some(m) if !m.is_empty() => hausdorff_slices(m.locations(), tr.locations())?.powi(2),
            _ => {
                missing += 1;
                y_range * y_range
            }
        };
        value += d2 * config.x_pdf(x) * grid.dx;
    }
    Ok(EiseM { value, missing })
}

/// `Σ_j Σ_k (p̂(y_j|x_k) - p(y_j|x_k))² p(x_k) Δ Δ'` for any estimate, with
/// the y-grid over `[y_lo, y_hi]`.
pub fn eise_d(
    mut estimate: impl FnMut(f64, f64) -> Result<f64>,
    config: &SimulationConfig,
    grid: &EvalGrid,
    y_lo: f64,
    y_hi: f64,
) -> Result<f64> {
    grid.validate()?;
    let (ys, dy) = grid.y_points_over(y_lo, y_hi);
    let mut total = 0.0;
    for x in grid.x_points() {
        let mut inner = 0.0;
        for &y in &ys {
            let e = estimate(x, y)? - config.conditional_pdf(x, y);
            inner += e * e;
        }
        total += inner * config.x_pdf(x);
    }
    Ok(total * grid.dx * dy)
}

/// [`eise_d`] of the kernel estimate from `sample` at `h`, with the y-grid
/// over the observed response range. Evaluated as a product of kernel
/// matrices.
pub fn eise_d_kernel(
    sample: &Sample,
    h: Bandwidths,
    config: &SimulationConfig,
    grid: &EvalGrid,
) -> Result<f64> {
    grid.validate()?;
    let xs = grid.x_points();
    let (ys, dy) = grid.y_points_over(sample.y_min(), sample.y_max());
    let w = query_weight_rows(sample.x(), h.h1, &xs)
        .map_err(|r| Error::UndefinedEstimate { x: xs[r] })?;
    let k = scaled_kernel_matrix(sample.y(), &ys, h.h2);
    let est = w * k;
    let mut total = 0.0;
    for (r, &x) in xs.iter().enumerate() {
        let inner: f64 = ys
            .iter()
            .enumerate()
            .map(|(c, &y)| (est[(r, c)] - config.conditional_pdf(x, y)).powi(2))
            .sum();
        total += inner * config.x_pdf(x);
    }
    Ok(total * grid.dx * dy)
}
