//! Kernels and the two-bandwidth conditional density estimator.
//!
//! The estimator is the ratio of a product-kernel joint density estimate to a
//! kernel marginal estimate in `x`:
//!
//! ```text
//! p̂(y|x) = Σ K1((X_i - x)/h1) K2((Y_i - y)/h2) / (h2 Σ K1((X_i - x)/h1))
//! ```
//!
//! Both kernels are the standard normal density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Denominators below this are treated as an undefined estimate.
pub const DENOMINATOR_FLOOR: f64 = 1e-300;

/// Standard normal density.
#[inline]
pub fn gaussian_kernel(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

/// Paired observations `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Sample {
    /// Builds a sample from equal-length finite vectors.
    ///
    /// A single observation is accepted: the estimators are well defined for
    /// it. Selectors that need more data check their own minimum.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidSample(format!(
                "x has {} entries but y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::InvalidSample("no observations".into()));
        }
        if let Some(i) = x
            .iter()
            .zip(&y)
            .position(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(Error::InvalidSample(format!(
                "observation {i} is not finite"
            )));
        }
        Ok(Self { x, y })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let (x, y) = pairs.iter().copied().unzip();
        Self::new(x, y)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_min(&self) -> f64 {
        self.y.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn y_max(&self) -> f64 {
        self.y.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn y_range(&self) -> f64 {
        self.y_max() - self.y_min()
    }

    /// Same covariates, new responses.
    pub fn with_responses(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.x.clone(), y)
    }

    pub(crate) fn require_len(&self, min: usize, what: &str) -> Result<()> {
        if self.len() < min {
            return Err(Error::InvalidSample(format!(
                "{what} needs at least {min} observations, got {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Smoothing parameters: `h1` in units of x, `h2` in units of y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub h1: f64,
    pub h2: f64,
}

impl Bandwidths {
    pub fn new(h1: f64, h2: f64) -> Result<Self> {
        if !(h1 > 0.0 && h2 > 0.0 && h1.is_finite() && h2.is_finite()) {
            return Err(Error::InvalidBandwidths { h1, h2 });
        }
        Ok(Self { h1, h2 })
    }
}

/// Indicator weight `w(x) = 1{x_lo <= x <= x_hi}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightWindow {
    pub x_lo: f64,
    pub x_hi: f64,
}

impl WeightWindow {
    pub fn new(x_lo: f64, x_hi: f64) -> Result<Self> {
        if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(Error::DegenerateWindow(format!("[{x_lo}, {x_hi}]")));
        }
        Ok(Self { x_lo, x_hi })
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi
    }

    #[inline]
    pub fn weight(&self, x: f64) -> f64 {
        if self.contains(x) {
            1.0
        } else {
            0.0
        }
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }
}

/// Empirical percentile with linear interpolation between order statistics.
/// `sorted` must be ascending and nonempty; `pct` in [0, 100].
pub fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = pct / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Window between two empirical percentiles of the covariate.
pub fn weight_window(sample: &Sample, lo_pct: f64, hi_pct: f64) -> Result<WeightWindow> {
    if !(0.0..=100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct >= hi_pct {
        return Err(Error::InvalidConfig(format!(
            "window percentiles must satisfy 0 <= lo < hi <= 100, got ({lo_pct}, {hi_pct})"
        )));
    }
    let mut xs = sample.x().to_vec();
    xs.sort_by(f64::total_cmp);
    let lo = percentile_sorted(&xs, lo_pct);
    let hi = percentile_sorted(&xs, hi_pct);
    if !(lo < hi) {
        return Err(Error::DegenerateWindow(format!(
            "percentiles ({lo_pct}, {hi_pct}) of x coincide at {lo}"
        )));
    }
    WeightWindow::new(lo, hi)
}

/// Raw x-kernel weights `K1((X_i - x)/h1)` and their sum, checked against the
/// underflow floor.
pub(crate) fn x_weights(sample: &Sample, h1: f64, x: f64) -> Result<(Vec<f64>, f64)> {
    let w: Vec<f64> = sample
        .x()
        .iter()
        .map(|&xi| gaussian_kernel((xi - x) / h1))
        .collect();
    let total: f64 = w.iter().sum();
    if !(total >= DENOMINATOR_FLOOR) {
        return Err(Error::UndefinedEstimate { x });
    }
    Ok((w, total))
}

/// Kernel estimate of the conditional density `p̂(y|x)`.
pub fn conditional_density(sample: &Sample, h: Bandwidths, x: f64, y: f64) -> Result<f64> {
    let (w, total) = x_weights(sample, h.h1, x)?;
    let num: f64 = w
        .iter()
        .zip(sample.y())
        .map(|(wi, &yi)| wi * gaussian_kernel((yi - y) / h.h2))
        .sum();
    Ok(num / (total * h.h2))
}

/// Analytic `∂p̂(y|x)/∂y`.
pub fn conditional_density_dy(sample: &Sample, h: Bandwidths, x: f64, y: f64) -> Result<f64> {
    let (w, total) = x_weights(sample, h.h1, x)?;
    let h2 = h.h2;
    // d/dy φ((Y_i - y)/h2)/h2 = φ(t) t / h2², t = (Y_i - y)/h2
    let num: f64 = w
        .iter()
        .zip(sample.y())
        .map(|(wi, &yi)| {
            let t = (yi - y) / h2;
            wi * gaussian_kernel(t) * t
        })
        .sum();
    Ok(num / (total * h2 * h2))
}
