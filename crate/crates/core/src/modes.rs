//! Mean-shift iteration and conditional mode sets.
//!
//! With Gaussian kernels the update `y ← m(y)` is a kernel-weighted average of
//! the responses. In one dimension `m` is nondecreasing
//! (`m'(y) = Var_w(Y) / h2² >= 0`), so every trajectory is monotone and
//! trajectories never cross. [`estimate_modes`] uses this to skip starts that
//! lie inside an interval already swept by an ascending trajectory: they
//! provably converge to the same end point.

use serde::{Deserialize, Serialize};

use crate::density::{gaussian_kernel, Bandwidths, Sample, DENOMINATOR_FLOOR};
use crate::error::{Error, Result};
use crate::setdist::FiniteSet;

/// Relative weights below `exp(-LOG_WEIGHT_CUTOFF)` of the largest are dropped.
const LOG_WEIGHT_CUTOFF: f64 = 40.0;

/// Estimated local modes of `p̂(·|x)` at one covariate value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub at_x: f64,
    locations: Vec<f64>,
}

impl ModeSet {
    /// Sorts and checks for distinct, finite locations.
    pub fn new(at_x: f64, mut locations: Vec<f64>) -> Result<Self> {
        if locations.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("mode locations must be finite".into()));
        }
        locations.sort_by(f64::total_cmp);
        if locations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "mode locations must be distinct".into(),
            ));
        }
        Ok(Self { at_x, locations })
    }

    pub(crate) fn from_sorted_unchecked(at_x: f64, locations: Vec<f64>) -> Self {
        Self { at_x, locations }
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn to_finite_set(&self) -> Result<FiniteSet> {
        FiniteSet::new(self.locations.clone())
    }
}

/// Tuning for the multi-start mean-shift search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftConfig {
    pub max_iter: usize,
    /// Stop once successive iterates differ by less than this (y units).
    pub conv_tol: f64,
    /// End points closer than this are one mode (y units).
    pub merge_tol: f64,
    pub n_starts: usize,
}

impl MeanShiftConfig {
    pub const DEFAULT_MAX_ITER: usize = 2000;
    pub const DEFAULT_N_STARTS: usize = 30;
    pub const DEFAULT_CONV_REL: f64 = 1e-7;
    pub const DEFAULT_MERGE_REL: f64 = 1e-2;

    /// Defaults scaled to a response range; a zero range is treated as 1.
    pub fn for_response_range(range: f64) -> Self {
        let scale = if range > 0.0 && range.is_finite() { range } else { 1.0 };
        Self {
            max_iter: Self::DEFAULT_MAX_ITER,
            conv_tol: Self::DEFAULT_CONV_REL * scale,
            merge_tol: Self::DEFAULT_MERGE_REL * scale,
            n_starts: Self::DEFAULT_N_STARTS,
        }
    }

    pub fn for_sample(sample: &Sample) -> Self {
        Self::for_response_range(sample.y_range())
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.n_starts == 0 {
            return Err(Error::InvalidConfig(
                "max_iter and n_starts must be positive".into(),
            ));
        }
        if !(self.conv_tol > 0.0 && self.conv_tol < self.merge_tol && self.merge_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < conv_tol < merge_tol, got conv_tol = {}, merge_tol = {}",
                self.conv_tol, self.merge_tol
            )));
        }
        Ok(())
    }
}

/// Responses with log x-kernel weights at one covariate value, optionally
/// leaving one observation out. Weights are shifted so the largest is zero.
#[derive(Debug, Clone)]
pub(crate) struct LocalResponses {
    pub(crate) ys: Vec<f64>,
    pub(crate) log_w: Vec<f64>,
    pub(crate) y_min: f64,
    pub(crate) y_max: f64,
}

impl LocalResponses {
    pub(crate) fn build(
        sample: &Sample,
        h1: f64,
        x: f64,
        exclude: Option<usize>,
    ) -> Result<Self> {
        let xs = sample.x();
        let ys = sample.y();
        let mut max_log = f64::NEG_INFINITY;
        let mut raw_total = 0.0;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for j in 0..xs.len() {
            if Some(j) == exclude {
                continue;
            }
            let t = (xs[j] - x) / h1;
            let lw = -0.5 * t * t;
            raw_total += gaussian_kernel(t);
            max_log = max_log.max(lw);
            y_min = y_min.min(ys[j]);
            y_max = y_max.max(ys[j]);
        }
        if !(raw_total >= DENOMINATOR_FLOOR) {
            return Err(Error::NoLocalSupport { x });
        }
        let mut out_y = Vec::new();
        let mut out_w = Vec::new();
        for j in 0..xs.len() {
            if Some(j) == exclude {
                continue;
            }
            let t = (xs[j] - x) / h1;
            let lw = -0.5 * t * t - max_log;
            if lw >= -LOG_WEIGHT_CUTOFF {
                out_y.push(ys[j]);
                out_w.push(lw);
            }
        }
        let mut order: Vec<usize> = (0..out_y.len()).collect();
        order.sort_by(|&a, &b| out_y[a].total_cmp(&out_y[b]));
        Ok(Self {
            ys: order.iter().map(|&k| out_y[k]).collect(),
            log_w: order.iter().map(|&k| out_w[k]).collect(),
            y_min,
            y_max,
        })
    }

    /// One mean-shift update. Terms more than `LOG_WEIGHT_CUTOFF` below the
    /// largest exponent are skipped. Responses are sorted, so the exponent of
    /// the nearest neighbour bounds the window that can contain the rest.
    #[inline]
    pub(crate) fn shift(&self, h2: f64, y: f64) -> f64 {
        let inv = 0.5 / (h2 * h2);
        let expo = |j: usize| {
            let d = self.ys[j] - y;
            self.log_w[j] - d * d * inv
        };
        let at = self.ys.partition_point(|&v| v < y);
        let mut m0 = f64::NEG_INFINITY;
        if at < self.ys.len() {
            m0 = expo(at);
        }
        if at > 0 {
            m0 = m0.max(expo(at - 1));
        }
        let radius = ((LOG_WEIGHT_CUTOFF - m0) / inv).sqrt();
        let lo = self.ys.partition_point(|&v| v < y - radius);
        let hi = self.ys.partition_point(|&v| v <= y + radius);
        let m = (lo..hi).map(expo).fold(m0, f64::max);
        let floor = m - LOG_WEIGHT_CUTOFF;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in lo..hi {
            let e = expo(j);
            if e >= floor {
                let w = (e - m).exp();
                num += w * self.ys[j];
                den += w;
            }
        }
        num / den
    }

    /// log of `Σ w_j φ((Y_j - y)/h2)` up to an additive constant shared by
    /// all `y` at this covariate value.
    pub(crate) fn log_density(&self, h2: f64, y: f64) -> f64 {
        let inv = 0.5 / (h2 * h2);
        let m = self
            .ys
            .iter()
            .zip(&self.log_w)
            .map(|(&yj, &lw)| lw - (yj - y) * (yj - y) * inv)
            .fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = self
            .ys
            .iter()
            .zip(&self.log_w)
            .map(|(&yj, &lw)| (lw - (yj - y) * (yj - y) * inv - m).exp())
            .sum();
        m + s.ln()
    }

    /// Sign test for a strict local maximum: the y-derivative, evaluated at
    /// `y ± h2/10` with a common scaling, must decrease across `y`.
    pub(crate) fn is_local_max(&self, h2: f64, y: f64) -> bool {
        let delta = h2 / 10.0;
        let inv = 0.5 / (h2 * h2);
        let shift = self
            .ys
            .iter()
            .zip(&self.log_w)
            .map(|(&yj, &lw)| lw - (yj - y) * (yj - y) * inv)
            .fold(f64::NEG_INFINITY, f64::max);
        let slope = |at: f64| -> f64 {
            self.ys
                .iter()
                .zip(&self.log_w)
                .map(|(&yj, &lw)| {
                    let d = yj - at;
                    (lw - d * d * inv - shift).exp() * d
                })
                .sum()
        };
        slope(y + delta) - slope(y - delta) < 0.0
    }

    fn run(&self, h2: f64, y0: f64, cfg: &MeanShiftConfig) -> (f64, bool) {
        let mut y = y0;
        for _ in 0..cfg.max_iter {
            let next = self.shift(h2, y);
            if (next - y).abs() < cfg.conv_tol {
                return (next, true);
            }
            y = next;
        }
        (y, false)
    }

    /// Multi-start search over `[y_min, y_max]` of the retained responses.
    ///
    /// The 1-D mean-shift map is nondecreasing, so two starts that reach the
    /// same mode enclose only starts that reach it too. Starts are bisected
    /// and interior runs skipped whenever the two ends agree.
    pub(crate) fn modes(&self, h2: f64, x: f64, cfg: &MeanShiftConfig) -> Result<ModeSet> {
        let starts = start_points(self.y_min, self.y_max, cfg.n_starts);
        let mut ends: Vec<Option<(f64, bool)>> = vec![None; starts.len()];
        let mut end_at = |k: usize| *ends[k].get_or_insert_with(|| self.run(h2, starts[k], cfg));
        let mut pending = vec![(0, starts.len() - 1)];
        while let Some((a, b)) = pending.pop() {
            let (ea, oka) = end_at(a);
            let (eb, okb) = end_at(b);
            if b - a <= 1 || (oka && okb && (eb - ea).abs() < cfg.merge_tol) {
                continue;
            }
            let mid = (a + b) / 2;
            pending.push((mid, b));
            pending.push((a, mid));
        }
        let mut converged = Vec::new();
        let mut stalled = Vec::new();
        for (end, ok) in ends.into_iter().flatten() {
            if ok {
                converged.push(end);
            } else {
                stalled.push(end);
            }
        }
        if converged.is_empty() {
            stalled.sort_by(f64::total_cmp);
            stalled.dedup();
            return Err(Error::NoConvergence {
                partial: ModeSet::from_sorted_unchecked(x, stalled),
            });
        }
        let merged = merge_end_points(converged, cfg.merge_tol, |y| self.log_density(h2, y));
        let kept: Vec<f64> = merged
            .into_iter()
            .filter(|&y| self.is_local_max(h2, y))
            .collect();
        if kept.is_empty() {
            return Err(Error::NoModes { x });
        }
        Ok(ModeSet::from_sorted_unchecked(x, kept))
    }
}

pub(crate) fn start_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || hi <= lo {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| lo + step * k as f64).collect()
}

/// Groups sorted end points whose consecutive gaps are below `merge_tol` and
/// keeps the highest-density member of each group.
pub(crate) fn merge_end_points(
    mut pts: Vec<f64>,
    merge_tol: f64,
    log_density: impl Fn(f64) -> f64,
) -> Vec<f64> {
    pts.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        let mut j = i + 1;
        while j < pts.len() && pts[j] - pts[j - 1] < merge_tol {
            j += 1;
        }
        let best = if j - i == 1 {
            pts[i]
        } else {
            pts[i..j]
                .iter()
                .copied()
                .map(|y| (y, log_density(y)))
                .fold((pts[i], f64::NEG_INFINITY), |acc, cur| {
                    if cur.1 > acc.1 {
                        cur
                    } else {
                        acc
                    }
                })
                .0
        };
        out.push(best);
        i = j;
    }
    out
}

/// One mean-shift step `y ↦ Σ K1 K2 Y_i / Σ K1 K2`.
pub fn mean_shift_update(sample: &Sample, h: Bandwidths, x: f64, y: f64) -> Result<f64> {
    let local = LocalResponses::build(sample, h.h1, x, None)?;
    Ok(local.shift(h.h2, y))
}

/// Iterates from `y0`, returning every iterate including `y0`. Stops when the
/// step falls below `conv_tol` or after `max_iter` updates.
pub fn mean_shift_trajectory(
    sample: &Sample,
    h: Bandwidths,
    x: f64,
    y0: f64,
    cfg: &MeanShiftConfig,
) -> Result<Vec<f64>> {
    let local = LocalResponses::build(sample, h.h1, x, None)?;
    let mut path = vec![y0];
    let mut y = y0;
    for _ in 0..cfg.max_iter {
        let next = local.shift(h.h2, y);
        path.push(next);
        if (next - y).abs() < cfg.conv_tol {
            break;
        }
        y = next;
    }
    Ok(path)
}

/// Estimated mode set `M̂(x)`.
pub fn estimate_modes(
    sample: &Sample,
    h: Bandwidths,
    x: f64,
    cfg: &MeanShiftConfig,
) -> Result<ModeSet> {
    cfg.validate()?;
    let local = LocalResponses::build(sample, h.h1, x, None)?;
    local.modes(h.h2, x, cfg)
}

/// Why a grid point has no mode estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingReason {
    NoLocalSupport,
    NoConvergence,
    NoModes,
}

impl MissingReason {
    pub(crate) fn from_error(e: &Error) -> Option<Self> {
        match e {
            Error::NoLocalSupport { .. } | Error::UndefinedEstimate { .. } => {
                Some(Self::NoLocalSupport)
            }
            Error::NoConvergence { .. } => Some(Self::NoConvergence),
            Error::NoModes { .. } => Some(Self::NoModes),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NoLocalSupport => "no_local_support",
            Self::NoConvergence => "no_convergence",
            Self::NoModes => "no_modes",
        }
    }
}

/// Mode estimate at one grid point of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub modes: std::result::Result<ModeSet, MissingReason>,
}

impl CurvePoint {
    pub fn modes(&self) -> Option<&ModeSet> {
        self.modes.as_ref().ok()
    }
}

/// `estimate_modes` over a grid, keeping failures as missing points.
pub fn mode_curves(
    sample: &Sample,
    h: Bandwidths,
    xs: &[f64],
    cfg: &MeanShiftConfig,
) -> Result<Vec<CurvePoint>> {
    if xs.is_empty() {
        return Err(Error::InvalidConfig("mode curve grid is empty".into()));
    }
    cfg.validate()?;
    xs.iter()
        .map(|&x| match estimate_modes(sample, h, x, cfg) {
            Ok(m) => Ok(CurvePoint { x, modes: Ok(m) }),
            Err(e) => match MissingReason::from_error(&e) {
                Some(r) => Ok(CurvePoint { x, modes: Err(r) }),
                None => Err(e),
            },
        })
        .collect()
}
