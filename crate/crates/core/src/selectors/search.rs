use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::density::{Bandwidths, Sample};
use crate::error::{Error, Result};

/// Candidate bandwidth ranges and the grid-search schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub h1_range: (f64, f64),
    pub h2_range: (f64, f64),
    pub grid_points_per_axis: usize,
    pub refine_rounds: usize,
}

impl SearchSpec {
    pub const DEFAULT_LO: f64 = 0.02;
    pub const DEFAULT_HI: f64 = 2.0;
    pub const DEFAULT_GRID: usize = 12;
    pub const DEFAULT_ROUNDS: usize = 3;

    /// `[0.02, 2]` times the standard deviation of each coordinate.
    pub fn default_for(sample: &Sample) -> Result<Self> {
        let sx = sd(sample.x());
        let sy = sd(sample.y());
        if !(sx > 0.0 && sy > 0.0) {
            return Err(Error::InvalidSample(
                "default search ranges need nonconstant x and y".into(),
            ));
        }
        let spec = Self {
            h1_range: (Self::DEFAULT_LO * sx, Self::DEFAULT_HI * sx),
            h2_range: (Self::DEFAULT_LO * sy, Self::DEFAULT_HI * sy),
            grid_points_per_axis: Self::DEFAULT_GRID,
            refine_rounds: Self::DEFAULT_ROUNDS,
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("h1", self.h1_range), ("h2", self.h2_range)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} range must satisfy 0 < lo <= hi < inf, got [{lo}, {hi}]"
                )));
            }
        }
        if self.grid_points_per_axis < 4 {
            return Err(Error::InvalidConfig(format!(
                "grid_points_per_axis must be at least 4, got {}",
                self.grid_points_per_axis
            )));
        }
        Ok(())
    }
}

pub(crate) fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// Equally spaced response grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YGrid {
    points: Vec<f64>,
}

impl YGrid {
    pub const DEFAULT_POINTS: usize = 101;

    pub fn new(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) || m < 2 {
            return Err(Error::InvalidConfig(format!(
                "y-grid needs lo < hi and at least 2 points, got [{lo}, {hi}] with {m}"
            )));
        }
        let step = (hi - lo) / (m - 1) as f64;
        let points = (0..m).map(|k| lo + step * k as f64).collect();
        Ok(Self { points })
    }

    /// `m` points over the observed response range.
    pub fn over_responses(sample: &Sample, m: usize) -> Result<Self> {
        Self::new(sample.y_min(), sample.y_max(), m)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.points[1] - self.points[0]
    }
}

/// One evaluated candidate. `value` is `None` for infeasible candidates,
/// with the reason in `note`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub h: Bandwidths,
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    H1Lower,
    H1Upper,
    H2Lower,
    H2Upper,
}

/// Outcome of [`minimize_criterion`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub h: Bandwidths,
    pub value: f64,
    pub trace: Vec<TraceEntry>,
    /// Range ends the minimizer sits on.
    pub boundary: Vec<Boundary>,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| match k {
            0 => lo,
            k if k == n - 1 => hi,
            k => (a + (b - a) * k as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Local refinement axis: five points at `±2, ±1, 0` log-steps around
/// `center`, clamped to the range.
fn refine_axis(center: f64, lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    let c = center.ln();
    let mut v: Vec<f64> = (-2..=2)
        .map(|k| {
            if k == 0 {
                center
            } else {
                (c + step * k as f64).exp().clamp(lo, hi)
            }
        })
        .collect();
    v.dedup();
    v
}

/// Log-spaced grid search followed by `refine_rounds` rounds of local 5 × 5
/// grids whose log-step shrinks by 4 each round.
///
/// The criterion returns `Err(reason)` for an infeasible candidate;
/// non-finite values are treated the same way. Every evaluation is kept in
/// the trace; repeated candidates are evaluated once. Ties go to the smaller
/// `h1`, then the smaller `h2`. A degenerate range `lo == hi` fixes that
/// coordinate.
pub fn minimize_criterion<F>(mut criterion: F, spec: &SearchSpec) -> Result<Minimum>
where
    F: FnMut(Bandwidths) -> std::result::Result<f64, String>,
{
    spec.validate()?;
    let (a1, b1) = spec.h1_range;
    let (a2, b2) = spec.h2_range;
    let g = spec.grid_points_per_axis;
    let mut memo: HashMap<(u64, u64), Option<f64>> = HashMap::new();
    let mut trace = Vec::new();
    let mut best: Option<(f64, Bandwidths)> = None;

    let mut visit = |h1: f64, h2: f64, best: &mut Option<(f64, Bandwidths)>| {
        let key = (h1.to_bits(), h2.to_bits());
        if memo.contains_key(&key) {
            return;
        }
        let h = Bandwidths { h1, h2 };
        let (value, note) = match criterion(h) {
            Ok(v) if v.is_finite() => (Some(v), None),
            Ok(v) => (None, Some(format!("criterion value {v}"))),
            Err(reason) => (None, Some(reason)),
        };
        memo.insert(key, value);
        trace.push(TraceEntry { h, value, note });
        if let Some(v) = value {
            let better = match best {
                None => true,
                Some((bv, bh)) => {
                    v < *bv || (v == *bv && (h1 < bh.h1 || (h1 == bh.h1 && h2 < bh.h2)))
                }
            };
            if better {
                *best = Some((v, h));
            }
        }
    };

    for &h1 in &log_grid(a1, b1, g) {
        for &h2 in &log_grid(a2, b2, g) {
            visit(h1, h2, &mut best);
        }
    }
    if best.is_none() {
        return Err(Error::NoFeasibleCandidate(format!(
            "all {} grid candidates are infeasible",
            trace.len()
        )));
    }
    let mut step1 = if a1 < b1 { (b1 / a1).ln() / (g - 1) as f64 } else { 0.0 };
    let mut step2 = if a2 < b2 { (b2 / a2).ln() / (g - 1) as f64 } else { 0.0 };
    for _ in 0..spec.refine_rounds {
        step1 /= 4.0;
        step2 /= 4.0;
        let (_, centre) = best.expect("checked above");
        for &h1 in &refine_axis(centre.h1, a1, b1, step1) {
            for &h2 in &refine_axis(centre.h2, a2, b2, step2) {
                visit(h1, h2, &mut best);
            }
        }
    }
    let (value, h) = best.expect("checked above");
    let mut boundary = Vec::new();
    if a1 < b1 && h.h1 == a1 {
        boundary.push(Boundary::H1Lower);
    }
    if a1 < b1 && h.h1 == b1 {
        boundary.push(Boundary::H1Upper);
    }
    if a2 < b2 && h.h2 == a2 {
        boundary.push(Boundary::H2Lower);
    }
    if a2 < b2 && h.h2 == b2 {
        boundary.push(Boundary::H2Upper);
    }
    Ok(Minimum {
        h,
        value,
        trace,
        boundary,
    })
}

/// Selector tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Reference,
    Regression,
    BootDensity,
    CvDensity,
    CvMode,
    BootMode,
    OracleDensity,
    OracleMode,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Reference,
        Method::Regression,
        Method::BootDensity,
        Method::CvDensity,
        Method::CvMode,
        Method::BootMode,
        Method::OracleDensity,
        Method::OracleMode,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Reference => "reference",
            Method::Regression => "regression",
            Method::BootDensity => "boot_density",
            Method::CvDensity => "cv_density",
            Method::CvMode => "cv_mode",
            Method::BootMode => "boot_mode",
            Method::OracleDensity => "oracle_density",
            Method::OracleMode => "oracle_mode",
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self, Method::OracleDensity | Method::OracleMode)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown method {s:?}; expected one of {}",
                    Method::ALL.map(|m| m.as_str()).join(", ")
                ))
            })
    }
}

/// Selected bandwidths with the full search record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    pub h: Bandwidths,
    pub criterion_value: f64,
    pub trace: Vec<TraceEntry>,
    pub boundary: Vec<Boundary>,
    /// Method-specific details such as pilot fits and penalty counts.
    pub diagnostics: BTreeMap<String, serde_json::Value>,
}

impl SelectionResult {
    pub(crate) fn from_minimum(method: Method, m: Minimum) -> Self {
        Self {
            method,
            h: m.h,
            criterion_value: m.value,
            trace: m.trace,
            boundary: m.boundary,
            diagnostics: BTreeMap::new(),
        }
    }

    pub(crate) fn with(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.diagnostics.insert(key.to_string(), v);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(r1: (f64, f64), r2: (f64, f64)) -> SearchSpec {
        SearchSpec {
            h1_range: r1,
            h2_range: r2,
            grid_points_per_axis: 12,
            refine_rounds: 3,
        }
    }

    #[test]
    fn quadratic_minimum() {
        let s = spec((0.1, 10.0), (0.1, 10.0));
        let m = minimize_criterion(|h| Ok((h.h1 - 1.0).powi(2) + (h.h2 - 2.0).powi(2)), &s).unwrap();
        // final log-step is ln(100)/11/64
        let cell = (100f64.ln() / 11.0 / 64.0).exp() - 1.0;
        assert!((m.h.h1 / 1.0).ln().abs() <= cell, "{:?}", m.h);
        assert!((m.h.h2 / 2.0).ln().abs() <= cell, "{:?}", m.h);
        assert!(m.trace.iter().all(|t| t.value.unwrap() >= m.value));
        assert!(m.boundary.is_empty());
    }

    #[test]
    fn constant_criterion_picks_smallest() {
        let s = spec((0.5, 4.0), (0.2, 3.0));
        let m = minimize_criterion(|_| Ok(1.0), &s).unwrap();
        assert_eq!(m.h, Bandwidths { h1: 0.5, h2: 0.2 });
        assert_eq!(m.boundary, vec![Boundary::H1Lower, Boundary::H2Lower]);
    }

    #[test]
    fn boundary_minimum_is_flagged() {
        let s = spec((0.1, 1.0), (0.3, 2.0));
        let m = minimize_criterion(|h| Ok(h.h1 + h.h2), &s).unwrap();
        assert_eq!(m.h, Bandwidths { h1: 0.1, h2: 0.3 });
        assert!(m.boundary.contains(&Boundary::H1Lower));
        assert!(m.boundary.contains(&Boundary::H2Lower));
        let m = minimize_criterion(|h| Ok(-h.h1 + h.h2), &s).unwrap();
        assert_eq!(m.h.h1, 1.0);
        assert!(m.boundary.contains(&Boundary::H1Upper));
    }

    #[test]
    fn infeasible_candidates() {
        let s = spec((0.1, 1.0), (0.1, 1.0));
        let m = minimize_criterion(
            |h| if h.h1 < 0.5 { Err("too small".into()) } else { Ok(h.h1) },
            &s,
        )
        .unwrap();
        assert!(m.h.h1 >= 0.5);
        assert!(m.trace.iter().any(|t| t.value.is_none() && t.note.as_deref() == Some("too small")));
        assert!(matches!(
            minimize_criterion(|_| Ok(f64::INFINITY), &s),
            Err(Error::NoFeasibleCandidate(_))
        ));
    }

    #[test]
    fn one_dimensional_search() {
        let s = spec((0.1, 10.0), (0.7, 0.7));
        let m = minimize_criterion(|h| Ok((h.h1.ln() - 0.5).powi(2)), &s).unwrap();
        assert!(m.trace.iter().all(|t| t.h.h2 == 0.7));
        assert!((m.h.h1.ln() - 0.5).abs() < 0.02);
    }

    #[test]
    fn spec_validation() {
        let mut s = spec((0.1, 1.0), (0.1, 1.0));
        s.grid_points_per_axis = 3;
        assert!(s.validate().is_err());
        let s = spec((0.0, 1.0), (0.1, 1.0));
        assert!(s.validate().is_err());
        let s = spec((2.0, 1.0), (0.1, 1.0));
        assert!(s.validate().is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!("simplex".parse::<Method>().is_err());
    }
}
