//! Point-to-set and Hausdorff distances on the real line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonempty finite set of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSet {
    points: Vec<f64>,
}

impl FiniteSet {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("set points must be finite".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// `min_p |p - y|`.
pub fn point_to_set(a: &FiniteSet, y: f64) -> f64 {
    a.points
        .iter()
        .map(|p| (p - y).abs())
        .fold(f64::INFINITY, f64::min)
}

/// `min_p |p - y|` over a slice; infinite for an empty slice.
pub fn point_to_set_slice(y: f64, points: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| (p - y).abs())
        .fold(f64::INFINITY, f64::min)
}

fn directed(from: &[f64], to: &FiniteSet) -> f64 {
    from.iter()
        .map(|&p| point_to_set(to, p))
        .fold(0.0, f64::max)
}

/// Hausdorff distance, the larger of the two directed max-min distances.
pub fn hausdorff(a: &FiniteSet, b: &FiniteSet) -> f64 {
    directed(&a.points, b).max(directed(&b.points, a))
}

/// Slice form used on mode locations, rejecting empty inputs.
pub fn hausdorff_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let dir = |from: &[f64], to: &[f64]| {
        from.iter()
            .map(|p| to.iter().map(|q| (p - q).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(dir(a, b).max(dir(b, a)))
}
