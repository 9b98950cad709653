use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// B-spline basis on a clamped knot vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    pub degree: usize,
    /// Full knot vector, boundary knots repeated `degree + 1` times.
    pub knots: Vec<f64>,
}

impl BSplineBasis {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if knots.len() < degree + 2 {
            return Err(Error::InvalidConfig(format!(
                "degree {degree} needs at least {} knots",
                degree + 2
            )));
        }
        if knots.windows(2).any(|w| !(w[0] <= w[1])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidConfig("knots must be finite and nondecreasing".into()));
        }
        let b = Self { degree, knots };
        if !(b.lo() < b.hi()) {
            return Err(Error::InvalidConfig("knot span is empty".into()));
        }
        Ok(b)
    }

    /// Clamped basis with `n_interior` equally spaced interior knots on `[lo, hi]`.
    pub fn uniform(degree: usize, n_interior: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidConfig(format!("empty span [{lo}, {hi}]")));
        }
        let mut knots = vec![lo; degree + 1];
        let step = (hi - lo) / (n_interior + 1) as f64;
        knots.extend((1..=n_interior).map(|k| lo + step * k as f64));
        knots.extend(std::iter::repeat(hi).take(degree + 1));
        Self::new(degree, knots)
    }

    pub fn num_functions(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn lo(&self) -> f64 {
        self.knots[self.degree]
    }

    pub fn hi(&self) -> f64 {
        self.knots[self.knots.len() - self.degree - 1]
    }

    /// Index `i` of the knot span `[t_i, t_{i+1})` holding `x`; the right end
    /// belongs to the last nonempty span.
    fn span(&self, x: f64) -> usize {
        let p = self.degree;
        let last = self.num_functions() - 1;
        if x >= self.hi() {
            let mut i = last;
            while self.knots[i] >= self.knots[i + 1] {
                i -= 1;
            }
            return i;
        }
        let mut lo = p;
        let mut hi = last + 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// All basis values at `x` via the Cox–de Boor triangle.
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_functions()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub(crate) fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        if !(x >= self.lo() && x <= self.hi()) {
            return Err(Error::OutsideSpan {
                x,
                lo: self.lo(),
                hi: self.hi(),
            });
        }
        let p = self.degree;
        let i = self.span(x);
        let t = &self.knots;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[i + 1 - j];
            right[j] = t[i + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom > 0.0 { n[r] / denom } else { 0.0 };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, v) in n.into_iter().enumerate() {
            out[i - p + r] = v;
        }
        Ok(())
    }
}

/// Basis evaluation by the Cox–de Boor recursion.
pub fn bspline_basis_eval(basis: &BSplineBasis, x: f64) -> Result<Vec<f64>> {
    basis.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Textbook recursion on the full definition, 0/0 taken as 0.
    fn naive(t: &[f64], i: usize, p: usize, x: f64, last_span: usize) -> f64 {
        if p == 0 {
            let inside = t[i] <= x && x < t[i + 1];
            let right_end = i == last_span && x == t[i + 1];
            return if inside || right_end { 1.0 } else { 0.0 };
        }
        let a = if t[i + p] > t[i] {
            (x - t[i]) / (t[i + p] - t[i]) * naive(t, i, p - 1, x, last_span)
        } else {
            0.0
        };
        let b = if t[i + p + 1] > t[i + 1] {
            (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * naive(t, i + 1, p - 1, x, last_span)
        } else {
            0.0
        };
        a + b
    }

    fn naive_all(b: &BSplineBasis, x: f64) -> Vec<f64> {
        let last_span = (0..b.knots.len() - 1)
            .rev()
            .find(|&i| b.knots[i] < b.knots[i + 1])
            .unwrap();
        (0..b.num_functions())
            .map(|i| naive(&b.knots, i, b.degree, x, last_span))
            .collect()
    }

    #[test]
    fn indicator_basis() {
        let b = BSplineBasis::new(0, vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(b.eval(0.5).unwrap(), vec![1.0, 0.0]);
        assert_eq!(b.eval(2.0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn cubic_matches_recursion() {
        let b = BSplineBasis::uniform(3, 3, 0.0, 1.0).unwrap();
        assert_eq!(b.num_functions(), 7);
        for x in [0.0, 0.1, 0.25, 0.5, 0.77, 1.0] {
            let fast = b.eval(x).unwrap();
            let slow = naive_all(&b, x);
            for (u, v) in fast.iter().zip(&slow) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn outside_span() {
        let b = BSplineBasis::uniform(2, 1, -1.0, 1.0).unwrap();
        assert!(matches!(b.eval(1.5), Err(Error::OutsideSpan { .. })));
        assert!(BSplineBasis::new(1, vec![0.0, 2.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in -3.0..5.0f64, deg in 0usize..4, inner in 0usize..5) {
            let b = BSplineBasis::uniform(deg, inner, -3.0, 5.0).unwrap();
            let v = b.eval(x).unwrap();
            prop_assert!(v.iter().all(|&u| u >= 0.0));
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
