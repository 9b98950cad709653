use super::reference::reference_rule;
use super::search::{minimize_criterion, Method, SearchSpec, SelectionResult, YGrid};
use super::weights::{scaled_kernel_matrix, x_weight_rows};
use crate::density::{Bandwidths, Sample, WeightWindow};
use crate::error::Result;

/// Akaike's penalty `Ξ(u) = (1 + u)/(1 - u)`.
pub fn akaike_penalty(u: f64) -> f64 {
    (1.0 + u) / (1.0 - u)
}

/// Penalized prediction error
/// `Q(h1) = (Δ/n) Σ_i Σ_k {p̂(y_k|X_i) - K_h2(Y_i - y_k)}² w(X_i) Ξ(u_i)`
/// with `u_i = K_h1(0) / Σ_j K_h1(X_j - X_i)`. Candidates where some
/// retained `u_i` reaches 1 are infeasible.
pub fn regression_criterion(
    sample: &Sample,
    h: Bandwidths,
    window: &WeightWindow,
    ygrid: &YGrid,
) -> std::result::Result<f64, String> {
    let x = sample.x();
    let rows: Vec<usize> = (0..sample.len()).filter(|&i| window.contains(x[i])).collect();
    let w = x_weight_rows(x, h.h1, &rows, false)
        .map_err(|i| format!("kernel weights underflow at observation {i}"))?;
    let k = scaled_kernel_matrix(sample.y(), ygrid.points(), h.h2);
    let fitted = &w * &k;
    let mut total = 0.0;
    for (r, &i) in rows.iter().enumerate() {
        let u = w[(r, i)];
        if !(u < 1.0) {
            return Err(format!(
                "penalty singular: observation {i} carries all of its own kernel weight"
            ));
        }
        let sq: f64 = (0..ygrid.len())
            .map(|c| (fitted[(r, c)] - k[(i, c)]).powi(2))
            .sum();
        total += sq * akaike_penalty(u);
    }
    Ok(ygrid.spacing() / sample.len() as f64 * total)
}

/// Fixes `h2` at the reference rule and minimizes [`regression_criterion`]
/// over `h1` within `spec.h1_range`.
pub fn regression_select(
    sample: &Sample,
    window: &WeightWindow,
    ygrid: &YGrid,
    spec: &SearchSpec,
) -> Result<SelectionResult> {
    let h2 = reference_rule(sample, window)?.h2;
    let spec = SearchSpec {
        h2_range: (h2, h2),
        ..*spec
    };
    let m = minimize_criterion(|h| regression_criterion(sample, h, window, ygrid), &spec)?;
    Ok(SelectionResult::from_minimum(Method::Regression, m).with("reference_h2", h2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::gaussian_kernel;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_hand_value() {
        let s = Sample::from_pairs(&[(0.0, 0.0), (0.0, 1.0)]).unwrap();
        let win = WeightWindow::new(-1.0, 1.0).unwrap();
        let grid = YGrid::new(0.0, 1.0, 2).unwrap();
        let h = Bandwidths::new(1.0, 1.0).unwrap();
        // p̂(y|0) = (φ(y) + φ(y - 1))/2 at y ∈ {0, 1}, both (φ(0) + φ(1))/2.
        // Point 1 targets K(0 - y): {φ(0), φ(1)}; point 2 targets {φ(1), φ(0)}.
        let fit = 0.5 * (gaussian_kernel(0.0) + gaussian_kernel(1.0));
        let half_gap = 0.5 * (gaussian_kernel(0.0) - gaussian_kernel(1.0));
        assert_relative_eq!(fit - gaussian_kernel(1.0), half_gap, epsilon = 1e-15);
        // four squared errors of half_gap, each times Ξ(1/2) = 3, Δ = 1, n = 2
        let expect = 1.0 / 2.0 * 4.0 * half_gap * half_gap * 3.0;
        let q = regression_criterion(&s, h, &win, &grid).unwrap();
        assert_relative_eq!(q, expect, epsilon = 1e-15);
        assert_eq!(akaike_penalty(0.5), 3.0);
    }

    #[test]
    fn isolated_point_is_infeasible() {
        let s = Sample::from_pairs(&[(0.0, 0.0), (100.0, 1.0)]).unwrap();
        let win = WeightWindow::new(-1.0, 200.0).unwrap();
        let grid = YGrid::new(0.0, 1.0, 5).unwrap();
        let h = Bandwidths::new(0.1, 1.0).unwrap();
        assert!(regression_criterion(&s, h, &win, &grid).is_err());
    }
}
