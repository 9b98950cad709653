use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::Sample;
use crate::error::{Error, Result};
use crate::rng;

/// Gaussian polynomial regression `Y = β_0 + β_1 z + … + β_k z^k + σ ε` in
/// the standardized covariate `z = (x - center) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    pub degree: usize,
    pub center: f64,
    pub scale: f64,
    /// Coefficients on powers of the standardized covariate.
    pub coefficients: Vec<f64>,
    /// MLE residual scale.
    pub sigma: f64,
    pub loglik: f64,
    pub aic: f64,
}

impl PolynomialModel {
    pub fn mean(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.scale;
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    /// Coefficients on raw powers of `x`.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        // Σ_j c_j ((x - a)/s)^j expanded with the binomial theorem.
        let k = self.degree;
        let mut raw = vec![0.0; k + 1];
        for (j, &c) in self.coefficients.iter().enumerate() {
            let cj = c / self.scale.powi(j as i32);
            let mut binom = 1.0;
            for m in 0..=j {
                // term x^m (-a)^{j-m} C(j, m)
                raw[m] += cj * binom * (-self.center).powi((j - m) as i32);
                binom = binom * (j - m) as f64 / (m + 1) as f64;
            }
        }
        raw
    }

    /// Normal conditional density of the fitted model.
    pub fn conditional_density(&self, x: f64, y: f64) -> f64 {
        crate::density::gaussian_kernel((y - self.mean(x)) / self.sigma) / self.sigma
    }
}

/// Least-squares fits of degree 0..=max_degree; returns the AIC minimizer.
pub fn fit_polynomial_aic(sample: &Sample, max_degree: usize) -> Result<PolynomialModel> {
    let n = sample.len();
    if n <= max_degree + 2 {
        return Err(Error::InvalidSample(format!(
            "polynomial pilot of degree up to {max_degree} needs more than {} observations, got {n}",
            max_degree + 2
        )));
    }
    let x = sample.x();
    let y = sample.y();
    let center = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n as f64;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let z: Vec<f64> = x.iter().map(|v| (v - center) / scale).collect();
    let yv = DVector::from_column_slice(y);
    let y_scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    // keeps the log-likelihood finite on exactly fitted data
    let sigma_floor = 1e-12 * y_scale;

    let mut best: Option<PolynomialModel> = None;
    for degree in 0..=max_degree {
        let design = DMatrix::from_fn(n, degree + 1, |i, j| z[i].powi(j as i32));
        let svd = design.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-10 * smax) {
            return Err(Error::RankDeficient(format!(
                "degree {degree} design has condition {:.3e}",
                smax / smin
            )));
        }
        let beta = svd
            .solve(&yv, 0.0)
            .map_err(|e| Error::RankDeficient(e.to_string()))?;
        let resid = &yv - &design * &beta;
        let rss = resid.norm_squared();
        let sigma = (rss / n as f64).sqrt().max(sigma_floor);
        let loglik = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * sigma * sigma).ln())
            - rss / (2.0 * sigma * sigma);
        let aic = 2.0 * (degree as f64 + 2.0) - 2.0 * loglik;
        let model = PolynomialModel {
            degree,
            center,
            scale,
            coefficients: beta.iter().copied().collect(),
            sigma,
            loglik,
            aic,
        };
        if best.as_ref().map_or(true, |b| aic < b.aic) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least degree 0 is fitted"))
}

/// `Y_i = poly(X_i) + σ z_i` from the stream keyed by `seed`.
pub fn simulate_polynomial(model: &PolynomialModel, x: &[f64], seed: u64) -> Vec<f64> {
    simulate_polynomial_stream(model, x, &mut rng::stream(seed, &[]))
}

pub(crate) fn simulate_polynomial_stream(
    model: &PolynomialModel,
    x: &[f64],
    rng: &mut impl Rng,
) -> Vec<f64> {
    x.iter()
        .map(|&xi| {
            let z: f64 = rng.sample(StandardNormal);
            model.mean(xi) + model.sigma * z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noisy(f: impl Fn(f64) -> f64, n: usize, sigma: f64, seed: u64) -> Sample {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let y = x
            .iter()
            .map(|&v| f(v) + sigma * r.sample::<f64, _>(StandardNormal))
            .collect();
        Sample::new(x, y).unwrap()
    }

    /// AIC per degree from a plain normal-equations fit on raw powers.
    fn aic_by_degree(s: &Sample, max_degree: usize) -> Vec<f64> {
        let n = s.len();
        (0..=max_degree)
            .map(|d| {
                let a = DMatrix::from_fn(n, d + 1, |i, j| s.x()[i].powi(j as i32));
                let b = DVector::from_column_slice(s.y());
                let beta = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * &b));
                let rss = (&b - &a * beta).norm_squared();
                let s2 = rss / n as f64;
                let ll = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0);
                2.0 * (d as f64 + 2.0) - 2.0 * ll
            })
            .collect()
    }

    #[test]
    fn exact_line() {
        let s = noisy(|x| 2.0 + 3.0 * x, 200, 1e-6, 1);
        let m = fit_polynomial_aic(&s, 4).unwrap();
        assert_eq!(m.degree, 1);
        let raw = m.raw_coefficients();
        assert_abs_diff_eq!(raw[0], 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(raw[1], 3.0, epsilon = 1e-5);
    }

    #[test]
    fn quadratic_selected_like_independent_aic() {
        let s = noisy(|x| x * x, 500, 0.1, 2);
        let m = fit_polynomial_aic(&s, 4).unwrap();
        let aics = aic_by_degree(&s, 4);
        let argmin = (0..aics.len())
            .min_by(|&a, &b| aics[a].total_cmp(&aics[b]))
            .unwrap();
        assert_eq!(m.degree, argmin);
        assert_eq!(m.degree, 2);
        assert_abs_diff_eq!(m.aic, aics[2], epsilon = 1e-6 * aics[2].abs());
    }

    #[test]
    fn constant_response() {
        let s = Sample::new((0..20).map(f64::from).collect(), vec![5.0; 20]).unwrap();
        let m = fit_polynomial_aic(&s, 3).unwrap();
        assert_eq!(m.degree, 0);
        assert_abs_diff_eq!(m.coefficients[0], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_deficient_and_small() {
        let s = Sample::new(vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0], vec![0.0, 1.0, 2.0, 0.0, 1.0, 2.0])
            .unwrap();
        assert!(matches!(fit_polynomial_aic(&s, 3), Err(Error::RankDeficient(_))));
        assert!(fit_polynomial_aic(&s, 4).is_err());
    }

    #[test]
    fn simulation_contracts() {
        let s = noisy(|x| 1.0 - x + 0.5 * x * x, 100, 0.3, 3);
        let mut m = fit_polynomial_aic(&s, 3).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|i| -2.0 + 4e-4 * i as f64).collect();
        assert_eq!(simulate_polynomial(&m, &xs, 9), simulate_polynomial(&m, &xs, 9));
        let ys = simulate_polynomial(&m, &xs, 9);
        let mean_resid =
            xs.iter().zip(&ys).map(|(&x, &y)| y - m.mean(x)).sum::<f64>() / xs.len() as f64;
        assert!(mean_resid.abs() < 3.0 * m.sigma / (xs.len() as f64).sqrt());

        m.sigma = 1e-300;
        for (x, y) in xs.iter().zip(simulate_polynomial(&m, &xs, 4)) {
            assert_eq!(y, m.mean(*x));
        }
    }
}
