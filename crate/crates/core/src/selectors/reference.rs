use serde::{Deserialize, Serialize};

use super::search::{Method, SelectionResult};
use crate::density::{gaussian_kernel, Bandwidths, Sample, WeightWindow};
use crate::error::{Error, Result};

/// `ν_0 = ∫ φ²` for the standard normal kernel.
pub const NU0: f64 = 0.282_094_791_773_878_14;

/// Normal working model: `X ~ N(μ_x, σ_x²)` and
/// `Y | X = x ~ N(a + b x, (c + d x)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalWorkingModel {
    pub x_mean: f64,
    pub x_sd: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl NormalWorkingModel {
    pub fn mean(&self, x: f64) -> f64 {
        self.a + self.b * x
    }

    pub fn sd(&self, x: f64) -> f64 {
        self.c + self.d * x
    }

    /// Maximum-likelihood fit. The conditional part alternates weighted least
    /// squares for the mean with damped Newton steps for the scale line.
    pub fn fit(sample: &Sample) -> Result<Self> {
        let n = sample.len();
        let nf = n as f64;
        let x_mean = sample.x().iter().sum::<f64>() / nf;
        let x_sd = super::search::sd(sample.x());
        if !(x_sd > 0.0) {
            return Err(Error::InvalidSample("reference rule needs nonconstant x".into()));
        }
        // standardized covariate keeps the 2 × 2 systems well conditioned
        let z: Vec<f64> = sample.x().iter().map(|v| (v - x_mean) / x_sd).collect();
        let y = sample.y();

        let ols = wls(&z, y, &vec![1.0; n]);
        let mut mean = ols;
        let resid: Vec<f64> = (0..n).map(|i| y[i] - mean.0 - mean.1 * z[i]).collect();
        let s0 = (resid.iter().map(|r| r * r).sum::<f64>() / nf).sqrt();
        if !(s0 > 0.0) {
            return Err(Error::DegenerateCurvature(
                "responses lie exactly on a line".into(),
            ));
        }
        let mut scale = (s0, 0.0);
        let mut prev = f64::INFINITY;
        for _ in 0..500 {
            let r: Vec<f64> = (0..n).map(|i| y[i] - mean.0 - mean.1 * z[i]).collect();
            scale = newton_scale(&z, &r, scale);
            let w: Vec<f64> = z
                .iter()
                .map(|&zi| (scale.0 + scale.1 * zi).powi(-2))
                .collect();
            mean = wls(&z, y, &w);
            let nll = neg_loglik(&z, y, mean, scale);
            if (prev - nll).abs() <= 1e-13 * nll.abs().max(1.0) {
                break;
            }
            prev = nll;
        }
        Ok(Self {
            x_mean,
            x_sd,
            a: mean.0 - mean.1 * x_mean / x_sd,
            b: mean.1 / x_sd,
            c: scale.0 - scale.1 * x_mean / x_sd,
            d: scale.1 / x_sd,
        })
    }
}

fn wls(z: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..z.len() {
        s0 += w[i];
        s1 += w[i] * z[i];
        s2 += w[i] * z[i] * z[i];
        t0 += w[i] * y[i];
        t1 += w[i] * z[i] * y[i];
    }
    let det = s0 * s2 - s1 * s1;
    if det.abs() <= 1e-14 * s0 * s2 {
        return (t0 / s0, 0.0);
    }
    ((s2 * t0 - s1 * t1) / det, (s0 * t1 - s1 * t0) / det)
}

fn scale_nll(z: &[f64], r: &[f64], (c, d): (f64, f64)) -> f64 {
    let mut acc = 0.0;
    for i in 0..z.len() {
        let s = c + d * z[i];
        if !(s > 0.0) {
            return f64::INFINITY;
        }
        acc += s.ln() + r[i] * r[i] / (2.0 * s * s);
    }
    acc
}

fn neg_loglik(z: &[f64], y: &[f64], mean: (f64, f64), scale: (f64, f64)) -> f64 {
    let r: Vec<f64> = (0..z.len()).map(|i| y[i] - mean.0 - mean.1 * z[i]).collect();
    scale_nll(z, &r, scale)
}

/// Minimizes `Σ log s_i + r_i² / (2 s_i²)` over `s_i = c + d z_i`.
fn newton_scale(z: &[f64], r: &[f64], mut p: (f64, f64)) -> (f64, f64) {
    let mut f = scale_nll(z, r, p);
    for _ in 0..100 {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..z.len() {
            let s = p.0 + p.1 * z[i];
            let q = r[i] * r[i];
            let g = 1.0 / s - q / (s * s * s);
            let h = -1.0 / (s * s) + 3.0 * q / (s * s * s * s);
            g0 += g;
            g1 += g * z[i];
            h00 += h;
            h01 += h * z[i];
            h11 += h * z[i] * z[i];
        }
        let det = h00 * h11 - h01 * h01;
        let (mut d0, mut d1) = if h00 > 0.0 && det > 0.0 {
            ((h11 * g0 - h01 * g1) / det, (h00 * g1 - h01 * g0) / det)
        } else {
            let k = 1e-2 * p.0.abs().max(1e-12) / (g0.abs() + g1.abs()).max(1e-300);
            (k * g0, k * g1)
        };
        let mut accepted = false;
        for _ in 0..60 {
            let cand = (p.0 - d0, p.1 - d1);
            let fc = scale_nll(z, r, cand);
            if fc <= f {
                let small = (cand.0 - p.0).abs() + (cand.1 - p.1).abs() <= 1e-15 * (p.0.abs() + p.1.abs());
                p = cand;
                let gain = f - fc;
                f = fc;
                accepted = true;
                if small || gain <= 1e-15 * f.abs().max(1.0) {
                    return p;
                }
                break;
            }
            d0 *= 0.5;
            d1 *= 0.5;
        }
        if !accepted {
            return p;
        }
    }
    p
}

/// Curvature functionals `c1..c5` of the integrated squared error
/// approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

/// Composite Simpson weights for `2m` intervals on `[lo, hi]`.
fn simpson(lo: f64, hi: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let k = 2 * m;
    let step = (hi - lo) / k as f64;
    let nodes = (0..=k).map(|i| lo + step * i as f64).collect();
    let weights = (0..=k)
        .map(|i| {
            let w = if i == 0 || i == k {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * step / 3.0
        })
        .collect();
    (nodes, weights)
}

impl ReferenceCoefficients {
    /// Quadrature of the coefficient integrals under `model` over `window`.
    /// The inner integral runs over the standardized response
    /// `z = (y - mean(x)) / sd(x)` on `[-12, 12]`.
    pub fn compute(model: &NormalWorkingModel, window: &WeightWindow) -> Result<Self> {
        let (xs, wx) = simpson(window.x_lo, window.x_hi, 400);
        let (zs, wz) = simpson(-12.0, 12.0, 1200);
        let phi_z: Vec<f64> = zs.iter().map(|&z| gaussian_kernel(z)).collect();
        let (b, d) = (model.b, model.d);
        let (mut c2, mut c3, mut c4, mut c5) = (0.0, 0.0, 0.0, 0.0);
        for (&x, &qx) in xs.iter().zip(&wx) {
            let s = model.sd(x);
            if !(s > 0.0) {
                return Err(Error::DegenerateCurvature(format!(
                    "fitted conditional scale {s} is not positive at x = {x}"
                )));
            }
            let tx = (x - model.x_mean) / model.x_sd;
            let px = gaussian_kernel(tx) / model.x_sd;
            let score = -tx / model.x_sd; // p'(x) / p(x)
            let u = 1.0 / s;
            let u_x = -d / (s * s);
            let u_xx = 2.0 * d * d / (s * s * s);
            let (mut i2, mut i3, mut i4, mut i5) = (0.0, 0.0, 0.0, 0.0);
            for ((&z, &qz), &ph) in zs.iter().zip(&wz).zip(&phi_z) {
                let dph = -z * ph;
                let ddph = (z * z - 1.0) * ph;
                let z_x = -(b + z * d) / s;
                let z_xx = -2.0 * d * z_x / s;
                let p = ph * u;
                let p_x = dph * z_x * u + ph * u_x;
                let p_xx = ddph * z_x * z_x * u + dph * z_xx * u + 2.0 * dph * z_x * u_x + ph * u_xx;
                let p_yy = ddph * u * u * u;
                let a = 2.0 * score * p_x + p_xx;
                // dy = s dz
                let q = qz * s;
                i2 += q * p * p;
                i3 += q * a * a;
                i4 += q * p_yy * p_yy;
                i5 += q * a * p_yy;
            }
            c2 += qx * NU0 * i2;
            c3 += qx * px / 4.0 * i3;
            c4 += qx * px / 4.0 * i4;
            c5 += qx * px / 2.0 * i5;
        }
        Ok(Self {
            c1: NU0 * NU0 * window.width(),
            c2,
            c3,
            c4,
            c5,
        })
    }

    /// `c1/(n h1 h2) - c2/(n h1) + c3 h1⁴ + c4 h2⁴ + c5 h1² h2²`.
    pub fn imse(&self, n: usize, h: Bandwidths) -> f64 {
        let n = n as f64;
        let (h1, h2) = (h.h1, h.h2);
        self.c1 / (n * h1 * h2) - self.c2 / (n * h1)
            + self.c3 * h1.powi(4)
            + self.c4 * h2.powi(4)
            + self.c5 * h1 * h1 * h2 * h2
    }

    /// Stationary point of the leading terms:
    /// `h1 = c1^{1/6} {4 (c3⁵/c4)^{1/4} + 2 c5 (c3/c4)^{3/4}}^{-1/6} n^{-1/6}`,
    /// `h2 = h1 (c3/c4)^{1/4}`.
    pub fn bandwidths(&self, n: usize) -> Result<Bandwidths> {
        if !(self.c3 > 0.0 && self.c4 > 0.0) {
            return Err(Error::DegenerateCurvature(format!(
                "need c3 > 0 and c4 > 0, got c3 = {:e}, c4 = {:e}",
                self.c3, self.c4
            )));
        }
        let ratio = self.c3 / self.c4;
        let bracket = 4.0 * (self.c3.powi(5) / self.c4).powf(0.25) + 2.0 * self.c5 * ratio.powf(0.75);
        if !(bracket > 0.0) {
            return Err(Error::DegenerateCurvature(format!(
                "cross term dominates: 4 (c3^5/c4)^(1/4) + 2 c5 (c3/c4)^(3/4) = {bracket:e}"
            )));
        }
        let h1 = (self.c1 / bracket / n as f64).powf(1.0 / 6.0);
        Bandwidths::new(h1, h1 * ratio.powf(0.25))
    }
}

/// Closed-form bandwidths under the normal working model.
pub fn reference_rule(sample: &Sample, window: &WeightWindow) -> Result<Bandwidths> {
    Ok(reference_rule_detailed(sample, window)?.h)
}

/// [`reference_rule`] with the fitted model and coefficients. The criterion
/// value is the approximate integrated squared error at the returned `h`.
pub fn reference_rule_detailed(sample: &Sample, window: &WeightWindow) -> Result<SelectionResult> {
    sample.require_len(10, "the reference rule")?;
    let model = NormalWorkingModel::fit(sample)?;
    let coef = ReferenceCoefficients::compute(&model, window)?;
    let h = coef.bandwidths(sample.len())?;
    let result = SelectionResult {
        method: Method::Reference,
        h,
        criterion_value: coef.imse(sample.len(), h),
        trace: Vec::new(),
        boundary: Vec::new(),
        diagnostics: Default::default(),
    };
    Ok(result.with("working_model", model).with("coefficients", coef))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn nu0_value() {
        assert_relative_eq!(NU0, 0.5 / std::f64::consts::PI.sqrt(), epsilon = 1e-16);
    }

    #[test]
    fn symmetric_curvature_gives_equal_bandwidths() {
        let c = ReferenceCoefficients { c1: 0.3, c2: 0.1, c3: 2.0, c4: 2.0, c5: 0.5 };
        let h = c.bandwidths(100).unwrap();
        assert_relative_eq!(h.h1, h.h2, epsilon = 1e-14);
        let c = ReferenceCoefficients { c4: 0.0, ..c };
        assert!(matches!(c.bandwidths(100), Err(Error::DegenerateCurvature(_))));
    }

    #[test]
    fn closed_form_is_stationary() {
        let c = ReferenceCoefficients { c1: 0.05, c2: 0.0, c3: 0.7, c4: 3.0, c5: 0.4 };
        let h = c.bandwidths(500).unwrap();
        let f = |a: f64, b: f64| c.imse(500, Bandwidths { h1: a, h2: b });
        let e = 1e-6;
        let g1 = (f(h.h1 + e, h.h2) - f(h.h1 - e, h.h2)) / (2.0 * e);
        let g2 = (f(h.h1, h.h2 + e) - f(h.h1, h.h2 - e)) / (2.0 * e);
        assert!(g1.abs() < 1e-6 && g2.abs() < 1e-6, "{g1} {g2}");
    }

    #[test]
    fn constant_variance_uniform_case() {
        // p(x) flat is not representable, so check c4 against its closed form
        // ∫ p(x)/4 ∫ φ''(z)² / s⁵ dz dx with ∫ φ''² = 3/(8√π).
        let m = NormalWorkingModel { x_mean: 0.0, x_sd: 1.0, a: 0.0, b: 0.0, c: 0.5, d: 0.0 };
        let w = WeightWindow::new(-1.0, 1.0).unwrap();
        let c = ReferenceCoefficients::compute(&m, &w).unwrap();
        let px_mass = 0.682_689_492_137_085_9;
        let expect = px_mass / 4.0 * 3.0 / (8.0 * std::f64::consts::PI.sqrt()) / 0.5f64.powi(5);
        assert_relative_eq!(c.c4, expect, max_relative = 1e-9);
        // no x-dependence at all: c3 and c5 vanish
        assert!(c.c3.abs() < 1e-12 && c.c5.abs() < 1e-12);
    }

    #[test]
    fn mle_recovers_linear_scale() {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        let n = 20_000;
        let x: Vec<f64> = (0..n).map(|_| 3.0 + 2.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| {
                let s = (0.5 + 0.1 * v).max(0.05);
                1.0 - 0.5 * v + s * r.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let m = NormalWorkingModel::fit(&Sample::new(x, y).unwrap()).unwrap();
        assert!((m.a - 1.0).abs() < 0.02 && (m.b + 0.5).abs() < 0.01, "{m:?}");
        assert!((m.c - 0.5).abs() < 0.02 && (m.d - 0.1).abs() < 0.01, "{m:?}");
        assert!((m.x_mean - 3.0).abs() < 0.05 && (m.x_sd - 2.0).abs() < 0.05);
    }
}
