use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bspline::BSplineBasis;
use super::peaks::scan_maxima;
use crate::density::{Sample, INV_SQRT_2PI};
use crate::error::{Error, Result};
use crate::modes::{merge_end_points, MeanShiftConfig, ModeSet};
use crate::rng;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Settings for the EM fits behind [`fit_mixture_bspline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub degree: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once the log-likelihood gain falls below this.
    pub em_tol: f64,
    /// Lower bound on component scales, relative to the response range.
    pub sigma_floor_rel: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            restarts: 5,
            max_iter: 500,
            em_tol: 1e-8,
            sigma_floor_rel: 1e-4,
            seed: 0,
        }
    }
}

/// `Y | X = x ~ Σ_k π_k N(β_k0 + Σ_j β_kj b_j(x), σ_k²)`.
///
/// The regression design is an intercept plus the basis functions `2..=J+1`
/// of a clamped basis with `J + 1` functions; dropping the first function
/// keeps the design full rank because the basis sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub weights: Vec<f64>,
    /// `K` rows of `J + 1` coefficients.
    pub coeffs: Vec<Vec<f64>>,
    pub sigmas: Vec<f64>,
    pub basis: BSplineBasis,
    pub loglik: f64,
    pub aic: f64,
}

impl MixtureModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn j(&self) -> usize {
        self.basis.num_functions() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.coeffs.len() != k || self.sigmas.len() != k {
            return Err(Error::InvalidConfig("mixture component counts disagree".into()));
        }
        if self.coeffs.iter().any(|c| c.len() != self.j() + 1) {
            return Err(Error::InvalidConfig("coefficient rows must have J + 1 entries".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 || self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidConfig("mixture weights must be positive and sum to 1".into()));
        }
        if self.sigmas.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidConfig("mixture scales must be positive".into()));
        }
        Ok(())
    }

    /// Regression row `[1, b_2(x), …, b_{J+1}(x)]`.
    pub fn design_row(&self, x: f64) -> Result<Vec<f64>> {
        design_row(&self.basis, x)
    }

    /// Component means at `x`.
    pub fn means(&self, x: f64) -> Result<Vec<f64>> {
        let row = self.design_row(x)?;
        Ok(self
            .coeffs
            .iter()
            .map(|c| c.iter().zip(&row).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn conditional_density(&self, x: f64, y: f64) -> Result<f64> {
        let mu = self.means(x)?;
        Ok(mixture_pdf(&self.weights, &mu, &self.sigmas, y))
    }
}

fn design_row(basis: &BSplineBasis, x: f64) -> Result<Vec<f64>> {
    let mut b = basis.eval(x)?;
    b[0] = 1.0;
    Ok(b)
}

pub(crate) fn mixture_pdf(w: &[f64], mu: &[f64], s: &[f64], y: f64) -> f64 {
    w.iter()
        .zip(mu)
        .zip(s)
        .map(|((w, m), s)| {
            let z = (y - m) / s;
            w * INV_SQRT_2PI * (-0.5 * z * z).exp() / s
        })
        .sum()
}

/// Local maxima in `y` of a Gaussian mixture density.
pub(crate) fn gaussian_mixture_modes(w: &[f64], mu: &[f64], s: &[f64], merge_tol: f64) -> Vec<f64> {
    if w.len() == 1 {
        return vec![mu[0]];
    }
    let f = |y: f64| mixture_pdf(w, mu, s, y);
    let fp = |y: f64| -> f64 {
        w.iter()
            .zip(mu)
            .zip(s)
            .map(|((w, m), s)| {
                let z = (y - m) / s;
                -w * INV_SQRT_2PI * (-0.5 * z * z).exp() * z / (s * s)
            })
            .sum()
    };
    let fpp = |y: f64| -> f64 {
        w.iter()
            .zip(mu)
            .zip(s)
            .map(|((w, m), s)| {
                let z = (y - m) / s;
                w * INV_SQRT_2PI * (-0.5 * z * z).exp() * (z * z - 1.0) / (s * s * s)
            })
            .sum()
    };
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let s_min = s.iter().copied().fold(f64::INFINITY, f64::min);
    let lo = mu.iter().copied().fold(f64::INFINITY, f64::min) - 6.0 * s_max;
    let hi = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 6.0 * s_max;
    let step = (1e-4 * (hi - lo)).min(s_min / 8.0);
    let peaks = scan_maxima(f, fp, fpp, lo, hi, step);
    merge_end_points(peaks, merge_tol, |y| f(y).ln())
        .into_iter()
        .filter(|&y| fpp(y) < 0.0)
        .collect()
}

/// Modes of the fitted mixture density at `x`.
pub fn mixture_conditional_modes(
    model: &MixtureModel,
    x: f64,
    cfg: &MeanShiftConfig,
) -> Result<ModeSet> {
    let mu = model.means(x)?;
    let modes = gaussian_mixture_modes(&model.weights, &mu, &model.sigmas, cfg.merge_tol);
    if modes.is_empty() {
        return Err(Error::NoModes { x });
    }
    Ok(ModeSet::from_sorted_unchecked(x, modes))
}

/// Draws one response per covariate: a component with probability `π_k`,
/// then `N(μ_k(x), σ_k²)`.
pub fn simulate_mixture(model: &MixtureModel, x: &[f64], seed: u64) -> Result<Vec<f64>> {
    simulate_mixture_stream(model, x, &mut rng::stream(seed, &[]))
}

pub(crate) fn simulate_mixture_stream(
    model: &MixtureModel,
    x: &[f64],
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    x.iter()
        .map(|&xi| {
            let mu = model.means(xi)?;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = model.k() - 1;
            for (c, w) in model.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = c;
                    break;
                }
            }
            let z: f64 = rng.sample(StandardNormal);
            Ok(mu[k] + model.sigmas[k] * z)
        })
        .collect()
}

/// Outcome of fitting one `(K, J)` candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub k: usize,
    pub j: usize,
    /// `None` when skipped or when every restart degenerated.
    pub aic: Option<f64>,
    pub loglik: Option<f64>,
    pub note: Option<String>,
    /// Log-likelihood per EM iteration of the best restart.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub model: MixtureModel,
    pub candidates: Vec<CandidateFit>,
}

struct Restart {
    loglik: f64,
    weights: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
    sigmas: Vec<f64>,
    trace: Vec<f64>,
}

const MIN_OBS_PER_COEF: usize = 5;

/// EM on a fixed design. `resp` holds initial responsibilities (n × K,
/// row-major).
fn run_em(
    rows: &DMatrix<f64>,
    y: &[f64],
    k: usize,
    mut resp: Vec<f64>,
    sigma_floor: f64,
    cfg: &EmConfig,
) -> std::result::Result<Restart, String> {
    let n = y.len();
    let p = rows.ncols();
    let mut weights = vec![0.0; k];
    let mut coeffs = vec![vec![0.0; p]; k];
    let mut sigmas = vec![0.0; k];
    let mut trace: Vec<f64> = Vec::new();
    let mut logp = vec![0.0; k];
    for _ in 0..cfg.max_iter {
        // M-step
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            // same five-per-coefficient ratio the candidate screen applies
            // to the whole sample; smaller components are collapsing spikes
            if nk < (MIN_OBS_PER_COEF * p) as f64 {
                return Err(format!("component {c} holds {nk:.2} effective observations"));
            }
            let mut a = DMatrix::<f64>::zeros(p, p);
            let mut b = DVector::<f64>::zeros(p);
            for i in 0..n {
                let r = resp[i * k + c];
                if r == 0.0 {
                    continue;
                }
                let row = rows.row(i);
                for u in 0..p {
                    let ru = r * row[u];
                    b[u] += ru * y[i];
                    for v in u..p {
                        a[(u, v)] += ru * row[v];
                    }
                }
            }
            for u in 0..p {
                for v in 0..u {
                    a[(u, v)] = a[(v, u)];
                }
            }
            let beta = a
                .cholesky()
                .ok_or_else(|| format!("weighted design of component {c} is singular"))?
                .solve(&b);
            let mut ss = 0.0;
            for i in 0..n {
                let mu: f64 = rows.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
                ss += resp[i * k + c] * (y[i] - mu).powi(2);
            }
            let s = (ss / nk).sqrt();
            if !(s > sigma_floor) {
                return Err(format!("component {c} scale collapsed to {s:.3e}"));
            }
            weights[c] = nk / n as f64;
            coeffs[c] = beta.iter().copied().collect();
            sigmas[c] = s;
        }
        // E-step
        let mut ll = 0.0;
        for i in 0..n {
            let row = rows.row(i);
            let mut m = f64::NEG_INFINITY;
            for c in 0..k {
                let mu: f64 = row.iter().zip(&coeffs[c]).map(|(a, b)| a * b).sum();
                let z = (y[i] - mu) / sigmas[c];
                logp[c] = weights[c].ln() - sigmas[c].ln() - LN_SQRT_2PI - 0.5 * z * z;
                m = m.max(logp[c]);
            }
            let s: f64 = logp.iter().map(|l| (l - m).exp()).sum();
            let lse = m + s.ln();
            ll += lse;
            for c in 0..k {
                resp[i * k + c] = (logp[c] - lse).exp();
            }
        }
        let done = trace.last().is_some_and(|&prev| ll - prev < cfg.em_tol);
        trace.push(ll);
        if done {
            break;
        }
    }
    Ok(Restart {
        loglik: *trace.last().expect("at least one iteration"),
        weights,
        coeffs,
        sigmas,
        trace,
    })
}

/// Initial responsibilities: slices of the pooled-fit residual ranks. Restart
/// 0 uses equal-count slices; later restarts draw random cut points and
/// soften the assignment.
fn initial_responsibilities(
    resid: &[f64],
    k: usize,
    restart: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let n = resid.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| resid[a].total_cmp(&resid[b]));
    let mut cuts: Vec<f64> = if restart == 0 {
        (1..k).map(|c| c as f64 / k as f64).collect()
    } else {
        (1..k).map(|_| rng.random::<f64>()).collect()
    };
    cuts.sort_by(f64::total_cmp);
    let (hard, soft) = if restart == 0 { (1.0, 0.0) } else { (0.9, 0.1 / k as f64) };
    let mut resp = vec![soft; n * k];
    for (rank, &i) in order.iter().enumerate() {
        let q = (rank as f64 + 0.5) / n as f64;
        let c = cuts.iter().filter(|&&t| q >= t).count();
        resp[i * k + c] += hard;
    }
    resp
}

/// AIC selection over `(K, J)` of EM-fitted B-spline mixtures of regressions.
pub fn fit_mixture_bspline(
    sample: &Sample,
    k_candidates: &[usize],
    j_candidates: &[usize],
    em: &EmConfig,
) -> Result<MixtureFit> {
    if k_candidates.is_empty() || j_candidates.is_empty() {
        return Err(Error::InvalidConfig("mixture candidate sets must be nonempty".into()));
    }
    let mut ks = k_candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut js = j_candidates.to_vec();
    js.sort_unstable();
    js.dedup();
    if ks[0] == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    let n = sample.len();
    let x = sample.x();
    let y = sample.y();
    let x_lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let x_hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let y_range = sample.y_range();
    let sigma_floor = em.sigma_floor_rel * if y_range > 0.0 { y_range } else { 1.0 };

    let mut best: Option<MixtureModel> = None;
    let mut candidates = Vec::new();
    for &j in &js {
        if j < em.degree {
            for &k in &ks {
                candidates.push(CandidateFit {
                    k,
                    j,
                    aic: None,
                    loglik: None,
                    note: Some(format!("J = {j} is below the spline degree {}", em.degree)),
                    trace: vec![],
                });
            }
            continue;
        }
        let basis = BSplineBasis::uniform(em.degree, j - em.degree, x_lo, x_hi)?;
        let rows = DMatrix::from_fn(n, j + 1, |_, _| 0.0);
        let mut rows = rows;
        for i in 0..n {
            let r = design_row(&basis, x[i])?;
            for (c, v) in r.into_iter().enumerate() {
                rows[(i, c)] = v;
            }
        }
        // pooled least squares for the residual slicing
        let pooled = rows
            .clone()
            .svd(true, true)
            .solve(&DVector::from_column_slice(y), 1e-12)
            .map_err(|e| Error::RankDeficient(e.to_string()))?;
        let fitted = &rows * &pooled;
        let resid: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();

        for &k in &ks {
            if n <= MIN_OBS_PER_COEF * k * (j + 1) {
                candidates.push(CandidateFit {
                    k,
                    j,
                    aic: None,
                    loglik: None,
                    note: Some(format!("needs more than {} observations", MIN_OBS_PER_COEF * k * (j + 1))),
                    trace: vec![],
                });
                continue;
            }
            let mut best_restart: Option<Restart> = None;
            let mut last_err = String::new();
            for r in 0..em.restarts.max(1) {
                let mut stream =
                    rng::stream(em.seed, &[rng::tag::EM_RESTART, k as u64, j as u64, r as u64]);
                let resp = initial_responsibilities(&resid, k, r, &mut stream);
                match run_em(&rows, y, k, resp, sigma_floor, em) {
                    Ok(fit) => {
                        if best_restart.as_ref().map_or(true, |b| fit.loglik > b.loglik) {
                            best_restart = Some(fit);
                        }
                    }
                    Err(e) => last_err = e,
                }
            }
            let Some(fit) = best_restart else {
                candidates.push(CandidateFit {
                    k,
                    j,
                    aic: None,
                    loglik: None,
                    note: Some(format!("all restarts degenerate: {last_err}")),
                    trace: vec![],
                });
                continue;
            };
            let n_params = k * (j + 2) + (k - 1);
            let aic = 2.0 * n_params as f64 - 2.0 * fit.loglik;
            candidates.push(CandidateFit {
                k,
                j,
                aic: Some(aic),
                loglik: Some(fit.loglik),
                note: None,
                trace: fit.trace.clone(),
            });
            if best.as_ref().map_or(true, |b| aic < b.aic) {
                best = Some(MixtureModel {
                    weights: fit.weights,
                    coeffs: fit.coeffs,
                    sigmas: fit.sigmas,
                    basis: basis.clone(),
                    loglik: fit.loglik,
                    aic,
                });
            }
        }
    }
    match best {
        Some(model) => Ok(MixtureFit { model, candidates }),
        None => Err(Error::EmDegenerate(
            "no (K, J) candidate produced a nondegenerate fit".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parametric::fit_polynomial_aic;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_branch(n: usize, seed: u64) -> Sample {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let xi: f64 = r.sample(StandardNormal);
            let m1 = xi + xi * xi;
            let shift = if r.random::<bool>() { 0.0 } else { -6.0 };
            x.push(xi);
            y.push(m1 + shift + r.sample::<f64, _>(StandardNormal));
        }
        Sample::new(x, y).unwrap()
    }

    #[test]
    fn single_component_linear_is_regression() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..300).map(|_| r.random_range(-1.0..2.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 1.0 - 2.0 * v + 0.4 * r.sample::<f64, _>(StandardNormal))
            .collect();
        let s = Sample::new(x.clone(), y).unwrap();
        let em = EmConfig { degree: 1, ..EmConfig::default() };
        let fit = fit_mixture_bspline(&s, &[1], &[1], &em).unwrap();
        let poly = fit_polynomial_aic(&s, 1).unwrap();
        let line = if poly.degree == 1 { poly } else { panic!("expected a line") };
        for &xi in x.iter().take(20) {
            assert_abs_diff_eq!(fit.model.means(xi).unwrap()[0], line.mean(xi), epsilon = 1e-6);
        }
        assert_abs_diff_eq!(fit.model.sigmas[0], line.sigma, epsilon = 1e-6);
    }

    #[test]
    fn recovers_two_branches() {
        let s = two_branch(2000, 17);
        let two = fit_mixture_bspline(&s, &[2], &[3], &EmConfig::default()).unwrap();
        for w in &two.model.weights {
            assert!((w - 0.5).abs() < 0.05, "weights {:?}", two.model.weights);
        }
        let mut means = two.model.means(0.5).unwrap();
        means.sort_by(f64::total_cmp);
        assert!((means[0] + 5.25).abs() < 0.3 && (means[1] - 0.75).abs() < 0.3, "{means:?}");

        // AIC separates one branch from two; a third small component can
        // still win by a few AIC units, so only the returned fit is checked
        let fit = fit_mixture_bspline(&s, &[1, 2, 3], &[3, 4, 5], &EmConfig::default()).unwrap();
        let aic = |k: usize| fit.candidates.iter().filter(|c| c.k == k).filter_map(|c| c.aic).fold(f64::INFINITY, f64::min);
        assert!(aic(2) + 100.0 < aic(1));
        let lowest = fit.candidates.iter().filter_map(|c| c.aic).fold(f64::INFINITY, f64::min);
        assert_eq!(fit.model.aic, lowest);
        for c in &fit.candidates {
            for pair in c.trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9 * pair[0].abs());
            }
        }
        // enumeration order does not matter
        let again = fit_mixture_bspline(&s, &[3, 1, 2], &[5, 3, 4], &EmConfig::default()).unwrap();
        assert_eq!(again.model, fit.model);
    }

    #[test]
    fn empty_candidates() {
        let s = two_branch(100, 1);
        assert!(fit_mixture_bspline(&s, &[], &[3], &EmConfig::default()).is_err());
        assert!(fit_mixture_bspline(&s, &[1], &[], &EmConfig::default()).is_err());
    }

    fn toy_model(weights: Vec<f64>, intercepts: Vec<f64>, sigmas: Vec<f64>) -> MixtureModel {
        let basis = BSplineBasis::uniform(1, 0, -1.0, 1.0).unwrap();
        MixtureModel {
            coeffs: intercepts.iter().map(|&b| vec![b, 0.0]).collect(),
            weights,
            sigmas,
            basis,
            loglik: 0.0,
            aic: 0.0,
        }
    }

    #[test]
    fn parametric_modes() {
        let cfg = MeanShiftConfig::for_response_range(10.0);
        let one = toy_model(vec![1.0], vec![2.5], vec![0.3]);
        assert_eq!(mixture_conditional_modes(&one, 0.0, &cfg).unwrap().locations(), &[2.5]);

        // 6σ apart: each mode sits within exp(-18)-scale of its mean
        let two = toy_model(vec![0.5, 0.5], vec![0.0, 6.0], vec![1.0, 1.0]);
        let m = mixture_conditional_modes(&two, 0.3, &cfg).unwrap();
        assert_eq!(m.len(), 2);
        assert_abs_diff_eq!(m.locations()[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.locations()[1], 6.0, epsilon = 1e-6);

        let same = toy_model(vec![0.3, 0.7], vec![1.0, 1.0], vec![0.5, 0.9]);
        let m = mixture_conditional_modes(&same, 0.0, &cfg).unwrap();
        assert_eq!(m.len(), 1);
        assert_abs_diff_eq!(m.locations()[0], 1.0, epsilon = 1e-10);
        assert!(mixture_conditional_modes(&same, 3.0, &cfg).is_err());
    }

    #[test]
    fn mixture_simulation() {
        let mut m = toy_model(vec![0.2, 0.5, 0.3], vec![-10.0, 0.0, 10.0], vec![0.1, 0.1, 0.1]);
        let x = vec![0.25; 100_000];
        let ys = simulate_mixture(&m, &x, 5).unwrap();
        assert_eq!(ys, simulate_mixture(&m, &x, 5).unwrap());
        let freq = |lo: f64, hi: f64| ys.iter().filter(|&&v| v > lo && v < hi).count() as f64 / 1e5;
        assert!((freq(-15.0, -5.0) - 0.2).abs() < 0.01);
        assert!((freq(-5.0, 5.0) - 0.5).abs() < 0.01);
        assert!((freq(5.0, 15.0) - 0.3).abs() < 0.01);

        m = toy_model(vec![1.0], vec![4.0], vec![1e-300]);
        let ys = simulate_mixture(&m, &[0.0, 0.5], 1).unwrap();
        assert_eq!(ys, vec![4.0, 4.0]);
    }
}
