use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::search::{minimize_criterion, Method, SearchSpec, SelectionResult, YGrid};
use super::weights::{scaled_kernel_matrix, x_weight_rows};
use crate::density::{Bandwidths, Sample, WeightWindow};
use crate::error::{Error, Result};
use crate::modes::{LocalResponses, MeanShiftConfig, ModeSet};
use crate::parametric::{
    fit_mixture_bspline, fit_polynomial_aic, mixture_conditional_modes, simulate_mixture_stream,
    simulate_polynomial_stream, EmConfig, MixtureModel, PolynomialModel,
};
use crate::rng;
use crate::setdist::hausdorff_slices;

/// Bootstrap draws used by both bootstrap selectors unless configured.
pub const DEFAULT_BOOTSTRAP_DRAWS: usize = 25;

/// Largest polynomial degree tried for the density pilot.
pub const POLYNOMIAL_MAX_DEGREE: usize = 5;

/// Parametric bootstrap estimate of the density loss: responses are redrawn
/// from a Gaussian polynomial pilot at the observed covariates.
#[derive(Debug, Clone)]
pub struct DensityBootstrap {
    x: Vec<f64>,
    rows: Vec<usize>,
    grid: YGrid,
    reference: DMatrix<f64>,
    draws: Vec<Vec<f64>>,
}

impl DensityBootstrap {
    pub fn new(
        sample: &Sample,
        window: &WeightWindow,
        ygrid: &YGrid,
        pilot: &PolynomialModel,
        draws: usize,
        seed: u64,
    ) -> Result<Self> {
        if draws == 0 {
            return Err(Error::InvalidConfig("bootstrap needs at least one draw".into()));
        }
        let x = sample.x().to_vec();
        let rows: Vec<usize> = (0..x.len()).filter(|&i| window.contains(x[i])).collect();
        let reference = DMatrix::from_fn(rows.len(), ygrid.len(), |r, k| {
            pilot.conditional_density(x[rows[r]], ygrid.points()[k])
        });
        let draws = (0..draws)
            .map(|l| {
                let mut stream = rng::stream(seed, &[rng::tag::BOOT_DENSITY, l as u64]);
                simulate_polynomial_stream(pilot, &x, &mut stream)
            })
            .collect();
        Ok(Self {
            x,
            rows,
            grid: ygrid.clone(),
            reference,
            draws,
        })
    }

    pub fn draws(&self) -> &[Vec<f64>] {
        &self.draws
    }

    /// `Â(h) = (1/L) Σ_ℓ (Δ/n) Σ_i Σ_k {p̂^(ℓ)(y_k|X_i) - p̂*(y_k|X_i)}² w(X_i)`.
    pub fn criterion(&self, h: Bandwidths) -> Result<f64> {
        let w = x_weight_rows(&self.x, h.h1, &self.rows, false)
            .map_err(|x| Error::UndefinedEstimate { x: self.x[x] })?;
        let mut total = 0.0;
        for ys in &self.draws {
            let k = scaled_kernel_matrix(ys, self.grid.points(), h.h2);
            let fitted = &w * k;
            total += (fitted - &self.reference).norm_squared();
        }
        let n = self.x.len() as f64;
        Ok(self.grid.spacing() / n * total / self.draws.len() as f64)
    }
}

/// Bootstrap density selector with an AIC-chosen polynomial pilot.
pub fn bootstrap_density_select(
    sample: &Sample,
    window: &WeightWindow,
    ygrid: &YGrid,
    draws: usize,
    spec: &SearchSpec,
    seed: u64,
) -> Result<SelectionResult> {
    let pilot = fit_polynomial_aic(sample, POLYNOMIAL_MAX_DEGREE)?;
    let boot = DensityBootstrap::new(sample, window, ygrid, &pilot, draws, seed)?;
    let m = minimize_criterion(|h| boot.criterion(h).map_err(|e| e.to_string()), spec)?;
    Ok(SelectionResult::from_minimum(Method::BootDensity, m)
        .with("pilot", &pilot)
        .with("pilot_raw_coefficients", pilot.raw_coefficients())
        .with("draws", draws))
}

/// Candidate sets for the mixture pilot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotSearch {
    pub k_candidates: Vec<usize>,
    pub j_candidates: Vec<usize>,
    pub em: EmConfig,
}

impl Default for PilotSearch {
    fn default() -> Self {
        Self {
            k_candidates: vec![1, 2, 3, 4, 5],
            j_candidates: vec![3, 4, 5, 6, 7],
            em: EmConfig::default(),
        }
    }
}

/// Criterion value with the number of empty-mode-set penalties it includes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeLoss {
    pub value: f64,
    pub penalties: usize,
}

/// Parametric bootstrap estimate of the mode loss: responses are redrawn
/// from a Gaussian mixture of B-spline regressions, whose own conditional
/// modes stand in for the truth.
#[derive(Debug, Clone)]
pub struct ModeBootstrap {
    n: usize,
    rows: Vec<usize>,
    pilot_modes: Vec<ModeSet>,
    samples: Vec<Sample>,
    penalty: f64,
}

impl ModeBootstrap {
    pub fn new(
        sample: &Sample,
        window: &WeightWindow,
        pilot: &MixtureModel,
        draws: usize,
        cfg: &MeanShiftConfig,
        seed: u64,
    ) -> Result<Self> {
        if draws == 0 {
            return Err(Error::InvalidConfig("bootstrap needs at least one draw".into()));
        }
        cfg.validate()?;
        let x = sample.x();
        let rows: Vec<usize> = (0..x.len()).filter(|&i| window.contains(x[i])).collect();
        let pilot_modes = rows
            .iter()
            .map(|&i| mixture_conditional_modes(pilot, x[i], cfg))
            .collect::<Result<Vec<_>>>()?;
        let samples = (0..draws)
            .map(|l| {
                let mut stream = rng::stream(seed, &[rng::tag::BOOT_MODE, l as u64]);
                let ys = simulate_mixture_stream(pilot, x, &mut stream)?;
                sample.with_responses(ys)
            })
            .collect::<Result<Vec<_>>>()?;
        let range = sample.y_range();
        Ok(Self {
            n: x.len(),
            rows,
            pilot_modes,
            samples,
            penalty: range * range,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Retained observation indices, aligned with [`Self::pilot_modes`].
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn pilot_modes(&self) -> &[ModeSet] {
        &self.pilot_modes
    }

    /// Squared response range, charged when an estimate is missing.
    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// `(1/L) Σ_ℓ (1/n) Σ_i Haus²(M̂^(ℓ)(X_i), M̂*(X_i)) w(X_i)` for arbitrary
    /// estimates `estimate(ℓ, i)`; `None` costs [`Self::penalty`].
    pub fn loss_with(&self, mut estimate: impl FnMut(usize, usize) -> Option<ModeSet>) -> ModeLoss {
        let mut total = 0.0;
        let mut penalties = 0;
        for l in 0..self.samples.len() {
            for (r, &i) in self.rows.iter().enumerate() {
                let term = match estimate(l, i) {
                    Some(m) if !m.is_empty() => {
                        hausdorff_slices(m.locations(), self.pilot_modes[r].locations())
                            .expect("both sets nonempty")
                            .powi(2)
                    }
                    _ => {
                        penalties += 1;
                        self.penalty
                    }
                };
                total += term;
            }
        }
        ModeLoss {
            value: total / self.n as f64 / self.samples.len() as f64,
            penalties,
        }
    }

    /// Loss of mean-shift estimates on the bootstrap samples at `h`.
    pub fn criterion(&self, h: Bandwidths, cfg: &MeanShiftConfig) -> ModeLoss {
        self.loss_with(|l, i| {
            let s = &self.samples[l];
            let x = s.x()[i];
            LocalResponses::build(s, h.h1, x, None)
                .and_then(|local| local.modes(h.h2, x, cfg))
                .ok()
        })
    }
}

/// Bootstrap mode selector with the default mixture pilot search.
pub fn bootstrap_mode_select(
    sample: &Sample,
    window: &WeightWindow,
    draws: usize,
    spec: &SearchSpec,
    cfg: &MeanShiftConfig,
    seed: u64,
) -> Result<SelectionResult> {
    let search = PilotSearch {
        em: EmConfig {
            seed,
            ..EmConfig::default()
        },
        ..PilotSearch::default()
    };
    bootstrap_mode_select_with(sample, window, draws, spec, cfg, seed, &search)
}

/// [`bootstrap_mode_select`] with explicit pilot candidates.
pub fn bootstrap_mode_select_with(
    sample: &Sample,
    window: &WeightWindow,
    draws: usize,
    spec: &SearchSpec,
    cfg: &MeanShiftConfig,
    seed: u64,
    search: &PilotSearch,
) -> Result<SelectionResult> {
    cfg.validate()?;
    let fit = fit_mixture_bspline(sample, &search.k_candidates, &search.j_candidates, &search.em)?;
    let boot = ModeBootstrap::new(sample, window, &fit.model, draws, cfg, seed)?;
    let mut penalties = Vec::new();
    let m = minimize_criterion(
        |h| {
            let loss = boot.criterion(h, cfg);
            if loss.penalties > 0 {
                penalties.push((h, loss.penalties));
            }
            Ok(loss.value)
        },
        spec,
    )?;
    let at_min = penalties
        .iter()
        .find(|(h, _)| *h == m.h)
        .map_or(0, |(_, c)| *c);
    let mut result = SelectionResult::from_minimum(Method::BootMode, m);
    // record the penalty count of each penalized candidate next to its trace entry
    for entry in &mut result.trace {
        if let Some((_, c)) = penalties.iter().find(|(h, _)| *h == entry.h) {
            entry.note = Some(format!("{c} empty mode sets charged the range penalty"));
        }
    }
    Ok(result
        .with("pilot_k", fit.model.k())
        .with("pilot_j", fit.model.j())
        .with("pilot", &fit.model)
        .with("pilot_candidates", &fit.candidates)
        .with("penalties_at_minimum", at_min)
        .with("draws", draws))
}
