//! Bandwidth selectors: four density-targeted baselines, two mode-targeted
//! criteria, and the simulation-only oracles, all minimized by the same
//! grid search.

mod bootstrap;
mod cv;
mod oracle;
mod reference;
mod regression;
mod search;
pub(crate) mod weights;

pub use bootstrap::{
    bootstrap_density_select, bootstrap_mode_select, bootstrap_mode_select_with,
    DensityBootstrap, ModeBootstrap, ModeLoss, PilotSearch, DEFAULT_BOOTSTRAP_DRAWS,
    POLYNOMIAL_MAX_DEGREE,
};
pub use cv::{cv_density, cv_mode, select_cv_density, select_cv_mode};
pub use oracle::{oracle_bandwidths, Metric};
pub use reference::{
    reference_rule, reference_rule_detailed, NormalWorkingModel, ReferenceCoefficients, NU0,
};
pub use regression::{akaike_penalty, regression_criterion, regression_select};
pub use search::{
    minimize_criterion, Boundary, Method, Minimum, SearchSpec, SelectionResult, TraceEntry, YGrid,
};

use serde::{Deserialize, Serialize};

use crate::density::{Sample, WeightWindow};
use crate::error::{Error, Result};
use crate::modes::MeanShiftConfig;
use crate::simulation::{EvalGrid, SimulationConfig};

/// Everything a selector may need besides the sample.
#[derive(Debug, Clone)]
pub struct SelectorContext<'a> {
    pub window: WeightWindow,
    pub spec: SearchSpec,
    pub mean_shift: MeanShiftConfig,
    pub ygrid: YGrid,
    pub draws: usize,
    pub seed: u64,
    /// Generating model and evaluation grid, for the oracles.
    pub truth: Option<(&'a SimulationConfig, &'a EvalGrid)>,
}

/// Runs the selector named by `method`.
pub fn select(method: Method, sample: &Sample, ctx: &SelectorContext<'_>) -> Result<SelectionResult> {
    if sample.len() < 2 {
        return Err(Error::InvalidSample(format!(
            "bandwidth selection needs at least two observations, got {}",
            sample.len()
        )));
    }
    let oracle = |metric| match ctx.truth {
        Some((truth, grid)) => {
            oracle_bandwidths(sample, truth, metric, &ctx.spec, &ctx.mean_shift, grid)
        }
        None => Err(Error::InvalidConfig(format!(
            "{method} needs a known generating model"
        ))),
    };
    match method {
        Method::Reference => reference_rule_detailed(sample, &ctx.window),
        Method::Regression => regression_select(sample, &ctx.window, &ctx.ygrid, &ctx.spec),
        Method::BootDensity => bootstrap_density_select(
            sample,
            &ctx.window,
            &ctx.ygrid,
            ctx.draws,
            &ctx.spec,
            ctx.seed,
        ),
        Method::CvDensity => select_cv_density(sample, &ctx.window, &ctx.spec),
        Method::CvMode => select_cv_mode(sample, &ctx.window, &ctx.spec, &ctx.mean_shift),
        Method::BootMode => bootstrap_mode_select(
            sample,
            &ctx.window,
            ctx.draws,
            &ctx.spec,
            &ctx.mean_shift,
            ctx.seed,
        ),
        Method::OracleDensity => oracle(Metric::EiseD),
        Method::OracleMode => oracle(Metric::EiseM),
    }
}

/// Tunable defaults shared by the CLI and the experiment runner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorSettings {
    /// Weight window between these percentiles of x.
    pub window_percentiles: (f64, f64),
    pub draws: usize,
    pub ygrid_points: usize,
    /// Search ranges; `None` uses [`SearchSpec::default_for`].
    pub search: Option<SearchSpec>,
    /// Mean-shift tuning; `None` scales the defaults to the response range.
    pub mean_shift: Option<MeanShiftConfig>,
}

impl Default for SelectorSettings {
    fn default() -> Self {
        Self {
            window_percentiles: (2.5, 97.5),
            draws: DEFAULT_BOOTSTRAP_DRAWS,
            ygrid_points: YGrid::DEFAULT_POINTS,
            search: None,
            mean_shift: None,
        }
    }
}

impl SelectorSettings {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.window_percentiles;
        if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
            return Err(Error::InvalidConfig(format!(
                "window percentiles must satisfy 0 <= lo < hi <= 100, got ({lo}, {hi})"
            )));
        }
        if self.draws == 0 {
            return Err(Error::InvalidConfig("bootstrap draws must be positive".into()));
        }
        if self.ygrid_points < 2 {
            return Err(Error::InvalidConfig("ygrid_points must be at least 2".into()));
        }
        if let Some(s) = &self.search {
            s.validate()?;
        }
        if let Some(c) = &self.mean_shift {
            c.validate()?;
        }
        Ok(())
    }

    /// Resolves sample-dependent defaults.
    pub fn context<'a>(
        &self,
        sample: &Sample,
        seed: u64,
        truth: Option<(&'a SimulationConfig, &'a EvalGrid)>,
    ) -> Result<SelectorContext<'a>> {
        self.validate()?;
        let (lo, hi) = self.window_percentiles;
        Ok(SelectorContext {
            window: crate::density::weight_window(sample, lo, hi)?,
            spec: match self.search {
                Some(s) => s,
                None => SearchSpec::default_for(sample)?,
            },
            mean_shift: self.mean_shift.unwrap_or_else(|| MeanShiftConfig::for_sample(sample)),
            ygrid: YGrid::over_responses(sample, self.ygrid_points)?,
            draws: self.draws,
            seed,
            truth,
        })
    }
}
