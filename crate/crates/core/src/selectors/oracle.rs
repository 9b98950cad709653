use serde::{Deserialize, Serialize};

use super::search::{minimize_criterion, Method, SearchSpec, SelectionResult};
use crate::density::Sample;
use crate::error::Result;
use crate::modes::{mode_curves, MeanShiftConfig};
use crate::simulation::{eise_d_kernel, eise_m_against, true_mode_grid, EvalGrid, SimulationConfig};

/// Error metric targeted by an oracle selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    EiseD,
    EiseM,
}

/// Bandwidths minimizing the true-model error of the estimate built from
/// `sample`. Only available when the generating model is known.
pub fn oracle_bandwidths(
    sample: &Sample,
    truth: &SimulationConfig,
    metric: Metric,
    spec: &SearchSpec,
    cfg: &MeanShiftConfig,
    grid: &EvalGrid,
) -> Result<SelectionResult> {
    truth.validate()?;
    grid.validate()?;
    match metric {
        Metric::EiseD => {
            let m = minimize_criterion(
                |h| eise_d_kernel(sample, h, truth, grid).map_err(|e| e.to_string()),
                spec,
            )?;
            Ok(SelectionResult::from_minimum(Method::OracleDensity, m))
        }
        Metric::EiseM => {
            cfg.validate()?;
            let xs = grid.x_points();
            let modes = true_mode_grid(truth, grid);
            let y_range = sample.y_range();
            let m = minimize_criterion(
                |h| {
                    let curves = mode_curves(sample, h, &xs, cfg).map_err(|e| e.to_string())?;
                    eise_m_against(&curves, &modes, truth, grid, y_range)
                        .map(|e| e.value)
                        .map_err(|e| e.to_string())
                },
                spec,
            )?;
            Ok(SelectionResult::from_minimum(Method::OracleMode, m))
        }
    }
}
