use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{generate, ConfigTag, SimulationConfig};
use super::metrics::{eise_d_kernel, eise_m_against, true_mode_grid, EvalGrid};
use crate::error::{Error, Result};
use crate::modes::mode_curves;
use crate::rng;
use crate::selectors::{select, Method, SelectorSettings};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Monte Carlo study settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub seed: u64,
    pub selectors: SelectorSettings,
    pub eval: EvalGrid,
}

impl ExperimentSettings {
    pub fn new(methods: Vec<Method>, replicates: usize, seed: u64) -> Self {
        Self {
            methods,
            replicates,
            seed,
            selectors: SelectorSettings::default(),
            eval: EvalGrid::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods requested".into()));
        }
        self.selectors.validate()?;
        self.eval.validate()
    }
}

/// One replicate × method outcome. Metrics are absent when the selector
/// failed; the reason is in `failure`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub replicate: usize,
    pub method: Method,
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    pub eise_m: Option<f64>,
    pub eise_d: Option<f64>,
    /// Evaluation points without a mode estimate.
    pub missing_modes: Option<usize>,
    pub failure: Option<String>,
}

/// Monte Carlo mean and standard error over successful replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub failures: usize,
    pub eise_m_count: usize,
    pub eise_m_mean: Option<f64>,
    pub eise_m_se: Option<f64>,
    pub eise_d_count: usize,
    pub eise_d_mean: Option<f64>,
    pub eise_d_se: Option<f64>,
    pub h1_mean: Option<f64>,
    pub h2_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub replicate: usize,
    pub method: Method,
    pub seconds: f64,
}

/// Per-replicate rows plus aggregates. Wall-clock times are kept apart in
/// `timing` so that the data outputs are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ConfigTag,
    pub n: usize,
    pub settings: ExperimentSettings,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub timing: Vec<TimingRow>,
}

fn mean_se(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (Some(mean), None);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

/// Aggregates recomputed from rows.
pub fn aggregate(rows: &[ReportRow], methods: &[Method]) -> Vec<Aggregate> {
    methods
        .iter()
        .map(|&method| {
            let mine: Vec<&ReportRow> = rows.iter().filter(|r| r.method == method).collect();
            let em: Vec<f64> = mine.iter().filter_map(|r| r.eise_m).collect();
            let ed: Vec<f64> = mine.iter().filter_map(|r| r.eise_d).collect();
            let h1: Vec<f64> = mine.iter().filter_map(|r| r.h1).collect();
            let h2: Vec<f64> = mine.iter().filter_map(|r| r.h2).collect();
            let (eise_m_mean, eise_m_se) = mean_se(&em);
            let (eise_d_mean, eise_d_se) = mean_se(&ed);
            Aggregate {
                method,
                failures: mine.iter().filter(|r| r.failure.is_some()).count(),
                eise_m_count: em.len(),
                eise_m_mean,
                eise_m_se,
                eise_d_count: ed.len(),
                eise_d_mean,
                eise_d_se,
                h1_mean: mean_se(&h1).0,
                h2_mean: mean_se(&h2).0,
            }
        })
        .collect()
}

/// Seed of the sample drawn for replicate `r`.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    rng::derive_seed(seed, &[rng::tag::REPLICATE, r as u64])
}

/// Generates `replicates` samples, runs every requested selector on each,
/// and scores the resulting estimates against the truth. Selector failures
/// are recorded in their rows and do not stop the run.
pub fn run_experiment(config: &SimulationConfig, settings: &ExperimentSettings) -> Result<ExperimentReport> {
    run_experiment_with(config, settings, |_| {})
}

/// [`run_experiment`] with a callback after each finished row.
pub fn run_experiment_with(
    config: &SimulationConfig,
    settings: &ExperimentSettings,
    mut progress: impl FnMut(&ReportRow),
) -> Result<ExperimentReport> {
    config.validate()?;
    settings.validate()?;
    let eval = settings.eval;
    let xs = eval.x_points();
    let truth = true_mode_grid(config, &eval);
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for r in 0..settings.replicates {
        let sample = generate(config, replicate_seed(settings.seed, r))?;
        for (k, &method) in settings.methods.iter().enumerate() {
            let start = Instant::now();
            let seed = rng::derive_seed(settings.seed, &[rng::tag::REPLICATE, r as u64, 100 + k as u64]);
            let outcome = settings
                .selectors
                .context(&sample, seed, Some((config, &eval)))
                .and_then(|ctx| {
                    let sel = select(method, &sample, &ctx)?;
                    let curves = mode_curves(&sample, sel.h, &xs, &ctx.mean_shift)?;
                    let em = eise_m_against(&curves, &truth, config, &eval, sample.y_range())?;
                    let ed = eise_d_kernel(&sample, sel.h, config, &eval).ok();
                    Ok((sel.h, em, ed))
                });
            let row = match outcome {
                Ok((h, em, ed)) => ReportRow {
                    replicate: r,
                    method,
                    h1: Some(h.h1),
                    h2: Some(h.h2),
                    eise_m: Some(em.value),
                    eise_d: ed,
                    missing_modes: Some(em.missing),
                    failure: None,
                },
                Err(e) => ReportRow {
                    replicate: r,
                    method,
                    h1: None,
                    h2: None,
                    eise_m: None,
                    eise_d: None,
                    missing_modes: None,
                    failure: Some(e.to_string()),
                },
            };
            timing.push(TimingRow {
                replicate: r,
                method,
                seconds: start.elapsed().as_secs_f64(),
            });
            progress(&row);
            rows.push(row);
        }
    }
    let aggregates = aggregate(&rows, &settings.methods);
    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: config.tag,
        n: config.n,
        settings: settings.clone(),
        rows,
        aggregates,
        notes: vec![
            "standard errors are raw Monte Carlo standard errors (published tables often show 10x)"
                .into(),
        ],
        timing,
    })
}

impl ExperimentReport {
    /// One line per replicate × method; no timing columns.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "replicate",
            "method",
            "h1",
            "h2",
            "eise_m",
            "eise_d",
            "missing_modes",
            "failure",
        ])
        .map_err(|e| Error::Serialize(e.to_string()))?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.replicate.to_string(),
                r.method.to_string(),
                opt(r.h1),
                opt(r.h2),
                opt(r.eise_m),
                opt(r.eise_d),
                r.missing_modes.map(|m| m.to_string()).unwrap_or_default(),
                r.failure.clone().unwrap_or_default(),
            ])
            .map_err(|e| Error::Serialize(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn timing_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.timing).map_err(|e| Error::Serialize(e.to_string()))
    }

    /// Rows of one method, in replicate order.
    pub fn rows_for(&self, method: Method) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }

    pub fn aggregate_for(&self, method: Method) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selectors::SearchSpec;

    #[test]
    fn small_run_is_reproducible() {
        let c = SimulationConfig::preset(ConfigTag::C1, 60);
        let mut s = ExperimentSettings::new(vec![Method::Reference, Method::CvDensity], 2, 5);
        s.selectors.search = Some(SearchSpec {
            h1_range: (0.1, 1.5),
            h2_range: (0.1, 1.5),
            grid_points_per_axis: 4,
            refine_rounds: 0,
        });
        let a = run_experiment(&c, &s).unwrap();
        let b = run_experiment(&c, &s).unwrap();
        assert_eq!(a.rows.len(), 4);
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert!(!a.to_json().unwrap().contains("seconds"));
        for agg in &a.aggregates {
            let v: Vec<f64> = a.rows_for(agg.method).iter().filter_map(|r| r.eise_m).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            assert!((agg.eise_m_mean.unwrap() - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        }
        let oracle_free = ExperimentSettings::new(vec![], 1, 0);
        assert!(run_experiment(&c, &oracle_free).is_err());
    }
}
