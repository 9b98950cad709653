use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::density::{gaussian_kernel, Sample};
use crate::error::{Error, Result};
use crate::modes::ModeSet;
use crate::parametric::gaussian_mixture_modes;
use crate::parametric::peaks::scan_maxima;
use crate::rng;

/// The five benchmark configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConfigTag {
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl ConfigTag {
    pub const ALL: [ConfigTag; 5] = [Self::C1, Self::C2, Self::C3, Self::C4, Self::C5];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::C3 => "C3",
            Self::C4 => "C4",
            Self::C5 => "C5",
        }
    }
}

impl std::fmt::Display for ConfigTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ConfigTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown configuration {s:?}; expected C1..C5")))
    }
}

/// Base mean curve `m(x) = x + x²`.
pub fn base_mean(x: f64) -> f64 {
    x + x * x
}

/// Normal component `N(m(x) + offset, sd²)` with mixing weight `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub offset: f64,
    pub sd: f64,
}

/// Conditional law of `Y` given `X = x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `Y = m(x) + shift + ε`, `ε ~ Gamma(shape, rate)` with mean `shape/rate`.
    Gamma { shape: f64, rate: f64, shift: f64 },
    Mixture(Vec<Component>),
}

impl Branch {
    fn validate(&self) -> Result<()> {
        match self {
            Branch::Gamma { shape, rate, shift } => {
                if !(*shape >= 1.0 && *rate > 0.0 && shift.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "gamma branch needs shape >= 1 and rate > 0".into(),
                    ));
                }
            }
            Branch::Mixture(c) => {
                let total: f64 = c.iter().map(|c| c.weight).sum();
                if c.is_empty() || (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidConfig("mixture weights must sum to 1".into()));
                }
                if c.iter().any(|c| !(c.weight > 0.0 && c.sd > 0.0 && c.offset.is_finite())) {
                    return Err(Error::InvalidConfig(
                        "mixture weights and scales must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn pdf(&self, x: f64, y: f64) -> f64 {
        let m = base_mean(x);
        match *self {
            Branch::Gamma { shape, rate, shift } => {
                let e = y - m - shift;
                if e <= 0.0 {
                    return 0.0;
                }
                (shape * rate.ln() + (shape - 1.0) * e.ln() - rate * e - ln_gamma(shape)).exp()
            }
            Branch::Mixture(ref comps) => comps
                .iter()
                .map(|c| c.weight * gaussian_kernel((y - m - c.offset) / c.sd) / c.sd)
                .sum(),
        }
    }

    fn draw(&self, x: f64, rng: &mut impl Rng) -> f64 {
        let m = base_mean(x);
        match *self {
            Branch::Gamma { shape, rate, shift } => {
                let g = Gamma::new(shape, 1.0 / rate).expect("validated gamma parameters");
                m + shift + g.sample(rng)
            }
            Branch::Mixture(ref comps) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = comps[comps.len() - 1];
                for c in comps {
                    acc += c.weight;
                    if u < acc {
                        pick = *c;
                        break;
                    }
                }
                let z: f64 = rng.sample(StandardNormal);
                m + pick.offset + pick.sd * z
            }
        }
    }

    fn modes(&self, x: f64) -> Vec<f64> {
        let m = base_mean(x);
        match *self {
            Branch::Gamma { shape, rate, shift } => {
                // scan the error density on [0, mean + 12 sd]
                let a1 = shape - 1.0;
                let hi = shape / rate + 12.0 * shape.sqrt() / rate;
                let f = |e: f64| if e > 0.0 { (a1 * e.ln() - rate * e).exp() } else { 0.0 };
                let fp = |e: f64| if e > 0.0 { f(e) * (a1 / e - rate) } else { 0.0 };
                let fpp = |e: f64| {
                    if e > 0.0 {
                        let g = a1 / e - rate;
                        f(e) * (g * g - a1 / (e * e))
                    } else {
                        0.0
                    }
                };
                let mut peaks = scan_maxima(f, fp, fpp, 0.0, hi, 1e-4 * hi);
                if a1 == 0.0 || peaks.is_empty() {
                    // exponential errors peak at the left end of the support
                    peaks = vec![0.0];
                }
                peaks.into_iter().map(|e| m + shift + e).collect()
            }
            Branch::Mixture(ref comps) => {
                let w: Vec<f64> = comps.iter().map(|c| c.weight).collect();
                let mu: Vec<f64> = comps.iter().map(|c| m + c.offset).collect();
                let s: Vec<f64> = comps.iter().map(|c| c.sd).collect();
                gaussian_mixture_modes(&w, &mu, &s, 1e-9)
            }
        }
    }
}

/// A simulation design: `X ~ N(0, 1)` and `Y | X = x` from `below` when
/// `x <= 0`, from `above` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub tag: ConfigTag,
    pub n: usize,
    /// Evaluation window for the error metrics.
    pub x_window: (f64, f64),
    pub below: Branch,
    pub above: Branch,
}

fn normal_mixture(parts: &[(f64, f64, f64)]) -> Branch {
    Branch::Mixture(
        parts
            .iter()
            .map(|&(weight, offset, sd)| Component { weight, offset, sd })
            .collect(),
    )
}

impl SimulationConfig {
    pub fn preset(tag: ConfigTag, n: usize) -> Self {
        let gamma = Branch::Gamma {
            shape: 3.0,
            rate: 2.0,
            shift: -1.0,
        };
        let two = normal_mixture(&[(0.5, 0.0, 1.0), (0.5, -6.0, 1.0)]);
        let (below, above) = match tag {
            ConfigTag::C1 => (gamma.clone(), gamma),
            ConfigTag::C2 => (two.clone(), two),
            ConfigTag::C3 => (gamma, two),
            ConfigTag::C4 => {
                let b = normal_mixture(&[(0.5, 0.0, 0.5), (0.3, -3.0, 0.5), (0.2, -6.0, 0.5)]);
                (b.clone(), b)
            }
            ConfigTag::C5 => {
                let parts: Vec<(f64, f64, f64)> =
                    (0..5).map(|j| (0.2, -1.5 * j as f64, 0.2)).collect();
                let b = normal_mixture(&parts);
                (b.clone(), b)
            }
        };
        Self {
            tag,
            n,
            x_window: (-2.0, 2.0),
            below,
            above,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("sample size must be positive".into()));
        }
        let (lo, hi) = self.x_window;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("empty evaluation window [{lo}, {hi}]")));
        }
        self.below.validate()?;
        self.above.validate()
    }

    pub fn branch(&self, x: f64) -> &Branch {
        if x <= 0.0 {
            &self.below
        } else {
            &self.above
        }
    }

    /// Marginal density of `X`.
    pub fn x_pdf(&self, x: f64) -> f64 {
        gaussian_kernel(x)
    }

    /// True conditional density `p(y|x)`.
    pub fn conditional_pdf(&self, x: f64, y: f64) -> f64 {
        self.branch(x).pdf(x, y)
    }
}

/// Draws `config.n` pairs from the stream keyed by `seed`.
pub fn generate(config: &SimulationConfig, seed: u64) -> Result<Sample> {
    config.validate()?;
    let mut r = rng::stream(seed, &[rng::tag::GENERATE]);
    let mut x = Vec::with_capacity(config.n);
    let mut y = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let xi: f64 = r.sample(StandardNormal);
        y.push(config.branch(xi).draw(xi, &mut r));
        x.push(xi);
    }
    Sample::new(x, y)
}

/// Local maxima of the true `p(·|x)`, by a scan at step `1e-4` of the scan
/// span refined with safeguarded Newton steps on the analytic density.
pub fn true_modes(config: &SimulationConfig, x: f64) -> ModeSet {
    ModeSet::from_sorted_unchecked(x, config.branch(x).modes(x))
}
