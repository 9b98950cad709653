//! Delimited-text datasets, mode-curve tables, run configuration files and
//! the bundled geyser fixture.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::Sample;
use crate::error::{Error, Result};
use crate::modes::CurvePoint;
use crate::selectors::SelectorSettings;
use crate::simulation::EvalGrid;

/// A parsed dataset with the names of its covariate and response columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sample: Sample,
    pub x_name: String,
    pub y_name: String,
}

fn delimiter_of(header: &str) -> u8 {
    if header.contains(',') {
        b','
    } else if header.contains('\t') {
        b'\t'
    } else if header.contains(';') {
        b';'
    } else {
        b' '
    }
}

/// Parses delimited text whose first line names the columns. `columns`
/// selects the covariate and response by name; without it the text must
/// have exactly two columns, covariate first. Blank lines are skipped.
pub fn parse_dataset(text: &str, source: &str, columns: Option<(&str, &str)>) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (header_idx, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file: expected a header line".into()))?;
    let delim = delimiter_of(header);
    let split = |line: &str| -> Vec<String> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .delimiter(delim)
            .trim(csv::Trim::All)
            .from_reader(line.as_bytes());
        let rec = rdr.records().next();
        match rec {
            Some(Ok(r)) => r
                .iter()
                .filter(|f| delim != b' ' || !f.is_empty())
                .map(str::to_string)
                .collect(),
            _ => Vec::new(),
        }
    };
    let names = split(header);
    let (xi, yi) = match columns {
        Some((xn, yn)) => {
            let find = |name: &str| {
                names.iter().position(|n| n == name).ok_or_else(|| {
                    parse_err(
                        header_idx + 1,
                        format!("no column named {name:?}; header has {names:?}"),
                    )
                })
            };
            (find(xn)?, find(yn)?)
        }
        None if names.len() == 2 => (0, 1),
        None => {
            return Err(parse_err(
                header_idx + 1,
                format!(
                    "expected two columns, found {}; choose two by name",
                    names.len()
                ),
            ))
        }
    };
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (idx, line) in lines {
        let fields = split(line);
        let get = |k: usize, name: &str| -> Result<f64> {
            let raw = fields.get(k).ok_or_else(|| {
                parse_err(idx + 1, format!("missing field {name:?} ({} fields)", fields.len()))
            })?;
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("{name}: cannot parse {raw:?} as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(idx + 1, format!("{name}: value {raw:?} is not finite")));
            }
            Ok(v)
        };
        x.push(get(xi, &names[xi])?);
        y.push(get(yi, &names[yi])?);
    }
    if x.is_empty() {
        return Err(parse_err(header_idx + 1, "no data rows after the header".into()));
    }
    Ok(Dataset {
        sample: Sample::new(x, y)?,
        x_name: names[xi].clone(),
        y_name: names[yi].clone(),
    })
}

pub fn read_dataset(path: &Path, columns: Option<(&str, &str)>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, &path.display().to_string(), columns)
}

/// Comma-separated text that [`parse_dataset`] reads back exactly; floats
/// use the shortest representation that round-trips.
pub fn write_dataset(sample: &Sample, x_name: &str, y_name: &str) -> String {
    let mut out = format!("{x_name},{y_name}\n");
    for (a, b) in sample.x().iter().zip(sample.y()) {
        out.push_str(&format!("{a:?},{b:?}\n"));
    }
    out
}

/// Mode-curve table: `x,count,status,mode_1,…,mode_K`, padded with empty
/// fields. Points without an estimate keep their row with an empty count and
/// the reason in `status`.
pub fn mode_curves_csv(points: &[CurvePoint]) -> Result<String> {
    let width = points
        .iter()
        .filter_map(|p| p.modes().map(|m| m.len()))
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x".to_string(), "count".to_string(), "status".to_string()];
    header.extend((1..=width).map(|k| format!("mode_{k}")));
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    w.write_record(&header).map_err(ser)?;
    for p in points {
        let mut rec = vec![format!("{:?}", p.x)];
        match &p.modes {
            Ok(m) => {
                rec.push(m.len().to_string());
                rec.push("ok".into());
                rec.extend(m.locations().iter().map(|v| format!("{v:?}")));
                rec.extend(std::iter::repeat(String::new()).take(width - m.len()));
            }
            Err(reason) => {
                rec.push(String::new());
                rec.push(reason.as_str().into());
                rec.extend(std::iter::repeat(String::new()).take(width));
            }
        }
        w.write_record(&rec).map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
}

/// Declarative run settings read from TOML.
///
/// ```toml
/// seed = 7
/// curve_points = 101
///
/// [selectors]
/// window_percentiles = [2.5, 97.5]
/// draws = 25
///
/// [selectors.search]
/// h1_range = [0.5, 20.0]
/// h2_range = [0.05, 2.0]
/// grid_points_per_axis = 12
/// refine_rounds = 3
///
/// [eval]
/// x_lo = -2.0
/// x_hi = 2.0
/// dx = 0.05
/// y_points = 201
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub seed: Option<u64>,
    /// Covariate grid size for mode curves.
    pub curve_points: usize,
    pub selectors: SelectorSettings,
    pub eval: EvalGrid,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        Self {
            seed: None,
            curve_points: 101,
            selectors: SelectorSettings::default(),
            eval: EvalGrid::default(),
        }
    }
}

impl RunConfigFile {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.curve_points == 0 {
            return Err(Error::InvalidConfig("curve_points must be positive".into()));
        }
        self.selectors.validate()?;
        self.eval.validate()
    }
}

/// Bundled datasets.
pub mod fixtures {
    use super::{parse_dataset, Dataset};
    use crate::error::Result;

    /// Raw text of the Old Faithful geyser data (columns `waiting,duration`).
    pub const GEYSER_CSV: &str = include_str!("../data/geyser.csv");

    /// Geyser data with `waiting` as covariate and `duration` as response.
    pub fn geyser() -> Dataset {
        geyser_columns("waiting", "duration").expect("bundled fixture parses")
    }

    /// Geyser data with a chosen orientation.
    pub fn geyser_columns(x: &str, y: &str) -> Result<Dataset> {
        parse_dataset(GEYSER_CSV, "builtin:geyser", Some((x, y)))
    }
}
