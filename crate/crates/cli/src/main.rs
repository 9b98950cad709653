//! `modalband` command-line tool.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use modalband::io::{fixtures, mode_curves_csv, read_dataset, Dataset, RunConfigFile};
use modalband::selectors::select;
use modalband::simulation::{run_experiment_with, ConfigTag, ExperimentSettings, SimulationConfig};
use modalband::{mode_curves, Bandwidths, Error, ErrorClass, MeanShiftConfig, Method};

const SELECT_SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "modalband", version, about = "Bandwidth selection and mode curves for modal regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select (h1, h2) for a dataset and print the result as JSON.
    Select(SelectArgs),
    /// Estimate conditional mode curves on an x grid and print them as CSV.
    Modes(ModesArgs),
    /// Run a Monte Carlo comparison on a benchmark design.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Delimited text file with a header line, or `builtin:geyser`.
    #[arg(long)]
    data: String,
    /// Covariate and response column names, as `x,y`.
    #[arg(long, value_parser = parse_columns)]
    columns: Option<(String, String)>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory to write outputs into instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    method: Method,
    /// Seed for the bootstrap selectors; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ModesArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    h1: f64,
    #[arg(long)]
    h2: f64,
    /// `count` points over the observed x range, or `lo:hi:count`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridSpec>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Benchmark design, C1 to C5.
    #[arg(long)]
    tag: ConfigTag,
    /// Selectors to compare; repeat or separate with commas.
    #[arg(long = "method", value_delimiter = ',', required = true)]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for report.csv, report.json and timing.json. Without it the
    /// per-replicate CSV goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress per-row progress on standard error.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy)]
enum GridSpec {
    Count(usize),
    Range(f64, f64, usize),
}

fn parse_columns(s: &str) -> Result<(String, String), String> {
    match s.split_once(',') {
        Some((x, y)) if !x.trim().is_empty() && !y.trim().is_empty() => {
            Ok((x.trim().to_string(), y.trim().to_string()))
        }
        _ => Err(format!("expected `x,y`, got {s:?}")),
    }
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let count = |t: &str| -> Result<usize, String> {
        match t.trim().parse::<usize>() {
            Ok(c) if c > 0 => Ok(c),
            _ => Err(format!("grid size must be a positive integer, got {t:?}")),
        }
    };
    let real = |t: &str| -> Result<f64, String> {
        match t.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("grid bound must be a finite number, got {t:?}")),
        }
    };
    match parts.as_slice() {
        [c] => Ok(GridSpec::Count(count(c)?)),
        [lo, hi, c] => {
            let (lo, hi) = (real(lo)?, real(hi)?);
            if lo > hi {
                return Err(format!("grid needs lo <= hi, got {lo} > {hi}"));
            }
            Ok(GridSpec::Range(lo, hi, count(c)?))
        }
        _ => Err(format!("expected `count` or `lo:hi:count`, got {s:?}")),
    }
}

fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (m - 1) as f64;
    (0..m).map(|i| if i == m - 1 { hi } else { lo + step * i as f64 }).collect()
}

fn load_config(path: Option<&Path>) -> Result<RunConfigFile, Error> {
    match path {
        Some(p) => RunConfigFile::load(p),
        None => Ok(RunConfigFile::default()),
    }
}

fn load_data(args: &DataArgs) -> Result<Dataset, Error> {
    let columns = args.columns.as_ref().map(|(x, y)| (x.as_str(), y.as_str()));
    match args.data.strip_prefix("builtin:") {
        Some("geyser") => match columns {
            Some((x, y)) => fixtures::geyser_columns(x, y),
            None => Ok(fixtures::geyser()),
        },
        Some(other) => Err(Error::InvalidConfig(format!(
            "unknown builtin dataset {other:?}; available: geyser"
        ))),
        None => read_dataset(Path::new(&args.data), columns),
    }
}

fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<(), Error> {
    match out {
        Some(dir) => {
            let io_err = |path: &Path| {
                let path = path.display().to_string();
                move |source| Error::Io { path, source }
            };
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(io_err(&path))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &serde_json::Value) -> Result<String, Error> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Serialize(e.to_string()))
}

fn cmd_select(args: &SelectArgs) -> Result<(), Error> {
    let cfg = load_config(args.data.config.as_deref())?;
    let data = load_data(&args.data)?;
    if data.sample.len() < 2 {
        return Err(Error::InvalidSample(format!(
            "bandwidth selection needs at least two observations, got {}",
            data.sample.len()
        )));
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let start = Instant::now();
    let ctx = cfg.selectors.context(&data.sample, seed, None)?;
    let result = select(args.method, &data.sample, &ctx)?;
    let doc = json!({
        "schema_version": SELECT_SCHEMA_VERSION,
        "dataset": {
            "source": args.data.data,
            "x": data.x_name,
            "y": data.y_name,
            "n": data.sample.len(),
        },
        "seed": seed,
        "result": result,
        "timing": { "seconds": start.elapsed().as_secs_f64() },
    });
    emit(args.data.out.as_deref(), "selection.json", &to_json(&doc)?)
}

fn cmd_modes(args: &ModesArgs) -> Result<(), Error> {
    let cfg = load_config(args.data.config.as_deref())?;
    let data = load_data(&args.data)?;
    let h = Bandwidths::new(args.h1, args.h2)?;
    let xs = data.sample.x();
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let grid = match args.grid.unwrap_or(GridSpec::Count(cfg.curve_points)) {
        GridSpec::Count(m) => linspace(lo, hi, m),
        GridSpec::Range(lo, hi, m) => linspace(lo, hi, m),
    };
    let ms = cfg
        .selectors
        .mean_shift
        .unwrap_or_else(|| MeanShiftConfig::for_sample(&data.sample));
    ms.validate()?;
    let curves = mode_curves(&data.sample, h, &grid, &ms)?;
    emit(args.data.out.as_deref(), "modes.csv", &mode_curves_csv(&curves)?)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let cfg = load_config(args.config.as_deref())?;
    let config = SimulationConfig::preset(args.tag, args.n);
    let mut settings = ExperimentSettings::new(
        args.methods.clone(),
        args.replicates,
        args.seed.or(cfg.seed).unwrap_or(0),
    );
    settings.selectors = cfg.selectors;
    settings.eval = cfg.eval;
    let total = args.replicates * args.methods.len();
    let mut done = 0;
    let report = run_experiment_with(&config, &settings, |row| {
        done += 1;
        if !args.quiet {
            let status = match (&row.failure, row.eise_m) {
                (Some(f), _) => format!("failed: {f}"),
                (None, Some(e)) => format!("eise_m = {e:.4}"),
                (None, None) => String::new(),
            };
            eprintln!("[{done}/{total}] replicate {} {}: {status}", row.replicate, row.method);
        }
    })?;
    let csv = report.to_csv()?;
    match args.out.as_deref() {
        Some(dir) => {
            emit(Some(dir), "report.csv", &csv)?;
            emit(Some(dir), "report.json", &(report.to_json()? + "\n"))?;
            emit(Some(dir), "timing.json", &(report.timing_json()? + "\n"))
        }
        None => emit(None, "report.csv", &csv),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Io => 3,
        ErrorClass::Parse => 4,
        ErrorClass::Validation => 5,
        ErrorClass::Numerical => 6,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Modes(a) => cmd_modes(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = match (&e, e.class()) {
                (Error::Io { source, .. }, _) if source.kind() == std::io::ErrorKind::NotFound => {
                    "file not found"
                }
                (_, ErrorClass::Io) => "i/o error",
                (_, ErrorClass::Parse) => "parse error",
                (_, ErrorClass::Validation) => "invalid input",
                (_, ErrorClass::Numerical) => "numerical failure",
            };
            eprintln!("modalband: {class}: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
