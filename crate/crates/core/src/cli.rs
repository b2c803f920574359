//! Command-line front end: `sbf fit`, `sbf check` and `sbf simulate`.
//!
//! Exit codes: 0 success, 2 input error, 3 identifiability failure,
//! 4 non-convergence, 1 anything else. Failures print a JSON object
//! `{"error": <kind>, "message": <text>}` on standard error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::backfit::{check_identifiability, fit, FitConfig, FitDiagnostics, IdentifiabilityReport};
use crate::dataset::Dataset;
use crate::domain::{Domain, GridSet, DEFAULT_GRID_SIZE};
use crate::error::Error;
use crate::kernel::{bandwidth_from_rate, KernelFamily, KernelSpec};
use crate::simulate::{monte_carlo, McRun, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IDENTIFIABILITY: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

/// Default `c_h`, applied per axis relative to the covariate range.
pub const DEFAULT_RELATIVE_CH: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(name = "sbf", version, about = "Local linear smooth backfitting for additive models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an additive model and write fit JSON plus per-axis plot CSVs.
    Fit(FitArgs),
    /// Check identifiability of a dataset; exits 3 when it fails.
    Check(FitArgs),
    /// Run a Monte Carlo scenario and write the summary and convergence trace.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV file with a header row
    #[arg(long)]
    pub input: PathBuf,
    /// Response column
    #[arg(long)]
    pub response: String,
    /// Covariate columns (default: every other column)
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Bandwidths, one per covariate or a single shared value
    #[arg(long, value_delimiter = ',', conflicts_with = "ch")]
    pub bandwidth: Vec<f64>,
    /// Bandwidth constant for h = c_h * n^(-1/5)
    #[arg(long)]
    pub ch: Option<f64>,
    /// Domain override as lo:hi per covariate, comma separated
    #[arg(long, value_delimiter = ',')]
    pub domain: Vec<String>,
    /// Widen the inferred domain by one bandwidth on each side
    #[arg(long)]
    pub expand_domain: bool,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 500)]
    pub max_sweeps: usize,
    /// Skip the identifiability check before fitting
    #[arg(long)]
    pub bypass_identifiability: bool,
    /// Output path (fit JSON for `fit`, report JSON for `check`)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario file (flat TOML key-value pairs)
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Override the scenario seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Error reported by a subcommand: a stable kind string plus exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    fn input(kind: &'static str, message: impl Into<String>) -> Self {
        Self { kind, message: message.into(), exit_code: EXIT_INPUT }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (kind, exit_code) = match e {
            Error::InvalidArgument(_) => ("invalid-argument", EXIT_INPUT),
            Error::Data { .. } => ("data", EXIT_INPUT),
            Error::Identifiability(_) => ("identifiability", EXIT_IDENTIFIABILITY),
            Error::Convergence { .. } => ("non-convergence", EXIT_CONVERGENCE),
            Error::Numerical(_) => ("numerical", EXIT_INTERNAL),
            Error::Harness(_) => ("harness", EXIT_INTERNAL),
        };
        Self { kind, message, exit_code }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::input("io", format!("{}: {e}", path.display()))
}

/// Parsed numeric table from a CSV file.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| io_error(path, e))?;
        let headers: Vec<String> = rdr.headers().map_err(|e| io_error(path, e))?.iter().map(String::from).collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for (r, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| CliError::input("parse", e.to_string()))?;
            for (c, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    CliError::input(
                        "parse",
                        format!("row {}, column '{}': '{field}' is not a number", r + 1, headers[c]),
                    )
                })?;
                columns[c].push(v);
            }
        }
        Ok(Self { headers, columns })
    }

    pub fn column(&self, name: &str) -> Result<&[f64], CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| CliError::input("column-not-found", format!("column '{name}' not found")))
    }
}

/// Inputs of `fit` and `check` after reading the CSV and resolving the
/// domain and bandwidths.
#[derive(Debug, Clone)]
pub struct FitRequest {
    pub response: String,
    pub covariates: Vec<String>,
    pub data: Dataset,
    pub spec: KernelSpec,
    pub grids: GridSet,
    pub config: FitConfig,
}

fn parse_domain(items: &[String], d: usize) -> Result<Vec<(f64, f64)>, CliError> {
    if items.len() != d {
        return Err(CliError::input("invalid-argument", format!("--domain needs {d} intervals, got {}", items.len())));
    }
    items
        .iter()
        .map(|s| {
            let (a, b) = s
                .split_once(':')
                .ok_or_else(|| CliError::input("invalid-argument", format!("bad interval '{s}', expected lo:hi")))?;
            let parse = |t: &str| {
                t.trim().parse::<f64>().map_err(|_| CliError::input("invalid-argument", format!("bad interval '{s}'")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

impl FitRequest {
    pub fn from_args(args: &FitArgs) -> Result<Self, CliError> {
        let table = Table::read(&args.input)?;
        let y = table.column(&args.response)?.to_vec();
        let covariates: Vec<String> = if args.covariates.is_empty() {
            table.headers.iter().filter(|h| **h != args.response).cloned().collect()
        } else {
            args.covariates.clone()
        };
        if covariates.is_empty() {
            return Err(CliError::input("invalid-argument", "no covariate columns"));
        }
        let cols = covariates.iter().map(|c| table.column(c)).collect::<Result<Vec<_>, _>>()?;
        let n = y.len();
        let d = cols.len();

        let ranges: Vec<(f64, f64)> = cols
            .iter()
            .map(|c| {
                let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect();
        let bandwidths: Vec<f64> = if !args.bandwidth.is_empty() {
            match args.bandwidth.len() {
                1 => vec![args.bandwidth[0]; d],
                m if m == d => args.bandwidth.clone(),
                m => {
                    return Err(CliError::input(
                        "invalid-argument",
                        format!("{m} bandwidths given for {d} covariates"),
                    ))
                }
            }
        } else if let Some(ch) = args.ch {
            vec![bandwidth_from_rate(ch, n); d]
        } else {
            ranges
                .iter()
                .map(|(lo, hi)| {
                    let width = if hi > lo { hi - lo } else { 1.0 };
                    bandwidth_from_rate(DEFAULT_RELATIVE_CH * width, n)
                })
                .collect()
        };
        let spec = KernelSpec::new(KernelFamily::Epanechnikov, bandwidths)?;

        let axes = if !args.domain.is_empty() {
            parse_domain(&args.domain, d)?
        } else {
            ranges
                .iter()
                .enumerate()
                .map(|(j, &(lo, hi))| {
                    let h = spec.bandwidth(j);
                    if args.expand_domain || hi <= lo {
                        (lo - h, hi + h)
                    } else {
                        (lo, hi)
                    }
                })
                .collect()
        };
        let domain = Domain::new(axes)?;
        let x = DMatrix::from_fn(n, d, |i, j| cols[j][i]);
        let data = Dataset::new(x, y, domain.clone())?;
        let grids = GridSet::uniform(&domain, args.grid_size)?;
        let mut config = FitConfig::default().with_tolerance(args.tolerance).with_max_sweeps(args.max_sweeps);
        config.bypass_identifiability = args.bypass_identifiability;
        Ok(Self { response: args.response.clone(), covariates, data, spec, grids, config })
    }
}

/// Per-axis component of the fit JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentJson {
    pub axis: usize,
    pub name: String,
    pub grid: Vec<f64>,
    pub m_hat: Vec<f64>,
    pub m_hat_deriv: Vec<f64>,
}

/// Fit JSON written by `sbf fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitJson {
    pub response: String,
    pub intercept: f64,
    pub kernel: String,
    pub bandwidths: Vec<f64>,
    pub domain: Vec<[f64; 2]>,
    pub grid_size: usize,
    pub tolerance: f64,
    pub components: Vec<ComponentJson>,
    pub diagnostics: FitDiagnostics,
}

/// Fit the request and build the JSON document.
pub fn cmd_fit(req: &FitRequest) -> Result<FitJson, CliError> {
    let (fitted, diagnostics) = fit(&req.data, &req.spec, &req.grids, &req.config)?;
    let components = (0..req.data.dim())
        .map(|j| ComponentJson {
            axis: j,
            name: req.covariates[j].clone(),
            grid: req.grids.axis(j).points().to_vec(),
            m_hat: fitted.level(j).to_vec(),
            m_hat_deriv: fitted.slope(j).to_vec(),
        })
        .collect();
    Ok(FitJson {
        response: req.response.clone(),
        intercept: fitted.intercept(),
        kernel: req.spec.family.to_string(),
        bandwidths: req.spec.bandwidths().to_vec(),
        domain: req.data.domain().axes().iter().map(|&(a, b)| [a, b]).collect(),
        grid_size: req.grids.grid_size(),
        tolerance: req.config.tolerance,
        components,
        diagnostics,
    })
}

/// Plot CSV path for axis `j` next to the fit JSON at `out`.
pub fn plot_path(out: &Path, j: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("fit");
    out.with_file_name(format!("{stem}_axis{j}.csv"))
}

/// Write the fit JSON to `out` and one `axis,x,m_hat,m_hat_deriv` CSV per axis.
pub fn write_fit_outputs(fit: &FitJson, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let file = File::create(out).map_err(|e| io_error(out, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), fit).map_err(|e| io_error(out, e))?;
    let mut written = vec![out.to_path_buf()];
    for c in &fit.components {
        let path = plot_path(out, c.axis);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
        w.write_record(["axis", "x", "m_hat", "m_hat_deriv"]).map_err(|e| io_error(&path, e))?;
        for ((x, m), dm) in c.grid.iter().zip(&c.m_hat).zip(&c.m_hat_deriv) {
            w.serialize((c.axis, x, m, dm)).map_err(|e| io_error(&path, e))?;
        }
        w.flush().map_err(|e| io_error(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_check(req: &FitRequest) -> Result<IdentifiabilityReport, CliError> {
    Ok(check_identifiability(&req.data, &req.spec, &req.grids)?)
}

/// Load the scenario, apply overrides and run the Monte Carlo harness.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<McRun, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| io_error(&args.config, e))?;
    let mut scenario = Scenario::from_toml(&text).map_err(|e| CliError::input("config", e.to_string()))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let eval_points = if scenario.eval_points.is_empty() {
        default_eval_points(&scenario)
    } else {
        scenario.eval_points.clone()
    };
    Ok(monte_carlo(&scenario, args.reps, &eval_points)?)
}

/// Five equally spaced points spanning `[a + 2h, b - 2h]`.
pub fn default_eval_points(s: &Scenario) -> Vec<f64> {
    let h = s.bandwidth();
    let (lo, hi) = (s.lower + 2.0 * h, s.upper - 2.0 * h);
    if hi <= lo {
        return vec![0.5 * (s.lower + s.upper)];
    }
    (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
}

pub fn write_simulation_outputs(run: &McRun, dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let summary = dir.join("mc_summary.csv");
    let trace = dir.join("convergence_trace.csv");
    run.summary.write_csv(File::create(&summary).map_err(|e| io_error(&summary, e))?)?;
    run.write_trace_csv(File::create(&trace).map_err(|e| io_error(&trace, e))?)?;
    Ok((summary, trace))
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let out_err = |e: std::io::Error| CliError { kind: "io", message: e.to_string(), exit_code: EXIT_INTERNAL };
    match cli.command {
        Command::Fit(args) => {
            let req = FitRequest::from_args(&args)?;
            let json = cmd_fit(&req)?;
            let out = args.out.unwrap_or_else(|| PathBuf::from("fit.json"));
            for path in write_fit_outputs(&json, &out)? {
                writeln!(stdout, "wrote {}", path.display()).map_err(out_err)?;
            }
            Ok(EXIT_OK)
        }
        Command::Check(args) => {
            let req = FitRequest::from_args(&args)?;
            let report = cmd_check(&req)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Some(out) = &args.out {
                std::fs::write(out, &text).map_err(|e| io_error(out, e))?;
            }
            writeln!(stdout, "{text}").map_err(out_err)?;
            Ok(if report.passed { EXIT_OK } else { EXIT_IDENTIFIABILITY })
        }
        Command::Simulate(args) => {
            let run = cmd_simulate(&args)?;
            let (summary, trace) = write_simulation_outputs(&run, &args.out)?;
            writeln!(stdout, "wrote {}\nwrote {}", summary.display(), trace.display()).map_err(out_err)?;
            Ok(EXIT_OK)
        }
    }
}

/// Run the CLI with explicit output streams; returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit_code
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}
