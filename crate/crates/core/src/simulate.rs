//! Synthetic additive-model data and Monte Carlo checks of the fitted
//! components against their first-order bias and variance.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::backfit::{fit_with_tables, FitConfig};
use crate::dataset::Dataset;
use crate::domain::{Domain, GridSet, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::kernel::{bandwidth_from_rate, KernelFamily, KernelSpec};
use crate::marginals::compute_marginals;
use crate::theory::theory_variance;

/// Component functions centered under the uniform density on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentFn {
    Zero,
    /// `s (x - mid)`
    Linear(f64),
    /// `x² - E x²`
    Quadratic,
    /// `sin(2π (x - a) / (b - a))`
    Sine,
    /// `x³ - E x³`
    Cubic,
}

impl ComponentFn {
    pub fn value(self, x: f64, a: f64, b: f64) -> f64 {
        let len = b - a;
        match self {
            ComponentFn::Zero => 0.0,
            ComponentFn::Linear(s) => s * (x - 0.5 * (a + b)),
            ComponentFn::Quadratic => x * x - (a * a + a * b + b * b) / 3.0,
            ComponentFn::Sine => (2.0 * PI * (x - a) / len).sin(),
            ComponentFn::Cubic => x * x * x - (b.powi(4) - a.powi(4)) / (4.0 * len),
        }
    }

    pub fn first_derivative(self, x: f64, a: f64, b: f64) -> f64 {
        let w = 2.0 * PI / (b - a);
        match self {
            ComponentFn::Zero => 0.0,
            ComponentFn::Linear(s) => s,
            ComponentFn::Quadratic => 2.0 * x,
            ComponentFn::Sine => w * (w * (x - a)).cos(),
            ComponentFn::Cubic => 3.0 * x * x,
        }
    }

    pub fn second_derivative(self, x: f64, a: f64, b: f64) -> f64 {
        let w = 2.0 * PI / (b - a);
        match self {
            ComponentFn::Zero | ComponentFn::Linear(_) => 0.0,
            ComponentFn::Quadratic => 2.0,
            ComponentFn::Sine => -w * w * (w * (x - a)).sin(),
            ComponentFn::Cubic => 6.0 * x,
        }
    }

    /// `∫ m''(u) p(u) du` under the uniform density on `[a, b]`.
    pub fn mean_second_derivative(self, a: f64, b: f64) -> f64 {
        match self {
            ComponentFn::Zero | ComponentFn::Linear(_) | ComponentFn::Sine => 0.0,
            ComponentFn::Quadratic => 2.0,
            ComponentFn::Cubic => 3.0 * (a + b),
        }
    }
}

impl fmt::Display for ComponentFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentFn::Zero => f.write_str("zero"),
            ComponentFn::Linear(s) => write!(f, "linear:{s}"),
            ComponentFn::Quadratic => f.write_str("quadratic"),
            ComponentFn::Sine => f.write_str("sine"),
            ComponentFn::Cubic => f.write_str("cubic"),
        }
    }
}

impl FromStr for ComponentFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "zero" => Ok(ComponentFn::Zero),
            "quadratic" => Ok(ComponentFn::Quadratic),
            "sine" => Ok(ComponentFn::Sine),
            "cubic" => Ok(ComponentFn::Cubic),
            _ => match s.strip_prefix("linear:") {
                Some(slope) => slope
                    .parse()
                    .map(ComponentFn::Linear)
                    .map_err(|_| Error::invalid(format!("bad slope in component '{s}'"))),
                None => Err(Error::invalid(format!("unknown component '{s}'"))),
            },
        }
    }
}

impl Serialize for ComponentFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ComponentFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// independent uniform covariates
    #[default]
    Uniform,
    /// uniform marginals coupled by an equicorrelated Gaussian copula
    Copula,
}

fn default_upper() -> f64 {
    1.0
}
fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}
fn default_tolerance() -> f64 {
    1e-8
}
fn default_max_sweeps() -> usize {
    500
}

/// Simulation model `Y = m₀ + Σ_j m_j(X_j) + ε` with `ε ~ N(0, σ²)` and
/// bandwidth `h = c_h n^{-1/5}` on every axis. Every axis shares the
/// interval `[lower, upper]`.
///
/// Serialized as a flat key-value (TOML) file:
///
/// ```toml
/// n = 1000
/// components = ["sine", "quadratic"]
/// design = "uniform"
/// sigma = 0.5
/// c_h = 0.5
/// seed = 7
/// eval_points = [0.26, 0.38, 0.5, 0.62, 0.74]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub components: Vec<ComponentFn>,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub lower: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
    #[serde(default)]
    pub design: Design,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub sigma: f64,
    pub c_h: f64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    /// Interior points at which the Monte Carlo summary is evaluated.
    #[serde(default)]
    pub eval_points: Vec<f64>,
}

impl Scenario {
    pub fn new(n: usize, components: Vec<ComponentFn>, c_h: f64) -> Self {
        Self {
            n,
            components,
            intercept: 0.0,
            lower: 0.0,
            upper: 1.0,
            design: Design::Uniform,
            rho: 0.0,
            sigma: 0.0,
            c_h,
            grid_size: DEFAULT_GRID_SIZE,
            seed: 0,
            tolerance: 1e-8,
            max_sweeps: 500,
            eval_points: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::invalid(format!("scenario config: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("scenario config: {e}")))
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn bandwidth(&self) -> f64 {
        bandwidth_from_rate(self.c_h, self.n)
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(vec![(self.lower, self.upper); self.dim()])
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::from_rate(KernelFamily::Epanechnikov, self.c_h, self.n, self.dim())
    }

    pub fn grids(&self) -> Result<GridSet> {
        GridSet::uniform(&self.domain()?, self.grid_size)
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig::default().with_tolerance(self.tolerance).with_max_sweeps(self.max_sweeps)
    }

    /// Uniform marginal density on every axis.
    pub fn density(&self) -> f64 {
        1.0 / (self.upper - self.lower)
    }

    /// `m_j(x)`
    pub fn truth(&self, j: usize, x: f64) -> f64 {
        self.components[j].value(x, self.lower, self.upper)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("scenario needs at least one component"));
        }
        if self.n < 2 {
            return Err(Error::invalid("scenario needs n >= 2"));
        }
        if !(self.lower < self.upper) {
            return Err(Error::invalid("scenario interval is empty"));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!("correlation must lie in (-1, 1), got {}", self.rho)));
        }
        let d = self.dim() as f64;
        if self.design == Design::Copula && d > 1.0 && self.rho <= -1.0 / (d - 1.0) {
            return Err(Error::invalid(format!(
                "equicorrelation {} is not positive definite in {d} dimensions",
                self.rho
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid("noise level must be nonnegative"));
        }
        if !(self.c_h > 0.0) {
            return Err(Error::invalid("c_h must be positive"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::invalid("seed must fit in a signed 64-bit integer"));
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("grid_size must be at least 2"));
        }
        Ok(())
    }

    fn rng(&self, rep: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep);
        rng
    }
}

/// Draw the dataset of replication 0.
pub fn generate(scenario: &Scenario) -> Result<Dataset> {
    generate_replication(scenario, 0)
}

/// Draw the dataset of replication `rep`; each replication uses its own
/// stream of the scenario seed.
pub fn generate_replication(scenario: &Scenario, rep: u64) -> Result<Dataset> {
    scenario.validate()?;
    let (n, d) = (scenario.n, scenario.dim());
    let (a, b) = (scenario.lower, scenario.upper);
    let len = b - a;
    let mut rng = scenario.rng(rep);
    let mut x = DMatrix::zeros(n, d);
    match scenario.design {
        Design::Uniform => {
            let unif = rand_distr::Uniform::new_inclusive(0.0, 1.0);
            for i in 0..n {
                for j in 0..d {
                    x[(i, j)] = a + len * unif.sample(&mut rng);
                }
            }
        }
        Design::Copula => {
            let rho = scenario.rho;
            let cov = DMatrix::from_fn(d, d, |r, c| if r == c { 1.0 } else { rho });
            let chol = Cholesky::new(cov)
                .ok_or_else(|| Error::invalid(format!("correlation {rho} is not positive definite")))?;
            let l = chol.l();
            let phi = StatNormal::new(0.0, 1.0).expect("standard normal");
            let mut e = vec![0.0; d];
            for i in 0..n {
                for v in e.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                for j in 0..d {
                    let z: f64 = (0..=j).map(|c| l[(j, c)] * e[c]).sum();
                    x[(i, j)] = (a + len * phi.cdf(z)).clamp(a, b);
                }
            }
        }
    }
    let noise = Normal::new(0.0, scenario.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let y = (0..n)
        .map(|i| {
            let signal: f64 = scenario.intercept + (0..d).map(|j| scenario.truth(j, x[(i, j)])).sum::<f64>();
            let eps = if scenario.sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            signal + eps
        })
        .collect();
    Dataset::new(x, y, scenario.domain()?)
}

/// Monte Carlo statistics of `m̂_j(x) - m_j(x)` at one evaluation point, with
/// `m_j` recentered so that `∫ m_j p̂_j = 0` like the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub axis: usize,
    pub x: f64,
    pub reps: usize,
    pub mean_error: f64,
    pub var_error: f64,
    /// standard error of `mean_error`
    pub mc_se: f64,
    pub predicted_bias: f64,
    pub predicted_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub points: Vec<PointSummary>,
    pub replications: usize,
    pub failures: Vec<ReplicationFailure>,
    pub bandwidth: f64,
}

impl McSummary {
    pub fn point(&self, axis: usize, x: f64) -> Option<&PointSummary> {
        self.points.iter().find(|p| p.axis == axis && (p.x - x).abs() < 1e-12)
    }

    /// CSV with one row per `(axis, x)`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for p in &self.points {
            w.serialize(p).map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
        }
        w.flush().map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

/// Summary plus the per-replication sweep errors of the backfitting runs.
#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub summary: McSummary,
    /// `(rep, sweep errors)` for every successful replication
    pub traces: Vec<(usize, Vec<f64>)>,
}

impl McRun {
    /// CSV with columns `rep,sweep,error`; sweeps count from one.
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
        w.write_record(["rep", "sweep", "error"]).map_err(io)?;
        for (rep, errors) in &self.traces {
            for (s, e) in errors.iter().enumerate() {
                w.serialize((rep, s + 1, e)).map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

/// Largest share of failed replications tolerated by [`monte_carlo`].
pub const MAX_FAILURE_SHARE: f64 = 0.05;

type RepOutcome = std::result::Result<(Vec<f64>, Vec<f64>), String>;

fn run_replication(scenario: &Scenario, rep: usize, eval_points: &[f64]) -> Result<RepOutcome> {
    let data = generate_replication(scenario, rep as u64)?;
    let spec = scenario.kernel()?;
    let grids = scenario.grids()?;
    let outcome = compute_marginals(&data, &spec, &grids).and_then(|t| {
        let (fit, diag) = fit_with_tables(&t, data.y(), data.domain(), &scenario.fit_config())?;
        let mut errs = Vec::with_capacity(scenario.dim() * eval_points.len());
        for j in 0..scenario.dim() {
            // the fit is centered against p̂_j, so compare with the truth centered the same way
            let truth: Vec<f64> = grids.axis(j).points().iter().map(|&x| scenario.truth(j, x)).collect();
            let shift = grids.axis(j).integrate(&truth.iter().zip(t.p(j)).map(|(m, p)| m * p).collect::<Vec<_>>())?;
            for &x in eval_points {
                errs.push(fit.level_at(j, x)? - (scenario.truth(j, x) - shift));
            }
        }
        Ok((errs, diag.errors))
    });
    Ok(outcome.map_err(|e| e.to_string()))
}

/// Fit `reps` independent replications and summarize the component errors
/// at `eval_points` (each at least `2h` from both ends of the interval).
///
/// Replications run in parallel; results are merged in replication order so
/// serial and parallel runs agree exactly. Failed fits are recorded and
/// excluded; more than 5% failures is an error.
pub fn monte_carlo(scenario: &Scenario, reps: usize, eval_points: &[f64]) -> Result<McRun> {
    scenario.validate()?;
    if reps == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    let h = scenario.bandwidth();
    for &x in eval_points {
        if x < scenario.lower + 2.0 * h - 1e-12 || x > scenario.upper - 2.0 * h + 1e-12 {
            return Err(Error::invalid(format!("evaluation point {x} is within 2h = {} of the boundary", 2.0 * h)));
        }
    }
    let outcomes: Vec<RepOutcome> = (0..reps)
        .into_par_iter()
        .map(|rep| run_replication(scenario, rep, eval_points))
        .collect::<Result<Vec<_>>>()?;

    let mut failures = Vec::new();
    let mut errors = Vec::new();
    let mut traces = Vec::new();
    for (rep, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((e, t)) => {
                errors.push(e);
                traces.push((rep, t));
            }
            Err(message) => failures.push(ReplicationFailure { rep, message }),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_SHARE * reps as f64 {
        return Err(Error::Harness(format!(
            "{} of {reps} replications failed; first: {}",
            failures.len(),
            failures[0].message
        )));
    }

    let spec = scenario.kernel()?;
    let mu2 = spec.family.moment(2);
    let ok = errors.len();
    let mut points = Vec::new();
    for j in 0..scenario.dim() {
        let comp = scenario.components[j];
        let mean_curv = comp.mean_second_derivative(scenario.lower, scenario.upper);
        for (q, &x) in eval_points.iter().enumerate() {
            let idx = j * eval_points.len() + q;
            let mean = errors.iter().map(|e| e[idx]).sum::<f64>() / ok as f64;
            let ss: f64 = errors.iter().map(|e| (e[idx] - mean).powi(2)).sum();
            let var = if ok > 1 { ss / (ok - 1) as f64 } else { 0.0 };
            let curv = comp.second_derivative(x, scenario.lower, scenario.upper);
            points.push(PointSummary {
                axis: j,
                x,
                reps: ok,
                mean_error: mean,
                var_error: var,
                mc_se: (var / ok as f64).sqrt(),
                predicted_bias: 0.5 * (curv - mean_curv) * h * h * mu2,
                predicted_variance: theory_variance(j, scenario.sigma.powi(2), scenario.density(), scenario.n, &spec)?,
            });
        }
    }
    Ok(McRun {
        summary: McSummary { points, replications: reps, failures, bandwidth: h },
        traces,
    })
}
