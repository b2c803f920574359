//! Iterative smooth backfitting, the identifiability check and prediction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::domain::{Domain, GridSet};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::marginals::{cauchy_schwarz_ratio, compute_marginals, MarginalTables};
use crate::projection::{
    project_others, project_response_all, AdditiveElement, Component, ComponentValue,
};

/// Relative singular-value threshold for the design rank check.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Cauchy–Schwarz ratios this close to one are treated as equality.
const DEGENERATE_RATIO: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Starting value; zero when `None`. Level functions are centered first.
    pub start: Option<AdditiveElement>,
    /// Skip the up-front identifiability check.
    pub bypass_identifiability: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_sweeps: 500, start: None, bypass_identifiability: false }
    }
}

impl FitConfig {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_sweeps(mut self, max_sweeps: usize) -> Self {
        self.max_sweeps = max_sweeps;
        self
    }

    pub fn with_start(mut self, start: AdditiveElement) -> Self {
        self.start = Some(start);
        self
    }

    pub fn bypassing_identifiability(mut self) -> Self {
        self.bypass_identifiability = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Sum over components of the norm of each update, one entry per sweep.
    pub errors: Vec<f64>,
    pub sweeps: usize,
    /// Geometric mean of the last `min(10, sweeps - 1)` error ratios.
    pub contraction: f64,
    pub converged: bool,
    pub cauchy_schwarz_ratio: f64,
}

impl FitDiagnostics {
    fn new(errors: Vec<f64>, converged: bool, cauchy_schwarz_ratio: f64) -> Self {
        let contraction = contraction_estimate(&errors);
        Self { sweeps: errors.len(), errors, contraction, converged, cauchy_schwarz_ratio }
    }
}

/// Geometric mean of the last `min(10, r - 1)` successive error ratios,
/// ignoring ratios that involve an exactly zero error.
pub fn contraction_estimate(errors: &[f64]) -> f64 {
    let ratios: Vec<f64> = errors
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    let tail = &ratios[ratios.len().saturating_sub(10)..];
    if tail.is_empty() {
        return 0.0;
    }
    (tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp()
}

/// Fitted additive model: a centered additive element on the fitting grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveFit {
    pub element: AdditiveElement,
    pub grids: GridSet,
    pub domain: Domain,
    pub kernel: KernelSpec,
    pub tolerance: f64,
    pub sweeps: usize,
}

impl AdditiveFit {
    pub fn intercept(&self) -> f64 {
        self.element.intercept
    }

    pub fn level(&self, j: usize) -> &[f64] {
        &self.element.levels[j]
    }

    pub fn slope(&self, j: usize) -> &[f64] {
        &self.element.slopes[j]
    }

    /// `m̂_j(x)` by linear interpolation.
    pub fn level_at(&self, j: usize, x: f64) -> Result<f64> {
        self.grids.axis(j).interpolate(&self.element.levels[j], x)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        predict(self, x)
    }
}

/// `m̂₀ + Σ_j m̂_j(x_j)`, interpolating linearly between grid nodes.
pub fn predict(fit: &AdditiveFit, x: &[f64]) -> Result<f64> {
    if x.len() != fit.domain.dim() {
        return Err(Error::invalid(format!("expected {} coordinates, got {}", fit.domain.dim(), x.len())));
    }
    if !fit.domain.contains(x) {
        return Err(Error::invalid(format!("{x:?} lies outside the fitted domain")));
    }
    let mut v = fit.element.intercept;
    for (j, &xj) in x.iter().enumerate() {
        v += fit.level_at(j, xj)?;
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Identifiability
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum IdentifiabilityFailure {
    /// Grid nodes in `[from, to]` on `axis` lack two distinct observations
    /// strictly inside the bandwidth window.
    Coverage { axis: usize, from: f64, to: f64 },
    /// `[1 | X]` is rank deficient.
    Rank { rank: usize, required: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub passed: bool,
    pub failures: Vec<IdentifiabilityFailure>,
}

impl IdentifiabilityReport {
    pub fn summary(&self) -> String {
        if self.passed {
            return "identifiable".to_string();
        }
        self.failures
            .iter()
            .map(|f| match f {
                IdentifiabilityFailure::Coverage { axis, from, to } => {
                    format!("coverage gap on axis {axis} over [{from}, {to}]")
                }
                IdentifiabilityFailure::Rank { rank, required } => {
                    format!("design [1 | X] has rank {rank} < {required}")
                }
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Check the local coverage condition on every grid node and the rank of
/// `[1 | X]`.
pub fn check_identifiability(data: &Dataset, spec: &KernelSpec, grids: &GridSet) -> Result<IdentifiabilityReport> {
    let d = data.dim();
    if spec.dim() != d || grids.dim() != d {
        return Err(Error::invalid("data, kernel and grid dimensions differ"));
    }
    let mut failures = Vec::new();
    for k in 0..d {
        let mut col = data.column(k).to_vec();
        col.sort_by(f64::total_cmp);
        let h = spec.bandwidth(k);
        let mut run: Option<(f64, f64)> = None;
        for &x in grids.axis(k).points() {
            // observations with |X - x| < h
            let lo = col.partition_point(|&v| v <= x - h);
            let hi = col.partition_point(|&v| v < x + h);
            let covered = hi > lo + 1 && col[hi - 1] != col[lo];
            match (covered, run) {
                (false, None) => run = Some((x, x)),
                (false, Some((from, _))) => run = Some((from, x)),
                (true, Some((from, to))) => {
                    failures.push(IdentifiabilityFailure::Coverage { axis: k, from, to });
                    run = None;
                }
                (true, None) => {}
            }
        }
        if let Some((from, to)) = run {
            failures.push(IdentifiabilityFailure::Coverage { axis: k, from, to });
        }
    }
    let n = data.n();
    let design = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { data.x()[(i, j - 1)] });
    let sv = design.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > RANK_THRESHOLD * max).count();
    if rank < d + 1 {
        failures.push(IdentifiabilityFailure::Rank { rank, required: d + 1 });
    }
    Ok(IdentifiabilityReport { passed: failures.is_empty(), failures })
}

// ---------------------------------------------------------------------------
// Backfitting
// ---------------------------------------------------------------------------

/// Cyclic smooth backfitting state over precomputed tables.
///
/// Each update replaces one component by `m̃_c - 𝒫_c(Σ_{j≠c} m̂_j)`, where `m̃`
/// holds the response projections computed once up front.
#[derive(Debug, Clone)]
pub struct Backfitter<'a> {
    tables: &'a MarginalTables,
    targets: AdditiveElement,
    current: AdditiveElement,
    order: Vec<Component>,
}

impl<'a> Backfitter<'a> {
    pub fn new(tables: &'a MarginalTables, y: &[f64]) -> Result<Self> {
        let targets = project_response_all(y, tables)?;
        Ok(Self {
            tables,
            targets,
            current: AdditiveElement::zeros(tables.grids()),
            order: Component::sweep_order(tables.dim()),
        })
    }

    /// Replace the current iterate, centering its level functions.
    pub fn set_start(&mut self, mut start: AdditiveElement) -> Result<()> {
        let zero = AdditiveElement::zeros(self.tables.grids());
        if start.levels.len() != zero.levels.len()
            || start.levels.iter().zip(&zero.levels).any(|(a, b)| a.len() != b.len())
            || start.slopes.iter().zip(&zero.slopes).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::invalid("start value does not match the grid"));
        }
        for j in 0..start.dim() {
            let c = start.level_mass(j, self.tables);
            start.levels[j].iter_mut().for_each(|v| *v -= c);
        }
        self.current = start;
        Ok(())
    }

    pub fn current(&self) -> &AdditiveElement {
        &self.current
    }

    pub fn targets(&self) -> &AdditiveElement {
        &self.targets
    }

    pub fn into_current(self) -> AdditiveElement {
        self.current
    }

    fn proposal(&self, c: Component) -> Result<ComponentValue> {
        Ok(match (c, project_others(&self.current, c, self.tables)?) {
            (Component::Intercept, ComponentValue::Scalar(v)) => ComponentValue::Scalar(self.targets.intercept - v),
            (Component::Level(k), ComponentValue::Grid(v)) => {
                ComponentValue::Grid(self.targets.levels[k].iter().zip(v).map(|(t, p)| t - p).collect())
            }
            (Component::Slope(k), ComponentValue::Grid(v)) => {
                ComponentValue::Grid(self.targets.slopes[k].iter().zip(v).map(|(t, p)| t - p).collect())
            }
            _ => unreachable!("component/value kinds always match"),
        })
    }

    /// Update one component; returns the norm of the change.
    pub fn update(&mut self, c: Component) -> Result<f64> {
        Ok(self.apply(c)?.0)
    }

    /// Update one component; returns the weighted norm and the largest
    /// absolute value of the change.
    fn apply(&mut self, c: Component) -> Result<(f64, f64)> {
        let t = self.tables;
        let measure = |k: usize, diff: &[f64], weight: &[f64]| -> (f64, f64) {
            let w = t.grids().axis(k).weights();
            let l2 = w.iter().zip(diff).zip(weight).map(|((w, d), p)| w * d * d * p).sum::<f64>().sqrt();
            (l2, diff.iter().fold(0.0, |m: f64, d| m.max(d.abs())))
        };
        Ok(match (c, self.proposal(c)?) {
            (Component::Intercept, ComponentValue::Scalar(v)) => {
                let change = (v - self.current.intercept).abs();
                self.current.intercept = v;
                (change, change)
            }
            (Component::Level(k), ComponentValue::Grid(v)) => {
                let diff: Vec<f64> = v.iter().zip(&self.current.levels[k]).map(|(a, b)| a - b).collect();
                self.current.levels[k] = v;
                measure(k, &diff, t.p(k))
            }
            (Component::Slope(k), ComponentValue::Grid(v)) => {
                let diff: Vec<f64> = v.iter().zip(&self.current.slopes[k]).map(|(a, b)| a - b).collect();
                self.current.slopes[k] = v;
                measure(k, &diff, t.p_star_star(k))
            }
            _ => unreachable!("component/value kinds always match"),
        })
    }

    fn sweep_changes(&mut self) -> Result<(f64, f64)> {
        let (mut error, mut largest) = (0.0, 0.0_f64);
        for c in self.order.clone() {
            let (e, m) = self.apply(c)?;
            error += e;
            largest = largest.max(m);
        }
        Ok((error, largest))
    }

    /// One full cycle over all `2d + 1` components; returns the summed change.
    pub fn sweep(&mut self) -> Result<f64> {
        Ok(self.sweep_changes()?.0)
    }

    /// Largest grid deviation from the fixed-point equations
    /// `m̂_c + 𝒫_c(Σ_{j≠c} m̂_j) = 𝒫_c(Y)` over all components.
    pub fn fixed_point_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &c in &self.order {
            match (c, self.proposal(c)?) {
                (Component::Intercept, ComponentValue::Scalar(v)) => {
                    worst = worst.max((v - self.current.intercept).abs())
                }
                (Component::Level(k), ComponentValue::Grid(v)) => {
                    for (a, b) in v.iter().zip(&self.current.levels[k]) {
                        worst = worst.max((a - b).abs());
                    }
                }
                (Component::Slope(k), ComponentValue::Grid(v)) => {
                    for (a, b) in v.iter().zip(&self.current.slopes[k]) {
                        worst = worst.max((a - b).abs());
                    }
                }
                _ => unreachable!("component/value kinds always match"),
            }
        }
        Ok(worst)
    }

    /// Sweep until the summed change drops to `tolerance` and no grid value
    /// moved by more than `tolerance`.
    ///
    /// The second condition matters where `p̂` is small: the weighted norm
    /// barely sees those nodes, so it alone does not bound the sup-norm error.
    pub fn run(&mut self, tolerance: f64, max_sweeps: usize) -> Result<FitDiagnostics> {
        let ratio = cauchy_schwarz_ratio(self.tables)?;
        let mut errors = Vec::new();
        while errors.len() < max_sweeps {
            let (e, largest) = self.sweep_changes()?;
            if !e.is_finite() || !self.current.is_finite() {
                return Err(Error::Numerical(format!("non-finite iterate in sweep {}", errors.len() + 1)));
            }
            errors.push(e);
            if e <= tolerance && largest <= tolerance {
                return Ok(FitDiagnostics::new(errors, true, ratio));
            }
        }
        Err(Error::Convergence { diagnostics: Box::new(FitDiagnostics::new(errors, false, ratio)) })
    }
}

/// Check the tables for degenerate kernel windows before iterating.
pub fn check_tables(tables: &MarginalTables) -> Result<f64> {
    let r = cauchy_schwarz_ratio(tables)?;
    if r >= DEGENERATE_RATIO {
        return Err(Error::identifiability(format!(
            "Cauchy–Schwarz ratio {r} is not below one: some kernel window holds a single covariate value"
        )));
    }
    Ok(r)
}

/// Fit with precomputed tables; used by the Monte Carlo harness to avoid
/// recomputing tables it also needs for diagnostics.
pub fn fit_with_tables(
    tables: &MarginalTables,
    y: &[f64],
    domain: &Domain,
    config: &FitConfig,
) -> Result<(AdditiveFit, FitDiagnostics)> {
    config.validate()?;
    check_tables(tables)?;
    let mut bf = Backfitter::new(tables, y)?;
    if let Some(start) = &config.start {
        bf.set_start(start.clone())?;
    }
    let diagnostics = bf.run(config.tolerance, config.max_sweeps)?;
    let fit = AdditiveFit {
        element: bf.into_current(),
        grids: tables.grids().clone(),
        domain: domain.clone(),
        kernel: tables.spec().clone(),
        tolerance: config.tolerance,
        sweeps: diagnostics.sweeps,
    };
    Ok((fit, diagnostics))
}

/// Smooth backfitting estimate of the additive components of `data`.
pub fn fit(data: &Dataset, spec: &KernelSpec, grids: &GridSet, config: &FitConfig) -> Result<(AdditiveFit, FitDiagnostics)> {
    config.validate()?;
    if !config.bypass_identifiability {
        let report = check_identifiability(data, spec, grids)?;
        if !report.passed {
            return Err(Error::identifiability(report.summary()));
        }
    }
    let tables = compute_marginals(data, spec, grids)?;
    fit_with_tables(&tables, data.y(), data.domain(), config)
}
