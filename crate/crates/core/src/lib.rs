//! Local linear smooth backfitting for additive regression models.
//!
//! The estimator projects the response onto the space of additive local
//! linear functions under a kernel-weighted empirical semi-norm. Fitting
//! alternates orthogonal projections onto the intercept, each centered level
//! function and each slope function until the updates stall.
//!
//! ```no_run
//! use smooth_backfit::{fit, Dataset, Domain, FitConfig, GridSet, KernelSpec};
//! # fn main() -> smooth_backfit::Result<()> {
//! let domain = Domain::unit(2)?;
//! let rows = vec![vec![0.1, 0.7], vec![0.4, 0.2], vec![0.9, 0.5], vec![0.6, 0.9]];
//! let data = Dataset::from_rows(&rows, vec![1.0, 0.2, 1.4, 1.1], domain.clone())?;
//! let spec = KernelSpec::epanechnikov(vec![0.6, 0.6])?;
//! let grids = GridSet::uniform(&domain, 101)?;
//! let (fitted, diagnostics) = fit(&data, &spec, &grids, &FitConfig::default())?;
//! println!("{} sweeps, m(0.5, 0.5) = {}", diagnostics.sweeps, fitted.predict(&[0.5, 0.5])?);
//! # Ok(())
//! # }
//! ```
//!
//! Modules:
//!
//! - [`domain`]: rectangular domains, grids and trapezoidal quadrature
//! - [`kernel`]: base and boundary-corrected kernels
//! - [`marginals`]: kernel marginal tables
//! - [`projection`]: projections and the semi-norm on additive elements
//! - [`backfit`]: the backfitting iteration, identifiability check, prediction
//! - [`theory`]: oracle local linear estimator, bias and variance terms
//! - [`simulate`]: synthetic data and Monte Carlo validation
//! - [`cli`]: the `sbf` command-line front end

pub mod backfit;
pub mod cli;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod kernel;
pub mod marginals;
pub mod projection;
pub mod simulate;
pub mod theory;

#[cfg(test)]
mod test_util;

pub use backfit::{
    check_identifiability, fit, fit_with_tables, predict, AdditiveFit, Backfitter, FitConfig, FitDiagnostics,
    IdentifiabilityFailure, IdentifiabilityReport,
};
pub use dataset::Dataset;
pub use domain::{integrate_1d, make_uniform_grid, Domain, Grid1D, GridSet, DEFAULT_GRID_SIZE};
pub use error::{Error, Result};
pub use kernel::{base_kernel, boundary_kernel_1d, kernel_moment, product_kernel, KernelFamily, KernelSpec};
pub use marginals::{cauchy_schwarz_ratio, compute_marginals, MarginalTables, PairKind};
pub use projection::{
    project_p0, project_pk, project_pk_full, project_pkprime, project_response, seminorm_inner, AdditiveElement,
    Component, ComponentValue,
};
pub use simulate::{generate, monte_carlo, ComponentFn, Design, McSummary, Scenario};
pub use theory::{local_linear_1d, theory_bias, theory_variance, variance_term_vj};
