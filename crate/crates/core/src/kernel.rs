//! Base kernel, boundary-corrected one-dimensional kernels and the
//! boundary-corrected product kernel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Grid1D};
use crate::error::{Error, Result};

/// Univariate kernel densities with support `[-1, 1]` that are strictly
/// positive and continuous on the open interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Epanechnikov,
}

impl KernelFamily {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            KernelFamily::Epanechnikov => {
                if t.abs() < 1.0 {
                    0.75 * (1.0 - t * t)
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫_{-1}^{t} κ(s) ds`, clamped to `[0, 1]` outside the support.
    pub fn cdf(self, t: f64) -> f64 {
        match self {
            KernelFamily::Epanechnikov => {
                let t = t.clamp(-1.0, 1.0);
                0.5 + 0.75 * (t - t * t * t / 3.0)
            }
        }
    }

    /// `∫ v^l κ(v) dv`.
    pub fn moment(self, l: u32) -> f64 {
        match self {
            KernelFamily::Epanechnikov => {
                if l % 2 == 1 {
                    0.0
                } else {
                    let l = l as f64;
                    0.75 * (2.0 / (l + 1.0) - 2.0 / (l + 3.0))
                }
            }
        }
    }

    /// `∫ κ(v)² dv`.
    pub fn roughness(self) -> f64 {
        match self {
            KernelFamily::Epanechnikov => 0.6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Epanechnikov => "epanechnikov",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            other => Err(Error::invalid(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// Kernel family plus one bandwidth per covariate axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    bandwidths: Vec<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidths: Vec<f64>) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(Error::invalid("at least one bandwidth is required"));
        }
        if let Some((j, h)) = bandwidths.iter().enumerate().find(|(_, h)| !(h.is_finite() && **h > 0.0)) {
            return Err(Error::invalid(format!("bandwidth {j} must be positive, got {h}")));
        }
        Ok(Self { family, bandwidths })
    }

    pub fn epanechnikov(bandwidths: Vec<f64>) -> Result<Self> {
        Self::new(KernelFamily::Epanechnikov, bandwidths)
    }

    /// Same bandwidth `h = c_h · n^{-1/5}` on each of `dim` axes.
    pub fn from_rate(family: KernelFamily, c_h: f64, n: usize, dim: usize) -> Result<Self> {
        Self::new(family, vec![bandwidth_from_rate(c_h, n); dim])
    }

    pub fn bandwidth(&self, j: usize) -> f64 {
        self.bandwidths[j]
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn dim(&self) -> usize {
        self.bandwidths.len()
    }
}

/// `h = c_h · n^{-1/5}`.
pub fn bandwidth_from_rate(c_h: f64, n: usize) -> f64 {
    c_h * (n as f64).powf(-0.2)
}

/// Epanechnikov kernel `0.75 (1 - t²)` on `(-1, 1)`.
pub fn base_kernel(t: f64) -> f64 {
    KernelFamily::Epanechnikov.eval(t)
}

/// `∫ v^l κ(v) dv` for the family of `spec`.
pub fn kernel_moment(l: u32, spec: &KernelSpec) -> f64 {
    spec.family.moment(l)
}

/// `∫ κ(v)² dv` for the family of `spec`.
pub fn kernel_roughness(spec: &KernelSpec) -> f64 {
    spec.family.roughness()
}

/// Kernel mass `∫_{a}^{b} h⁻¹ κ((u - v)/h) dv` that falls inside `[a, b]`.
pub(crate) fn window_mass(family: KernelFamily, u: f64, h: f64, a: f64, b: f64) -> f64 {
    family.cdf((u - a) / h) - family.cdf((u - b) / h)
}

/// Boundary-corrected kernel `k_h^u(u - x)` on axis `k`, normalized so that
/// `∫ k_h^u(u - x) dx = 1` over the axis interval.
pub fn boundary_kernel_1d(u: f64, x: f64, k: usize, spec: &KernelSpec, domain: &Domain) -> Result<f64> {
    check_axis(k, spec, domain)?;
    let (a, b) = domain.axis(k);
    if !(u >= a && u <= b) {
        return Err(Error::invalid(format!("u = {u} outside [{a}, {b}] on axis {k}")));
    }
    let h = spec.bandwidth(k);
    let mass = window_mass(spec.family, u, h, a, b);
    Ok(spec.family.eval((u - x) / h) / (h * mass))
}

/// Boundary-corrected product kernel `K_h^u(u - x) = Π_j k_h^{u_j}(u_j - x_j)`.
pub fn product_kernel(u: &[f64], x: &[f64], spec: &KernelSpec, domain: &Domain) -> Result<f64> {
    let d = domain.dim();
    if u.len() != d || x.len() != d || spec.dim() != d {
        return Err(Error::invalid(format!(
            "dimension mismatch: u has {}, x has {}, bandwidths {}, domain {}",
            u.len(),
            x.len(),
            spec.dim(),
            d
        )));
    }
    if !domain.contains(x) {
        return Err(Error::invalid("x outside the closed domain"));
    }
    let mut value = 1.0;
    for j in 0..d {
        value *= boundary_kernel_1d(u[j], x[j], j, spec, domain)?;
        if value == 0.0 {
            break;
        }
    }
    Ok(value)
}

fn check_axis(k: usize, spec: &KernelSpec, domain: &Domain) -> Result<()> {
    if k >= domain.dim() || k >= spec.dim() {
        return Err(Error::invalid(format!(
            "axis {k} out of range for a {}-dimensional domain",
            domain.dim()
        )));
    }
    Ok(())
}

/// Values of the boundary-corrected kernel centered at observation `u` on
/// the nodes of `grid`, normalized so that the grid quadrature of the row is
/// exactly one.
pub(crate) fn grid_kernel_row(family: KernelFamily, u: f64, h: f64, grid: &Grid1D, out: &mut [f64]) -> Result<()> {
    for (o, &x) in out.iter_mut().zip(grid.points()) {
        *o = family.eval((u - x) / h);
    }
    let mass = grid.weighted_sum(out);
    if !(mass > 0.0) {
        return Err(Error::invalid(format!(
            "bandwidth {h} on axis {} leaves observation {u} with no grid node in its window; \
             refine the grid or widen the bandwidth",
            grid.axis()
        )));
    }
    out.iter_mut().for_each(|o| *o /= mass);
    Ok(())
}
