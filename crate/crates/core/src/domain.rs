//! Rectangular covariate domains, per-axis evaluation grids and trapezoidal
//! quadrature.
//!
//! Every integral over a covariate axis in this crate is a weighted sum over
//! the nodes of a [`Grid1D`]. Weights are trapezoidal, so integration is exact
//! for functions that are linear between grid nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of evaluation points per axis.
pub const DEFAULT_GRID_SIZE: usize = 101;

/// Product of closed intervals `[lower_j, upper_j]`, one per covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    axes: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(axes: Vec<(f64, f64)>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("domain needs at least one axis"));
        }
        for (j, &(a, b)) in axes.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::invalid(format!(
                    "axis {j}: interval ({a}, {b}) is empty or not finite"
                )));
            }
        }
        Ok(Self { axes })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![(0.0, 1.0); dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, j: usize) -> (f64, f64) {
        self.axes[j]
    }

    pub fn axes(&self) -> &[(f64, f64)] {
        &self.axes
    }

    pub fn width(&self, j: usize) -> f64 {
        let (a, b) = self.axes[j];
        b - a
    }

    pub fn contains_on_axis(&self, j: usize, x: f64) -> bool {
        let (a, b) = self.axes[j];
        x >= a && x <= b
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(j, &v)| self.contains_on_axis(j, v))
    }
}

/// Evaluation points and trapezoidal weights on one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    axis: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid1D {
    /// Uniform grid of `size` points spanning `[lower, upper]`.
    pub fn uniform(axis: usize, lower: f64, upper: f64, size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid(format!("grid_size must be at least 2, got {size}")));
        }
        if !(lower < upper) {
            return Err(Error::invalid(format!("empty interval [{lower}, {upper}]")));
        }
        let step = (upper - lower) / (size - 1) as f64;
        let points: Vec<f64> = (0..size)
            .map(|g| if g == size - 1 { upper } else { lower + step * g as f64 })
            .collect();
        let weights = (0..size)
            .map(|g| if g == 0 || g == size - 1 { 0.5 * step } else { step })
            .collect();
        Ok(Self { axis, points, weights })
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.points[0]
    }

    pub fn upper(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn spacing(&self) -> f64 {
        self.points[1] - self.points[0]
    }

    /// Trapezoidal integral of grid values.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "expected {} grid values on axis {}, got {}",
                self.points.len(),
                self.axis,
                values.len()
            )));
        }
        Ok(self.weighted_sum(values))
    }

    /// `Σ w_g v_g` without the length check; callers guarantee matching lengths.
    pub(crate) fn weighted_sum(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Piecewise-linear interpolation of grid values at `x` in `[lower, upper]`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Result<f64> {
        if values.len() != self.points.len() {
            return Err(Error::invalid("grid value length mismatch"));
        }
        if !(x >= self.lower() && x <= self.upper()) {
            return Err(Error::invalid(format!(
                "x = {x} outside [{}, {}] on axis {}",
                self.lower(),
                self.upper(),
                self.axis
            )));
        }
        // first node strictly greater than x
        let hi = self.points.partition_point(|&p| p <= x);
        if hi == 0 {
            return Ok(values[0]);
        }
        if hi == self.points.len() {
            return Ok(values[hi - 1]);
        }
        let lo = hi - 1;
        let t = (x - self.points[lo]) / (self.points[hi] - self.points[lo]);
        Ok(values[lo] + t * (values[hi] - values[lo]))
    }
}

/// One grid per axis of a [`Domain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSet {
    grids: Vec<Grid1D>,
    grid_size: usize,
}

impl GridSet {
    pub fn uniform(domain: &Domain, grid_size: usize) -> Result<Self> {
        let grids = domain
            .axes()
            .iter()
            .enumerate()
            .map(|(j, &(a, b))| Grid1D::uniform(j, a, b, grid_size))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grids, grid_size })
    }

    pub fn dim(&self) -> usize {
        self.grids.len()
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn axis(&self, j: usize) -> &Grid1D {
        &self.grids[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Grid1D> {
        self.grids.iter()
    }
}

/// Uniform trapezoidal grids on every axis of `domain`.
pub fn make_uniform_grid(domain: &Domain, grid_size: usize) -> Result<GridSet> {
    GridSet::uniform(domain, grid_size)
}

/// `∫ f(x_k) dx_k` from values on `grid`.
pub fn integrate_1d(values: &[f64], grid: &Grid1D) -> Result<f64> {
    grid.integrate(values)
}
