//! Orthogonal projections on additive elements and the kernel-weighted
//! semi-norm restricted to additive functions.
//!
//! An additive element `m` has an intercept `m₀`, a level function `m_j` and a
//! slope function `m_j⁽¹⁾` per axis. As a local linear fit at evaluation point
//! `x` it predicts observation `i` by
//!
//! ```text
//! m₀ + Σ_j m_j(x_j) + Σ_j m_j⁽¹⁾(x_j) (X_ij - x_j)
//! ```
//!
//! The subspaces are indexed `0` (intercept), `1..=d` (centered levels) and
//! `d+1..=2d` (slopes); see [`Component`].

use serde::{Deserialize, Serialize};

use crate::domain::GridSet;
use crate::error::{Error, Result};
use crate::marginals::{MarginalTables, PairKind, DENOMINATOR_FLOOR};

/// One of the `2d + 1` subspaces of the additive space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Intercept,
    /// centered level function on axis `k` (zero-based)
    Level(usize),
    /// slope function on axis `k` (zero-based)
    Slope(usize),
}

impl Component {
    /// Cyclic update order: intercept, all levels, all slopes.
    pub fn sweep_order(d: usize) -> Vec<Component> {
        std::iter::once(Component::Intercept)
            .chain((0..d).map(Component::Level))
            .chain((0..d).map(Component::Slope))
            .collect()
    }
}

/// `f₀ + Σ_j f_j + Σ_j f_j⁽¹⁾` with each function tabulated on its axis grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveElement {
    pub intercept: f64,
    pub levels: Vec<Vec<f64>>,
    pub slopes: Vec<Vec<f64>>,
}

impl AdditiveElement {
    pub fn zeros(grids: &GridSet) -> Self {
        let levels: Vec<Vec<f64>> = grids.iter().map(|g| vec![0.0; g.len()]).collect();
        Self { intercept: 0.0, slopes: levels.clone(), levels }
    }

    pub fn constant(grids: &GridSet, c: f64) -> Self {
        Self { intercept: c, ..Self::zeros(grids) }
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    /// `∫ f_j p̂_j dx_j`.
    pub fn level_mass(&self, j: usize, tables: &MarginalTables) -> f64 {
        weighted_dot(tables, j, &self.levels[j], tables.p(j))
    }

    /// Shift each level function so that `∫ f_j p̂_j = 0`, moving the mass into
    /// the intercept. The represented function is unchanged.
    pub fn center(&mut self, tables: &MarginalTables) {
        for j in 0..self.dim() {
            let c = self.level_mass(j, tables);
            self.levels[j].iter_mut().for_each(|v| *v -= c);
            self.intercept += c;
        }
    }

    pub fn is_centered(&self, tables: &MarginalTables, tol: f64) -> bool {
        (0..self.dim()).all(|j| self.level_mass(j, tables).abs() <= tol)
    }

    pub fn component(&self, c: Component) -> ComponentValue {
        match c {
            Component::Intercept => ComponentValue::Scalar(self.intercept),
            Component::Level(k) => ComponentValue::Grid(self.levels[k].clone()),
            Component::Slope(k) => ComponentValue::Grid(self.slopes[k].clone()),
        }
    }

    /// Element carrying only component `c` of `self`.
    pub fn restrict(&self, c: Component) -> Self {
        let mut out = Self {
            intercept: 0.0,
            levels: self.levels.iter().map(|v| vec![0.0; v.len()]).collect(),
            slopes: self.slopes.iter().map(|v| vec![0.0; v.len()]).collect(),
        };
        match c {
            Component::Intercept => out.intercept = self.intercept,
            Component::Level(k) => out.levels[k] = self.levels[k].clone(),
            Component::Slope(k) => out.slopes[k] = self.slopes[k].clone(),
        }
        out
    }

    pub fn axpy(&mut self, a: f64, other: &AdditiveElement) {
        self.intercept += a * other.intercept;
        for (s, o) in self.levels.iter_mut().zip(&other.levels) {
            s.iter_mut().zip(o).for_each(|(x, y)| *x += a * y);
        }
        for (s, o) in self.slopes.iter_mut().zip(&other.slopes) {
            s.iter_mut().zip(o).for_each(|(x, y)| *x += a * y);
        }
    }

    /// Largest absolute difference over the intercept and all grid values.
    pub fn sup_distance(&self, other: &AdditiveElement) -> f64 {
        let mut m = (self.intercept - other.intercept).abs();
        for (a, b) in self.levels.iter().chain(&self.slopes).zip(other.levels.iter().chain(&other.slopes)) {
            for (x, y) in a.iter().zip(b) {
                m = m.max((x - y).abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite()
            && self.levels.iter().chain(&self.slopes).all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Value of a single subspace component.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentValue {
    Scalar(f64),
    Grid(Vec<f64>),
}

fn weighted_dot(tables: &MarginalTables, k: usize, a: &[f64], b: &[f64]) -> f64 {
    let w = tables.grids().axis(k).weights();
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

fn weighted(tables: &MarginalTables, k: usize, v: &[f64]) -> Vec<f64> {
    tables.grids().axis(k).weights().iter().zip(v).map(|(w, x)| w * x).collect()
}

fn check_shape(m: &AdditiveElement, tables: &MarginalTables) -> Result<()> {
    let d = tables.dim();
    if m.levels.len() != d || m.slopes.len() != d {
        return Err(Error::invalid(format!("element has {} axes, tables have {d}", m.levels.len())));
    }
    for k in 0..d {
        let g = tables.grids().axis(k).len();
        if m.levels[k].len() != g || m.slopes[k].len() != g {
            return Err(Error::invalid(format!("element values on axis {k} do not match the grid")));
        }
    }
    Ok(())
}

fn check_axis(k: usize, tables: &MarginalTables) -> Result<()> {
    if k >= tables.dim() {
        return Err(Error::invalid(format!("axis {k} out of range for d = {}", tables.dim())));
    }
    Ok(())
}

fn checked_denominator(values: &[f64], k: usize, name: &str, tables: &MarginalTables) -> Result<()> {
    if let Some(g) = values.iter().position(|&v| v < DENOMINATOR_FLOOR) {
        return Err(Error::identifiability(format!(
            "{name} vanishes on axis {k} at x = {}",
            tables.grids().axis(k).points()[g]
        )));
    }
    Ok(())
}

/// Projection onto the constants: `m₀ + Σ_j ∫ (m_j p̂_j + m_j⁽¹⁾ p̂*_j)`.
/// For centered level functions the level integrals vanish.
pub fn project_p0(m: &AdditiveElement, tables: &MarginalTables) -> f64 {
    let mut v = m.intercept;
    for j in 0..tables.dim() {
        v += weighted_dot(tables, j, &m.levels[j], tables.p(j));
        v += weighted_dot(tables, j, &m.slopes[j], tables.p_star(j));
    }
    v
}

/// Numerator of the level projection onto axis `k`, i.e. `p̂_k · P_k(m)`
/// without the intercept, optionally leaving out the own level function.
fn level_numerator(m: &AdditiveElement, k: usize, tables: &MarginalTables, own_level: bool) -> Vec<f64> {
    let p = tables.p(k);
    let ps = tables.p_star(k);
    let mut num: Vec<f64> = (0..p.len())
        .map(|g| {
            let own = if own_level { m.levels[k][g] * p[g] } else { 0.0 };
            own + m.slopes[k][g] * ps[g]
        })
        .collect();
    for j in 0..tables.dim() {
        if j == k {
            continue;
        }
        if m.levels[j].iter().any(|&v| v != 0.0) {
            let c = tables.contract(PairKind::Density, j, k, &weighted(tables, j, &m.levels[j]));
            num.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        if m.slopes[j].iter().any(|&v| v != 0.0) {
            let c = tables.contract(PairKind::StarFirst, j, k, &weighted(tables, j, &m.slopes[j]));
            num.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
    }
    num
}

/// Projection onto constants plus level functions of axis `k`, tabulated on
/// the grid of axis `k`.
pub fn project_pk_full(m: &AdditiveElement, k: usize, tables: &MarginalTables) -> Result<Vec<f64>> {
    check_axis(k, tables)?;
    check_shape(m, tables)?;
    let p = tables.p(k);
    checked_denominator(p, k, "p̂", tables)?;
    let num = level_numerator(m, k, tables, true);
    Ok(num.iter().zip(p).map(|(a, b)| m.intercept + a / b).collect())
}

fn centered_level(m: &AdditiveElement, k: usize, tables: &MarginalTables, own_level: bool) -> Result<Vec<f64>> {
    let p = tables.p(k);
    checked_denominator(p, k, "p̂", tables)?;
    let num = level_numerator(m, k, tables, own_level);
    let derivative_centering: f64 = (0..tables.dim())
        .map(|j| weighted_dot(tables, j, &m.slopes[j], tables.p_star(j)))
        .sum();
    let mut out: Vec<f64> = num.iter().zip(p).map(|(a, b)| a / b - derivative_centering).collect();
    // remove quadrature drift so the result stays exactly centered
    let drift = weighted_dot(tables, k, &out, p);
    out.iter_mut().for_each(|v| *v -= drift);
    Ok(out)
}

/// Orthogonal projection onto the centered level functions of axis `k`.
pub fn project_pk(m: &AdditiveElement, k: usize, tables: &MarginalTables) -> Result<Vec<f64>> {
    check_axis(k, tables)?;
    check_shape(m, tables)?;
    centered_level(m, k, tables, true)
}

fn slope_values(m: &AdditiveElement, k: usize, tables: &MarginalTables, own_slope: bool) -> Result<Vec<f64>> {
    let ps = tables.p_star(k);
    let pss = tables.p_star_star(k);
    checked_denominator(pss, k, "p̂**", tables)?;
    let mut num: Vec<f64> = (0..pss.len())
        .map(|g| {
            let own = if own_slope { m.slopes[k][g] * pss[g] } else { 0.0 };
            own + (m.intercept + m.levels[k][g]) * ps[g]
        })
        .collect();
    for j in 0..tables.dim() {
        if j == k {
            continue;
        }
        if m.levels[j].iter().any(|&v| v != 0.0) {
            let c = tables.contract(PairKind::StarSecond, j, k, &weighted(tables, j, &m.levels[j]));
            num.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        if m.slopes[j].iter().any(|&v| v != 0.0) {
            let c = tables.contract(PairKind::StarStar, j, k, &weighted(tables, j, &m.slopes[j]));
            num.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
    }
    Ok(num.iter().zip(pss).map(|(a, b)| a / b).collect())
}

/// Orthogonal projection onto the slope functions of axis `k`.
pub fn project_pkprime(m: &AdditiveElement, k: usize, tables: &MarginalTables) -> Result<Vec<f64>> {
    check_axis(k, tables)?;
    check_shape(m, tables)?;
    slope_values(m, k, tables, true)
}

/// Projection of `m` onto subspace `c`, leaving out `m`'s own component `c`.
/// This is `𝒫_c(Σ_{j≠c} m_j)`, the term subtracted in a backfitting update.
pub(crate) fn project_others(m: &AdditiveElement, c: Component, tables: &MarginalTables) -> Result<ComponentValue> {
    Ok(match c {
        Component::Intercept => ComponentValue::Scalar(project_p0(m, tables) - m.intercept),
        Component::Level(k) => ComponentValue::Grid(centered_level(m, k, tables, false)?),
        Component::Slope(k) => ComponentValue::Grid(slope_values(m, k, tables, false)?),
    })
}

/// Projection of `m` onto subspace `c`.
pub fn project(m: &AdditiveElement, c: Component, tables: &MarginalTables) -> Result<ComponentValue> {
    Ok(match c {
        Component::Intercept => ComponentValue::Scalar(project_p0(m, tables)),
        Component::Level(k) => ComponentValue::Grid(project_pk(m, k, tables)?),
        Component::Slope(k) => ComponentValue::Grid(project_pkprime(m, k, tables)?),
    })
}

fn check_response(y: &[f64], tables: &MarginalTables) -> Result<()> {
    if y.len() != tables.n() {
        return Err(Error::invalid(format!("{} responses for {} observations", y.len(), tables.n())));
    }
    Ok(())
}

/// `n⁻¹ Σ_i y_i · row_i` for an `n × G` weight matrix.
fn response_smooth(y: &[f64], rows: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = y.len() as f64;
    (0..rows.ncols())
        .map(|c| rows.column(c).iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n)
        .collect()
}

/// Projection of the response vector onto subspace `c`: the sample mean for
/// the intercept, a centered kernel smooth for a level, and the local slope
/// numerator over `p̂**` for a slope.
pub fn project_response(y: &[f64], tables: &MarginalTables, c: Component) -> Result<ComponentValue> {
    check_response(y, tables)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    match c {
        Component::Intercept => Ok(ComponentValue::Scalar(mean)),
        Component::Level(k) => {
            check_axis(k, tables)?;
            let p = tables.p(k);
            checked_denominator(p, k, "p̂", tables)?;
            let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
            let s = response_smooth(&centered, tables.kernel_rows(k));
            Ok(ComponentValue::Grid(s.iter().zip(p).map(|(a, b)| a / b).collect()))
        }
        Component::Slope(k) => {
            check_axis(k, tables)?;
            let pss = tables.p_star_star(k);
            checked_denominator(pss, k, "p̂**", tables)?;
            let s = response_smooth(y, tables.star_rows(k));
            Ok(ComponentValue::Grid(s.iter().zip(pss).map(|(a, b)| a / b).collect()))
        }
    }
}

/// All `2d + 1` response projections collected into one element.
pub fn project_response_all(y: &[f64], tables: &MarginalTables) -> Result<AdditiveElement> {
    let mut out = AdditiveElement::zeros(tables.grids());
    for c in Component::sweep_order(tables.dim()) {
        match (c, project_response(y, tables, c)?) {
            (Component::Intercept, ComponentValue::Scalar(v)) => out.intercept = v,
            (Component::Level(k), ComponentValue::Grid(v)) => out.levels[k] = v,
            (Component::Slope(k), ComponentValue::Grid(v)) => out.slopes[k] = v,
            _ => unreachable!("component/value kinds always match"),
        }
    }
    Ok(out)
}

/// Kernel-weighted semi-inner product `⟨f, g⟩ₙ` of two additive elements,
/// expanded into integrals against the marginal tables.
pub fn seminorm_inner(f: &AdditiveElement, g: &AdditiveElement, tables: &MarginalTables) -> Result<f64> {
    check_shape(f, tables)?;
    check_shape(g, tables)?;
    let d = tables.dim();
    // A_k(e) = ∫ (e_k p̂_k + e_k⁽¹⁾ p̂*_k)
    let a = |e: &AdditiveElement, k: usize| {
        weighted_dot(tables, k, &e.levels[k], tables.p(k)) + weighted_dot(tables, k, &e.slopes[k], tables.p_star(k))
    };
    let mut total = f.intercept * g.intercept;
    for k in 0..d {
        total += f.intercept * a(g, k) + g.intercept * a(f, k);
        let w = tables.grids().axis(k).weights();
        let (p, ps, pss) = (tables.p(k), tables.p_star(k), tables.p_star_star(k));
        for q in 0..w.len() {
            let (fl, fs, gl, gs) = (f.levels[k][q], f.slopes[k][q], g.levels[k][q], g.slopes[k][q]);
            total += w[q] * (fl * gl * p[q] + (fl * gs + fs * gl) * ps[q] + fs * gs * pss[q]);
        }
    }
    for j in 0..d {
        let fl = weighted(tables, j, &f.levels[j]);
        let fs = weighted(tables, j, &f.slopes[j]);
        for k in 0..d {
            if j == k {
                continue;
            }
            let level_part: Vec<f64> = tables
                .contract(PairKind::Density, j, k, &fl)
                .iter()
                .zip(tables.contract(PairKind::StarFirst, j, k, &fs))
                .map(|(a, b)| a + b)
                .collect();
            let slope_part: Vec<f64> = tables
                .contract(PairKind::StarSecond, j, k, &fl)
                .iter()
                .zip(tables.contract(PairKind::StarStar, j, k, &fs))
                .map(|(a, b)| a + b)
                .collect();
            total += weighted_dot(tables, k, &g.levels[k], &level_part);
            total += weighted_dot(tables, k, &g.slopes[k], &slope_part);
        }
    }
    Ok(total)
}

/// `⟨Y, m⟩ₙ` for the response embedded with zero slope components.
pub fn response_inner(y: &[f64], m: &AdditiveElement, tables: &MarginalTables) -> Result<f64> {
    check_response(y, tables)?;
    check_shape(m, tables)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut total = mean * m.intercept;
    for k in 0..tables.dim() {
        let s = response_smooth(y, tables.kernel_rows(k));
        let ss = response_smooth(y, tables.star_rows(k));
        total += weighted_dot(tables, k, &m.levels[k], &s) + weighted_dot(tables, k, &m.slopes[k], &ss);
    }
    Ok(total)
}

/// Squared distance `‖Y - m‖ₙ²`, the smooth backfitting criterion.
///
/// Evaluated in expanded form, so values below roughly `1e-15 · mean(Y²)`
/// are lost to cancellation.
pub fn objective(y: &[f64], m: &AdditiveElement, tables: &MarginalTables) -> Result<f64> {
    let yy = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    Ok(yy - 2.0 * response_inner(y, m, tables)? + seminorm_inner(m, m, tables)?)
}
