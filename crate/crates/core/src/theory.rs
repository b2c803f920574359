//! One-dimensional oracle local linear estimator and the first-order
//! bias/variance terms of the smooth backfitting estimator.
//!
//! The oracle estimator fits a single component from a response from which
//! the other components have been removed. Its bias expansion, written with
//! the moment functionals
//!
//! ```text
//! b(u)      = ∫ h⁻¹ κ((u - w)/h) dw                      (kernel mass inside the axis)
//! b_l(x)    = ∫ κ((u - x)/h) (u - x)^l h^{-l-1} / b(u) du
//! β(x)      = ½ h² m''(x) (b₂² - b₁b₃) / (b₀b₂ - b₁²)
//! β'(x)     = ½ h  m''(x) (b₀b₃ - b₁b₂) / (b₀b₂ - b₁²)
//! ```
//!
//! reduces to `½ h² m''(x) μ₂` at interior points, where `μ₂ = ∫ v² κ(v) dv`.

use crate::domain::Grid1D;
use crate::error::{Error, Result};
use crate::kernel::{grid_kernel_row, window_mass, KernelFamily, KernelSpec};

/// Oracle fit on one axis: intercept plus centered level and slope on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLinearFit {
    pub intercept: f64,
    pub level: Vec<f64>,
    pub slope: Vec<f64>,
}

/// Local linear fit of `ystar` on covariate column `xj` at every node of
/// `grid`, with the same grid-normalized boundary kernel the backfitting
/// tables use. The pointwise level is split into an intercept and a level
/// function centered against `p̂_j`.
pub fn local_linear_1d(ystar: &[f64], xj: &[f64], spec: &KernelSpec, grid: &Grid1D) -> Result<LocalLinearFit> {
    let n = xj.len();
    if ystar.len() != n {
        return Err(Error::invalid(format!("{} responses for {n} covariates", ystar.len())));
    }
    if n == 0 {
        return Err(Error::invalid("no observations"));
    }
    let h = spec.bandwidth(grid.axis());
    let g = grid.len();
    let mut rows = vec![vec![0.0; g]; n];
    for (i, &x) in xj.iter().enumerate() {
        if !(x >= grid.lower() && x <= grid.upper()) {
            return Err(Error::Data { row: i, message: format!("covariate {x} outside the grid range") });
        }
        grid_kernel_row(spec.family, x, h, grid, &mut rows[i])?;
    }
    let mut level = vec![0.0; g];
    let mut slope = vec![0.0; g];
    let mut density = vec![0.0; g];
    for (c, &x0) in grid.points().iter().enumerate() {
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let w = rows[i][c];
            if w == 0.0 {
                continue;
            }
            let dx = xj[i] - x0;
            s0 += w;
            s1 += w * dx;
            s2 += w * dx * dx;
            t0 += w * ystar[i];
            t1 += w * dx * ystar[i];
        }
        let det = s0 * s2 - s1 * s1;
        if !(s0 > 0.0) || !(det > 1e-12 * s0 * s2.max(f64::MIN_POSITIVE)) {
            return Err(Error::identifiability(format!(
                "local linear system is singular at x = {x0} on axis {}",
                grid.axis()
            )));
        }
        level[c] = (s2 * t0 - s1 * t1) / det;
        slope[c] = (s0 * t1 - s1 * t0) / det;
        density[c] = s0 / n as f64;
    }
    let intercept: f64 = grid.weights().iter().zip(&level).zip(&density).map(|((w, l), p)| w * l * p).sum();
    level.iter_mut().for_each(|v| *v -= intercept);
    Ok(LocalLinearFit { intercept, level, slope })
}

/// Bias functionals on one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryTerms {
    /// `b_{j,0..3}` on the grid
    pub b: [Vec<f64>; 4],
    /// kernel mass `b_j` on the grid
    pub mass: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta_prime: Vec<f64>,
    /// `½ μ₂`
    pub interior_bias_constant: f64,
}

const SIMPSON_PANELS: usize = 2000;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let m = SIMPSON_PANELS;
    let step = (b - a) / (2 * m) as f64;
    let mut s = f(a) + f(b);
    for i in 1..2 * m {
        let x = a + step * i as f64;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * step / 3.0
}

/// `b_{l}(x)` for `l = 0..3`, integrating over the scaled window `v = (u - x)/h`
/// piecewise between the kinks of the kernel mass function.
fn moment_functionals(family: KernelFamily, x: f64, h: f64, a: f64, b: f64) -> [f64; 4] {
    let lo = ((a - x) / h).max(-1.0);
    let hi = ((b - x) / h).min(1.0);
    let mut cuts = vec![lo, hi];
    for kink in [a + h, b - h] {
        let v = (kink - x) / h;
        if v > lo && v < hi {
            cuts.push(v);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut out = [0.0; 4];
    for (l, o) in out.iter_mut().enumerate() {
        *o = cuts
            .windows(2)
            .map(|w| {
                simpson(
                    |v| family.eval(v) * v.powi(l as i32) / window_mass(family, x + h * v, h, a, b),
                    w[0],
                    w[1],
                )
            })
            .sum();
    }
    out
}

/// Bias functionals and the bias terms `β_j`, `β_j'` for a component with
/// second derivative `mjpp` tabulated on `grid`.
pub fn theory_terms(mjpp: &[f64], spec: &KernelSpec, grid: &Grid1D) -> Result<TheoryTerms> {
    if mjpp.len() != grid.len() {
        return Err(Error::invalid("second-derivative values do not match the grid"));
    }
    let h = spec.bandwidth(grid.axis());
    let (a, b) = (grid.lower(), grid.upper());
    let g = grid.len();
    let mut bs: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; g]);
    let mut mass = vec![0.0; g];
    let mut beta = vec![0.0; g];
    let mut beta_prime = vec![0.0; g];
    for (c, &x) in grid.points().iter().enumerate() {
        let m = moment_functionals(spec.family, x, h, a, b);
        let den = m[0] * m[2] - m[1] * m[1];
        if !(den > 0.0) {
            return Err(Error::Numerical(format!("b₀b₂ - b₁² = {den} at x = {x}")));
        }
        beta[c] = 0.5 * h * h * mjpp[c] * (m[2] * m[2] - m[1] * m[3]) / den;
        beta_prime[c] = 0.5 * h * mjpp[c] * (m[0] * m[3] - m[1] * m[2]) / den;
        mass[c] = window_mass(spec.family, x, h, a, b);
        for l in 0..4 {
            bs[l][c] = m[l];
        }
    }
    Ok(TheoryTerms {
        b: bs,
        mass,
        beta,
        beta_prime,
        interior_bias_constant: 0.5 * spec.family.moment(2),
    })
}

/// `(β_j, β_j')` on the grid.
pub fn theory_bias(mjpp: &[f64], spec: &KernelSpec, grid: &Grid1D) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = theory_terms(mjpp, spec, grid)?;
    Ok((t.beta, t.beta_prime))
}

/// First-order pointwise variance `σ² R(κ) / (n h p_j)` on axis `j`.
pub fn theory_variance(j: usize, sigma2: f64, pj: f64, n: usize, spec: &KernelSpec) -> Result<f64> {
    if !(pj > 0.0) {
        return Err(Error::invalid(format!("density must be positive, got {pj}")));
    }
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    Ok(sigma2 * spec.family.roughness() / (n as f64 * spec.bandwidth(j) * pj))
}

/// Nadaraya–Watson smooth of the residuals `eps` against covariate `xj`
/// with the plain (uncorrected) kernel.
pub fn variance_term_vj(eps: &[f64], xj: &[f64], spec: &KernelSpec, grid: &Grid1D) -> Result<Vec<f64>> {
    if eps.len() != xj.len() {
        return Err(Error::invalid("residual and covariate lengths differ"));
    }
    let h = spec.bandwidth(grid.axis());
    grid.points()
        .iter()
        .map(|&x| {
            let (mut num, mut den) = (0.0, 0.0);
            for (&xi, &e) in xj.iter().zip(eps) {
                let w = spec.family.eval((xi - x) / h);
                num += w * e;
                den += w;
            }
            if den > 0.0 {
                Ok(num / den)
            } else {
                Err(Error::identifiability(format!("no observation within h of x = {x}")))
            }
        })
        .collect()
}
