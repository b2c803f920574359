//! Kernel marginal tables.
//!
//! For a rectangular domain the integrals of the product kernel over all but
//! one (or two) coordinates factor into one-dimensional kernel masses that
//! are exactly one, so every table is a sum over observations of products
//! of one-dimensional kernel rows. The rows are normalized against the grid
//! quadrature, which makes the discrete tables integrate to one exactly and
//! keeps the pairwise tables consistent with the one-dimensional ones.
//!
//! One-dimensional tables on axis `k`, evaluated at grid node `x`:
//!
//! ```text
//! p̂_k(x)   = n⁻¹ Σ_i k(X_ik, x)
//! p̂*_k(x)  = n⁻¹ Σ_i (X_ik - x) k(X_ik, x)
//! p̂**_k(x) = n⁻¹ Σ_i (X_ik - x)² k(X_ik, x)
//! ```
//!
//! Pairwise tables on `(j, k)` multiply two rows; the starred variants carry
//! the offset of the axis named in [`PairKind`].

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::domain::GridSet;
use crate::error::{Error, Result};
use crate::kernel::{grid_kernel_row, KernelSpec};

/// Denominators below this are treated as zero.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Which pairwise table to contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// `p̂_{jk}`
    Density,
    /// `p̂*_{jk}`, carrying `(X_ij - x_j)` for the first axis of the pair.
    StarFirst,
    /// carrying `(X_ik - x_k)` for the second axis of the pair, i.e. `p̂*_{kj}` transposed.
    StarSecond,
    /// `p̂**_{jk}`
    StarStar,
}

#[derive(Debug, Clone)]
struct PairTable {
    density: DMatrix<f64>,
    star_first: DMatrix<f64>,
    star_second: DMatrix<f64>,
    star_star: DMatrix<f64>,
}

impl PairTable {
    fn get(&self, kind: PairKind) -> &DMatrix<f64> {
        match kind {
            PairKind::Density => &self.density,
            PairKind::StarFirst => &self.star_first,
            PairKind::StarSecond => &self.star_second,
            PairKind::StarStar => &self.star_star,
        }
    }
}

/// Precomputed one- and two-dimensional kernel marginals on a [`GridSet`].
#[derive(Debug, Clone)]
pub struct MarginalTables {
    n: usize,
    grids: GridSet,
    spec: KernelSpec,
    /// per axis, `n × G` matrix of `k(X_ik, x_g)`
    rows: Vec<DMatrix<f64>>,
    /// per axis, `n × G` matrix of `(X_ik - x_g) k(X_ik, x_g)`
    star_rows: Vec<DMatrix<f64>>,
    p: Vec<Vec<f64>>,
    p_star: Vec<Vec<f64>>,
    p_star_star: Vec<Vec<f64>>,
    /// upper-triangular pairs `(j, k)`, `j < k`, row-major order
    pairs: Vec<PairTable>,
}

/// Tabulate all kernel marginals for `data` on `grids`.
pub fn compute_marginals(data: &Dataset, spec: &KernelSpec, grids: &GridSet) -> Result<MarginalTables> {
    let d = data.dim();
    if spec.dim() != d || grids.dim() != d {
        return Err(Error::invalid(format!(
            "data has {d} covariates, kernel has {} bandwidths, grid has {} axes",
            spec.dim(),
            grids.dim()
        )));
    }
    let n = data.n();
    let inv_n = 1.0 / n as f64;

    let mut rows = Vec::with_capacity(d);
    let mut star_rows = Vec::with_capacity(d);
    for k in 0..d {
        let grid = grids.axis(k);
        let (lo, hi) = (grid.lower(), grid.upper());
        let col = data.column(k);
        if let Some((i, v)) = col.iter().enumerate().find(|(_, v)| !(**v >= lo && **v <= hi)) {
            return Err(Error::Data {
                row: i,
                message: format!("covariate {k} = {v} outside the grid range [{lo}, {hi}]"),
            });
        }
        let g = grid.len();
        let h = spec.bandwidth(k);
        let mut row = vec![0.0; g];
        let mut kmat = DMatrix::zeros(n, g);
        let mut smat = DMatrix::zeros(n, g);
        for (i, &xi) in col.iter().enumerate() {
            grid_kernel_row(spec.family, xi, h, grid, &mut row)?;
            for (c, (&kv, &xg)) in row.iter().zip(grid.points()).enumerate() {
                kmat[(i, c)] = kv;
                smat[(i, c)] = (xi - xg) * kv;
            }
        }
        rows.push(kmat);
        star_rows.push(smat);
    }

    let mut p = Vec::with_capacity(d);
    let mut p_star = Vec::with_capacity(d);
    let mut p_star_star = Vec::with_capacity(d);
    for k in 0..d {
        let grid = grids.axis(k);
        let col = data.column(k);
        let kmat = &rows[k];
        let smat = &star_rows[k];
        let mut pk = vec![0.0; grid.len()];
        let mut psk = vec![0.0; grid.len()];
        let mut pssk = vec![0.0; grid.len()];
        for (c, &xg) in grid.points().iter().enumerate() {
            let (mut a, mut b, mut e) = (0.0, 0.0, 0.0);
            for i in 0..n {
                a += kmat[(i, c)];
                b += smat[(i, c)];
                e += (col[i] - xg) * smat[(i, c)];
            }
            pk[c] = a * inv_n;
            psk[c] = b * inv_n;
            pssk[c] = e * inv_n;
        }
        p.push(pk);
        p_star.push(psk);
        p_star_star.push(pssk);
    }

    let index: Vec<(usize, usize)> = (0..d).flat_map(|j| (j + 1..d).map(move |k| (j, k))).collect();
    let pairs = index
        .par_iter()
        .map(|&(j, k)| {
            let scale = |m: DMatrix<f64>| m * inv_n;
            PairTable {
                density: scale(rows[j].tr_mul(&rows[k])),
                star_first: scale(star_rows[j].tr_mul(&rows[k])),
                star_second: scale(rows[j].tr_mul(&star_rows[k])),
                star_star: scale(star_rows[j].tr_mul(&star_rows[k])),
            }
        })
        .collect();

    Ok(MarginalTables {
        n,
        grids: grids.clone(),
        spec: spec.clone(),
        rows,
        star_rows,
        p,
        p_star,
        p_star_star,
        pairs,
    })
}

impl MarginalTables {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn grids(&self) -> &GridSet {
        &self.grids
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn p(&self, k: usize) -> &[f64] {
        &self.p[k]
    }

    pub fn p_star(&self, k: usize) -> &[f64] {
        &self.p_star[k]
    }

    pub fn p_star_star(&self, k: usize) -> &[f64] {
        &self.p_star_star[k]
    }

    /// `n × G` kernel weights `k(X_ik, x_g)` on axis `k`.
    pub fn kernel_rows(&self, k: usize) -> &DMatrix<f64> {
        &self.rows[k]
    }

    /// `n × G` weights `(X_ik - x_g) k(X_ik, x_g)` on axis `k`.
    pub fn star_rows(&self, k: usize) -> &DMatrix<f64> {
        &self.star_rows[k]
    }

    fn pair_index(&self, j: usize, k: usize) -> usize {
        let d = self.dim();
        // offset of row j in the packed upper triangle
        j * (2 * d - j - 1) / 2 + (k - j - 1)
    }

    /// Pairwise table value at grid nodes `(g_j, g_k)` for ordered axes `j ≠ k`.
    pub fn pair_value(&self, kind: PairKind, j: usize, k: usize, gj: usize, gk: usize) -> f64 {
        assert_ne!(j, k, "pairwise tables need distinct axes");
        if j < k {
            self.pairs[self.pair_index(j, k)].get(kind)[(gj, gk)]
        } else {
            let swapped = match kind {
                PairKind::StarFirst => PairKind::StarSecond,
                PairKind::StarSecond => PairKind::StarFirst,
                other => other,
            };
            self.pairs[self.pair_index(k, j)].get(swapped)[(gk, gj)]
        }
    }

    /// `out[g_k] = Σ_{g_j} v[g_j] · T_{jk}(g_j, g_k)` for the pairwise table
    /// `T` selected by `kind`, taken in the `(j, k)` orientation.
    pub fn contract(&self, kind: PairKind, j: usize, k: usize, v: &[f64]) -> Vec<f64> {
        assert_ne!(j, k, "pairwise tables need distinct axes");
        let gk = self.grids.axis(k).len();
        let mut out = vec![0.0; gk];
        if j < k {
            let m = self.pairs[self.pair_index(j, k)].get(kind);
            for (c, o) in out.iter_mut().enumerate() {
                *o = m.column(c).iter().zip(v).map(|(a, b)| a * b).sum();
            }
        } else {
            let swapped = match kind {
                PairKind::StarFirst => PairKind::StarSecond,
                PairKind::StarSecond => PairKind::StarFirst,
                other => other,
            };
            // stored as (k, j): rows indexed by g_k
            let m = self.pairs[self.pair_index(k, j)].get(swapped);
            for (c, &vc) in v.iter().enumerate() {
                if vc == 0.0 {
                    continue;
                }
                for (o, a) in out.iter_mut().zip(m.column(c).iter()) {
                    *o += a * vc;
                }
            }
        }
        out
    }

    /// Pointwise `(p̂*_k)² / (p̂_k p̂**_k)` on axis `k`. Grid nodes with no
    /// kernel mass are `NaN`; nodes where every active offset `X_ik - x` is
    /// zero are reported as `1`, the Cauchy–Schwarz equality case.
    pub fn cauchy_schwarz_profile(&self, k: usize) -> Vec<f64> {
        self.p[k]
            .iter()
            .zip(&self.p_star[k])
            .zip(&self.p_star_star[k])
            .map(|((&p, &ps), &pss)| {
                if !(p > 0.0) {
                    f64::NAN
                } else if pss <= 0.0 {
                    1.0
                } else {
                    (ps * ps / (p * pss)).min(1.0)
                }
            })
            .collect()
    }

    /// Write all tables as CSV with columns
    /// `j,k,x_j,x_k,p,p_star_j,p_star_k,p_star_star`.
    ///
    /// One-dimensional rows have `j = k` and `x_j = x_k`; there `p_star_j` and
    /// `p_star_k` are both `p̂*_k`. Pairwise rows cover every ordered pair.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["j", "k", "x_j", "x_k", "p", "p_star_j", "p_star_k", "p_star_star"]).map_err(io)?;
        let d = self.dim();
        for k in 0..d {
            for (g, &x) in self.grids.axis(k).points().iter().enumerate() {
                let ps = self.p_star[k][g];
                w.serialize((k, k, x, x, self.p[k][g], ps, ps, self.p_star_star[k][g])).map_err(io)?;
            }
        }
        for j in 0..d {
            for k in 0..d {
                if j == k {
                    continue;
                }
                for (gj, &xj) in self.grids.axis(j).points().iter().enumerate() {
                    for (gk, &xk) in self.grids.axis(k).points().iter().enumerate() {
                        w.serialize((
                            j,
                            k,
                            xj,
                            xk,
                            self.pair_value(PairKind::Density, j, k, gj, gk),
                            self.pair_value(PairKind::StarFirst, j, k, gj, gk),
                            self.pair_value(PairKind::StarSecond, j, k, gj, gk),
                            self.pair_value(PairKind::StarStar, j, k, gj, gk),
                        ))
                        .map_err(io)?;
                    }
                }
            }
        }
        w.flush().map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

/// `R = max_k max_x (p̂*_k)² / (p̂_k p̂**_k)`, clamped to `[0, 1]`.
///
/// `R < 1` is the strict Cauchy–Schwarz condition under which each level
/// space and its slope space are well separated. A vanishing denominator
/// means some grid node has no usable data in its kernel window.
pub fn cauchy_schwarz_ratio(tables: &MarginalTables) -> Result<f64> {
    let mut r: f64 = 0.0;
    for k in 0..tables.dim() {
        let pts = tables.grids.axis(k).points();
        for (g, ((&p, &ps), &pss)) in tables.p[k].iter().zip(&tables.p_star[k]).zip(&tables.p_star_star[k]).enumerate() {
            if p < DENOMINATOR_FLOOR || pss < DENOMINATOR_FLOOR {
                return Err(Error::identifiability(format!(
                    "axis {k}: no two distinct observations inside the kernel window at x = {}",
                    pts[g]
                )));
            }
            r = r.max(ps * ps / (p * pss));
        }
    }
    Ok(r.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, GridSet};
    use approx::assert_relative_eq;

    fn tables(rows: &[Vec<f64>], h: Vec<f64>, grid: usize) -> MarginalTables {
        let d = rows[0].len();
        let dom = Domain::unit(d).unwrap();
        let y = vec![0.0; rows.len()];
        let data = Dataset::from_rows(rows, y, dom.clone()).unwrap();
        let grids = GridSet::uniform(&dom, grid).unwrap();
        compute_marginals(&data, &KernelSpec::epanechnikov(h).unwrap(), &grids).unwrap()
    }

    #[test]
    fn single_interior_observation_moments() {
        let h = 0.1;
        // not a grid node, and at least h from either end
        let t = tables(&[vec![0.4537], vec![0.4537]], vec![h], 2001);
        let g = t.grids().axis(0);
        assert_relative_eq!(g.integrate(t.p(0)).unwrap(), 1.0, epsilon = 1e-12);
        assert!(g.integrate(t.p_star(0)).unwrap().abs() < 1e-8);
        assert_relative_eq!(g.integrate(t.p_star_star(0)).unwrap(), h * h * 0.2, epsilon = 1e-5);
    }

    #[test]
    fn two_observations_strict_inequality() {
        let t = tables(&[vec![0.45], vec![0.55]], vec![1.0], 101);
        let r = cauchy_schwarz_ratio(&t).unwrap();
        assert!(r < 1.0, "R = {r}");
        let prof = t.cauchy_schwarz_profile(0);
        assert!(prof[50] < 1.0);
    }

    #[test]
    fn identical_observations_give_equality() {
        let t = tables(&[vec![0.5], vec![0.5], vec![0.5]], vec![0.2], 101);
        assert_eq!(t.cauchy_schwarz_profile(0)[50], 1.0);
        assert!(matches!(cauchy_schwarz_ratio(&t), Err(Error::Identifiability(_))));
    }

    #[test]
    fn single_atom_ratio_is_one() {
        // one observation whose window covers the whole unit interval
        let t = tables(&[vec![0.505], vec![0.505]], vec![2.0], 101);
        let r = cauchy_schwarz_ratio(&t).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);
        for v in t.cauchy_schwarz_profile(0) {
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn pair_symmetry_and_consistency() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let u = (i as f64 + 0.5) / 40.0;
                vec![u, (u * 7.3).fract(), (u * 3.1 + 0.2).fract()]
            })
            .collect();
        let t = tables(&rows, vec![0.2, 0.25, 0.3], 31);
        for (j, k) in [(0, 1), (1, 2), (0, 2)] {
            for gj in 0..31 {
                for gk in 0..31 {
                    let a = t.pair_value(PairKind::Density, j, k, gj, gk);
                    let b = t.pair_value(PairKind::Density, k, j, gk, gj);
                    assert!((a - b).abs() < 1e-10);
                    let s = t.pair_value(PairKind::StarFirst, j, k, gj, gk);
                    let s2 = t.pair_value(PairKind::StarSecond, k, j, gk, gj);
                    assert!((s - s2).abs() < 1e-12);
                }
            }
            // ∫ p̂_jk dx_j = p̂_k via contraction
            let w = t.grids().axis(j).weights().to_vec();
            let marg = t.contract(PairKind::Density, j, k, &w);
            for (a, b) in marg.iter().zip(t.p(k)) {
                assert!((a - b).abs() < 1e-12);
            }
            let back = t.contract(PairKind::Density, k, j, t.grids().axis(k).weights());
            for (a, b) in back.iter().zip(t.p(j)) {
                assert!((a - b).abs() < 1e-12);
            }
            // ∫ p̂*_{jk} dx_k = p̂*_j
            let wk = t.grids().axis(k).weights().to_vec();
            let star = t.contract(PairKind::StarSecond, k, j, &wk);
            for (a, b) in star.iter().zip(t.p_star(j)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let t = tables(&[vec![0.2, 0.3], vec![0.7, 0.6], vec![0.5, 0.5]], vec![0.5, 0.5], 5);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "j,k,x_j,x_k,p,p_star_j,p_star_k,p_star_star");
        assert_eq!(lines.len(), 1 + 2 * 5 + 2 * 25);
    }
}
