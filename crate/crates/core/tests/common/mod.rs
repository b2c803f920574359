//! Brute-force references shared by the integration tests. Everything here is
//! computed directly from the data over the full product grid, without the
//! marginal tables or projection formulas of the library.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use smooth_backfit::{AdditiveElement, Dataset};

pub fn epanechnikov(t: f64) -> f64 {
    if t.abs() <= 1.0 {
        0.75 * (1.0 - t * t)
    } else {
        0.0
    }
}

/// Equally spaced nodes with trapezoid weights.
pub fn trapezoid(lo: f64, hi: f64, size: usize) -> (Vec<f64>, Vec<f64>) {
    let step = (hi - lo) / (size - 1) as f64;
    let points = (0..size).map(|g| lo + step * g as f64).collect();
    let weights = (0..size)
        .map(|g| if g == 0 || g == size - 1 { 0.5 * step } else { step })
        .collect();
    (points, weights)
}

/// Setup for the discretized least-squares criterion on a product grid.
pub struct Brute {
    pub n: usize,
    pub d: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    /// `rows[j][i][g]`: kernel weight of observation `i` at node `g`, scaled so
    /// that its trapezoid sum over the grid is one.
    pub rows: Vec<Vec<Vec<f64>>>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Brute {
    pub fn new(data: &Dataset, bandwidths: &[f64], grid_size: usize) -> Self {
        let (n, d) = (data.n(), data.dim());
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut rows = Vec::new();
        let mut x = Vec::new();
        for j in 0..d {
            let (lo, hi) = data.domain().axis(j);
            let (p, w) = trapezoid(lo, hi, grid_size);
            let col: Vec<f64> = (0..n).map(|i| data.x()[(i, j)]).collect();
            let h = bandwidths[j];
            let r: Vec<Vec<f64>> = col
                .iter()
                .map(|&xi| {
                    let raw: Vec<f64> = p.iter().map(|&g| epanechnikov((xi - g) / h)).collect();
                    let mass: f64 = raw.iter().zip(&w).map(|(a, b)| a * b).sum();
                    raw.iter().map(|v| v / mass).collect()
                })
                .collect();
            points.push(p);
            weights.push(w);
            rows.push(r);
            x.push(col);
        }
        Self { n, d, points, weights, rows, x, y: data.y().to_vec() }
    }

    fn size(&self, j: usize) -> usize {
        self.points[j].len()
    }

    fn level_index(&self, j: usize, g: usize) -> usize {
        1 + (0..j).map(|l| self.size(l)).sum::<usize>() + g
    }

    fn slope_index(&self, j: usize, g: usize) -> usize {
        1 + (0..self.d).map(|l| self.size(l)).sum::<usize>() + (0..j).map(|l| self.size(l)).sum::<usize>() + g
    }

    fn unknowns(&self) -> usize {
        1 + 2 * (0..self.d).map(|l| self.size(l)).sum::<usize>()
    }

    /// Visit every (observation, product-grid node) pair with positive weight.
    fn for_each_cell(&self, mut f: impl FnMut(usize, &[usize], f64)) {
        for i in 0..self.n {
            let support: Vec<Vec<usize>> = (0..self.d)
                .map(|j| (0..self.size(j)).filter(|&g| self.rows[j][i][g] > 0.0).collect())
                .collect();
            let mut idx = vec![0usize; self.d];
            let mut nodes = vec![0usize; self.d];
            'outer: loop {
                let mut w = 1.0 / self.n as f64;
                for j in 0..self.d {
                    let g = support[j][idx[j]];
                    nodes[j] = g;
                    w *= self.weights[j][g] * self.rows[j][i][g];
                }
                f(i, &nodes, w);
                for j in 0..self.d {
                    idx[j] += 1;
                    if idx[j] < support[j].len() {
                        continue 'outer;
                    }
                    idx[j] = 0;
                }
                break;
            }
        }
    }

    fn marginal(&self, j: usize) -> Vec<f64> {
        (0..self.size(j))
            .map(|g| (0..self.n).map(|i| self.rows[j][i][g]).sum::<f64>() / self.n as f64)
            .collect()
    }

    /// Minimizer of the discretized criterion subject to centred levels,
    /// solved through the dense KKT system.
    pub fn solve(&self) -> AdditiveElement {
        let p = self.unknowns();
        let m = p + self.d;
        let mut kkt = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        self.for_each_cell(|i, nodes, w| {
            let mut phi = vec![(0usize, 1.0)];
            for (j, &g) in nodes.iter().enumerate() {
                phi.push((self.level_index(j, g), 1.0));
                phi.push((self.slope_index(j, g), self.x[j][i] - self.points[j][g]));
            }
            for &(a, va) in &phi {
                rhs[a] += w * va * self.y[i];
                for &(b, vb) in &phi {
                    kkt[(a, b)] += w * va * vb;
                }
            }
        });
        for j in 0..self.d {
            let pj = self.marginal(j);
            for g in 0..self.size(j) {
                let c = self.weights[j][g] * pj[g];
                kkt[(p + j, self.level_index(j, g))] = c;
                kkt[(self.level_index(j, g), p + j)] = c;
            }
        }
        let theta = kkt.lu().solve(&rhs).expect("KKT system is singular");
        AdditiveElement {
            intercept: theta[0],
            levels: (0..self.d)
                .map(|j| (0..self.size(j)).map(|g| theta[self.level_index(j, g)]).collect())
                .collect(),
            slopes: (0..self.d)
                .map(|j| (0..self.size(j)).map(|g| theta[self.slope_index(j, g)]).collect())
                .collect(),
        }
    }

    fn eval(&self, m: &AdditiveElement, i: usize, nodes: &[usize]) -> f64 {
        let mut v = m.intercept;
        for (j, &g) in nodes.iter().enumerate() {
            v += m.levels[j][g] + m.slopes[j][g] * (self.x[j][i] - self.points[j][g]);
        }
        v
    }

    /// `<f, g>` in the kernel-weighted empirical semi-norm.
    pub fn inner(&self, f: &AdditiveElement, g: &AdditiveElement) -> f64 {
        let mut s = 0.0;
        self.for_each_cell(|i, nodes, w| s += w * self.eval(f, i, nodes) * self.eval(g, i, nodes));
        s
    }

    /// Best constant approximation of `m` in the semi-norm.
    pub fn project_constant(&self, m: &AdditiveElement) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        self.for_each_cell(|i, nodes, w| {
            num += w * self.eval(m, i, nodes);
            den += w;
        });
        num / den
    }

    /// Best approximation of `m` by a function of `x_k` alone (constants
    /// included): a weighted mean over all cells sharing the node on axis `k`.
    pub fn project_level(&self, m: &AdditiveElement, k: usize) -> Vec<f64> {
        let mut num = vec![0.0; self.size(k)];
        let mut den = vec![0.0; self.size(k)];
        self.for_each_cell(|i, nodes, w| {
            num[nodes[k]] += w * self.eval(m, i, nodes);
            den[nodes[k]] += w;
        });
        num.iter().zip(&den).map(|(a, b)| a / b).collect()
    }

    /// Best approximation of `m` by `s(x_k) (X_k - x_k)`.
    pub fn project_slope(&self, m: &AdditiveElement, k: usize) -> Vec<f64> {
        let mut num = vec![0.0; self.size(k)];
        let mut den = vec![0.0; self.size(k)];
        self.for_each_cell(|i, nodes, w| {
            let g = nodes[k];
            let dx = self.x[k][i] - self.points[k][g];
            num[g] += w * dx * self.eval(m, i, nodes);
            den[g] += w * dx * dx;
        });
        num.iter().zip(&den).map(|(a, b)| a / b).collect()
    }

    /// The discretized criterion at `m`.
    pub fn objective(&self, m: &AdditiveElement) -> f64 {
        let mut s = 0.0;
        self.for_each_cell(|i, nodes, w| s += w * (self.y[i] - self.eval(m, i, nodes)).powi(2));
        s
    }
}

/// Largest absolute difference over intercept, levels and slopes.
pub fn sup_diff(a: &AdditiveElement, b: &AdditiveElement) -> f64 {
    let mut m = (a.intercept - b.intercept).abs();
    for (u, v) in a.levels.iter().chain(&a.slopes).zip(b.levels.iter().chain(&b.slopes)) {
        for (p, q) in u.iter().zip(v) {
            m = m.max((p - q).abs());
        }
    }
    m
}
