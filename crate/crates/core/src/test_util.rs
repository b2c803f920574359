use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::domain::{Domain, GridSet};
use crate::kernel::KernelSpec;
use crate::marginals::{compute_marginals, MarginalTables};
use crate::projection::AdditiveElement;

/// Uniform design on `[0,1]^d` with mildly correlated axes and a smooth noisy
/// response.
pub fn dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        let shared: f64 = rng.gen();
        for j in 0..d {
            let own: f64 = rng.gen();
            x[(i, j)] = 0.3 * shared + 0.7 * own;
        }
    }
    let y = (0..n)
        .map(|i| {
            let row = x.row(i);
            1.0 + (6.0 * row[0]).sin() + row.iter().skip(1).map(|v| v * v).sum::<f64>() + 0.2 * (rng.gen::<f64>() - 0.5)
        })
        .collect();
    Dataset::new(x, y, Domain::unit(d).unwrap()).unwrap()
}

pub fn tables(n: usize, d: usize, grid: usize, h: f64, seed: u64) -> (Dataset, MarginalTables) {
    let data = dataset(n, d, seed);
    let grids = GridSet::uniform(data.domain(), grid).unwrap();
    let spec = KernelSpec::epanechnikov(vec![h; d]).unwrap();
    let t = compute_marginals(&data, &spec, &grids).unwrap();
    (data, t)
}

/// Random additive element; levels are centered when `centered` is set.
pub fn random_element(tables: &MarginalTables, seed: u64, centered: bool) -> AdditiveElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = AdditiveElement::zeros(tables.grids());
    m.intercept = rng.gen_range(-2.0..2.0);
    for j in 0..m.dim() {
        let (a, b, c): (f64, f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(1.0..6.0), rng.gen_range(-1.0..1.0));
        for (q, x) in tables.grids().axis(j).points().iter().enumerate() {
            m.levels[j][q] = a * (b * x).sin() + c * x;
            m.slopes[j][q] = c + a * b * (b * x).cos() * 0.1;
        }
    }
    if centered {
        m.center(tables);
    }
    m
}
