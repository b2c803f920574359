use nalgebra::DMatrix;

use crate::domain::Domain;
use crate::error::{Error, Result};

/// `n` observations of a `d`-dimensional covariate inside a rectangular
/// domain, plus a scalar response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    domain: Domain,
}

impl Dataset {
    /// `x` is `n × d` with one row per observation.
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, domain: Domain) -> Result<Self> {
        let (n, d) = x.shape();
        if n < 2 {
            return Err(Error::invalid(format!("need at least two observations, got {n}")));
        }
        if d != domain.dim() {
            return Err(Error::invalid(format!(
                "covariate matrix has {d} columns but the domain has {} axes",
                domain.dim()
            )));
        }
        if y.len() != n {
            return Err(Error::invalid(format!("{n} covariate rows but {} responses", y.len())));
        }
        for i in 0..n {
            if !y[i].is_finite() {
                return Err(Error::Data { row: i, message: format!("response {} is not finite", y[i]) });
            }
            for j in 0..d {
                let v = x[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Data { row: i, message: format!("covariate {j} is not finite") });
                }
                if !domain.contains_on_axis(j, v) {
                    let (a, b) = domain.axis(j);
                    return Err(Error::Data {
                        row: i,
                        message: format!("covariate {j} = {v} outside [{a}, {b}]"),
                    });
                }
            }
        }
        Ok(Self { x, y, domain })
    }

    /// Build from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>, domain: Domain) -> Result<Self> {
        let d = domain.dim();
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::Data { row: i, message: format!("expected {d} covariates") });
        }
        let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(x, y, domain)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Covariate column `j` as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    /// Same covariates with a different response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.x.clone(), y, self.domain.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_rows() {
        let dom = Domain::unit(2).unwrap();
        let ok = Dataset::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.9]], vec![1.0, 2.0], dom.clone()).unwrap();
        assert_eq!(ok.n(), 2);
        assert_eq!(ok.column(1), &[0.2, 0.9]);
        let bad = Dataset::from_rows(&[vec![0.1, 0.2], vec![0.3, 1.5]], vec![1.0, 2.0], dom.clone());
        assert!(matches!(bad, Err(Error::Data { row: 1, .. })));
        let nan = Dataset::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.5]], vec![1.0, f64::NAN], dom.clone());
        assert!(matches!(nan, Err(Error::Data { row: 1, .. })));
        assert!(Dataset::from_rows(&[vec![0.1, 0.2]], vec![1.0], dom).is_err());
    }
}
