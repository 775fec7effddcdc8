//! Thin wrapper over faer's sparse direct solvers.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    /// `A x`, with duplicate entries summed.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    fn matrix(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<Triplet<usize, usize, f64>> = self.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.rows, self.cols, &t).map_err(|e| Error::Solver(format!("{e:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factorization {
    Cholesky,
    Lu,
}

fn to_vec(c: &Col<f64>) -> Vec<f64> {
    (0..c.nrows()).map(|i| c[i]).collect()
}

/// Solves a symmetric positive definite system; only the lower triangle is read.
pub fn solve_spd(a: &Triplets, b: &[f64]) -> Result<Vec<f64>> {
    let m = a.matrix()?;
    let llt = m.sp_cholesky(Side::Lower).map_err(|_| Error::Indefinite)?;
    let x = llt.solve(&Col::from_fn(b.len(), |i| b[i]));
    check_finite(to_vec(&x))
}

pub fn solve_general(a: &Triplets, b: &[f64]) -> Result<Vec<f64>> {
    let m = a.matrix()?;
    let lu = m.sp_lu().map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;
    let x = lu.solve(&Col::from_fn(b.len(), |i| b[i]));
    check_finite(to_vec(&x))
}

pub fn solve(a: &Triplets, b: &[f64], kind: Factorization) -> Result<Vec<f64>> {
    match kind {
        Factorization::Cholesky => solve_spd(a, b),
        Factorization::Lu => solve_general(a, b),
    }
}

fn check_finite(x: Vec<f64>) -> Result<Vec<f64>> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Solver("singular system".into()))
    }
}

/// `||A x - b||_inf / max(||b||_inf, 1e-300)`.
pub fn relative_residual(a: &Triplets, x: &[f64], b: &[f64]) -> f64 {
    let r = a.apply(x);
    let num = r.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_and_lu_agree() {
        let mut a = Triplets::new(3, 3);
        for (i, j, v) in [(0, 0, 4.0), (1, 1, 3.0), (2, 2, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 2, 0.5), (2, 1, 0.5)] {
            a.push(i, j, v);
        }
        let b = [1.0, 2.0, 3.0];
        let x = solve_spd(&a, &b).unwrap();
        let y = solve_general(&a, &b).unwrap();
        assert!(relative_residual(&a, &x, &b) < 1e-14);
        for i in 0..3 {
            assert!((x[i] - y[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_is_reported() {
        let mut a = Triplets::new(2, 2);
        a.push(0, 0, 1.0);
        a.push(1, 1, -1.0);
        assert!(matches!(solve_spd(&a, &[1.0, 1.0]), Err(Error::Indefinite)));
    }
}
