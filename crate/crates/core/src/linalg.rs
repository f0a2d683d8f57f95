//! Thin wrapper around the sparse direct solver so the rest of the crate
//! deals only in triplets and dense vectors.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// Square sparse system assembled as (row, col, value) triplets.
/// Duplicate entries are summed.
pub struct TripletSystem {
    pub n: usize,
    pub triplets: Vec<Triplet<usize, usize, f64>>,
}

impl TripletSystem {
    pub fn new(n: usize) -> Self {
        TripletSystem {
            n,
            triplets: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        TripletSystem {
            n,
            triplets: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.triplets.push(Triplet::new(row, col, value));
    }

    /// LU-factorize the assembled matrix.
    pub fn factorize(&self) -> Result<Factorized> {
        let mat = SparseColMat::try_new_from_triplets(self.n, self.n, &self.triplets)
            .map_err(|_| Error::SingularSystem)?;
        // faer's sparse LU reports a structurally singular matrix as an
        // error but panics outright on an exactly zero numerical pivot;
        // catch that and report it as a singular system as well.
        let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| mat.sp_lu()))
            .map_err(|_| Error::SingularSystem)?
            .map_err(|_| Error::SingularSystem)?;
        Ok(Factorized { n: self.n, lu })
    }

    fn summed_entries(&self) -> std::collections::BTreeMap<(usize, usize), f64> {
        let mut entries = std::collections::BTreeMap::new();
        for t in &self.triplets {
            *entries.entry((t.row, t.col)).or_insert(0.0) += t.val;
        }
        entries
    }

    /// Maximum absolute asymmetry max|A - A^T| of the assembled matrix;
    /// used by tests to confirm the tangent systems stay symmetric.
    pub fn asymmetry(&self) -> f64 {
        let entries = self.summed_entries();
        let mut worst = 0.0f64;
        for (&(i, j), &v) in &entries {
            let vt = entries.get(&(j, i)).copied().unwrap_or(0.0);
            worst = worst.max((v - vt).abs());
        }
        worst
    }

    /// Largest entry magnitude after duplicate summation; the natural scale
    /// for relative asymmetry checks.
    pub fn max_abs(&self) -> f64 {
        self.summed_entries()
            .values()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// A sparse LU factorization ready for repeated right-hand sides.
pub struct Factorized {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl Factorized {
    /// Solve for one right-hand side. The LU factorization of an (almost)
    /// singular matrix can still "succeed" with zero pivots, so the result
    /// is checked for non-finite entries here.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.n);
        let b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        Ok(out)
    }
}

/// Convenience: assemble and solve a single right-hand side.
pub fn solve_sparse(sys: &TripletSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    sys.factorize()?.solve(rhs)
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
