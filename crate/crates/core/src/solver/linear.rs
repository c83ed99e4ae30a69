//! Sparse linear algebra for the Newton step.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearError {
    #[error("matrix could not be assembled: {0}")]
    Assembly(String),
    #[error("matrix is singular (first suspect row {row})")]
    Singular { row: usize },
}

/// Square matrix in coordinate form; duplicate entries are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    /// Sorted, deduplicated entries.
    pub fn compress(&mut self) {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        self.entries = out;
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries.iter().filter(|e| e.0 == row && e.1 == col).map(|e| e.2).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Row with no usable entry, if any.
    fn empty_row(&self) -> Option<usize> {
        let mut seen = vec![false; self.n];
        for &(r, _, v) in &self.entries {
            if v != 0.0 {
                seen[r] = true;
            }
        }
        seen.iter().position(|s| !s)
    }

    fn empty_col(&self) -> Option<usize> {
        let mut seen = vec![false; self.n];
        for &(_, c, v) in &self.entries {
            if v != 0.0 {
                seen[c] = true;
            }
        }
        seen.iter().position(|s| !s)
    }
}

/// Solves `A·x = b` with a sparse LU factorisation and one step of
/// iterative refinement.
pub fn solve(a: &mut SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinearError> {
    LuSolver::default().solve(a, b)
}

/// Sparse LU solver that keeps the symbolic analysis while the sparsity
/// pattern of successive matrices stays the same.
#[derive(Debug, Default, Clone)]
pub struct LuSolver {
    pattern: Vec<(usize, usize)>,
    symbolic: Option<SymbolicLu<usize>>,
}

impl LuSolver {
    pub fn solve(&mut self, a: &mut SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinearError> {
        let n = a.n;
        if n == 0 {
            return Ok(Vec::new());
        }
        if let Some(row) = a.empty_row() {
            return Err(LinearError::Singular { row });
        }
        if let Some(col) = a.empty_col() {
            return Err(LinearError::Singular { row: col });
        }
        a.compress();
        let triplets: Vec<_> = a.entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| LinearError::Assembly(format!("{e:?}")))?;
        let same = self.pattern.len() == a.entries.len() && self.pattern.iter().zip(&a.entries).all(|(p, e)| p.0 == e.0 && p.1 == e.1);
        let symbolic = match (&self.symbolic, same) {
            (Some(s), true) => s.clone(),
            _ => {
                let s = SymbolicLu::try_new(mat.symbolic()).map_err(|e| LinearError::Assembly(format!("{e:?}")))?;
                self.pattern = a.entries.iter().map(|e| (e.0, e.1)).collect();
                self.symbolic = Some(s.clone());
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref()).map_err(|_| LinearError::Singular { row: 0 })?;

        let mut x = Mat::from_fn(n, 1, |i, _| b[i]);
        lu.solve_in_place(x.as_mut());
        let mut sol: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();

        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let check = |sol: &[f64]| -> (f64, usize) {
            let ax = a.mul_vec(sol);
            let mut worst = (0.0, 0);
            for i in 0..n {
                let r = (b[i] - ax[i]).abs();
                if !(r <= worst.0) {
                    worst = (r, i);
                }
            }
            worst
        };
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(LinearError::Singular { row: check(&sol).1 });
        }

        let ax = a.mul_vec(&sol);
        let mut r = Mat::from_fn(n, 1, |i, _| b[i] - ax[i]);
        lu.solve_in_place(r.as_mut());
        if (0..n).all(|i| r[(i, 0)].is_finite()) {
            let refined: Vec<f64> = (0..n).map(|i| sol[i] + r[(i, 0)]).collect();
            if check(&refined).0 <= check(&sol).0 {
                sol = refined;
            }
        }
        let (res, row) = check(&sol);
        if !(res <= 1e-6 * scale.max(1.0)) {
            return Err(LinearError::Singular { row });
        }
        Ok(sol)
    }
}
