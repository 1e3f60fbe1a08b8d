use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed row form.
///
/// Built from triplets with duplicates summed in input order, so equal input
/// gives bit-identical output.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(n: usize, mut trips: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(t) = trips.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(Error::argument(format!(
                "entry ({}, {}) outside a {n}x{n} matrix",
                t.0, t.1
            )));
        }
        trips.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(trips.len());
        let mut values: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trips {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        cols.binary_search(&c)
            .map_or(0.0, |k| self.values[self.row_ptr[r] + k])
    }

    /// Stored entries of row `r` as `(column, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &SparseMatrix) -> f64 {
        let mut diff: Vec<(usize, usize, f64)> = self.triplets().collect();
        diff.extend(other.triplets().map(|(r, c, v)| (r, c, -v)));
        SparseMatrix::from_triplets(self.n.max(other.n), diff)
            .map(|d| d.frobenius_norm())
            .unwrap_or(f64::INFINITY)
    }

    /// Largest `|a_rc - a_cr|`.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trips: Vec<Triplet<usize, usize, f64>> = self
            .triplets()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &trips)
            .map_err(|e| Error::Solver(format!("could not build sparse matrix: {e:?}")))
    }

    /// Coordinate text: `row col value` per line, sorted, 17 significant
    /// digits.
    pub fn to_triplet_text(&self) -> String {
        let mut s = String::with_capacity(self.nnz() * 32);
        for (r, c, v) in self.triplets() {
            s.push_str(&format!("{r} {c} {v:.16e}\n"));
        }
        s
    }
}

fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let ax = a.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    (r, if nb > 0.0 { nr / nb } else { nr })
}

const REFINEMENT_STEPS: usize = 3;
const RESIDUAL_TARGET: f64 = 1e-12;
const RESIDUAL_LIMIT: f64 = 1e-8;

fn refine_solution(
    a: &SparseMatrix,
    b: &[f64],
    solve: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Vec<f64>> {
    let mut x = solve(b);
    let (mut r, mut rel) = relative_residual(a, &x, b);
    for _ in 0..REFINEMENT_STEPS {
        if rel < RESIDUAL_TARGET {
            break;
        }
        let dx = solve(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        let next = relative_residual(a, &x, b);
        r = next.0;
        rel = next.1;
    }
    if !rel.is_finite() || rel > RESIDUAL_LIMIT {
        return Err(Error::Solver(format!(
            "relative residual {rel:e} after factorization"
        )));
    }
    if rel > RESIDUAL_TARGET {
        log::warn!("relative residual {rel:e} above target {RESIDUAL_TARGET:e}");
    }
    Ok(x)
}

fn to_col(b: &[f64]) -> faer::Col<f64> {
    faer::Col::from_fn(b.len(), |i| b[i])
}

/// Solve a symmetric positive definite system by sparse Cholesky with
/// iterative refinement.
pub fn solve_spd(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_dims(a, b)?;
    if a.dim() == 0 {
        return Ok(Vec::new());
    }
    let llt = a
        .to_faer()?
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Solver(format!("Cholesky factorization failed: {e:?}")))?;
    refine_solution(a, b, |rhs| {
        let x = llt.solve(&to_col(rhs));
        (0..rhs.len()).map(|i| x[i]).collect()
    })
}

/// Solve a general (e.g. symmetric indefinite) system by sparse LU.
pub fn solve_indefinite(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_dims(a, b)?;
    if a.dim() == 0 {
        return Ok(Vec::new());
    }
    let lu = a
        .to_faer()?
        .sp_lu()
        .map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;
    refine_solution(a, b, |rhs| {
        let x = lu.solve(&to_col(rhs));
        (0..rhs.len()).map(|i| x[i]).collect()
    })
}

fn check_dims(a: &SparseMatrix, b: &[f64]) -> Result<()> {
    if a.dim() != b.len() {
        return Err(Error::argument(format!(
            "matrix of size {} with right-hand side of length {}",
            a.dim(),
            b.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m =
            SparseMatrix::from_triplets(2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 0.5)]).unwrap();
        assert_eq!(m.get(1, 0), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
        assert_eq!(
            m.to_triplet_text(),
            "0 0 2.0000000000000000e0\n1 0 1.5000000000000000e0\n"
        );
        assert!(SparseMatrix::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn one_by_one() {
        let m = SparseMatrix::from_triplets(1, vec![(0, 0, 2.0)]).unwrap();
        assert!((solve_spd(&m, &[4.0]).unwrap()[0] - 2.0).abs() < 1e-15);
        assert!(solve_spd(&m, &[4.0, 1.0]).is_err());
    }

    #[test]
    fn indefinite_two_by_two() {
        let m =
            SparseMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0)]).unwrap();
        let x = solve_indefinite(&m, &[5.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = SparseMatrix::from_triplets(
            2,
            vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)],
        )
        .unwrap();
        assert!(solve_spd(&m, &[1.0, 0.0]).is_err());
    }
}
