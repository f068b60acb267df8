//! Small dense linear algebra for d×d information matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Shape(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Shape(format!("row of length {} in a {dim}-row matrix", row.len())));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        self.data
            .chunks_exact(self.dim.max(1))
            .take(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Adds `w · x xᵀ` into the matrix.
    #[inline]
    pub fn add_outer(&mut self, w: f64, x: &[f64]) {
        let d = self.dim;
        for (i, &xi) in x.iter().enumerate() {
            let wxi = w * xi;
            let row = &mut self.data[i * d..(i + 1) * d];
            for (r, &xj) in row.iter_mut().zip(x) {
                *r += wxi * xj;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|a| *a *= c);
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| {
            (0..i).all(|j| {
                let (a, b) = (self[(i, j)], self[(j, i)]);
                (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
            })
        })
    }

    /// Keeps only the rows and columns listed in `keep` (in that order).
    pub fn submatrix(&self, keep: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(keep.len());
        for (oi, &i) in keep.iter().enumerate() {
            for (oj, &j) in keep.iter().enumerate() {
                out[(oi, oj)] = self[(i, j)];
            }
        }
        out
    }

    /// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`. Only the lower
    /// triangle of `self` is read.
    pub fn cholesky(&self) -> Result<Matrix> {
        let n = self.dim;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut diag = self[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag.is_finite() && diag > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(l)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky
/// factorization followed by forward and back substitution.
pub fn chol_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Shape(format!("right-hand side has length {}, matrix is {n}x{n}", b.len())));
    }
    let l = a.cholesky()?;
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// Inverse of a symmetric positive definite matrix, column by column.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.dim();
    let mut inv = Matrix::zeros(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = chol_solve(a, &e)?;
        for (i, v) in col.into_iter().enumerate() {
            inv[(i, j)] = v;
        }
    }
    Ok(inv)
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &Matrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x);
        inf_norm(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>())
    }

    #[test]
    fn identity_solve() {
        let x = chol_solve(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn diagonal_solve() {
        let a = Matrix::from_rows(&[&[4.0, 0.0], &[0.0, 9.0]]).unwrap();
        let x = chol_solve(&a, &[8.0, 27.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn coupled_two_by_two() {
        // 2x + y = 3, x + 2y = 3  =>  x = y = 1
        let a = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let b = [3.0, 3.0];
        let x = chol_solve(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert!(residual(&a, &x, &b) <= 1e-10 * (1.0 + inf_norm(&b)));
    }

    #[test]
    fn rejects_indefinite() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert_eq!(chol_solve(&a, &[1.0, 1.0]), Err(Error::NotPositiveDefinite { pivot: 1 }));
        let z = Matrix::zeros(2);
        assert_eq!(chol_solve(&z, &[1.0, 1.0]), Err(Error::NotPositiveDefinite { pivot: 0 }));
    }

    #[test]
    fn rejects_bad_rhs() {
        assert!(matches!(chol_solve(&Matrix::identity(2), &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn inverse_round_trip() {
        let a = Matrix::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]).unwrap();
        let inv = spd_inverse(&a).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = (0..3).map(|i| inv[(i, j)]).collect();
            let e = a.mul_vec(&col);
            for (i, v) in e.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn submatrix_drops_rows_and_columns() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 5.0]]).unwrap();
        assert_eq!(a.submatrix(&[0]), Matrix::from_rows(&[&[1.0]]).unwrap());
    }

    mod prop {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn random_spd_residual_small(
                entries in proptest::collection::vec(-1.0f64..1.0, 25),
                b in proptest::collection::vec(-10.0f64..10.0, 5),
            ) {
                // B Bᵀ + I is SPD and well conditioned enough for the bound.
                let n = 5;
                let mut a = Matrix::identity(n);
                for r in 0..n {
                    a.add_outer(1.0, &entries[r * n..(r + 1) * n]);
                }
                let x = chol_solve(&a, &b).unwrap();
                prop_assert!(residual(&a, &x, &b) <= 1e-10 * (1.0 + inf_norm(&b)));
            }
        }
    }
}
