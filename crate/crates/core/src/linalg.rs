//! Small dense linear-algebra kernels.
//!
//! Everything here is row-major `f64`. The problems this crate handles are
//! either low dimensional (subspace collections, d <= 200) or very flat
//! (a few dozen rows against thousands of columns), so the spectral work is
//! always done on the smaller Gram matrix with a cyclic Jacobi sweep.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero width
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.row_iter().map(|r| dot(r, x)).collect()
    }

    /// `selfᵀ * y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &coef) in self.row_iter().zip(y) {
            axpy(coef, r, &mut out);
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a != 0.0 {
                    axpy(a, other.row(k), out.row_mut(i));
                }
            }
        }
        Ok(out)
    }

    /// `A Aᵀ` (rows x rows).
    pub fn gram_rows(&self) -> Matrix {
        let n = self.rows;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// `Aᵀ A` (cols x cols).
    pub fn gram_cols(&self) -> Matrix {
        let d = self.cols;
        let mut g = Matrix::zeros(d, d);
        for r in self.row_iter() {
            for i in 0..d {
                if r[i] != 0.0 {
                    axpy(r[i], r, g.row_mut(i));
                }
            }
        }
        g
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest absolute asymmetry `|m_ij - m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(norm_sq(a))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Component-wise mean of equally long vectors, summed pairwise in index
/// order so the result does not depend on who computed the inputs.
pub fn pairwise_mean<V: AsRef<[f64]>>(vectors: &[V]) -> Vec<f64> {
    assert!(!vectors.is_empty(), "mean of zero vectors");
    let mut sum = pairwise_sum(vectors);
    let inv = 1.0 / vectors.len() as f64;
    sum.iter_mut().for_each(|v| *v *= inv);
    sum
}

fn pairwise_sum<V: AsRef<[f64]>>(vectors: &[V]) -> Vec<f64> {
    match vectors.len() {
        1 => vectors[0].as_ref().to_vec(),
        n => {
            let (lo, hi) = vectors.split_at(n / 2);
            let mut left = pairwise_sum(lo);
            let right = pairwise_sum(hi);
            left.iter_mut().zip(&right).for_each(|(a, b)| *a += b);
            left
        }
    }
}

/// Eigen-decomposition of a symmetric matrix.
///
/// `values` are ascending; row `k` of `vectors` is the unit eigenvector for
/// `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn largest(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Smallest eigenvalue strictly above `rel_tol * max(|λ|)`.
    pub fn smallest_above(&self, rel_tol: f64) -> Option<f64> {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return None;
        }
        self.values.iter().copied().find(|&v| v > rel_tol * scale)
    }

    /// Indices of eigenvalues strictly above `rel_tol * max(|λ|)`.
    pub fn range_indices(&self, rel_tol: f64) -> Vec<usize> {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Vec::new();
        }
        (0..self.values.len())
            .filter(|&k| self.values[k] > rel_tol * scale)
            .collect()
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigen-decomposition. Only the upper triangle is read.
pub fn symmetric_eigen(m: &Matrix) -> Result<SymmetricEigen> {
    if !m.is_square() {
        return Err(Error::invalid("eigen-decomposition needs a square matrix"));
    }
    let n = m.rows();
    let mut a = m.clone();
    for i in 0..n {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }
    // v holds eigenvectors as columns during the sweep
    let mut v = Matrix::identity(n);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += a[(i, i)] * a[(i, i)];
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off <= 1e-30 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(k, r)] = v[(r, i)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Orthonormal basis for the row space of `m` (modified Gram-Schmidt with
/// one re-orthogonalization pass). Rows whose residual norm falls below
/// `rel_tol` times their original norm are treated as dependent and dropped.
pub fn orthonormalize_rows(m: &Matrix, rel_tol: f64) -> Matrix {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in m.row_iter() {
        let original = norm(r);
        if original == 0.0 {
            continue;
        }
        let mut w = r.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let n = norm(&w);
        if n > rel_tol * original {
            w.iter_mut().for_each(|x| *x /= n);
            basis.push(w);
        }
    }
    if basis.is_empty() {
        return Matrix::zeros(0, m.cols());
    }
    Matrix::from_rows(&basis).expect("rows share the input width")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal_is_sorted() {
        let e = symmetric_eigen(&Matrix::diagonal(&[2.0, 0.0, 0.5])).unwrap();
        assert_eq!(e.values, vec![0.0, 0.5, 2.0]);
        assert_eq!(e.smallest_above(1e-9), Some(0.5));
    }

    #[test]
    fn eigen_two_by_two_matches_characteristic_polynomial() {
        // [[a, b], [b, c]] with eigenvalues ((a+c) ± sqrt((a-c)^2 + 4b^2)) / 2
        let (a, b, c) = (0.25, -0.25, 0.75);
        let m = Matrix::from_rows(&[[a, b], [b, c]]).unwrap();
        let e = symmetric_eigen(&m).unwrap();
        let disc = libm::sqrt((a - c) * (a - c) + 4.0 * b * b);
        assert!((e.values[0] - (a + c - disc) / 2.0).abs() < 1e-14);
        assert!((e.values[1] - (a + c + disc) / 2.0).abs() < 1e-14);
        for k in 0..2 {
            let v = e.vectors.row(k);
            let mv = m.mul_vec(v);
            for i in 0..2 {
                assert!((mv[i] - e.values[k] * v[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigenvectors_reconstruct_matrix() {
        let m = Matrix::from_rows(&[[4.0, 1.0, -2.0], [1.0, 2.0, 0.0], [-2.0, 0.0, 3.0]]).unwrap();
        let e = symmetric_eigen(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3)
                    .map(|k| e.values[k] * e.vectors[(k, i)] * e.vectors[(k, j)])
                    .sum();
                assert!((r - m[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_schmidt_drops_dependent_rows() {
        let m = Matrix::from_rows(&[[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]]).unwrap();
        let q = orthonormalize_rows(&m, 1e-10);
        assert_eq!(q.rows(), 2);
        let g = q.gram_rows();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pairwise_mean_of_three() {
        let m = pairwise_mean(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 9.0]]);
        assert_eq!(m, vec![3.0, 5.0]);
    }

    #[test]
    fn gram_products() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 0.0], [0.0, 1.0, 3.0]]).unwrap();
        assert_eq!(a.gram_rows(), a.mul(&a.transpose()).unwrap());
        assert_eq!(a.gram_cols(), a.transpose().mul(&a).unwrap());
        assert_eq!(a.tr_mul_vec(&[1.0, 1.0]), vec![1.0, 3.0, 3.0]);
    }
}
