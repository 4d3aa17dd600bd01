//! Small dense linear algebra: row-major matrices, LU, Cholesky and a
//! cyclic Jacobi symmetric eigensolver.
//!
//! Problem sizes in this crate are desk scale (tens of unknowns), so
//! everything is dense and allocation-light rather than blocked.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Real> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_diag(diag: &[S]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<S>]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        Self::from_fn(r, c, |i, j| cols[j][i])
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x` without forming the transpose.
    pub fn tr_mul_vec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.rows, "tr_mul_vec dimension");
        let mut out = vec![S::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: S) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add dimension");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub dimension");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// `xᵀ self y`.
    pub fn bilinear(&self, x: &[S], y: &[S]) -> S {
        dot(x, &self.mul_vec(y))
    }

    pub fn quad(&self, x: &[S]) -> S {
        self.bilinear(x, x)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> S {
        (0..self.rows).map(|i| self.row(i).iter().fold(S::zero(), |acc, v| acc + v.abs())).fold(S::zero(), S::max)
    }

    pub fn norm_frobenius(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> S {
        let mut worst = S::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Replaces `self` by `(self + selfᵀ)/2`, writing the same value into both
    /// mirrored entries so the result is exactly symmetric.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        let half = S::lit(0.5);
        for i in 0..self.rows {
            for j in 0..i {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<T: Real>(&self) -> Mat<T> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| T::lit(v.to_f64_lossy())).collect() }
    }
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += alpha * x`
#[inline]
pub fn axpy<S: Real>(alpha: S, x: &[S], y: &mut [S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub<S: Real>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<S: Real>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scaled<S: Real>(alpha: S, x: &[S]) -> Vec<S> {
    x.iter().map(|&v| alpha * v).collect()
}

pub fn norm_inf<S: Real>(x: &[S]) -> S {
    x.iter().fold(S::zero(), |acc, v| acc.max(v.abs()))
}

pub fn norm2<S: Real>(x: &[S]) -> S {
    dot(x, x).sqrt()
}

pub fn all_finite<S: Real>(x: &[S]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu<S> {
    lu: Mat<S>,
    perm: Vec<usize>,
}

impl<S: Real> Lu<S> {
    /// Fails with [`Error::SingularSystem`] when a pivot falls below
    /// `rel_tol * max|a_ij|`.
    pub fn new(a: &Mat<S>, rel_tol: S) -> Result<Self> {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let floor = rel_tol * a.max_abs().max(S::min_positive_value());
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, S::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > floor) {
                return Err(Error::SingularSystem {
                    detail: format!(
                        "pivot {:.3e} at column {k} below {:.3e}",
                        pivot.to_f64_lossy(),
                        floor.to_f64_lossy()
                    ),
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let inv = S::one() / lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] * inv;
                lu[(i, k)] = factor;
                if factor != S::zero() {
                    for j in (k + 1)..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= factor * v;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "LU solve dimension");
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = dot(&row[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / row[i];
        }
        x
    }
}

/// Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky<S> {
    l: Mat<S>,
}

impl<S: Real> Cholesky<S> {
    /// Fails with [`Error::SingularSystem`] unless `a` is numerically SPD.
    pub fn new(a: &Mat<S>) -> Result<Self> {
        assert!(a.is_square(), "Cholesky needs a square matrix");
        let n = a.rows();
        let mut l = Mat::zeros(n, n);
        let floor = S::epsilon() * a.max_abs();
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) {
                return Err(Error::SingularSystem {
                    detail: format!("matrix not positive definite (pivot {:.3e} at {j})", d.to_f64_lossy()),
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.l.rows();
        assert_eq!(b.len(), n, "Cholesky solve dimension");
        let mut y = b.to_vec();
        for i in 0..n {
            let s = dot(&self.l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for (k, yk) in y.iter().enumerate().skip(i + 1) {
                s -= self.l[(k, i)] * *yk;
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    pub fn factor(&self) -> &Mat<S> {
        &self.l
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<S> {
    pub values: Vec<S>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Mat<S>,
}

impl<S: Real> SymmetricEigen<S> {
    /// Cyclic Jacobi rotations on the symmetric part of `a`.
    pub fn new(a: &Mat<S>) -> Self {
        assert!(a.is_square(), "eigen needs a square matrix");
        let n = a.rows();
        let mut m = a.clone();
        m.symmetrize();
        let mut v = Mat::identity(n);
        let scale = m.norm_frobenius();
        if scale > S::zero() {
            for _sweep in 0..100 {
                let mut off = S::zero();
                for i in 0..n {
                    for j in 0..i {
                        off += m[(i, j)] * m[(i, j)];
                    }
                }
                if off.sqrt() <= S::epsilon() * S::lit(1e-2) * scale {
                    break;
                }
                for p in 0..n {
                    for q in (p + 1)..n {
                        let apq = m[(p, q)];
                        if apq == S::zero() {
                            continue;
                        }
                        let app = m[(p, p)];
                        let aqq = m[(q, q)];
                        let theta = (aqq - app) / (S::lit(2.0) * apq);
                        let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                        let c = S::one() / (t * t + S::one()).sqrt();
                        let s = t * c;
                        for k in 0..n {
                            let mkp = m[(k, p)];
                            let mkq = m[(k, q)];
                            m[(k, p)] = c * mkp - s * mkq;
                            m[(k, q)] = s * mkp + c * mkq;
                        }
                        for k in 0..n {
                            let mpk = m[(p, k)];
                            let mqk = m[(q, k)];
                            m[(p, k)] = c * mpk - s * mqk;
                            m[(q, k)] = s * mpk + c * mqk;
                        }
                        for k in 0..n {
                            let vkp = v[(k, p)];
                            let vkq = v[(k, q)];
                            v[(k, p)] = c * vkp - s * vkq;
                            v[(k, q)] = s * vkp + c * vkq;
                        }
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&k| m[(k, k)]).collect();
        let vectors = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
        Self { values, vectors }
    }

    pub fn min(&self) -> S {
        self.values.first().copied().unwrap_or_else(S::zero)
    }

    pub fn max(&self) -> S {
        self.values.last().copied().unwrap_or_else(S::zero)
    }

    pub fn vector(&self, k: usize) -> Vec<S> {
        self.vectors.column(k)
    }

    /// `V diag(values) Vᵀ`.
    pub fn reconstruct(&self) -> Mat<S> {
        let n = self.values.len();
        Mat::from_fn(n, n, |i, j| {
            (0..n).fold(S::zero(), |acc, k| acc + self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)])
        })
    }
}

/// Spectral condition number of an SPD matrix.
pub fn spd_condition<S: Real>(a: &Mat<S>) -> S {
    let eig = SymmetricEigen::new(a);
    eig.max() / eig.min()
}
