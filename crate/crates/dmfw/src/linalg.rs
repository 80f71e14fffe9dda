//! Small dense linear algebra: vector helpers, a row-major matrix, and a
//! Jacobi eigensolver for symmetric matrices. Everything here is sized for
//! the n-by-n gossip matrices and per-agent quadratic forms of this crate
//! (a few hundred rows at most), so dense storage and O(n^3) eigensolves
//! are fine.

use crate::error::{Error, Result};
use crate::scalar::Real;
use rand::Rng;

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// y += c * x
pub fn add_scaled<T: Real>(y: &mut [T], c: T, x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// (1 - c) * a + c * b
pub fn blend<T: Real>(a: &[T], b: &[T], c: T) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&ai, &bi)| (T::one() - c) * ai + c * bi)
        .collect()
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&ai, &bi)| ai - bi).collect()
}

/// Coordinate-wise mean of equal-length rows.
pub fn mean_rows<T: Real>(rows: &[&[T]]) -> Vec<T> {
    let n = rows.len();
    debug_assert!(n > 0);
    let dim = rows[0].len();
    let inv = T::of(1.0) / T::from_usize(n).unwrap();
    let mut out = vec![T::zero(); dim];
    for row in rows {
        add_scaled(&mut out, inv, row);
    }
    out
}

pub fn all_finite<T: Real>(a: &[T]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![T::zero(); n_rows * n_cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n_rows = rows.len();
        let n_cols = if n_rows > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols);
            data.extend_from_slice(r);
        }
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn gaussian<R: Rng + ?Sized>(n_rows: usize, n_cols: usize, rng: &mut R) -> Self {
        let data = (0..n_rows * n_cols)
            .map(|_| T::standard_normal(rng))
            .collect();
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn scale(&mut self, c: T) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// A x
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// A' x
    pub fn matvec_t(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.n_rows);
        let mut out = vec![T::zero(); self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            add_scaled(&mut out, xi, self.row(i));
        }
        out
    }

    /// Largest singular value, via power iteration on x -> A'(A x).
    pub fn spectral_norm(&self) -> T {
        let n = self.n_cols;
        if n == 0 || self.n_rows == 0 {
            return T::zero();
        }
        // Deterministic non-degenerate start.
        let mut v: Vec<T> = (0..n)
            .map(|k| T::one() + T::of(0.01) * T::from_usize(k).unwrap())
            .collect();
        let nv = norm(&v);
        for x in &mut v {
            *x /= nv;
        }
        let mut sigma2 = T::zero();
        for _ in 0..200 {
            let w = self.matvec_t(&self.matvec(&v));
            let nw = norm(&w);
            if nw == T::zero() {
                return T::zero();
            }
            let prev = sigma2;
            sigma2 = nw;
            v = w.iter().map(|&x| x / nw).collect();
            if (sigma2 - prev).abs() <= T::of(1e-14) * sigma2.max(T::one()) {
                break;
            }
        }
        sigma2.sqrt()
    }
}

/// All eigenvalues of a symmetric matrix by the cyclic Jacobi method,
/// sorted in descending order. Errors if the sweep cap is hit before the
/// off-diagonal mass is annihilated.
pub fn symmetric_eigenvalues<T: Real>(m: &DenseMatrix<T>) -> Result<Vec<T>> {
    let n = m.n_rows();
    if n != m.n_cols() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if n == 0 {
        return Ok(vec![]);
    }
    if n == 1 {
        return Ok(vec![m.get(0, 0)]);
    }
    let mut a = m.clone();
    let scale: T = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j).abs()).sum::<T>())
        .fold(T::zero(), |acc, s| acc.max(s))
        .max(T::one());
    let tol = T::epsilon() * scale;

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a.get(p, q).abs());
            }
        }
        if off <= tol {
            let mut eig: Vec<T> = (0..n).map(|i| a.get(i, i)).collect();
            eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
            return Ok(eig);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol * T::of(1e-3) {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let tau = (aqq - app) / (T::of(2.0) * apq);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    Err(Error::Numeric(
        "symmetric eigensolver hit its sweep cap before converging".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![3.0, 7.0, 11.0]);
        assert_eq!(a.matvec_t(&[1.0, 1.0, 1.0]), vec![9.0, 12.0]);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let mut a = DenseMatrix::<f64>::zeros(3, 3);
        a.set(0, 0, 2.0);
        a.set(1, 1, -5.0);
        a.set(2, 2, 1.0);
        assert!((a.spectral_norm() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let a = DenseMatrix::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let eig = symmetric_eigenvalues(&a).unwrap();
        assert!((eig[0] - 3.0).abs() < 1e-12);
        assert!((eig[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_handles_larger_symmetric() {
        let mut rng = crate::rng::substream(3, &[99]);
        let g = DenseMatrix::<f64>::gaussian(6, 6, &mut rng);
        // Symmetrize.
        let mut s = DenseMatrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                s.set(i, j, 0.5 * (g.get(i, j) + g.get(j, i)));
            }
        }
        let eig = symmetric_eigenvalues(&s).unwrap();
        // Trace is preserved by similarity transforms.
        let trace: f64 = (0..6).map(|i| s.get(i, i)).sum();
        let sum: f64 = eig.iter().sum();
        assert!((trace - sum).abs() < 1e-10);
        // Sorted descending.
        for w in eig.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }
}
