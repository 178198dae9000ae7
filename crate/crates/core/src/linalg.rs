//! Dense Hermitian linear algebra over `f64` and `Complex64`.
//!
//! Only what the regression code needs: a row-major matrix, an in-place
//! Cholesky factorization with optional jitter escalation, triangular solves
//! and log-determinants.

use core::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::prelude::*;

/// Scalar field with conjugation, implemented for `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + PartialEq
    + core::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn abs2(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn is_finite(self) -> bool;
    fn to_complex(self) -> Complex64 {
        Complex64::new(self.re(), self.im())
    }
}

impl Scalar for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn im(self) -> f64 {
        0.0
    }
    #[inline]
    fn abs2(self) -> f64 {
        self * self
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn im(self) -> f64 {
        self.im
    }
    #[inline]
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::from_real(1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!("matrix data length {} does not match {rows}x{cols}", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn trace(&self) -> T {
        let mut t = T::zero();
        for i in 0..self.rows.min(self.cols) {
            t += self[(i, i)];
        }
        t
    }

    /// Replaces the matrix by `(A + A^H) / 2`.
    pub fn make_hermitian(&mut self) {
        let n = self.rows;
        for i in 0..n {
            for j in i..n {
                let avg = (self[(i, j)] + self[(j, i)].conj()).scale(0.5);
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += T::from_real(value);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x.scale(s)).collect() }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| dotu(self.row(i), x)).collect()
    }

    /// Largest absolute deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = (self[(i, j)] - self[(j, i)].conj()).abs2().sqrt();
                worst = worst.max(d);
            }
        }
        worst
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Unconjugated dot product `Σ a_k b_k`.
#[inline]
pub fn dotu<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        acc[0] += *x * *y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// Conjugated inner product `Σ conj(a_k) b_k`.
#[inline]
pub fn dotc<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + x.conj() * *y)
}

pub fn norm2<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.abs2()).sum::<f64>().sqrt()
}

/// Lower Cholesky factor `A = L L^H` of a Hermitian positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    // Row-major lower triangle; entries above the diagonal are zero.
    l: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factorizes `a`, reading only its lower triangle.
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::invalid("cholesky needs a square matrix"));
        }
        let n = a.rows;
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let s = a[(j, j)].re() - l[j * n..j * n + j].iter().map(|x| x.abs2()).sum::<f64>();
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::numeric(format!("matrix not positive definite at pivot {j} (value {s:e})")));
            }
            let d = s.sqrt();
            l[j * n + j] = T::from_real(d);
            let inv = 1.0 / d;
            let rj: Vec<T> = l[j * n..j * n + j].iter().map(|x| x.conj()).collect();
            for i in (j + 1)..n {
                // L[i][j] = (A[i][j] - Σ_k L[i][k] conj(L[j][k])) / L[j][j]
                let ri = &mut l[i * n..i * n + j + 1];
                let acc = dotu(&ri[..j], &rj);
                ri[j] = (a[(i, j)] - acc).scale(inv);
            }
        }
        Ok(Self { n, l })
    }

    /// Factorizes `a`; on failure retries once with `escalated_jitter` added to the diagonal.
    pub fn with_escalation(a: &Matrix<T>, escalated_jitter: f64) -> Result<(Self, f64)> {
        match Self::new(a) {
            Ok(c) => Ok((c, 0.0)),
            Err(first) => {
                let mut b = a.clone();
                b.add_diagonal(escalated_jitter);
                Self::new(&b).map(|c| (c, escalated_jitter)).map_err(|_| first)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.l[i * self.n + j]
    }

    /// `ln det A = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.at(i, i).re().ln()).sum::<f64>() * 2.0
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = dotu(row, &x[..i]);
            x[i] = (x[i] - s).scale(1.0 / self.at(i, i).re());
        }
        x
    }

    /// Solves `L^H x = b`.
    pub fn solve_upper(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let xi = x[i].scale(1.0 / self.at(i, i).re());
            x[i] = xi;
            for k in 0..i {
                let lik = self.l[i * n + k];
                x[k] -= lik.conj() * xi;
            }
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// Solves `L x = b` for a complex right-hand side.
    pub fn solve_lower_complex(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for (l, xk) in self.l[i * n..i * n + i].iter().zip(&x[..i]) {
                s += l.to_complex() * xk;
            }
            x[i] = (x[i] - s) / self.at(i, i).re();
        }
        x
    }

    /// Solves `A x = b` for a complex right-hand side.
    pub fn solve_complex(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x = self.solve_lower_complex(b);
        for i in (0..n).rev() {
            let xi = x[i] / self.at(i, i).re();
            x[i] = xi;
            for k in 0..i {
                x[k] -= self.l[i * n + k].conj().to_complex() * xi;
            }
        }
        x
    }

    /// Explicit inverse `A^{-1}` (Hermitian).
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::from_real(1.0);
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.make_hermitian();
        inv
    }
}

/// Solves the Hermitian positive-definite system `A x = b`.
pub fn solve_hpd<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    Ok(Cholesky::new(a)?.solve(b))
}
