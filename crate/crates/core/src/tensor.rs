//! Dense row-major matrices and the handful of products backprop needs.

use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{AddAssign, Index, IndexMut, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the model is generic over (`f32` for training,
/// `f64` for gradient checks).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + MulAssign + Debug + Default + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: alloc::vec![T::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Mat {
            rows,
            cols,
            data: alloc::vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Mat { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::of(x.f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn add_assign(&mut self, other: &Mat<T>) {
        assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// Adds `row` to every row.
    pub fn add_row(&mut self, row: &[T]) {
        assert_eq!(row.len(), self.cols);
        for r in self.data.chunks_exact_mut(self.cols.max(1)) {
            for (a, &b) in r.iter_mut().zip(row) {
                *a += b;
            }
        }
    }

    /// Sum over rows, as a length-`cols` vector.
    pub fn col_sums(&self) -> Vec<T> {
        let mut out = alloc::vec![T::zero(); self.cols];
        for r in self.data.chunks_exact(self.cols.max(1)) {
            for (o, &x) in out.iter_mut().zip(r) {
                *o += x;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| sum(self.row(i))).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Mat { rows: idx.len(), cols: self.cols, data }
    }

    pub fn sum_squares(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x * x)
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        let mut out = Mat::zeros(self.rows, other.cols);
        out.add_matmul(self, other);
        out
    }

    /// `self += a · b`.
    pub fn add_matmul(&mut self, a: &Mat<T>, b: &Mat<T>) {
        assert_eq!(a.cols, b.rows, "matmul inner dimension");
        assert_eq!((self.rows, self.cols), (a.rows, b.cols), "matmul output shape");
        let n = b.cols;
        for i in 0..a.rows {
            let out = &mut self.data[i * n..(i + 1) * n];
            for (k, &aik) in a.row(i).iter().enumerate() {
                if aik == T::zero() {
                    continue;
                }
                axpy(out, aik, b.row(k));
            }
        }
    }

    /// `self · otherᵀ`.
    pub fn matmul_nt(&self, other: &Mat<T>) -> Mat<T> {
        let mut out = Mat::zeros(self.rows, other.rows);
        out.add_matmul_nt(self, other);
        out
    }

    /// `self += a · bᵀ`.
    pub fn add_matmul_nt(&mut self, a: &Mat<T>, b: &Mat<T>) {
        assert_eq!(a.cols, b.cols, "matmul_nt inner dimension");
        assert_eq!((self.rows, self.cols), (a.rows, b.rows), "matmul_nt output shape");
        for i in 0..a.rows {
            let ai = a.row(i);
            for j in 0..b.rows {
                self.data[i * b.rows + j] += dot(ai, b.row(j));
            }
        }
    }

    /// `selfᵀ · other`.
    pub fn matmul_tn(&self, other: &Mat<T>) -> Mat<T> {
        let mut out = Mat::zeros(self.cols, other.cols);
        out.add_matmul_tn(self, other);
        out
    }

    /// `self += aᵀ · b`.
    pub fn add_matmul_tn(&mut self, a: &Mat<T>, b: &Mat<T>) {
        assert_eq!(a.rows, b.rows, "matmul_tn inner dimension");
        assert_eq!((self.rows, self.cols), (a.cols, b.cols), "matmul_tn output shape");
        let n = b.cols;
        for k in 0..a.rows {
            let bk = b.row(k);
            for (i, &aki) in a.row(k).iter().enumerate() {
                if aki == T::zero() {
                    continue;
                }
                axpy(&mut self.data[i * n..(i + 1) * n], aki, bk);
            }
        }
    }

    pub fn transpose(&self) -> Mat<T> {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn axpy<T: Real>(out: &mut [T], alpha: T, x: &[T]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

#[inline]
pub fn sum<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x)
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// In-place softmax; returns the log-normalizer.
pub fn softmax_in_place<T: Real>(row: &mut [T]) -> T {
    let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let mut total = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x = *x / total;
    }
    max + total.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Mat<f64> {
        Mat::from_vec(rows, cols, v.to_vec())
    }

    #[test]
    fn products_agree_with_transpose() {
        let a = m(2, 3, &[1., 2., 3., 4., 5., 6.]);
        let b = m(3, 2, &[7., 8., 9., 10., 11., 12.]);
        assert_eq!(a.matmul(&b).as_slice(), &[58., 64., 139., 154.]);
        assert_eq!(a.matmul_nt(&b.transpose()), a.matmul(&b));
        assert_eq!(a.transpose().matmul_tn(&b), a.matmul(&b));
    }

    #[test]
    fn softmax_rows_normalize() {
        let mut row = [1.0f64, 2.0, 3.0, -1.0];
        let lse = softmax_in_place(&mut row);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let direct = [1.0f64, 2.0, 3.0, -1.0].iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((lse - direct).abs() < 1e-12);
        let mut uniform = [0.5f64; 4];
        softmax_in_place(&mut uniform);
        assert!(uniform.iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn stable_logistic() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64) >= 0.0 && sigmoid(800.0f64) <= 1.0);
        assert!((softplus(1000.0f64) - 1000.0).abs() < 1e-9);
        assert!(softplus(-1000.0f64) >= 0.0);
    }
}
