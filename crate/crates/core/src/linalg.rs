//! Dense complex matrices and the factorizations the rest of the crate needs.
//!
//! Storage is row-major `Vec<Complex64>`. Everything here works at "desk
//! scale" (a few thousand rows at most); the only structured routine is the
//! block-cyclic log-determinant, which is what makes Jensen sweeps affordable.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

/// Pivots smaller than this are treated as exact zeros.
pub const PIVOT_FLOOR: f64 = 1e-300;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4e}{:+.4e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Builds a matrix from row-major real entries.
    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), rows * cols, "value count does not match shape");
        CMatrix {
            rows,
            cols,
            data: values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Adds `c` to every diagonal entry.
    pub fn add_diagonal(&self, c: Complex64) -> CMatrix {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)] += c;
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |a_ij - conj(a_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Copy of the `size`-square block at block coordinates `(bi, bj)`.
    pub fn block(&self, bi: usize, bj: usize, size: usize) -> CMatrix {
        CMatrix::from_fn(size, size, |i, j| self[(bi * size + i, bj * size + j)])
    }

    pub fn set_block(&mut self, bi: usize, bj: usize, block: &CMatrix) {
        let size = block.rows;
        for i in 0..size {
            for j in 0..block.cols {
                self[(bi * size + i, bj * size + j)] = block[(i, j)];
            }
        }
    }

    /// Max-norm of the difference.
    pub fn max_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub(crate) fn to_faer(&self) -> faer::Mat<Complex64> {
        faer::Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

/// `diag(top, bottom)` for two square blocks.
pub fn block_diag2(top: &CMatrix, bottom: &CMatrix) -> CMatrix {
    let (p, q) = (top.nrows(), bottom.nrows());
    let mut out = CMatrix::zeros(p + q, p + q);
    for i in 0..p {
        for j in 0..p {
            out[(i, j)] = top[(i, j)];
        }
    }
    for i in 0..q {
        for j in 0..q {
            out[(p + i, p + j)] = bottom[(i, j)];
        }
    }
    out
}

/// Assembles `[[a, b], [c, d]]` from four equally sized square blocks.
pub fn block2x2(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> CMatrix {
    let m = a.nrows();
    let mut out = CMatrix::zeros(2 * m, 2 * m);
    out.set_block(0, 0, a);
    out.set_block(0, 1, b);
    out.set_block(1, 0, c);
    out.set_block(1, 1, d);
    out
}

/// A determinant held as `phase * exp(log_abs)` so that it never overflows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDet {
    pub log_abs: f64,
    pub phase: Complex64,
}

impl LogDet {
    pub fn value(&self) -> Complex64 {
        self.phase * self.log_abs.exp()
    }

    pub fn mul(self, other: LogDet) -> LogDet {
        LogDet {
            log_abs: self.log_abs + other.log_abs,
            phase: unit(self.phase * other.phase),
        }
    }

    pub fn inv(self) -> LogDet {
        LogDet {
            log_abs: -self.log_abs,
            phase: self.phase.conj(),
        }
    }
}

fn unit(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r > 0.0 {
        z / r
    } else {
        ONE
    }
}

/// Pivot below [`PIVOT_FLOOR`] during elimination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SingularPivot {
    pub index: usize,
}

/// LU factorization with partial pivoting of a dense square matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Result<Lu, SingularPivot> {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best < PIVOT_FLOOR {
                return Err(SingularPivot { index: k });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == ZERO {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Lu { lu, perm, swaps })
    }

    pub fn log_det(&self) -> LogDet {
        let n = self.lu.nrows();
        let mut log_abs = 0.0;
        let mut phase = if self.swaps % 2 == 0 { ONE } else { -ONE };
        for k in 0..n {
            let d = self.lu[(k, k)];
            log_abs += d.norm().ln();
            phase = unit(phase * d);
        }
        LogDet { log_abs, phase }
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        let n = self.lu.nrows();
        assert_eq!(b.nrows(), n);
        let mut x = CMatrix::from_fn(n, b.ncols(), |i, j| b[(self.perm[i], j)]);
        for c in 0..b.ncols() {
            for i in 0..n {
                let mut v = x[(i, c)];
                for k in 0..i {
                    v -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = v;
            }
            for i in (0..n).rev() {
                let mut v = x[(i, c)];
                for k in (i + 1)..n {
                    v -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = v / self.lu[(i, i)];
            }
        }
        x
    }
}

pub fn log_det(a: &CMatrix) -> Result<LogDet, SingularPivot> {
    Ok(Lu::new(a)?.log_det())
}

/// Plain determinant; zero when a pivot underflows the floor.
pub fn det(a: &CMatrix) -> Complex64 {
    match log_det(a) {
        Ok(d) => d.value(),
        Err(_) => ZERO,
    }
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix, SingularPivot> {
    Ok(Lu::new(a)?.solve(&CMatrix::identity(a.nrows())))
}

/// Householder QR of a square matrix. Returns `Q` and the diagonal of `R`.
pub fn qr(a: &CMatrix) -> (CMatrix, Vec<Complex64>) {
    assert!(a.is_square());
    let n = a.nrows();
    let mut r = a.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(1) {
        let norm = (k..n).map(|i| r[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let alpha = -unit(x0) * norm;
        let mut v: Vec<Complex64> = (k..n).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // R <- (I - 2 v v^H / |v|^2) R
        for j in k..n {
            let dot: Complex64 = v.iter().enumerate().map(|(t, vi)| vi.conj() * r[(k + t, j)]).sum();
            let f = dot * (2.0 / vnorm2);
            for (t, vi) in v.iter().enumerate() {
                r[(k + t, j)] -= vi * f;
            }
        }
        // Q <- Q (I - 2 v v^H / |v|^2)
        for i in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(t, vi)| q[(i, k + t)] * vi).sum();
            let f = dot * (2.0 / vnorm2);
            for (t, vi) in v.iter().enumerate() {
                q[(i, k + t)] -= f * vi.conj();
            }
        }
    }
    let diag = (0..n).map(|i| r[(i, i)]).collect();
    (q, diag)
}

/// Eigensolver failure reported by the dense backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EigenFailure {
    pub rows: usize,
    pub cols: usize,
}

/// All eigenvalues of a general square matrix.
///
/// Real inputs go through the real Schur path so that real eigenvalues come
/// back with exactly zero imaginary part and complex ones in exact conjugate
/// pairs.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>, EigenFailure> {
    assert!(a.is_square(), "eigenvalues need a square matrix");
    let fail = EigenFailure {
        rows: a.nrows(),
        cols: a.ncols(),
    };
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if !a.is_finite() {
        return Err(fail);
    }
    if a.is_real() {
        let m = faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].re);
        m.eigenvalues().map_err(|_| fail)
    } else {
        a.to_faer().eigenvalues().map_err(|_| fail)
    }
}

/// Eigenvalues of a Hermitian matrix (lower triangle is read), ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>, EigenFailure> {
    assert!(a.is_square());
    let fail = EigenFailure {
        rows: a.nrows(),
        cols: a.ncols(),
    };
    if !a.is_finite() {
        return Err(fail);
    }
    if a.is_real() {
        let m = faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].re);
        m.self_adjoint_eigenvalues(faer::Side::Lower).map_err(|_| fail)
    } else {
        a.to_faer()
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|_| fail)
    }
}

/// Distance between two equally sized multisets of complex numbers.
///
/// Pairs are matched greedily in order of increasing separation; the result
/// is the largest matched separation divided by `max(1, |a|, |b|)` of that
/// pair. Greedy matching can only overestimate the optimal bottleneck, so a
/// small value is a valid certificate of agreement.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "multisets differ in size");
    let n = a.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut used_a = vec![false; n];
    let mut used_b = vec![false; n];
    let mut worst: f64 = 0.0;
    let mut matched = 0;
    for (d, i, j) in pairs {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        let scale = 1f64.max(a[i].norm()).max(b[j].norm());
        worst = worst.max(d / scale);
        matched += 1;
        if matched == n {
            break;
        }
    }
    worst
}

/// Pairwise (cascade) summation: order independent to rounding level and
/// much tighter than a running sum for long vectors.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lu_determinant_of_small_matrix() {
        let a = CMatrix::from_fn(3, 3, |i, j| {
            c(
                (i * 3 + j) as f64 + if i == j { 2.0 } else { 0.0 },
                (i as f64) - (j as f64),
            )
        });
        // Cofactor expansion by hand.
        let m = |i, j| a[(i, j)];
        let expect = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
            - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        let got = det(&a);
        assert!((got - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = CMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(log_det(&a).is_err());
    }

    #[test]
    fn solve_recovers_inverse() {
        let a = CMatrix::from_fn(4, 4, |i, j| {
            c(1.0 / (1.0 + i as f64 + j as f64), if i == j { 1.0 } else { 0.0 })
        });
        let inv = inverse(&a).unwrap();
        assert!((&a * &inv).max_diff(&CMatrix::identity(4)) < 1e-12);
    }

    #[test]
    fn qr_is_orthonormal_and_reconstructs() {
        let a = CMatrix::from_fn(5, 5, |i, j| {
            c((i as f64 * 1.3 - j as f64).sin(), (i as f64 + 2.0 * j as f64).cos())
        });
        let (q, _) = qr(&a);
        assert!((&q.adjoint() * &q).max_diff(&CMatrix::identity(5)) < 1e-13);
        let r = &q.adjoint() * &a;
        for i in 0..5 {
            for j in 0..i {
                assert!(r[(i, j)].norm() < 1e-12, "R not upper triangular at ({i},{j})");
            }
        }
    }

    #[test]
    fn eigenvalues_of_companion_matrix() {
        // x^2 - 3x + 2
        let a = CMatrix::from_real(2, 2, &[3.0, -2.0, 1.0, 0.0]);
        let mut ev: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_identity() {
        let ev = eigenvalues(&CMatrix::identity(5)).unwrap();
        assert_eq!(ev.len(), 5);
        assert!(ev.iter().all(|z| (z - ONE).norm() < 1e-14));
    }

    #[test]
    fn multiset_distance_ignores_order() {
        let a = [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 1.0)];
        let b = [c(-3.0, 1.0), c(1.0, 0.0), c(0.0, 2.0 + 1e-10)];
        assert!(multiset_distance(&a, &b) < 1e-9);
        let d = [c(-3.0, 1.0), c(1.0, 0.0), c(0.0, 2.5)];
        assert!(multiset_distance(&a, &d) > 0.1);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-11);
    }
}
