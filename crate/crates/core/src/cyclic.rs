//! Block tridiagonal matrices with corner blocks ("block-cyclic").
//!
//! The determinant routine exploits the sparsity: with partial pivoting the
//! fill of a block-cyclic matrix stays inside a band of about three blocks
//! plus a dense border formed by the last two block columns. Cost is
//! `O(N m^2)` for `N = n m` rows instead of `O(N^3)`.

use num_complex::Complex64;

use crate::linalg::{log_det, CMatrix, LogDet, SingularPivot, ONE, PIVOT_FLOOR, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct BlockCyclic {
    m: usize,
    diag: Vec<CMatrix>,
    /// Block `(k, k+1)`.
    upper: Vec<CMatrix>,
    /// Block `(k+1, k)`.
    lower: Vec<CMatrix>,
    /// Block `(0, n-1)`.
    top_right: CMatrix,
    /// Block `(n-1, 0)`.
    bottom_left: CMatrix,
}

impl BlockCyclic {
    pub fn new(
        diag: Vec<CMatrix>,
        upper: Vec<CMatrix>,
        lower: Vec<CMatrix>,
        top_right: CMatrix,
        bottom_left: CMatrix,
    ) -> Self {
        let n = diag.len();
        assert!(n >= 3, "block-cyclic matrices need at least three blocks");
        assert_eq!(upper.len(), n - 1);
        assert_eq!(lower.len(), n - 1);
        let m = diag[0].nrows();
        BlockCyclic {
            m,
            diag,
            upper,
            lower,
            top_right,
            bottom_left,
        }
    }

    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m * self.diag.len()
    }

    pub fn diag(&self, k: usize) -> &CMatrix {
        &self.diag[k]
    }

    pub fn upper(&self, k: usize) -> &CMatrix {
        &self.upper[k]
    }

    pub fn lower(&self, k: usize) -> &CMatrix {
        &self.lower[k]
    }

    pub fn top_right(&self) -> &CMatrix {
        &self.top_right
    }

    pub fn bottom_left(&self) -> &CMatrix {
        &self.bottom_left
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.blocks();
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for k in 0..n {
            out.set_block(k, k, &self.diag[k]);
        }
        for k in 0..n - 1 {
            out.set_block(k, k + 1, &self.upper[k]);
            out.set_block(k + 1, k, &self.lower[k]);
        }
        out.set_block(0, n - 1, &self.top_right);
        out.set_block(n - 1, 0, &self.bottom_left);
        out
    }

    /// `eps I - self`.
    pub fn shifted_negation(&self, eps: Complex64) -> BlockCyclic {
        let neg = |b: &CMatrix| b.scale(-ONE);
        BlockCyclic {
            m: self.m,
            diag: self.diag.iter().map(|d| d.scale(-ONE).add_diagonal(eps)).collect(),
            upper: self.upper.iter().map(neg).collect(),
            lower: self.lower.iter().map(neg).collect(),
            top_right: neg(&self.top_right),
            bottom_left: neg(&self.bottom_left),
        }
    }

    /// `self - eps I`.
    pub fn shifted(&self, eps: Complex64) -> BlockCyclic {
        let mut out = self.clone();
        for d in &mut out.diag {
            *d = d.add_diagonal(-eps);
        }
        out
    }

    /// Transfer matrix of the homogeneous equation `X u = 0`.
    ///
    /// Row `k` reads `L_{k-1} u_{k-1} + X_kk u_k + U_k u_{k+1} = 0`, so each
    /// factor is `[[-U_k^{-1} X_kk, -U_k^{-1} L_{k-1}], [I, 0]]`, with the
    /// corners closing the ring. The product runs right to left from block 0.
    pub fn transfer_product(&self) -> Result<CMatrix, SingularPivot> {
        let n = self.blocks();
        let m = self.m;
        let mut total = CMatrix::identity(2 * m);
        for k in 0..n {
            let coupling_next = if k + 1 < n { &self.upper[k] } else { &self.bottom_left };
            let coupling_prev = if k > 0 { &self.lower[k - 1] } else { &self.top_right };
            let lu = crate::linalg::Lu::new(coupling_next)?;
            let a = lu.solve(&self.diag[k]).scale(-ONE);
            let b = lu.solve(coupling_prev).scale(-ONE);
            let factor = crate::linalg::block2x2(&a, &b, &CMatrix::identity(m), &CMatrix::zeros(m, m));
            total = &factor * &total;
        }
        Ok(total)
    }

    /// `log |det|` and phase by structured LU with partial pivoting.
    pub fn log_det(&self) -> Result<LogDet, SingularPivot> {
        if self.blocks() < 4 {
            return log_det(&self.to_dense());
        }
        StructuredLu::new(self).run()
    }
}

struct SparseRow {
    lo: usize,
    band: Vec<Complex64>,
    tail: Vec<Complex64>,
}

impl SparseRow {
    #[inline]
    fn get(&self, j: usize, tail_start: usize) -> Complex64 {
        if j >= tail_start {
            self.tail[j - tail_start]
        } else if j >= self.lo && j < self.lo + self.band.len() {
            self.band[j - self.lo]
        } else {
            ZERO
        }
    }

    fn hi(&self) -> usize {
        self.lo + self.band.len()
    }
}

struct StructuredLu {
    n: usize,
    m: usize,
    tail_start: usize,
    rows: Vec<SparseRow>,
}

impl StructuredLu {
    fn new(x: &BlockCyclic) -> Self {
        let n = x.blocks();
        let m = x.m;
        let dim = n * m;
        let tail_start = (n - 2) * m;
        let mut rows = Vec::with_capacity(dim);
        for b in 0..n {
            let mut parts: Vec<(usize, &CMatrix)> = vec![(b, &x.diag[b])];
            if b + 1 < n {
                parts.push((b + 1, &x.upper[b]));
            }
            if b > 0 {
                parts.push((b - 1, &x.lower[b - 1]));
            }
            if b == 0 {
                parts.push((n - 1, &x.top_right));
            }
            if b == n - 1 {
                parts.push((0, &x.bottom_left));
            }
            let band_blocks: Vec<usize> = parts.iter().map(|p| p.0).filter(|&c| c * m < tail_start).collect();
            let lo = band_blocks.iter().min().map_or(tail_start, |&c| c * m);
            let hi = band_blocks.iter().max().map_or(tail_start, |&c| (c + 1) * m);
            for r in 0..m {
                let mut row = SparseRow {
                    lo,
                    band: vec![ZERO; hi - lo],
                    tail: vec![ZERO; dim - tail_start],
                };
                for &(bc, block) in &parts {
                    for c in 0..m {
                        let j = bc * m + c;
                        if j >= tail_start {
                            row.tail[j - tail_start] = block[(r, c)];
                        } else {
                            row.band[j - lo] = block[(r, c)];
                        }
                    }
                }
                rows.push(row);
            }
        }
        StructuredLu { n, m, tail_start, rows }
    }

    fn run(mut self) -> Result<LogDet, SingularPivot> {
        let dim = self.n * self.m;
        let ts = self.tail_start;
        let last_block_start = (self.n - 1) * self.m;
        let mut log_abs = 0.0;
        let mut phase = ONE;
        let mut candidates: Vec<usize> = Vec::with_capacity(4 * self.m);
        let mut pivot_band: Vec<Complex64> = Vec::new();
        let mut pivot_tail: Vec<Complex64> = Vec::new();

        for k in 0..dim {
            // Only rows in the next block window or in the last block row can
            // have a nonzero in column k.
            let window_end = dim.min((k / self.m + 2) * self.m);
            candidates.clear();
            candidates.extend(k..window_end);
            candidates.extend(last_block_start.max(window_end)..dim);

            let (mut p, mut best) = (k, -1.0);
            for &q in &candidates {
                let v = self.rows[q].get(k, ts).norm();
                if v > best {
                    best = v;
                    p = q;
                }
            }
            if best < PIVOT_FLOOR {
                return Err(SingularPivot { index: k });
            }
            if p != k {
                self.rows.swap(k, p);
                phase = -phase;
            }
            let pivot = self.rows[k].get(k, ts);
            log_abs += pivot.norm().ln();
            phase *= pivot / pivot.norm();

            let (band_from, band_to) = {
                let row = &self.rows[k];
                let from = (k + 1).max(row.lo);
                (from, row.hi().max(from))
            };
            pivot_band.clear();
            pivot_band.extend((band_from..band_to).map(|j| self.rows[k].get(j, ts)));
            let tail_from = if k >= ts { k + 1 - ts } else { 0 };
            pivot_tail.clear();
            pivot_tail.extend_from_slice(&self.rows[k].tail[tail_from.min(dim - ts)..]);

            for &q in &candidates {
                if q == k {
                    continue;
                }
                let row = &mut self.rows[q];
                let v = row.get(k, ts);
                if v == ZERO {
                    continue;
                }
                let f = v / pivot;
                if band_to > band_from {
                    if row.hi() < band_to {
                        let new_len = band_to - row.lo;
                        row.band.resize(new_len, ZERO);
                    }
                    let offset = band_from - row.lo;
                    for (dst, src) in row.band[offset..offset + pivot_band.len()].iter_mut().zip(&pivot_band) {
                        *dst -= f * src;
                    }
                }
                for (dst, src) in row.tail[tail_from..].iter_mut().zip(&pivot_tail) {
                    *dst -= f * src;
                }
            }
            if k % 64 == 63 {
                phase /= phase.norm();
            }
        }
        Ok(LogDet {
            log_abs,
            phase: phase / phase.norm(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block(rng: &mut ChaCha8Rng, m: usize) -> CMatrix {
        CMatrix::from_fn(m, m, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_cyclic(rng: &mut ChaCha8Rng, n: usize, m: usize) -> BlockCyclic {
        BlockCyclic::new(
            (0..n).map(|_| random_block(rng, m)).collect(),
            (0..n - 1).map(|_| random_block(rng, m)).collect(),
            (0..n - 1).map(|_| random_block(rng, m)).collect(),
            random_block(rng, m),
            random_block(rng, m),
        )
    }

    #[test]
    fn structured_determinant_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 3..9 {
            for m in 1..5 {
                let x = random_cyclic(&mut rng, n, m);
                let dense = log_det(&x.to_dense()).unwrap();
                let structured = StructuredLu::new(&x).run().unwrap();
                assert!(
                    (dense.log_abs - structured.log_abs).abs() < 1e-10 * (1.0 + dense.log_abs.abs()),
                    "n={n} m={m}: {} vs {}",
                    dense.log_abs,
                    structured.log_abs
                );
                assert!(
                    (dense.phase - structured.phase).norm() < 1e-9,
                    "phase mismatch n={n} m={m}"
                );
            }
        }
    }

    #[test]
    fn structured_handles_zero_leading_blocks() {
        // Forces pivoting from the last block row (corner) into the first.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = random_cyclic(&mut rng, 6, 2);
        x.diag[0] = CMatrix::zeros(2, 2);
        x.upper[0] = CMatrix::zeros(2, 2);
        x.diag[1] = CMatrix::zeros(2, 2);
        let dense = log_det(&x.to_dense()).unwrap();
        let structured = StructuredLu::new(&x).run().unwrap();
        assert!((dense.log_abs - structured.log_abs).abs() < 1e-10);
        assert!((dense.phase - structured.phase).norm() < 1e-9);
    }

    #[test]
    fn singular_cyclic_matrix_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = random_cyclic(&mut rng, 5, 2);
        // Zero out block row 2 entirely.
        x.diag[2] = CMatrix::zeros(2, 2);
        x.upper[2] = CMatrix::zeros(2, 2);
        x.lower[1] = CMatrix::zeros(2, 2);
        assert!(x.log_det().is_err());
    }

    #[test]
    fn transfer_of_scalar_ring() {
        // 1D ring at energy e: factors [[e - v, -1], [1, 0]].
        let n = 5;
        let e = 0.7;
        let h = BlockCyclic::new(
            (0..n).map(|_| CMatrix::zeros(1, 1)).collect(),
            (0..n - 1).map(|_| CMatrix::identity(1)).collect(),
            (0..n - 1).map(|_| CMatrix::identity(1)).collect(),
            CMatrix::identity(1),
            CMatrix::identity(1),
        );
        let t = h.shifted_negation(Complex64::new(e, 0.0)).transfer_product().unwrap();
        let f = CMatrix::from_real(2, 2, &[e, -1.0, 1.0, 0.0]);
        let mut expect = CMatrix::identity(2);
        for _ in 0..n {
            expect = &f * &expect;
        }
        assert!(t.max_diff(&expect) < 1e-12);
    }
}
