//! The determinant duality between `H(s)` and `T(eps)`, and the doubled
//! matrices `M(eps, s)` and `K(t)` whose duality partner is `Q = T^dagger T`.
//!
//! Both doubled matrices have `2n` blocks: an upper chain running over units
//! `1..n` and a lower chain running back over `n..1`, joined by identity
//! couplings at the fold and by the corner couplings.

use num_complex::Complex64;

use crate::blockmodel::{self, BlockModel, BoundaryFactor};
use crate::cyclic::BlockCyclic;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, LogDet, ONE};
use crate::transfer;

/// `|L - R| / max(|L|, |R|, 1e-30)` for determinants held in log form.
pub fn relative_gap(l: Option<LogDet>, r: Option<LogDet>) -> f64 {
    match (l, r) {
        (None, None) => 0.0,
        (Some(x), None) | (None, Some(x)) => {
            if x.log_abs < (1e-30f64).ln() {
                x.log_abs.exp() / 1e-30
            } else {
                1.0
            }
        }
        (Some(l), Some(r)) => {
            let (big, small) = if l.log_abs >= r.log_abs { (l, r) } else { (r, l) };
            let ratio = small.phase / big.phase * (small.log_abs - big.log_abs).exp();
            let gap = (ONE - ratio).norm();
            if big.log_abs < (1e-30f64).ln() {
                gap * (big.log_abs - (1e-30f64).ln()).exp()
            } else {
                gap
            }
        }
    }
}

fn power_log_det(s: Complex64, exponent: i64) -> LogDet {
    let e = exponent as f64;
    LogDet {
        log_abs: e * s.norm().ln(),
        phase: Complex64::from_polar(1.0, e * s.arg()),
    }
}

fn sign_log_det(negative: bool) -> LogDet {
    LogDet {
        log_abs: 0.0,
        phase: if negative { -ONE } else { ONE },
    }
}

/// `det(X)` in log form, `None` when singular.
fn small_log_det(x: &CMatrix) -> Option<LogDet> {
    linalg::log_det(x).ok()
}

/// Relative gap between `det(eps - H(s)) / det(B_1 ... B_n)` and
/// `(-1)^m s^{-m} det(T(eps) - s)`.
pub fn duality_residual(model: &BlockModel, eps: Complex64, s: Complex64) -> Result<f64> {
    let m = model.m();
    let t = transfer::build_transfer(model, eps)?;
    let bf = BoundaryFactor::from_corner(s, model.n());
    let left = match blockmodel::shifted_log_det(model, bf, eps) {
        Ok(d) => Some(d.mul(model.det_b_product().inv())),
        Err(Error::SingularShift { .. }) => None,
        Err(e) => return Err(e),
    };
    let right = small_log_det(&t.matrix.add_diagonal(-s))
        .map(|d| d.mul(power_log_det(s, -(m as i64))).mul(sign_log_det(m % 2 == 1)));
    Ok(relative_gap(left, right))
}

/// `min_a |lambda_a(T(eps)) - s| / (1 + |s|)`, using both `T` and `T^{-1}`.
pub fn eigenvalue_duality_gap(model: &BlockModel, eps: Complex64, s: Complex64) -> Result<f64> {
    let t = transfer::build_transfer(model, eps)?;
    let mut candidates = linalg::eigenvalues(&t.matrix).map_err(|f| Error::NoConvergence {
        rows: f.rows,
        cols: f.cols,
        iterations: 30 * f.rows,
    })?;
    if let Some(inv) = &t.inverse {
        if let Ok(ev) = linalg::eigenvalues(inv) {
            candidates.extend(ev.into_iter().filter(|z| z.norm() > 0.0).map(|z| z.inv()));
        }
    }
    let best = candidates.iter().map(|l| (l - s).norm()).fold(f64::INFINITY, f64::min);
    Ok(best / (1.0 + s.norm()))
}

/// Doubled operators built on a model with unitary `B_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubledModel {
    base: BlockModel,
}

impl DoubledModel {
    pub fn new(base: BlockModel) -> Result<Self> {
        if !base.b_n_unitary() {
            return Err(Error::NotUnitaryCorner);
        }
        Ok(DoubledModel { base })
    }

    pub fn base(&self) -> &BlockModel {
        &self.base
    }

    pub fn size(&self) -> usize {
        2 * self.base.dim()
    }

    /// Shared chain layout. `upper_diag(k)` and `lower_diag(k)` give the
    /// diagonal block for unit `k` on each chain; the fold couplings are
    /// `(n, n+1) = fold_up`, `(n+1, n) = fold_down`. Super-diagonal blocks are
    /// scaled by `y`, sub-diagonal ones by `1/y`.
    #[allow(clippy::too_many_arguments)]
    fn chain(
        &self,
        upper_diag: impl Fn(usize) -> CMatrix,
        lower_diag: impl Fn(usize) -> CMatrix,
        fold_up: Complex64,
        fold_down: Complex64,
        corner_tr: Complex64,
        corner_bl: Complex64,
        y: Complex64,
    ) -> BlockCyclic {
        let n = self.base.n();
        let m = self.base.m();
        let id = CMatrix::identity(m);
        let yi = y.inv();
        let mut diag = Vec::with_capacity(2 * n);
        let mut upper = Vec::with_capacity(2 * n - 1);
        let mut lower = Vec::with_capacity(2 * n - 1);
        for k in 0..n {
            diag.push(upper_diag(k));
        }
        for j in 0..n {
            diag.push(lower_diag(n - 1 - j));
        }
        for k in 0..n - 1 {
            upper.push(self.base.b(k).scale(y));
            lower.push(self.base.b(k).adjoint().scale(yi));
        }
        upper.push(id.scale(fold_up * y));
        lower.push(id.scale(fold_down * yi));
        // Lower chain block n+j couples to n+j+1 through B_{n-j}^dagger (one based).
        for j in 1..n {
            let b = self.base.b(n - 1 - j);
            upper.push(b.adjoint().scale(y));
            lower.push(b.scale(yi));
        }
        BlockCyclic::new(diag, upper, lower, id.scale(corner_tr), id.scale(corner_bl))
    }

    /// `M(eps, s)` in block form.
    pub fn m_blocks(&self, eps: Complex64, s: Complex64) -> BlockCyclic {
        let a = |k: usize| self.base.a(k).add_diagonal(-eps);
        let b = |k: usize| self.base.a(k).scale(-ONE).add_diagonal(eps);
        self.chain(a, b, ONE, ONE, s.inv(), s, ONE)
    }

    /// `K(t)` in block form.
    pub fn k_blocks(&self, t: Complex64) -> BlockCyclic {
        let a = |k: usize| self.base.a(k).clone();
        self.chain(a, a, -ONE, ONE, t.inv(), -t, ONE)
    }

    /// `K(t)` with `t = y^{2n}` conjugated by `diag(y^k)`: entries stay `O(|y|)`.
    pub fn k_balanced(&self, xi: f64, phi: f64) -> BlockCyclic {
        let y = Complex64::from_polar(xi.exp(), phi / self.size_blocks() as f64);
        let a = |k: usize| self.base.a(k).clone();
        self.chain(a, a, -ONE, ONE, y.inv(), -y, y)
    }

    fn size_blocks(&self) -> usize {
        2 * self.base.n()
    }

    /// `(1/2nm) log |det(K(e^{2n xi + i phi}) - eps)|`.
    pub fn k_log_abs_det_shifted(&self, xi: f64, phi: f64, eps: Complex64) -> Result<f64> {
        let d = self
            .k_balanced(xi, phi)
            .shifted(eps)
            .log_det()
            .map_err(|p| Error::SingularShift { eps, pivot: p.index })?;
        Ok(d.log_abs / self.size() as f64)
    }

    /// `J`: identity blocks along the block anti-diagonal.
    pub fn j_matrix(&self) -> CMatrix {
        let m = self.base.m();
        let nb = self.size_blocks();
        let mut j = CMatrix::zeros(self.size(), self.size());
        for b in 0..nb {
            j.set_block(b, nb - 1 - b, &CMatrix::identity(m));
        }
        j
    }

    /// `S3 = diag(I_{nm}, -I_{nm})`.
    pub fn s3_matrix(&self) -> CMatrix {
        let half = self.base.dim();
        let d: Vec<Complex64> = (0..2 * half).map(|i| if i < half { ONE } else { -ONE }).collect();
        CMatrix::from_diagonal(&d)
    }
}

/// Relative gap between `det M(eps, s) / prod_{k<n} |det B_k|^2` and
/// `(-1)^m s^{-m} det(Q(eps) - (-1)^n s)`.
pub fn m_duality_residual(doubled: &DoubledModel, eps: Complex64, s: Complex64) -> Result<f64> {
    let base = doubled.base();
    let q = transfer::build_q(base, eps)?;
    let left = doubled
        .m_blocks(eps, s)
        .log_det()
        .ok()
        .map(|d| d.mul(bond_norm(base).inv()));
    let sign = if base.n() % 2 == 0 { ONE } else { -ONE };
    let m = base.m();
    let right = small_log_det(&q.matrix.add_diagonal(-sign * s))
        .map(|d| d.mul(power_log_det(s, -(m as i64))).mul(sign_log_det(m % 2 == 1)));
    Ok(relative_gap(left, right))
}

/// Relative gap between `det(K(t) - eps) / prod |det B_k|^2` and
/// `(-1)^m t^{-m} det(Q(eps) - t)`.
pub fn k_duality_residual(doubled: &DoubledModel, eps: Complex64, t: Complex64) -> Result<f64> {
    let base = doubled.base();
    let q = transfer::build_q(base, eps)?;
    let left = doubled
        .k_blocks(t)
        .shifted(eps)
        .log_det()
        .ok()
        .map(|d| d.mul(bond_norm(base).inv()));
    let m = base.m();
    let right = small_log_det(&q.matrix.add_diagonal(-t))
        .map(|d| d.mul(power_log_det(t, -(m as i64))).mul(sign_log_det(m % 2 == 1)));
    Ok(relative_gap(left, right))
}

/// Relative gap between `det M(eps, s)` and `(-1)^{nm} det(K((-1)^n s) - eps)`.
pub fn m_k_residual(doubled: &DoubledModel, eps: Complex64, s: Complex64) -> Result<f64> {
    let base = doubled.base();
    let sign = if base.n() % 2 == 0 { ONE } else { -ONE };
    let left = doubled.m_blocks(eps, s).log_det().ok();
    let right = doubled
        .k_blocks(sign * s)
        .shifted(eps)
        .log_det()
        .ok()
        .map(|d| d.mul(sign_log_det((base.n() * base.m()) % 2 == 1)));
    Ok(relative_gap(left, right))
}

/// `prod_k |det B_k|^2` (all `n` bonds; `|det B_n| = 1` here).
fn bond_norm(base: &BlockModel) -> LogDet {
    LogDet {
        log_abs: 2.0 * base.log_abs_det_b().iter().sum::<f64>(),
        phase: ONE,
    }
}

/// Entrywise residuals of `J K(t) J = K(t*)^dagger` and
/// `S3 K(t) S3 = K(1/t*)^dagger`, plus the spectral distance of `K(t)` and `K(1/t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetryWitness {
    pub j_residual: f64,
    pub s3_residual: f64,
    pub spectral_distance: f64,
}

pub fn symmetry_residuals(doubled: &DoubledModel, t: Complex64) -> Result<SymmetryWitness> {
    let j = doubled.j_matrix();
    let s3 = doubled.s3_matrix();
    let k = doubled.k_blocks(t).to_dense();
    let j_residual = (&(&j * &k) * &j).max_diff(&doubled.k_blocks(t.conj()).to_dense().adjoint());
    let s3_residual = (&(&s3 * &k) * &s3).max_diff(&doubled.k_blocks(t.conj().inv()).to_dense().adjoint());
    let a = blockmodel::dense_eigenvalues(&k)?.eigenvalues;
    let b = blockmodel::dense_eigenvalues(&doubled.k_blocks(t.inv()).to_dense())?.eigenvalues;
    Ok(SymmetryWitness {
        j_residual,
        s3_residual,
        spectral_distance: linalg::multiset_distance(&a, &b),
    })
}

/// Entrywise residual of `S3 K(t) S3 = K(1/t*)` without the adjoint.
///
/// The fold and corner couplings change sign under `S3` but `K(1/t*)` keeps
/// them, so this is nonzero unless `t` is special; kept for comparison with
/// the form that includes the adjoint.
pub fn s3_plain_residual(doubled: &DoubledModel, t: Complex64) -> f64 {
    let s3 = doubled.s3_matrix();
    let k = doubled.k_blocks(t).to_dense();
    (&(&s3 * &k) * &s3).max_diff(&doubled.k_blocks(t.conj().inv()).to_dense())
}
