//! Transfer matrices, their symplectic structure, and exponent extraction.
//!
//! `T(eps) = t_n ... t_1` propagates `(u_{k+1}, u_k)` along the chain. Small
//! eigenvalues of `T` are recovered from the explicitly accumulated inverse
//! product so both ends of the exponent spectrum keep full relative accuracy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::anderson::AndersonConfig;
use crate::blockmodel::BlockModel;
use crate::error::{Error, Result};
use crate::linalg::{self, block2x2, block_diag2, CMatrix, ONE, ZERO};

/// Largest accumulated log-norm a raw product may reach.
pub const OVERFLOW_LOG_LIMIT: f64 = 600.0;

const TINY_EIGENVALUE: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Transfer,
    Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferOperator {
    pub matrix: CMatrix,
    /// Inverse product, accumulated factor by factor when it is safe to do so.
    pub inverse: Option<CMatrix>,
    pub energy: Complex64,
    pub m: usize,
    pub n: usize,
    pub kind: OperatorKind,
}

impl TransferOperator {
    /// Number of chain units one eigenvalue of the operator spans.
    fn span(&self) -> f64 {
        match self.kind {
            OperatorKind::Transfer => self.n as f64,
            OperatorKind::Q => 2.0 * self.n as f64,
        }
    }
}

/// `[[B_k^{-1}(eps - A_k), -B_k^{-1} B_{k-1}^dagger], [I, 0]]`.
pub fn single_factor(a_k: &CMatrix, b_k: &CMatrix, b_prev: &CMatrix, eps: Complex64) -> Result<CMatrix> {
    let m = a_k.nrows();
    let lu = linalg::Lu::new(b_k).map_err(|_| Error::InvalidModel("singular bond".into()))?;
    let top_left = lu.solve(&a_k.scale(-ONE).add_diagonal(eps));
    let top_right = lu.solve(&b_prev.adjoint()).scale(-ONE);
    Ok(block2x2(
        &top_left,
        &top_right,
        &CMatrix::identity(m),
        &CMatrix::zeros(m, m),
    ))
}

/// `[[0, I], [-B_{k-1}^{-dagger} B_k, B_{k-1}^{-dagger}(eps - A_k)]]`.
fn single_factor_inverse(a_k: &CMatrix, b_k: &CMatrix, b_prev: &CMatrix, eps: Complex64) -> Result<CMatrix> {
    let m = a_k.nrows();
    let lu = linalg::Lu::new(&b_prev.adjoint()).map_err(|_| Error::InvalidModel("singular bond".into()))?;
    let bottom_left = lu.solve(b_k).scale(-ONE);
    let bottom_right = lu.solve(&a_k.scale(-ONE).add_diagonal(eps));
    Ok(block2x2(
        &CMatrix::zeros(m, m),
        &CMatrix::identity(m),
        &bottom_left,
        &bottom_right,
    ))
}

fn log_norm(x: &CMatrix) -> f64 {
    x.norm_inf().max(f64::MIN_POSITIVE).ln()
}

fn guard(n: usize, factors: &[CMatrix], multiplier: f64) -> Result<()> {
    let worst = factors.iter().map(log_norm).fold(f64::NEG_INFINITY, f64::max);
    let total = multiplier * n as f64 * worst.max(0.0);
    if total >= OVERFLOW_LOG_LIMIT {
        return Err(Error::OverflowRisk {
            log_norm: total,
            limit: OVERFLOW_LOG_LIMIT,
        });
    }
    Ok(())
}

fn factors(model: &BlockModel, eps: Complex64) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    let n = model.n();
    let mut fwd = Vec::with_capacity(n);
    let mut inv = Vec::with_capacity(n);
    for k in 1..=n {
        let (a, b, bp) = (model.a(k - 1), model.bond(k), model.bond(k - 1));
        fwd.push(single_factor(a, b, bp, eps)?);
        inv.push(single_factor_inverse(a, b, bp, eps)?);
    }
    Ok((fwd, inv))
}

/// Returns `(T, T^{-1})` with the inverse dropped if it would overflow.
fn products(model: &BlockModel, eps: Complex64, multiplier: f64) -> Result<(CMatrix, Option<CMatrix>)> {
    let (fwd, inv) = factors(model, eps)?;
    guard(model.n(), &fwd, multiplier)?;
    let mut t = CMatrix::identity(2 * model.m());
    for f in &fwd {
        t = f * &t;
    }
    let t_inv = guard(model.n(), &inv, multiplier).ok().map(|_| {
        let mut acc = CMatrix::identity(2 * model.m());
        for f in &inv {
            acc = &acc * f;
        }
        acc
    });
    Ok((t, t_inv))
}

/// `T(eps) = t_n ... t_1`.
pub fn build_transfer(model: &BlockModel, eps: Complex64) -> Result<TransferOperator> {
    let (matrix, inverse) = products(model, eps, 1.0)?;
    Ok(TransferOperator {
        matrix,
        inverse,
        energy: eps,
        m: model.m(),
        n: model.n(),
        kind: OperatorKind::Transfer,
    })
}

/// `Sigma_n = [[0, -B_n^dagger], [B_n, 0]]` and its inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticForm {
    pub matrix: CMatrix,
    pub inverse: CMatrix,
}

impl SymplecticForm {
    pub fn new(model: &BlockModel) -> Self {
        let m = model.m();
        let bn = model.b(model.n() - 1);
        let zero = CMatrix::zeros(m, m);
        let bn_inv = linalg::inverse(bn).expect("bonds are invertible");
        let matrix = block2x2(&zero, &bn.adjoint().scale(-ONE), bn, &zero);
        let inverse = block2x2(&zero, &bn_inv, &bn_inv.adjoint().scale(-ONE), &zero);
        SymplecticForm { matrix, inverse }
    }
}

/// `(|T(eps*)^dagger S T(eps) - S|_max, |T(eps) S^{-1} T(eps*)^dagger - S^{-1}|_max)`.
pub fn symplectic_residuals(model: &BlockModel, t: &TransferOperator, form: &SymplecticForm) -> Result<(f64, f64)> {
    let t_conj = build_transfer(model, t.energy.conj())?;
    let tc_dag = t_conj.matrix.adjoint();
    let first = (&(&tc_dag * &form.matrix) * &t.matrix).max_diff(&form.matrix);
    let second = (&(&t.matrix * &form.inverse) * &tc_dag).max_diff(&form.inverse);
    Ok((first, second))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentKind {
    TExponents,
    QExponents,
    LyapunovOracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSpectrum {
    /// Ascending, per unit of chain length.
    pub values: Vec<f64>,
    pub kind: ExponentKind,
    pub energy: Complex64,
}

impl ExponentSpectrum {
    fn sorted(mut values: Vec<f64>, kind: ExponentKind, energy: Complex64) -> Self {
        values.sort_by(f64::total_cmp);
        ExponentSpectrum { values, kind, energy }
    }

    /// Strictly positive values, ascending.
    pub fn positive(&self) -> Vec<f64> {
        self.values.iter().copied().filter(|&x| x > 0.0).collect()
    }

    /// The upper half of the sorted spectrum (the `m` largest values).
    pub fn upper_half(&self) -> &[f64] {
        &self.values[self.values.len() / 2..]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `max_i |x_i + x_{2m-1-i}|`: zero when the spectrum is symmetric under negation.
    pub fn pairing_defect(&self) -> f64 {
        let v = &self.values;
        (0..v.len())
            .map(|i| (v[i] + v[v.len() - 1 - i]).abs())
            .fold(0.0, f64::max)
    }
}

fn moduli_desc(ev: Vec<Complex64>) -> Vec<f64> {
    let mut r: Vec<f64> = ev.into_iter().map(|z| z.norm()).collect();
    r.sort_by(|a, b| b.total_cmp(a));
    r
}

fn eig(x: &CMatrix) -> Result<Vec<Complex64>> {
    linalg::eigenvalues(x).map_err(|f| Error::NoConvergence {
        rows: f.rows,
        cols: f.cols,
        iterations: 30 * f.rows,
    })
}

/// Exponents `(1/n) log |lambda_a|` of `T` (or `(1/2n) log |q_a|` of `Q`).
pub fn exponents_direct(t: &TransferOperator) -> Result<ExponentSpectrum> {
    let dim = t.matrix.nrows();
    let big = moduli_desc(eig(&t.matrix)?);
    let span = t.span();
    let kind = match t.kind {
        OperatorKind::Transfer => ExponentKind::TExponents,
        OperatorKind::Q => ExponentKind::QExponents,
    };
    let values = match &t.inverse {
        Some(inv) => {
            // The i-th largest eigenvalue of T pairs with the i-th smallest of
            // T^{-1}; keep whichever estimate has the smaller relative error bound.
            let mut small = moduli_desc(eig(inv)?);
            small.reverse();
            let (norm, norm_inv) = (t.matrix.frobenius(), inv.frobenius());
            (0..dim)
                .map(|i| {
                    let (fwd, bwd) = (big[i], small[i]);
                    if fwd > 0.0 && norm / fwd <= norm_inv / bwd {
                        fwd.ln() / span
                    } else {
                        -bwd.ln() / span
                    }
                })
                .collect()
        }
        None => {
            if big.iter().any(|&r| r < TINY_EIGENVALUE) {
                return Err(Error::ZeroEigenvalue);
            }
            big.iter().map(|r| r.ln() / span).collect()
        }
    };
    Ok(ExponentSpectrum::sorted(values, kind, t.energy))
}

/// `Q(eps) = T(eps*)^dagger T(eps)`.
///
/// With non-trivial bonds `Q` is assembled from the factored form
/// `(-1)^n diag(I, B_n) theta diag(I, B_n^dagger)`; see [`theta`].
pub fn build_q(model: &BlockModel, eps: Complex64) -> Result<TransferOperator> {
    if !model.b_n_unitary() {
        return Err(Error::NotUnitaryCorner);
    }
    let (matrix, inverse) = if model.has_identity_bonds() {
        let (t, t_inv) = products(model, eps, 2.0)?;
        let (tc, tc_inv) = products(model, eps.conj(), 2.0)?;
        let q = &tc.adjoint() * &t;
        let q_inv = match (t_inv, tc_inv) {
            (Some(a), Some(b)) => Some(&a * &b.adjoint()),
            _ => None,
        };
        (q, q_inv)
    } else {
        let (th, th_inv) = theta_pair(model, eps)?;
        let m = model.m();
        let bn = model.b(model.n() - 1);
        let left = block_diag2(&CMatrix::identity(m), bn);
        let right = block_diag2(&CMatrix::identity(m), &bn.adjoint());
        let sign = if model.n() % 2 == 0 { ONE } else { -ONE };
        let q = (&(&left * &th) * &right).scale(sign);
        // Conjugating diagonals are unitary: inverse is the mirrored product.
        let q_inv = th_inv.map(|ti| (&(&left * &ti) * &right).scale(sign));
        (q, q_inv)
    };
    Ok(TransferOperator {
        matrix,
        inverse,
        energy: eps,
        m: model.m(),
        n: model.n(),
        kind: OperatorKind::Q,
    })
}

/// `theta(eps) = u_1 s_1^dagger ... s_{n-1}^dagger u_n t_n s_{n-1} ... s_1 t_1`
/// with `t_k = [[eps - A_k, -I], [I, 0]]`, `u_k = [[A_k - eps, -I], [I, 0]]`
/// and `s_k = diag(B_k^{-1}, B_k^dagger)`.
pub fn theta(model: &BlockModel, eps: Complex64) -> Result<CMatrix> {
    Ok(theta_pair(model, eps)?.0)
}

fn theta_pair(model: &BlockModel, eps: Complex64) -> Result<(CMatrix, Option<CMatrix>)> {
    let n = model.n();
    let m = model.m();
    let id = CMatrix::identity(m);
    let zero = CMatrix::zeros(m, m);
    let t_of = |k: usize, sign: f64| {
        let d = model.a(k).scale(Complex64::new(-sign, 0.0)).add_diagonal(eps * sign);
        block2x2(&d, &id.scale(-ONE), &id, &zero)
    };
    let sigma = |k: usize| {
        let bk = model.b(k);
        block_diag2(&linalg::inverse(bk).expect("bonds are invertible"), &bk.adjoint())
    };
    // Rightmost first: t_1, s_1, t_2, ..., t_n, u_n, s_{n-1}^dagger, ..., u_1.
    let mut seq = Vec::with_capacity(4 * n);
    for k in 0..n {
        if k > 0 {
            seq.push(sigma(k - 1));
        }
        seq.push(t_of(k, 1.0));
    }
    for k in (0..n).rev() {
        seq.push(t_of(k, -1.0));
        if k > 0 {
            seq.push(sigma(k - 1).adjoint());
        }
    }
    let worst = seq.iter().map(log_norm).fold(0.0, f64::max);
    if worst * seq.len() as f64 >= OVERFLOW_LOG_LIMIT {
        return Err(Error::OverflowRisk {
            log_norm: worst * seq.len() as f64,
            limit: OVERFLOW_LOG_LIMIT,
        });
    }
    let mut th = CMatrix::identity(2 * m);
    for f in &seq {
        th = f * &th;
    }
    let inv_seq: Vec<CMatrix> = seq
        .iter()
        .map(|f| linalg::inverse(f).expect("factors are invertible"))
        .collect();
    let inv_worst = inv_seq.iter().map(log_norm).fold(0.0, f64::max);
    let th_inv = (inv_worst * (inv_seq.len() as f64) < OVERFLOW_LOG_LIMIT).then(|| {
        let mut acc = CMatrix::identity(2 * m);
        for f in &inv_seq {
            acc = &acc * f;
        }
        acc
    });
    Ok((th, th_inv))
}

/// Options for the QR-reorthogonalized Lyapunov oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    /// Factors between reorthogonalizations.
    pub reorth_period: usize,
    /// Leading factors applied but not counted.
    pub warmup: usize,
    /// Work limit in factor-applications times `(2m)^3`.
    pub budget: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            reorth_period: 8,
            warmup: 256,
            budget: 200_000_000_000,
        }
    }
}

/// Lyapunov exponents of the infinite disordered strip by QR reorthogonalization.
///
/// Slices are generated on the fly from `config` (slice index `j` uses the
/// same counter-based disorder as [`crate::anderson::build_anderson`]), so
/// `total_length` is independent of the configured chain length.
pub fn lyapunov_oracle(
    config: &AndersonConfig,
    eps: f64,
    total_length: usize,
    options: OracleOptions,
) -> Result<ExponentSpectrum> {
    let m = config.m();
    let dim = 2 * m;
    let steps = (options.warmup + total_length) as u64;
    let requested = steps.saturating_mul((dim * dim * dim) as u64);
    if requested > options.budget {
        return Err(Error::BudgetExceeded {
            requested,
            budget: options.budget,
        });
    }
    if total_length == 0 || options.reorth_period == 0 {
        return Err(Error::InvalidConfig(
            "oracle length and reorth period must be positive".into(),
        ));
    }
    let transverse = config.transverse_hopping()?;
    let mut basis = CMatrix::identity(dim);
    let mut sums = vec![0.0; dim];
    let mut pending = 0;
    let eps_c = Complex64::new(eps, 0.0);
    for j in 0..options.warmup + total_length {
        let potentials = config.slice_potentials(j);
        // Apply [[eps - A_j, -I], [I, 0]] in place.
        let mut next = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            for i in 0..m {
                let mut acc = (eps_c - potentials[i]) * basis[(i, col)] - basis[(m + i, col)];
                for (t, h) in transverse.row(i).iter().enumerate() {
                    if *h != ZERO {
                        acc -= h * basis[(t, col)];
                    }
                }
                next[(i, col)] = acc;
                next[(m + i, col)] = basis[(i, col)];
            }
        }
        basis = next;
        pending += 1;
        let last = j + 1 == options.warmup + total_length;
        if pending == options.reorth_period || basis.max_abs() > 1e12 || last || j + 1 == options.warmup {
            let (q, r) = linalg::qr(&basis);
            if j >= options.warmup {
                for (s, d) in sums.iter_mut().zip(&r) {
                    *s += d.norm().ln();
                }
            }
            basis = q;
            pending = 0;
        }
    }
    let values = sums.into_iter().map(|s| s / total_length as f64).collect();
    Ok(ExponentSpectrum::sorted(values, ExponentKind::LyapunovOracle, eps_c))
}

/// Closed-form data for the disorder-free strip at real energy.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroDisorderClosedForm {
    pub lambdas: Vec<f64>,
    pub energy: f64,
}

impl ZeroDisorderClosedForm {
    pub fn new(lambdas: Vec<f64>, energy: f64) -> Self {
        ZeroDisorderClosedForm { lambdas, energy }
    }

    /// Root `z_k` of `z^2 - (eps - lambda_k) z + 1 = 0` with `|z_k| >= 1`.
    pub fn root(&self, k: usize) -> Complex64 {
        let c = Complex64::new(self.energy - self.lambdas[k], 0.0);
        let disc = (c * c - 4.0).sqrt();
        let z1 = (c + disc) / 2.0;
        let z2 = (c - disc) / 2.0;
        if z1.norm() >= z2.norm() {
            z1
        } else {
            z2
        }
    }

    /// `log |z_k|` per channel, the exact `T` exponents.
    pub fn t_exponents(&self) -> Vec<f64> {
        (0..self.lambdas.len()).map(|k| self.root(k).norm().ln()).collect()
    }
}

/// `(1/2n) log w_k` from `w_k + 1/w_k = (z^{2n} + z^{-2n}) ((z^2+1)/(z^2-1))^2 - 8 z^2/(z^2-1)^2`.
///
/// Returns all `2m` values `+-` per channel, ascending.
pub fn zero_disorder_q_exponents(cf: &ZeroDisorderClosedForm, n: usize) -> Result<ExponentSpectrum> {
    let mut values = Vec::with_capacity(2 * cf.lambdas.len());
    for k in 0..cf.lambdas.len() {
        let z = cf.root(k);
        let z2 = z * z;
        if (z2 - 1.0).norm() < 1e-8 {
            return Err(Error::BandEdge { channel: k });
        }
        let ratio = (z2 + 1.0) / (z2 - 1.0);
        let z2n = z2.powi(n as i32);
        let s = (z2n + z2n.inv()) * ratio * ratio - z2 * 8.0 / ((z2 - 1.0) * (z2 - 1.0));
        let s = s.re.max(2.0);
        let w = 0.5 * (s + (s * s - 4.0).sqrt());
        let g = w.ln() / (2.0 * n as f64);
        values.push(g);
        values.push(-g);
    }
    Ok(ExponentSpectrum::sorted(
        values,
        ExponentKind::QExponents,
        Complex64::new(cf.energy, 0.0),
    ))
}
