//! Block tridiagonal Hamiltonians with corners and their non-Hermitian
//! boundary-condition realizations.
//!
//! A [`BlockModel`] holds Hermitian diagonal blocks `A_1..A_n` and invertible
//! bonds `B_1..B_n`; `B_n` is the ring-closing bond. A [`BoundaryFactor`]
//! `(xi, phi)` twists the seam by `s = exp(n xi + i phi)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cyclic::BlockCyclic;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, LogDet, ONE};

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct BlockModel {
    a: Vec<CMatrix>,
    b: Vec<CMatrix>,
    m: usize,
    b_n_unitary: bool,
    log_abs_det_b: Vec<f64>,
    det_b_product: LogDet,
}

impl BlockModel {
    /// `a[k]` and `b[k]` are `A_{k+1}` and `B_{k+1}`; `b[n-1]` closes the ring.
    pub fn new(a: Vec<CMatrix>, b: Vec<CMatrix>) -> Result<Self> {
        let n = a.len();
        if n < 3 {
            return Err(Error::InvalidModel(format!("need at least 3 units, got {n}")));
        }
        if b.len() != n {
            return Err(Error::InvalidModel(format!(
                "{n} diagonal blocks but {} bonds",
                b.len()
            )));
        }
        let m = a[0].nrows();
        if m == 0 {
            return Err(Error::InvalidModel("block size must be positive".into()));
        }
        for (k, blk) in a.iter().chain(&b).enumerate() {
            if blk.nrows() != m || blk.ncols() != m {
                return Err(Error::InvalidModel(format!("block {k} is not {m}x{m}")));
            }
            if !blk.is_finite() {
                return Err(Error::InvalidModel(format!("block {k} has non-finite entries")));
            }
        }
        for (k, ak) in a.iter().enumerate() {
            let scale = ak.max_abs().max(1.0);
            if ak.hermitian_defect() > HERMITIAN_TOL * scale {
                return Err(Error::InvalidModel(format!("A_{} is not Hermitian", k + 1)));
            }
        }
        let mut log_abs_det_b = Vec::with_capacity(n);
        let mut det_b_product = LogDet {
            log_abs: 0.0,
            phase: ONE,
        };
        for (k, bk) in b.iter().enumerate() {
            let d = linalg::log_det(bk).map_err(|_| Error::InvalidModel(format!("B_{} is singular", k + 1)))?;
            log_abs_det_b.push(d.log_abs);
            det_b_product = det_b_product.mul(d);
        }
        let bn = &b[n - 1];
        let b_n_unitary = (bn * &bn.adjoint()).max_diff(&CMatrix::identity(m)) < UNITARY_TOL;
        Ok(BlockModel {
            a,
            b,
            m,
            b_n_unitary,
            log_abs_det_b,
            det_b_product,
        })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Matrix dimension `n m`.
    pub fn dim(&self) -> usize {
        self.n() * self.m
    }

    /// `A_{k+1}` (zero based).
    pub fn a(&self, k: usize) -> &CMatrix {
        &self.a[k]
    }

    /// `B_{k+1}` (zero based); `b(n-1)` is the corner bond.
    pub fn b(&self, k: usize) -> &CMatrix {
        &self.b[k]
    }

    /// `B_k` with the cyclic convention `B_0 = B_n`, one based.
    pub(crate) fn bond(&self, k: usize) -> &CMatrix {
        if k == 0 {
            &self.b[self.n() - 1]
        } else {
            &self.b[k - 1]
        }
    }

    pub fn b_n_unitary(&self) -> bool {
        self.b_n_unitary
    }

    /// `log |det B_k|` for `k = 1..n`.
    pub fn log_abs_det_b(&self) -> &[f64] {
        &self.log_abs_det_b
    }

    /// `det(B_1 ... B_n)` in log form.
    pub fn det_b_product(&self) -> LogDet {
        self.det_b_product
    }

    /// True when every bond is the identity (Anderson-type hopping).
    pub fn has_identity_bonds(&self) -> bool {
        let id = CMatrix::identity(self.m);
        self.b.iter().all(|bk| bk.max_diff(&id) == 0.0)
    }

    fn cyclic(&self, up: Complex64, down: Complex64, corner_tr: Complex64, corner_bl: Complex64) -> BlockCyclic {
        let n = self.n();
        BlockCyclic::new(
            self.a.clone(),
            (0..n - 1).map(|k| self.b[k].scale(up)).collect(),
            (0..n - 1).map(|k| self.b[k].adjoint().scale(down)).collect(),
            self.b[n - 1].adjoint().scale(corner_tr),
            self.b[n - 1].scale(corner_bl),
        )
    }

    /// `H(s)` in block form with corner multiplier `s`.
    pub fn plain_blocks(&self, s: Complex64) -> BlockCyclic {
        self.cyclic(ONE, ONE, s.inv(), s)
    }

    /// Balanced `H_b(z)` in block form.
    pub fn balanced_blocks(&self, bf: BoundaryFactor) -> BlockCyclic {
        let z = bf.per_bond(self.n());
        let zi = z.inv();
        self.cyclic(z, zi, zi, z)
    }
}

/// Seam twist `s = exp(n xi + i phi)`; `xi` is per unit of chain length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFactor {
    pub xi: f64,
    /// Corner phase, kept in `[0, 2 pi)`.
    pub phi: f64,
}

impl BoundaryFactor {
    pub fn new(xi: f64, phi: f64) -> Self {
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        BoundaryFactor { xi, phi }
    }

    /// Pure Bloch phase.
    pub fn bloch(phi: f64) -> Self {
        Self::new(0.0, phi)
    }

    /// `s = z^n`.
    pub fn corner_multiplier(&self, n: usize) -> Complex64 {
        Complex64::from_polar((n as f64 * self.xi).exp(), self.phi)
    }

    /// `z = exp(xi + i phi / n)`.
    pub fn per_bond(&self, n: usize) -> Complex64 {
        Complex64::from_polar(self.xi.exp(), self.phi / n as f64)
    }

    /// Factor for a given corner multiplier (principal `n`-th root).
    pub fn from_corner(s: Complex64, n: usize) -> Self {
        assert!(s.norm() > 0.0, "corner multiplier must be nonzero");
        Self::new(s.norm().ln() / n as f64, s.arg())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Plain,
    Balanced,
    Other,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseSpectrum {
    pub eigenvalues: Vec<Complex64>,
    pub source: SpectrumSource,
}

impl DenseSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

/// Dense `H(z^n)`: corner `(1,n)` is `s^{-1} B_n^dagger`, corner `(n,1)` is `s B_n`.
pub fn realize_h(model: &BlockModel, bf: BoundaryFactor) -> CMatrix {
    model.plain_blocks(bf.corner_multiplier(model.n())).to_dense()
}

/// Dense balanced form `Z^{-1} H(z^n) Z`.
pub fn realize_h_balanced(model: &BlockModel, bf: BoundaryFactor) -> CMatrix {
    model.balanced_blocks(bf).to_dense()
}

/// `(1/nm) log |det(eps I - H_b(z))|` without ever forming the determinant.
pub fn log_abs_det_shifted(model: &BlockModel, bf: BoundaryFactor, eps: Complex64) -> Result<f64> {
    let d = shifted_log_det(model, bf, eps)?;
    Ok(d.log_abs / model.dim() as f64)
}

/// Full log-form of `det(eps I - H(z^n))` (phase included).
pub fn shifted_log_det(model: &BlockModel, bf: BoundaryFactor, eps: Complex64) -> Result<LogDet> {
    model
        .balanced_blocks(bf)
        .shifted_negation(eps)
        .log_det()
        .map_err(|p| Error::SingularShift { eps, pivot: p.index })
}

pub fn dense_eigenvalues(matrix: &CMatrix) -> Result<DenseSpectrum> {
    eigenvalues_tagged(matrix, SpectrumSource::Other)
}

pub(crate) fn eigenvalues_tagged(matrix: &CMatrix, source: SpectrumSource) -> Result<DenseSpectrum> {
    let scale = matrix.max_abs().max(f64::MIN_POSITIVE);
    let eigenvalues = if matrix.hermitian_defect() <= 1e-14 * scale {
        linalg::hermitian_eigenvalues(matrix).map(|v| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
    } else {
        linalg::eigenvalues(matrix)
    }
    .map_err(|f| Error::NoConvergence {
        rows: f.rows,
        cols: f.cols,
        iterations: 30 * f.rows.max(1),
    })?;
    Ok(DenseSpectrum { eigenvalues, source })
}

/// Spectrum of `H(z^n)` computed from the balanced realization.
pub fn spectrum(model: &BlockModel, bf: BoundaryFactor) -> Result<DenseSpectrum> {
    eigenvalues_tagged(&realize_h_balanced(model, bf), SpectrumSource::Balanced)
}

/// Spectrum of `H(z^n)` computed from the plain realization.
pub fn spectrum_plain(model: &BlockModel, bf: BoundaryFactor) -> Result<DenseSpectrum> {
    eigenvalues_tagged(&realize_h(model, bf), SpectrumSource::Plain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::multiset_distance;
    use crate::random::{random_model, ModelShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ring(n: usize) -> BlockModel {
        BlockModel::new(
            (0..n).map(|_| CMatrix::zeros(1, 1)).collect(),
            (0..n).map(|_| CMatrix::identity(1)).collect(),
        )
        .unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_short_chains_and_bad_blocks() {
        let one = || CMatrix::identity(1);
        assert!(BlockModel::new(vec![one(), one()], vec![one(), one()]).is_err());
        let nonherm = CMatrix::from_fn(2, 2, |i, j| c((i + 2 * j) as f64, 0.0));
        let id2 = CMatrix::identity(2);
        assert!(BlockModel::new(vec![nonherm, id2.clone(), id2.clone()], vec![id2.clone(); 3]).is_err());
        let singular = CMatrix::zeros(2, 2);
        assert!(BlockModel::new(vec![id2.clone(); 3], vec![id2.clone(), singular, id2]).is_err());
    }

    #[test]
    fn three_ring_spectrum() {
        let model = ring(3);
        let h = realize_h(&model, BoundaryFactor::new(0.0, 0.0));
        let ev = dense_eigenvalues(&h).unwrap().eigenvalues;
        let expect = [c(2.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)];
        assert!(multiset_distance(&ev, &expect) < 1e-12);
    }

    #[test]
    fn bloch_realization_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = random_model(&mut rng, ModelShape::new(5, 2));
        for phi in [0.0, 0.4, 2.9, 6.0] {
            let h = realize_h(&model, BoundaryFactor::bloch(phi));
            assert!(h.hermitian_defect() < 1e-12);
        }
    }

    #[test]
    fn balanced_equals_plain_at_unit_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = random_model(&mut rng, ModelShape::new(4, 3));
        let bf = BoundaryFactor::new(0.0, 0.0);
        assert_eq!(realize_h(&model, bf), realize_h_balanced(&model, bf));
    }

    #[test]
    fn balanced_form_keeps_entries_small() {
        let model = ring(3);
        let bf = BoundaryFactor::new(2.0, 0.0);
        let plain = realize_h(&model, bf);
        let balanced = realize_h_balanced(&model, bf);
        assert!((balanced.max_abs() - 2f64.exp()).abs() < 1e-12);
        assert!((plain.max_abs() - 6f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn similar_realizations_share_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = random_model(&mut rng, ModelShape::new(4, 2));
        let bf = BoundaryFactor::new(0.3, 0.7);
        let a = spectrum(&model, bf).unwrap();
        let b = spectrum_plain(&model, bf).unwrap();
        assert!(multiset_distance(&a.eigenvalues, &b.eigenvalues) < 1e-8);
    }

    #[test]
    fn bond_phase_shift_changes_matrix_not_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = random_model(&mut rng, ModelShape::new(5, 2));
        let n = model.n() as f64;
        let bf = BoundaryFactor::new(0.4, 0.3);
        // arg z + 2 pi / n  <=>  phi + 2 pi, which wraps; build the shifted z directly.
        let z = bf.per_bond(model.n()) * Complex64::from_polar(1.0, TAU / n);
        let zi = z.inv();
        let nb = model.n();
        let shifted = BlockCyclic::new(
            (0..nb).map(|k| model.a(k).clone()).collect(),
            (0..nb - 1).map(|k| model.b(k).scale(z)).collect(),
            (0..nb - 1).map(|k| model.b(k).adjoint().scale(zi)).collect(),
            model.b(nb - 1).adjoint().scale(zi),
            model.b(nb - 1).scale(z),
        )
        .to_dense();
        let base = realize_h_balanced(&model, bf);
        assert!(shifted.max_diff(&base) > 1e-3);
        let ev_a = dense_eigenvalues(&shifted).unwrap().eigenvalues;
        let ev_b = dense_eigenvalues(&base).unwrap().eigenvalues;
        assert!(multiset_distance(&ev_a, &ev_b) < 1e-9);
    }

    #[test]
    fn log_det_for_large_energy() {
        let model = BlockModel::new(vec![CMatrix::zeros(2, 2); 4], vec![CMatrix::identity(2); 4]).unwrap();
        let eps = c(1e6, 0.0);
        let v = log_abs_det_shifted(&model, BoundaryFactor::new(0.5, 0.2), eps).unwrap();
        assert!((v - 1e6f64.ln()).abs() < 1e-5 * 1e6f64.ln());
    }

    #[test]
    fn log_det_at_exact_eigenvalue_is_singular() {
        let model = ring(3);
        let err = log_abs_det_shifted(&model, BoundaryFactor::new(0.0, 0.0), c(2.0, 0.0));
        assert!(matches!(err, Err(Error::SingularShift { .. })));
    }

    #[test]
    fn log_det_matches_eigenvalue_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (n, m) in [(3, 1), (4, 2), (6, 3), (8, 3), (12, 2)] {
            let model = random_model(&mut rng, ModelShape::new(n, m));
            let bf = BoundaryFactor::new(0.37, 1.1);
            let eps = c(0.3, -0.45);
            let ev = spectrum(&model, bf).unwrap().eigenvalues;
            let from_eigs: f64 = ev.iter().map(|l| (eps - l).norm().ln()).sum::<f64>() / model.dim() as f64;
            let from_lu = log_abs_det_shifted(&model, bf, eps).unwrap();
            assert!(
                (from_eigs - from_lu).abs() < 1e-8,
                "n={n} m={m}: {from_eigs} vs {from_lu}"
            );
        }
    }

    #[test]
    fn hermitian_input_gives_real_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = random_model(&mut rng, ModelShape::new(6, 2));
        let s = spectrum(&model, BoundaryFactor::bloch(1.3)).unwrap();
        let radius = s.spectral_radius();
        assert!(s.eigenvalues.iter().all(|z| z.im.abs() < 1e-9 * radius));
    }
}
