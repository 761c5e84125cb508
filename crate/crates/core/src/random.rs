//! Random block models for tests and verification sweeps.

use num_complex::Complex64;
use rand::Rng;

use crate::blockmodel::BlockModel;
use crate::linalg::{self, CMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BondKind {
    /// `B = I + 0.3 G` with complex Gaussian-ish `G`.
    Perturbed,
    /// Haar-like unitary bonds from QR of a random matrix.
    Unitary,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelShape {
    pub n: usize,
    pub m: usize,
    pub bonds: BondKind,
    /// Scale of the Hermitian diagonal blocks.
    pub onsite: f64,
    /// When true the corner bond is made unitary regardless of `bonds`.
    pub unitary_corner: bool,
}

impl ModelShape {
    pub fn new(n: usize, m: usize) -> Self {
        ModelShape {
            n,
            m,
            bonds: BondKind::Perturbed,
            onsite: 1.0,
            unitary_corner: false,
        }
    }

    pub fn bonds(mut self, bonds: BondKind) -> Self {
        self.bonds = bonds;
        self
    }

    pub fn onsite(mut self, onsite: f64) -> Self {
        self.onsite = onsite;
        self
    }

    pub fn unitary_corner(mut self) -> Self {
        self.unitary_corner = true;
        self
    }
}

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |_, _| random_complex(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, m: usize, scale: f64) -> CMatrix {
    let g = random_matrix(rng, m);
    let h = &g + &g.adjoint();
    let mut h = h.scale(Complex64::new(0.5 * scale, 0.0));
    for i in 0..m {
        h[(i, i)] = Complex64::new(h[(i, i)].re, 0.0);
    }
    h
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CMatrix {
    let (q, _) = linalg::qr(&random_matrix(rng, m));
    q
}

fn random_bond<R: Rng + ?Sized>(rng: &mut R, m: usize, kind: BondKind) -> CMatrix {
    match kind {
        BondKind::Perturbed => {
            let g = random_matrix(rng, m).scale(Complex64::new(0.3, 0.0));
            g.add_diagonal(Complex64::new(1.0, 0.0))
        }
        BondKind::Unitary => random_unitary(rng, m),
        BondKind::Identity => CMatrix::identity(m),
    }
}

pub fn random_model<R: Rng + ?Sized>(rng: &mut R, shape: ModelShape) -> BlockModel {
    let a = (0..shape.n)
        .map(|_| random_hermitian(rng, shape.m, shape.onsite))
        .collect();
    let mut b: Vec<CMatrix> = (0..shape.n).map(|_| random_bond(rng, shape.m, shape.bonds)).collect();
    if shape.unitary_corner && shape.bonds == BondKind::Perturbed {
        b[shape.n - 1] = random_unitary(rng, shape.m);
    }
    BlockModel::new(a, b).expect("random blocks are valid with probability one")
}
