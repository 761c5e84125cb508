//! Anderson Hamiltonians on hypercubic lattices and the one-dimensional
//! Hatano-Nelson toolkit.
//!
//! The last lattice direction is the chain direction (`n = dims[D-1]`); the
//! remaining directions form the transverse cross-section of `m` sites with
//! periodic boundary conditions. Disorder is counter based: the potential on
//! site `slice * m + i` depends only on the seed and that index.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockmodel::{self, BlockModel, BoundaryFactor, DenseSpectrum};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Disorder {
    /// Uniform on `[-w/2, w/2]`.
    Uniform { w: f64 },
    /// Cauchy (Lorentzian) with half-width `delta`.
    Cauchy { delta: f64 },
}

impl Disorder {
    /// Maps a uniform variate in `[0, 1)` to a potential value.
    fn sample(&self, u: f64) -> f64 {
        match *self {
            Disorder::Uniform { w } => w * (u - 0.5),
            Disorder::Cauchy { delta } => delta * (PI * (u - 0.5)).tan(),
        }
    }

    /// Uniform width, or zero for Cauchy.
    pub fn width(&self) -> f64 {
        match *self {
            Disorder::Uniform { w } => w,
            Disorder::Cauchy { .. } => 0.0,
        }
    }

    pub fn is_clean(&self) -> bool {
        matches!(*self, Disorder::Uniform { w } if w == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AndersonConfig {
    /// Lattice lengths `n_1 .. n_D`; the last entry is the chain length.
    pub dims: Vec<usize>,
    pub disorder: Disorder,
    pub seed: u64,
}

impl AndersonConfig {
    pub fn new(dims: Vec<usize>, disorder: Disorder, seed: u64) -> Self {
        AndersonConfig { dims, disorder, seed }
    }

    pub fn one_dimensional(n: usize, w: f64, seed: u64) -> Self {
        Self::new(vec![n], Disorder::Uniform { w }, seed)
    }

    /// Strip of width `m` and length `n`.
    pub fn strip(m: usize, n: usize, w: f64, seed: u64) -> Self {
        Self::new(vec![m, n], Disorder::Uniform { w }, seed)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        AndersonConfig { seed, ..self.clone() }
    }

    pub fn dimension(&self) -> usize {
        self.dims.len()
    }

    pub fn n(&self) -> usize {
        *self.dims.last().unwrap_or(&0)
    }

    pub fn m(&self) -> usize {
        self.dims[..self.dims.len().saturating_sub(1)].iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if self.dims.iter().any(|&x| x == 0) {
            return Err(Error::InvalidConfig("lattice lengths must be positive".into()));
        }
        match self.disorder {
            Disorder::Uniform { w } if !(w >= 0.0 && w.is_finite()) => Err(Error::InvalidConfig(format!(
                "disorder width must be finite and >= 0, got {w}"
            ))),
            Disorder::Cauchy { delta } if !(delta > 0.0 && delta.is_finite()) => Err(Error::InvalidConfig(format!(
                "Cauchy half-width must be > 0, got {delta}"
            ))),
            _ => Ok(()),
        }
    }

    /// Potential on a global site index.
    pub fn site_potential(&self, site: usize) -> f64 {
        if self.disorder.is_clean() {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_word_pos(2 * site as u128);
        self.disorder.sample(rng.random::<f64>())
    }

    /// Potentials of the `m` sites in slice `j` (any `j`, not only `j < n`).
    pub fn slice_potentials(&self, j: usize) -> Vec<f64> {
        let m = self.m();
        (0..m).map(|i| self.site_potential(j * m + i)).collect()
    }

    /// Periodic adjacency of the transverse cross-section.
    pub fn transverse_hopping(&self) -> Result<CMatrix> {
        self.validate()?;
        let trans = &self.dims[..self.dims.len() - 1];
        let m = self.m();
        let mut h = CMatrix::zeros(m, m);
        let strides: Vec<usize> = trans
            .iter()
            .scan(1, |acc, &len| {
                let s = *acc;
                *acc *= len;
                Some(s)
            })
            .collect();
        for site in 0..m {
            for (axis, &len) in trans.iter().enumerate() {
                let coord = (site / strides[axis]) % len;
                for step in [1, len - 1] {
                    let other = site - coord * strides[axis] + ((coord + step) % len) * strides[axis];
                    h[(site, other)] += Complex64::new(1.0, 0.0);
                }
            }
        }
        Ok(h)
    }

    /// Eigenvalues `2 sum_i cos(2 pi k_i / n_i)` of the transverse adjacency.
    pub fn transverse_levels(&self) -> Vec<f64> {
        let trans = &self.dims[..self.dims.len().saturating_sub(1)];
        let mut levels = vec![0.0];
        for &len in trans {
            levels = levels
                .iter()
                .flat_map(|base| (0..len).map(move |k| base + 2.0 * (TAU * k as f64 / len as f64).cos()))
                .collect();
        }
        levels
    }

    /// Smallest and largest potential in the realization.
    fn potential_range(&self) -> (f64, f64) {
        match self.disorder {
            Disorder::Uniform { w } => (-w / 2.0, w / 2.0),
            Disorder::Cauchy { .. } => {
                let all: Vec<f64> = (0..self.m() * self.n()).map(|s| self.site_potential(s)).collect();
                let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }
}

/// Block model with identity bonds and `A_j` = transverse adjacency + disorder.
pub fn build_anderson(config: &AndersonConfig) -> Result<BlockModel> {
    let hop = config.transverse_hopping()?;
    let n = config.n();
    if n < 3 {
        return Err(Error::InvalidModel(format!("chain length must be at least 3, got {n}")));
    }
    let m = config.m();
    let a = (0..n)
        .map(|j| {
            let v = config.slice_potentials(j);
            let mut block = hop.clone();
            for (i, vi) in v.iter().enumerate() {
                block[(i, i)] += Complex64::new(*vi, 0.0);
            }
            block
        })
        .collect();
    BlockModel::new(a, vec![CMatrix::identity(m); n])
}

/// Closed-form spectrum of the clean lattice at boundary factor `bf`.
///
/// With `theta = (phi + 2 pi l) / n` the values are
/// `2 cosh(xi) cos(theta) + e_r + 2 i sinh(xi) sin(theta)`.
pub fn zero_disorder_spectrum(config: &AndersonConfig, bf: BoundaryFactor) -> Result<Vec<Complex64>> {
    config.validate()?;
    if !config.disorder.is_clean() {
        return Err(Error::InvalidConfig("closed-form spectrum needs zero disorder".into()));
    }
    let n = config.n();
    let mut out = Vec::with_capacity(n * config.m());
    for er in config.transverse_levels() {
        for l in 0..n {
            let theta = (bf.phi + TAU * l as f64) / n as f64;
            out.push(Complex64::new(
                2.0 * bf.xi.cosh() * theta.cos() + er,
                2.0 * bf.xi.sinh() * theta.sin(),
            ));
        }
    }
    Ok(out)
}

/// Largest value of the bounding-ellipse form minus one over the spectrum.
///
/// Each eigenvalue is tested against the best ellipse centre `e0` in the
/// spectral range of the block-diagonal part. At `xi = 0` the ellipses
/// collapse to intervals and only real spectra are admissible.
pub fn ellipse_bound_check(config: &AndersonConfig, bf: BoundaryFactor, spectrum: &DenseSpectrum) -> Result<f64> {
    config.validate()?;
    let d = config.dimension() as f64;
    let (vlo, vhi) = config.potential_range();
    let lo = -(2.0 * d - 2.0) + vlo;
    let hi = 2.0 * d - 2.0 + vhi;
    let a2 = 4.0 * bf.xi.cosh().powi(2);
    let b2 = 4.0 * bf.xi.sinh().powi(2);
    let scale = spectrum.spectral_radius().max(1.0);
    let mut worst = f64::NEG_INFINITY;
    for z in &spectrum.eigenvalues {
        let e0 = z.re.clamp(lo, hi);
        let real_part = (z.re - e0).powi(2) / a2;
        let form = if bf.xi == 0.0 {
            if z.im.abs() > 1e-9 * scale {
                return Err(Error::DegenerateXi);
            }
            real_part
        } else {
            real_part + z.im * z.im / b2
        };
        worst = worst.max(form - 1.0);
    }
    Ok(worst)
}

/// One-dimensional disorder realization for the Hatano-Nelson polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct HatanoPolynomial {
    pub potentials: Vec<f64>,
}

impl HatanoPolynomial {
    pub fn new(potentials: Vec<f64>) -> Result<Self> {
        if potentials.len() < 3 {
            return Err(Error::InvalidModel("ring needs at least 3 sites".into()));
        }
        Ok(HatanoPolynomial { potentials })
    }

    pub fn from_config(config: &AndersonConfig) -> Result<Self> {
        config.validate()?;
        if config.dimension() != 1 {
            return Err(Error::UnsupportedDimension(config.dimension()));
        }
        Self::new(config.slice_potentials_range(config.n()))
    }

    pub fn n(&self) -> usize {
        self.potentials.len()
    }

    pub fn model(&self) -> BlockModel {
        BlockModel::new(
            self.potentials
                .iter()
                .map(|&v| CMatrix::from_real(1, 1, &[v]))
                .collect(),
            vec![CMatrix::identity(1); self.n()],
        )
        .expect("scalar ring is a valid model")
    }
}

impl AndersonConfig {
    fn slice_potentials_range(&self, len: usize) -> Vec<f64> {
        (0..len).map(|s| self.site_potential(s)).collect()
    }
}

/// `p_n(eps) = det(eps - H(i))` held as `mantissa * exp(log_scale)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledValue {
    pub mantissa: Complex64,
    pub log_scale: f64,
    /// Log of a forward-error estimate for `value()`; the final subtraction
    /// cancels when `|p_n|` is far below the continuants.
    pub log_error: f64,
}

impl ScaledValue {
    pub fn log_abs(&self) -> f64 {
        self.log_scale + self.mantissa.norm().ln()
    }

    pub fn value(&self) -> Complex64 {
        self.mantissa * self.log_scale.exp()
    }
}

/// Continuant difference `D(1..n) - D(2..n-1)` with shared rescaling.
pub fn hatano_p_scaled(eps: Complex64, realization: &HatanoPolynomial) -> ScaledValue {
    let v = &realization.potentials;
    let n = v.len();
    let one = Complex64::new(1.0, 0.0);
    // Full continuant over sites 1..=k and the inner one over 2..=k.
    let (mut f_prev, mut f) = (one, eps - v[0]);
    let (mut g_prev, mut g) = (Complex64::new(0.0, 0.0), one);
    let mut log_scale = 0.0;
    for (k, vk) in v.iter().enumerate().skip(1) {
        let a = eps - vk;
        let f_next = a * f - f_prev;
        f_prev = f;
        f = f_next;
        if k < n - 1 {
            let g_next = a * g - g_prev;
            g_prev = g;
            g = g_next;
        }
        let big = f.norm().max(f_prev.norm()).max(g.norm()).max(g_prev.norm());
        if big > 1e100 || (big < 1e-100 && big > 0.0) {
            let r = 1.0 / big;
            f *= r;
            f_prev *= r;
            g *= r;
            g_prev *= r;
            log_scale += big.ln();
        }
    }
    let floor = 8.0 * n as f64 * f64::EPSILON * f.norm().max(g.norm());
    ScaledValue {
        mantissa: f - g,
        log_scale,
        log_error: log_scale + floor.ln(),
    }
}

/// `p_n(eps)`; overflows to infinity for long strongly localized chains.
pub fn hatano_p(eps: Complex64, realization: &HatanoPolynomial) -> Complex64 {
    hatano_p_scaled(eps, realization).value()
}

/// `(1/n) log |p_n(eps)|`.
pub fn hatano_exponent(eps: Complex64, realization: &HatanoPolynomial) -> f64 {
    hatano_p_scaled(eps, realization).log_abs() / realization.n() as f64
}

/// `log(2 cosh x)` without overflow.
fn log_two_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// `log(2 sinh x)` for `x > 0`.
fn log_two_sinh(x: f64) -> f64 {
    x + (-(-2.0 * x).exp()).ln_1p()
}

/// `(Re p)^2 / (4 cosh^2 (n xi)) + (Im p)^2 / (4 sinh^2 (n xi)) - 1`.
pub fn hatano_ellipse_residual(eps: Complex64, realization: &HatanoPolynomial, xi: f64) -> f64 {
    let p = hatano_p_scaled(eps, realization);
    let nx = realization.n() as f64 * xi;
    let re = p.mantissa.re * (p.log_scale - log_two_cosh(nx)).exp();
    let im = p.mantissa.im * (p.log_scale - log_two_sinh(nx)).exp();
    re * re + im * im - 1.0
}

/// Spectrum of the ring at `H(e^{n xi})` split into real wings and complex loop points.
#[derive(Clone, Debug, PartialEq)]
pub struct WingsAndLoops {
    pub xi: f64,
    pub wings: Vec<f64>,
    pub loop_points: Vec<Complex64>,
    /// Over wing eigenvalues, `log|p_n| - log(2 cosh(n xi) + err)` with `err` the
    /// evaluation error estimate of `p_n`. A wing counts as 0 when `p_n = +-2 cosh(n xi)`
    /// is bracketed within `1e-10` (relative to the spectral radius). Should be <= ~1e-6.
    pub wing_excess: f64,
    /// `max |(1/n) log|p_n| - xi|` over loop points.
    pub loop_level_defect: f64,
    /// True when `n xi > 10`, where loop points should sit on the lemniscate.
    pub lemniscate_regime: bool,
}

impl WingsAndLoops {
    /// Checks the wing bound and, in the lemniscate regime, the level-curve bound.
    pub fn consistent(&self) -> bool {
        let wings_ok = self.wing_excess <= 1e-6_f64.ln_1p();
        let loop_ok = !self.lemniscate_regime || self.loop_level_defect <= 5e-3;
        wings_ok && loop_ok
    }
}

pub fn hatano_wings_and_loops(realization: &HatanoPolynomial, xi: f64) -> Result<WingsAndLoops> {
    let model = realization.model();
    let spec = blockmodel::spectrum(&model, BoundaryFactor::new(xi, 0.0))?;
    let radius = spec.spectral_radius().max(f64::MIN_POSITIVE);
    let n = realization.n() as f64;
    let bound = log_two_cosh(n * xi);
    let mut wings = Vec::new();
    let mut loop_points = Vec::new();
    let mut wing_excess = f64::NEG_INFINITY;
    let mut loop_level_defect: f64 = 0.0;
    for z in spec.eigenvalues {
        if z.im.abs() < 1e-8 * radius {
            // Both the eigenvalue and p_n carry roundoff amplified by e^{n gamma}.
            let at = |x: f64| hatano_p_scaled(Complex64::new(x, 0.0), realization);
            let excess = if wing_bracketed(z.re, radius.max(1.0), bound, at) {
                0.0
            } else {
                let p = at(z.re);
                p.log_abs() - log_add_exp(bound, p.log_error)
            };
            wing_excess = wing_excess.max(excess);
            wings.push(z.re);
        } else {
            let level = hatano_exponent(z, realization);
            loop_level_defect = loop_level_defect.max((level - xi).abs());
            loop_points.push(z);
        }
    }
    wings.sort_by(f64::total_cmp);
    Ok(WingsAndLoops {
        xi,
        wings,
        loop_points,
        wing_excess,
        loop_level_defect,
        lemniscate_regime: n * xi > 10.0,
    })
}

/// Sign of `Re p - sigma exp(log_c)`, or `None` when roundoff hides it.
fn sign_minus(p: &ScaledValue, sigma: f64, log_c: f64) -> Option<f64> {
    let log_p = p.log_abs();
    if log_p <= p.log_error {
        return None;
    }
    if log_p > log_c + 1.0 {
        return Some(p.mantissa.re.signum());
    }
    let d = p.value().re - sigma * log_c.exp();
    (d.abs() > p.log_error.exp()).then(|| d.signum())
}

/// Whether `p_n - sigma c` changes sign on `[x - d, x + d]` for some sigma = +-1
/// and some `d` in `scale * [1e-14, 1e-10]`.
fn wing_bracketed(x: f64, scale: f64, log_c: f64, at: impl Fn(f64) -> ScaledValue) -> bool {
    (0..=8).any(|k| {
        let d = scale * 1e-14 * 10f64.powf(0.5 * k as f64);
        let (lo, hi) = (at(x - d), at(x + d));
        [1.0, -1.0].iter().any(|&sigma| {
            matches!(
                (sign_minus(&lo, sigma, log_c), sign_minus(&hi, sigma, log_c)),
                (Some(a), Some(b)) if a != b
            )
        })
    })
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Histogram estimate of the disorder-averaged level density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DOSHistogram {
    pub edges: Vec<f64>,
    /// Density per bin; `sum(density * width) = 1`.
    pub density: Vec<f64>,
    pub realizations: usize,
    /// Eigenvalues that fell outside the histogram range.
    pub dropped: usize,
}

impl DOSHistogram {
    /// Histogram of a known cumulative distribution.
    pub fn from_cdf(edges: Vec<f64>, cdf: impl Fn(f64) -> f64) -> Result<Self> {
        let mass: Vec<f64> = edges.windows(2).map(|e| cdf(e[1]) - cdf(e[0])).collect();
        Self::from_mass(edges, mass, 0, 0)
    }

    fn from_mass(edges: Vec<f64>, mass: Vec<f64>, realizations: usize, dropped: usize) -> Result<Self> {
        let total = linalg::pairwise_sum(&mass);
        if total <= 0.0 {
            return Err(Error::EmptyHistogram);
        }
        let density = mass
            .iter()
            .zip(edges.windows(2))
            .map(|(c, e)| c / total / (e[1] - e[0]))
            .collect();
        Ok(DOSHistogram {
            edges,
            density,
            realizations,
            dropped,
        })
    }

    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn integral(&self) -> f64 {
        let parts: Vec<f64> = self
            .density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .collect();
        linalg::pairwise_sum(&parts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DosOptions {
    pub bins: usize,
    /// Histogram range; `None` uses `[-2D - w/2 - 0.5, 2D + w/2 + 0.5]`.
    pub range: Option<(f64, f64)>,
    /// Bloch phase of the realized Hermitian matrix.
    pub phi: f64,
}

impl Default for DosOptions {
    fn default() -> Self {
        DosOptions {
            bins: 200,
            range: None,
            phi: 0.0,
        }
    }
}

/// Number of eigenvalues below `x` of the real symmetric periodic chain with
/// diagonal `d` and unit hopping, from the inertia of an `L D L^T` factorization.
fn periodic_chain_count_below(d: &[f64], x: f64) -> usize {
    let n = d.len();
    let tiny = 1e-300;
    let fix = |p: f64| if p == 0.0 { -tiny } else { p };
    let mut negatives = 0;
    // Eliminate rows 0..n-2; the last row collects the corner coupling.
    let mut piv = fix(d[0] - x);
    let mut corner = 1.0;
    let mut last = d[n - 1] - x;
    for i in 0..n - 2 {
        if piv < 0.0 {
            negatives += 1;
        }
        let next_piv = d[i + 1] - x - 1.0 / piv;
        let coupling_next = if i + 1 == n - 2 { 1.0 } else { 0.0 };
        let next_corner = coupling_next - corner / piv;
        last -= corner * corner / piv;
        piv = fix(next_piv);
        corner = next_corner;
    }
    if piv < 0.0 {
        negatives += 1;
    }
    let final_piv = fix(last - corner * corner / piv);
    if final_piv < 0.0 {
        negatives += 1;
    }
    negatives
}

/// Histogram of Bloch-phase eigenvalues over `realizations` seeds
/// (`seed, seed + 1, ...`).
pub fn dos_histogram(config: &AndersonConfig, realizations: usize, options: DosOptions) -> Result<DOSHistogram> {
    config.validate()?;
    if realizations == 0 || options.bins == 0 {
        return Err(Error::EmptyHistogram);
    }
    let d = config.dimension() as f64;
    let half = 2.0 * d + config.disorder.width() / 2.0 + 0.5;
    let (lo, hi) = options.range.unwrap_or((-half, half));
    let edges: Vec<f64> = (0..=options.bins)
        .map(|i| lo + (hi - lo) * i as f64 / options.bins as f64)
        .collect();
    let per_seed: Vec<Result<(Vec<u64>, usize)>> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let cfg = config.with_seed(config.seed.wrapping_add(r as u64));
            let total = cfg.m() * cfg.n();
            let below: Vec<usize> = if cfg.dimension() == 1 && options.phi == 0.0 {
                let v = cfg.slice_potentials_range(cfg.n());
                edges.iter().map(|&x| periodic_chain_count_below(&v, x)).collect()
            } else {
                let model = build_anderson(&cfg)?;
                let h = blockmodel::realize_h(&model, BoundaryFactor::bloch(options.phi));
                let ev = linalg::hermitian_eigenvalues(&h).map_err(|f| Error::NoConvergence {
                    rows: f.rows,
                    cols: f.cols,
                    iterations: 30 * f.rows,
                })?;
                edges.iter().map(|&x| ev.partition_point(|&e| e < x)).collect()
            };
            let counts = below.windows(2).map(|w| (w[1] - w[0]) as u64).collect();
            let inside = below[below.len() - 1] - below[0];
            Ok((counts, total - inside))
        })
        .collect();
    let mut counts = vec![0u64; options.bins];
    let mut dropped = 0;
    for item in per_seed {
        let (c, drop) = item?;
        for (acc, x) in counts.iter_mut().zip(c) {
            *acc += x;
        }
        dropped += drop;
    }
    let mass = counts.iter().map(|&c| c as f64).collect();
    DOSHistogram::from_mass(edges, mass, realizations, dropped)
}

/// `integral rho(x) log|eps - x| dx` for the piecewise-constant density.
///
/// Each bin is integrated exactly using `F(y) = y log|y| - y`, which also
/// handles the bin that contains `eps`.
pub fn thouless_exponent(dos: &DOSHistogram, eps: f64) -> Result<f64> {
    if dos.bins() == 0 || dos.integral() <= 0.0 {
        return Err(Error::EmptyHistogram);
    }
    let antiderivative = |y: f64| if y == 0.0 { 0.0 } else { y * y.abs().ln() - y };
    let parts: Vec<f64> = dos
        .density
        .iter()
        .zip(dos.edges.windows(2))
        .map(|(rho, e)| {
            if *rho == 0.0 {
                0.0
            } else {
                rho * (antiderivative(e[1] - eps) - antiderivative(e[0] - eps))
            }
        })
        .collect();
    Ok(linalg::pairwise_sum(&parts))
}

/// Parameter sweeps for eigenvalue point clouds.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudSweep {
    /// Number of corner phases in `[0, 2 pi)` (arg z covers `[0, 2 pi / n)`).
    pub phi_steps: usize,
    /// Extra radial values, each at the base corner phase.
    pub xi_values: Vec<f64>,
    /// Extra seeds, each at the base boundary factor.
    pub seeds: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Phi,
    Xi,
    Seed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub eps: Complex64,
    pub xi: f64,
    pub phi: f64,
    pub seed: u64,
    pub sweep: SweepKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopCloud {
    pub points: Vec<CloudPoint>,
    /// Connected components among non-real points of the phase sweep.
    pub loops: usize,
    pub link_radius: f64,
    /// `Some(message)` when the component count differs from `m`.
    pub cluster_ambiguous: Option<String>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn nearest_distance(z: Complex64, set: &[Complex64]) -> f64 {
    set.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min)
}

/// Number of single-linkage clusters at the given radius.
fn count_clusters(points: &[Complex64], radius: f64) -> usize {
    use std::collections::HashMap;
    if points.is_empty() {
        return 0;
    }
    let cell = |z: &Complex64| ((z.re / radius).floor() as i64, (z.im / radius).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, z) in points.iter().enumerate() {
        grid.entry(cell(z)).or_default().push(i);
    }
    let mut ds = DisjointSet::new(points.len());
    for (i, z) in points.iter().enumerate() {
        let (cx, cy) = cell(z);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = grid.get(&(cx + dx, cy + dy)) {
                    for &j in list {
                        if j > i && (points[j] - z).norm() <= radius {
                            ds.union(i, j);
                        }
                    }
                }
            }
        }
    }
    let mut roots: Vec<usize> = (0..points.len()).map(|i| ds.find(i)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

/// Eigenvalue clouds for phase, radial and seed sweeps, with a loop count.
pub fn loop_point_cloud(config: &AndersonConfig, bf: BoundaryFactor, sweep: &CloudSweep) -> Result<LoopCloud> {
    if config.dimension() != 2 {
        return Err(Error::UnsupportedDimension(config.dimension()));
    }
    let model = build_anderson(config)?;
    let steps = sweep.phi_steps.max(1);
    let phis: Vec<f64> = (0..steps).map(|j| bf.phi + TAU * j as f64 / steps as f64).collect();
    let phi_spectra: Vec<Result<Vec<Complex64>>> = phis
        .par_iter()
        .map(|&phi| blockmodel::spectrum(&model, BoundaryFactor::new(bf.xi, phi)).map(|s| s.eigenvalues))
        .collect();
    let mut points = Vec::new();
    let mut layers = Vec::with_capacity(steps);
    for (phi, spec) in phis.iter().zip(phi_spectra) {
        let spec = spec?;
        points.extend(spec.iter().map(|&eps| CloudPoint {
            eps,
            xi: bf.xi,
            phi: phi.rem_euclid(TAU),
            seed: config.seed,
            sweep: SweepKind::Phi,
        }));
        layers.push(spec);
    }
    let xi_spectra: Vec<Result<(f64, Vec<Complex64>)>> = sweep
        .xi_values
        .par_iter()
        .map(|&xi| blockmodel::spectrum(&model, BoundaryFactor::new(xi, bf.phi)).map(|s| (xi, s.eigenvalues)))
        .collect();
    for item in xi_spectra {
        let (xi, spec) = item?;
        points.extend(spec.into_iter().map(|eps| CloudPoint {
            eps,
            xi,
            phi: bf.phi,
            seed: config.seed,
            sweep: SweepKind::Xi,
        }));
    }
    let seed_spectra: Vec<Result<(u64, Vec<Complex64>)>> = sweep
        .seeds
        .par_iter()
        .map(|&seed| {
            let m = build_anderson(&config.with_seed(seed))?;
            blockmodel::spectrum(&m, bf).map(|s| (seed, s.eigenvalues))
        })
        .collect();
    for item in seed_spectra {
        let (seed, spec) = item?;
        points.extend(spec.into_iter().map(|eps| CloudPoint {
            eps,
            xi: bf.xi,
            phi: bf.phi,
            seed,
            sweep: SweepKind::Seed,
        }));
    }

    // Arc step: distance from each eigenvalue to the closest one at the next phase.
    let radius_scale = layers.iter().flatten().fold(0.0_f64, |a, z| a.max(z.norm())).max(1.0);
    let mut steps_len = Vec::new();
    for w in layers.windows(2) {
        steps_len.extend(w[0].iter().map(|z| nearest_distance(*z, &w[1])));
    }
    if layers.len() > 1 {
        let (first, last) = (&layers[0], &layers[layers.len() - 1]);
        steps_len.extend(last.iter().map(|z| nearest_distance(*z, first)));
    }
    let link_radius = 3.0 * median(steps_len).max(1e-12 * radius_scale);
    let complex: Vec<Complex64> = layers
        .iter()
        .flatten()
        .copied()
        .filter(|z| z.im.abs() >= 1e-8 * radius_scale)
        .collect();
    let loops = count_clusters(&complex, link_radius);
    let cluster_ambiguous =
        (loops != config.m()).then(|| format!("found {loops} connected components, expected {} loops", config.m()));
    Ok(LoopCloud {
        points,
        loops,
        link_radius,
        cluster_ambiguous,
    })
}

/// Smallest `xi` at which `H(e^{n xi})` acquires a non-real eigenvalue.
///
/// Scans `[0, xi_max]` on `coarse` equal steps, then bisects the first
/// crossing to width `tol`. Returns `None` if the spectrum stays real.
pub fn first_complex_xi(model: &BlockModel, xi_max: f64, coarse: usize, tol: f64) -> Result<Option<f64>> {
    let is_complex = |xi: f64| -> Result<bool> {
        let s = blockmodel::spectrum(model, BoundaryFactor::new(xi, 0.0))?;
        let radius = s.spectral_radius().max(f64::MIN_POSITIVE);
        Ok(s.eigenvalues.iter().any(|z| z.im.abs() > 1e-8 * radius))
    };
    let coarse = coarse.max(1);
    let mut prev = 0.0;
    for j in 1..=coarse {
        let xi = xi_max * j as f64 / coarse as f64;
        if is_complex(xi)? {
            let (mut lo, mut hi) = (prev, xi);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if is_complex(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(hi));
        }
        prev = xi;
    }
    Ok(None)
}
