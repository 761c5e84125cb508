//! Jensen-average counting curves and exponent extraction from their kinks.
//!
//! For a probe radius `xi` the angular average of `log |det(eps - H_b)|`
//! over the corner phase equals a sum over transfer-matrix eigenvalues
//! outside the circle `|s| = e^{n xi}`. After removing the bond term the
//! counting function is
//!
//! `G(xi) = (1/m) sum_{xi_a < xi} (xi - xi_a) - xi`,
//!
//! which is flat at the mean positive exponent for `0 <= xi < xi_min`,
//! gains slope `1/m` at every positive exponent, and ends with slope one.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockmodel::{self, BlockModel, BoundaryFactor};
use crate::duality::DoubledModel;
use crate::error::{Error, Result};
use crate::linalg::{self, pairwise_mean};
use crate::transfer;

/// Angle shift used when a quadrature sample hits an eigenvalue.
const SINGULAR_NUDGE: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Initial number of equally spaced corner phases.
    pub n_angles: usize,
    /// Double the angle count until successive averages agree to `tol`.
    pub adaptive: bool,
    pub tol: f64,
    pub max_angles: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            n_angles: 64,
            adaptive: true,
            tol: 1e-7,
            max_angles: 4096,
        }
    }
}

impl QuadratureOptions {
    pub fn fixed(n_angles: usize) -> Self {
        QuadratureOptions {
            n_angles,
            adaptive: false,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_angles < 8 {
            return Err(Error::InvalidConfig(format!(
                "need at least 8 angles, got {}",
                self.n_angles
            )));
        }
        if self.adaptive && !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("quadrature tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one angular average.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JensenValue {
    pub value: f64,
    pub n_angles: usize,
    pub converged: bool,
}

/// Uniform-grid mean of `f` over `[0, 2 pi)` starting at phase `offset`,
/// doubling the grid while the mean still moves by more than `tol`.
fn angular_mean<F>(f: F, opts: &QuadratureOptions, offset: f64) -> Result<JensenValue>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    opts.validate()?;
    let sample = |phi: f64| match f(phi) {
        Err(Error::SingularShift { .. }) => f(phi + SINGULAR_NUDGE),
        other => other,
    };
    let mut n = opts.n_angles;
    let mut values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| sample(offset + TAU * j as f64 / n as f64))
        .collect::<Result<_>>()?;
    let mut mean = pairwise_mean(&values);
    if !opts.adaptive {
        return Ok(JensenValue {
            value: mean,
            n_angles: n,
            converged: true,
        });
    }
    while 2 * n <= opts.max_angles.max(opts.n_angles) {
        let fresh: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|j| sample(offset + TAU * (j as f64 + 0.5) / n as f64))
            .collect::<Result<_>>()?;
        values = values.iter().zip(&fresh).flat_map(|(a, b)| [*a, *b]).collect();
        n *= 2;
        let next = pairwise_mean(&values);
        let delta = (next - mean).abs();
        mean = next;
        if delta < opts.tol {
            return Ok(JensenValue {
                value: mean,
                n_angles: n,
                converged: true,
            });
        }
    }
    Ok(JensenValue {
        value: mean,
        n_angles: n,
        converged: false,
    })
}

/// What the counting curve averages over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveBasis {
    /// `log |det(eps - H(e^{n xi + i phi}))|`, breakpoints at the `T` exponents.
    HBased,
    /// `log |det(K(e^{2n xi + i phi}) - eps)|`, breakpoints at the `Q` exponents.
    KBased,
}

enum Source<'a> {
    H(&'a BlockModel),
    K(DoubledModel),
}

impl Source<'_> {
    fn new(model: &BlockModel, basis: CurveBasis) -> Result<Source<'_>> {
        Ok(match basis {
            CurveBasis::HBased => Source::H(model),
            CurveBasis::KBased => Source::K(DoubledModel::new(model.clone())?),
        })
    }

    fn model(&self) -> &BlockModel {
        match self {
            Source::H(m) => m,
            Source::K(d) => d.base(),
        }
    }

    /// `-(1/nm) sum_k log |det B_k|`.
    fn bond_term(&self) -> f64 {
        let model = self.model();
        -model.log_abs_det_b().iter().sum::<f64>() / model.dim() as f64
    }

    fn evaluate(&self, eps: Complex64, xi: f64, opts: &QuadratureOptions) -> Result<JensenValue> {
        let mean = match self {
            Source::H(model) => angular_mean(
                |phi| blockmodel::log_abs_det_shifted(model, BoundaryFactor::new(xi, phi), eps),
                opts,
                0.0,
            )?,
            Source::K(doubled) => angular_mean(|phi| doubled.k_log_abs_det_shifted(xi, phi, eps), opts, 0.0)?,
        };
        Ok(JensenValue {
            value: mean.value + self.bond_term(),
            ..mean
        })
    }
}

/// Jensen average `G(xi)` with stall reporting instead of failure.
pub fn jensen_value(model: &BlockModel, eps: Complex64, xi: f64, opts: &QuadratureOptions) -> Result<JensenValue> {
    Source::H(model).evaluate(eps, xi, opts)
}

/// `G(xi) = -(1/nm) sum_k log|det B_k| + <(1/nm) log|det(eps - H_b)|>_phi`.
pub fn jensen_average(model: &BlockModel, eps: Complex64, xi: f64, opts: &QuadratureOptions) -> Result<f64> {
    let v = jensen_value(model, eps, xi, opts)?;
    if !v.converged {
        return Err(Error::QuadratureStall { xi, angles: v.n_angles });
    }
    Ok(v.value)
}

/// Mean positive exponent `G(0)` from Bloch-phase (Hermitian) spectra.
///
/// If `eps` is real and collides with a Bloch eigenvalue, the whole phase
/// grid is shifted by a third of a step; a second collision is an error.
pub fn sum_positive_exponents(model: &BlockModel, eps: Complex64, opts: &QuadratureOptions) -> Result<f64> {
    let dim = model.dim() as f64;
    let bond = -model.log_abs_det_b().iter().sum::<f64>() / dim;
    let sample = |phi: f64| -> Result<f64> {
        let h = blockmodel::realize_h(model, BoundaryFactor::bloch(phi));
        let ev = linalg::hermitian_eigenvalues(&h).map_err(|f| Error::NoConvergence {
            rows: f.rows,
            cols: f.cols,
            iterations: 30 * f.rows,
        })?;
        let scale = ev.iter().fold(eps.norm(), |a, x| a.max(x.abs())).max(1.0);
        let logs: Vec<f64> = ev.iter().map(|&l| (eps - l).norm()).map(f64::ln).collect();
        if ev.iter().any(|&l| (eps - l).norm() < 1e-12 * scale) {
            return Err(Error::RealAxisSingularity { eps: eps.re });
        }
        Ok(linalg::pairwise_sum(&logs) / dim)
    };
    let strict = |phi: f64| match sample(phi) {
        Err(Error::RealAxisSingularity { eps }) => Err(Error::RealAxisSingularity { eps }),
        other => other,
    };
    // Singular samples are reported as RealAxisSingularity, which angular_mean
    // does not nudge; retry once on a shifted grid.
    let run = |offset: f64| angular_mean(strict, opts, offset);
    let v = match run(0.0) {
        Err(Error::RealAxisSingularity { .. }) => run(TAU / (3.0 * opts.n_angles as f64))?,
        other => other?,
    };
    if !v.converged {
        return Err(Error::QuadratureStall {
            xi: 0.0,
            angles: v.n_angles,
        });
    }
    Ok(v.value + bond)
}

/// Sampled counting function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingCurve {
    pub xi_grid: Vec<f64>,
    pub g_values: Vec<f64>,
    /// Angles used at each point.
    pub n_angles: Vec<usize>,
    /// False where the quadrature hit its angle cap.
    pub converged: Vec<bool>,
    pub energy: Complex64,
    pub basis: CurveBasis,
    pub m: usize,
    pub tol: f64,
}

impl CountingCurve {
    pub fn len(&self) -> usize {
        self.xi_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi_grid.is_empty()
    }

    /// `G(xi_{i+1}) >= G(xi_i) - 10 tol` for all adjacent pairs.
    pub fn is_monotone(&self) -> bool {
        self.g_values.windows(2).all(|w| w[1] >= w[0] - 10.0 * self.tol)
    }
}

/// `1 + log(1 + max_k |t_k(eps)|_inf)`, an upper bound on the largest exponent plus margin.
pub fn default_xi_max(model: &BlockModel, eps: Complex64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 1..=model.n() {
        let f = transfer::single_factor(model.a(k - 1), model.bond(k), model.bond(k - 1), eps)?;
        worst = worst.max(f.norm_inf());
    }
    Ok(1.0 + worst.ln_1p())
}

fn grid(xi_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) || !(xi_max > 0.0 && xi_max.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "invalid grid: xi_max {xi_max}, step {step}"
        )));
    }
    let k = (xi_max / step - 1e-9).ceil() as usize;
    Ok((0..=k).map(|i| i as f64 * step).collect())
}

fn sweep(
    source: &Source<'_>,
    eps: Complex64,
    xi_max: f64,
    step: f64,
    opts: &QuadratureOptions,
    basis: CurveBasis,
) -> Result<CountingCurve> {
    let xi_grid = grid(xi_max, step)?;
    let values: Vec<JensenValue> = xi_grid
        .par_iter()
        .map(|&xi| source.evaluate(eps, xi, opts))
        .collect::<Result<_>>()?;
    Ok(CountingCurve {
        g_values: values.iter().map(|v| v.value).collect(),
        n_angles: values.iter().map(|v| v.n_angles).collect(),
        converged: values.iter().map(|v| v.converged).collect(),
        xi_grid,
        energy: eps,
        basis,
        m: source.model().m(),
        tol: opts.tol,
    })
}

/// `G` on the grid `0, step, 2 step, ...` up to (at least) `xi_max`.
pub fn counting_curve(
    model: &BlockModel,
    eps: Complex64,
    xi_max: f64,
    step: f64,
    opts: &QuadratureOptions,
) -> Result<CountingCurve> {
    sweep(&Source::H(model), eps, xi_max, step, opts, CurveBasis::HBased)
}

/// Counting curve built on `K`; its breakpoints are the `Q` (Lyapunov) exponents.
pub fn lyapunov_curve(
    model: &BlockModel,
    eps: Complex64,
    xi_max: f64,
    step: f64,
    opts: &QuadratureOptions,
) -> Result<CountingCurve> {
    let source = Source::new(model, CurveBasis::KBased)?;
    sweep(&source, eps, xi_max, step, opts, CurveBasis::KBased)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub xi: f64,
    /// Slope increase, `multiplicity / m`.
    pub jump: f64,
    pub multiplicity: usize,
    /// False when neighbouring breakpoints could not be separated.
    pub resolved: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BreakpointDiagnostics {
    pub grid_step: f64,
    pub max_angles: usize,
    /// `|sum of jumps - 1|`; nonzero when the curve stops before the largest exponent.
    pub slope_sum_residual: f64,
    pub plateau_slope: f64,
    pub final_slope: f64,
    pub monotone: bool,
    pub stalled_points: usize,
    pub extra_evaluations: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakpointReport {
    pub breakpoints: Vec<Breakpoint>,
    pub xi_min: Option<f64>,
    /// `G(0)`, the mean positive exponent.
    pub mean_positive: f64,
    pub diagnostics: BreakpointDiagnostics,
}

impl BreakpointReport {
    /// Breakpoint positions repeated by multiplicity.
    pub fn exponents(&self) -> Vec<f64> {
        self.breakpoints
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.xi, b.multiplicity))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BreakpointOptions {
    pub quadrature: QuadratureOptions,
    /// Fail with `UnresolvedCluster` instead of reporting unresolved breakpoints.
    pub strict: bool,
    /// Levels of local grid refinement tried on clusters before giving up.
    pub refine_depth: usize,
}

impl Default for BreakpointOptions {
    fn default() -> Self {
        BreakpointOptions {
            quadrature: QuadratureOptions::default(),
            strict: true,
            refine_depth: 2,
        }
    }
}

struct Extractor<'a> {
    source: Source<'a>,
    eps: Complex64,
    m: usize,
    opts: BreakpointOptions,
    extra: usize,
    max_angles: usize,
    warnings: Vec<String>,
}

impl Extractor<'_> {
    fn eval(&mut self, xi: f64) -> Result<f64> {
        let v = self.source.evaluate(self.eps, xi, &self.opts.quadrature)?;
        self.extra += 1;
        self.max_angles = self.max_angles.max(v.n_angles);
        if !v.converged {
            self.warnings
                .push(format!("quadrature did not converge at xi = {xi:.6}"));
        }
        Ok(v.value)
    }

    fn eval_many(&mut self, xs: &[f64]) -> Result<Vec<f64>> {
        let quad = self.opts.quadrature;
        let vals: Vec<JensenValue> = xs
            .par_iter()
            .map(|&xi| self.source.evaluate(self.eps, xi, &quad))
            .collect::<Result<_>>()?;
        self.extra += xs.len();
        for (x, v) in xs.iter().zip(&vals) {
            self.max_angles = self.max_angles.max(v.n_angles);
            if !v.converged {
                self.warnings
                    .push(format!("quadrature did not converge at xi = {x:.6}"));
            }
        }
        Ok(vals.iter().map(|v| v.value).collect())
    }

    /// Breakpoints of the sampled curve `(xs, gs)` on a uniform grid.
    /// `floor` is the smallest abscissa that may be evaluated.
    fn analyze(&mut self, xs: &[f64], gs: &[f64], depth: usize, floor: f64) -> Result<Vec<Breakpoint>> {
        let m = self.m as f64;
        let h = xs[1] - xs[0];
        let slopes: Vec<f64> = (0..xs.len() - 1)
            .map(|i| (gs[i + 1] - gs[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let levels: Vec<i64> = slopes.iter().map(|s| (s * m).round() as i64).collect();
        let changes: Vec<usize> = (1..levels.len()).filter(|&i| levels[i] != levels[i - 1]).collect();
        let mut groups: Vec<(usize, usize)> = Vec::new();
        for &i in &changes {
            match groups.last_mut() {
                Some((_, last)) if i - *last <= 2 => *last = i,
                _ => groups.push((i, i)),
            }
        }
        let mut found = Vec::new();
        for (first, last) in groups {
            let left = levels[first - 1];
            let right = levels[last];
            if right <= left {
                self.warnings.push(format!(
                    "slope decreased near xi = {:.6}; treated as quadrature noise",
                    xs[first]
                ));
                continue;
            }
            let lo = xs[first - 1];
            let hi = xs[last + 1];
            let a = (lo - 0.5 * h).max(floor);
            let c = hi + 0.5 * h;
            let (sl, sr) = (left as f64 / m, right as f64 / m);
            let ga = self.eval(a)?;
            let gc = self.eval(c)?;
            let b = (gc - ga + sl * a - sr * c) / (sl - sr);
            let mut resolved = first == last && b >= lo - 0.25 * h && b <= hi + 0.25 * h;
            if resolved {
                // A lone kink at b predicts the slopes of both bracket intervals.
                let jump = (right - left) as f64;
                for i in [first - 1, first] {
                    let covered = (xs[i + 1] - b.clamp(xs[i], xs[i + 1])) / (xs[i + 1] - xs[i]);
                    let predicted = (left as f64 + jump * covered) / m;
                    if (predicted - slopes[i]).abs() > 0.25 / m {
                        resolved = false;
                    }
                }
            }
            if resolved {
                found.push(Breakpoint {
                    xi: b,
                    jump: (right - left) as f64 / m,
                    multiplicity: (right - left) as usize,
                    resolved: true,
                });
                continue;
            }
            if depth < self.opts.refine_depth {
                let fine = h / 8.0;
                let count = ((c - a) / fine).round() as usize;
                let sub_x: Vec<f64> = (0..=count).map(|i| a + i as f64 * fine).collect();
                let sub_g = self.eval_many(&sub_x)?;
                found.extend(self.analyze(&sub_x, &sub_g, depth + 1, floor)?);
                continue;
            }
            if self.opts.strict {
                return Err(Error::UnresolvedCluster { near: b });
            }
            self.warnings
                .push(format!("unresolved breakpoint cluster near xi = {b:.6}"));
            for i in first..=last {
                let jump = levels[i] - levels[i - 1];
                if jump > 0 {
                    found.push(Breakpoint {
                        xi: xs[i],
                        jump: jump as f64 / m,
                        multiplicity: jump as usize,
                        resolved: false,
                    });
                }
            }
        }
        Ok(found)
    }
}

/// Locates the kinks of a counting curve.
///
/// Interval slopes are rounded to multiples of `1/m`; each change of level
/// brackets a kink between two grid points. The kink is then placed at the
/// intersection of the two adjacent lines (slopes known exactly from the
/// levels), anchored by extra evaluations half a step outside the bracket.
/// Brackets that overlap or whose slopes do not fit a single kink are
/// re-sampled on a finer local grid.
pub fn extract_breakpoints(
    curve: &CountingCurve,
    model: &BlockModel,
    options: &BreakpointOptions,
) -> Result<BreakpointReport> {
    if curve.len() < 3 {
        return Err(Error::InvalidConfig("counting curve needs at least 3 points".into()));
    }
    let m = curve.m as f64;
    let h = curve.xi_grid[1] - curve.xi_grid[0];
    let plateau_slope = (curve.g_values[1] - curve.g_values[0]) / h;
    if plateau_slope > 0.5 / m {
        return Err(Error::NoPlateau { slope: plateau_slope });
    }
    let mut ex = Extractor {
        source: Source::new(model, curve.basis)?,
        eps: curve.energy,
        m: curve.m,
        opts: *options,
        extra: 0,
        max_angles: curve.n_angles.iter().copied().max().unwrap_or(0),
        warnings: Vec::new(),
    };
    let mut breakpoints = ex.analyze(&curve.xi_grid, &curve.g_values, 0, curve.xi_grid[0])?;
    breakpoints.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    let k = curve.len();
    let final_slope = (curve.g_values[k - 1] - curve.g_values[k - 2]) / (curve.xi_grid[k - 1] - curve.xi_grid[k - 2]);
    let total_jump: f64 = breakpoints.iter().map(|b| b.jump).sum();
    let monotone = curve.is_monotone();
    if (final_slope - 1.0).abs() > 0.5 / m {
        ex.warnings.push(format!(
            "final slope {final_slope:.4} differs from 1; the grid may end before the largest exponent"
        ));
    }
    if !monotone {
        ex.warnings.push("counting curve is not monotone within 10 tol".into());
    }
    let diagnostics = BreakpointDiagnostics {
        grid_step: h,
        max_angles: ex.max_angles,
        slope_sum_residual: (total_jump - 1.0).abs(),
        plateau_slope,
        final_slope,
        monotone,
        stalled_points: curve.converged.iter().filter(|c| !**c).count(),
        extra_evaluations: ex.extra,
        warnings: ex.warnings,
    };
    Ok(BreakpointReport {
        xi_min: breakpoints.first().map(|b| b.xi),
        mean_positive: curve.g_values[0],
        breakpoints,
        diagnostics,
    })
}
