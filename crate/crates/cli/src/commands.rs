//! The six subcommands. Each returns tables plus diagnostics; emission is
//! handled by the caller.

use std::f64::consts::TAU;

use andersonspec::anderson::{
    self, build_anderson, dos_histogram, first_complex_xi, hatano_exponent, hatano_wings_and_loops, thouless_exponent,
    AndersonConfig, CloudSweep, Disorder, DosOptions, HatanoPolynomial,
};
use andersonspec::blockmodel::{realize_h, spectrum};
use andersonspec::duality::{self, duality_residual, eigenvalue_duality_gap, relative_gap, DoubledModel};
use andersonspec::linalg::{self, LogDet};
use andersonspec::random::{random_complex, random_model, BondKind, ModelShape};
use andersonspec::spectral::{
    counting_curve, default_xi_max, extract_breakpoints, lyapunov_curve, BreakpointOptions, CountingCurve,
};
use andersonspec::transfer::{
    build_transfer, exponents_direct, lyapunov_oracle, symplectic_residuals, OracleOptions, SymplecticForm,
};
use andersonspec::{BlockModel, BoundaryFactor, Complex64, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Command, ExperimentConfig};
use crate::error::CliError;
use crate::output::{Cell, Diagnostics, RunOutput, Table};

/// Outcome of a command: verification failures still produce output.
pub struct Outcome {
    pub output: RunOutput,
    pub failed_checks: Vec<String>,
}

impl From<RunOutput> for Outcome {
    fn from(output: RunOutput) -> Self {
        Outcome {
            output,
            failed_checks: Vec::new(),
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    match config.command.expect("resolved config has a command") {
        Command::Spectrum => cmd_spectrum(config).map(Into::into),
        Command::Exponents => cmd_curve(config, false).map(Into::into),
        Command::Lyapunov => cmd_curve(config, true).map(Into::into),
        Command::Hatano => cmd_hatano(config).map(Into::into),
        Command::Verify => cmd_verify(config),
        Command::Dos => cmd_dos(config).map(Into::into),
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = linalg::pairwise_mean(values);
    if n == 1 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = linalg::pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn sort_complex(values: &mut [Complex64]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

pub fn cmd_spectrum(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let mut tasks = Vec::new();
    for seed in config.seeds() {
        for xi in config.xi_values() {
            for phi in config.phi_values() {
                tasks.push((seed, BoundaryFactor::new(xi, phi)));
            }
        }
    }
    let results: Vec<Result<Vec<Complex64>, Error>> = tasks
        .par_iter()
        .map(|&(seed, bf)| {
            let model = build_anderson(&config.anderson(seed))?;
            let mut ev = spectrum(&model, bf)?.eigenvalues;
            sort_complex(&mut ev);
            Ok(ev)
        })
        .collect();

    let mut table = Table::new("spectrum", &["re", "im", "xi", "phi", "seed"]);
    for (&(seed, bf), ev) in tasks.iter().zip(results) {
        for z in ev? {
            table.push(vec![z.re.into(), z.im.into(), bf.xi.into(), bf.phi.into(), seed.into()]);
        }
    }

    let mut diagnostics = Diagnostics::default();
    if config.model.dims.len() == 2 && config.boundary.phi_steps > 1 {
        let bf = BoundaryFactor::new(config.xi_values()[0], config.boundary.phi);
        let sweep = CloudSweep {
            phi_steps: config.boundary.phi_steps,
            xi_values: Vec::new(),
            seeds: Vec::new(),
        };
        let cloud = anderson::loop_point_cloud(&config.anderson(config.model.seed), bf, &sweep)?;
        diagnostics.extra.insert("loops".into(), json!(cloud.loops));
        diagnostics.extra.insert("link_radius".into(), json!(cloud.link_radius));
        if let Some(msg) = cloud.cluster_ambiguous {
            diagnostics.warnings.push(msg);
        }
    }
    Ok(RunOutput {
        tables: vec![table],
        diagnostics,
    })
}

struct CurveTask {
    seed: u64,
    eps: Complex64,
}

struct CurveResult {
    curve: CountingCurve,
    report: Result<andersonspec::spectral::BreakpointReport, Error>,
}

/// `exponents` (transfer-matrix curve) and `lyapunov` (`K`-based curve).
pub fn cmd_curve(config: &ExperimentConfig, lyapunov: bool) -> Result<RunOutput, CliError> {
    let prefix = if lyapunov { "lyapunov" } else { "exponents" };
    let quad = config.quadrature();
    let options = BreakpointOptions {
        quadrature: quad,
        strict: config.numerics.strict,
        ..BreakpointOptions::default()
    };
    let mut tasks = Vec::new();
    for seed in config.seeds() {
        for eps in config.energies() {
            tasks.push(CurveTask { seed, eps });
        }
    }
    let results: Vec<Result<CurveResult, Error>> = tasks
        .par_iter()
        .map(|t| {
            let model = build_anderson(&config.anderson(t.seed))?;
            let xi_max = match config.numerics.xi_max {
                Some(x) => x,
                None => default_xi_max(&model, t.eps)?,
            };
            let curve = if lyapunov {
                lyapunov_curve(&model, t.eps, xi_max, config.numerics.xi_step, &quad)?
            } else {
                counting_curve(&model, t.eps, xi_max, config.numerics.xi_step, &quad)?
            };
            let report = extract_breakpoints(&curve, &model, &options);
            Ok(CurveResult { curve, report })
        })
        .collect();

    let name = |part: &str| format!("{prefix}_{part}");
    let mut curve_t = Table::new(
        &name("curve"),
        &["seed", "eps_re", "eps_im", "xi", "g", "n_angles", "converged"],
    );
    let mut bp_t = Table::new(
        &name("breakpoints"),
        &[
            "seed",
            "eps_re",
            "eps_im",
            "index",
            "xi",
            "jump",
            "multiplicity",
            "resolved",
        ],
    );
    let mut summary_t = Table::new(
        &name("summary"),
        &[
            "seed",
            "eps_re",
            "eps_im",
            "xi_min",
            "mean_positive",
            "final_slope",
            "warning",
        ],
    );
    let mut diagnostics = Diagnostics::default();
    let energies = config.energies();
    let mut per_energy: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); energies.len()];

    for (i, (task, result)) in tasks.iter().zip(results).enumerate() {
        let r = result?;
        let (re, im) = (task.eps.re, task.eps.im);
        diagnostics.record_angles(&r.curve.n_angles, &r.curve.converged);
        for ((xi, g), (na, conv)) in r
            .curve
            .xi_grid
            .iter()
            .zip(&r.curve.g_values)
            .zip(r.curve.n_angles.iter().zip(&r.curve.converged))
        {
            curve_t.push(vec![
                task.seed.into(),
                re.into(),
                im.into(),
                (*xi).into(),
                (*g).into(),
                (*na).into(),
                (*conv).into(),
            ]);
        }
        let plateau = r.curve.g_values[0];
        let slot = &mut per_energy[i % energies.len()];
        slot.1.push(plateau);
        match r.report {
            Ok(rep) => {
                for (k, b) in rep.breakpoints.iter().enumerate() {
                    bp_t.push(vec![
                        task.seed.into(),
                        re.into(),
                        im.into(),
                        k.into(),
                        b.xi.into(),
                        b.jump.into(),
                        b.multiplicity.into(),
                        b.resolved.into(),
                    ]);
                }
                if let Some(x) = rep.xi_min {
                    slot.0.push(x);
                }
                let warning = rep.diagnostics.warnings.join("; ");
                for w in &rep.diagnostics.warnings {
                    diagnostics
                        .warnings
                        .push(format!("seed {} eps {re}{im:+}i: {w}", task.seed));
                }
                summary_t.push(vec![
                    task.seed.into(),
                    re.into(),
                    im.into(),
                    rep.xi_min.into(),
                    rep.mean_positive.into(),
                    rep.diagnostics.final_slope.into(),
                    warning.into(),
                ]);
            }
            Err(e @ Error::NoPlateau { .. }) => {
                diagnostics
                    .warnings
                    .push(format!("seed {} eps {re}{im:+}i: {e}", task.seed));
                summary_t.push(vec![
                    task.seed.into(),
                    re.into(),
                    im.into(),
                    Cell::from(None::<f64>),
                    plateau.into(),
                    Cell::from(None::<f64>),
                    e.to_string().into(),
                ]);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mut ensemble_t = Table::new(
        &name("ensemble"),
        &["eps_re", "eps_im", "quantity", "mean", "se", "count"],
    );
    for (eps, (xi_min, plateau)) in energies.iter().zip(&per_energy) {
        for (label, values) in [("xi_min", xi_min), ("mean_positive", plateau)] {
            let (mean, se) = mean_se(values);
            ensemble_t.push(vec![
                eps.re.into(),
                eps.im.into(),
                label.into(),
                mean.into(),
                se.into(),
                values.len().into(),
            ]);
        }
    }
    Ok(RunOutput {
        tables: vec![curve_t, bp_t, summary_t, ensemble_t],
        diagnostics,
    })
}

fn hatano_widths(config: &ExperimentConfig) -> Result<Vec<Disorder>, CliError> {
    let base: Disorder = config.model.disorder.into();
    if config.model.w_values.is_empty() {
        return Ok(vec![base]);
    }
    if !matches!(base, Disorder::Uniform { .. }) {
        return Err(CliError::Config("model.w_values needs uniform disorder".into()));
    }
    Ok(config.model.w_values.iter().map(|&w| Disorder::Uniform { w }).collect())
}

fn disorder_label(d: Disorder) -> f64 {
    match d {
        Disorder::Uniform { w } => w,
        Disorder::Cauchy { delta } => delta,
    }
}

struct HatanoRow {
    exponent: Option<f64>,
    oracle: Option<f64>,
    wings: Vec<(f64, anderson::WingsAndLoops)>,
    xi_c: Option<f64>,
    xi_min_direct: Option<f64>,
}

pub fn cmd_hatano(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let one_d = config.model.dims.len() == 1;
    let eps = config.energies()[0];
    let widths = hatano_widths(config)?;
    let xi_scan_max = config.numerics.xi_max.unwrap_or(2.0);
    let mut tasks = Vec::new();
    for &d in &widths {
        for seed in config.seeds() {
            tasks.push((d, seed));
        }
    }
    let oracle_opts = OracleOptions::default();
    let rows: Vec<Result<HatanoRow, Error>> = tasks
        .par_iter()
        .map(|&(d, seed)| {
            let cfg = AndersonConfig::new(config.model.dims.clone(), d, seed);
            let model = build_anderson(&cfg)?;
            let xi_c = first_complex_xi(&model, xi_scan_max, 40, 1e-6)?;
            let xi_min_direct = build_transfer(&model, eps)
                .and_then(|t| exponents_direct(&t))
                .ok()
                .and_then(|ex| ex.positive().first().copied());
            if !one_d {
                return Ok(HatanoRow {
                    exponent: None,
                    oracle: None,
                    wings: Vec::new(),
                    xi_c,
                    xi_min_direct,
                });
            }
            let hp = HatanoPolynomial::from_config(&cfg)?;
            let exponent = hatano_exponent(eps, &hp);
            let oracle = if eps.im == 0.0 {
                let ly = lyapunov_oracle(&cfg, eps.re, config.numerics.oracle_length, oracle_opts)?;
                ly.positive().first().copied()
            } else {
                None
            };
            let wings = config
                .xi_values()
                .into_iter()
                .map(|xi| Ok((xi, hatano_wings_and_loops(&hp, xi)?)))
                .collect::<Result<Vec<_>, Error>>()?;
            Ok(HatanoRow {
                exponent: Some(exponent),
                oracle,
                wings,
                xi_c,
                xi_min_direct,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, Error>>()?;

    let mut xi_c_t = Table::new("hatano_xi_c", &["w", "seed", "xi_c", "xi_min_direct"]);
    let mut exp_t = Table::new(
        "hatano_exponents",
        &["w", "seed", "eps_re", "eps_im", "hatano", "oracle"],
    );
    let mut wings_t = Table::new(
        "hatano_wings",
        &[
            "w",
            "seed",
            "xi",
            "wings",
            "loop_points",
            "wing_excess",
            "loop_level_defect",
            "consistent",
        ],
    );
    let mut diagnostics = Diagnostics::default();
    for (&(d, seed), row) in tasks.iter().zip(&rows) {
        let w = disorder_label(d);
        xi_c_t.push(vec![w.into(), seed.into(), row.xi_c.into(), row.xi_min_direct.into()]);
        if one_d {
            exp_t.push(vec![
                w.into(),
                seed.into(),
                eps.re.into(),
                eps.im.into(),
                row.exponent.into(),
                row.oracle.into(),
            ]);
            for (xi, wl) in &row.wings {
                if !wl.consistent() {
                    diagnostics.warnings.push(format!(
                        "w {w} seed {seed} xi {xi}: wings/loops inconsistent with the exponent levels"
                    ));
                }
                wings_t.push(vec![
                    w.into(),
                    seed.into(),
                    (*xi).into(),
                    wl.wings.len().into(),
                    wl.loop_points.len().into(),
                    wl.wing_excess.into(),
                    wl.loop_level_defect.into(),
                    wl.consistent().into(),
                ]);
            }
        }
    }
    if !one_d {
        diagnostics.warnings.push(
            "exponent, wings and Thouless subreports need a one-dimensional model; only the xi_c scan ran".into(),
        );
        return Ok(RunOutput {
            tables: vec![xi_c_t],
            diagnostics,
        });
    }

    let mut summary_t = Table::new(
        "hatano_summary",
        &[
            "w",
            "count",
            "hatano_mean",
            "hatano_se",
            "oracle_mean",
            "oracle_se",
            "thouless",
        ],
    );
    let per_w = config.seeds().len();
    for (i, &d) in widths.iter().enumerate() {
        let chunk = &rows[i * per_w..(i + 1) * per_w];
        let h: Vec<f64> = chunk.iter().filter_map(|r| r.exponent).collect();
        let o: Vec<f64> = chunk.iter().filter_map(|r| r.oracle).collect();
        let (hm, hs) = mean_se(&h);
        let (om, os) = mean_se(&o);
        let cfg = AndersonConfig::new(config.model.dims.clone(), d, config.model.seed);
        let options = DosOptions {
            bins: config.numerics.dos_bins,
            ..DosOptions::default()
        };
        let thouless = if eps.im == 0.0 {
            let dos = dos_histogram(&cfg, config.model.realizations, options)?;
            Some(thouless_exponent(&dos, eps.re)?)
        } else {
            None
        };
        summary_t.push(vec![
            disorder_label(d).into(),
            per_w.into(),
            hm.into(),
            hs.into(),
            om.into(),
            os.into(),
            thouless.into(),
        ]);
    }
    Ok(RunOutput {
        tables: vec![exp_t, summary_t, wings_t, xi_c_t],
        diagnostics,
    })
}

pub fn cmd_dos(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let cfg = config.anderson(config.model.seed);
    let options = DosOptions {
        bins: config.numerics.dos_bins,
        range: None,
        phi: config.boundary.phi,
    };
    let dos = dos_histogram(&cfg, config.model.realizations, options)?;
    let mut hist = Table::new("dos", &["lo", "hi", "density"]);
    for (e, rho) in dos.edges.windows(2).zip(&dos.density) {
        hist.push(vec![e[0].into(), e[1].into(), (*rho).into()]);
    }
    let mut th = Table::new("dos_thouless", &["eps", "exponent"]);
    for eps in config.energies() {
        th.push(vec![eps.re.into(), thouless_exponent(&dos, eps.re)?.into()]);
    }
    let mut diagnostics = Diagnostics::default();
    diagnostics.extra.insert("realizations".into(), json!(dos.realizations));
    diagnostics.extra.insert("dropped".into(), json!(dos.dropped));
    if dos.dropped > 0 {
        diagnostics
            .warnings
            .push(format!("{} eigenvalues fell outside the histogram range", dos.dropped));
    }
    Ok(RunOutput {
        tables: vec![hist, th],
        diagnostics,
    })
}

struct Instance {
    model: BlockModel,
    eps: Complex64,
    s: Complex64,
}

fn verify_instances(seed: u64, count: usize, unitary_corner: bool) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.random_range(3..=6);
            let m = rng.random_range(1..=3);
            let bonds = [BondKind::Perturbed, BondKind::Unitary, BondKind::Identity][i % 3];
            let mut shape = ModelShape::new(n, m).bonds(bonds);
            if unitary_corner {
                shape = shape.unitary_corner();
            }
            let model = random_model(&mut rng, shape);
            let eps = random_complex(&mut rng) * 2.5;
            let s = Complex64::from_polar(rng.random_range(0.5f64.ln()..3.0).exp(), rng.random_range(0.0..TAU));
            Instance { model, eps, s }
        })
        .collect()
}

/// Duality residual from the dense `H(s)`, optionally with the corner blocks negated.
fn dense_duality_residual(model: &BlockModel, eps: Complex64, s: Complex64, corrupt: bool) -> Result<f64, Error> {
    let n = model.n();
    let m = model.m();
    let mut h = realize_h(model, BoundaryFactor::from_corner(s, n));
    if corrupt {
        let last = (n - 1) * m;
        for i in 0..m {
            for j in 0..m {
                h[(i, last + j)] = -h[(i, last + j)];
                h[(last + i, j)] = -h[(last + i, j)];
            }
        }
    }
    let shifted = h.scale(Complex64::new(-1.0, 0.0)).add_diagonal(eps);
    let left = linalg::log_det(&shifted)
        .ok()
        .map(|d| d.mul(model.det_b_product().inv()));
    let t = build_transfer(model, eps)?;
    let sign = LogDet {
        log_abs: -(m as f64) * s.norm().ln(),
        phase: Complex64::from_polar(1.0, -(m as f64) * s.arg()) * if m % 2 == 1 { -1.0 } else { 1.0 },
    };
    let right = linalg::log_det(&t.matrix.add_diagonal(-s)).ok().map(|d| d.mul(sign));
    Ok(relative_gap(left, right))
}

struct Check {
    name: &'static str,
    threshold: f64,
    values: Vec<f64>,
}

fn max_of(values: &[f64]) -> f64 {
    values
        .iter()
        .copied()
        .fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

pub fn cmd_verify(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let seed = config.model.seed;
    let count = config.numerics.verify_instances;
    let corrupt = config.verify.corrupt_corner;
    let general = verify_instances(seed, count, false);
    let unitary = verify_instances(seed.wrapping_add(1), count, true);

    let collect = |f: &(dyn Fn(&Instance) -> Result<f64, Error> + Sync), set: &[Instance]| -> Result<Vec<f64>, Error> {
        set.par_iter().map(f).collect()
    };

    let mut checks = vec![
        Check {
            name: "duality_dense",
            threshold: 1e-8,
            values: collect(&|i| dense_duality_residual(&i.model, i.eps, i.s, corrupt), &general)?,
        },
        Check {
            name: "duality_structured",
            threshold: 1e-8,
            values: collect(&|i| duality_residual(&i.model, i.eps, i.s), &general)?,
        },
        Check {
            name: "eigenvalue_duality",
            threshold: 1e-6,
            values: collect(
                &|i| {
                    let bf = BoundaryFactor::from_corner(i.s, i.model.n());
                    let mut worst: f64 = 0.0;
                    for lambda in spectrum(&i.model, bf)?.eigenvalues {
                        worst = worst.max(eigenvalue_duality_gap(&i.model, lambda, i.s)?);
                    }
                    Ok(worst)
                },
                &general,
            )?,
        },
        Check {
            name: "symplectic",
            threshold: 1e-10,
            values: collect(
                &|i| {
                    let t = build_transfer(&i.model, i.eps)?;
                    let form = SymplecticForm::new(&i.model);
                    let (a, b) = symplectic_residuals(&i.model, &t, &form)?;
                    let scale = t.matrix.max_abs().powi(2).max(1.0);
                    Ok(a.max(b) / scale)
                },
                &general,
            )?,
        },
        Check {
            name: "hermitian_unit_circle",
            threshold: 1e-12,
            values: collect(
                &|i| {
                    let h = realize_h(&i.model, BoundaryFactor::bloch(i.s.arg()));
                    Ok(h.hermitian_defect() / h.max_abs().max(1.0))
                },
                &general,
            )?,
        },
    ];
    let doubled: Vec<(DoubledModel, Complex64, Complex64)> = unitary
        .iter()
        .map(|i| Ok((DoubledModel::new(i.model.clone())?, i.eps, i.s)))
        .collect::<Result<_, Error>>()?;
    let dcollect =
        |f: &(dyn Fn(&DoubledModel, Complex64, Complex64) -> Result<f64, Error> + Sync)| -> Result<Vec<f64>, Error> {
            doubled.par_iter().map(|(d, e, s)| f(d, *e, *s)).collect()
        };
    checks.push(Check {
        name: "m_duality",
        threshold: 1e-8,
        values: dcollect(&|d, e, s| duality::m_duality_residual(d, e, s))?,
    });
    checks.push(Check {
        name: "k_duality",
        threshold: 1e-8,
        values: dcollect(&|d, e, s| duality::k_duality_residual(d, e, s))?,
    });
    checks.push(Check {
        name: "m_k_relation",
        threshold: 1e-8,
        values: dcollect(&|d, e, s| duality::m_k_residual(d, e, s))?,
    });
    let witnesses: Vec<duality::SymmetryWitness> = doubled
        .par_iter()
        .map(|(d, _, s)| duality::symmetry_residuals(d, *s))
        .collect::<Result<_, Error>>()?;
    checks.push(Check {
        name: "j_symmetry",
        threshold: 1e-12,
        values: witnesses.iter().map(|w| w.j_residual).collect(),
    });
    checks.push(Check {
        name: "s3_symmetry",
        threshold: 1e-12,
        values: witnesses.iter().map(|w| w.s3_residual).collect(),
    });
    checks.push(Check {
        name: "k_inversion_spectrum",
        threshold: 1e-7,
        values: witnesses.iter().map(|w| w.spectral_distance).collect(),
    });

    let mut table = Table::new("verify", &["check", "instances", "max_residual", "threshold", "pass"]);
    let mut failed = Vec::new();
    for c in &checks {
        let worst = max_of(&c.values);
        let pass = worst <= c.threshold;
        if !pass {
            failed.push(c.name.to_string());
        }
        table.push(vec![
            c.name.into(),
            c.values.len().into(),
            worst.into(),
            c.threshold.into(),
            pass.into(),
        ]);
    }
    let mut diagnostics = Diagnostics::default();
    if corrupt {
        diagnostics
            .warnings
            .push("corner blocks of the dense duality check were negated on purpose".into());
    }
    Ok(Outcome {
        output: RunOutput {
            tables: vec![table],
            diagnostics,
        },
        failed_checks: failed,
    })
}
