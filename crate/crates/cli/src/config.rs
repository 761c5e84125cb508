//! Experiment configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use andersonspec::anderson::{AndersonConfig, Disorder};
use andersonspec::spectral::QuadratureOptions;
use andersonspec::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const WORKERS_ENV: &str = "ANDERSONSPEC_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Spectrum,
    Exponents,
    Lyapunov,
    Hatano,
    Verify,
    Dos,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Exponents => "exponents",
            Command::Lyapunov => "lyapunov",
            Command::Hatano => "hatano",
            Command::Verify => "verify",
            Command::Dos => "dos",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DisorderSpec {
    Uniform { w: f64 },
    Cauchy { delta: f64 },
}

impl From<DisorderSpec> for Disorder {
    fn from(d: DisorderSpec) -> Self {
        match d {
            DisorderSpec::Uniform { w } => Disorder::Uniform { w },
            DisorderSpec::Cauchy { delta } => Disorder::Cauchy { delta },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Lattice lengths; the last entry is the chain length `n`.
    pub dims: Vec<usize>,
    pub disorder: DisorderSpec,
    /// Master seed. Realization `r` uses `seed + r`.
    pub seed: u64,
    pub realizations: usize,
    /// Disorder widths for the `hatano` sweep; empty means the model's own width.
    pub w_values: Vec<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            dims: vec![3, 50],
            disorder: DisorderSpec::Uniform { w: 7.0 },
            seed: 0,
            realizations: 1,
            w_values: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySection {
    pub xi: f64,
    /// Corner phase.
    pub phi: f64,
    /// When non-empty, replaces `xi` by a list of values.
    pub xi_values: Vec<f64>,
    /// Corner phases `phi + 2 pi j / phi_steps` for `j < phi_steps`.
    pub phi_steps: usize,
}

impl Default for BoundarySection {
    fn default() -> Self {
        BoundarySection {
            xi: 1.0,
            phi: 0.0,
            xi_values: Vec::new(),
            phi_steps: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub re: f64,
    pub im: f64,
    /// When non-empty, a grid of real parts sharing `im`.
    pub re_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    pub n_angles: usize,
    pub adaptive: bool,
    pub tol: f64,
    pub max_angles: usize,
    pub xi_step: f64,
    /// Upper end of curve grids and scans; `None` picks a model-based value.
    pub xi_max: Option<f64>,
    pub workers: Option<usize>,
    /// Chain length of the QR Lyapunov oracle in `hatano`.
    pub oracle_length: usize,
    pub dos_bins: usize,
    /// Random instances per check in `verify`.
    pub verify_instances: usize,
    /// Fail instead of warning on unresolved breakpoint clusters.
    pub strict: bool,
}

impl Default for NumericsSection {
    fn default() -> Self {
        let q = QuadratureOptions::default();
        NumericsSection {
            n_angles: q.n_angles,
            adaptive: q.adaptive,
            tol: q.tol,
            max_angles: q.max_angles,
            xi_step: 0.02,
            xi_max: None,
            workers: None,
            oracle_length: 20_000,
            dos_bins: 200,
            verify_instances: 100,
            strict: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
    /// Significant digits of floating-point output.
    pub precision: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            format: Format::Csv,
            precision: 17,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Flip the sign of the corner blocks in the dense duality check.
    pub corrupt_corner: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub model: ModelSection,
    pub boundary: BoundarySection,
    pub energy: EnergySection,
    pub numerics: NumericsSection,
    pub output: OutputSection,
    pub verify: VerifySection,
}

/// Command-line values that replace config keys when present.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub angles: Option<usize>,
    pub tol: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies overrides, fills the worker count and validates.
    pub fn resolve(mut self, command: Command, o: &Overrides) -> Result<Self, CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::Config(format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        self.command = Some(command);
        if let Some(v) = o.seed {
            self.model.seed = v;
        }
        if let Some(v) = o.workers {
            self.numerics.workers = Some(v);
        }
        if let Some(v) = &o.out {
            self.output.dir = v.clone();
        }
        if let Some(v) = o.format {
            self.output.format = v;
        }
        if let Some(v) = o.angles {
            self.numerics.n_angles = v;
        }
        if let Some(v) = o.tol {
            self.numerics.tol = v;
        }
        if self.numerics.workers.is_none() {
            self.numerics.workers = Some(default_workers()?);
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        let m = &self.model;
        if m.dims.is_empty() || m.dims.iter().any(|&d| d == 0) {
            return bad("model.dims must be non-empty and positive");
        }
        if m.dims[m.dims.len() - 1] < 3 {
            return bad("model.dims: chain length must be at least 3");
        }
        if m.realizations == 0 {
            return bad("model.realizations must be positive");
        }
        match m.disorder {
            DisorderSpec::Uniform { w } if !(w.is_finite() && w >= 0.0) => return bad("disorder.w must be >= 0"),
            DisorderSpec::Cauchy { delta } if !(delta.is_finite() && delta > 0.0) => {
                return bad("disorder.delta must be > 0")
            }
            _ => {}
        }
        if m.w_values.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("model.w_values must be finite and >= 0");
        }
        let b = &self.boundary;
        if !b.xi.is_finite() || !b.phi.is_finite() || b.xi_values.iter().any(|x| !x.is_finite()) {
            return bad("boundary values must be finite");
        }
        if b.phi_steps == 0 {
            return bad("boundary.phi_steps must be positive");
        }
        let e = &self.energy;
        if !e.re.is_finite() || !e.im.is_finite() || e.re_values.iter().any(|x| !x.is_finite()) {
            return bad("energy values must be finite");
        }
        let n = &self.numerics;
        if n.n_angles == 0 || n.max_angles < n.n_angles {
            return bad("numerics: need 0 < n_angles <= max_angles");
        }
        if !(n.tol.is_finite() && n.tol > 0.0) {
            return bad("numerics.tol must be > 0");
        }
        if !(n.xi_step.is_finite() && n.xi_step > 0.0) {
            return bad("numerics.xi_step must be > 0");
        }
        if let Some(x) = n.xi_max {
            if !(x.is_finite() && x > 0.0) {
                return bad("numerics.xi_max must be > 0");
            }
        }
        if n.workers == Some(0) {
            return bad("numerics.workers must be positive");
        }
        if n.oracle_length == 0 || n.dos_bins == 0 || n.verify_instances == 0 {
            return bad("numerics counts must be positive");
        }
        if !(1..=17).contains(&self.output.precision) {
            return bad("output.precision must be in 1..=17");
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.numerics.workers.unwrap_or(1)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.model.realizations as u64)
            .map(|r| self.model.seed.wrapping_add(r))
            .collect()
    }

    pub fn anderson(&self, seed: u64) -> AndersonConfig {
        AndersonConfig::new(self.model.dims.clone(), self.model.disorder.into(), seed)
    }

    pub fn xi_values(&self) -> Vec<f64> {
        if self.boundary.xi_values.is_empty() {
            vec![self.boundary.xi]
        } else {
            self.boundary.xi_values.clone()
        }
    }

    pub fn phi_values(&self) -> Vec<f64> {
        let steps = self.boundary.phi_steps;
        (0..steps)
            .map(|j| self.boundary.phi + std::f64::consts::TAU * j as f64 / steps as f64)
            .collect()
    }

    pub fn energies(&self) -> Vec<Complex64> {
        if self.energy.re_values.is_empty() {
            vec![Complex64::new(self.energy.re, self.energy.im)]
        } else {
            self.energy
                .re_values
                .iter()
                .map(|&re| Complex64::new(re, self.energy.im))
                .collect()
        }
    }

    pub fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions {
            n_angles: self.numerics.n_angles,
            adaptive: self.numerics.adaptive,
            tol: self.numerics.tol,
            max_angles: self.numerics.max_angles,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the resolved config with the worker count removed, so the
    /// hash identifies the computation rather than how it was scheduled.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.numerics.workers = None;
        let digest = Sha256::digest(serde_json::to_vec(&canonical).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn default_workers() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&w| w > 0)
            .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}
