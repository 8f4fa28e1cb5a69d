//! Run configuration: one TOML file with shared keys and per-command
//! sections, overridable from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::numerics::kernel::Extension;
use crate::numerics::lattice::{BumpParams, Cutoff, LatticeSpec, SignConvention};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub t_max: f64,
    pub lx: f64,
    pub nt: usize,
    pub nx: usize,
    pub epsilon: f64,
    pub sign_convention: SignConvention,
    pub chi: Cutoff,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        let r = LatticeSpec::reference();
        LatticeConfig { t_max: r.t_max, lx: r.lx, nt: r.nt, nx: r.nx, epsilon: r.epsilon, sign_convention: r.sign, chi: r.chi }
    }
}

impl LatticeConfig {
    pub fn spec(&self, d: u32) -> LatticeSpec {
        LatticeSpec {
            d,
            t_max: self.t_max,
            lx: self.lx,
            nt: self.nt,
            nx: self.nx,
            epsilon: self.epsilon,
            sign: self.sign_convention,
            chi: self.chi,
        }
    }
}

/// A named pair of bump test functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observable {
    pub name: String,
    pub f1: BumpParams,
    pub f2: BumpParams,
}

fn bump(t: f64, x: f64, rt: f64, rx: f64) -> BumpParams {
    BumpParams { center_t: t, center_x: x, radius_t: rt, radius_x: rx, plateau: 0.0, amplitude: 1.0 }
}

fn obs(name: &str, f1: BumpParams, f2: BumpParams) -> Observable {
    Observable { name: name.into(), f1, f2 }
}

/// Five pairs with disjoint supports inside the cutoff plateau region.
pub fn default_observables() -> Vec<Observable> {
    vec![
        obs("early_late", bump(0.3, 2.6, 0.12, 0.6), bump(0.7, 3.2, 0.12, 0.6)),
        obs("equal_time", bump(0.5, 2.2, 0.12, 0.6), bump(0.5, 3.6, 0.12, 0.6)),
        obs("late_early", bump(0.8, 3.0, 0.1, 0.6), bump(0.6, 3.4, 0.08, 0.6)),
        obs("far", bump(0.25, 3.6, 0.1, 0.5), bump(0.85, 2.7, 0.1, 0.5)),
        obs("diagonal", bump(0.65, 2.4, 0.1, 0.5), bump(0.75, 4.0, 0.1, 0.5)),
    ]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpandSection {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeSection {
    pub k_max: u32,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        AnalyzeSection { k_max: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelateSection {
    /// Number of points `m`.
    pub points: usize,
    /// Evaluate two-point diagrams on the lattice.
    pub evaluate: bool,
}

impl Default for CorrelateSection {
    fn default() -> Self {
        CorrelateSection { points: 2, evaluate: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Couplings for the first-order runs; empty skips them.
    pub lambdas: Vec<f64>,
    pub scaling: bool,
    pub decay: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { lambdas: vec![0.02, 0.05], scaling: true, decay: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub n_real_covariance: usize,
    pub n_real_slope: usize,
    pub wick_cases: usize,
    pub slope_pair: Observable,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            n_real_covariance: 10_000,
            n_real_slope: 20_000,
            wick_cases: 600,
            slope_pair: obs("slope", bump(0.7, 3.0, 0.15, 0.8), bump(0.8, 3.4, 0.12, 0.8)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub kappa: u32,
    pub order: u32,
    pub d: u32,
    pub lambda: f64,
    pub n_real: usize,
    pub extension: Extension,
    pub lattice: LatticeConfig,
    pub observables: Vec<Observable>,
    pub expand: ExpandSection,
    pub analyze: AnalyzeSection,
    pub correlate: CorrelateSection,
    pub simulate: SimulateSection,
    pub verify: VerifySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 20_240_601,
            out: PathBuf::from("snls-out"),
            kappa: 1,
            order: 2,
            d: 1,
            lambda: 0.05,
            n_real: 10_000,
            extension: Extension::EpsilonCut,
            lattice: LatticeConfig::default(),
            observables: default_observables(),
            expand: ExpandSection::default(),
            analyze: AnalyzeSection::default(),
            correlate: CorrelateSection::default(),
            simulate: SimulateSection::default(),
            verify: VerifySection::default(),
        }
    }
}

/// A configuration problem, with the 1-based line it points at when known.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        ConfigError { line: None, message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Expand,
    Expect,
    Correlate,
    Analyze,
    Simulate,
    Verify,
}

/// Command-line overrides.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub order: Option<u32>,
    pub kappa: Option<u32>,
    pub dim: Option<u32>,
    pub lambda: Option<f64>,
    pub realizations: Option<usize>,
}

/// Manifest written next to every run's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub version: String,
    pub config: RunConfig,
    pub lattice_spec: LatticeSpec,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key = …` assignment, for semantic diagnostics.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl RunConfig {
    /// Parses TOML text.
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })
    }

    /// Reads a TOML config or a JSON manifest written by a previous run.
    pub fn load(path: &Path) -> Result<(RunConfig, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|x| x == "json") {
            let m: Manifest = serde_json::from_str(&text)
                .map_err(|e| ConfigError { line: Some(e.line()), message: e.to_string() })?;
            return Ok((m.config, String::new()));
        }
        Ok((RunConfig::from_toml(&text)?, text))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.order {
            self.order = v;
        }
        if let Some(v) = o.kappa {
            self.kappa = v;
        }
        if let Some(v) = o.dim {
            self.d = v;
        }
        if let Some(v) = o.lambda {
            self.lambda = v;
        }
        if let Some(v) = o.realizations {
            self.n_real = v;
        }
    }

    pub fn spec(&self) -> LatticeSpec {
        self.lattice.spec(self.d)
    }

    /// Checks the keys the command reads. `source` is the config text, used
    /// to point diagnostics at a line.
    pub fn validate(&self, cmd: Command, source: &str) -> Result<(), ConfigError> {
        let err = |key: &str, msg: String| ConfigError { line: key_line(source, key), message: format!("{key}: {msg}") };
        let symbolic = matches!(cmd, Command::Expand | Command::Expect | Command::Correlate | Command::Analyze);
        if (symbolic || cmd == Command::Simulate) && self.kappa == 0 {
            return Err(err("kappa", "must be at least 1".into()));
        }
        if matches!(cmd, Command::Expand | Command::Expect | Command::Correlate) && self.order > 6 {
            return Err(err("order", format!("{} exceeds the supported maximum 6", self.order)));
        }
        if cmd == Command::Analyze {
            if self.d == 0 {
                return Err(err("d", "must be positive".into()));
            }
            if self.analyze.k_max > 12 {
                return Err(err("k_max", "at most 12".into()));
            }
        }
        if cmd == Command::Correlate && self.correlate.points == 0 {
            return Err(err("points", "must be positive".into()));
        }
        let numeric = cmd == Command::Simulate || (cmd == Command::Correlate && self.correlate.evaluate && self.correlate.points == 2);
        if numeric {
            if self.d != 1 {
                return Err(err("d", format!("lattice runs support d = 1, got {}", self.d)));
            }
            self.spec().validate().map_err(|e| ConfigError { line: key_line(source, "nt").or_else(|| key_line(source, "t_max")), message: e.to_string() })?;
            if self.observables.is_empty() {
                return Err(ConfigError::new("at least one [[observables]] entry is required"));
            }
        }
        if cmd == Command::Simulate {
            if self.n_real < crate::numerics::simulate::MIN_REALIZATIONS {
                return Err(err("n_real", format!("at least {} realizations", crate::numerics::simulate::MIN_REALIZATIONS)));
            }
            if self.simulate.lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                return Err(err("lambdas", "couplings must be positive".into()));
            }
        }
        if cmd == Command::Verify {
            self.lattice.spec(1).validate().map_err(|e| ConfigError::new(e.to_string()))?;
            if self.verify.n_real_covariance < 100 || self.verify.n_real_slope < 100 {
                return Err(err("n_real_covariance", "at least 100 realizations".into()));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
