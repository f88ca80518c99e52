//! Experiment configuration: TOML tree, defaults and validation with field paths.

use std::path::{Path, PathBuf};

use nf_core::field::FieldInit;
use nf_core::history::HistorySegment;
use nf_core::model::{Boundary, DelayLaw, Domain, Drive, FinitePopulationModel, KernelNorm, NeuralFieldModel};
use nf_core::sigmoid::SigmoidSpec;
use nf_core::spectral::DispersionConvention;
use nf_core::CoreError;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FiniteDde,
    Field,
    Synchronized,
    HopfCurves,
    Dispersion,
    TuringHopf,
    NetworkValidate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FiniteDde => "finite-dde",
            ExperimentKind::Field => "field",
            ExperimentKind::Synchronized => "synchronized",
            ExperimentKind::HopfCurves => "hopf-curves",
            ExperimentKind::Dispersion => "dispersion",
            ExperimentKind::TuringHopf => "turing-hopf",
            ExperimentKind::NetworkValidate => "network-validate",
        }
    }

    /// Names accepted by `[sweep] parameter`.
    pub fn sweepable(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::FiniteDde | ExperimentKind::NetworkValidate => &["noise", "tau", "gain", "sigma"],
            ExperimentKind::Field | ExperimentKind::Synchronized => &["noise", "sigma", "gain", "synaptic-delay"],
            ExperimentKind::Dispersion => &["noise", "gain", "v0", "synaptic-delay"],
            ExperimentKind::TuringHopf => &["noise", "gain", "v0"],
            ExperimentKind::HopfCurves => &["gain"],
        }
    }
}

/// A single value or one value per population/layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, n: usize, path: &str) -> Result<Vec<T>, CliError> {
        match self {
            OneOrMany::One(x) => Ok(vec![x.clone(); n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => Err(CliError::validation(path, format!("expected {n} entries, found {}", v.len()))),
        }
    }
}

/// A single value broadcast to every entry, or a full matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrMatrix {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl ScalarOrMatrix {
    fn expand(&self, n: usize, path: &str) -> Result<Vec<Vec<f64>>, CliError> {
        match self {
            ScalarOrMatrix::Scalar(x) => Ok(vec![vec![*x; n]; n]),
            ScalarOrMatrix::Matrix(m) if m.len() == n && m.iter().all(|r| r.len() == n) => Ok(m.clone()),
            ScalarOrMatrix::Matrix(_) => Err(CliError::validation(path, format!("expected a {n}x{n} matrix"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmoidBlock {
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default)]
    pub offset: f64,
    /// Piecewise-linear profile instead of the probit.
    #[serde(default)]
    pub table: Option<TableBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableBlock {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Default for SigmoidBlock {
    fn default() -> Self {
        Self { gain: 1.0, offset: 0.0, table: None }
    }
}

impl SigmoidBlock {
    pub fn spec(&self) -> Result<SigmoidSpec, CliError> {
        let spec = match &self.table {
            None => SigmoidSpec::probit(self.gain, self.offset),
            Some(t) => SigmoidSpec::table(self.gain, self.offset, t.x.clone(), t.y.clone()).map_err(|e| core_to_cli(e, "sigmoid"))?,
        };
        spec.validate().map_err(|e| core_to_cli(e, "sigmoid"))?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteBlock {
    pub j: Vec<Vec<f64>>,
    pub input: OneOrMany<Drive>,
    pub noise: OneOrMany<Drive>,
    #[serde(default = "zero_matrix")]
    pub tau: ScalarOrMatrix,
    #[serde(default = "zero_matrix")]
    pub sigma: ScalarOrMatrix,
    #[serde(default = "unit")]
    pub theta: OneOrMany<f64>,
    /// Constant initial means; zero when absent.
    #[serde(default)]
    pub init_mu: Option<Vec<f64>>,
    /// Constant initial variances; the stationary value `theta lambda^2 / 2` when absent.
    #[serde(default)]
    pub init_v: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    #[serde(default = "periodic")]
    pub boundary: Boundary,
    /// Inferred from the boundary when absent.
    #[serde(default)]
    pub domain: Option<Domain>,
    pub widths: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    #[serde(default)]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    pub density: f64,
    #[serde(default)]
    pub delay: DelayLaw,
    pub noise: OneOrMany<Drive>,
    pub input: OneOrMany<Drive>,
    #[serde(default = "unit")]
    pub theta: OneOrMany<f64>,
    #[serde(default)]
    pub kernel_norm: KernelNorm,
    #[serde(default)]
    pub init: Option<FieldInit>,
    /// Variance of the homogeneous state for spectral kinds; `theta Lambda^2 / 2` when absent.
    #[serde(default)]
    pub v0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "hundred")]
    pub t_end: f64,
    /// Grid nodes for field runs.
    #[serde(default = "default_nodes")]
    pub n: usize,
    #[serde(default = "ten")]
    pub record_every: usize,
    /// Also write the binary field dump.
    #[serde(default)]
    pub binary: bool,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self { dt: None, t_end: 100.0, n: 512, record_every: 10, binary: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralBlock {
    #[serde(default)]
    pub m_min: i32,
    #[serde(default = "four")]
    pub m_max: i32,
    #[serde(default = "default_lambdas")]
    pub n_lambda: usize,
    #[serde(default = "sixteen")]
    pub n_modes: u32,
    #[serde(default)]
    pub convention: DispersionConvention,
    /// Wavenumbers for Turing-Hopf curves.
    #[serde(default = "first_mode")]
    pub k: Vec<i64>,
    /// Extra seeds `[re, im]` for the mode root search.
    #[serde(default)]
    pub nu_query: Vec<[f64; 2]>,
}

impl Default for SpectralBlock {
    fn default() -> Self {
        Self {
            m_min: 0,
            m_max: 4,
            n_lambda: 100,
            n_modes: 16,
            convention: DispersionConvention::default(),
            k: vec![1],
            nu_query: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBlock {
    /// Total neuron counts, split evenly over populations.
    pub sizes: Vec<usize>,
    /// Number of neurons whose paths are written out.
    #[serde(default)]
    pub trace: usize,
    #[serde(default)]
    pub sample_times: Vec<f64>,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "ten")]
    pub record_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepBlock {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.from];
        }
        (0..self.steps).map(|i| self.from + (self.to - self.from) * i as f64 / (self.steps - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    /// Equilibria with their stability (finite-dde).
    #[serde(default)]
    pub equilibria: bool,
    /// Unstable root counts at each equilibrium (finite-dde).
    #[serde(default)]
    pub roots: bool,
    /// Regime classification (synchronized).
    #[serde(default)]
    pub regimes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub sigmoid: SigmoidBlock,
    #[serde(default)]
    pub finite: Option<FiniteBlock>,
    #[serde(default)]
    pub field: Option<FieldBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub spectral: SpectralBlock,
    #[serde(default)]
    pub network: Option<NetworkBlock>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub analysis: AnalysisBlock,
}

fn one() -> f64 {
    1.0
}
fn unit() -> OneOrMany<f64> {
    OneOrMany::One(1.0)
}
fn zero_matrix() -> ScalarOrMatrix {
    ScalarOrMatrix::Scalar(0.0)
}
fn periodic() -> Boundary {
    Boundary::Periodic
}
fn hundred() -> f64 {
    100.0
}
fn default_nodes() -> usize {
    512
}
fn ten() -> usize {
    10
}
fn four() -> i32 {
    4
}
fn sixteen() -> u32 {
    16
}
fn default_lambdas() -> usize {
    100
}
fn first_mode() -> Vec<i64> {
    vec![1]
}
fn default_pairs() -> usize {
    1000
}

/// Maps a core error onto a CLI error, prefixing parameter names with the config block.
pub fn core_to_cli(e: CoreError, block: &str) -> CliError {
    match e {
        CoreError::InvalidParameter { name, reason } => CliError::validation(&format!("{block}.{name}"), reason),
        other => CliError::Solver(other),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Stable serialized form used for hashing.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    fn finite_block(&self) -> Result<&FiniteBlock, CliError> {
        self.finite.as_ref().ok_or_else(|| CliError::validation("finite", format!("required for kind {}", self.kind.name())))
    }

    fn field_block(&self) -> Result<&FieldBlock, CliError> {
        self.field.as_ref().ok_or_else(|| CliError::validation("field", format!("required for kind {}", self.kind.name())))
    }

    pub fn network_block(&self) -> Result<&NetworkBlock, CliError> {
        self.network.as_ref().ok_or_else(|| CliError::validation("network", "required for kind network-validate"))
    }

    /// Copy with one named parameter replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self, CliError> {
        let mut c = self.clone();
        let bad = || CliError::validation("sweep.parameter", format!("`{name}` is not sweepable for kind {}", self.kind.name()));
        if !self.kind.sweepable().contains(&name) {
            return Err(bad());
        }
        match name {
            "gain" => c.sigmoid.gain = value,
            "noise" => {
                if let Some(f) = c.finite.as_mut() {
                    f.noise = OneOrMany::One(Drive::Const(value));
                }
                if let Some(f) = c.field.as_mut() {
                    f.noise = OneOrMany::One(Drive::Const(value));
                }
            }
            "tau" => c.finite.as_mut().ok_or_else(bad)?.tau = ScalarOrMatrix::Scalar(value),
            "sigma" => {
                if let Some(f) = c.finite.as_mut() {
                    f.sigma = ScalarOrMatrix::Scalar(value);
                }
                if let Some(f) = c.field.as_mut() {
                    let l = f.widths.len();
                    f.sigma = Some(vec![vec![value; l]; l]);
                }
            }
            "synaptic-delay" => c.field.as_mut().ok_or_else(bad)?.delay.synaptic = value,
            "v0" => c.field.as_mut().ok_or_else(bad)?.v0 = Some(value),
            _ => return Err(bad()),
        }
        Ok(c)
    }

    pub fn specs(&self, count: usize) -> Result<Vec<SigmoidSpec>, CliError> {
        Ok(vec![self.sigmoid.spec()?; count])
    }

    pub fn finite_model(&self) -> Result<FinitePopulationModel, CliError> {
        let f = self.finite_block()?;
        let p = f.j.len();
        if p == 0 || f.j.iter().any(|r| r.len() != p) {
            return Err(CliError::validation("finite.j", "must be a non-empty square matrix"));
        }
        let model = FinitePopulationModel {
            j: f.j.clone(),
            sigma: f.sigma.expand(p, "finite.sigma")?,
            tau: f.tau.expand(p, "finite.tau")?,
            theta: f.theta.expand(p, "finite.theta")?,
            input: f.input.expand(p, "finite.input")?,
            noise: f.noise.expand(p, "finite.noise")?,
        };
        model.validate().map_err(|e| core_to_cli(e, "finite"))?;
        Ok(model)
    }

    pub fn finite_init(&self, model: &FinitePopulationModel) -> Result<HistorySegment, CliError> {
        let f = self.finite_block()?;
        let p = model.populations();
        let mu = f.init_mu.clone().unwrap_or_else(|| vec![0.0; p]);
        let v = match &f.init_v {
            Some(v) => v.clone(),
            None => (0..p).map(|a| model.theta[a] * model.noise[a].at(0.0).powi(2) / 2.0).collect(),
        };
        if mu.len() != p {
            return Err(CliError::validation("finite.init_mu", format!("expected {p} entries")));
        }
        if v.len() != p || v.iter().any(|x| !(*x >= 0.0)) {
            return Err(CliError::validation("finite.init_v", format!("expected {p} non-negative entries")));
        }
        Ok(HistorySegment::constant(mu.into_iter().chain(v).collect(), model.max_delay()))
    }

    pub fn field_model(&self) -> Result<NeuralFieldModel, CliError> {
        let f = self.field_block()?;
        let l = f.widths.len();
        if !(1..=2).contains(&l) {
            return Err(CliError::validation("field.widths", "one or two layers supported"));
        }
        let domain = f.domain.unwrap_or(if f.boundary == Boundary::Periodic { Domain::Circle } else { Domain::Interval });
        let model = NeuralFieldModel {
            domain,
            boundary: f.boundary,
            widths: f.widths.clone(),
            w: f.w.clone(),
            sigma: f.sigma.clone().unwrap_or_else(|| vec![vec![0.0; l]; l]),
            density: f.density,
            delay: f.delay,
            noise: f.noise.expand(l, "field.noise")?,
            input: f.input.expand(l, "field.input")?,
            theta: f.theta.expand(l, "field.theta")?,
            kernel_norm: f.kernel_norm,
        };
        model.validate().map_err(|e| core_to_cli(e, "field"))?;
        Ok(model)
    }

    /// Initial law of a field run; homogeneous stationary variance and zero mean by default.
    pub fn field_init(&self, model: &NeuralFieldModel) -> Result<FieldInit, CliError> {
        let f = self.field_block()?;
        let l = model.layers();
        let init = match &f.init {
            Some(i) => i.clone(),
            None => FieldInit::homogeneous(&vec![0.0; l], &self.stationary_variances(model)),
        };
        if init.mu.len() != l || init.v.len() != l {
            return Err(CliError::validation("field.init", format!("expected {l} mean profiles and {l} variances")));
        }
        if init.v.iter().any(|x| !(*x >= 0.0)) {
            return Err(CliError::validation("field.init.v", "variances must be >= 0"));
        }
        Ok(init)
    }

    fn stationary_variances(&self, model: &NeuralFieldModel) -> Vec<f64> {
        (0..model.layers()).map(|a| model.theta[a] * model.noise[a].at(0.0).powi(2) / 2.0).collect()
    }

    pub fn v0(&self, model: &NeuralFieldModel) -> Result<f64, CliError> {
        let f = self.field_block()?;
        match f.v0 {
            Some(v) if v >= 0.0 => Ok(v),
            Some(_) => Err(CliError::validation("field.v0", "must be >= 0")),
            None if model.sigma[0][0] == 0.0 => Ok(self.stationary_variances(model)[0]),
            None => Err(CliError::validation("field.v0", "required when sigma != 0")),
        }
    }

    pub fn dt(&self, fallback: f64) -> Result<f64, CliError> {
        match self.solver.dt {
            Some(dt) if dt > 0.0 && dt.is_finite() => Ok(dt),
            Some(_) => Err(CliError::validation("solver.dt", "must be > 0")),
            None => Ok(fallback),
        }
    }

    /// Structural checks plus a full model build at every sweep value.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.solver.t_end > 0.0 && self.solver.t_end.is_finite()) {
            return Err(CliError::validation("solver.t_end", "must be > 0"));
        }
        self.dt(1.0)?;
        if self.solver.record_every == 0 {
            return Err(CliError::validation("solver.record_every", "must be >= 1"));
        }
        if self.spectral.m_min > self.spectral.m_max {
            return Err(CliError::validation("spectral.m_min", "range is empty"));
        }
        if let Some(s) = &self.sweep {
            if s.steps == 0 {
                return Err(CliError::validation("sweep.steps", "range is empty"));
            }
            if !(s.from.is_finite() && s.to.is_finite()) {
                return Err(CliError::validation("sweep.from", "bounds must be finite"));
            }
            if !self.kind.sweepable().contains(&s.parameter.as_str()) {
                return Err(CliError::validation(
                    "sweep.parameter",
                    format!("`{}` is not a parameter of kind {}; expected one of {:?}", s.parameter, self.kind.name(), self.kind.sweepable()),
                ));
            }
        }
        match self.kind {
            ExperimentKind::FiniteDde | ExperimentKind::NetworkValidate => {
                if self.field.is_some() {
                    return Err(CliError::validation("field", format!("not used by kind {}", self.kind.name())));
                }
            }
            ExperimentKind::HopfCurves => {
                if self.finite.is_some() || self.field.is_some() {
                    return Err(CliError::validation("hopf-curves", "the rotation pair is fixed; remove model blocks"));
                }
            }
            _ => {
                if self.finite.is_some() {
                    return Err(CliError::validation("finite", format!("not used by kind {}", self.kind.name())));
                }
            }
        }
        if self.kind == ExperimentKind::NetworkValidate {
            let n = self.network_block()?;
            if n.sizes.is_empty() || n.sizes.contains(&0) {
                return Err(CliError::validation("network.sizes", "needs at least one positive size"));
            }
        }
        let values = self.sweep.as_ref().map_or(vec![None], |s| s.values().into_iter().map(Some).collect());
        for v in values {
            let c = match (v, &self.sweep) {
                (Some(v), Some(s)) => self.with_parameter(&s.parameter, v)?,
                _ => self.clone(),
            };
            c.sigmoid.spec()?;
            match c.kind {
                ExperimentKind::FiniteDde | ExperimentKind::NetworkValidate => {
                    let m = c.finite_model()?;
                    c.finite_init(&m)?;
                }
                ExperimentKind::Field | ExperimentKind::Synchronized => {
                    let m = c.field_model()?;
                    c.field_init(&m)?;
                }
                ExperimentKind::Dispersion | ExperimentKind::TuringHopf => {
                    let m = c.field_model()?;
                    if m.layers() != 1 {
                        return Err(CliError::validation("field.widths", "spectral kinds need one layer"));
                    }
                    c.v0(&m)?;
                }
                ExperimentKind::HopfCurves => {}
            }
        }
        check_writable(&self.output)
    }
}

/// The output directory, or its nearest existing ancestor, must accept new files.
fn check_writable(dir: &Path) -> Result<(), CliError> {
    let mut probe_dir = dir.to_path_buf();
    while !probe_dir.exists() {
        match probe_dir.parent() {
            Some(p) if !p.as_os_str().is_empty() => probe_dir = p.to_path_buf(),
            _ => {
                probe_dir = PathBuf::from(".");
                break;
            }
        }
    }
    if !probe_dir.is_dir() {
        return Err(CliError::validation("output", format!("{} is not a directory", probe_dir.display())));
    }
    let probe = probe_dir.join(format!(".nf-write-probe-{}", std::process::id()));
    match std::fs::write(&probe, b"") {
        Ok(()) => {
            let _ = std::fs::remove_file(&probe);
            Ok(())
        }
        Err(e) => Err(CliError::validation("output", format!("{} is not writable: {e}", probe_dir.display()))),
    }
}
