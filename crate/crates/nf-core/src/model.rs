//! Model descriptions for finite population networks and neural fields.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Time-dependent scalar input (currents, noise amplitudes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Drive {
    Const(f64),
    Shaped(Shape),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    Step { before: f64, after: f64, at: f64 },
    Sine { mean: f64, amplitude: f64, period: f64 },
}

impl Drive {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Drive::Const(c) => *c,
            Drive::Shaped(Shape::Step { before, after, at }) => {
                if t < *at {
                    *before
                } else {
                    *after
                }
            }
            Drive::Shaped(Shape::Sine { mean, amplitude, period }) => {
                mean + amplitude * (2.0 * std::f64::consts::PI * t / period).sin()
            }
        }
    }

    /// Lower bound over all times.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Drive::Const(c) => *c,
            Drive::Shaped(Shape::Step { before, after, .. }) => before.min(*after),
            Drive::Shaped(Shape::Sine { mean, amplitude, .. }) => mean - amplitude.abs(),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            Drive::Const(c) => c.abs(),
            Drive::Shaped(Shape::Step { before, after, .. }) => before.abs().max(after.abs()),
            Drive::Shaped(Shape::Sine { mean, amplitude, .. }) => mean.abs() + amplitude.abs(),
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Drive::Const(_))
    }

    fn finite(&self) -> bool {
        match self {
            Drive::Const(c) => c.is_finite(),
            Drive::Shaped(Shape::Step { before, after, at }) => {
                before.is_finite() && after.is_finite() && at.is_finite()
            }
            Drive::Shaped(Shape::Sine { mean, amplitude, period }) => {
                mean.is_finite() && amplitude.is_finite() && period.is_finite() && *period > 0.0
            }
        }
    }
}

impl From<f64> for Drive {
    fn from(c: f64) -> Self {
        Drive::Const(c)
    }
}

/// `P` interacting populations with delayed mean-field coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinitePopulationModel {
    /// Synaptic weights, row = receiving population.
    pub j: Vec<Vec<f64>>,
    /// Synaptic noise amplitudes.
    pub sigma: Vec<Vec<f64>>,
    /// Transmission delays.
    pub tau: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub input: Vec<Drive>,
    pub noise: Vec<Drive>,
}

impl FinitePopulationModel {
    pub fn populations(&self) -> usize {
        self.theta.len()
    }

    /// Uniform delay, unit time constants, no synaptic noise.
    pub fn simple(j: Vec<Vec<f64>>, input: Vec<f64>, noise: f64, tau: f64) -> Self {
        let p = j.len();
        Self {
            j,
            sigma: vec![vec![0.0; p]; p],
            tau: vec![vec![tau; p]; p],
            theta: vec![1.0; p],
            input: input.into_iter().map(Drive::Const).collect(),
            noise: vec![Drive::Const(noise); p],
        }
    }

    pub fn max_delay(&self) -> f64 {
        self.tau.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    pub fn min_positive_delay(&self) -> Option<f64> {
        self.tau.iter().flatten().copied().filter(|&t| t > 0.0).reduce(f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.populations();
        if p == 0 {
            return Err(invalid("theta", "at least one population required"));
        }
        for (name, m) in [("j", &self.j), ("sigma", &self.sigma), ("tau", &self.tau)] {
            if m.len() != p || m.iter().any(|r| r.len() != p) {
                return Err(invalid(name, format!("must be {p}x{p}")));
            }
            if m.iter().flatten().any(|x| !x.is_finite()) {
                return Err(invalid(name, "entries must be finite"));
            }
        }
        if let Some((i, t)) = self.theta.iter().enumerate().find(|(_, &t)| !(t > 0.0 && t.is_finite())) {
            return Err(invalid(&format!("theta[{i}]"), format!("must be > 0, got {t}")));
        }
        if self.tau.iter().flatten().any(|&t| t < 0.0) {
            return Err(invalid("tau", "delays must be >= 0"));
        }
        if self.input.len() != p || self.noise.len() != p {
            return Err(invalid("input/noise", format!("need {p} entries")));
        }
        if self.input.iter().chain(&self.noise).any(|d| !d.finite()) {
            return Err(invalid("input/noise", "drives must be finite"));
        }
        if let Some(i) = self.noise.iter().position(|d| d.lower_bound() < 0.0) {
            return Err(invalid(&format!("noise[{i}]"), "noise amplitude must be >= 0"));
        }
        Ok(())
    }

    /// `min_alpha lambda_alpha` over time.
    pub fn noise_floor(&self) -> f64 {
        self.noise.iter().map(Drive::lower_bound).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// `[0, 1)` with periodic identification.
    Circle,
    /// `[0, 1]`.
    Interval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    /// Even continuation of the state across both ends.
    Reflective,
    /// Integration restricted to the domain.
    Zero,
}

/// Normalization of the exponential kernel `exp(-d/s) / (c s)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelNorm {
    /// `c = 1`: mass 2 on the line.
    #[default]
    PerWidth,
    /// `c = 2`: unit mass on the line.
    UnitMass,
}

impl KernelNorm {
    pub fn factor(self) -> f64 {
        match self {
            KernelNorm::PerWidth => 1.0,
            KernelNorm::UnitMass => 2.0,
        }
    }
}

/// `tau(r, r') = |r - r'| / speed + synaptic`; `speed = None` means instantaneous transport.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct DelayLaw {
    #[serde(default)]
    pub speed: Option<f64>,
    #[serde(default)]
    pub synaptic: f64,
}

impl DelayLaw {
    pub fn at(&self, d: f64) -> f64 {
        self.synaptic + self.speed.map_or(0.0, |c| d / c)
    }

    pub fn is_constant(&self) -> bool {
        self.speed.is_none()
    }
}

/// One- or two-layer neural field with exponential kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralFieldModel {
    pub domain: Domain,
    pub boundary: Boundary,
    /// Kernel width per layer.
    pub widths: Vec<f64>,
    /// Layer coupling weights, row = receiving layer.
    pub w: Vec<Vec<f64>>,
    /// Synaptic noise couplings.
    pub sigma: Vec<Vec<f64>>,
    /// Constant neuron density on the domain.
    #[serde(default = "one")]
    pub density: f64,
    #[serde(default)]
    pub delay: DelayLaw,
    /// Additive noise amplitude per layer.
    pub noise: Vec<Drive>,
    /// Spatially uniform input per layer.
    pub input: Vec<Drive>,
    pub theta: Vec<f64>,
    #[serde(default)]
    pub kernel_norm: KernelNorm,
}

fn one() -> f64 {
    1.0
}

impl NeuralFieldModel {
    pub fn layers(&self) -> usize {
        self.widths.len()
    }

    /// Kernel of layer `b` at distance `d`, density not included.
    pub fn kernel(&self, b: usize, d: f64) -> f64 {
        let s = self.widths[b];
        (-d / s).exp() / (self.kernel_norm.factor() * s)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.layers();
        if !(1..=2).contains(&l) {
            return Err(invalid("widths", "one or two layers supported"));
        }
        if self.boundary == Boundary::Periodic && self.domain != Domain::Circle {
            return Err(invalid("boundary", "periodic boundary requires the circle domain"));
        }
        if self.boundary != Boundary::Periodic && self.domain != Domain::Interval {
            return Err(invalid("boundary", "reflective and zero boundaries live on the interval"));
        }
        if let Some(s) = self.widths.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return Err(invalid("widths", format!("must be > 0, got {s}")));
        }
        for (name, m) in [("w", &self.w), ("sigma", &self.sigma)] {
            if m.len() != l || m.iter().any(|r| r.len() != l) {
                return Err(invalid(name, format!("must be {l}x{l}")));
            }
            if m.iter().flatten().any(|x| !x.is_finite()) {
                return Err(invalid(name, "entries must be finite"));
            }
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(invalid("density", "must be > 0"));
        }
        if let Some(c) = self.delay.speed {
            if !(c > 0.0) {
                return Err(invalid("delay.speed", "must be > 0 (omit for infinite speed)"));
            }
        }
        if !(self.delay.synaptic >= 0.0) {
            return Err(invalid("delay.synaptic", "must be >= 0"));
        }
        if self.noise.len() != l || self.input.len() != l || self.theta.len() != l {
            return Err(invalid("noise/input/theta", format!("need {l} entries")));
        }
        if self.theta.iter().any(|&t| !(t > 0.0)) {
            return Err(invalid("theta", "must be > 0"));
        }
        if self.noise.iter().any(|d| d.lower_bound() < 0.0) {
            return Err(invalid("noise", "must be >= 0"));
        }
        if self.noise.iter().chain(&self.input).any(|d| !d.finite()) {
            return Err(invalid("noise/input", "drives must be finite"));
        }
        Ok(())
    }

    /// Largest delay over the domain.
    pub fn max_delay(&self) -> f64 {
        let dmax = match self.domain {
            Domain::Circle => 0.5,
            Domain::Interval => 1.0,
        };
        self.delay.at(dmax)
    }

    /// `int lambda K_b` over the domain (value seen by every point when synchronization holds).
    pub fn kernel_mass(&self, b: usize) -> f64 {
        let s = self.widths[b];
        let c = self.kernel_norm.factor();
        let m = match self.boundary {
            Boundary::Periodic => 2.0 * (1.0 - (-0.5 / s).exp()) / c,
            Boundary::Reflective => 2.0 / c,
            Boundary::Zero => 2.0 * (1.0 - (-0.5 / s).exp()) / c,
        };
        self.density * m
    }

    /// `int lambda^2 K_b^2` over the domain.
    pub fn kernel_square_mass(&self, b: usize) -> f64 {
        let s = self.widths[b];
        let c = self.kernel_norm.factor();
        let m = match self.boundary {
            Boundary::Periodic => (1.0 - (-1.0 / s).exp()) / (c * c * s),
            Boundary::Reflective => 1.0 / (c * c * s),
            Boundary::Zero => (1.0 - (-1.0 / s).exp()) / (c * c * s),
        };
        self.density * self.density * m
    }

    /// The two-layer functional-connectivity setting with periodic boundary.
    pub fn two_layer_reference(noise: f64, sigma: f64) -> Self {
        Self {
            domain: Domain::Circle,
            boundary: Boundary::Periodic,
            widths: vec![0.02, 0.0125],
            w: vec![vec![15.0, -12.0], vec![16.0, -5.0]],
            sigma: vec![vec![sigma; 2]; 2],
            density: 1.0,
            delay: DelayLaw::default(),
            noise: vec![Drive::Const(noise); 2],
            input: vec![Drive::Const(0.0), Drive::Const(-3.0)],
            theta: vec![1.0, 1.0],
            kernel_norm: KernelNorm::UnitMass,
        }
    }
}
