//! Linear stability of the homogeneous state `(0, v0)` of a one-layer field:
//! growth rates `nu = -1/theta + F0' a_k(nu)` per Fourier mode.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::NeuralFieldModel;
use crate::sigmoid::{f0_values, SigmoidFamily, SigmoidSpec};

/// How the kernel coefficient `a_k(nu)` is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DispersionConvention {
    /// `w e^{-nu tau_d} int_0^1 e^{-r/s - nu r/c} e^{-2 pi i k r} dr` with an unnormalized kernel.
    #[default]
    OneSided,
    /// The solver's kernel on the circle metric: `int_0^1 lambda K(|r|) e^{-nu tau(|r|)} e^{-2 pi i k r} dr`.
    Circular,
}

impl DispersionConvention {
    pub fn describe(self) -> &'static str {
        match self {
            DispersionConvention::OneSided => {
                "a_k(nu) = w e^(-nu tau_d) (1 - e^(-beta)) / (beta + 2 pi i k), beta = 1/s + nu/c; kernel e^(-r/s) on r in [0,1)"
            }
            DispersionConvention::Circular => {
                "a_k(nu) = int_0^1 density w K(d(r)) e^(-nu tau(d(r))) e^(-2 pi i k r) dr, d = circle distance, K as in the solver"
            }
        }
    }
}

struct Layer {
    s: f64,
    w: f64,
    sigma: f64,
    amp: f64,
    tau_d: f64,
    inv_c: f64,
    theta: f64,
}

fn one_layer(model: &NeuralFieldModel) -> Result<Layer> {
    model.validate()?;
    if model.layers() != 1 {
        return Err(invalid("widths", "dispersion is defined for one layer"));
    }
    let s = model.widths[0];
    Ok(Layer {
        s,
        w: model.w[0][0],
        sigma: model.sigma[0][0],
        amp: model.density / (model.kernel_norm.factor() * s),
        tau_d: model.delay.synaptic,
        inv_c: model.delay.speed.map_or(0.0, |c| 1.0 / c),
        theta: model.theta[0],
    })
}

fn coefficient(l: &Layer, k: i64, nu: Complex64, conv: DispersionConvention, squared: bool) -> Complex64 {
    let (rate, weight, amp) = if squared {
        (2.0 / l.s, l.sigma * l.sigma, l.amp * l.amp)
    } else {
        (1.0 / l.s, l.w, l.amp)
    };
    let beta = rate + nu * l.inv_c;
    let lag = (-nu * l.tau_d).exp();
    let kk = 2.0 * PI * k as f64;
    match conv {
        DispersionConvention::OneSided => weight * lag * (1.0 - (-beta).exp()) / (beta + Complex64::new(0.0, kk)),
        DispersionConvention::Circular => {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            weight * amp * lag * 2.0 * beta * (1.0 - sign * (-beta / 2.0).exp()) / (beta * beta + kk * kk)
        }
    }
}

/// Closed-form `a_k(nu)` of a one-layer model.
pub fn kernel_coefficient(model: &NeuralFieldModel, k: i64, nu: Complex64, conv: DispersionConvention) -> Result<Complex64> {
    Ok(coefficient(&one_layer(model)?, k, nu, conv, false))
}

fn gauss_legendre_10() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = 10;
        (1..=n)
            .map(|i| {
                let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for j in 2..=n {
                        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

/// `a_k(nu)` by composite Gauss-Legendre quadrature of the defining integral, kernel taken from the model.
pub fn kernel_coefficient_quadrature(
    model: &NeuralFieldModel,
    k: i64,
    nu: Complex64,
    conv: DispersionConvention,
) -> Result<Complex64> {
    let l = one_layer(model)?;
    let panels = 2048;
    let h = 1.0 / panels as f64;
    let rule = gauss_legendre_10();
    let kk = 2.0 * PI * k as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let a = p as f64 * h;
        for &(x, wt) in rule {
            let r = a + 0.5 * h * (x + 1.0);
            let phase = Complex64::new(0.0, -kk * r).exp();
            let val = match conv {
                DispersionConvention::OneSided => {
                    l.w * (-r / l.s).exp() * (-nu * (l.tau_d + r * l.inv_c)).exp()
                }
                DispersionConvention::Circular => {
                    let d = r.min(1.0 - r);
                    l.w * model.density * model.kernel(0, d) * (-nu * model.delay.at(d)).exp()
                }
            };
            acc += 0.5 * h * wt * val * phase;
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeGrowth {
    pub k: i64,
    /// Rightmost growth rate found for this mode.
    pub nu: Option<Complex64>,
    /// All distinct roots found.
    pub roots: Vec<Complex64>,
    /// `a_k` and `b_k` at `nu` (at 0 when no root converged).
    pub a_k: Complex64,
    pub b_k: Complex64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DispersionReport {
    pub convention: DispersionConvention,
    pub f0: f64,
    pub f0_prime: f64,
    /// The `-2/theta` eigenvalue of the variance block.
    pub variance_eigenvalue: f64,
    pub modes: Vec<ModeGrowth>,
    pub rightmost: Complex64,
    pub stable: bool,
}

impl DispersionReport {
    pub fn mode(&self, k: i64) -> Option<&ModeGrowth> {
        self.modes.iter().find(|m| m.k == k)
    }
}

fn solve_mode(l: &Layer, f0p: f64, k: i64, conv: DispersionConvention, seeds: &[Complex64]) -> Vec<Complex64> {
    let g = |nu: Complex64| nu + 1.0 / l.theta - f0p * coefficient(l, k, nu, conv, false);
    let mut roots: Vec<Complex64> = Vec::new();
    for &seed in seeds {
        let mut nu = seed;
        let mut ok = false;
        for _ in 0..100 {
            let gv = g(nu);
            let h = 1e-6 * nu.norm().max(1.0);
            let dg = (g(nu + h) - g(nu - h)) / (2.0 * h);
            if dg.norm() == 0.0 {
                break;
            }
            let step = gv / dg;
            nu -= step;
            if !(nu.re.is_finite() && nu.im.is_finite()) || nu.norm() > 1e4 {
                break;
            }
            if step.norm() < 1e-14 * nu.norm().max(1.0) {
                ok = g(nu).norm() < 1e-10;
                break;
            }
        }
        if ok && !roots.iter().any(|r| (r - nu).norm() < 1e-8 * nu.norm().max(1.0)) {
            roots.push(nu);
        }
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re));
    roots
}

/// Growth rates of modes `-n_modes..=n_modes` around `(0, v0)`; `nu_query` adds Newton seeds.
pub fn dispersion(
    model: &NeuralFieldModel,
    spec: &SigmoidSpec,
    v0: f64,
    n_modes: u32,
    conv: DispersionConvention,
    nu_query: &[Complex64],
) -> Result<DispersionReport> {
    let l = one_layer(model)?;
    let (f0, f0p) = f0_values(spec, v0)?;
    let delayed = l.tau_d != 0.0 || l.inv_c != 0.0;
    let mut modes = Vec::with_capacity(2 * n_modes as usize + 1);
    let n = n_modes as i64;
    for k in -n..=n {
        let roots = if delayed {
            let mut seeds = vec![-1.0 / l.theta + f0p * coefficient(&l, k, Complex64::new(0.0, 0.0), conv, false)];
            seeds.extend_from_slice(nu_query);
            for j in -20..=20 {
                for re in [-0.5, 0.5] {
                    seeds.push(Complex64::new(re, 2.0 * j as f64));
                }
            }
            solve_mode(&l, f0p, k, conv, &seeds)
        } else {
            vec![-1.0 / l.theta + f0p * coefficient(&l, k, Complex64::new(0.0, 0.0), conv, false)]
        };
        let nu = roots.first().copied();
        let at = nu.unwrap_or(Complex64::new(0.0, 0.0));
        modes.push(ModeGrowth {
            k,
            nu,
            a_k: coefficient(&l, k, at, conv, false),
            b_k: coefficient(&l, k, at, conv, true),
            converged: nu.is_some(),
            roots,
        });
    }
    let variance_eigenvalue = -2.0 / l.theta;
    let rightmost = modes
        .iter()
        .filter_map(|m| m.nu)
        .chain(std::iter::once(Complex64::new(variance_eigenvalue, 0.0)))
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .unwrap_or(Complex64::new(variance_eigenvalue, 0.0));
    Ok(DispersionReport { convention: conv, f0, f0_prime: f0p, variance_eigenvalue, modes, rightmost, stable: rightmost.re < 0.0 })
}

/// Loss of stability of the homogeneous mode through a real root, `F0'(v0) a_0(0) = 1/theta`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PitchforkReport {
    /// `a_0(0)`: total coupling seen by the homogeneous mode.
    pub coupling: f64,
    /// Crossing variance found by bisection on the computed `F0'`; `None` when stable for every `v0`.
    pub v0: Option<f64>,
    /// `theta^2 a_0^2 / (2 pi) - 1/g^2`, the probit crossing in closed form (NaN for tables).
    pub v0_closed_form: f64,
    /// `a_0 / (2 pi) - 1/g^2`, the variant linear in the coupling, as a value of `2 v0 / theta`.
    pub linear_coupling_form: f64,
}

/// Locates the pitchfork of the homogeneous state `(0, v0)` in `v0`.
pub fn pitchfork(model: &NeuralFieldModel, spec: &SigmoidSpec, conv: DispersionConvention) -> Result<PitchforkReport> {
    let l = one_layer(model)?;
    let a0 = coefficient(&l, 0, Complex64::new(0.0, 0.0), conv, false).re;
    let excess = |v: f64| f0_values(spec, v).map(|(_, fp)| fp * a0 - 1.0 / l.theta);
    let v0 = if excess(0.0)? <= 0.0 {
        None
    } else {
        let mut hi = 1.0;
        while excess(hi)? > 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(invalid("w", "homogeneous mode stays unstable for every variance"));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-15 * hi {
            let mid = 0.5 * (lo + hi);
            if excess(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    let inv_g2 = match spec.family {
        SigmoidFamily::Probit => 1.0 / (spec.gain * spec.gain),
        SigmoidFamily::Table { .. } => f64::NAN,
    };
    Ok(PitchforkReport {
        coupling: a0,
        v0,
        v0_closed_form: l.theta * l.theta * a0 * a0 / (2.0 * PI) - inv_g2,
        linear_coupling_form: a0 / (2.0 * PI) - inv_g2,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TuringHopfPoint {
    pub k: i64,
    pub m: i32,
    pub tau_d: f64,
    pub omega: f64,
    /// `|Re nu_k|` of the certified root at `tau_d`.
    pub certificate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TuringHopfSet {
    pub points: Vec<TuringHopfPoint>,
    pub status: String,
}

pub const TURING_CERT_TOL: f64 = 1e-6;

/// Synaptic delays at which mode `k` crosses the imaginary axis (instantaneous transport only).
pub fn turing_hopf_curves(
    model: &NeuralFieldModel,
    spec: &SigmoidSpec,
    v0: f64,
    k: i64,
    m_range: std::ops::RangeInclusive<i32>,
) -> Result<TuringHopfSet> {
    let l = one_layer(model)?;
    if l.inv_c != 0.0 {
        return Err(invalid("delay.speed", "Turing-Hopf curves need instantaneous transport"));
    }
    let (_, f0p) = f0_values(spec, v0)?;
    let s = l.s;
    let amp = f0p * l.w * (1.0 - (-1.0 / s).exp());
    let kk = 2.0 * PI * k as f64;
    let radicand = amp * amp / (1.0 / (s * s) + kk * kk) - 1.0 / (l.theta * l.theta);
    if !(radicand > 0.0) {
        return Ok(TuringHopfSet { points: Vec::new(), status: format!("no dynamic instability for mode {k}") });
    }
    let omega = radicand.sqrt();
    let phase_w = if l.w < 0.0 { PI } else { 0.0 };
    let mut points = Vec::new();
    let mut failed = 0;
    for m in m_range {
        let tau = (phase_w - (l.theta * omega).atan() - (kk * s).atan() + 2.0 * PI * m as f64) / omega;
        if !(tau > 0.0) {
            continue;
        }
        let lt = Layer { tau_d: tau, ..one_layer(model)? };
        let target = Complex64::new(0.0, omega);
        let roots = solve_mode(&lt, f0p, k, DispersionConvention::OneSided, &[target]);
        match roots.iter().find(|r| (*r - target).norm() < TURING_CERT_TOL) {
            Some(r) if r.re.abs() < TURING_CERT_TOL => {
                points.push(TuringHopfPoint { k, m, tau_d: tau, omega, certificate: r.re.abs() })
            }
            _ => failed += 1,
        }
    }
    let status = if failed == 0 { "ok".to_string() } else { format!("{failed} branches failed certification") };
    Ok(TuringHopfSet { points, status })
}
