//! Spatially extended moment equations on a uniform grid, the synchronized
//! reduction, and spatial diagnostics.

use std::collections::VecDeque;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dde::{integrate_moments, MomentTrajectory};
use crate::error::{invalid, step_count, CoreError, Result};
use crate::history::{HistorySegment, StepBuffer};
use crate::model::{Boundary, Drive, FinitePopulationModel, NeuralFieldModel};
use crate::sigmoid::SigmoidSpec;

/// Smallest accepted `n_nodes * s` over all layers.
pub const MIN_NODES_PER_WIDTH: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub n: usize,
    pub boundary: Boundary,
    /// Node positions: `j/n` on the circle, cell centres `(j + 1/2)/n` on the interval.
    pub nodes: Vec<f64>,
    /// Uniform quadrature weight `1/n`.
    pub weight: f64,
}

impl SpatialGrid {
    pub fn new(boundary: Boundary, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(invalid("grid.n", "need at least 4 nodes"));
        }
        let h = 1.0 / n as f64;
        let nodes = match boundary {
            Boundary::Periodic => (0..n).map(|j| j as f64 * h).collect(),
            _ => (0..n).map(|j| (j as f64 + 0.5) * h).collect(),
        };
        Ok(Self { n, boundary, nodes, weight: h })
    }

    pub fn for_model(model: &NeuralFieldModel, n: usize) -> Result<Self> {
        Self::new(model.boundary, n)
    }

    /// Distance between two positions in the domain metric.
    pub fn distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self.boundary {
            Boundary::Periodic => d.min(1.0 - d),
            _ => d,
        }
    }
}

/// `int_0^x A e^{-r y} dy` for `0 <= x`, on the line.
fn line_primitive(amp: f64, rate: f64, x: f64) -> f64 {
    amp * (-(-rate * x).exp_m1()) / rate
}

/// Primitive on `[0, L/2]` of the `L`-periodized kernel `sum_j A e^{-r |y + jL|}`.
fn periodized_primitive(amp: f64, rate: f64, period: f64, x: f64) -> f64 {
    let half = 0.5 * period;
    // sinh(r(L/2 - x)) / sinh(r L/2), written without overflow.
    let ratio = (-rate * x).exp() * (-(-2.0 * rate * (half - x)).exp_m1()) / (-(-rate * period).exp_m1());
    amp * (1.0 - ratio) / rate
}

/// Exact cell masses of a symmetric kernel for circular offsets `0..cells`, cell width `period / cells`.
fn circular_cell_weights(cells: usize, period: f64, prim: impl Fn(f64) -> f64) -> Vec<f64> {
    let h = period / cells as f64;
    let half = 0.5 * period;
    let signed = |x: f64| if x >= 0.0 { prim(x) } else { -prim(-x) };
    (0..cells)
        .map(|m| {
            let off = m.min(cells - m) as f64;
            let (a, b) = ((off - 0.5) * h, (off + 0.5) * h);
            if b <= half + 1e-15 * period {
                signed(b.min(half)) - signed(a)
            } else {
                // Cell straddling the antipode: both halves by symmetry.
                2.0 * (prim(half) - prim(a))
            }
        })
        .collect()
}

/// Kernel masses on linear offsets `0..n` (no wrap).
fn line_cell_weights(n: usize, amp: f64, rate: f64) -> Vec<f64> {
    let h = 1.0 / n as f64;
    (0..n)
        .map(|m| {
            if m == 0 {
                2.0 * line_primitive(amp, rate, 0.5 * h)
            } else {
                line_primitive(amp, rate, (m as f64 + 0.5) * h) - line_primitive(amp, rate, (m as f64 - 0.5) * h)
            }
        })
        .collect()
}

/// FFT-based application of one kernel under a boundary rule.
#[derive(Clone)]
struct Convolver {
    n: usize,
    len: usize,
    boundary: Boundary,
    k_hat: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    row_sum: f64,
}

impl Convolver {
    /// `amp e^{-rate d}` kernel (cell-integrated), density folded into `amp`.
    fn new(boundary: Boundary, n: usize, amp: f64, rate: f64, planner: &mut FftPlanner<f64>) -> Self {
        let (len, kernel) = match boundary {
            Boundary::Periodic => (n, circular_cell_weights(n, 1.0, |x| line_primitive(amp, rate, x))),
            Boundary::Reflective => (2 * n, circular_cell_weights(2 * n, 2.0, |x| periodized_primitive(amp, rate, 2.0, x))),
            Boundary::Zero => {
                let w = line_cell_weights(n, amp, rate);
                let mut k = vec![0.0; 2 * n];
                k[0] = w[0];
                for m in 1..n {
                    k[m] = w[m];
                    k[2 * n - m] = w[m];
                }
                (2 * n, k)
            }
        };
        let row_sum = match boundary {
            Boundary::Zero => f64::NAN,
            _ => kernel.iter().sum(),
        };
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let mut k_hat: Vec<Complex64> = kernel.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fwd.process(&mut k_hat);
        Self { n, len, boundary, k_hat, fwd, inv, row_sum }
    }

    fn apply(&self, input: &[f64], out: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        buf.clear();
        buf.resize(self.len, Complex64::new(0.0, 0.0));
        for j in 0..n {
            buf[j].re = input[j];
        }
        if self.boundary == Boundary::Reflective {
            for j in 0..n {
                buf[n + j].re = input[n - 1 - j];
            }
        }
        self.fwd.process(buf);
        for (b, k) in buf.iter_mut().zip(&self.k_hat) {
            *b *= k;
        }
        self.inv.process(buf);
        let scale = 1.0 / self.len as f64;
        for i in 0..n {
            out[i] = buf[i].re * scale;
        }
    }
}

/// Per-pair weights and delays for finite transport speed.
#[derive(Clone)]
struct DenseEntry {
    j: usize,
    w: f64,
    w2: f64,
    /// Delay in units of `dt`; negative marks an exactly zero delay.
    lag: f64,
}

struct Operators {
    conv: Vec<Convolver>,
    conv_sq: Vec<Convolver>,
    dense: Option<Vec<Vec<Vec<DenseEntry>>>>,
}

fn dense_entries(model: &NeuralFieldModel, grid: &SpatialGrid, b: usize, dt: f64) -> Vec<Vec<DenseEntry>> {
    let n = grid.n;
    let h = grid.weight;
    let s = model.widths[b];
    let c = model.kernel_norm.factor();
    let amp = model.density / (c * s);
    let amp2 = model.density * model.density / (c * c * s * s);
    let mass = |amp: f64, rate: f64, d: f64| -> f64 {
        if d < 0.5 * h {
            2.0 * line_primitive(amp, rate, 0.5 * h)
        } else {
            line_primitive(amp, rate, d + 0.5 * h) - line_primitive(amp, rate, d - 0.5 * h)
        }
    };
    let entry = |j: usize, d: f64| {
        let tau = model.delay.at(d);
        DenseEntry {
            j,
            w: mass(amp, 1.0 / s, d),
            w2: mass(amp2, 2.0 / s, d),
            lag: if tau == 0.0 { -1.0 } else { tau / dt },
        }
    };
    (0..n)
        .map(|i| {
            let ri = grid.nodes[i];
            let mut row = Vec::with_capacity(3 * n);
            for j in 0..n {
                let rj = grid.nodes[j];
                match grid.boundary {
                    Boundary::Periodic => {
                        // Circle metric; the antipodal cell is treated like any other.
                        row.push(entry(j, grid.distance(ri, rj)));
                    }
                    Boundary::Zero => row.push(entry(j, (ri - rj).abs())),
                    Boundary::Reflective => {
                        row.push(entry(j, (ri - rj).abs()));
                        row.push(entry(j, ri + rj));
                        row.push(entry(j, 2.0 - ri - rj));
                    }
                }
            }
            row
        })
        .collect()
}

fn check_field_inputs(model: &NeuralFieldModel, specs: &[SigmoidSpec], grid: &SpatialGrid) -> Result<()> {
    model.validate()?;
    if specs.len() != model.layers() {
        return Err(invalid("sigmoid", format!("need one spec per layer ({})", model.layers())));
    }
    for s in specs {
        s.validate()?;
    }
    if grid.boundary != model.boundary {
        return Err(invalid("grid", "grid and model boundaries differ"));
    }
    for (a, &s) in model.widths.iter().enumerate() {
        if (grid.n as f64) * s < MIN_NODES_PER_WIDTH {
            return Err(invalid(
                "grid.n",
                format!("layer {a}: n * s = {} < {MIN_NODES_PER_WIDTH}; refine the grid", grid.n as f64 * s),
            ));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldTrajectory {
    pub model: NeuralFieldModel,
    pub specs: Vec<SigmoidSpec>,
    pub grid: SpatialGrid,
    pub init: HistorySegment,
    pub times: Vec<f64>,
    /// Full state per record: `mu` for every layer, then `v` for every layer, node-major inside a layer.
    pub states: Vec<Vec<f64>>,
    pub dt: f64,
    /// Per layer, max over all steps and nodes of `|mu(r, t) - mean_r mu(., t)|`.
    pub max_spatial_deviation: Vec<f64>,
    pub method: String,
}

impl FieldTrajectory {
    pub fn layers(&self) -> usize {
        self.model.layers()
    }

    pub fn mu(&self, rec: usize, layer: usize) -> &[f64] {
        let n = self.grid.n;
        &self.states[rec][layer * n..(layer + 1) * n]
    }

    pub fn v(&self, rec: usize, layer: usize) -> &[f64] {
        let n = self.grid.n;
        let off = self.layers() * n;
        &self.states[rec][off + layer * n..off + (layer + 1) * n]
    }

    /// Record index nearest to `t`.
    pub fn record_at(&self, t: f64) -> Result<usize> {
        let (lo, hi) = (self.times[0], *self.times.last().unwrap());
        if t < lo - 1e-9 || t > hi + 1e-9 {
            return Err(CoreError::OutOfRange { t, lo, hi });
        }
        let i = self.times.partition_point(|&x| x < t);
        Ok(match i {
            0 => 0,
            i if i >= self.times.len() => self.times.len() - 1,
            i => {
                if (self.times[i] - t).abs() < (t - self.times[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FieldOptions {
    pub record_every: usize,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { record_every: 1 }
    }
}

/// Integrates the field equations with RK4; see [`integrate_field_with`].
pub fn integrate_field(
    model: &NeuralFieldModel,
    specs: &[SigmoidSpec],
    grid: &SpatialGrid,
    init: &HistorySegment,
    t_end: f64,
    dt: f64,
) -> Result<FieldTrajectory> {
    integrate_field_with(model, specs, grid, init, t_end, dt, FieldOptions::default())
}

struct StepCtx<'a> {
    model: &'a NeuralFieldModel,
    specs: &'a [SigmoidSpec],
    n: usize,
    layers: usize,
}

impl StepCtx<'_> {
    fn rates(&self, state: &[f64], f: &mut [f64], f2: &mut [f64]) {
        let (n, l) = (self.n, self.layers);
        for b in 0..l {
            for j in 0..n {
                let x = self.specs[b].moment(state[b * n + j], state[l * n + b * n + j]);
                f[b * n + j] = x;
                f2[b * n + j] = x * x;
            }
        }
    }

    /// Assemble the vector field given the coupling integrals.
    fn assemble(&self, t: f64, y: &[f64], cf: &[f64], cf2: &[f64], out: &mut [f64]) {
        let (n, l) = (self.n, self.layers);
        let m = self.model;
        for a in 0..l {
            let th = m.theta[a];
            let input = m.input[a].at(t);
            let lam = m.noise[a].at(t);
            for i in 0..n {
                let mut dmu = -y[a * n + i] / th + input;
                let mut dv = -2.0 * y[l * n + a * n + i] / th + lam * lam;
                for b in 0..l {
                    let (w, s) = (m.w[a][b], m.sigma[a][b]);
                    dmu += w * cf[b * n + i];
                    dv += s * s * cf2[b * n + i];
                }
                out[a * n + i] = dmu;
                out[l * n + a * n + i] = dv;
            }
        }
    }
}

pub fn integrate_field_with(
    model: &NeuralFieldModel,
    specs: &[SigmoidSpec],
    grid: &SpatialGrid,
    init: &HistorySegment,
    t_end: f64,
    dt: f64,
    opts: FieldOptions,
) -> Result<FieldTrajectory> {
    check_field_inputs(model, specs, grid)?;
    let (n, l) = (grid.n, model.layers());
    let d = 2 * l * n;
    let tau_max = model.max_delay();
    init.validate(d, tau_max)?;
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0) {
        return Err(invalid("dt/t_end", "dt must be > 0 and t_end >= 0"));
    }
    if opts.record_every == 0 {
        return Err(invalid("record_every", "must be >= 1"));
    }
    let constant_lag = model.delay.is_constant() && model.delay.synaptic > 0.0;
    if constant_lag && model.delay.synaptic < dt * (1.0 - 1e-12) {
        return Err(invalid("dt", format!("must not exceed the synaptic delay {}", model.delay.synaptic)));
    }
    let y0 = init.last().to_vec();
    if let Some(&v) = y0[l * n..].iter().find(|&&v| v < 0.0) {
        return Err(CoreError::NegativeVariance(v));
    }

    let mut planner = FftPlanner::new();
    let ops = Operators {
        conv: (0..l)
            .map(|b| {
                let s = model.widths[b];
                let amp = model.density / (model.kernel_norm.factor() * s);
                Convolver::new(grid.boundary, n, amp, 1.0 / s, &mut planner)
            })
            .collect(),
        conv_sq: (0..l)
            .map(|b| {
                let s = model.widths[b];
                let c = model.kernel_norm.factor();
                let amp = model.density * model.density / (c * c * s * s);
                Convolver::new(grid.boundary, n, amp, 2.0 / s, &mut planner)
            })
            .collect(),
        dense: (!model.delay.is_constant()).then(|| (0..l).map(|b| dense_entries(model, grid, b, dt)).collect()),
    };
    let ctx = StepCtx { model, specs, n, layers: l };

    // Rate history for the dense path: f, f^2 per step index from the start of the initial segment.
    step_count(tau_max, dt)?;
    let hist_steps = (tau_max / dt).ceil() as i64 + 2;
    let mut rate_hist: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    let mut rate_first: i64 = -hist_steps;
    let mut tmp = vec![0.0; d];
    if ops.dense.is_some() {
        for k in -hist_steps..=0 {
            let t = (k as f64 * dt).max(init.start());
            init.eval_into(t, &mut tmp)?;
            let (mut f, mut f2) = (vec![0.0; l * n], vec![0.0; l * n]);
            ctx.rates(&tmp, &mut f, &mut f2);
            rate_hist.push_back((f, f2));
        }
    }
    let mut buf = StepBuffer::new(dt, tau_max);
    buf.push_state(y0.clone());

    let mut fft_buf = Vec::new();
    let (mut f, mut f2) = (vec![0.0; l * n], vec![0.0; l * n]);
    let (mut cf, mut cf2) = (vec![0.0; l * n], vec![0.0; l * n]);
    let mut lagged = vec![0.0; d];

    let mut stage_rhs = |t: f64,
                         stage_c: f64,
                         step: i64,
                         y: &[f64],
                         buf: &StepBuffer,
                         rate_hist: &VecDeque<(Vec<f64>, Vec<f64>)>,
                         rate_first: i64,
                         out: &mut [f64]|
     -> Result<()> {
        if let Some(dense) = &ops.dense {
            ctx.rates(y, &mut f, &mut f2);
            for b in 0..l {
                for (i, row) in dense[b].iter().enumerate() {
                    let (mut acc, mut acc2) = (0.0, 0.0);
                    for e in row {
                        let (fv, fv2) = if e.lag < 0.0 {
                            (f[b * n + e.j], f2[b * n + e.j])
                        } else {
                            let k = ((step as f64 + stage_c - e.lag).round() as i64).min(step).max(rate_first);
                            let (rf, rf2) = &rate_hist[(k - rate_first) as usize];
                            (rf[b * n + e.j], rf2[b * n + e.j])
                        };
                        acc += e.w * fv;
                        acc2 += e.w2 * fv2;
                    }
                    cf[b * n + i] = acc;
                    cf2[b * n + i] = acc2;
                }
            }
        } else {
            let src: &[f64] = if constant_lag {
                let tq = t - model.delay.synaptic;
                if tq <= 0.0 {
                    init.eval_into(tq, &mut lagged)?;
                } else {
                    buf.eval_into(tq, &mut lagged)?;
                }
                &lagged
            } else {
                y
            };
            ctx.rates(src, &mut f, &mut f2);
            for b in 0..l {
                ops.conv[b].apply(&f[b * n..(b + 1) * n], &mut cf[b * n..(b + 1) * n], &mut fft_buf);
                ops.conv_sq[b].apply(&f2[b * n..(b + 1) * n], &mut cf2[b * n..(b + 1) * n], &mut fft_buf);
            }
        }
        ctx.assemble(t, y, &cf, &cf2, out);
        Ok(())
    };

    let steps = step_count(t_end, dt)?;
    let mut times = vec![0.0];
    let mut states = vec![y0.clone()];
    let mut max_dev = vec![0.0f64; l];
    let track_dev = |y: &[f64], max_dev: &mut [f64]| {
        for a in 0..l {
            let row = &y[a * n..(a + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let dev = row.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
            max_dev[a] = max_dev[a].max(dev);
        }
    };
    track_dev(&y0, &mut max_dev);

    let mut y = y0;
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut stage = vec![0.0; d];
    for step in 0..steps {
        let t = step as f64 * dt;
        let si = step as i64;
        stage_rhs(t, 0.0, si, &y, &buf, &rate_hist, rate_first, &mut k1)?;
        if constant_lag {
            buf.set_slope(step, k1.clone());
        }
        for i in 0..d {
            stage[i] = y[i] + 0.5 * dt * k1[i];
        }
        stage_rhs(t + 0.5 * dt, 0.5, si, &stage, &buf, &rate_hist, rate_first, &mut k2)?;
        for i in 0..d {
            stage[i] = y[i] + 0.5 * dt * k2[i];
        }
        stage_rhs(t + 0.5 * dt, 0.5, si, &stage, &buf, &rate_hist, rate_first, &mut k3)?;
        for i in 0..d {
            stage[i] = y[i] + dt * k3[i];
        }
        stage_rhs(t + dt, 1.0, si, &stage, &buf, &rate_hist, rate_first, &mut k4)?;
        for i in 0..d {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t1 = (step + 1) as f64 * dt;
        if y.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::Divergence { t: t1 });
        }
        if let Some(&v) = y[l * n..].iter().find(|&&v| v < -crate::dde::VARIANCE_SLACK) {
            return Err(CoreError::Integrity { t: t1, value: v });
        }
        track_dev(&y, &mut max_dev);
        if constant_lag {
            buf.push_state(y.clone());
        }
        if ops.dense.is_some() {
            let (mut rf, mut rf2) = (vec![0.0; l * n], vec![0.0; l * n]);
            ctx.rates(&y, &mut rf, &mut rf2);
            rate_hist.push_back((rf, rf2));
            if rate_hist.len() as i64 > hist_steps + 2 {
                rate_hist.pop_front();
                rate_first += 1;
            }
        }
        if (step + 1) % opts.record_every == 0 {
            times.push(t1);
            states.push(y.clone());
        }
    }
    Ok(FieldTrajectory {
        model: model.clone(),
        specs: specs.to_vec(),
        grid: grid.clone(),
        init: init.clone(),
        times,
        states,
        dt,
        max_spatial_deviation: max_dev,
        method: if ops.dense.is_some() { "rk4-dense-rounded-delays" } else { "rk4-fft" }.into(),
    })
}

/// Mean profile presets for the initial segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Constant { value: f64 },
    /// `1` on `[0, 0.25]`, `-1` on `[0.75, 1]`, `0` elsewhere.
    Ic1,
    /// `1` on `[0, 0.05] u [0.5, 0.55]`, `-1` on `[0.25, 0.3] u [0.75, 0.8]`.
    Ic2,
    /// `value` on each `[lo, hi]`, `0` elsewhere.
    Boxes { boxes: Vec<(f64, f64)>, value: f64 },
}

impl Profile {
    pub fn at(&self, r: f64) -> f64 {
        let inside = |lo: f64, hi: f64| r >= lo - 1e-12 && r <= hi + 1e-12;
        match self {
            Profile::Constant { value } => *value,
            Profile::Ic1 => {
                if inside(0.0, 0.25) {
                    1.0
                } else if inside(0.75, 1.0) {
                    -1.0
                } else {
                    0.0
                }
            }
            Profile::Ic2 => {
                if inside(0.0, 0.05) || inside(0.5, 0.55) {
                    1.0
                } else if inside(0.25, 0.3) || inside(0.75, 0.8) {
                    -1.0
                } else {
                    0.0
                }
            }
            Profile::Boxes { boxes, value } => {
                if boxes.iter().any(|&(lo, hi)| inside(lo, hi)) {
                    *value
                } else {
                    0.0
                }
            }
        }
    }
}

/// Time-constant initial segment: a mean profile and a uniform variance per layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldInit {
    pub mu: Vec<Profile>,
    pub v: Vec<f64>,
}

impl FieldInit {
    pub fn homogeneous(mu: &[f64], v: &[f64]) -> Self {
        Self { mu: mu.iter().map(|&x| Profile::Constant { value: x }).collect(), v: v.to_vec() }
    }

    pub fn state(&self, grid: &SpatialGrid) -> Vec<f64> {
        let n = grid.n;
        let mut y = Vec::with_capacity(2 * self.mu.len() * n);
        for p in &self.mu {
            y.extend(grid.nodes.iter().map(|&r| p.at(r)));
        }
        for &v in &self.v {
            y.extend(std::iter::repeat_n(v, n));
        }
        y
    }

    pub fn history(&self, grid: &SpatialGrid, span: f64) -> HistorySegment {
        HistorySegment::constant(self.state(grid), span)
    }
}

/// Two-population model equivalent to the spatially homogeneous field: `J = w diag(mass)`, `sigma^2 = sigma^2 diag(square mass)`.
pub fn synchronized_equivalent(model: &NeuralFieldModel) -> Result<FinitePopulationModel> {
    model.validate()?;
    if model.boundary == Boundary::Zero {
        return Err(invalid("boundary", "zero boundary breaks synchronization"));
    }
    if !model.delay.is_constant() {
        return Err(invalid("delay.speed", "synchronized reduction needs constant delays"));
    }
    let l = model.layers();
    let mass: Vec<f64> = (0..l).map(|b| model.kernel_mass(b)).collect();
    let sq: Vec<f64> = (0..l).map(|b| model.kernel_square_mass(b)).collect();
    Ok(FinitePopulationModel {
        j: (0..l).map(|a| (0..l).map(|b| model.w[a][b] * mass[b]).collect()).collect(),
        sigma: (0..l).map(|a| (0..l).map(|b| model.sigma[a][b] * sq[b].sqrt()).collect()).collect(),
        tau: vec![vec![model.delay.synaptic; l]; l],
        theta: model.theta.clone(),
        input: model.input.clone(),
        noise: model.noise.clone(),
    })
}

/// RK4 on the spatially homogeneous reduction; `init = [mu_1..mu_L, v_1..v_L]`.
pub fn integrate_synchronized(
    model: &NeuralFieldModel,
    specs: &[SigmoidSpec],
    init: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<MomentTrajectory> {
    let eq = synchronized_equivalent(model)?;
    let hist = HistorySegment::constant(init.to_vec(), eq.max_delay());
    integrate_moments(&eq, specs, &hist, t_end, dt)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyncCheck {
    pub holds: bool,
    /// Largest relative across-node spread over the test battery.
    pub max_deviation: f64,
}

/// Tests whether homogeneous states produce node-independent drift and noise terms on this grid.
pub fn check_synchronization_condition(model: &NeuralFieldModel, grid: &SpatialGrid) -> Result<SyncCheck> {
    model.validate()?;
    let n = grid.n;
    let mut planner = FftPlanner::new();
    let samples: Vec<f64> = (0..16).map(|q| -2.0 + 4.0 * q as f64 / 15.0).collect();
    let mut battery: Vec<Box<dyn Fn(f64) -> f64>> = vec![Box::new(|_| 1.0)];
    for k in 1..=4 {
        let kk = k as f64;
        battery.push(Box::new(move |x| (2.0 * std::f64::consts::PI * kk * x).cos()));
        battery.push(Box::new(move |x| (2.0 * std::f64::consts::PI * kk * x).sin()));
    }
    let spread = |v: &[f64]| -> f64 {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            0.0
        } else {
            (hi - lo) / scale
        }
    };
    let mut worst = 0.0f64;
    let mut buf = Vec::new();
    let mut out = vec![0.0; n];
    for b in 0..model.layers() {
        let s = model.widths[b];
        let c = model.kernel_norm.factor();
        let k1 = Convolver::new(grid.boundary, n, model.density / (c * s), 1.0 / s, &mut planner);
        let k2 = Convolver::new(grid.boundary, n, model.density * model.density / (c * c * s * s), 2.0 / s, &mut planner);
        for phi in &battery {
            let mean = samples.iter().map(|&x| phi(x)).sum::<f64>() / samples.len() as f64;
            if mean.abs() < 1e-12 {
                continue;
            }
            k1.apply(&vec![mean; n], &mut out, &mut buf);
            worst = worst.max(spread(&out));
            k2.apply(&vec![mean * mean; n], &mut out, &mut buf);
            worst = worst.max(spread(&out));
        }
    }
    Ok(SyncCheck { holds: worst < 1e-10, max_deviation: worst })
}

/// Row sums of the discrete kernel, when node-independent.
pub fn discrete_kernel_mass(model: &NeuralFieldModel, grid: &SpatialGrid, layer: usize) -> Option<f64> {
    let mut planner = FftPlanner::new();
    let s = model.widths[layer];
    let conv = Convolver::new(grid.boundary, grid.n, model.density / (model.kernel_norm.factor() * s), 1.0 / s, &mut planner);
    conv.row_sum.is_finite().then_some(conv.row_sum)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub time: f64,
    pub wavenumbers: Vec<usize>,
    pub amplitudes: Vec<f64>,
    /// Argmax over `k >= 1`.
    pub dominant: usize,
    /// Dominant amplitude over the next largest `k >= 1` amplitude.
    pub dominance_ratio: f64,
}

impl ModeSpectrum {
    /// Largest amplitude over `k >= 1`.
    pub fn max_nonzero(&self) -> f64 {
        self.amplitudes.iter().skip(1).copied().fold(0.0, f64::max)
    }
}

/// Fourier amplitudes of `mu_layer(., t)` (even extension on the interval).
pub fn mode_spectrum(traj: &FieldTrajectory, layer: usize, t: f64) -> Result<ModeSpectrum> {
    if layer >= traj.layers() {
        return Err(invalid("layer", format!("must be < {}", traj.layers())));
    }
    let rec = traj.record_at(t)?;
    let mu = traj.mu(rec, layer);
    let mut data: Vec<Complex64> = match traj.grid.boundary {
        Boundary::Periodic => mu.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        _ => mu.iter().chain(mu.iter().rev()).map(|&x| Complex64::new(x, 0.0)).collect(),
    };
    let len = data.len();
    FftPlanner::new().plan_fft_forward(len).process(&mut data);
    let kmax = len / 2;
    let amplitudes: Vec<f64> = (0..=kmax)
        .map(|k| {
            let a = data[k].norm() / len as f64;
            if k == 0 || 2 * k == len {
                a
            } else {
                2.0 * a
            }
        })
        .collect();
    let mut order: Vec<usize> = (1..=kmax).collect();
    order.sort_by(|&a, &b| amplitudes[b].total_cmp(&amplitudes[a]).then(a.cmp(&b)));
    let dominant = order[0];
    let next = order.get(1).map_or(0.0, |&k| amplitudes[k]);
    Ok(ModeSpectrum {
        time: traj.times[rec],
        wavenumbers: (0..=kmax).collect(),
        dominance_ratio: if next > 0.0 { amplitudes[dominant] / next } else { f64::INFINITY },
        dominant,
        amplitudes,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PatternDiagnostics {
    /// Max over tail records of the spatial range of `mu`.
    pub tail_spatial_range: f64,
    pub final_spatial_range: f64,
    /// Local maxima above the mid level at the final record.
    pub bump_count: usize,
    /// Temporal range at the probe node over the tail.
    pub probe_temporal_range: f64,
    /// Mean interval between upward mid-level crossings at the probe, when regular.
    pub probe_period: Option<f64>,
    pub pattern_present: bool,
}

/// Spatial and temporal pattern measures of `mu_layer` over `t >= tail_from`; `tol` separates flat from patterned.
pub fn pattern_diagnostics(traj: &FieldTrajectory, layer: usize, tail_from: f64, tol: f64) -> Result<PatternDiagnostics> {
    if layer >= traj.layers() {
        return Err(invalid("layer", format!("must be < {}", traj.layers())));
    }
    let first = traj.record_at(tail_from)?;
    let last = traj.times.len() - 1;
    let range = |x: &[f64]| {
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        (lo, hi)
    };
    let mut tail_range = 0.0f64;
    for rec in first..=last {
        let (lo, hi) = range(traj.mu(rec, layer));
        tail_range = tail_range.max(hi - lo);
    }
    let fin = traj.mu(last, layer);
    let (lo, hi) = range(fin);
    let n = fin.len();
    let mid = 0.5 * (lo + hi);
    let periodic = traj.grid.boundary == Boundary::Periodic;
    let bump_count = if hi - lo <= tol {
        0
    } else {
        (0..n)
            .filter(|&i| {
                let left = if i == 0 { if periodic { fin[n - 1] } else { f64::NEG_INFINITY } } else { fin[i - 1] };
                let right = if i + 1 == n { if periodic { fin[0] } else { f64::NEG_INFINITY } } else { fin[i + 1] };
                fin[i] > mid && fin[i] > left && fin[i] >= right
            })
            .count()
    };
    let probe = n / 2;
    let series: Vec<(f64, f64)> = (first..=last).map(|r| (traj.times[r], traj.mu(r, layer)[probe])).collect();
    let (plo, phi) = series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, x)| (a.min(x), b.max(x)));
    let level = 0.5 * (plo + phi);
    let crossings: Vec<f64> = series
        .windows(2)
        .filter(|w| w[0].1 < level && w[1].1 >= level)
        .map(|w| w[0].0 + (level - w[0].1) / (w[1].1 - w[0].1) * (w[1].0 - w[0].0))
        .collect();
    let probe_period = if phi - plo > tol && crossings.len() >= 3 {
        let gaps: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let sd = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64).sqrt();
        (sd < 0.1 * mean).then_some(mean)
    } else {
        None
    };
    Ok(PatternDiagnostics {
        tail_spatial_range: tail_range,
        final_spatial_range: hi - lo,
        bump_count,
        probe_temporal_range: phi - plo,
        probe_period,
        pattern_present: tail_range > tol,
    })
}

/// Qualitative state of the synchronized system at one parameter value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// A stable equilibrium and no limit cycle.
    Stationary,
    /// A stable equilibrium coexisting with a limit cycle.
    Bistable,
    /// A limit cycle and no stable equilibrium.
    Periodic,
    /// Neither (should not occur for bounded dynamics).
    Undetermined,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub stable_equilibria: usize,
    pub equilibria: usize,
    /// Largest tail oscillation amplitude of `mu_1` over the probe runs.
    pub cycle_amplitude: f64,
}

#[derive(Clone, Debug)]
pub struct RegimeOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Length of the tail window inspected for oscillations.
    pub tail: f64,
    pub amplitude_tol: f64,
}

impl Default for RegimeOptions {
    fn default() -> Self {
        Self { t_end: 3000.0, dt: 0.05, tail: 200.0, amplitude_tol: 1e-3 }
    }
}

/// Equilibrium stability plus long runs from several starts to detect attracting cycles.
pub fn classify_regime(model: &NeuralFieldModel, specs: &[SigmoidSpec], opts: &RegimeOptions) -> Result<RegimeReport> {
    let eq_model = synchronized_equivalent(model)?;
    if eq_model.input.iter().chain(&eq_model.noise).any(|d| !matches!(d, Drive::Const(_))) {
        return Err(invalid("input/noise", "regime classification needs constant drives"));
    }
    let l = model.layers();
    let vmax = eq_model
        .theta
        .iter()
        .zip(&eq_model.noise)
        .map(|(th, nz)| {
            let s2: f64 = eq_model.sigma.iter().flatten().map(|s| s * s).sum();
            th * (nz.sup_abs().powi(2) + s2) / 2.0
        })
        .fold(0.0, f64::max);
    let mu_bound = eq_model
        .theta
        .iter()
        .enumerate()
        .map(|(a, th)| th * (eq_model.input[a].sup_abs() + eq_model.j[a].iter().map(|x| x.abs()).sum::<f64>()))
        .fold(0.0, f64::max);
    let bx = crate::dde::StateBox::uniform(l, (-mu_bound - 1.0, mu_bound + 1.0), (0.0, vmax + 1.0));
    let set = crate::dde::find_equilibria(&eq_model, specs, &bx, 64)?;
    let stable = set.points.iter().filter(|e| e.stability == crate::dde::Stability::Stable).count();

    let mut starts: Vec<Vec<f64>> = Vec::new();
    let vbar: Vec<f64> = (0..l).map(|a| eq_model.theta[a] * eq_model.noise[a].sup_abs().powi(2) / 2.0).collect();
    for e in &set.points {
        if e.stability != crate::dde::Stability::Stable {
            let mut x = e.state.clone();
            x[0] += 1e-2;
            starts.push(x);
        }
    }
    for mu in [[0.0, 0.0], [3.0, 3.0], [-3.0, -3.0], [3.0, -3.0], [-3.0, 3.0]] {
        let mut x: Vec<f64> = (0..l).map(|a| mu[a.min(1)]).collect();
        x.extend_from_slice(&vbar);
        starts.push(x);
    }
    let mut amp = 0.0f64;
    for x in starts {
        let tr = integrate_synchronized(model, specs, &x, opts.t_end, opts.dt)?;
        let from = opts.t_end - opts.tail;
        let (lo, hi) = tr
            .times
            .iter()
            .zip(&tr.states)
            .filter(|(t, _)| **t >= from)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, s)| (a.min(s[0]), b.max(s[0])));
        amp = amp.max(hi - lo);
    }
    let cycle = amp > opts.amplitude_tol;
    let regime = match (stable > 0, cycle) {
        (true, false) => Regime::Stationary,
        (true, true) => Regime::Bistable,
        (false, true) => Regime::Periodic,
        (false, false) => Regime::Undetermined,
    };
    Ok(RegimeReport { regime, stable_equilibria: stable, equilibria: set.points.len(), cycle_amplitude: amp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelayLaw, Domain, KernelNorm};

    fn one_layer(boundary: Boundary, s: f64) -> NeuralFieldModel {
        NeuralFieldModel {
            domain: if boundary == Boundary::Periodic { Domain::Circle } else { Domain::Interval },
            boundary,
            widths: vec![s],
            w: vec![vec![1.0]],
            sigma: vec![vec![0.5]],
            density: 1.0,
            delay: DelayLaw::default(),
            noise: vec![Drive::Const(0.3)],
            input: vec![Drive::Const(0.0)],
            theta: vec![1.0],
            kernel_norm: KernelNorm::PerWidth,
        }
    }

    #[test]
    fn discrete_masses_match_closed_forms() {
        for (b, n) in [(Boundary::Periodic, 64), (Boundary::Periodic, 63), (Boundary::Reflective, 64)] {
            let m = one_layer(b, 0.05);
            let g = SpatialGrid::new(b, n).unwrap();
            let mass = discrete_kernel_mass(&m, &g, 0).unwrap();
            assert!((mass - m.kernel_mass(0)).abs() < 1e-13, "{b:?} {n}: {mass}");
        }
        let m = one_layer(Boundary::Zero, 0.05);
        assert!(discrete_kernel_mass(&m, &SpatialGrid::new(Boundary::Zero, 64).unwrap(), 0).is_none());
    }

    #[test]
    fn periodized_primitive_matches_image_sum() {
        let (amp, rate, period) = (1.7, 3.0, 2.0);
        for &x in &[0.0, 0.2, 0.7, 1.0] {
            let mut direct = 0.0;
            for j in -40i32..=40 {
                let (a, b) = (j as f64 * period, j as f64 * period + x);
                let seg = |lo: f64, hi: f64| {
                    // int_lo^hi amp e^{-rate |y|} dy
                    let p = |y: f64| if y >= 0.0 { line_primitive(amp, rate, y) } else { -line_primitive(amp, rate, -y) };
                    p(hi) - p(lo)
                };
                direct += seg(a, b);
            }
            assert!((periodized_primitive(amp, rate, period, x) - direct).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn synchronization_condition_by_boundary() {
        for (b, expect) in [(Boundary::Periodic, true), (Boundary::Reflective, true), (Boundary::Zero, false)] {
            let m = one_layer(b, 0.05);
            let g = SpatialGrid::new(b, 128).unwrap();
            let c = check_synchronization_condition(&m, &g).unwrap();
            assert_eq!(c.holds, expect, "{b:?}: {}", c.max_deviation);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let m = one_layer(Boundary::Periodic, 0.01);
        let g = SpatialGrid::new(Boundary::Periodic, 64).unwrap();
        let init = FieldInit::homogeneous(&[0.0], &[0.0]).history(&g, 0.0);
        let r = integrate_field(&m, &[SigmoidSpec::probit(1.0, 0.0)], &g, &init, 1.0, 0.1);
        assert!(matches!(r, Err(CoreError::InvalidParameter { .. })));
    }

    #[test]
    fn presets_take_documented_values() {
        assert_eq!(Profile::Ic1.at(0.1), 1.0);
        assert_eq!(Profile::Ic1.at(0.5), 0.0);
        assert_eq!(Profile::Ic1.at(0.9), -1.0);
        assert_eq!(Profile::Ic2.at(0.52), 1.0);
        assert_eq!(Profile::Ic2.at(0.27), -1.0);
        assert_eq!(Profile::Ic2.at(0.4), 0.0);
    }

    #[test]
    fn homogeneous_state_has_flat_spectrum() {
        let m = one_layer(Boundary::Periodic, 0.05);
        let g = SpatialGrid::new(Boundary::Periodic, 128).unwrap();
        let init = FieldInit::homogeneous(&[0.2], &[0.01]).history(&g, 0.0);
        let tr = integrate_field(&m, &[SigmoidSpec::probit(2.0, 0.0)], &g, &init, 2.0, 0.05).unwrap();
        let sp = mode_spectrum(&tr, 0, 2.0).unwrap();
        assert!(sp.max_nonzero() < 1e-8);
        assert!(sp.amplitudes[0] > 0.0);
    }
}
