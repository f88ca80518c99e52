//! Euler-Maruyama simulation of finite networks of firing-rate neurons and
//! statistics comparing them with the moment equations.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dde::MomentTrajectory;
use crate::error::{invalid, step_count, CoreError, Result};
use crate::history::HistorySegment;
use crate::model::{Boundary, FinitePopulationModel, NeuralFieldModel};
use crate::rng::{stream, stream_id, StreamKind};
use crate::sigmoid::SigmoidSpec;

const REDUCE_CHUNK: usize = 1024;

#[derive(Clone, Debug)]
pub struct NetworkOptions {
    /// Store population statistics every this many steps.
    pub record_every: usize,
    /// Times at which every neuron's voltage is retained.
    pub sample_times: Vec<f64>,
    /// Neuron indices whose full paths are retained at the record times.
    pub trace: Vec<usize>,
    /// Draw one aggregated Gaussian per neuron for the `sigma` terms instead of one per source population.
    pub aggregate_shared_noise: bool,
    /// Upper bound on retained per-neuron values.
    pub max_retained: usize,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        Self {
            record_every: 10,
            sample_times: Vec::new(),
            trace: Vec::new(),
            aggregate_shared_noise: false,
            max_retained: 200_000_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub seed: u64,
    pub dt: f64,
    /// Neurons per population; neuron `i` of population `a` has index `offsets[a] + i`.
    pub sizes: Vec<usize>,
    pub offsets: Vec<usize>,
    /// Population positions for spatial networks.
    pub positions: Option<Vec<f64>>,
    pub times: Vec<f64>,
    /// `[record][population]` empirical mean and variance of `V`.
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
    /// `[record][population]` empirical mean of `S(V)`.
    pub rate: Vec<Vec<f64>>,
    pub sample_times: Vec<f64>,
    /// `[sample][neuron]`.
    pub samples: Vec<Vec<f64>>,
    pub trace_ids: Vec<usize>,
    /// `[traced neuron][record]`.
    pub traces: Vec<Vec<f64>>,
    /// How random streams were keyed.
    pub streams: String,
}

impl NetworkRealization {
    pub fn populations(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn population_of(&self, neuron: usize) -> usize {
        self.offsets.partition_point(|&o| o <= neuron) - 1
    }
}

/// Equal split of `n` into `p` blocks, remainder to the first blocks.
pub fn equal_sizes(n: usize, p: usize) -> Vec<usize> {
    (0..p).map(|a| n / p + usize::from(a < n % p)).collect()
}

struct Neuron {
    v: f64,
    pop: usize,
    private: ChaCha8Rng,
    shared: Vec<ChaCha8Rng>,
}

/// Per-population mean rate history on the step grid, with the initial segment before 0.
struct RateBuffer<'a> {
    dt: f64,
    steps: Vec<Vec<f64>>,
    init: &'a HistorySegment,
    specs: &'a [SigmoidSpec],
}

impl RateBuffer<'_> {
    fn at(&self, gamma: usize, t: f64) -> Result<f64> {
        if t < 0.0 {
            let p = self.specs.len();
            let y = self.init.eval(t)?;
            return Ok(self.specs[gamma].moment(y[gamma], y[p + gamma].max(0.0)));
        }
        let x = t / self.dt;
        let k = (x.floor() as usize).min(self.steps.len() - 1);
        if k + 1 >= self.steps.len() {
            return Ok(self.steps[k][gamma]);
        }
        let w = x - k as f64;
        Ok((1.0 - w) * self.steps[k][gamma] + w * self.steps[k + 1][gamma])
    }
}

fn chunked_sum(values: &[f64]) -> f64 {
    let partial: Vec<f64> = values.par_chunks(REDUCE_CHUNK).map(|c| c.iter().sum::<f64>()).collect();
    partial.iter().sum()
}

/// Euler-Maruyama with equal population sizes summing to `n`; see [`simulate_network_with`].
pub fn simulate_network(
    model: &FinitePopulationModel,
    specs: &[SigmoidSpec],
    init: &HistorySegment,
    n: usize,
    seed: u64,
    t_end: f64,
    dt: f64,
) -> Result<NetworkRealization> {
    let sizes = equal_sizes(n, model.populations());
    simulate_network_with(model, specs, init, &sizes, seed, t_end, dt, &NetworkOptions::default())
}

/// Euler-Maruyama for the network driven by population averages of `S(V)`.
///
/// Neuron `i` of population `a` receives private noise `lambda_a dW^i` and, from each source
/// population `c`, a term `sigma_ac Sbar_c(t - tau_ac) dB^{ic}`: one Brownian motion per
/// (receiver, source population), common to all source neurons.
#[allow(clippy::too_many_arguments)]
pub fn simulate_network_with(
    model: &FinitePopulationModel,
    specs: &[SigmoidSpec],
    init: &HistorySegment,
    sizes: &[usize],
    seed: u64,
    t_end: f64,
    dt: f64,
    opts: &NetworkOptions,
) -> Result<NetworkRealization> {
    model.validate()?;
    let p = model.populations();
    if specs.len() != p || sizes.len() != p {
        return Err(invalid("populations", format!("need {p} sigmoids and {p} sizes")));
    }
    if sizes.contains(&0) {
        return Err(invalid("sizes", "every population needs at least one neuron"));
    }
    for s in specs {
        s.validate()?;
    }
    init.validate(2 * p, model.max_delay())?;
    let theta_min = model.theta.iter().copied().fold(f64::INFINITY, f64::min);
    if !(dt > 0.0) || dt > theta_min / 20.0 * (1.0 + 1e-12) {
        return Err(invalid("dt", format!("must be in (0, theta/20 = {}]", theta_min / 20.0)));
    }
    if opts.record_every == 0 {
        return Err(invalid("record_every", "must be >= 1"));
    }
    let total: usize = sizes.iter().sum();
    let steps = step_count(t_end, dt)?;
    let n_records = steps / opts.record_every + 1;
    let retained = opts.sample_times.len() * total + opts.trace.len() * n_records;
    if retained > opts.max_retained {
        return Err(CoreError::Resource(format!(
            "{retained} retained values exceed the limit {}",
            opts.max_retained
        )));
    }
    if let Some(&bad) = opts.trace.iter().find(|&&i| i >= total) {
        return Err(invalid("trace", format!("neuron {bad} out of range (N = {total})")));
    }
    let mut offsets = vec![0usize; p + 1];
    for a in 0..p {
        offsets[a + 1] = offsets[a] + sizes[a];
    }
    let y0 = init.last();
    let n_shared = if opts.aggregate_shared_noise { 1 } else { p };
    let mut neurons: Vec<Neuron> = (0..total)
        .into_par_iter()
        .map(|i| {
            let pop = offsets.partition_point(|&o| o <= i) - 1;
            let mut r0 = stream(seed, stream_id(StreamKind::Initial, i as u64, 0));
            let z: f64 = StandardNormal.sample(&mut r0);
            Neuron {
                v: y0[pop] + y0[p + pop].max(0.0).sqrt() * z,
                pop,
                private: stream(seed, stream_id(StreamKind::Private, i as u64, 0)),
                shared: (0..n_shared).map(|c| stream(seed, stream_id(StreamKind::Shared, i as u64, c as u64))).collect(),
            }
        })
        .collect();

    let mut s_vals = vec![0.0; total];
    let pop_rates = |neurons: &[Neuron], s_vals: &mut Vec<f64>| -> Vec<f64> {
        s_vals.par_iter_mut().zip(neurons).for_each(|(s, nr)| *s = specs[nr.pop].eval(nr.v));
        (0..p).map(|a| chunked_sum(&s_vals[offsets[a]..offsets[a + 1]]) / sizes[a] as f64).collect()
    };
    let mut buffer = RateBuffer { dt, steps: vec![pop_rates(&neurons, &mut s_vals)], init, specs };

    let mut times = Vec::with_capacity(n_records);
    let (mut mean, mut var, mut rate) = (Vec::new(), Vec::new(), Vec::new());
    let mut traces: Vec<Vec<f64>> = vec![Vec::with_capacity(n_records); opts.trace.len()];
    let sample_steps: Vec<usize> = opts.sample_times.iter().map(|&t| (t / dt).round() as usize).collect();
    if let Some(&t) = opts.sample_times.iter().find(|&&t| !(0.0..=t_end + 1e-9).contains(&t)) {
        return Err(CoreError::OutOfRange { t, lo: 0.0, hi: t_end });
    }
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); sample_steps.len()];

    let mut record = |k: usize, neurons: &[Neuron], rates: &[f64]| {
        let vs: Vec<f64> = neurons.iter().map(|n| n.v).collect();
        let m: Vec<f64> = (0..p).map(|a| chunked_sum(&vs[offsets[a]..offsets[a + 1]]) / sizes[a] as f64).collect();
        let sq: Vec<f64> = vs.iter().zip(neurons).map(|(v, n)| (v - m[n.pop]).powi(2)).collect();
        let vr: Vec<f64> = (0..p)
            .map(|a| chunked_sum(&sq[offsets[a]..offsets[a + 1]]) / (sizes[a].max(2) - 1) as f64)
            .collect();
        times.push(k as f64 * dt);
        mean.push(m);
        var.push(vr);
        rate.push(rates.to_vec());
        for (tr, &i) in traces.iter_mut().zip(&opts.trace) {
            tr.push(vs[i]);
        }
    };
    let snapshot = |k: usize, neurons: &[Neuron], samples: &mut Vec<Vec<f64>>| {
        for (slot, &ks) in sample_steps.iter().enumerate() {
            if ks == k {
                samples[slot] = neurons.iter().map(|n| n.v).collect();
            }
        }
    };
    record(0, &neurons, &buffer.steps[0]);
    snapshot(0, &neurons, &mut samples);

    let sqdt = dt.sqrt();
    let mut lagged = vec![vec![0.0; p]; p];
    for step in 0..steps {
        let t = step as f64 * dt;
        for a in 0..p {
            for c in 0..p {
                lagged[a][c] = buffer.at(c, t - model.tau[a][c])?;
            }
        }
        let drift: Vec<f64> =
            (0..p).map(|a| model.input[a].at(t) + (0..p).map(|c| model.j[a][c] * lagged[a][c]).sum::<f64>()).collect();
        let lam: Vec<f64> = (0..p).map(|a| model.noise[a].at(t)).collect();
        let coef: Vec<Vec<f64>> = (0..p).map(|a| (0..p).map(|c| model.sigma[a][c] * lagged[a][c]).collect()).collect();
        let agg: Vec<f64> = coef.iter().map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        let theta = &model.theta;
        neurons.par_iter_mut().for_each(|nr| {
            let a = nr.pop;
            let zw: f64 = StandardNormal.sample(&mut nr.private);
            let mut dv = dt * (-nr.v / theta[a] + drift[a]) + lam[a] * sqdt * zw;
            if opts.aggregate_shared_noise {
                let zb: f64 = StandardNormal.sample(&mut nr.shared[0]);
                dv += agg[a] * sqdt * zb;
            } else {
                for (c, rng) in nr.shared.iter_mut().enumerate() {
                    let zb: f64 = StandardNormal.sample(rng);
                    dv += coef[a][c] * sqdt * zb;
                }
            }
            nr.v += dv;
        });
        if neurons.par_iter().any(|n| !n.v.is_finite()) {
            return Err(CoreError::Divergence { t: t + dt });
        }
        let rates = pop_rates(&neurons, &mut s_vals);
        if (step + 1) % opts.record_every == 0 {
            record(step + 1, &neurons, &rates);
        }
        snapshot(step + 1, &neurons, &mut samples);
        buffer.steps.push(rates);
    }
    Ok(NetworkRealization {
        seed,
        dt,
        sizes: sizes.to_vec(),
        offsets: offsets[..p].to_vec(),
        positions: None,
        times,
        mean,
        var,
        rate,
        sample_times: opts.sample_times.clone(),
        samples,
        trace_ids: opts.trace.clone(),
        traces,
        streams: if opts.aggregate_shared_noise {
            "chacha8(seed, kind|neuron|source); shared terms aggregated per receiver".into()
        } else {
            "chacha8(seed, kind|neuron|source); one stream per W^i and per B^(i,source)".into()
        },
    })
}

/// Discretization of a field into `p_pops` populations per layer at i.i.d. uniform positions.
///
/// Population `(a, alpha)` has index `a * p_pops + alpha`. Drift weights are
/// `w_ab K_b(d) rho |Gamma| / P`; noise weights `sigma_ab K_b(d) rho sqrt(|Gamma| / P)`, so the
/// summed noise variance approximates `sigma^2 rho^2 int K^2`.
pub fn field_populations(model: &NeuralFieldModel, p_pops: usize, seed: u64) -> Result<(FinitePopulationModel, Vec<f64>)> {
    model.validate()?;
    if p_pops == 0 {
        return Err(invalid("p_pops", "must be >= 1"));
    }
    if model.boundary == Boundary::Reflective && !model.delay.is_constant() {
        return Err(invalid("delay.speed", "reflective field networks need constant delays"));
    }
    let l = model.layers();
    let mut rng = stream(seed, stream_id(StreamKind::Placement, 0, 0));
    let pos: Vec<f64> = (0..p_pops).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
    let q = l * p_pops;
    let cell = 1.0 / p_pops as f64;
    let dist = |x: f64, y: f64| {
        let d = (x - y).abs();
        if model.boundary == Boundary::Periodic {
            d.min(1.0 - d)
        } else {
            d
        }
    };
    let kern = |b: usize, x: f64, y: f64| -> f64 {
        match model.boundary {
            Boundary::Reflective => model.kernel(b, (x - y).abs()) + model.kernel(b, x + y) + model.kernel(b, 2.0 - x - y),
            _ => model.kernel(b, dist(x, y)),
        }
    };
    let mut fp = FinitePopulationModel {
        j: vec![vec![0.0; q]; q],
        sigma: vec![vec![0.0; q]; q],
        tau: vec![vec![0.0; q]; q],
        theta: Vec::with_capacity(q),
        input: Vec::with_capacity(q),
        noise: Vec::with_capacity(q),
    };
    for a in 0..l {
        for _ in 0..p_pops {
            fp.theta.push(model.theta[a]);
            fp.input.push(model.input[a].clone());
            fp.noise.push(model.noise[a].clone());
        }
    }
    for a in 0..l {
        for (i, &ri) in pos.iter().enumerate() {
            for b in 0..l {
                for (k, &rk) in pos.iter().enumerate() {
                    let kv = kern(b, ri, rk);
                    let (x, y) = (a * p_pops + i, b * p_pops + k);
                    fp.j[x][y] = model.w[a][b] * kv * model.density * cell;
                    fp.sigma[x][y] = model.sigma[a][b] * kv * model.density * cell.sqrt();
                    fp.tau[x][y] = model.delay.at(dist(ri, rk));
                }
            }
        }
    }
    Ok((fp, pos))
}

/// Network on a field: `p_pops` populations per layer, `neurons_per_pop` each, shared terms aggregated.
#[allow(clippy::too_many_arguments)]
pub fn simulate_field_network(
    model: &NeuralFieldModel,
    specs: &[SigmoidSpec],
    layer_init: &[f64],
    p_pops: usize,
    neurons_per_pop: usize,
    seed: u64,
    t_end: f64,
    dt: f64,
    opts: &NetworkOptions,
) -> Result<NetworkRealization> {
    let l = model.layers();
    if specs.len() != l || layer_init.len() != 2 * l {
        return Err(invalid("layers", format!("need {l} sigmoids and a {}-component initial state", 2 * l)));
    }
    let (fp, pos) = field_populations(model, p_pops, seed)?;
    let q = fp.populations();
    let pop_specs: Vec<SigmoidSpec> = (0..q).map(|x| specs[x / p_pops].clone()).collect();
    let mut y0 = vec![0.0; 2 * q];
    for x in 0..q {
        y0[x] = layer_init[x / p_pops];
        y0[q + x] = layer_init[l + x / p_pops];
    }
    let init = HistorySegment::constant(y0, fp.max_delay());
    let mut o = opts.clone();
    o.aggregate_shared_noise = true;
    let mut real = simulate_network_with(&fp, &pop_specs, &init, &vec![neurons_per_pop; q], seed, t_end, dt, &o)?;
    real.positions = Some(pos);
    Ok(real)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PopulationMatch {
    pub times: Vec<f64>,
    pub emp_mean: Vec<f64>,
    pub emp_var: Vec<f64>,
    pub ref_mean: Vec<f64>,
    pub ref_var: Vec<f64>,
    pub n: usize,
    /// `sup_t |emp_mean - ref_mean|`.
    pub mean_gap: f64,
    /// Fraction of record times where the mean lies inside `band_sigma` Monte Carlo standard errors.
    pub mean_in_band: f64,
    pub var_in_band: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleStats {
    pub time: f64,
    pub population: usize,
    pub n: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Mean of `z_i z_j` over disjoint same-population pairs, `z` standardized across neurons.
    pub pair_correlation: f64,
    pub pairs: usize,
}

impl SampleStats {
    pub fn skewness_band(&self, sigmas: f64) -> f64 {
        sigmas * (6.0 / self.n as f64).sqrt()
    }

    pub fn kurtosis_band(&self, sigmas: f64) -> f64 {
        sigmas * (24.0 / self.n as f64).sqrt()
    }

    pub fn correlation_band(&self, sigmas: f64) -> f64 {
        sigmas / (self.pairs as f64).sqrt()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChaosDiagnostics {
    pub band_sigma: f64,
    pub populations: Vec<PopulationMatch>,
    pub samples: Vec<SampleStats>,
    /// Largest `|pair_correlation|` over populations and sample times.
    pub max_pair_correlation: f64,
}

impl ChaosDiagnostics {
    pub fn mean_gap(&self) -> f64 {
        self.populations.iter().map(|p| p.mean_gap).fold(0.0, f64::max)
    }

    pub fn gaussian_within_bands(&self) -> bool {
        self.samples.iter().all(|s| {
            s.skewness.abs() <= s.skewness_band(self.band_sigma) && s.excess_kurtosis.abs() <= s.kurtosis_band(self.band_sigma)
        })
    }

    pub fn correlation_within_bands(&self) -> bool {
        self.samples.iter().all(|s| s.pair_correlation.abs() <= s.correlation_band(self.band_sigma))
    }

    /// Rows `time,pop,empirical_mean,empirical_var,ref_mean,ref_var,n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,pop,empirical_mean,empirical_var,ref_mean,ref_var,n\n");
        for (a, p) in self.populations.iter().enumerate() {
            for k in 0..p.times.len() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    p.times[k], a, p.emp_mean[k], p.emp_var[k], p.ref_mean[k], p.ref_var[k], p.n
                ));
            }
        }
        out
    }
}

fn standardized_moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    (m, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Moment match, pair correlations and Gaussianity of a realization against the moment equations.
pub fn chaos_diagnostics(
    real: &NetworkRealization,
    moment_ref: &MomentTrajectory,
    n_pairs: usize,
    times: &[f64],
) -> Result<ChaosDiagnostics> {
    let p = real.populations();
    if moment_ref.populations() != p {
        return Err(invalid("moment_ref", "population count differs from the realization"));
    }
    let band_sigma = 3.0;
    let mut populations = Vec::with_capacity(p);
    for a in 0..p {
        let n = real.sizes[a];
        let mut pm = PopulationMatch {
            times: Vec::new(),
            emp_mean: Vec::new(),
            emp_var: Vec::new(),
            ref_mean: Vec::new(),
            ref_var: Vec::new(),
            n,
            mean_gap: 0.0,
            mean_in_band: 0.0,
            var_in_band: 0.0,
        };
        let (mut inm, mut inv) = (0usize, 0usize);
        for (k, &t) in real.times.iter().enumerate() {
            if t > moment_ref.t_end() + 1e-9 {
                break;
            }
            let y = moment_ref.state_at(t)?;
            let (mu, v) = (y[a], y[p + a]);
            let (em, ev) = (real.mean[k][a], real.var[k][a]);
            pm.mean_gap = pm.mean_gap.max((em - mu).abs());
            if (em - mu).abs() <= band_sigma * (v / n as f64).sqrt() + 1e-12 {
                inm += 1;
            }
            if (ev - v).abs() <= band_sigma * v * (2.0 / (n.max(2) - 1) as f64).sqrt() + 1e-12 {
                inv += 1;
            }
            pm.times.push(t);
            pm.emp_mean.push(em);
            pm.emp_var.push(ev);
            pm.ref_mean.push(mu);
            pm.ref_var.push(v);
        }
        let m = pm.times.len().max(1) as f64;
        pm.mean_in_band = inm as f64 / m;
        pm.var_in_band = inv as f64 / m;
        populations.push(pm);
    }

    let mut samples = Vec::new();
    let mut max_corr = 0.0f64;
    for &t in times {
        let slot = real
            .sample_times
            .iter()
            .position(|&s| (s - t).abs() <= 0.5 * real.dt)
            .ok_or(CoreError::OutOfRange { t, lo: f64::NAN, hi: f64::NAN })?;
        let vs = &real.samples[slot];
        if vs.is_empty() {
            return Err(CoreError::OutOfRange { t, lo: 0.0, hi: real.times.last().copied().unwrap_or(0.0) });
        }
        for a in 0..p {
            let block = &vs[real.offsets[a]..real.offsets[a] + real.sizes[a]];
            if block.len() < 4 {
                return Err(invalid("sizes", "need at least 4 neurons per population for sample statistics"));
            }
            let (m, var, skew, kurt) = standardized_moments(block);
            let sd = var.sqrt();
            let pairs = n_pairs.min(block.len() / 2);
            let mut rng = stream(real.seed, stream_id(StreamKind::Sampling, slot as u64, a as u64));
            let idx = sample(&mut rng, block.len(), 2 * pairs);
            let ids: Vec<usize> = idx.into_iter().collect();
            let corr = if sd > 0.0 {
                ids.chunks(2).map(|c| (block[c[0]] - m) * (block[c[1]] - m)).sum::<f64>() / (pairs as f64 * var)
            } else {
                0.0
            };
            max_corr = max_corr.max(corr.abs());
            samples.push(SampleStats {
                time: real.sample_times[slot],
                population: a,
                n: block.len(),
                skewness: skew,
                excess_kurtosis: kurt,
                pair_correlation: corr,
                pairs,
            });
        }
    }
    Ok(ChaosDiagnostics { band_sigma, populations, samples, max_pair_correlation: max_corr })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Drive;

    fn ou(lambda: f64) -> FinitePopulationModel {
        FinitePopulationModel::simple(vec![vec![0.0]], vec![0.0], lambda, 0.0)
    }

    #[test]
    fn sizes_split_evenly() {
        assert_eq!(equal_sizes(10, 3), vec![4, 3, 3]);
        assert_eq!(equal_sizes(10, 3).iter().sum::<usize>(), 10);
    }

    #[test]
    fn same_seed_same_realization() {
        let m = ou(0.7);
        let init = HistorySegment::constant(vec![0.3, 0.1], 0.0);
        let s = [SigmoidSpec::probit(1.0, 0.0)];
        let a = simulate_network(&m, &s, &init, 300, 5, 1.0, 0.01).unwrap();
        let b = simulate_network(&m, &s, &init, 300, 5, 1.0, 0.01).unwrap();
        let c = simulate_network(&m, &s, &init, 300, 6, 1.0, 0.01).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn coarse_step_rejected() {
        let m = ou(0.7);
        let init = HistorySegment::constant(vec![0.0, 0.0], 0.0);
        let r = simulate_network(&m, &[SigmoidSpec::probit(1.0, 0.0)], &init, 10, 1, 1.0, 0.1);
        assert!(matches!(r, Err(CoreError::InvalidParameter { .. })));
    }

    #[test]
    fn memory_guard() {
        let m = ou(0.7);
        let init = HistorySegment::constant(vec![0.0, 0.0], 0.0);
        let opts = NetworkOptions { sample_times: vec![0.5; 10], max_retained: 100, ..NetworkOptions::default() };
        let r = simulate_network_with(&m, &[SigmoidSpec::probit(1.0, 0.0)], &init, &[50], 1, 1.0, 0.01, &opts);
        assert!(matches!(r, Err(CoreError::Resource(_))));
    }

    #[test]
    fn field_weights_sum_to_kernel_mass() {
        let mut m = NeuralFieldModel::two_layer_reference(1.0, 0.1);
        m.input = vec![Drive::Const(0.0); 2];
        let (fp, pos) = field_populations(&m, 400, 3).unwrap();
        assert_eq!(pos.len(), 400);
        let row: f64 = (0..400).map(|i| fp.j[i][..400].iter().sum::<f64>()).sum::<f64>() / (400.0 * m.w[0][0]);
        assert!((row - m.kernel_mass(0)).abs() < 0.1 * m.kernel_mass(0), "{row}");
    }
}
