//! Moment equations of a finite population network: a delayed ODE system on
//! `(mu_alpha, v_alpha)` integrated by fixed-step RK4, its equilibria, the
//! covariance function and an integral-form fixed-point iteration.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, step_count, CoreError, Result};
use crate::history::{lagrange_uniform, HistorySegment, StepBuffer};
use crate::model::FinitePopulationModel;
use crate::sigmoid::SigmoidSpec;
use crate::spectral::dde_roots::{dde_linearize_and_roots, RootSearch};

/// Tolerated round-off below zero in variance components.
pub const VARIANCE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentTrajectory {
    pub model: FinitePopulationModel,
    pub specs: Vec<SigmoidSpec>,
    pub init: HistorySegment,
    pub times: Vec<f64>,
    /// `[mu_1..mu_P, v_1..v_P]` per recorded time.
    pub states: Vec<Vec<f64>>,
    pub dt: f64,
    pub method: String,
}

impl MomentTrajectory {
    pub fn populations(&self) -> usize {
        self.model.populations()
    }

    pub fn mu(&self, k: usize, alpha: usize) -> f64 {
        self.states[k][alpha]
    }

    pub fn v(&self, k: usize, alpha: usize) -> f64 {
        self.states[k][self.populations() + alpha]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// State at any `t` in `[history start, t_end]`.
    pub fn state_at(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; 2 * self.populations()];
        self.state_into(t, &mut out)?;
        Ok(out)
    }

    pub(crate) fn state_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if t <= 0.0 {
            return self.init.eval_into(t, out);
        }
        let hi = self.t_end();
        if t > hi + 1e-12 {
            return Err(CoreError::OutOfRange { t, lo: self.init.start(), hi });
        }
        let step = if self.times.len() > 1 { self.times[1] - self.times[0] } else { self.dt };
        lagrange_uniform(self.times[0], step, &self.states, t.min(hi), out);
        Ok(())
    }

    /// Sup-norm distance to another trajectory on the common recorded grid.
    pub fn sup_distance(&self, other: &MomentTrajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MomentOptions {
    /// Keep every n-th step in the trajectory.
    pub record_every: usize,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self { record_every: 1 }
    }
}

/// Default step `min(tau_min, theta_min) / 50`.
pub fn default_dt(model: &FinitePopulationModel) -> f64 {
    let th = model.theta.iter().copied().fold(f64::INFINITY, f64::min);
    model.min_positive_delay().map_or(th, |t| t.min(th)) / 50.0
}

pub(crate) struct MomentField<'a> {
    pub model: &'a FinitePopulationModel,
    pub specs: &'a [SigmoidSpec],
}

impl MomentField<'_> {
    fn p(&self) -> usize {
        self.model.populations()
    }

    /// Vector field at time `t` with stage state `y`; `lookup` supplies delayed states.
    pub fn rhs(
        &self,
        t: f64,
        y: &[f64],
        lookup: &mut dyn FnMut(f64, &mut [f64]) -> Result<()>,
        scratch: &mut [f64],
        out: &mut [f64],
    ) -> Result<()> {
        let p = self.p();
        let m = self.model;
        for a in 0..p {
            let th = m.theta[a];
            let lam = m.noise[a].at(t);
            let mut dmu = -y[a] / th + m.input[a].at(t);
            let mut dv = -2.0 * y[p + a] / th + lam * lam;
            for b in 0..p {
                let (jab, sab) = (m.j[a][b], m.sigma[a][b]);
                if jab == 0.0 && sab == 0.0 {
                    continue;
                }
                let tau = m.tau[a][b];
                let (mu_b, v_b) = if tau == 0.0 {
                    (y[b], y[p + b])
                } else {
                    lookup(t - tau, scratch)?;
                    (scratch[b], scratch[p + b])
                };
                let f = self.specs[b].moment(mu_b, v_b);
                dmu += jab * f;
                dv += sab * sab * f * f;
            }
            out[a] = dmu;
            out[p + a] = dv;
        }
        Ok(())
    }

    /// Delay-free residual and Jacobian at a constant-drive equilibrium candidate.
    fn residual_jacobian(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.p();
        let m = self.model;
        let mut r = DVector::zeros(2 * p);
        let mut jac = DMatrix::zeros(2 * p, 2 * p);
        let fs: Vec<(f64, f64, f64)> = (0..p)
            .map(|b| {
                let f = self.specs[b].moment(x[b], x[p + b]);
                let (fm, fv) = self.specs[b].moment_grad(x[b], x[p + b]);
                (f, fm, fv)
            })
            .collect();
        for a in 0..p {
            let th = m.theta[a];
            let lam = m.noise[a].at(0.0);
            r[a] = -x[a] / th + m.input[a].at(0.0);
            r[p + a] = -2.0 * x[p + a] / th + lam * lam;
            jac[(a, a)] -= 1.0 / th;
            jac[(p + a, p + a)] -= 2.0 / th;
            for b in 0..p {
                let (f, fm, fv) = fs[b];
                let jab = m.j[a][b];
                let s2 = m.sigma[a][b] * m.sigma[a][b];
                r[a] += jab * f;
                r[p + a] += s2 * f * f;
                jac[(a, b)] += jab * fm;
                jac[(a, p + b)] += jab * fv;
                jac[(p + a, b)] += 2.0 * s2 * f * fm;
                jac[(p + a, p + b)] += 2.0 * s2 * f * fv;
            }
        }
        (r, jac)
    }
}

fn check_inputs(model: &FinitePopulationModel, specs: &[SigmoidSpec]) -> Result<()> {
    model.validate()?;
    if specs.len() != model.populations() {
        return Err(invalid("sigmoid", format!("need one spec per population ({})", model.populations())));
    }
    for s in specs {
        s.validate()?;
    }
    Ok(())
}

fn check_state(t: f64, y: &[f64], p: usize) -> Result<()> {
    if y.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::Divergence { t });
    }
    if let Some(&v) = y[p..].iter().find(|&&v| v < -VARIANCE_SLACK) {
        return Err(CoreError::Integrity { t, value: v });
    }
    Ok(())
}

/// Fixed-step RK4 with cubic Hermite interpolation of the stored history.
pub fn integrate_moments(
    model: &FinitePopulationModel,
    specs: &[SigmoidSpec],
    init: &HistorySegment,
    t_end: f64,
    dt: f64,
) -> Result<MomentTrajectory> {
    integrate_moments_with(model, specs, init, t_end, dt, MomentOptions::default())
}

pub fn integrate_moments_with(
    model: &FinitePopulationModel,
    specs: &[SigmoidSpec],
    init: &HistorySegment,
    t_end: f64,
    dt: f64,
    opts: MomentOptions,
) -> Result<MomentTrajectory> {
    check_inputs(model, specs)?;
    let p = model.populations();
    let tau_max = model.max_delay();
    init.validate(2 * p, tau_max)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", "must be > 0"));
    }
    if !(t_end >= 0.0) {
        return Err(invalid("t_end", "must be >= 0"));
    }
    if let Some(tmin) = model.min_positive_delay() {
        if tmin < dt * (1.0 - 1e-12) {
            return Err(invalid("dt", format!("must not exceed the shortest delay {tmin}")));
        }
    }
    if opts.record_every == 0 {
        return Err(invalid("record_every", "must be >= 1"));
    }
    let y0 = init.last().to_vec();
    if let Some(&v) = y0[p..].iter().find(|&&v| v < 0.0) {
        return Err(CoreError::NegativeVariance(v));
    }

    let field = MomentField { model, specs };
    let steps = step_count(t_end, dt)?;
    let mut buf = StepBuffer::new(dt, tau_max);
    buf.push_state(y0.clone());
    let mut times = vec![0.0];
    let mut states = vec![y0.clone()];

    let d = 2 * p;
    let mut y = y0;
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut stage = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    for n in 0..steps {
        let t = n as f64 * dt;
        {
            let mut lookup = |tq: f64, out: &mut [f64]| -> Result<()> {
                if tq <= 0.0 {
                    init.eval_into(tq, out)
                } else {
                    buf.eval_into(tq, out)
                }
            };
            field.rhs(t, &y, &mut lookup, &mut scratch, &mut k1)?;
        }
        buf.set_slope(n, k1.clone());
        let mut lookup = |tq: f64, out: &mut [f64]| -> Result<()> {
            if tq <= 0.0 {
                init.eval_into(tq, out)
            } else {
                buf.eval_into(tq, out)
            }
        };
        for i in 0..d {
            stage[i] = y[i] + 0.5 * dt * k1[i];
        }
        field.rhs(t + 0.5 * dt, &stage, &mut lookup, &mut scratch, &mut k2)?;
        for i in 0..d {
            stage[i] = y[i] + 0.5 * dt * k2[i];
        }
        field.rhs(t + 0.5 * dt, &stage, &mut lookup, &mut scratch, &mut k3)?;
        for i in 0..d {
            stage[i] = y[i] + dt * k3[i];
        }
        field.rhs(t + dt, &stage, &mut lookup, &mut scratch, &mut k4)?;
        for i in 0..d {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t1 = (n + 1) as f64 * dt;
        check_state(t1, &y, p)?;
        buf.push_state(y.clone());
        if (n + 1) % opts.record_every == 0 {
            times.push(t1);
            states.push(y.clone());
        }
    }
    Ok(MomentTrajectory {
        model: model.clone(),
        specs: specs.to_vec(),
        init: init.clone(),
        times,
        states,
        dt,
        method: "rk4-hermite-history".into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Equilibrium {
    /// `[mu_1..mu_P, v_1..v_P]`.
    pub state: Vec<f64>,
    pub residual: f64,
    pub stability: Stability,
    /// Rightmost characteristic roots, descending real part.
    pub rightmost: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct EquilibriumSet {
    pub points: Vec<Equilibrium>,
    /// Seeds dropped because the Jacobian was singular.
    pub singular_seeds: usize,
    /// Seeds whose Newton iteration did not reach the residual tolerance.
    pub unconverged_seeds: usize,
}

/// Search box for equilibrium seeds, one interval per state component.
#[derive(Clone, Debug)]
pub struct StateBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl StateBox {
    pub fn uniform(p: usize, mu: (f64, f64), v: (f64, f64)) -> Self {
        let mut lo = vec![mu.0; p];
        let mut hi = vec![mu.1; p];
        lo.extend(std::iter::repeat_n(v.0, p));
        hi.extend(std::iter::repeat_n(v.1, p));
        Self { lo, hi }
    }
}

const RESIDUAL_TOL: f64 = 1e-10;
const DEDUP_TOL: f64 = 1e-8;

fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

enum NewtonOutcome {
    Converged(Vec<f64>, f64),
    Singular,
    Failed,
}

fn damped_newton(field: &MomentField, mut x: Vec<f64>) -> NewtonOutcome {
    let p = field.p();
    let (mut r, mut jac) = field.residual_jacobian(&x);
    let mut norm = r.amax();
    for _ in 0..200 {
        if norm < 1e-13 {
            break;
        }
        let Some(step) = jac.clone().lu().solve(&(-&r)) else {
            return NewtonOutcome::Singular;
        };
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + lam * b).collect();
            if cand[p..].iter().all(|&v| v >= 0.0) {
                let (rc, jc) = field.residual_jacobian(&cand);
                let nc = rc.amax();
                if nc < norm || nc < 1e-13 {
                    x = cand;
                    r = rc;
                    jac = jc;
                    norm = nc;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm < RESIDUAL_TOL && x.iter().all(|v| v.is_finite()) {
        NewtonOutcome::Converged(x, norm)
    } else {
        NewtonOutcome::Failed
    }
}

/// Damped Newton from quasi-random seeds on the delay-free vector field.
pub fn find_equilibria(
    model: &FinitePopulationModel,
    specs: &[SigmoidSpec],
    bx: &StateBox,
    n_starts: usize,
) -> Result<EquilibriumSet> {
    check_inputs(model, specs)?;
    let p = model.populations();
    if bx.lo.len() != 2 * p || bx.hi.len() != 2 * p {
        return Err(invalid("box", format!("needs {} intervals", 2 * p)));
    }
    if bx.lo.iter().zip(&bx.hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
        return Err(invalid("box", "bounds must be finite with lo <= hi"));
    }
    if 2 * p > PRIMES.len() {
        return Err(invalid("populations", "too many for the seed sequence"));
    }
    if model.input.iter().chain(&model.noise).any(|d| !d.is_const()) {
        return Err(invalid("input/noise", "equilibria need constant drives"));
    }
    let field = MomentField { model, specs };
    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    let (mut singular, mut failed) = (0, 0);
    for i in 1..=n_starts {
        let seed: Vec<f64> = (0..2 * p)
            .map(|d| bx.lo[d] + (bx.hi[d] - bx.lo[d]) * halton(i, PRIMES[d]))
            .enumerate()
            .map(|(d, x)| if d >= p { x.max(0.0) } else { x })
            .collect();
        match damped_newton(&field, seed) {
            NewtonOutcome::Converged(x, res) => {
                if let Some(e) = found.iter_mut().find(|(y, _)| {
                    y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < DEDUP_TOL
                }) {
                    if res < e.1 {
                        *e = (x, res);
                    }
                } else {
                    found.push((x, res));
                }
            }
            NewtonOutcome::Singular => singular += 1,
            NewtonOutcome::Failed => failed += 1,
        }
    }
    found.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
    let mut points = Vec::with_capacity(found.len());
    for (state, residual) in found {
        let roots = dde_linearize_and_roots(model, specs, &state, &RootSearch::default())?;
        let rightmost: Vec<Complex64> = roots.roots.iter().take(6).map(|r| r.zeta).collect();
        let lead = rightmost.first().map_or(f64::NEG_INFINITY, |z| z.re);
        let stability = if lead < -1e-9 {
            Stability::Stable
        } else if lead > 1e-9 {
            Stability::Unstable
        } else {
            Stability::Marginal
        };
        points.push(Equilibrium { state, residual, stability, rightmost });
    }
    Ok(EquilibriumSet { points, singular_seeds: singular, unconverged_seeds: failed })
}

/// Residual of the delay-free vector field (max norm).
pub fn equilibrium_residual(model: &FinitePopulationModel, specs: &[SigmoidSpec], state: &[f64]) -> f64 {
    MomentField { model, specs }.residual_jacobian(state).0.amax()
}

/// `C_aa(t1, t2)` from the integral representation, trapezoid on the trajectory grid.
pub fn covariance(traj: &MomentTrajectory, alpha: usize, t1: f64, t2: f64) -> Result<f64> {
    let p = traj.populations();
    if alpha >= p {
        return Err(invalid("alpha", format!("population index < {p}")));
    }
    let hi = traj.t_end();
    for t in [t1, t2] {
        if !(t > 0.0 && t <= hi + 1e-12) {
            return Err(CoreError::OutOfRange { t, lo: 0.0, hi });
        }
    }
    let m = &traj.model;
    let th = m.theta[alpha];
    let upper = t1.min(t2);
    let mut scratch = vec![0.0; 2 * p];
    let mut integrand = |s: f64| -> Result<f64> {
        let lam = m.noise[alpha].at(s);
        let mut q = lam * lam;
        for b in 0..p {
            let sg = m.sigma[alpha][b];
            if sg != 0.0 {
                traj.state_into(s - m.tau[alpha][b], &mut scratch)?;
                let f = traj.specs[b].moment(scratch[b], scratch[p + b]);
                q += sg * sg * f * f;
            }
        }
        Ok((2.0 * s / th).exp() * q)
    };
    let mut acc = 0.0;
    let mut prev_t = 0.0;
    let mut prev = integrand(0.0)?;
    for &t in traj.times.iter().skip(1) {
        let tt = t.min(upper);
        let cur = integrand(tt)?;
        acc += 0.5 * (tt - prev_t) * (prev + cur);
        prev_t = tt;
        prev = cur;
        if t >= upper {
            break;
        }
    }
    let v0 = traj.v(0, alpha);
    Ok((-(t1 + t2) / th).exp() * (v0 + acc))
}

/// Outcome of the fixed-point iteration of the integral moment map.
#[derive(Clone, Debug)]
pub struct PicardRun {
    pub trajectory: MomentTrajectory,
    /// Sup-norm change produced by each iteration.
    pub increments: Vec<f64>,
}

/// Iterates the integral-form moment map from the constant continuation of the initial state.
pub fn picard_iterate(
    model: &FinitePopulationModel,
    specs: &[SigmoidSpec],
    init: &HistorySegment,
    t_end: f64,
    dt: f64,
    n_iter: usize,
) -> Result<PicardRun> {
    check_inputs(model, specs)?;
    let p = model.populations();
    init.validate(2 * p, model.max_delay())?;
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(invalid("dt/t_end", "must be > 0"));
    }
    let steps = step_count(t_end, dt)?.max(1);
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let y0 = init.last().to_vec();
    let mut states = vec![y0.clone(); steps + 1];
    let mut increments = Vec::with_capacity(n_iter);
    let d = 2 * p;
    let mut scratch = vec![0.0; d];
    let mut g_mu = vec![vec![0.0; p]; 2 * steps + 1];
    let mut g_v = vec![vec![0.0; p]; 2 * steps + 1];
    for _ in 0..n_iter {
        // Forcing terms at grid points and midpoints, from the current iterate.
        for h in 0..=2 * steps {
            let s = h as f64 * 0.5 * dt;
            for a in 0..p {
                let lam = model.noise[a].at(s);
                let mut gm = model.input[a].at(s);
                let mut gv = lam * lam;
                for b in 0..p {
                    let (jab, sab) = (model.j[a][b], model.sigma[a][b]);
                    if jab == 0.0 && sab == 0.0 {
                        continue;
                    }
                    let tq = s - model.tau[a][b];
                    if tq <= 0.0 {
                        init.eval_into(tq, &mut scratch)?;
                    } else {
                        lagrange_uniform(0.0, dt, &states, tq, &mut scratch);
                    }
                    let f = specs[b].moment(scratch[b], scratch[p + b]);
                    gm += jab * f;
                    gv += sab * sab * f * f;
                }
                g_mu[h][a] = gm;
                g_v[h][a] = gv;
            }
        }
        let mut next = vec![y0.clone(); steps + 1];
        for k in 0..steps {
            for a in 0..p {
                let th = model.theta[a];
                let (e1, eh) = ((-dt / th).exp(), (-0.5 * dt / th).exp());
                let (e2, e2h) = ((-2.0 * dt / th).exp(), (-dt / th).exp());
                let (i0, im, i1) = (2 * k, 2 * k + 1, 2 * k + 2);
                next[k + 1][a] =
                    e1 * next[k][a] + dt / 6.0 * (e1 * g_mu[i0][a] + 4.0 * eh * g_mu[im][a] + g_mu[i1][a]);
                next[k + 1][p + a] =
                    e2 * next[k][p + a] + dt / 6.0 * (e2 * g_v[i0][a] + 4.0 * e2h * g_v[im][a] + g_v[i1][a]);
            }
        }
        let inc = states
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        if !inc.is_finite() {
            return Err(CoreError::Divergence { t: t_end });
        }
        increments.push(inc);
        states = next;
    }
    Ok(PicardRun {
        trajectory: MomentTrajectory {
            model: model.clone(),
            specs: specs.to_vec(),
            init: init.clone(),
            times,
            states,
            dt,
            method: "picard-integral-map".into(),
        },
        increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decoupled(noise: f64, input: f64) -> FinitePopulationModel {
        FinitePopulationModel::simple(vec![vec![0.0]], vec![input], noise, 0.0)
    }

    #[test]
    fn decoupled_moments_have_closed_form() {
        let m = decoupled(0.6, 1.5);
        let init = HistorySegment::constant(vec![2.0, 0.0], 0.0);
        let tr = integrate_moments(&m, &[SigmoidSpec::probit(1.0, 0.0)], &init, 8.0, 0.01).unwrap();
        for (k, &t) in tr.times.iter().enumerate() {
            let mu = (-t).exp() * 2.0 + 1.5 * (1.0 - (-t).exp());
            let v = 0.18 * (1.0 - (-2.0 * t).exp());
            assert!((tr.mu(k, 0) - mu).abs() < 1e-10);
            assert!((tr.v(k, 0) - v).abs() < 1e-10);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let m = decoupled(0.6, 1.5);
        let init = HistorySegment::constant(vec![2.0, 0.0], 0.0);
        let spec = [SigmoidSpec::probit(1.0, 0.0)];
        let exact = (-1.0f64).exp() * 2.0 + 1.5 * (1.0 - (-1.0f64).exp());
        let e1 = (integrate_moments(&m, &spec, &init, 1.0, 0.2).unwrap().states.last().unwrap()[0] - exact).abs();
        let e2 = (integrate_moments(&m, &spec, &init, 1.0, 0.1).unwrap().states.last().unwrap()[0] - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn step_longer_than_delay_is_rejected() {
        let m = FinitePopulationModel::simple(vec![vec![1.0]], vec![0.0], 0.1, 0.05);
        let init = HistorySegment::constant(vec![0.0, 0.0], 0.05);
        let r = integrate_moments(&m, &[SigmoidSpec::probit(1.0, 0.0)], &init, 1.0, 0.1);
        assert!(matches!(r, Err(CoreError::InvalidParameter { .. })));
    }

    #[test]
    fn negative_initial_variance_is_rejected() {
        let m = decoupled(0.1, 0.0);
        let init = HistorySegment::constant(vec![0.0, -0.5], 0.0);
        assert!(integrate_moments(&m, &[SigmoidSpec::probit(1.0, 0.0)], &init, 1.0, 0.1).is_err());
    }

    #[test]
    fn divergence_is_reported_with_time() {
        let mut m = decoupled(0.0, 0.0);
        m.theta[0] = 1e-300;
        let init = HistorySegment::constant(vec![1.0, 0.0], 0.0);
        let r = integrate_moments(&m, &[SigmoidSpec::probit(1.0, 0.0)], &init, 1.0, 0.1);
        assert!(matches!(r, Err(CoreError::Divergence { .. })), "{r:?}");
    }

    #[test]
    fn covariance_closed_form_without_synaptic_noise() {
        let m = decoupled(0.8, 0.3);
        let init = HistorySegment::constant(vec![0.0, 0.2], 0.0);
        let tr = integrate_moments(&m, &[SigmoidSpec::probit(1.0, 0.0)], &init, 4.0, 0.001).unwrap();
        for &(t1, t2) in &[(1.0, 2.5), (3.0, 0.7), (2.2, 2.2)] {
            let tm: f64 = f64::min(t1, t2);
            let exact = (-(t1 + t2)).exp() * (0.2 + 0.32 * ((2.0 * tm).exp() - 1.0));
            let c = covariance(&tr, 0, t1, t2).unwrap();
            assert!((c - exact).abs() < 1e-6 * exact.abs().max(1.0), "{c} {exact}");
        }
        assert!(covariance(&tr, 0, 5.0, 1.0).is_err());
        assert!(covariance(&tr, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn linear_equilibrium_when_uncoupled() {
        let m = FinitePopulationModel::simple(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![0.7, -1.2], 0.4, 0.0);
        let specs = vec![SigmoidSpec::probit(1.0, 0.0); 2];
        let set = find_equilibria(&m, &specs, &StateBox::uniform(2, (-3.0, 3.0), (0.0, 1.0)), 20).unwrap();
        assert_eq!(set.points.len(), 1);
        let e = &set.points[0];
        let want = [-1.2, 0.7, 0.08, 0.08];
        let mut got = e.state.clone();
        got.swap(0, 1);
        got.swap(2, 3);
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(e.stability, Stability::Stable);
    }

    #[test]
    fn picard_zero_iterations_returns_seed() {
        let m = decoupled(0.3, 1.0);
        let init = HistorySegment::constant(vec![0.5, 0.1], 0.0);
        let run = picard_iterate(&m, &[SigmoidSpec::probit(1.0, 0.0)], &init, 1.0, 0.1, 0).unwrap();
        assert!(run.trajectory.states.iter().all(|s| s == &vec![0.5, 0.1]));
        assert!(run.increments.is_empty());
    }
}
