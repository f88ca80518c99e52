//! Functional state storage for delayed systems: an arbitrary-grid initial
//! segment on `[-tau_max, 0]` and a ring buffer of recent uniform steps.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CoreError, Result};

/// Initial function on `[t0, 0]`, interpolated by cubic Hermite with finite-difference slopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistorySegment {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl HistorySegment {
    /// Constant history on `[-span, 0]`.
    pub fn constant(state: Vec<f64>, span: f64) -> Self {
        if span > 0.0 {
            Self { times: vec![-span, 0.0], values: vec![state.clone(), state] }
        } else {
            Self { times: vec![0.0], values: vec![state] }
        }
    }

    /// Samples `f` on a uniform grid of `n + 1` points over `[-span, 0]`.
    pub fn sampled(span: f64, n: usize, f: impl Fn(f64) -> Vec<f64>) -> Self {
        if span <= 0.0 || n == 0 {
            return Self { times: vec![0.0], values: vec![f(0.0)] };
        }
        let times: Vec<f64> = (0..=n).map(|i| -span + span * i as f64 / n as f64).collect();
        let mut times = times;
        times[n] = 0.0;
        let values = times.iter().map(|&t| f(t)).collect();
        Self { times, values }
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn last(&self) -> &[f64] {
        self.values.last().expect("non-empty history")
    }

    pub fn validate(&self, dim: usize, span: f64) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.values.len() {
            return Err(invalid("history", "times and values must be non-empty and aligned"));
        }
        if self.values.iter().any(|v| v.len() != dim) {
            return Err(invalid("history", format!("state dimension must be {dim}")));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("history", "times must be strictly increasing"));
        }
        if self.times[self.times.len() - 1] != 0.0 {
            return Err(invalid("history", "segment must end at t = 0"));
        }
        if self.times[0] > -span + 1e-12 {
            return Err(invalid("history", format!("segment must cover [-{span}, 0]")));
        }
        if self.values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(invalid("history", "values must be finite"));
        }
        Ok(())
    }

    /// Writes the interpolated state at `t` into `out`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let n = self.times.len();
        let (lo, hi) = (self.times[0], self.times[n - 1]);
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(CoreError::OutOfRange { t, lo, hi });
        }
        if n == 1 {
            out.copy_from_slice(&self.values[0]);
            return Ok(());
        }
        let t = t.clamp(lo, hi);
        let i = (self.times.partition_point(|&x| x <= t).max(1) - 1).min(n - 2);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (h00, h10, h01, h11) = hermite_basis(s);
        for (d, o) in out.iter_mut().enumerate() {
            let m0 = self.slope(i, d);
            let m1 = self.slope(i + 1, d);
            *o = h00 * self.values[i][d] + h10 * h * m0 + h01 * self.values[i + 1][d] + h11 * h * m1;
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    fn slope(&self, i: usize, d: usize) -> f64 {
        let n = self.times.len();
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        (self.values[b][d] - self.values[a][d]) / (self.times[b] - self.times[a])
    }
}

pub(crate) fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2)
}

/// Ring buffer of `(state, derivative)` at uniform steps `t_k = k dt`.
#[derive(Clone, Debug)]
pub(crate) struct StepBuffer {
    dt: f64,
    capacity: usize,
    first: usize,
    states: VecDeque<Vec<f64>>,
    slopes: VecDeque<Vec<f64>>,
}

impl StepBuffer {
    pub fn new(dt: f64, span: f64) -> Self {
        let capacity = (span / dt).ceil() as usize + 4;
        Self { dt, capacity, first: 0, states: VecDeque::new(), slopes: VecDeque::new() }
    }

    /// Appends the state of step `k = len`; its slope is attached later.
    pub fn push_state(&mut self, y: Vec<f64>) {
        self.states.push_back(y);
        if self.states.len() > self.capacity {
            self.states.pop_front();
            self.slopes.pop_front();
            self.first += 1;
        }
    }

    pub fn set_slope(&mut self, k: usize, dy: Vec<f64>) {
        debug_assert_eq!(k, self.first + self.slopes.len());
        self.slopes.push_back(dy);
    }

    pub fn last_index(&self) -> usize {
        self.first + self.states.len() - 1
    }

    /// Cubic Hermite value at `t > 0` inside the stored window.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let x = t / self.dt;
        let k = x.round();
        if (x - k).abs() < 1e-9 {
            let k = k as usize;
            if k >= self.first && k <= self.last_index() {
                out.copy_from_slice(&self.states[k - self.first]);
                return Ok(());
            }
        }
        let i = x.floor() as usize;
        let range = CoreError::OutOfRange {
            t,
            lo: self.first as f64 * self.dt,
            hi: self.last_index() as f64 * self.dt,
        };
        if i < self.first || i + 1 > self.last_index() || i + 1 - self.first >= self.slopes.len() {
            return Err(range);
        }
        let s = x - i as f64;
        let (h00, h10, h01, h11) = hermite_basis(s);
        let (y0, y1) = (&self.states[i - self.first], &self.states[i + 1 - self.first]);
        let (m0, m1) = (&self.slopes[i - self.first], &self.slopes[i + 1 - self.first]);
        let h = self.dt;
        for (d, o) in out.iter_mut().enumerate() {
            *o = h00 * y0[d] + h10 * h * m0[d] + h01 * y1[d] + h11 * h * m1[d];
        }
        Ok(())
    }
}

/// 4-point Lagrange interpolation on a uniform grid starting at `t0`.
pub(crate) fn lagrange_uniform(t0: f64, dt: f64, ys: &[Vec<f64>], t: f64, out: &mut [f64]) {
    let n = ys.len();
    let x = (t - t0) / dt;
    if n < 4 {
        let i = (x.floor().max(0.0) as usize).min(n.saturating_sub(2));
        let s = x - i as f64;
        for (d, o) in out.iter_mut().enumerate() {
            *o = if n == 1 { ys[0][d] } else { ys[i][d] + s * (ys[i + 1][d] - ys[i][d]) };
        }
        return;
    }
    let i = (x.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let s = x - i as f64;
    let l = [
        -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
        s * (s - 2.0) * (s - 3.0) / 2.0,
        -s * (s - 1.0) * (s - 3.0) / 2.0,
        s * (s - 1.0) * (s - 2.0) / 6.0,
    ];
    for (d, o) in out.iter_mut().enumerate() {
        *o = (0..4).map(|j| l[j] * ys[i + j][d]).sum();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_reproduces_cubics_in_the_interior() {
        let f = |t: f64| vec![1.0 + t - 0.5 * t * t, (2.0 * t).sin()];
        let seg = HistorySegment::sampled(2.0, 400, f);
        seg.validate(2, 2.0).unwrap();
        let y = seg.eval(-0.733).unwrap();
        assert!((y[0] - f(-0.733)[0]).abs() < 1e-9);
        assert!((y[1] - f(-0.733)[1]).abs() < 1e-5);
        assert!(seg.eval(0.1).is_err());
        assert!(seg.eval(-2.5).is_err());
    }

    #[test]
    fn segment_validation() {
        let seg = HistorySegment::constant(vec![0.0, 1.0], 1.0);
        assert!(seg.validate(2, 1.0).is_ok());
        assert!(seg.validate(2, 1.5).is_err());
        assert!(seg.validate(3, 1.0).is_err());
    }

    #[test]
    fn ring_buffer_hermite_exact_for_cubics() {
        let dt = 0.1;
        let f = |t: f64| t * t * t - t;
        let df = |t: f64| 3.0 * t * t - 1.0;
        let mut b = StepBuffer::new(dt, 0.5);
        for k in 0..20 {
            let t = k as f64 * dt;
            b.push_state(vec![f(t)]);
            b.set_slope(k, vec![df(t)]);
        }
        let mut out = [0.0];
        b.eval_into(1.537, &mut out).unwrap();
        assert!((out[0] - f(1.537)).abs() < 1e-12);
        assert!(b.eval_into(0.2, &mut out).is_err());
        b.eval_into(1.9, &mut out).unwrap();
        assert!((out[0] - f(1.9)).abs() < 1e-12);
    }

    #[test]
    fn lagrange_exact_for_cubics() {
        let ys: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64 * 0.5).powi(3)]).collect();
        let mut out = [0.0];
        lagrange_uniform(0.0, 0.5, &ys, 2.3, &mut out);
        assert!((out[0] - 2.3f64.powi(3)).abs() < 1e-12);
        lagrange_uniform(0.0, 0.5, &ys, 4.4, &mut out);
        assert!((out[0] - 4.4f64.powi(3)).abs() < 1e-11);
    }
}
