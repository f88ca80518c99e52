//! Numerical linearization of the moment equations and roots of
//! `det(zeta I - A_0 - sum_d A_d e^{-zeta d})`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CharacteristicRoot, RootFamily};
use crate::dde::MomentField;
use crate::error::{invalid, Result};
use crate::model::FinitePopulationModel;
use crate::sigmoid::SigmoidSpec;

/// Jacobian blocks of the moment field at a constant state.
#[derive(Clone, Debug)]
pub struct LinearizedSystem {
    /// Undelayed block, including the leak terms.
    pub a0: DMatrix<f64>,
    /// `(delay, block)` for each distinct positive delay.
    pub delayed: Vec<(f64, DMatrix<f64>)>,
}

impl LinearizedSystem {
    pub fn dim(&self) -> usize {
        self.a0.nrows()
    }

    /// `M(zeta)` and `M'(zeta)`.
    pub fn matrices(&self, z: Complex64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let n = self.dim();
        let mut m = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { z } else { Complex64::new(0.0, 0.0) };
            d - self.a0[(i, j)]
        });
        let mut mp = DMatrix::<Complex64>::identity(n, n);
        for (tau, a) in &self.delayed {
            let e = (-z * *tau).exp();
            for i in 0..n {
                for j in 0..n {
                    let v = a[(i, j)] * e;
                    m[(i, j)] -= v;
                    mp[(i, j)] += v * *tau;
                }
            }
        }
        (m, mp)
    }

    pub fn det(&self, z: Complex64) -> Complex64 {
        self.matrices(z).0.lu().determinant()
    }

    /// Newton correction `|det M / (det M)'|` relative to `max(1, |zeta|)`: an estimate of the
    /// distance to the nearest root; `0` where `M` is exactly singular.
    pub fn residual(&self, z: Complex64) -> f64 {
        match self.log_derivative(z) {
            Some(tr) if tr.norm() > 0.0 => 1.0 / (tr.norm() * z.norm().max(1.0)),
            Some(_) => f64::INFINITY,
            None => 0.0,
        }
    }

    /// `det'/det = tr(M^{-1} M')`; `None` when `M` is exactly singular.
    fn log_derivative(&self, z: Complex64) -> Option<Complex64> {
        let (m, mp) = self.matrices(z);
        m.lu().solve(&mp).map(|x| x.trace())
    }
}

/// Jacobians by central differences (step `1e-6`) of the moment vector field.
pub fn linearize(model: &FinitePopulationModel, specs: &[SigmoidSpec], state: &[f64]) -> Result<LinearizedSystem> {
    model.validate()?;
    let p = model.populations();
    if state.len() != 2 * p || specs.len() != p {
        return Err(invalid("state", format!("expected {} components and {p} sigmoids", 2 * p)));
    }
    let mut delays: Vec<f64> = model.tau.iter().flatten().copied().filter(|&t| t > 0.0).collect();
    delays.sort_by(f64::total_cmp);
    delays.dedup();
    let field = MomentField { model, specs };
    let d = 2 * p;
    let h = 1e-6;
    let eval = |lag: Option<f64>, pert: &[f64]| -> Result<Vec<f64>> {
        let mut out = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        let y = if lag.is_none() { pert } else { state };
        let mut lookup = |tq: f64, o: &mut [f64]| -> Result<()> {
            match lag {
                Some(l) if (-tq - l).abs() <= 1e-12 * l.max(1.0) => o.copy_from_slice(pert),
                _ => o.copy_from_slice(state),
            }
            Ok(())
        };
        field.rhs(0.0, y, &mut lookup, &mut scratch, &mut out)?;
        Ok(out)
    };
    let block = |lag: Option<f64>| -> Result<DMatrix<f64>> {
        let mut a = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut xp = state.to_vec();
            let mut xm = state.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (eval(lag, &xp)?, eval(lag, &xm)?);
            for i in 0..d {
                a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(a)
    };
    let a0 = block(None)?;
    let delayed = delays.iter().map(|&t| Ok((t, block(Some(t))?))).collect::<Result<Vec<_>>>()?;
    Ok(LinearizedSystem { a0, delayed })
}

/// Search region and seeding for the determinant roots.
#[derive(Clone, Debug)]
pub struct RootSearch {
    pub re: (f64, f64),
    pub im: (f64, f64),
    /// Seed grid `(n_re, n_im)`.
    pub grid: (usize, usize),
    /// Additional seeds, e.g. roots at a neighbouring parameter value.
    pub extra_seeds: Vec<Complex64>,
    /// Verify the harvest with an argument-principle count on the mirrored rectangle.
    pub count_check: bool,
    /// Use eigenvalues directly when there is no delay.
    pub eigen_fast_path: bool,
}

impl Default for RootSearch {
    fn default() -> Self {
        Self {
            re: (-10.0, 5.0),
            im: (0.0, 50.0),
            grid: (40, 100),
            extra_seeds: Vec::new(),
            count_check: true,
            eigen_fast_path: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RootReport {
    /// Roots with conjugates, descending real part.
    pub roots: Vec<CharacteristicRoot>,
    /// Zeros (with multiplicity) inside the mirrored search rectangle by the argument principle.
    pub boundary_count: Option<u32>,
    /// Harvested roots (with multiplicity) inside the same rectangle.
    pub harvested_in_box: u32,
    pub complete: bool,
    pub warning: Option<String>,
}

impl RootReport {
    pub fn rightmost(&self) -> Option<Complex64> {
        self.roots.first().map(|r| r.zeta)
    }

    /// Roots with positive real part, counted with multiplicity.
    pub fn unstable_count(&self) -> u32 {
        self.roots.iter().filter(|r| r.zeta.re > 0.0).map(|r| r.multiplicity).sum()
    }
}

const RESIDUAL_TOL: f64 = 1e-9;
const DEDUP_TOL: f64 = 1e-8;

fn newton(lin: &LinearizedSystem, mut z: Complex64, mult: f64) -> Option<Complex64> {
    for _ in 0..100 {
        let Some(tr) = lin.log_derivative(z) else { return Some(z) };
        if tr.norm() == 0.0 || !tr.re.is_finite() {
            return None;
        }
        let step = mult / tr;
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > 1e4 {
            return None;
        }
        if step.norm() <= 1e-14 * z.norm().max(1.0) {
            return Some(z);
        }
    }
    (lin.residual(z) < RESIDUAL_TOL).then_some(z)
}

/// Zero count inside a small circle around `z`.
fn local_multiplicity(lin: &LinearizedSystem, z: Complex64, rho: f64) -> u32 {
    let n = 32;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let th = 2.0 * PI * (i as f64 + 0.5) / n as f64;
        let dz = Complex64::from_polar(rho, th);
        match lin.log_derivative(z + dz) {
            Some(tr) => acc += tr * dz,
            None => return 1,
        }
    }
    (acc.re / n as f64).round().max(1.0) as u32
}

fn winding(lin: &LinearizedSystem, a: Complex64, b: Complex64, da: Complex64, db: Complex64, depth: u32) -> f64 {
    let dphi = (db / da).arg();
    if dphi.abs() < PI / 4.0 || depth == 0 {
        return dphi;
    }
    let mid = 0.5 * (a + b);
    let dm = lin.det(mid);
    winding(lin, a, mid, da, dm, depth - 1) + winding(lin, mid, b, dm, db, depth - 1)
}

/// Argument-principle zero count inside the rectangle `[re0, re1] x [-im1, im1]`.
fn boundary_count(lin: &LinearizedSystem, re: (f64, f64), im1: f64) -> Option<u32> {
    let corners = [
        Complex64::new(re.0, -im1),
        Complex64::new(re.1, -im1),
        Complex64::new(re.1, im1),
        Complex64::new(re.0, im1),
    ];
    let per_side = 400;
    let mut total = 0.0;
    for s in 0..4 {
        let (p, q) = (corners[s], corners[(s + 1) % 4]);
        let mut prev = p;
        let mut dprev = lin.det(p);
        for i in 1..=per_side {
            let cur = p + (q - p) * (i as f64 / per_side as f64);
            let dcur = lin.det(cur);
            if dcur.norm() == 0.0 || !dcur.re.is_finite() {
                return None;
            }
            total += winding(lin, prev, cur, dprev, dcur, 24);
            prev = cur;
            dprev = dcur;
        }
    }
    let n = total / (2.0 * PI);
    ((n - n.round()).abs() < 0.05 && n > -0.5).then(|| n.round() as u32)
}

fn push_root(out: &mut Vec<CharacteristicRoot>, lin: &LinearizedSystem, z: Complex64, multiplicity: u32) {
    out.push(CharacteristicRoot {
        zeta: z,
        branch: 0,
        family: RootFamily::Numeric,
        residual: lin.residual(z),
        multiplicity,
    });
}

/// Roots of the characteristic determinant found by Newton from the seed grid; the grid is
/// doubled (twice at most) while the argument-principle count exceeds the harvest.
pub fn characteristic_roots(lin: &LinearizedSystem, search: &RootSearch) -> RootReport {
    let mut report = harvest(lin, search);
    let mut s = search.clone();
    for _ in 0..2 {
        match report.boundary_count {
            Some(c) if c > report.harvested_in_box => {
                s.grid = (2 * s.grid.0, 2 * s.grid.1);
                s.extra_seeds = report.roots.iter().map(|r| r.zeta).filter(|z| z.im >= 0.0).collect();
                report = harvest(lin, &s);
            }
            _ => break,
        }
    }
    report
}

fn harvest(lin: &LinearizedSystem, search: &RootSearch) -> RootReport {
    let mut roots: Vec<CharacteristicRoot> = Vec::new();
    let in_box = |z: Complex64| {
        z.re > search.re.0 && z.re < search.re.1 && z.im.abs() < search.im.1
    };
    if lin.delayed.is_empty() && search.eigen_fast_path {
        let mut eig: Vec<Complex64> = lin.a0.clone().complex_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let mut grouped: Vec<(Complex64, u32)> = Vec::new();
        for z in eig {
            let z = if z.im.abs() < 1e-12 { Complex64::new(z.re, 0.0) } else { z };
            match grouped.iter_mut().find(|(y, _)| (y - z).norm() < 1e-6 * z.norm().max(1.0)) {
                Some(g) => g.1 += 1,
                None => grouped.push((z, 1)),
            }
        }
        for (z, m) in grouped {
            push_root(&mut roots, lin, z, m);
        }
        let harvested = roots.iter().filter(|r| in_box(r.zeta)).map(|r| r.multiplicity).sum();
        return RootReport { roots, boundary_count: None, harvested_in_box: harvested, complete: true, warning: None };
    }

    let (nr, ni) = search.grid;
    let mut seeds: Vec<Complex64> = Vec::with_capacity(nr * ni + search.extra_seeds.len());
    seeds.extend(search.extra_seeds.iter().map(|z| Complex64::new(z.re, z.im.abs())));
    for i in 0..nr {
        for j in 0..ni {
            let re = search.re.0 + (search.re.1 - search.re.0) * (i as f64 + 0.5) / nr as f64;
            let im = search.im.0 + (search.im.1 - search.im.0) * (j as f64 + 0.5) / ni as f64;
            seeds.push(Complex64::new(re, im));
        }
    }
    let raw: Vec<Option<Complex64>> = seeds.par_iter().map(|&s| newton(lin, s, 1.0)).collect();

    // Coarse merge, then polish with the local multiplicity, then fine merge.
    let mut coarse: Vec<Complex64> = Vec::new();
    for z in raw.into_iter().flatten() {
        let z = Complex64::new(z.re, z.im.abs());
        if !coarse.iter().any(|y| (y - z).norm() < 1e-6 * z.norm().max(1.0)) {
            coarse.push(z);
        }
    }
    let polished: Vec<(Complex64, u32, f64)> = coarse
        .par_iter()
        .filter_map(|&z| {
            let rho = 1e-4 * z.norm().max(1.0);
            let m = local_multiplicity(lin, z, rho);
            let z = if m > 1 { newton(lin, z, m as f64).unwrap_or(z) } else { z };
            let z = if z.im.abs() < 1e-10 { Complex64::new(z.re, 0.0) } else { z };
            let res = lin.residual(z);
            (res < RESIDUAL_TOL).then_some((z, m, res))
        })
        .collect();
    let mut unique: Vec<(Complex64, u32, f64)> = Vec::new();
    for (z, m, res) in polished {
        match unique.iter_mut().find(|(y, _, _)| (y - z).norm() < DEDUP_TOL * z.norm().max(1.0)) {
            Some(u) if res < u.2 => *u = (z, m, res),
            Some(_) => {}
            None => unique.push((z, m, res)),
        }
    }
    for (z, m, _) in unique {
        push_root(&mut roots, lin, z, m);
        if z.im > 0.0 {
            push_root(&mut roots, lin, z.conj(), m);
        }
    }
    roots.sort_by(|a, b| b.zeta.re.total_cmp(&a.zeta.re).then(b.zeta.im.total_cmp(&a.zeta.im)));

    let harvested: u32 = roots.iter().filter(|r| in_box(r.zeta)).map(|r| r.multiplicity).sum();
    let mut report = RootReport { roots, boundary_count: None, harvested_in_box: harvested, complete: true, warning: None };
    if search.count_check {
        match boundary_count(lin, search.re, search.im.1) {
            Some(c) => {
                report.boundary_count = Some(c);
                if c != harvested {
                    report.complete = false;
                    report.warning = Some(format!("argument principle counts {c} roots, Newton harvested {harvested}"));
                }
            }
            None => {
                report.complete = false;
                report.warning = Some("argument-principle count failed (root on the boundary?)".into());
            }
        }
    }
    report
}

/// Linearizes at `state` and returns the characteristic roots.
pub fn dde_linearize_and_roots(
    model: &FinitePopulationModel,
    specs: &[SigmoidSpec],
    state: &[f64],
    search: &RootSearch,
) -> Result<RootReport> {
    let lin = linearize(model, specs, state)?;
    Ok(characteristic_roots(&lin, search))
}

/// Change in the number of unstable roots between consecutive sweep values, located by bisection.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepCrossing {
    pub tau: f64,
    /// `|Im|` of the root nearest the imaginary axis at `tau`.
    pub omega: f64,
    pub unstable_before: u32,
    pub unstable_after: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TauSweep {
    pub taus: Vec<f64>,
    pub unstable: Vec<u32>,
    pub rightmost: Vec<f64>,
    pub crossings: Vec<SweepCrossing>,
}

/// Sweeps a delay parameter; `model_at(tau)` builds the model, `state` is the (delay-independent) equilibrium.
pub fn tau_sweep_crossings(
    model_at: impl Fn(f64) -> FinitePopulationModel,
    specs: &[SigmoidSpec],
    state: &[f64],
    taus: &[f64],
    search: &RootSearch,
) -> Result<TauSweep> {
    let mut search = search.clone();
    search.count_check = false;
    let mut seeds: Vec<Complex64> = Vec::new();
    let run = |tau: f64, seeds: &[Complex64]| -> Result<RootReport> {
        let mut s = search.clone();
        s.extra_seeds.extend_from_slice(seeds);
        dde_linearize_and_roots(&model_at(tau), specs, state, &s)
    };
    let mut out = TauSweep { taus: taus.to_vec(), unstable: Vec::new(), rightmost: Vec::new(), crossings: Vec::new() };
    let mut prev: Option<(f64, u32, Vec<Complex64>)> = None;
    for &tau in taus {
        let rep = run(tau, &seeds)?;
        let count = rep.unstable_count();
        let roots: Vec<Complex64> = rep.roots.iter().map(|r| r.zeta).filter(|z| z.im >= 0.0).collect();
        out.unstable.push(count);
        out.rightmost.push(rep.rightmost().map_or(f64::NEG_INFINITY, |z| z.re));
        if let Some((t0, c0, ref r0)) = prev {
            if count != c0 {
                let (mut a, mut b) = (t0, tau);
                let mut near = r0.clone();
                let mut omega = f64::NAN;
                for _ in 0..24 {
                    let mid = 0.5 * (a + b);
                    let rm = run(mid, &near)?;
                    near = rm.roots.iter().map(|r| r.zeta).filter(|z| z.im >= 0.0).collect();
                    if let Some(z) = rm.roots.iter().map(|r| r.zeta).min_by(|x, y| x.re.abs().total_cmp(&y.re.abs())) {
                        omega = z.im.abs();
                    }
                    if rm.unstable_count() == c0 {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                out.crossings.push(SweepCrossing { tau: 0.5 * (a + b), omega, unstable_before: c0, unstable_after: count });
            }
        }
        seeds = roots.iter().copied().filter(|z| z.re > -3.0).collect();
        prev = Some((tau, count, roots));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::symmetric::characteristic_roots_symmetric;

    fn rotation_model(lambda: f64, tau: f64) -> FinitePopulationModel {
        FinitePopulationModel::simple(vec![vec![1.0, -1.0], vec![1.0, 1.0]], vec![0.0, -1.0], lambda, tau)
    }

    #[test]
    fn delay_free_roots_are_eigenvalues() {
        let m = rotation_model(0.5, 0.0);
        let specs = vec![SigmoidSpec::probit(3.0, 0.0); 2];
        let x = [0.0, 0.0, 0.125, 0.125];
        let lin = linearize(&m, &specs, &x).unwrap();
        let fast = characteristic_roots(&lin, &RootSearch::default());
        let slow = characteristic_roots(&lin, &RootSearch { eigen_fast_path: false, ..RootSearch::default() });
        let total = |r: &RootReport| r.roots.iter().map(|x| x.multiplicity).sum::<u32>();
        assert_eq!(total(&fast), 4);
        assert_eq!(total(&slow), 4);
        for r in &fast.roots {
            assert!(slow.roots.iter().any(|s| (s.zeta - r.zeta).norm() < 1e-8), "{:?}", r.zeta);
        }
    }

    #[test]
    fn matches_closed_form_families() {
        let (g, lambda, tau) = (3.0, 0.2, 0.5);
        let m = rotation_model(lambda, tau);
        let specs = vec![SigmoidSpec::probit(g, 0.0); 2];
        let x = [0.0, 0.0, lambda * lambda / 2.0, lambda * lambda / 2.0];
        let rep = dde_linearize_and_roots(&m, &specs, &x, &RootSearch::default()).unwrap();
        assert!(rep.complete, "{:?}", rep.warning);
        let closed = characteristic_roots_symmetric(g, lambda, tau, 8).unwrap();
        let inside: Vec<_> = closed.iter().filter(|r| r.zeta.re > -10.0 && r.zeta.im.abs() < 50.0).collect();
        assert!(!inside.is_empty());
        for r in inside {
            let best = rep.roots.iter().map(|s| (s.zeta - r.zeta).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "{} off by {best}", r.zeta);
        }
        // Variance block contributes a double root at -2.
        assert!(rep.roots.iter().any(|r| (r.zeta + 2.0).norm() < 1e-8 && r.multiplicity == 2));
    }
}
