//! Closed-form characteristic roots and Hopf curves for the rotation-coupled
//! pair `J = [[1, -1], [1, 1]]`, `I = (0, -1)`, `sigma = 0`, `theta = 1`, linearized
//! at `mu = 0`, `v = lambda^2 / 2`.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lambert::lambert_w_of_exp;
use super::{CharacteristicRoot, RootFamily};
use crate::error::{invalid, Result};

/// Linear gain `g / sqrt(2 pi (1 + g^2 lambda^2 / 2))` of the rate at the symmetric equilibrium.
pub fn symmetric_gain(g: f64, lambda: f64) -> f64 {
    g / (2.0 * PI * (1.0 + g * g * lambda * lambda / 2.0)).sqrt()
}

/// Squared noise threshold `2 (1/pi - 1/g^2)`; negative when no Hopf point exists.
pub fn lambda_star_sq(g: f64) -> f64 {
    2.0 * (1.0 / PI - 1.0 / (g * g))
}

pub fn lambda_star(g: f64) -> Option<f64> {
    let l2 = lambda_star_sq(g);
    (l2 > 0.0).then(|| l2.sqrt())
}

/// Crossing frequency at noise `lambda`; `None` above the threshold.
pub fn hopf_omega(g: f64, lambda: f64) -> Option<f64> {
    let num = -PI + g * g * (1.0 - PI * lambda * lambda / 2.0);
    let den = PI * (1.0 + g * g * lambda * lambda / 2.0);
    (num > 0.0).then(|| (num / den).sqrt())
}

/// Residual of `-(zeta + 1) + c e^{-zeta tau} (1 +- i)`.
pub fn symmetric_residual(g: f64, lambda: f64, tau: f64, family: RootFamily, zeta: Complex64) -> f64 {
    let c = symmetric_gain(g, lambda);
    let rot = match family {
        RootFamily::Minus => Complex64::new(1.0, -1.0),
        _ => Complex64::new(1.0, 1.0),
    };
    (-(zeta + 1.0) + c * (-zeta * tau).exp() * rot).norm()
}

fn family_root(c: f64, tau: f64, family: RootFamily, k: i32) -> Result<Complex64> {
    let rot = match family {
        RootFamily::Minus => Complex64::new(1.0, -1.0),
        _ => Complex64::new(1.0, 1.0),
    };
    let log_z = (c * tau * rot).ln() + tau;
    Ok(-1.0 + lambert_w_of_exp(k, log_z)? / tau)
}

/// Roots `zeta = -1 + W_k(c tau e^tau (1 +- i)) / tau` for `|k| <= n_branches`, descending real part.
pub fn characteristic_roots_symmetric(g: f64, lambda: f64, tau: f64, n_branches: u32) -> Result<Vec<CharacteristicRoot>> {
    if !(g > 0.0) {
        return Err(invalid("g", "must be > 0"));
    }
    if !(lambda >= 0.0) {
        return Err(invalid("lambda", "must be >= 0"));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid("tau", "must be > 0"));
    }
    let c = symmetric_gain(g, lambda);
    let n = n_branches as i32;
    let mut out = Vec::with_capacity(2 * (2 * n as usize + 1));
    for family in [RootFamily::Plus, RootFamily::Minus] {
        for k in -n..=n {
            let zeta = family_root(c, tau, family, k)?;
            out.push(CharacteristicRoot {
                zeta,
                branch: k,
                family,
                residual: symmetric_residual(g, lambda, tau, family, zeta),
                multiplicity: 1,
            });
        }
    }
    out.sort_by(|a, b| b.zeta.re.total_cmp(&a.zeta.re));
    Ok(out)
}

/// Largest real part over the closed-form families.
pub fn rightmost_symmetric(g: f64, lambda: f64, tau: f64, n_branches: u32) -> Result<f64> {
    Ok(characteristic_roots_symmetric(g, lambda, tau, n_branches)?[0].zeta.re)
}

/// Delay of the `m`-th crossing on the `+` or `-` arctan branch; `None` if not positive.
pub fn hopf_tau(omega: f64, family: RootFamily, m: i32) -> Option<f64> {
    let shift = match family {
        RootFamily::Minus => -FRAC_PI_4,
        _ => FRAC_PI_4,
    };
    let tau = (shift - omega.atan() + 2.0 * PI * m as f64) / omega;
    (tau > 0.0).then_some(tau)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HopfPoint {
    pub lambda: f64,
    pub tau: f64,
    pub omega: f64,
    pub family: RootFamily,
    /// Arctan branch index.
    pub m: i32,
    /// Lambert branch of the root that sits on the imaginary axis.
    pub branch_k: i32,
    /// Real part of that root (certificate).
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HopfCurve {
    pub family: RootFamily,
    pub m: i32,
    pub points: Vec<HopfPoint>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HopfCurveSet {
    pub g: f64,
    pub lambda_star: Option<f64>,
    pub curves: Vec<HopfCurve>,
    pub status: String,
}

/// Tolerance on the real part of a certified crossing root.
pub const HOPF_CERT_TOL: f64 = 1e-6;

/// Finds the family root closest to `i omega` at `(lambda, tau)`; returns `(branch, zeta)`.
pub fn crossing_root(g: f64, lambda: f64, tau: f64, omega: f64, family: RootFamily) -> Result<(i32, Complex64)> {
    let c = symmetric_gain(g, lambda);
    let target = Complex64::new(0.0, omega);
    // Imaginary parts of the family grow by about 2 pi / tau per branch.
    let k0 = ((omega * tau) / (2.0 * PI)).round() as i32;
    let mut best = (k0, Complex64::new(f64::INFINITY, 0.0));
    for k in (k0 - 3)..=(k0 + 3) {
        let z = family_root(c, tau, family, k)?;
        if (z - target).norm() < (best.1 - target).norm() {
            best = (k, z);
        }
    }
    Ok(best)
}

/// Hopf delay curves sampled at `n_lambda` noise levels on `[0, lambda*)`, each point certified.
pub fn hopf_curves(g: f64, m_range: std::ops::RangeInclusive<i32>, n_lambda: usize) -> Result<HopfCurveSet> {
    if !(g > 0.0) {
        return Err(invalid("g", "must be > 0"));
    }
    let Some(ls) = lambda_star(g) else {
        return Ok(HopfCurveSet {
            g,
            lambda_star: None,
            curves: Vec::new(),
            status: format!("no Hopf point: g = {g} <= sqrt(pi)"),
        });
    };
    let mut curves = Vec::new();
    let mut failures = 0usize;
    for family in [RootFamily::Plus, RootFamily::Minus] {
        for m in m_range.clone() {
            let mut points = Vec::new();
            for i in 0..n_lambda {
                let lambda = ls * i as f64 / n_lambda as f64;
                let Some(omega) = hopf_omega(g, lambda) else { continue };
                let Some(tau) = hopf_tau(omega, family, m) else { continue };
                let (branch_k, zeta) = crossing_root(g, lambda, tau, omega, family)?;
                let ok = zeta.re.abs() < HOPF_CERT_TOL && (zeta.im - omega).abs() < HOPF_CERT_TOL;
                if ok {
                    points.push(HopfPoint { lambda, tau, omega, family, m, branch_k, residual: zeta.re.abs() });
                } else {
                    failures += 1;
                }
            }
            if !points.is_empty() {
                curves.push(HopfCurve { family, m, points });
            }
        }
    }
    let status = if failures == 0 {
        "ok".to_string()
    } else {
        format!("{failures} samples failed certification")
    };
    Ok(HopfCurveSet { g, lambda_star: Some(ls), curves, status })
}

/// A real part sign change of one tracked root along a delay sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TauCrossing {
    pub tau: f64,
    pub omega: f64,
    pub family: RootFamily,
    pub branch_k: i32,
    /// `true` when the root moves into the right half plane as tau increases.
    pub destabilizing: bool,
}

/// Sign changes of `Re zeta_k(tau)` for each family root on the grid `taus`, refined by bisection.
pub fn symmetric_tau_crossings(g: f64, lambda: f64, taus: &[f64], n_branches: u32) -> Result<Vec<TauCrossing>> {
    let c = symmetric_gain(g, lambda);
    let n = n_branches as i32;
    let mut out = Vec::new();
    for family in [RootFamily::Plus, RootFamily::Minus] {
        for k in -n..=n {
            let re = |tau: f64| family_root(c, tau, family, k).map(|z| z.re);
            let mut prev: Option<(f64, f64)> = None;
            for &tau in taus {
                let r = re(tau)?;
                if let Some((t0, r0)) = prev {
                    if (r0 < 0.0) != (r < 0.0) {
                        let (mut a, mut b) = (t0, tau);
                        let sa = r0 < 0.0;
                        for _ in 0..60 {
                            let mid = 0.5 * (a + b);
                            if (re(mid)? < 0.0) == sa {
                                a = mid;
                            } else {
                                b = mid;
                            }
                        }
                        let tc = 0.5 * (a + b);
                        let z = family_root(c, tc, family, k)?;
                        out.push(TauCrossing { tau: tc, omega: z.im, family, branch_k: k, destabilizing: sa });
                    }
                }
                prev = Some((tau, r));
            }
        }
    }
    out.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(out)
}
