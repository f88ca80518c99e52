//! Complex Lambert W on every branch.

use std::f64::consts::{E, PI};

use num_complex::Complex64;

use crate::error::{CoreError, Result};

const MAX_ITER: usize = 100;
/// Above this `Re log z` the log-domain iteration replaces Halley on `z`.
const LOG_DIRECT_LIMIT: f64 = 40.0;

/// `w` with `w e^w = z` on branch `k` (counterclockwise indexing, principal branch `k = 0`).
pub fn lambert_w(k: i32, z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(CoreError::NoConvergence(format!("lambert_w: non-finite argument {z}")));
    }
    if z == Complex64::new(0.0, 0.0) {
        return if k == 0 {
            Ok(z)
        } else {
            Err(CoreError::NoConvergence(format!("lambert_w: branch {k} is singular at 0")))
        };
    }
    let mut last = None;
    for seed in seeds(k, z) {
        match halley(z, seed) {
            Some(w) if on_branch(k, z, w) => return Ok(w),
            Some(w) => last = Some(w),
            None => {}
        }
    }
    Err(CoreError::NoConvergence(format!(
        "lambert_w: branch {k} at z = {z} did not certify (last iterate {last:?})"
    )))
}

/// `W_k(e^log_z)` without forming `e^log_z`, for arguments too large to represent or iterate on.
pub fn lambert_w_of_exp(k: i32, log_z: Complex64) -> Result<Complex64> {
    if log_z.re < LOG_DIRECT_LIMIT {
        return lambert_w(k, log_z.exp());
    }
    // Far from the origin every branch satisfies w + Log w = log z + 2 pi i k.
    let target = log_z + Complex64::new(0.0, 2.0 * PI * k as f64);
    let mut w = target - target.ln();
    for _ in 0..MAX_ITER {
        let step = (w + w.ln() - target) / (1.0 + 1.0 / w);
        w -= step;
        if step.norm() <= 4.0 * f64::EPSILON * w.norm() {
            let r = (w + w.ln() - target).norm() / target.norm();
            if r <= 1e-13 {
                return Ok(w);
            }
        }
    }
    Err(CoreError::NoConvergence(format!("lambert_w: branch {k} at log z = {log_z} did not converge")))
}

/// Relative residual `|w e^w - z| / |z|` (absolute when `z = 0`).
pub fn lambert_residual(w: Complex64, z: Complex64) -> f64 {
    let r = (w * w.exp() - z).norm();
    if z.norm() > 0.0 {
        r / z.norm()
    } else {
        r
    }
}

fn seeds(k: i32, z: Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(4);
    let near_branch_point = (z + 1.0 / E).norm() < 0.3;
    if near_branch_point && (k == 0 || (k == -1 && z.im >= 0.0) || (k == 1 && z.im < 0.0)) {
        let p = (2.0 * (E * z + 1.0)).sqrt();
        let p = if k == 0 { p } else { -p };
        out.push(-1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p);
    }
    if k == 0 && z.norm() < 1.5 {
        out.push((1.0 + z).ln());
    }
    let l1 = z.ln() + Complex64::new(0.0, 2.0 * PI * k as f64);
    if l1.norm() > 0.0 {
        let l2 = l1.ln();
        out.push(l1 - l2 + l2 / l1);
    }
    if k == 0 {
        out.push(z);
        out.push(Complex64::new(0.0, 0.0));
    }
    out
}

fn halley(z: Complex64, mut w: Complex64) -> Option<Complex64> {
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if !denom.re.is_finite() || denom.norm() == 0.0 {
            return None;
        }
        let step = f / denom;
        w -= step;
        if !(w.re.is_finite() && w.im.is_finite()) {
            return None;
        }
        if step.norm() <= 4.0 * f64::EPSILON * w.norm().max(1e-300) {
            break;
        }
    }
    (lambert_residual(w, z) <= 1e-12).then_some(w)
}

/// Branch test through the unwinding number of `w + Log w - Log z`.
fn on_branch(k: i32, z: Complex64, w: Complex64) -> bool {
    // W_0 and W_{-1} are both real on (-1/e, 0) with unwinding number 0; split them by Re w.
    if z.im == 0.0 && z.re < 0.0 && z.re >= -1.0 / E && w.im.abs() < 1e-12 {
        return (k == 0 && w.re >= -1.0) || (k == -1 && w.re <= -1.0);
    }
    ((w + w.ln() - z.ln()).im / (2.0 * PI)).round() as i32 == k
}
