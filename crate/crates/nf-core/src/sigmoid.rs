//! Sigmoid families and their Gaussian expectation `f(mu, v) = E[S(U)]`,
//! `U ~ N(mu, v)`, together with the partial derivatives in `mu` and `v`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CoreError, Result};

/// Order of the Gauss-Hermite rule used by the quadrature path.
pub const HERMITE_ORDER: usize = 64;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal cumulative distribution.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SigmoidFamily {
    /// `S(x) = Phi(g x + h)`.
    Probit,
    /// Piecewise-linear table `y(x)`, evaluated at `g x + h` and clamped at the ends.
    Table { x: Vec<f64>, y: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmoidSpec {
    pub gain: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(flatten)]
    pub family: SigmoidFamily,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoments {
    pub mu: f64,
    pub v: f64,
}

impl GaussianMoments {
    pub fn new(mu: f64, v: f64) -> Self {
        Self { mu, v }
    }
}

impl SigmoidSpec {
    pub fn probit(gain: f64, offset: f64) -> Self {
        Self { gain, offset, family: SigmoidFamily::Probit }
    }

    pub fn table(gain: f64, offset: f64, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let spec = Self { gain, offset, family: SigmoidFamily::Table { x, y } };
        spec.validate()?;
        Ok(spec)
    }

    /// Tabulates an arbitrary monotone profile on `[lo, hi]` with `n` knots.
    pub fn tabulate(gain: f64, offset: f64, lo: f64, hi: f64, n: usize, profile: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 || hi <= lo {
            return Err(invalid("table", "need at least two knots on a non-empty range"));
        }
        let x: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let y = x.iter().map(|&t| profile(t)).collect();
        Self::table(gain, offset, x, y)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(invalid("gain", format!("must be finite and > 0, got {}", self.gain)));
        }
        if !self.offset.is_finite() {
            return Err(invalid("offset", "must be finite"));
        }
        if let SigmoidFamily::Table { x, y } = &self.family {
            if x.len() < 2 || x.len() != y.len() {
                return Err(invalid("table", "x and y need equal length >= 2"));
            }
            if x.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("table", "x must be strictly increasing"));
            }
            if y.windows(2).any(|w| w[1] < w[0]) {
                return Err(invalid("table", "y must be non-decreasing"));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(invalid("table", "y must be finite"));
            }
        }
        Ok(())
    }

    /// The sigmoid itself, `S(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let a = self.gain * x + self.offset;
        match &self.family {
            SigmoidFamily::Probit => normal_cdf(a),
            SigmoidFamily::Table { x: xs, y: ys } => table_value(xs, ys, a),
        }
    }

    /// `S'(x)`.
    pub fn slope(&self, x: f64) -> f64 {
        let a = self.gain * x + self.offset;
        match &self.family {
            SigmoidFamily::Probit => self.gain * normal_pdf(a),
            SigmoidFamily::Table { x: xs, y: ys } => self.gain * table_slope(xs, ys, a),
        }
    }

    /// `sup |S'|`.
    pub fn slope_bound(&self) -> f64 {
        match &self.family {
            SigmoidFamily::Probit => self.gain * INV_SQRT_2PI,
            SigmoidFamily::Table { x, y } => {
                let m = x
                    .windows(2)
                    .zip(y.windows(2))
                    .map(|(a, b)| (b[1] - b[0]) / (a[1] - a[0]))
                    .fold(0.0, f64::max);
                self.gain * m
            }
        }
    }

    /// `f(mu, v)` without the domain check; tiny negative round-off in `v` is read as zero.
    pub(crate) fn moment(&self, mu: f64, v: f64) -> f64 {
        let v = v.max(0.0);
        match self.family {
            SigmoidFamily::Probit => {
                let g = self.gain;
                normal_cdf((g * mu + self.offset) / (1.0 + g * g * v).sqrt())
            }
            SigmoidFamily::Table { .. } => self.moment_quadrature(mu, v),
        }
    }

    /// `(df/dmu, df/dv)` without the domain check.
    pub(crate) fn moment_grad(&self, mu: f64, v: f64) -> (f64, f64) {
        let v = v.max(0.0);
        match self.family {
            SigmoidFamily::Probit => {
                let g = self.gain;
                let c = g * mu + self.offset;
                let q = 1.0 + g * g * v;
                let z = c / q.sqrt();
                let p = normal_pdf(z);
                (g * p / q.sqrt(), -g * g * c * p / (2.0 * q * q.sqrt()))
            }
            SigmoidFamily::Table { .. } => self.moment_grad_quadrature(mu, v),
        }
    }

    fn moment_quadrature(&self, mu: f64, v: f64) -> f64 {
        let rule = hermite_rule();
        let sd = v.max(0.0).sqrt();
        if let SigmoidFamily::Probit = self.family {
            let b = self.gain * sd;
            if b > 1.0 {
                // Integrate the inner Gaussian exactly: E_Y[Phi((c - Y) / b)].
                let c = self.gain * mu + self.offset;
                return rule.iter().map(|&(z, w)| w * normal_cdf((c - z) / b)).sum();
            }
        }
        rule.iter().map(|&(z, w)| w * self.eval(mu + sd * z)).sum()
    }

    fn moment_grad_quadrature(&self, mu: f64, v: f64) -> (f64, f64) {
        let rule = hermite_rule();
        let v = v.max(0.0);
        let sd = v.sqrt();
        let g = self.gain;
        match &self.family {
            SigmoidFamily::Probit => {
                let b = g * sd;
                let c = g * mu + self.offset;
                if b > 1.0 {
                    let (mut dm, mut dv) = (0.0, 0.0);
                    for &(z, w) in rule {
                        let u = (c - z) / b;
                        let p = normal_pdf(u);
                        dm += w * p;
                        dv += w * p * u;
                    }
                    (dm * g / b, -dv / (2.0 * v))
                } else {
                    // d/dv E[S(mu + sd Z)] = E[S''] / 2 (heat equation), S''(x) = -g^2 a phi(a).
                    let (mut dm, mut dv) = (0.0, 0.0);
                    for &(z, w) in rule {
                        let a = g * (mu + sd * z) + self.offset;
                        let p = normal_pdf(a);
                        dm += w * g * p;
                        dv -= w * 0.5 * g * g * a * p;
                    }
                    (dm, dv)
                }
            }
            SigmoidFamily::Table { .. } => {
                if sd > 0.05 {
                    // Stein's identity on the continuous table instead of its step slope.
                    let (mut dm, mut dv) = (0.0, 0.0);
                    for &(z, w) in rule {
                        let y = self.eval(mu + sd * z);
                        dm += w * y * z;
                        dv += w * y * (z * z - 1.0);
                    }
                    return (dm / sd, dv / (2.0 * v));
                }
                let dm: f64 = rule.iter().map(|&(z, w)| w * self.slope(mu + sd * z)).sum();
                let h = 1e-4;
                let up: f64 = rule.iter().map(|&(z, w)| w * self.slope(mu + h + sd * z)).sum();
                let dn: f64 = rule.iter().map(|&(z, w)| w * self.slope(mu - h + sd * z)).sum();
                (dm, 0.25 * (up - dn) / h)
            }
        }
    }
}

fn table_value(xs: &[f64], ys: &[f64], a: f64) -> f64 {
    let n = xs.len();
    if a <= xs[0] {
        return ys[0];
    }
    if a >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&x| x <= a) - 1;
    let t = (a - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

fn table_slope(xs: &[f64], ys: &[f64], a: f64) -> f64 {
    let n = xs.len();
    if a <= xs[0] || a >= xs[n - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&x| x <= a) - 1;
    (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
}

fn check(m: &GaussianMoments) -> Result<()> {
    if m.v < 0.0 || m.v.is_nan() {
        return Err(CoreError::NegativeVariance(m.v));
    }
    Ok(())
}

/// `f(mu, v) = E[S(U)]` for `U ~ N(mu, v)`: closed form for probit, quadrature for tables.
pub fn gauss_expectation(spec: &SigmoidSpec, m: GaussianMoments) -> Result<f64> {
    check(&m)?;
    Ok(spec.moment(m.mu, m.v))
}

/// `(df/dmu, df/dv)`; analytic for probit (including the `v = 0` limit).
pub fn gauss_expectation_grad(spec: &SigmoidSpec, m: GaussianMoments) -> Result<(f64, f64)> {
    check(&m)?;
    Ok(spec.moment_grad(m.mu, m.v))
}

/// Gauss-Hermite evaluation of `f` for any family; the independent path for probit.
pub fn gauss_expectation_quadrature(spec: &SigmoidSpec, m: GaussianMoments) -> Result<f64> {
    check(&m)?;
    Ok(spec.moment_quadrature(m.mu, m.v))
}

/// Gauss-Hermite evaluation of the gradient for any family.
pub fn gauss_expectation_grad_quadrature(spec: &SigmoidSpec, m: GaussianMoments) -> Result<(f64, f64)> {
    check(&m)?;
    Ok(spec.moment_grad_quadrature(m.mu, m.v))
}

/// Value and slope of `f(., v0)` at the centre `mu = 0` of an unbiased probit.
pub fn f0_values(spec: &SigmoidSpec, v0: f64) -> Result<(f64, f64)> {
    check(&GaussianMoments::new(0.0, v0))?;
    if spec.offset != 0.0 {
        return Err(invalid("offset", "centre values need h = 0"));
    }
    let f0 = spec.moment(0.0, v0);
    let (fp, _) = spec.moment_grad(0.0, v0);
    Ok((f0, fp))
}

/// Probabilists' Gauss-Hermite nodes and weights (weights sum to one).
pub fn hermite_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| build_hermite(HERMITE_ORDER))
}

fn build_hermite(n: usize) -> Vec<(f64, f64)> {
    // Newton on orthonormal physicists' Hermite polynomials, largest root first.
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0_f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let norm = PI.sqrt();
    x.iter().zip(&w).map(|(&xi, &wi)| (xi * SQRT_2, wi / norm)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_integrates_moments() {
        let r = hermite_rule();
        let m0: f64 = r.iter().map(|p| p.1).sum();
        let m2: f64 = r.iter().map(|p| p.1 * p.0 * p.0).sum();
        let m4: f64 = r.iter().map(|p| p.1 * p.0.powi(4)).sum();
        assert!((m0 - 1.0).abs() < 1e-13);
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
    }

    #[test]
    fn centre_and_zero_variance() {
        let s = SigmoidSpec::probit(1.0, 0.0);
        assert_eq!(gauss_expectation(&s, GaussianMoments::new(0.0, 0.0)).unwrap(), 0.5);
        let s = SigmoidSpec::probit(1.7, 0.3);
        let f = gauss_expectation(&s, GaussianMoments::new(0.4, 0.0)).unwrap();
        assert!((f - normal_cdf(1.7 * 0.4 + 0.3)).abs() < 1e-16);
    }

    #[test]
    fn frozen_value_g2() {
        // Phi(2/sqrt 5), frozen from an independent high-precision evaluation.
        let s = SigmoidSpec::probit(2.0, 0.0);
        let f = gauss_expectation(&s, GaussianMoments::new(1.0, 1.0)).unwrap();
        assert!((f - 0.814_453_315_238_651_2).abs() < 1e-14, "{f}");
        let q = gauss_expectation_quadrature(&s, GaussianMoments::new(1.0, 1.0)).unwrap();
        assert!((q - f).abs() < 1e-13);
    }

    #[test]
    fn negative_variance_is_domain_error() {
        let s = SigmoidSpec::probit(1.0, 0.0);
        assert!(matches!(
            gauss_expectation(&s, GaussianMoments::new(0.0, -1.0)),
            Err(CoreError::NegativeVariance(_))
        ));
        assert!(gauss_expectation_grad(&s, GaussianMoments::new(0.0, -1e-3)).is_err());
    }

    #[test]
    fn centre_slope_and_flat_variance_direction() {
        let s = SigmoidSpec::probit(3.0, 0.0);
        let (f0, fp) = f0_values(&s, 0.0).unwrap();
        assert_eq!(f0, 0.5);
        assert!((fp - 1.196_826_841_204_298_4).abs() < 1e-14);
        for v0 in [0.0, 0.3, 4.0] {
            let (dm, dv) = gauss_expectation_grad(&s, GaussianMoments::new(0.0, v0)).unwrap();
            assert!((dm - 3.0 / (2.0 * PI * (1.0 + 9.0 * v0)).sqrt()).abs() < 1e-14);
            assert_eq!(dv, 0.0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = SigmoidSpec::probit(2.0, 0.0);
        let (dm, dv) = gauss_expectation_grad(&s, GaussianMoments::new(1.0, 1.0)).unwrap();
        let h = 1e-6;
        let f = |mu: f64, v: f64| s.moment(mu, v);
        let fdm = (f(1.0 + h, 1.0) - f(1.0 - h, 1.0)) / (2.0 * h);
        let fdv = (f(1.0, 1.0 + h) - f(1.0, 1.0 - h)) / (2.0 * h);
        assert!(((dm - fdm) / dm).abs() < 1e-6);
        assert!(((dv - fdv) / dv).abs() < 1e-6);
    }

    #[test]
    fn zero_variance_slope_is_sigmoid_slope() {
        let s = SigmoidSpec::probit(2.5, -0.4);
        for mu in [-1.0, 0.0, 0.3, 2.0] {
            let (dm, _) = gauss_expectation_grad(&s, GaussianMoments::new(mu, 0.0)).unwrap();
            assert!((dm - s.slope(mu)).abs() < 1e-15);
        }
    }

    #[test]
    fn table_family_tracks_probit() {
        let probit = SigmoidSpec::probit(1.0, 0.0);
        let table = SigmoidSpec::tabulate(1.0, 0.0, -9.0, 9.0, 4001, normal_cdf).unwrap();
        for &(mu, v) in &[(0.0, 0.5), (0.7, 0.1), (-1.2, 2.0)] {
            let a = gauss_expectation(&probit, GaussianMoments::new(mu, v)).unwrap();
            let b = gauss_expectation(&table, GaussianMoments::new(mu, v)).unwrap();
            assert!((a - b).abs() < 1e-5, "{a} {b}");
            let (ga, gb) = (probit.moment_grad(mu, v), table.moment_grad(mu, v));
            assert!((ga.0 - gb.0).abs() < 1e-4, "{mu} {v} {ga:?} {gb:?}");
            assert!((ga.1 - gb.1).abs() < 1e-3);
        }
    }

    #[test]
    fn table_validation() {
        assert!(SigmoidSpec::table(1.0, 0.0, vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(SigmoidSpec::table(1.0, 0.0, vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(SigmoidSpec::probit(0.0, 0.0).validate().is_err());
    }
}
