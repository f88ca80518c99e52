//! Characteristic roots, Hopf curves and dispersion relations.

pub mod dde_roots;
pub mod dispersion;
pub mod lambert;
pub mod symmetric;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use dde_roots::{
    characteristic_roots, dde_linearize_and_roots, linearize, tau_sweep_crossings, LinearizedSystem, RootReport,
    RootSearch, SweepCrossing,
};
pub use dispersion::{
    dispersion, kernel_coefficient, kernel_coefficient_quadrature, pitchfork, turing_hopf_curves, DispersionConvention,
    DispersionReport, ModeGrowth, PitchforkReport, TuringHopfPoint, TuringHopfSet,
};
pub use lambert::{lambert_residual, lambert_w, lambert_w_of_exp};
pub use symmetric::{
    characteristic_roots_symmetric, hopf_curves, hopf_omega, hopf_tau, lambda_star, symmetric_tau_crossings,
    HopfCurve, HopfCurveSet, HopfPoint, TauCrossing,
};

/// Which `1 +- i` factor produced a closed-form root; `Numeric` for determinant roots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootFamily {
    Plus,
    Minus,
    Numeric,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharacteristicRoot {
    pub zeta: Complex64,
    pub branch: i32,
    pub family: RootFamily,
    pub residual: f64,
    pub multiplicity: u32,
}
