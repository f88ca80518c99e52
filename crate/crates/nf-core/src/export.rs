//! Plot-data emission: CSV tables, metadata and the compact field dump.

use std::fmt::Write as _;

use crate::dde::MomentTrajectory;
use crate::error::{invalid, CoreError, Result};
use crate::field::FieldTrajectory;
use crate::spectral::{DispersionReport, HopfCurveSet, TuringHopfSet};

pub const FIELD_MAGIC: &[u8; 4] = b"NFLD";
pub const FIELD_VERSION: u32 = 1;
pub const FIELD_HEADER_LEN: usize = 64;

/// FNV-1a over bytes; used to tag outputs with the model they came from.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// `t,mu_1..mu_P,v_1..v_P`, shortest round-trip formatting.
pub fn trajectory_csv(traj: &MomentTrajectory) -> String {
    let p = traj.populations();
    let mut out = String::from("t");
    for a in 1..=p {
        write!(out, ",mu_{a}").unwrap();
    }
    for a in 1..=p {
        write!(out, ",v_{a}").unwrap();
    }
    out.push('\n');
    for (t, y) in traj.times.iter().zip(&traj.states) {
        write!(out, "{t}").unwrap();
        for x in y {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldVariable {
    Mu,
    V,
}

/// Matrix of one variable: rows are record times, columns grid nodes; first column is `t`.
pub fn field_csv(traj: &FieldTrajectory, layer: usize, var: FieldVariable) -> Result<String> {
    if layer >= traj.layers() {
        return Err(invalid("layer", format!("must be < {}", traj.layers())));
    }
    let mut out = String::from("t");
    for r in &traj.grid.nodes {
        write!(out, ",r={r}").unwrap();
    }
    out.push('\n');
    for (k, t) in traj.times.iter().enumerate() {
        write!(out, "{t}").unwrap();
        let row = match var {
            FieldVariable::Mu => traj.mu(k, layer),
            FieldVariable::V => traj.v(k, layer),
        };
        for x in row {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// `key = value` lines describing grid, step and model.
pub fn field_metadata(traj: &FieldTrajectory) -> String {
    let model_hash = fnv1a64(format!("{:?}", traj.model).as_bytes());
    let mut out = String::new();
    writeln!(out, "boundary = \"{:?}\"", traj.grid.boundary).unwrap();
    writeln!(out, "n_nodes = {}", traj.grid.n).unwrap();
    writeln!(out, "layers = {}", traj.layers()).unwrap();
    writeln!(out, "n_times = {}", traj.times.len()).unwrap();
    writeln!(out, "dt = {}", traj.dt).unwrap();
    writeln!(out, "method = \"{}\"", traj.method).unwrap();
    writeln!(out, "model_fnv64 = \"{model_hash:016x}\"").unwrap();
    writeln!(out, "max_spatial_deviation = {:?}", traj.max_spatial_deviation).unwrap();
    out
}

/// Header (64 bytes, little-endian): magic, version u32, n_nodes u64, n_times u64, layers u32,
/// dt f64, t0 f64, zero padding. Body: per record `mu` for every layer then `v`, row-major f64.
pub fn field_binary(traj: &FieldTrajectory) -> Vec<u8> {
    let mut out = Vec::with_capacity(FIELD_HEADER_LEN + traj.states.len() * traj.states[0].len() * 8);
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    out.extend_from_slice(&(traj.grid.n as u64).to_le_bytes());
    out.extend_from_slice(&(traj.times.len() as u64).to_le_bytes());
    out.extend_from_slice(&(traj.layers() as u32).to_le_bytes());
    out.extend_from_slice(&traj.dt.to_le_bytes());
    out.extend_from_slice(&traj.times[0].to_le_bytes());
    out.resize(FIELD_HEADER_LEN, 0);
    for y in &traj.states {
        for x in y {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub n_nodes: usize,
    pub n_times: usize,
    pub layers: usize,
    pub dt: f64,
    pub t0: f64,
    pub data: Vec<f64>,
}

pub fn read_field_binary(bytes: &[u8]) -> Result<FieldDump> {
    let bad = |why: &str| CoreError::Resource(format!("field dump: {why}"));
    if bytes.len() < FIELD_HEADER_LEN || &bytes[..4] != FIELD_MAGIC {
        return Err(bad("missing NFLD header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != FIELD_VERSION {
        return Err(bad("unsupported version"));
    }
    let (n_nodes, n_times, layers) = (u64_at(8) as usize, u64_at(16) as usize, u32_at(24) as usize);
    let (dt, t0) = (f64_at(28), f64_at(36));
    let count = n_nodes * n_times * layers * 2;
    if bytes.len() != FIELD_HEADER_LEN + 8 * count {
        return Err(bad("body length does not match header"));
    }
    let data = bytes[FIELD_HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(FieldDump { n_nodes, n_times, layers, dt, t0, data })
}

/// `param1,param2,omega,branch_k,branch_m,residual,lambda_star` with `param1 = lambda`, `param2 = tau`.
pub fn hopf_curves_csv(set: &HopfCurveSet) -> String {
    let ls = set.lambda_star.map_or(String::from("nan"), |x| x.to_string());
    let mut out = String::from("param1,param2,omega,branch_k,branch_m,residual,lambda_star\n");
    for c in &set.curves {
        for p in &c.points {
            writeln!(out, "{},{},{},{},{},{},{ls}", p.lambda, p.tau, p.omega, p.branch_k, p.m, p.residual).unwrap();
        }
    }
    out
}

/// Same columns with `param1 = tau_d`, `param2 = k`.
pub fn turing_hopf_csv(set: &TuringHopfSet) -> String {
    let mut out = String::from("param1,param2,omega,branch_k,branch_m,residual\n");
    for p in &set.points {
        writeln!(out, "{},{},{},{},{},{}", p.tau_d, p.k, p.omega, p.k, p.m, p.certificate).unwrap();
    }
    out
}

/// `k,re_nu,im_nu,re_a,im_a,re_b,im_b,converged`.
pub fn dispersion_csv(rep: &DispersionReport) -> String {
    let mut out = String::from("k,re_nu,im_nu,re_a,im_a,re_b,im_b,converged\n");
    for m in &rep.modes {
        let nu = m.nu.unwrap_or(num_complex::Complex64::new(f64::NAN, f64::NAN));
        writeln!(out, "{},{},{},{},{},{},{},{}", m.k, nu.re, nu.im, m.a_k.re, m.a_k.im, m.b_k.re, m.b_k.im, m.converged)
            .unwrap();
    }
    out
}

/// Structured text with the convention block.
pub fn dispersion_report_text(rep: &DispersionReport) -> String {
    let mut out = String::new();
    writeln!(out, "[convention]").unwrap();
    writeln!(out, "fourier = \"{}\"", rep.convention.describe()).unwrap();
    writeln!(out, "sigmoid = \"probit: S(x) = Phi(g x + h)\"").unwrap();
    writeln!(out, "[result]").unwrap();
    writeln!(out, "f0 = {}", rep.f0).unwrap();
    writeln!(out, "f0_prime = {}", rep.f0_prime).unwrap();
    writeln!(out, "variance_eigenvalue = {}", rep.variance_eigenvalue).unwrap();
    writeln!(out, "rightmost = [{}, {}]", rep.rightmost.re, rep.rightmost.im).unwrap();
    writeln!(out, "stable = {}", rep.stable).unwrap();
    out
}
