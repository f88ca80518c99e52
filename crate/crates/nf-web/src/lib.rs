//! Browser bindings: Hopf curves of the rotation pair, one-layer dispersion, one-layer field runs.
//!
//! Each export returns a JSON string; the plain `*_json` functions carry the logic and are
//! usable off the web as well.

use nf_core::field::{integrate_field_with, FieldInit, FieldOptions, Profile, SpatialGrid};
use nf_core::model::{Boundary, DelayLaw, Domain, Drive, KernelNorm, NeuralFieldModel};
use nf_core::sigmoid::SigmoidSpec;
use nf_core::spectral::{dispersion, hopf_curves, DispersionConvention};
use nf_core::CoreError;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Frames kept from a field run, whatever its length.
const MAX_FRAMES: usize = 200;

fn one_layer(noise: f64, weight: f64, width: f64, input: f64, delay: DelayLaw) -> NeuralFieldModel {
    NeuralFieldModel {
        domain: Domain::Circle,
        boundary: Boundary::Periodic,
        widths: vec![width],
        w: vec![vec![weight]],
        sigma: vec![vec![0.0]],
        density: 1.0,
        delay,
        noise: vec![Drive::Const(noise)],
        input: vec![Drive::Const(input)],
        theta: vec![1.0],
        kernel_norm: KernelNorm::PerWidth,
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

pub fn hopf_curves_json(gain: f64, m_max: i32, n_lambda: usize) -> Result<String, CoreError> {
    let set = hopf_curves(gain, 0..=m_max, n_lambda)?;
    Ok(to_json(&set))
}

#[derive(Serialize)]
struct DispersionView {
    v0: f64,
    stable: bool,
    rightmost: [f64; 2],
    /// `[k, re nu, im nu]` for every converged mode.
    modes: Vec<[f64; 3]>,
}

/// Periodic one-layer ring at its stationary variance; `speed <= 0` means instantaneous transport.
pub fn dispersion_json(
    gain: f64,
    noise: f64,
    weight: f64,
    width: f64,
    synaptic_delay: f64,
    speed: f64,
    n_modes: u32,
) -> Result<String, CoreError> {
    let delay = DelayLaw { speed: (speed > 0.0).then_some(speed), synaptic: synaptic_delay };
    let model = one_layer(noise, weight, width, 0.0, delay);
    model.validate()?;
    let v0 = noise * noise / 2.0;
    let rep = dispersion(&model, &SigmoidSpec::probit(gain, 0.0), v0, n_modes, DispersionConvention::Circular, &[])?;
    let modes = rep.modes.iter().filter_map(|m| m.nu.map(|nu| [m.k as f64, nu.re, nu.im])).collect();
    Ok(to_json(&DispersionView { v0, stable: rep.stable, rightmost: [rep.rightmost.re, rep.rightmost.im], modes }))
}

#[derive(Serialize)]
struct FieldView {
    nodes: Vec<f64>,
    times: Vec<f64>,
    mu: Vec<Vec<f64>>,
}

/// One-layer ring from a named initial profile (`ic1`, `ic2`, or a constant for anything else).
#[allow(clippy::too_many_arguments)]
pub fn one_layer_field_json(
    gain: f64,
    noise: f64,
    weight: f64,
    width: f64,
    input: f64,
    profile: &str,
    t_end: f64,
    n: usize,
) -> Result<String, CoreError> {
    let model = one_layer(noise, weight, width, input, DelayLaw::default());
    let grid = SpatialGrid::for_model(&model, n)?;
    let mu = match profile {
        "ic1" => Profile::Ic1,
        "ic2" => Profile::Ic2,
        _ => Profile::Constant { value: 0.0 },
    };
    let init = FieldInit { mu: vec![mu], v: vec![noise * noise / 2.0] };
    let dt = 0.01;
    let steps = (t_end / dt).round().max(1.0) as usize;
    let opts = FieldOptions { record_every: steps.div_ceil(MAX_FRAMES).max(1) };
    let spec = SigmoidSpec::probit(gain, 0.0);
    let tr = integrate_field_with(&model, &[spec], &grid, &init.history(&grid, 0.0), t_end, dt, opts)?;
    let mu = tr.states.iter().map(|s| s[..grid.n].to_vec()).collect();
    Ok(to_json(&FieldView { nodes: grid.nodes.clone(), times: tr.times.clone(), mu }))
}

fn js(e: CoreError) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen(js_name = hopfCurves)]
pub fn hopf_curves_js(gain: f64, m_max: i32, n_lambda: usize) -> Result<String, JsValue> {
    hopf_curves_json(gain, m_max, n_lambda).map_err(js)
}

#[wasm_bindgen(js_name = dispersion)]
pub fn dispersion_js(
    gain: f64,
    noise: f64,
    weight: f64,
    width: f64,
    synaptic_delay: f64,
    speed: f64,
    n_modes: u32,
) -> Result<String, JsValue> {
    dispersion_json(gain, noise, weight, width, synaptic_delay, speed, n_modes).map_err(js)
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = oneLayerField)]
pub fn one_layer_field_js(
    gain: f64,
    noise: f64,
    weight: f64,
    width: f64,
    input: f64,
    profile: &str,
    t_end: f64,
    n: usize,
) -> Result<String, JsValue> {
    one_layer_field_json(gain, noise, weight, width, input, profile, t_end, n).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn hopf_payload_carries_the_threshold() {
        let v: Value = serde_json::from_str(&hopf_curves_json(3.0, 1, 20).unwrap()).unwrap();
        let ls = v["lambda_star"].as_f64().unwrap();
        assert!((ls - 0.6437371747424248).abs() < 1e-12);
        // Minus family at m = 0 has no positive delay.
        assert_eq!(v["curves"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn dispersion_payload_lists_modes() {
        let v: Value = serde_json::from_str(&dispersion_json(3.0, 0.5, -2.0, 0.05, 0.1, 0.0, 4).unwrap()).unwrap();
        assert_eq!(v["modes"].as_array().unwrap().len(), 9);
        assert!(v["stable"].is_boolean());
    }

    #[test]
    fn field_payload_is_frame_limited() {
        let text = one_layer_field_json(3.0, 0.5, -2.0, 0.05, 0.0, "ic1", 5.0, 128).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        let frames = v["mu"].as_array().unwrap();
        assert!(frames.len() <= MAX_FRAMES + 1);
        assert_eq!(frames[0].as_array().unwrap().len(), 128);
        assert_eq!(v["times"].as_array().unwrap().len(), frames.len());
    }

    #[test]
    fn bad_width_is_reported() {
        assert!(dispersion_json(3.0, 0.5, -2.0, -1.0, 0.0, 0.0, 4).is_err());
    }
}
