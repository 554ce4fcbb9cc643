//! Browser bindings for three operations from `emodist`: divergence between
//! two distributions, temperature scaling, and isotonic map fitting.
//!
//! Distributions arrive as non-negative weights and are normalised here, so
//! the page can pass slider values straight through. The logic lives in
//! [`ops`] so it can be tested natively; the exported functions only convert
//! errors.

use wasm_bindgen::prelude::*;

pub mod ops;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// `[jsd, kld, wasserstein, human entropy, model entropy]`.
#[wasm_bindgen]
pub fn divergences(human: &[f64], model: &[f64]) -> Result<Vec<f64>, JsError> {
    ops::divergences(human, model).map(|d| d.to_vec()).map_err(js)
}

#[wasm_bindgen(js_name = applyTemperature)]
pub fn apply_temperature(model: &[f64], t: f64) -> Result<Vec<f64>, JsError> {
    ops::apply_temperature(model, t).map_err(js)
}

/// JSD to `human` after scaling `model` by each temperature in `temps`.
#[wasm_bindgen(js_name = temperatureCurve)]
pub fn temperature_curve(human: &[f64], model: &[f64], temps: &[f64]) -> Result<Vec<f64>, JsError> {
    ops::temperature_curve(human, model, temps).map_err(js)
}

#[wasm_bindgen(js_name = bestTemperature)]
pub fn best_temperature(human: &[f64], model: &[f64]) -> Result<f64, JsError> {
    ops::best_temperature(human, model).map_err(js)
}

/// Knots as `[x0, y0, x1, y1, ...]`; empty when fewer than two distinct x.
#[wasm_bindgen(js_name = fitIsotonic)]
pub fn fit_isotonic(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>, JsError> {
    ops::fit_isotonic(xs, ys).map_err(js)
}

#[wasm_bindgen(js_name = evalIsotonic)]
pub fn eval_isotonic(knots: &[f64], x: f64) -> Result<f64, JsError> {
    ops::eval_isotonic(knots, x).map_err(js)
}
