//! WebAssembly bindings for the browser demo. Every export returns a JSON
//! string; the `*_json` functions hold the logic so they can be tested natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use sticky_lab::chain::{
    group_states, transition_matrix, zero_count_distribution, SamplingMethod, WalkParams, WalkSampler,
    ZeroCountDistribution,
};
use sticky_lab::numerics::{parse_rational, rat, to_f64};
use sticky_lab::spectral::{spectrum, verify_expander};
use sticky_lab::tvd::{envelope_bound, tvd_exact};

/// Keeps a browser tab responsive.
pub const MAX_N: usize = 400;
pub const MAX_SAMPLES: u32 = 200_000;
pub const MAX_P: usize = 64;

fn params(p: usize, n: usize, bias: &str, kind: &str) -> Result<WalkParams, String> {
    if n > MAX_N || p > MAX_P {
        return Err(format!("demo limits are p <= {MAX_P} and n <= {MAX_N}"));
    }
    let value = parse_rational(bias).map_err(|e| e.to_string())?;
    let built = match kind {
        "delta" => WalkParams::from_mixture(p, n, value),
        "lambda" => WalkParams::from_lambda(p, n, value),
        other => return Err(format!("unknown bias kind {other:?}")),
    };
    built.map_err(|e| e.to_string())
}

/// Exact zero-count law, the uniform reference and a seeded sample histogram.
pub fn zero_count_chart_json(
    p: usize,
    n: usize,
    bias: &str,
    kind: &str,
    samples: u32,
    seed: u64,
) -> Result<String, String> {
    let w = params(p, n, bias, kind)?;
    let exact = zero_count_distribution(&w).map_err(|e| e.to_string())?;
    let uniform = ZeroCountDistribution::uniform(n, p);
    let samples = samples.min(MAX_SAMPLES);
    let hist = WalkSampler::new(&w, seed, SamplingMethod::Direct).zero_count_histogram(samples.into());
    let tvd = tvd_exact(&w).map_err(|e| e.to_string())?;
    let out = json!({
        "params": w,
        "exact": exact.probs().iter().map(to_f64).collect::<Vec<_>>(),
        "uniform": uniform.probs().iter().map(to_f64).collect::<Vec<_>>(),
        "sampled": hist.iter().map(|&c| if samples == 0 { 0.0 } else { c as f64 / f64::from(samples) }).collect::<Vec<_>>(),
        "samples": samples,
        "tvd": to_f64(&tvd),
        "tvd_exact": tvd.to_string(),
    });
    Ok(out.to_string())
}

/// Exact tvd on `steps + 1` evenly spaced values of `lambda` in
/// `[0, 1/p)`, alongside the geometric envelope where it converges.
pub fn tvd_curve_json(p: usize, n: usize, steps: usize) -> Result<String, String> {
    if !(1..=200).contains(&steps) {
        return Err("steps must be in 1..=200".into());
    }
    let mut points: Vec<Value> = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let lambda = rat(i as i64, (p * (steps + 1)) as i64);
        let w = params(p, n, &lambda.to_string(), "lambda")?;
        let tvd = to_f64(&tvd_exact(&w).map_err(|e| e.to_string())?);
        let lambda_f = to_f64(&lambda);
        points.push(json!({
            "lambda": lambda_f,
            "delta": to_f64(w.delta()),
            "tvd": tvd,
            "envelope": envelope_bound(lambda_f).ok(),
        }));
    }
    Ok(json!({ "p": p, "n": n, "points": points }).to_string())
}

/// Spectrum of the transition matrix and, when `k` divides `p`, of the chain
/// obtained by merging states into `k` equal blocks.
pub fn spectrum_json(p: usize, bias: &str, kind: &str, k: usize) -> Result<String, String> {
    let w = params(p, 1, bias, kind)?;
    let report = verify_expander(&w).map_err(|e| e.to_string())?;
    let matrix = transition_matrix(&w);
    let grouped = if k >= 2 && p.is_multiple_of(k) {
        let g = group_states(&w, k).map_err(|e| e.to_string())?;
        let s = spectrum(&g.grouped).map_err(|e| e.to_string())?;
        Some(json!({
            "k": k,
            "matrix": g.grouped.to_f64(),
            "eigenvalues": s.eigenvalues,
            "effective": g.effective,
        }))
    } else {
        None
    };
    let out = json!({
        "params": w,
        "matrix": matrix.to_f64(),
        "eigenvalues": report.eigenvalues,
        "second_largest_magnitude": report.second_largest_magnitude,
        "grouped": grouped,
    });
    Ok(out.to_string())
}

#[wasm_bindgen]
pub fn zero_count_chart(
    p: usize,
    n: usize,
    bias: &str,
    kind: &str,
    samples: u32,
    seed: u32,
) -> Result<String, JsValue> {
    zero_count_chart_json(p, n, bias, kind, samples, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn tvd_curve(p: usize, n: usize, steps: usize) -> Result<String, JsValue> {
    tvd_curve_json(p, n, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn spectrum_view(p: usize, bias: &str, kind: &str, k: usize) -> Result<String, JsValue> {
    spectrum_json(p, bias, kind, k).map_err(|e| JsValue::from_str(&e))
}
