//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every export takes plain strings and numbers and returns a JSON (or CSV)
//! string; errors surface as JS exceptions carrying the library message.
//! The `*_json` functions hold the logic so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use softpulse::bathframe::{self, FieldAxis};
use softpulse::sequences::{classify_order, ClassifyOptions, IntervalCache};
use softpulse::{parse_sequence, pulseshape, ChainModel, Parity, PulseShape};

/// Browser budget: classification integrates every cluster, so the demo caps
/// the chain work well below the CLI defaults.
pub const MAX_DEMO_K: usize = 4;
pub const MAX_DEMO_LENGTH: usize = 8;
const DEMO_STEPS: usize = 800;

fn resolve(shape: &str) -> Result<PulseShape, String> {
    let s = shape.trim();
    if s.starts_with('{') {
        PulseShape::from_json(s).map_err(|e| e.to_string())
    } else {
        pulseshape::builtin(s).map_err(|e| e.to_string())
    }
}

#[derive(Serialize)]
struct Curve {
    name: String,
    claimed_k: usize,
    angle_over_pi: f64,
    t: Vec<f64>,
    v: Vec<f64>,
    /// Accumulated rotation angle over π.
    theta: Vec<f64>,
    smoothness: Vec<f64>,
}

pub fn shape_curve_json(shape: &str, samples: usize) -> Result<String, String> {
    if !(2..=10_000).contains(&samples) {
        return Err("samples must be in 2..=10000".into());
    }
    let p = resolve(shape)?;
    let t: Vec<f64> = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
    let curve = Curve {
        name: p.name.clone(),
        claimed_k: p.claimed_k,
        angle_over_pi: p.rotation_angle() / std::f64::consts::PI,
        v: t.iter().map(|&x| p.value(x)).collect(),
        theta: t.iter().map(|&x| p.angle_at(x) / std::f64::consts::PI).collect(),
        smoothness: p.smoothness_residuals(),
        t,
    };
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

pub fn classify_json(sequence: &str, shape: &str, model: &str, k_max: usize) -> Result<String, String> {
    if k_max == 0 || k_max > MAX_DEMO_K {
        return Err(format!("k_max must be in 1..={MAX_DEMO_K} in the browser"));
    }
    let seq = parse_sequence(sequence).map_err(|e| e.to_string())?;
    if seq.len() > MAX_DEMO_LENGTH {
        return Err(format!("at most {MAX_DEMO_LENGTH} intervals in the browser"));
    }
    let shape = resolve(shape)?;
    let model = ChainModel::preset(model).map_err(|e| e.to_string())?;
    let opts = ClassifyOptions { k_max, steps: DEMO_STEPS, ..Default::default() };
    let report = classify_order(&seq, &shape, &model, &opts, &IntervalCache::new()).map_err(|e| e.to_string())?;
    Ok(report.to_json())
}

#[derive(Serialize)]
struct Harmonics {
    /// max over μ of |C_0^{zμ}|: zero means static z fields refocus.
    z_refocusing: f64,
    reconstruction_residual: f64,
    csv: String,
}

pub fn harmonics_json(sequence: &str, shape: &str, odd: bool, m_max: usize) -> Result<String, String> {
    let seq = parse_sequence(sequence).map_err(|e| e.to_string())?;
    if seq.len() > MAX_DEMO_LENGTH {
        return Err(format!("at most {MAX_DEMO_LENGTH} intervals in the browser"));
    }
    let shape = resolve(shape)?;
    let parity = if odd { Parity::Odd } else { Parity::Even };
    let traj = bathframe::rotation_trajectory(&seq.bind(&shape), parity, 128).map_err(|e| e.to_string())?;
    let table = bathframe::harmonics(&traj, m_max).map_err(|e| e.to_string())?;
    let z = bathframe::refocusing_check(&table, FieldAxis::Z);
    let out = Harmonics {
        z_refocusing: z.iter().copied().fold(0.0, f64::max),
        reconstruction_residual: table.reconstruction_residual,
        csv: table.to_csv(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = shapeCurve)]
pub fn shape_curve(shape: &str, samples: usize) -> Result<String, JsError> {
    js(shape_curve_json(shape, samples))
}

#[wasm_bindgen(js_name = classifySequence)]
pub fn classify_sequence(sequence: &str, shape: &str, model: &str, k_max: usize) -> Result<String, JsError> {
    js(classify_json(sequence, shape, model, k_max))
}

#[wasm_bindgen(js_name = frameHarmonics)]
pub fn frame_harmonics(sequence: &str, shape: &str, odd: bool, m_max: usize) -> Result<String, JsError> {
    js(harmonics_json(sequence, shape, odd, m_max))
}

#[wasm_bindgen(js_name = builtinShapes)]
pub fn builtin_shapes() -> String {
    serde_json::to_string(&pulseshape::BUILTIN_NAMES).expect("names serialise")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn curve_endpoints_vanish() {
        let v: Value = serde_json::from_str(&shape_curve_json("S1", 11).unwrap()).unwrap();
        let vals = v["v"].as_array().unwrap();
        assert!(vals[0].as_f64().unwrap().abs() < 1e-12);
        assert!(vals[10].as_f64().unwrap().abs() < 1e-12);
        assert!((v["angle_over_pi"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!((v["theta"][10].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!(shape_curve_json("S1", 1).is_err());
    }

    #[test]
    fn classification_matches_library() {
        let v: Value = serde_json::from_str(&classify_json("X1 X1", "S1", "ising", 3).unwrap()).unwrap();
        assert_eq!(v["order"], 1);
        let v: Value = serde_json::from_str(&classify_json("X1", "Q1", "ising", 3).unwrap()).unwrap();
        assert_eq!(v["order"], 2);
        assert!(classify_json("X1", "S1", "ising", 9).is_err());
        assert!(classify_json("X1 Q", "S1", "ising", 2).is_err());
    }

    #[test]
    fn harmonics_detect_refocusing() {
        let echo: Value = serde_json::from_str(&harmonics_json("X1 X1", "S1", true, 4).unwrap()).unwrap();
        assert!(echo["z_refocusing"].as_f64().unwrap() < 1e-9);
        // S1 alone already refocuses its own sublattice; the Gaussian does not
        let single: Value = serde_json::from_str(&harmonics_json("X1", "gauss", true, 4).unwrap()).unwrap();
        assert!(single["z_refocusing"].as_f64().unwrap() > 1e-3);
        assert!(echo["csv"].as_str().unwrap().starts_with("m,xx"));
    }

    #[test]
    fn inline_shape_json() {
        let json = pulseshape::builtin("Q1").unwrap().to_json();
        assert!(shape_curve_json(&json, 5).is_ok());
        assert!(shape_curve_json("{not json", 5).is_err());
    }
}
