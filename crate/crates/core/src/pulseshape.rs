//! Fourier-parameterised pulse envelopes.
//!
//! A shape is V(t) = a0 + Σ_m [a_m cos(mΩt) + b_m sin(mΩt)] on t ∈ [0, τ]
//! with Ω = 2π/τ, in units of Ω. With that normalisation the rotation angle
//! of the pulse is exactly 2π·a0.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{PulseError, Result};

/// How the harmonic time argument is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Harmonics in lab time t ∈ [0, τ].
    #[default]
    Lab,
    /// Harmonics in t − τ/2 (odd-m cosine signs flipped relative to `Lab`).
    Shifted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub name: String,
    pub a0: f64,
    /// Cosine coefficients A_1..A_M.
    pub a: Vec<f64>,
    /// Sine coefficients B_1..B_M (may be shorter than `a`).
    pub b: Vec<f64>,
    pub smoothness_l: usize,
    pub claimed_k: usize,
    pub convention: Convention,
}

/// Table of published shapes: (name, L, K, [A0, A1, ...]).
const TABLE_SHAPES: [(&str, usize, usize, &[f64]); 4] = [
    ("S1", 1, 1, &[0.5, -1.2053194466, 0.4796460175, 0.2256734291]),
    ("S2", 2, 1, &[0.5, -1.1950755990, 0.7841246569, 0.0738054432, -0.1628545011]),
    ("Q1", 1, 2, &[0.5, -1.1374003264, 1.5774784244, -0.6825954606, -0.2574826374]),
    ("Q2", 2, 2, &[0.5, -1.0965122417, 1.5309957409, -1.1470791601, 0.0020722004, 0.2105234605]),
];

/// Width of the Gaussian and Hermite references, in units of τ.
pub const REFERENCE_SIGMA: f64 = 1.0 / 8.0;
/// Harmonics kept when re-fitting analytic envelopes.
pub const REFIT_HARMONICS: usize = 24;

impl PulseShape {
    pub fn new(name: impl Into<String>, a0: f64, a: Vec<f64>, b: Vec<f64>) -> Self {
        PulseShape { name: name.into(), a0, a, b, smoothness_l: 0, claimed_k: 0, convention: Convention::Lab }
    }

    pub fn with_classes(mut self, smoothness_l: usize, claimed_k: usize) -> Self {
        self.smoothness_l = smoothness_l;
        self.claimed_k = claimed_k;
        self
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn harmonics(&self) -> usize {
        self.a.len().max(self.b.len())
    }

    /// Phase offset of the harmonic argument, in units of τ.
    fn origin(&self) -> f64 {
        match self.convention {
            Convention::Lab => 0.0,
            Convention::Shifted => 0.5,
        }
    }

    /// V(t) without range checking; t in units of τ.
    pub fn value(&self, t: f64) -> f64 {
        let x = 2.0 * PI * (t - self.origin());
        let (s1, c1) = x.sin_cos();
        // Chebyshev recurrences for cos(mx), sin(mx)
        let (mut c_prev, mut c_cur) = (1.0, c1);
        let (mut s_prev, mut s_cur) = (0.0, s1);
        let mut v = self.a0;
        for m in 0..self.harmonics() {
            if let Some(am) = self.a.get(m) {
                v += am * c_cur;
            }
            if let Some(bm) = self.b.get(m) {
                v += bm * s_cur;
            }
            let c_next = 2.0 * c1 * c_cur - c_prev;
            let s_next = 2.0 * c1 * s_cur - s_prev;
            (c_prev, c_cur) = (c_cur, c_next);
            (s_prev, s_cur) = (s_cur, s_next);
        }
        v
    }

    /// V(t) for t ∈ [0, τ], in units of Ω.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(PulseError::TimeOutOfRange { t, period: 1.0 });
        }
        Ok(self.value(t))
    }

    /// Accumulated rotation angle θ(t) = Ω ∫_0^t V, closed form.
    pub fn angle_at(&self, t: f64) -> f64 {
        let o = self.origin();
        let mut theta = 2.0 * PI * self.a0 * t;
        for (m, am) in self.a.iter().enumerate() {
            let k = 2.0 * PI * (m + 1) as f64;
            theta += am / (m + 1) as f64 * ((k * (t - o)).sin() - (k * (-o)).sin());
        }
        for (m, bm) in self.b.iter().enumerate() {
            let k = 2.0 * PI * (m + 1) as f64;
            theta -= bm / (m + 1) as f64 * ((k * (t - o)).cos() - (k * (-o)).cos());
        }
        theta
    }

    /// Rotation angle of the full pulse, 2π·a0.
    pub fn rotation_angle(&self) -> f64 {
        2.0 * PI * self.a0
    }

    /// Even-derivative end-point residuals, j = 0..L-1: the (2j)-th derivative
    /// of the cosine series at t = 0 in units of Ω^(2j), up to sign.
    pub fn smoothness_residuals(&self) -> Vec<f64> {
        let sign = |m: usize| match self.convention {
            Convention::Lab => 1.0,
            Convention::Shifted => {
                if m % 2 == 1 {
                    -1.0
                } else {
                    1.0
                }
            }
        };
        (0..self.smoothness_l)
            .map(|j| {
                let series: f64 = self
                    .a
                    .iter()
                    .enumerate()
                    .map(|(i, am)| {
                        let m = i + 1;
                        sign(m) * am * (m as f64).powi(2 * j as i32)
                    })
                    .sum();
                if j == 0 {
                    self.a0 + series
                } else {
                    series
                }
            })
            .collect()
    }

    /// Same envelope rescaled so the pulse rotates by `angle`.
    pub fn scaled_to_angle(&self, angle: f64) -> PulseShape {
        let s = angle / self.rotation_angle();
        let mut out = self.clone();
        out.a0 *= s;
        out.a.iter_mut().for_each(|x| *x *= s);
        out.b.iter_mut().for_each(|x| *x *= s);
        out
    }

    /// Bit-level identity used for caching integrations.
    pub fn fingerprint(&self) -> Vec<u64> {
        let mut key = vec![self.a.len() as u64, self.b.len() as u64, self.convention as u64, self.a0.to_bits()];
        key.extend(self.a.iter().map(|x| x.to_bits()));
        key.extend(self.b.iter().map(|x| x.to_bits()));
        key
    }

    pub fn to_file(&self) -> PulseFile {
        let mut a = vec![self.a0];
        a.extend_from_slice(&self.a);
        PulseFile {
            name: self.name.clone(),
            angle_over_pi: 2.0 * self.a0,
            l: self.smoothness_l,
            k: self.claimed_k,
            a,
            b: self.b.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("pulse file serialisation")
    }

    pub fn from_json(text: &str) -> Result<PulseShape> {
        let file: PulseFile = serde_json::from_str(text).map_err(|e| PulseError::Format(e.to_string()))?;
        file.into_shape()
    }
}

/// On-disk pulse format. `A[0]` is the constant term A0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseFile {
    pub name: String,
    pub angle_over_pi: f64,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B", default)]
    pub b: Vec<f64>,
}

impl PulseFile {
    pub fn into_shape(self) -> Result<PulseShape> {
        let (a0, rest) = self.a.split_first().ok_or_else(|| PulseError::Format("empty coefficient list".into()))?;
        if (2.0 * a0 - self.angle_over_pi).abs() > 1e-9 * self.angle_over_pi.abs().max(1.0) {
            return Err(PulseError::Format(format!(
                "angle_over_pi {} disagrees with A0 = {} (expected 2·A0)",
                self.angle_over_pi, a0
            )));
        }
        Ok(PulseShape::new(self.name, *a0, rest.to_vec(), self.b).with_classes(self.l, self.k))
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let n = n + n % 2;
    let h = 1.0 / n as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// Cosine-series projection of an envelope on [0, τ], calibrated to `angle`.
pub fn refit<F: Fn(f64) -> f64>(name: &str, envelope: F, harmonics: usize, angle: f64) -> PulseShape {
    const NODES: usize = 8192;
    let a0 = simpson(&envelope, NODES);
    let a: Vec<f64> = (1..=harmonics)
        .map(|m| 2.0 * simpson(|t| envelope(t) * (2.0 * PI * m as f64 * t).cos(), NODES))
        .collect();
    PulseShape::new(name, a0, a, Vec::new()).scaled_to_angle(angle)
}

/// Gaussian reference: exp(-(t-τ/2)²/2σ²) minus its end value, fit to the
/// cosine series and calibrated to a π rotation.
pub fn gaussian(sigma: f64) -> PulseShape {
    let g = move |t: f64| (-(t - 0.5).powi(2) / (2.0 * sigma * sigma)).exp();
    let end = g(0.0);
    refit("gauss", move |t| g(t) - end, REFIT_HARMONICS, PI).with_classes(0, 0)
}

/// Hermite reference (1 - β x²) exp(-x²), x = (t-τ/2)/σ, offset to vanish at
/// the ends and calibrated to a π rotation.
pub fn hermite(beta: f64, sigma: f64) -> PulseShape {
    let h = move |t: f64| {
        let x = (t - 0.5) / sigma;
        (1.0 - beta * x * x) * (-x * x).exp()
    };
    let end = h(0.0);
    refit("herm", move |t| h(t) - end, REFIT_HARMONICS, PI).with_classes(0, 1)
}

static HERMITE: OnceLock<PulseShape> = OnceLock::new();

/// Hermite reference with β calibrated for first-order self-refocusing.
pub fn calibrated_hermite() -> PulseShape {
    HERMITE
        .get_or_init(|| {
            let beta = crate::optimize::calibrate_hermite_beta(REFERENCE_SIGMA, crate::propagate::DEFAULT_STEPS)
                .expect("hermite calibration");
            hermite(beta, REFERENCE_SIGMA)
        })
        .clone()
}

/// Second-order (K = 2, L = 1, M = 5) 2π pulse produced by the optimizer,
/// the partner of Q1 in the BB1 experiment.
pub const TWO_PI_DESIGN_JSON: &str = include_str!("../data/q_two_pi.json");

pub fn second_order_two_pi() -> PulseShape {
    PulseShape::from_json(TWO_PI_DESIGN_JSON).expect("bundled 2π design parses")
}

pub const BUILTIN_NAMES: [&str; 6] = ["S1", "S2", "Q1", "Q2", "gauss", "herm"];

/// Published and reference shapes by name (case-insensitive).
pub fn builtin(name: &str) -> Result<PulseShape> {
    for (n, l, k, coeffs) in TABLE_SHAPES {
        if n.eq_ignore_ascii_case(name) {
            return Ok(PulseShape::new(n, coeffs[0], coeffs[1..].to_vec(), Vec::new()).with_classes(l, k));
        }
    }
    match name.to_ascii_lowercase().as_str() {
        "gauss" | "gaussian" => Ok(gaussian(REFERENCE_SIGMA)),
        "herm" | "hermite" => Ok(calibrated_hermite()),
        _ => Err(PulseError::UnknownShape(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s1_endpoints_and_center() {
        let s1 = builtin("S1").unwrap();
        assert!(s1.evaluate(0.0).unwrap().abs() < 1e-9);
        assert!(s1.evaluate(1.0).unwrap().abs() < 1e-9);
        // 0.5 + 1.2053194466 + 0.4796460175 - 0.2256734291
        assert!((s1.evaluate(0.5).unwrap() - 1.9592920350).abs() < 1e-10);
        assert!(s1.evaluate(1.5).is_err());
    }

    #[test]
    fn zero_shape() {
        let z = PulseShape::new("zero", 0.0, vec![], vec![]);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(z.evaluate(t).unwrap(), 0.0);
        }
    }

    #[test]
    fn smoothness_examples() {
        for r in builtin("S2").unwrap().smoothness_residuals() {
            assert!(r.abs() < 1e-8, "{r}");
        }
        let q1 = builtin("Q1").unwrap().smoothness_residuals();
        assert_eq!(q1.len(), 1);
        assert!(q1[0].abs() < 1e-8);
        let simple = PulseShape::new("s", 0.5, vec![-0.5], vec![]).with_classes(1, 0);
        assert_eq!(simple.smoothness_residuals(), vec![0.0]);
    }

    #[test]
    fn shifted_convention_breaks_table_shapes() {
        let s1 = builtin("S1").unwrap().with_convention(Convention::Shifted);
        assert!(s1.smoothness_residuals()[0].abs() > 0.1);
        assert!(s1.evaluate(0.0).unwrap().abs() > 0.1);
    }

    #[test]
    fn table_coefficients_exact() {
        let s1 = builtin("S1").unwrap();
        assert_eq!((s1.a0, s1.a.clone()), (0.5, vec![-1.2053194466, 0.4796460175, 0.2256734291]));
        let q2 = builtin("q2").unwrap();
        assert_eq!(q2.a, vec![-1.0965122417, 1.5309957409, -1.1470791601, 0.0020722004, 0.2105234605]);
        assert_eq!((q2.smoothness_l, q2.claimed_k), (2, 2));
        assert!(builtin("triangle").is_err());
    }

    #[test]
    fn rotation_angles() {
        let s1 = builtin("S1").unwrap();
        assert!((s1.rotation_angle() - PI).abs() < 1e-15);
        // trapezoid quadrature of the envelope, independent of the closed form
        let n = 20_000;
        let trap: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * s1.value(i as f64 / n as f64)
            })
            .sum::<f64>()
            * 2.0
            * PI
            / n as f64;
        assert!((trap - PI).abs() < 1e-9);
        assert!((PulseShape::new("a", 1.0, vec![], vec![]).rotation_angle() - 2.0 * PI).abs() < 1e-15);
        assert!((PulseShape::new("a", 0.25, vec![], vec![]).rotation_angle() - PI / 2.0).abs() < 1e-15);
        assert!((s1.angle_at(1.0) - PI).abs() < 1e-12);
    }

    #[test]
    fn gaussian_is_pi_pulse() {
        let g = builtin("gauss").unwrap();
        assert!((g.rotation_angle() - PI).abs() < 1e-9);
        assert!(g.value(0.0).abs() < 1e-4);
        assert!((gaussian(0.1).rotation_angle() - PI).abs() < 1e-12);
    }

    #[test]
    fn pure_cosine_shapes_are_symmetric() {
        for name in ["S1", "S2", "Q1", "Q2", "gauss"] {
            let s = builtin(name).unwrap();
            for t in [0.05, 0.21, 0.4] {
                assert!((s.value(t) - s.value(1.0 - t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let q1 = builtin("Q1").unwrap();
        let back = PulseShape::from_json(&q1.to_json()).unwrap();
        assert_eq!(back, q1);
        let bad = r#"{"name":"x","angle_over_pi":2.0,"L":1,"K":1,"A":[0.5,-0.5],"B":[]}"#;
        assert!(PulseShape::from_json(bad).is_err());
    }
}
