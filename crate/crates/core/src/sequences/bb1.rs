//! BB1 composite π pulse under amplitude mismatch.
//!
//! Nominal π_0 followed by π_φ 2π_{3φ} π_φ, φ = arccos(−1/4), all on odd
//! sites. A soft pulse with fixed axis is an exact rotation by (1 + ε)θ, so
//! on a single spin the composite inherits the hard-pulse ε³ error law.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{PulseError, Result};
use crate::matcore::{kron_sites, Mat2};
use crate::numfmt::serialize_sig;
use crate::propagate;
use crate::pulseshape::{self, PulseShape};
use crate::spinmodel::{AxisPulse, ChainModel, ClusterSpec, Parity, SublatticePulses};

use super::PulseSchedule;

/// arccos(−1/4): BB1 correction phase for a π target.
pub fn bb1_phase() -> f64 {
    (-0.25f64).acos()
}

pub const BB1_PHASE_COS: f64 = -0.25;

const ANGLE_TOL: f64 = 1e-9;

/// A π and a 2π shape of the same family.
#[derive(Clone, Debug, PartialEq)]
pub struct Bb1Pulses {
    pub pi: PulseShape,
    pub two_pi: PulseShape,
}

impl Bb1Pulses {
    pub fn new(pi: PulseShape, two_pi: PulseShape) -> Result<Self> {
        if (pi.rotation_angle() - PI).abs() > ANGLE_TOL {
            return Err(PulseError::InvalidArgument(format!("`{}` is not a π pulse", pi.name)));
        }
        if (two_pi.rotation_angle() - 2.0 * PI).abs() > ANGLE_TOL {
            return Err(PulseError::InvalidArgument(format!("missing 2π shape: `{}` rotates by {}", two_pi.name, two_pi.rotation_angle())));
        }
        Ok(Bb1Pulses { pi, two_pi })
    }

    /// Gaussian π and 2π pulses of the same width.
    pub fn gaussian(sigma: f64) -> Self {
        let pi = pulseshape::gaussian(sigma);
        let two_pi = pi.scaled_to_angle(2.0 * PI);
        Bb1Pulses { pi, two_pi }
    }

    /// Q1 with the bundled second-order 2π design.
    pub fn second_order() -> Self {
        Bb1Pulses { pi: pulseshape::builtin("Q1").expect("builtin"), two_pi: pulseshape::second_order_two_pi() }
    }
}

/// The four-interval BB1 schedule with every amplitude scaled by 1 + ε.
pub fn bb1_schedule(pulses: &Bb1Pulses, epsilon: f64) -> PulseSchedule {
    let phi = bb1_phase();
    let pi = Arc::new(pulses.pi.clone());
    let two_pi = Arc::new(pulses.two_pi.clone());
    let odd = |p: AxisPulse| SublatticePulses { odd: Some(p), even: None };
    PulseSchedule::new(vec![
        odd(AxisPulse::new(pi.clone(), 0.0, 1.0)),
        odd(AxisPulse::new(pi.clone(), phi, 1.0)),
        odd(AxisPulse::new(two_pi, 3.0 * phi, 1.0)),
        odd(AxisPulse::new(pi, phi, 1.0)),
    ])
    .with_amplitude(1.0 + epsilon)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bb1Point {
    #[serde(serialize_with = "serialize_sig")]
    pub epsilon: f64,
    #[serde(serialize_with = "serialize_sig")]
    pub jz: f64,
    #[serde(serialize_with = "serialize_sig")]
    pub error: f64,
}

/// ‖U − U_target‖_F for BB1 on `n_sites` (1 = single spin), target π_x on
/// odd sites.
pub fn bb1_error(pulses: &Bb1Pulses, epsilon: f64, model: &ChainModel, n_sites: usize, steps: usize) -> Result<f64> {
    let cluster = if n_sites == 1 { ClusterSpec::single(Parity::Odd) } else { ClusterSpec::chain(n_sites, Parity::Odd) };
    let u = propagate::integrate_exact(&cluster, model, &bb1_schedule(pulses, epsilon), steps)?;
    let target: Vec<Mat2> = (0..cluster.n_sites)
        .map(|s| if cluster.parity(s) == Parity::Odd { Mat2::rotation_xy(PI, 0.0) } else { Mat2::IDENTITY })
        .collect();
    Ok((&u - &kron_sites(&target)).frobenius_norm())
}

pub fn bb1_sweep(pulses: &Bb1Pulses, epsilons: &[f64], model: &ChainModel, n_sites: usize, steps: usize) -> Result<Vec<Bb1Point>> {
    for e in epsilons {
        if !(0.0..=0.2).contains(e) {
            return Err(PulseError::InvalidArgument(format!("amplitude mismatch {e} outside [0, 0.2]")));
        }
    }
    let point = |e: &f64| -> Result<Bb1Point> {
        Ok(Bb1Point { epsilon: *e, jz: model.jz, error: bb1_error(pulses, *e, model, n_sites, steps)? })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        epsilons.par_iter().map(point).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        epsilons.iter().map(point).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagate::DEFAULT_STEPS;

    #[test]
    fn ideal_single_spin() {
        let e = bb1_error(&Bb1Pulses::gaussian(pulseshape::REFERENCE_SIGMA), 0.0, &ChainModel::none(), 1, DEFAULT_STEPS).unwrap();
        assert!(e < 1e-8, "{e}");
    }

    #[test]
    fn phase_and_layout() {
        assert!((bb1_phase().cos() - BB1_PHASE_COS).abs() < 1e-15);
        let s = bb1_schedule(&Bb1Pulses::gaussian(0.125), 0.1);
        assert_eq!(s.intervals.len(), 4);
        let third = s.intervals[2].odd.as_ref().unwrap();
        assert!((third.amplitude - 1.1).abs() < 1e-15);
        assert!((third.phase - (3.0 * bb1_phase()).rem_euclid(2.0 * PI)).abs() < 1e-15);
        assert!(s.intervals.iter().all(|i| i.even.is_none()));
    }

    #[test]
    fn compensates_amplitude_error() {
        let pulses = Bb1Pulses::gaussian(0.125);
        let bare = |e: f64| 2f64.sqrt() * 2.0 * (PI * e / 4.0).sin().abs();
        let composite = bb1_error(&pulses, 0.05, &ChainModel::none(), 1, DEFAULT_STEPS).unwrap();
        assert!(composite < 0.05 * bare(0.05), "{composite}");
    }

    #[test]
    fn missing_two_pi_shape() {
        let q1 = pulseshape::builtin("Q1").unwrap();
        assert!(Bb1Pulses::new(q1.clone(), q1).is_err());
    }
}
