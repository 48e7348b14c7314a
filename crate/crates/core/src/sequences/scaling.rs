//! Error scaling of truncated perturbative propagators with the coupling.

use serde::Serialize;

use crate::error::{PulseError, Result};
use crate::numfmt::serialize_sig;
use crate::propagate;
use crate::spinmodel::{ChainModel, ClusterSpec};

use super::PulseSchedule;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    /// Coupling multiplier applied to the base model (J_zτ for a unit Ising base).
    #[serde(serialize_with = "serialize_sig")]
    pub coupling: f64,
    #[serde(serialize_with = "serialize_sig")]
    pub error: f64,
}

/// ‖U − U0(I + R_1 + … + R_K)‖_F at each coupling multiplier, from the
/// remainder equation (no cancellation between nearly equal propagators).
pub fn scaling_sweep(
    schedule: &PulseSchedule,
    base: &ChainModel,
    k: usize,
    couplings: &[f64],
    cluster: &ClusterSpec,
    steps: usize,
) -> Result<Vec<ScalingPoint>> {
    let point = |c: &f64| -> Result<ScalingPoint> {
        let (_, e) = propagate::integrate_remainder(cluster, &base.scaled(*c), schedule, k, steps)?;
        Ok(ScalingPoint { coupling: *c, error: e.frobenius_norm() })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        couplings.par_iter().map(point).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        couplings.iter().map(point).collect()
    }
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(PulseError::InvalidArgument("slope fit needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan() || *v <= 0.0 || !v.is_finite()) {
        return Err(PulseError::InvalidArgument("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(PulseError::InvalidArgument("slope fit needs distinct x values".into()));
    }
    Ok(lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx)
}

/// `n` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulseshape::builtin;
    use crate::sequences::parse_sequence;
    use crate::spinmodel::Parity;

    #[test]
    fn slope_of_power_law() {
        let xs = geomspace(0.1, 1.0, 5);
        assert!((xs[4] - 1.0).abs() < 1e-15);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powi(4)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 4.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn single_s1_pulse_scales_quadratically() {
        let sched = parse_sequence("X1").unwrap().bind(&builtin("S1").unwrap());
        let pts = scaling_sweep(&sched, &ChainModel::ising(1.0), 1, &geomspace(0.05, 0.4, 4), &ClusterSpec::chain(2, Parity::Odd), 1000).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p.coupling).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.error).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 2.0).abs() < 0.1);
    }
}
