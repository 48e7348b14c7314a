//! Rotating-frame rotation matrices Q(t) of single sites and their Fourier
//! harmonics over a sequence period.
//!
//! U0† σ^μ U0 = Q^{μμ'} σ^{μ'}. The bare evolution factorizes over sites, so
//! one trajectory per sublattice describes every site of that parity.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{PulseError, Result};
use crate::matcore::{Mat2, C64, ZERO};
use crate::numfmt::fmt_sig;
use crate::propagate;
use crate::sequences::PulseSchedule;
use crate::spinmodel::{ClusterSpec, Parity};

pub const MIN_SAMPLES: usize = 64;
pub const DEFAULT_M_MAX: usize = 64;
/// RK4 substeps between trajectory samples.
const SUBSTEPS: usize = 32;

pub type Rot3 = [[f64; 3]; 3];
pub type CRot3 = [[C64; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldAxis {
    X,
    Y,
    Z,
}

impl FieldAxis {
    fn index(self) -> usize {
        self as usize
    }
}

/// Q(t) sampled uniformly on [0, period), plus the value at the period end.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub parity: Parity,
    pub period: f64,
    pub times: Vec<f64>,
    pub q: Vec<Rot3>,
    pub end: Rot3,
}

fn rotation_of(u: &Mat2) -> Rot3 {
    let mut q = [[0.0; 3]; 3];
    let ud = u.adjoint();
    for (mu, row) in q.iter_mut().enumerate() {
        let moved = ud * Mat2::pauli(mu) * *u;
        for (nu, entry) in row.iter_mut().enumerate() {
            *entry = 0.5 * (Mat2::pauli(nu) * moved).trace().re;
        }
    }
    q
}

/// Q(t) for sites of `parity` over the whole schedule, `samples` per interval.
pub fn rotation_trajectory(schedule: &PulseSchedule, parity: Parity, samples: usize) -> Result<Trajectory> {
    if samples < MIN_SAMPLES {
        return Err(PulseError::InvalidArgument(format!("need at least {MIN_SAMPLES} samples per interval, got {samples}")));
    }
    if schedule.intervals.is_empty() {
        return Err(PulseError::InvalidArgument("empty schedule".into()));
    }
    let frames = propagate::frame_trajectory(&ClusterSpec::single(parity), schedule, samples, SUBSTEPS);
    let total = frames.len() - 1;
    let period = schedule.duration();
    let q: Vec<Rot3> = frames.iter().map(|f| rotation_of(&f[0])).collect();
    Ok(Trajectory {
        parity,
        period,
        times: (0..total).map(|j| period * j as f64 / total as f64).collect(),
        end: q[total],
        q: q[..total].to_vec(),
    })
}

impl Trajectory {
    /// Largest deviation of Qᵀ Q from I and of det Q from 1 over the samples.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for q in self.q.iter().chain(std::iter::once(&self.end)) {
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| q[k][i] * q[k][j]).sum();
                    worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
                }
            }
            worst = worst.max((det3(q) - 1.0).abs());
        }
        worst
    }

    /// max |Q(period) - Q(0)|; zero for schedules whose bare evolution
    /// returns every axis to itself.
    pub fn periodicity_defect(&self) -> f64 {
        max_entry_diff(&self.end, &self.q[0])
    }
}

fn det3(q: &Rot3) -> f64 {
    q[0][0] * (q[1][1] * q[2][2] - q[1][2] * q[2][1]) - q[0][1] * (q[1][0] * q[2][2] - q[1][2] * q[2][0])
        + q[0][2] * (q[1][0] * q[2][1] - q[1][1] * q[2][0])
}

fn max_entry_diff(a: &Rot3, b: &Rot3) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Fourier decomposition Q(t) = Σ_m C_m e^{-i m Ω̃ t}, Ω̃ = 2π / period.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicTable {
    pub parity: Parity,
    pub period: f64,
    pub m_max: usize,
    /// C_m for m in -m_max..=m_max.
    pub c: BTreeMap<i64, CRot3>,
    /// Max-entry error of the truncated series on the sample grid.
    pub reconstruction_residual: f64,
}

/// Discrete Fourier analysis of a uniformly sampled trajectory.
pub fn harmonics(traj: &Trajectory, m_max: usize) -> Result<HarmonicTable> {
    let s = traj.q.len();
    if s < 2 {
        return Err(PulseError::InvalidArgument("trajectory needs at least two samples".into()));
    }
    if 2 * m_max + 1 > s {
        // beyond Nyquist the harmonics alias onto each other
        return Err(PulseError::InvalidArgument(format!("cutoff {m_max} needs at least {} samples, have {s}", 2 * m_max + 1)));
    }
    let spacing = traj.period / s as f64;
    for (j, t) in traj.times.iter().enumerate() {
        if (t - j as f64 * spacing).abs() > 1e-12 * traj.period.max(1.0) {
            return Err(PulseError::InvalidArgument(format!("non-uniform sampling at sample {j}")));
        }
    }
    let w = 2.0 * PI / traj.period;
    let mut c = BTreeMap::new();
    let m_max_i = m_max as i64;
    for m in -m_max_i..=m_max_i {
        let mut acc = [[ZERO; 3]; 3];
        for (t, q) in traj.times.iter().zip(&traj.q) {
            let phase = C64::from_polar(1.0 / s as f64, m as f64 * w * t);
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += phase * q[i][j];
                }
            }
        }
        // Trapezoid closure: the rectangle sum assumes Q(T) = Q(0), which fails
        // when the sequence does not return the frame (a lone π pulse).
        for i in 0..3 {
            for j in 0..3 {
                acc[i][j] += (traj.end[i][j] - traj.q[0][i][j]) / (2 * s) as f64;
            }
        }
        c.insert(m, acc);
    }
    let mut residual: f64 = 0.0;
    for (t, q) in traj.times.iter().zip(&traj.q) {
        let mut rec = [[ZERO; 3]; 3];
        for (m, cm) in &c {
            let phase = C64::from_polar(1.0, -(*m as f64) * w * t);
            for i in 0..3 {
                for j in 0..3 {
                    rec[i][j] += cm[i][j] * phase;
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                residual = residual.max((rec[i][j] - q[i][j]).norm());
            }
        }
    }
    Ok(HarmonicTable { parity: traj.parity, period: traj.period, m_max, c, reconstruction_residual: residual })
}

impl HarmonicTable {
    pub fn zeroth(&self) -> &CRot3 {
        &self.c[&0]
    }

    /// CSV rows `m,xx,xy,…,zz` of |C_m| for m = 0..=m_max.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let axes = ["x", "y", "z"];
        let mut header = vec!["m".to_string()];
        for a in axes {
            for b in axes {
                header.push(format!("{a}{b}"));
            }
        }
        w.write_record(&header).expect("in-memory csv write");
        for (m, cm) in self.c.range(0..) {
            let mut rec = vec![m.to_string()];
            rec.extend(cm.iter().flatten().map(|v| fmt_sig(v.norm())));
            w.write_record(&rec).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }
}

/// |C_0^{aμ'}| for μ' = x, y, z: the time-averaged projection of a static
/// field along `axis` in the rotating frame.
pub fn refocusing_check(table: &HarmonicTable, axis: FieldAxis) -> [f64; 3] {
    let c0 = table.zeroth();
    let row = axis.index();
    [c0[row][0].norm(), c0[row][1].norm(), c0[row][2].norm()]
}

/// Default first-order static-field refocusing test on both sublattices:
/// max over μ' of |C_0^{zμ'}| per parity (odd, even).
pub fn phase_refocusing(schedule: &PulseSchedule) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    for (slot, parity) in [Parity::Odd, Parity::Even].into_iter().enumerate() {
        let traj = rotation_trajectory(schedule, parity, 512)?;
        let table = harmonics(&traj, 0)?;
        out[slot] = refocusing_check(&table, FieldAxis::Z).into_iter().fold(0.0, f64::max);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulseshape::builtin;
    use crate::sequences::parse_sequence;

    fn schedule(seq: &str, shape: &str) -> PulseSchedule {
        parse_sequence(seq).unwrap().bind(&builtin(shape).unwrap())
    }

    #[test]
    fn idle_is_identity() {
        let t = rotation_trajectory(&PulseSchedule::idle(1), Parity::Odd, 64).unwrap();
        for q in &t.q {
            assert_eq!(max_entry_diff(q, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]), 0.0);
        }
        let h = harmonics(&t, 4).unwrap();
        assert!((h.zeroth()[2][2] - 1.0).norm() < 1e-15);
        assert!(h.c.iter().filter(|(m, _)| **m != 0).all(|(_, c)| c.iter().flatten().all(|v| v.norm() < 1e-15)));
        assert_eq!(refocusing_check(&h, FieldAxis::Z), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn pi_x_end_point() {
        let s = schedule("X1", "S1");
        let t = rotation_trajectory(&s, Parity::Odd, 64).unwrap();
        assert!(max_entry_diff(&t.end, &[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]) < 1e-9);
        assert!(t.orthogonality_defect() < 1e-8);
        let even = rotation_trajectory(&s, Parity::Even, 64).unwrap();
        assert!(even.q.iter().all(|q| q[0][0] == 1.0 && q[1][1] == 1.0 && q[2][2] == 1.0));
    }

    #[test]
    fn two_x_pulses_average_out_z() {
        let t = rotation_trajectory(&schedule("X1 X1", "gauss"), Parity::Odd, 128).unwrap();
        let h = harmonics(&t, 16).unwrap();
        assert!(h.zeroth()[2][2].norm() < 1e-6);
        assert!(t.periodicity_defect() < 1e-9);
        let one = harmonics(&rotation_trajectory(&schedule("X1", "gauss"), Parity::Odd, 128).unwrap(), 0).unwrap();
        // symmetric pulse: the zz average cancels, the zy one survives
        assert!(one.zeroth()[2][2].norm() < 1e-6);
        assert!(refocusing_check(&one, FieldAxis::Z)[1] > 1e-3);
    }

    #[test]
    fn reconstruction_and_csv() {
        let t = rotation_trajectory(&schedule("X1 X1", "S1"), Parity::Odd, 128).unwrap();
        assert!(harmonics(&t, 32).unwrap().reconstruction_residual < 1e-9);
        // Q1 joins idle intervals with a jump in V'', so its tail decays slowly
        let t = rotation_trajectory(&schedule("X1 Y2 ~X1 ~Y2 ~Y2 ~X1 Y2 X1", "Q1"), Parity::Even, 64).unwrap();
        let h = harmonics(&t, DEFAULT_M_MAX).unwrap();
        assert!(h.reconstruction_residual < 2e-2, "{}", h.reconstruction_residual);
        assert!(harmonics(&t, 2 * DEFAULT_M_MAX).unwrap().reconstruction_residual < 1e-3);
        assert!(harmonics(&t, 256).is_err());
        let csv = h.to_csv();
        assert!(csv.starts_with("m,xx,xy,xz,yx,yy,yz,zx,zy,zz\n0,"));
        assert_eq!(csv.lines().count(), DEFAULT_M_MAX + 2);
    }

    #[test]
    fn sampling_checks() {
        assert!(rotation_trajectory(&PulseSchedule::idle(1), Parity::Odd, 10).is_err());
        let mut t = rotation_trajectory(&PulseSchedule::idle(1), Parity::Odd, 64).unwrap();
        t.times[3] += 1e-3;
        assert!(matches!(harmonics(&t, 2), Err(PulseError::InvalidArgument(_))));
    }
}
