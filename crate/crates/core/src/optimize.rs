//! Pulse design: simulated annealing on the log-objective followed by
//! steepest descent with finite-difference gradients.
//!
//! The free parameters are the first M − L cosine coefficients; a0 is fixed by
//! the target angle and the last L coefficients by the end-point conditions.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{PulseError, Result};
use crate::matcore::{self, CMatrix, Mat2};
use crate::numfmt::{fmt_sig, serialize_sig};
use crate::propagate::{self, DEFAULT_STEPS};
use crate::pulseshape::{self, PulseShape};
use crate::sequences::PulseSchedule;
use crate::spinmodel::{enumerate_clusters, AxisPulse, ChainModel, ClusterSpec, Parity};

/// Objective value at which the design is accepted.
pub const ACCEPT_OBJECTIVE: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct DesignGoal {
    pub angle: f64,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub model: ChainModel,
    /// Descent stops once the objective is below this.
    pub target: f64,
    pub steps: usize,
}

impl DesignGoal {
    pub fn new(angle: f64, k: usize, l: usize, m: usize) -> Self {
        DesignGoal { angle, k, l, m, model: ChainModel::ising(1.0), target: 1e-16, steps: DEFAULT_STEPS }
    }

    pub fn a0(&self) -> f64 {
        self.angle / (2.0 * PI)
    }

    pub fn free_count(&self) -> usize {
        self.m - self.l
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < self.k + self.l {
            return Err(PulseError::InvalidArgument(format!(
                "M = {} harmonics leave too few free parameters for K = {}, L = {}",
                self.m, self.k, self.l
            )));
        }
        if !self.angle.is_finite() || self.angle == 0.0 {
            return Err(PulseError::InvalidArgument(format!("target angle {} must be finite and nonzero", self.angle)));
        }
        self.model.validate()
    }
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        let scale = a.iter().map(|r| r[col].abs()).fold(0.0, f64::max);
        if a[pivot][col].abs() <= 1e-13 * scale.max(1.0) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Full coefficient vector [a0, a_1, …, a_M] from the M − L free cosine
/// coefficients: Σ a_m = −a0 and Σ m^{2j} a_m = 0 for j = 1..L−1.
pub fn eliminate_constraints(free: &[f64], goal: &DesignGoal) -> Result<Vec<f64>> {
    if free.len() != goal.free_count() {
        return Err(PulseError::InvalidArgument(format!("expected {} free coefficients, got {}", goal.free_count(), free.len())));
    }
    let a0 = goal.a0();
    let fixed = goal.m - goal.l;
    let mut rows = Vec::with_capacity(goal.l);
    let mut rhs = Vec::with_capacity(goal.l);
    for j in 0..goal.l {
        let weight = |m: usize| (m as f64).powi(2 * j as i32);
        rows.push((fixed + 1..=goal.m).map(weight).collect::<Vec<_>>());
        let known: f64 = free.iter().enumerate().map(|(i, a)| weight(i + 1) * a).sum();
        rhs.push(if j == 0 { -a0 } else { 0.0 } - known);
    }
    let solved = solve_dense(rows, rhs)
        .ok_or_else(|| PulseError::Singular(format!("end-point conditions for L = {}, M = {}", goal.l, goal.m)))?;
    let mut out = Vec::with_capacity(goal.m + 1);
    out.push(a0);
    out.extend_from_slice(free);
    out.extend(solved);
    Ok(out)
}

pub fn shape_from_coeffs(name: &str, coeffs: &[f64], goal: &DesignGoal) -> PulseShape {
    PulseShape::new(name, coeffs[0], coeffs[1..].to_vec(), Vec::new()).with_classes(goal.l, goal.k)
}

fn design_schedule(shape: &PulseShape) -> PulseSchedule {
    PulseSchedule::single_odd(AxisPulse::x(Arc::new(shape.clone())))
}

/// Clusters entering the objective: enumerate_clusters(K), or one pulsed
/// site when only the rotation itself is designed.
pub fn design_clusters(goal: &DesignGoal) -> Vec<ClusterSpec> {
    if goal.k == 0 || goal.model.is_free() {
        vec![ClusterSpec::single(Parity::Odd)]
    } else {
        enumerate_clusters(goal.k, &goal.model)
    }
}

fn mismatch_sq(frames: &[Mat2], cluster: &ClusterSpec, target: &Mat2) -> f64 {
    let want: Vec<Mat2> =
        (0..cluster.n_sites).map(|s| if cluster.parity(s) == Parity::Odd { *target } else { Mat2::IDENTITY }).collect();
    (&matcore::kron_sites(frames) - &matcore::kron_sites(&want)).frobenius_norm().powi(2)
}

/// Σ_clusters ‖U0 − U_target‖² + Σ_{k ≤ K} ‖R_k‖² for a single odd-site pulse
/// with coefficients [a0, a_1, …, a_M].
pub fn objective(coeffs: &[f64], goal: &DesignGoal) -> Result<f64> {
    if coeffs.is_empty() || (coeffs[0] - goal.a0()).abs() > 1e-12 {
        return Err(PulseError::InvalidArgument(format!("a0 must equal θ/2π = {}", goal.a0())));
    }
    objective_of_shape(&PulseShape::new("trial", coeffs[0], coeffs[1..].to_vec(), Vec::new()), goal)
}

fn objective_of_shape(shape: &PulseShape, goal: &DesignGoal) -> Result<f64> {
    let schedule = design_schedule(shape);
    let target = Mat2::rotation_xy(goal.angle, 0.0);
    let mut total = 0.0;
    for cluster in design_clusters(goal) {
        if goal.k == 0 || goal.model.is_free() {
            let u = propagate::bare_rotation(schedule.intervals[0].odd.as_ref(), goal.steps);
            total += mismatch_sq(&[u], &cluster, &target);
            continue;
        }
        let res = propagate::integrate_perturbative(&cluster, &goal.model, &schedule, goal.k, goal.steps)?;
        total += mismatch_sq(&res.frames, &cluster, &target);
        total += res.r.iter().map(|r| r.frobenius_norm().powi(2)).sum::<f64>();
    }
    if !total.is_finite() {
        return Err(PulseError::Numerical("objective is not finite".into()));
    }
    Ok(total)
}

fn reduced_objective(free: &[f64], goal: &DesignGoal) -> Result<f64> {
    objective(&eliminate_constraints(free, goal)?, goal)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnealOptions {
    pub t0: f64,
    pub decay: f64,
    pub sweeps: usize,
    pub proposal_sigma: f64,
    /// Half-width of the uniform start distribution of the free coefficients.
    pub init_range: f64,
    /// RK4 steps per interval while annealing; the log-objective only needs
    /// to be resolved coarsely there. Descent uses the goal's step count.
    pub anneal_steps: usize,
    pub descent_iterations: usize,
}

impl Default for AnnealOptions {
    fn default() -> Self {
        AnnealOptions { t0: 1.0, decay: 0.97, sweeps: 200, proposal_sigma: 0.05, init_range: 1.5, anneal_steps: 500, descent_iterations: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    /// Zero during steepest descent.
    #[serde(serialize_with = "serialize_sig")]
    pub temperature: f64,
    #[serde(serialize_with = "serialize_sig")]
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub shape: PulseShape,
    pub free: Vec<f64>,
    pub objective: f64,
    pub log: Vec<LogEntry>,
}

impl Design {
    /// Convergence log as CSV `iteration,temperature,objective`.
    pub fn log_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iteration", "temperature", "objective"]).expect("in-memory csv write");
        for e in &self.log {
            w.write_record([e.iteration.to_string(), fmt_sig(e.temperature), fmt_sig(e.objective)]).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }
}

/// Central-difference gradient of `f` at `p` with step `h`. Components are
/// independent, so they are evaluated concurrently when enabled.
pub fn fd_gradient<F>(f: F, p: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let component = |i: usize| -> Result<f64> {
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[i] += h;
        lo[i] -= h;
        Ok((f(&hi)? - f(&lo)?) / (2.0 * h))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..p.len()).into_par_iter().map(component).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..p.len()).map(component).collect()
    }
}

/// Largest relative change of the finite-difference gradient when the step
/// is halved from `h`; small values mean the objective is smooth at `p`.
pub fn gradient_self_check(free: &[f64], goal: &DesignGoal, h: f64) -> Result<f64> {
    let f = |p: &[f64]| reduced_objective(p, goal);
    let coarse = fd_gradient(f, free, h)?;
    let fine = fd_gradient(f, free, h / 2.0)?;
    let scale = fine.iter().map(|g| g.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(coarse.iter().zip(&fine).map(|(c, f)| (c - f).abs()).fold(0.0, f64::max) / scale)
}

fn anneal(goal: &DesignGoal, opts: &AnnealOptions, rng: &mut ChaCha8Rng, log: &mut Vec<LogEntry>) -> Result<(Vec<f64>, f64)> {
    let energy = |f: f64| f.max(1e-300).ln();
    let goal = &DesignGoal { steps: opts.anneal_steps.min(goal.steps), ..goal.clone() };
    let n = goal.free_count();
    let mut p: Vec<f64> = (0..n).map(|_| rng.gen_range(-opts.init_range..=opts.init_range)).collect();
    let mut f = reduced_objective(&p, goal)?;
    let (mut best, mut best_f) = (p.clone(), f);
    let step = Normal::new(0.0, opts.proposal_sigma).map_err(|e| PulseError::InvalidArgument(e.to_string()))?;
    let mut temperature = opts.t0;
    for sweep in 0..opts.sweeps {
        for i in 0..n {
            let mut trial = p.clone();
            trial[i] += step.sample(rng);
            let ft = reduced_objective(&trial, goal)?;
            let delta = energy(ft) - energy(f);
            let u: f64 = rng.gen();
            if delta <= 0.0 || u < (-delta / temperature).exp() {
                p = trial;
                f = ft;
                if f < best_f {
                    best = p.clone();
                    best_f = f;
                }
            }
        }
        log.push(LogEntry { iteration: sweep, temperature, objective: f });
        temperature *= opts.decay;
    }
    Ok((best, best_f))
}

// Barzilai-Borwein step lengths with Armijo backtracking.
fn descend(goal: &DesignGoal, opts: &AnnealOptions, mut p: Vec<f64>, mut f: f64, log: &mut Vec<LogEntry>) -> Result<(Vec<f64>, f64)> {
    let obj = |q: &[f64]| reduced_objective(q, goal);
    let first = log.len();
    let mut g = fd_gradient(obj, &p, 1e-6)?;
    let mut alpha = 1e-2 / norm(&g).max(1e-300);
    for it in 0..opts.descent_iterations {
        if f < goal.target {
            break;
        }
        let g2: f64 = g.iter().map(|x| x * x).sum();
        if g2 == 0.0 {
            break;
        }
        let mut accepted = None;
        let mut a = alpha;
        for _ in 0..60 {
            let trial: Vec<f64> = p.iter().zip(&g).map(|(x, gx)| x - a * gx).collect();
            let ft = obj(&trial)?;
            if ft <= f - 1e-4 * a * g2 {
                accepted = Some((trial, ft));
                break;
            }
            a *= 0.5;
        }
        let Some((next, fnext)) = accepted else { break };
        // gradient step scaled with the objective so it stays accurate near zero
        let h = (1e-6 * fnext.sqrt().sqrt()).clamp(1e-9, 1e-5);
        let gnext = fd_gradient(obj, &next, h)?;
        let s: Vec<f64> = next.iter().zip(&p).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnext.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|x| x * x).sum();
        alpha = if sy > 0.0 { ss / sy } else { 2.0 * a };
        p = next;
        f = fnext;
        g = gnext;
        log.push(LogEntry { iteration: first + it, temperature: 0.0, objective: f });
    }
    Ok((p, f))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Designs a pulse for `goal`. Deterministic for a given seed. Returns
/// `PulseError::NoConvergence` carrying the best design when the objective
/// stays at or above the acceptance value.
pub fn design_pulse(goal: &DesignGoal, seed: u64, opts: &AnnealOptions) -> Result<Design> {
    goal.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Vec::new();
    let (p, _) = anneal(goal, opts, &mut rng, &mut log)?;
    let f = reduced_objective(&p, goal)?;
    let (p, f) = descend(goal, opts, p, f, &mut log)?;
    let coeffs = eliminate_constraints(&p, goal)?;
    let name = format!("design-K{}-L{}-M{}-seed{}", goal.k, goal.l, goal.m, seed);
    let design = Design { shape: shape_from_coeffs(&name, &coeffs, goal), free: p, objective: f, log };
    if f < ACCEPT_OBJECTIVE {
        Ok(design)
    } else {
        Err(PulseError::NoConvergence { objective: f, best: Box::new(design) })
    }
}

/// Outcome of the certification checks applied to a pulse shape.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certification {
    pub shape: String,
    pub claimed_k: usize,
    /// Order the residual checks were run to.
    pub order: usize,
    #[serde(serialize_with = "crate::numfmt::serialize_sig_vec")]
    pub smoothness: Vec<f64>,
    #[serde(serialize_with = "serialize_sig")]
    pub angle_error: f64,
    #[serde(serialize_with = "serialize_sig")]
    pub rotation_error: f64,
    pub clusters: Vec<String>,
    /// ‖R_k‖_F, rows per cluster, columns k = 1..=K+1.
    #[serde(serialize_with = "crate::numfmt::serialize_sig_table")]
    pub residuals: Vec<Vec<Option<f64>>>,
    pub passes: bool,
}

impl Certification {
    /// Largest ‖R_k‖ over clusters.
    pub fn max_residual(&self, k: usize) -> f64 {
        self.residuals.iter().filter_map(|row| row.get(k - 1).copied().flatten()).fold(0.0, f64::max)
    }
}

pub const SMOOTHNESS_TOL: f64 = 1e-8;
pub const ANGLE_TOL: f64 = 1e-9;
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Bare-rotation agreement with the nominal rotation, set by the RK4 budget.
pub const ROTATION_TOL: f64 = 1e-8;

/// Checks smoothness residuals, the rotation angle and R_1..R_k on every
/// cluster of up to k + 2 sites (one more than the design used). R_{k+1} is
/// reported but not judged.
pub fn certify(shape: &PulseShape, model: &ChainModel, k: usize, steps: usize) -> Result<Certification> {
    let smoothness = shape.smoothness_residuals();
    let nominal = 2.0 * PI * shape.a0;
    let angle_error = (shape.rotation_angle() - nominal).abs().max((shape.angle_at(1.0) - nominal).abs());
    let pulse = AxisPulse::x(Arc::new(shape.clone()));
    let bare = propagate::bare_rotation(Some(&pulse), steps);
    let target = Mat2::rotation_xy(nominal, 0.0);
    let rotation_error = (&bare.to_cmatrix() - &target.to_cmatrix()).frobenius_norm();
    let schedule = design_schedule(shape);
    let mut clusters = Vec::new();
    let mut residuals = Vec::new();
    if !model.is_free() {
        for cluster in enumerate_clusters(k + 1, model) {
            let res = propagate::integrate_perturbative(&cluster, model, &schedule, k + 1, steps)?;
            clusters.push(cluster.label());
            residuals.push(res.residual_norms().into_iter().map(Some).collect::<Vec<_>>());
        }
    } else {
        clusters.push(ClusterSpec::chain(2, Parity::Odd).label());
        residuals.push(vec![Some(0.0); k + 1]);
    }
    let mut cert = Certification {
        shape: shape.name.clone(),
        claimed_k: shape.claimed_k,
        order: k,
        smoothness,
        angle_error,
        rotation_error,
        clusters,
        residuals,
        passes: false,
    };
    cert.passes = cert.smoothness.iter().all(|r| r.abs() <= SMOOTHNESS_TOL)
        && cert.angle_error <= ANGLE_TOL
        && cert.rotation_error <= ROTATION_TOL
        && (1..=k).all(|j| cert.max_residual(j) <= RESIDUAL_TOL);
    Ok(cert)
}

fn hermite_first_order_coefficient(beta: f64, sigma: f64, steps: usize, probe: &CMatrix) -> Result<f64> {
    let shape = pulseshape::hermite(beta, sigma);
    let cluster = ClusterSpec::chain(2, Parity::Odd);
    let res = propagate::integrate_perturbative(&cluster, &ChainModel::ising(1.0), &design_schedule(&shape), 1, steps)?;
    // R_1 = −i ∫H̃ is anti-Hermitian; its σ^yσ^z component is real after ×i
    Ok((probe.matmul(&res.r[0]).trace() * matcore::I).re / 4.0)
}

/// β of the Hermite reference that makes a single odd-site pulse first-order
/// self-refocusing on the Ising chain: scan for a sign change of the σ^yσ^z
/// part of R_1, then bisect. The σ^zσ^z part vanishes by the time symmetry
/// of the pulse.
pub fn calibrate_hermite_beta(sigma: f64, steps: usize) -> Result<f64> {
    let probe = matcore::kron_sites(&[Mat2::pauli_y(), Mat2::pauli_z()]);
    let value = |b: f64| hermite_first_order_coefficient(b, sigma, steps, &probe);
    let mut lo = 0.0;
    let mut f_lo = value(lo)?;
    let mut bracket = None;
    for i in 1..=40 {
        let hi = 0.1 * i as f64;
        let f_hi = value(hi)?;
        if f_lo.signum() != f_hi.signum() {
            bracket = Some((lo, hi, f_lo));
            break;
        }
        lo = hi;
        f_lo = f_hi;
    }
    let (mut a, mut b, mut fa) = bracket.ok_or_else(|| PulseError::Numerical("no first-order Hermite β in [0, 4]".into()))?;
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let fm = value(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
