//! Bare propagator, perturbative corrections and Magnus cumulants.
//!
//! With U(t) = U0(t) R(t) and U0' = -i H_C U0, the corrections obey
//! R_{k+1}' = -i H̃_S(t) R_k with H̃_S = U0† H_S U0 and R_0 = I. The control is
//! a sum of single-site terms, so U0 is stored as one 2x2 frame per site and
//! H̃_S is rebuilt at every RK4 stage from the stage values of those frames.

use crate::error::{PulseError, Result};
use crate::matcore::{self, CMatrix, Mat2, Mat4, C64, I, ONE};
use crate::sequences::PulseSchedule;
use crate::spinmodel::{self, ChainModel, ClusterSpec, LocalHamiltonian, LocalOp, SublatticePulses};

/// RK4 steps per interval τ.
pub const DEFAULT_STEPS: usize = 2000;
/// Step-density multiplier of the exact-evolution oracle.
pub const EXACT_STEP_FACTOR: usize = 4;
pub const MIN_STEPS: usize = 100;
/// Highest cumulant order converted from moments.
pub const MAX_CUMULANT_ORDER: usize = 4;
pub const MIN_QUADRATURE_GRID: usize = 200;

/// Bare propagator and corrections R_1..R_K at the end of a schedule.
#[derive(Clone, Debug)]
pub struct PerturbativeResult {
    /// U0 = ⊗ frames[site].
    pub frames: Vec<Mat2>,
    pub r: Vec<CMatrix>,
    pub steps_per_interval: usize,
    pub cluster: ClusterSpec,
}

impl PerturbativeResult {
    pub fn u0(&self) -> CMatrix {
        matcore::kron_sites(&self.frames)
    }

    pub fn order(&self) -> usize {
        self.r.len()
    }

    /// ‖R_k‖_F for k = 1..K.
    pub fn residual_norms(&self) -> Vec<f64> {
        self.r.iter().map(matcore::frobenius_norm).collect()
    }

    /// U0 (I + R_1 + … + R_k).
    pub fn truncated_propagator(&self, k: usize) -> CMatrix {
        let mut series = CMatrix::identity(self.cluster.dim());
        for rk in self.r.iter().take(k) {
            series.add_scaled(rk, ONE);
        }
        self.u0().matmul(&series)
    }
}

/// Frames and corrections accumulated over part of a schedule.
#[derive(Clone, Debug)]
pub struct FrameSeries {
    pub frames: Vec<Mat2>,
    pub r: Vec<CMatrix>,
}

impl FrameSeries {
    pub fn identity(n_sites: usize, order: usize) -> Self {
        let d = 1 << n_sites;
        FrameSeries { frames: vec![Mat2::IDENTITY; n_sites], r: vec![CMatrix::zeros(d); order] }
    }

    pub fn order(&self) -> usize {
        self.r.len()
    }

    pub fn truncated(&self, order: usize) -> FrameSeries {
        FrameSeries { frames: self.frames.clone(), r: self.r[..order.min(self.r.len())].to_vec() }
    }

    /// Series of `self` followed by `next`, both measured from their own start:
    /// R = (U0a† R_b U0a) R_a, U0 = U0b U0a.
    pub fn then(&self, next: &FrameSeries, order: usize) -> FrameSeries {
        assert!(self.order() >= order && next.order() >= order);
        let inv: Vec<Mat2> = self.frames.iter().map(Mat2::adjoint).collect();
        let trivial = self.frames.iter().all(|f| *f == Mat2::IDENTITY);
        let moved: Vec<CMatrix> = next.r[..order]
            .iter()
            .map(|m| if trivial { m.clone() } else { matcore::conjugate_by_sites(m, &inv) })
            .collect();
        let mut r = Vec::with_capacity(order);
        for k in 1..=order {
            let mut acc = moved[k - 1].clone();
            acc.add_scaled(&self.r[k - 1], ONE);
            for i in 1..k {
                acc.add_scaled(&moved[i - 1].matmul(&self.r[k - i - 1]), ONE);
            }
            r.push(acc);
        }
        let frames = next.frames.iter().zip(&self.frames).map(|(b, a)| *b * *a).collect();
        FrameSeries { frames, r }
    }

    /// W S W† for a product of site unitaries W (frames and corrections alike).
    pub fn conjugated(&self, w: &[Mat2]) -> FrameSeries {
        let frames = self.frames.iter().zip(w).map(|(f, u)| *u * *f * u.adjoint()).collect();
        let r = self.r.iter().map(|m| matcore::conjugate_by_sites(m, w)).collect();
        FrameSeries { frames, r }
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().all(CMatrix::is_finite) && self.frames.iter().all(|f| f.0.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }
}

/// H̃_S in per-bond form, with on-site terms folded into a bond when possible.
struct CompiledTerms {
    n: usize,
    pairs: Vec<(usize, usize, Mat4)>,
    sites: Vec<(usize, Mat2)>,
    // source term → (slot, placement) for rebuilding values at each stage
    plan: Vec<Placement>,
}

#[derive(Clone, Copy)]
enum Placement {
    Pair(usize),
    SiteInPair { slot: usize, left: bool },
    Site(usize),
}

impl CompiledTerms {
    fn new(h: &LocalHamiltonian) -> Self {
        let mut pairs: Vec<(usize, usize, Mat4)> = Vec::new();
        let mut sites: Vec<(usize, Mat2)> = Vec::new();
        let mut plan = Vec::new();
        for t in &h.terms {
            if let LocalOp::Pair { a, b, .. } = t.op {
                let slot = match pairs.iter().position(|p| p.0 == a && p.1 == b) {
                    Some(s) => s,
                    None => {
                        pairs.push((a, b, Mat4::zero()));
                        pairs.len() - 1
                    }
                };
                plan.push(Placement::Pair(slot));
            } else {
                plan.push(Placement::Site(usize::MAX));
            }
        }
        for (t, p) in h.terms.iter().zip(plan.iter_mut()) {
            if let LocalOp::Site { site, .. } = t.op {
                *p = match pairs.iter().position(|q| q.0 == site || q.1 == site) {
                    Some(slot) => Placement::SiteInPair { slot, left: pairs[slot].0 == site },
                    None => {
                        sites.push((site, Mat2::ZERO));
                        Placement::Site(sites.len() - 1)
                    }
                };
            }
        }
        CompiledTerms { n: h.n_sites, pairs, sites, plan }
    }

    /// Fills the operator values with U0† h U0 for U0 = ⊗ frames.
    fn update(&mut self, h: &LocalHamiltonian, frames: &[Mat2]) {
        for p in &mut self.pairs {
            p.2 = Mat4::zero();
        }
        for s in &mut self.sites {
            s.1 = Mat2::ZERO;
        }
        for (t, place) in h.terms.iter().zip(&self.plan) {
            match (&t.op, *place) {
                (LocalOp::Pair { a, b, op }, Placement::Pair(slot)) => {
                    let c = op.conjugated(&frames[*a], &frames[*b]);
                    self.pairs[slot].2.add_scaled(&c, ONE);
                }
                (LocalOp::Site { site, op }, placement) => {
                    let f = frames[*site];
                    let c = f.adjoint() * *op * f;
                    match placement {
                        Placement::SiteInPair { slot, left } => {
                            let m = if left { Mat4::kron(&c, &Mat2::IDENTITY) } else { Mat4::kron(&Mat2::IDENTITY, &c) };
                            self.pairs[slot].2.add_scaled(&m, ONE);
                        }
                        Placement::Site(slot) => self.sites[slot].1 = self.sites[slot].1 + c,
                        Placement::Pair(_) => unreachable!(),
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    /// acc += s · H src
    fn apply(&self, acc: &mut CMatrix, s: C64, src: &CMatrix) {
        for (a, b, op) in &self.pairs {
            matcore::apply_pair_left_acc(acc, op, s, *a, *b, self.n, src);
        }
        for (site, op) in &self.sites {
            matcore::apply_site_left_acc(acc, op, s, *site, self.n, src);
        }
    }

    /// acc += s · H
    fn add_dense(&self, acc: &mut CMatrix, s: C64) {
        for (a, b, op) in &self.pairs {
            matcore::add_pair_embedded(acc, op, s, *a, *b, self.n);
        }
        for (site, op) in &self.sites {
            matcore::add_site_embedded(acc, op, s, *site, self.n);
        }
    }
}

/// Per-site control generators of an interval at local time t ∈ [0, 1].
fn site_generators(interval: &SublatticePulses, cluster: &ClusterSpec, t: f64) -> Vec<Option<Mat2>> {
    let odd = interval.odd.as_ref().map(|p| p.generator(t));
    let even = interval.even.as_ref().map(|p| p.generator(t));
    (0..cluster.n_sites)
        .map(|s| match cluster.parity(s) {
            spinmodel::Parity::Odd => odd,
            spinmodel::Parity::Even => even,
        })
        .collect()
}

fn frame_derivative(gens: &[Option<Mat2>], frames: &[Mat2]) -> Vec<Mat2> {
    gens.iter()
        .zip(frames)
        .map(|(g, f)| match g {
            Some(g) => (*g * *f).scale(-I),
            None => Mat2::ZERO,
        })
        .collect()
}

fn axpy_frames(base: &[Mat2], k: &[Mat2], h: f64) -> Vec<Mat2> {
    let s = C64::new(h, 0.0);
    base.iter().zip(k).map(|(b, k)| *b + k.scale(s)).collect()
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < MIN_STEPS {
        return Err(PulseError::InvalidArgument(format!("step count {steps} below minimum {MIN_STEPS}")));
    }
    Ok(())
}

/// Advances frames and corrections through one interval of duration τ
/// with classical fixed-step RK4.
pub fn advance_interval(
    state: &mut FrameSeries,
    h: &LocalHamiltonian,
    cluster: &ClusterSpec,
    interval: &SublatticePulses,
    steps: usize,
) -> Result<()> {
    advance(state, h, cluster, interval, steps, false)
}

// With `remainder`, the last matrix E obeys E' = -i H̃ (R_K + E), so that
// R = I + R_1 + … + R_K + E exactly.
fn advance(
    state: &mut FrameSeries,
    h: &LocalHamiltonian,
    cluster: &ClusterSpec,
    interval: &SublatticePulses,
    steps: usize,
    remainder: bool,
) -> Result<()> {
    check_steps(steps)?;
    let order = state.order();
    let n = cluster.n_sites;
    let d = 1 << n;
    let dt = 1.0 / steps as f64;
    let mut compiled = CompiledTerms::new(h);
    let coupled = !h.is_zero() && order > 0;

    let mut k_r = vec![CMatrix::zeros(d); order];
    let mut stage_r = state.r.clone();
    let mut acc_r = state.r.clone();
    let minus_i = -I;

    let mut eval = |t: f64, frames: &[Mat2], stage_r: &[CMatrix], k_r: &mut [CMatrix]| -> Vec<Mat2> {
        let gens = site_generators(interval, cluster, t);
        let kf = frame_derivative(&gens, frames);
        if coupled {
            compiled.update(h, frames);
            for m in k_r.iter_mut() {
                m.as_mut_slice().fill(matcore::ZERO);
            }
            compiled.add_dense(&mut k_r[0], minus_i);
            for k in 1..k_r.len() {
                compiled.apply(&mut k_r[k], minus_i, &stage_r[k - 1]);
            }
            if remainder {
                let last = k_r.len() - 1;
                compiled.apply(&mut k_r[last], minus_i, &stage_r[last]);
            }
        }
        kf
    };

    for step in 0..steps {
        let t = step as f64 * dt;
        let frames0 = state.frames.clone();

        let kf1 = eval(t, &frames0, &state.r, &mut k_r);
        let mut acc_f = axpy_frames(&frames0, &kf1, dt / 6.0);
        let stage_f = axpy_frames(&frames0, &kf1, dt / 2.0);
        if coupled {
            for k in 0..order {
                acc_r[k] = state.r[k].clone();
                acc_r[k].add_scaled(&k_r[k], C64::new(dt / 6.0, 0.0));
                stage_r[k] = state.r[k].clone();
                stage_r[k].add_scaled(&k_r[k], C64::new(dt / 2.0, 0.0));
            }
        }

        let kf2 = eval(t + dt / 2.0, &stage_f, &stage_r, &mut k_r);
        acc_f = axpy_frames(&acc_f, &kf2, dt / 3.0);
        let stage_f = axpy_frames(&frames0, &kf2, dt / 2.0);
        if coupled {
            for k in 0..order {
                acc_r[k].add_scaled(&k_r[k], C64::new(dt / 3.0, 0.0));
                stage_r[k] = state.r[k].clone();
                stage_r[k].add_scaled(&k_r[k], C64::new(dt / 2.0, 0.0));
            }
        }

        let kf3 = eval(t + dt / 2.0, &stage_f, &stage_r, &mut k_r);
        acc_f = axpy_frames(&acc_f, &kf3, dt / 3.0);
        let stage_f = axpy_frames(&frames0, &kf3, dt);
        if coupled {
            for k in 0..order {
                acc_r[k].add_scaled(&k_r[k], C64::new(dt / 3.0, 0.0));
                stage_r[k] = state.r[k].clone();
                stage_r[k].add_scaled(&k_r[k], C64::new(dt, 0.0));
            }
        }

        let kf4 = eval(t + dt, &stage_f, &stage_r, &mut k_r);
        state.frames = axpy_frames(&acc_f, &kf4, dt / 6.0);
        if coupled {
            for k in 0..order {
                acc_r[k].add_scaled(&k_r[k], C64::new(dt / 6.0, 0.0));
                std::mem::swap(&mut state.r[k], &mut acc_r[k]);
            }
        }
    }
    if !state.is_finite() {
        return Err(PulseError::Numerical(format!("non-finite propagator after {steps} steps")));
    }
    Ok(())
}

/// Frames and R_1..R_order over one interval starting from the identity.
pub fn integrate_interval(
    h: &LocalHamiltonian,
    cluster: &ClusterSpec,
    interval: &SublatticePulses,
    order: usize,
    steps: usize,
) -> Result<FrameSeries> {
    let mut state = FrameSeries::identity(cluster.n_sites, order);
    advance_interval(&mut state, h, cluster, interval, steps)?;
    Ok(state)
}

/// Integrates U0 and R_1..R_K over the whole schedule in one pass.
pub fn integrate_perturbative(
    cluster: &ClusterSpec,
    model: &ChainModel,
    schedule: &PulseSchedule,
    order: usize,
    steps: usize,
) -> Result<PerturbativeResult> {
    if order == 0 {
        return Err(PulseError::InvalidArgument("perturbative order must be at least 1".into()));
    }
    let h = spinmodel::internal_terms(model, cluster)?;
    let mut state = FrameSeries::identity(cluster.n_sites, order);
    for interval in &schedule.intervals {
        advance_interval(&mut state, &h, cluster, interval, steps)?;
    }
    Ok(PerturbativeResult { frames: state.frames, r: state.r, steps_per_interval: steps, cluster: cluster.clone() })
}

/// R_1..R_K together with the exact remainder E = R - I - R_1 - … - R_K.
///
/// ‖U - U0(I + ΣR_k)‖_F = ‖U0 E‖_F, obtained without subtracting two
/// nearly equal propagators, so it stays accurate far below the rounding
/// floor of a direct difference.
pub fn integrate_remainder(
    cluster: &ClusterSpec,
    model: &ChainModel,
    schedule: &PulseSchedule,
    order: usize,
    steps: usize,
) -> Result<(PerturbativeResult, CMatrix)> {
    let h = spinmodel::internal_terms(model, cluster)?;
    let mut state = FrameSeries::identity(cluster.n_sites, order + 1);
    for interval in &schedule.intervals {
        advance(&mut state, &h, cluster, interval, steps, true)?;
    }
    let e = state.r.pop().expect("remainder slot");
    Ok((PerturbativeResult { frames: state.frames, r: state.r, steps_per_interval: steps, cluster: cluster.clone() }, e))
}

/// Full evolution U' = -i [H_C + H_S] U, integrated with RK4 at `steps` per interval.
pub fn integrate_exact(cluster: &ClusterSpec, model: &ChainModel, schedule: &PulseSchedule, steps: usize) -> Result<CMatrix> {
    check_steps(steps)?;
    let h = spinmodel::internal_terms(model, cluster)?;
    let mut compiled = CompiledTerms::new(&h);
    compiled.update(&h, &vec![Mat2::IDENTITY; cluster.n_sites]);
    let n = cluster.n_sites;
    let d = 1 << n;
    let dt = 1.0 / steps as f64;
    let mut u = CMatrix::identity(d);

    let deriv = |t: f64, interval: &SublatticePulses, u: &CMatrix| -> CMatrix {
        let mut k = CMatrix::zeros(d);
        compiled.apply(&mut k, -I, u);
        for (site, g) in site_generators(interval, cluster, t).into_iter().enumerate() {
            if let Some(g) = g {
                matcore::apply_site_left_acc(&mut k, &g, -I, site, n, u);
            }
        }
        k
    };

    for interval in &schedule.intervals {
        for step in 0..steps {
            let t = step as f64 * dt;
            let k1 = deriv(t, interval, &u);
            let mut y = u.clone();
            y.add_scaled(&k1, C64::new(dt / 2.0, 0.0));
            let k2 = deriv(t + dt / 2.0, interval, &y);
            let mut y = u.clone();
            y.add_scaled(&k2, C64::new(dt / 2.0, 0.0));
            let k3 = deriv(t + dt / 2.0, interval, &y);
            let mut y = u.clone();
            y.add_scaled(&k3, C64::new(dt, 0.0));
            let k4 = deriv(t + dt, interval, &y);
            u.add_scaled(&k1, C64::new(dt / 6.0, 0.0));
            u.add_scaled(&k2, C64::new(dt / 3.0, 0.0));
            u.add_scaled(&k3, C64::new(dt / 3.0, 0.0));
            u.add_scaled(&k4, C64::new(dt / 6.0, 0.0));
        }
    }
    if !u.is_finite() {
        return Err(PulseError::Numerical(format!("non-finite propagator after {steps} steps per interval")));
    }
    Ok(u)
}

/// Magnus cumulants C_1..C_K from moments R_1..R_K, by matching
/// exp(ΣC) = I + ΣR order by order (the truncated log series).
pub fn cumulants_from_moments(r: &[CMatrix]) -> Result<Vec<CMatrix>> {
    let order = r.len();
    if order > MAX_CUMULANT_ORDER {
        return Err(PulseError::UnsupportedOrder {
            order,
            message: format!("cumulant conversion is provided up to order {MAX_CUMULANT_ORDER}"),
        });
    }
    if order == 0 {
        return Ok(Vec::new());
    }
    let d = r[0].dim();
    // powers[p][k]: order-(k+1) part of X^p, X = Σ R_k
    let mut power: Vec<CMatrix> = r.to_vec();
    let mut c: Vec<CMatrix> = r.to_vec();
    for p in 2..=order {
        let mut next = vec![CMatrix::zeros(d); order];
        for k in p..=order {
            // order-k part of X^{p-1}·X
            for j in 1..k {
                if k - j >= p - 1 {
                    next[k - 1].add_scaled(&power[k - j - 1].matmul(&r[j - 1]), ONE);
                }
            }
        }
        let coeff = if p % 2 == 0 { -1.0 } else { 1.0 } / p as f64;
        for k in p..=order {
            c[k - 1].add_scaled(&next[k - 1], C64::new(coeff, 0.0));
        }
        power = next;
    }
    Ok(c)
}

/// Per-site frame trajectories sampled at `grid` equal sub-intervals of
/// every interval, integrated with `sub` RK4 substeps between samples.
pub fn frame_trajectory(cluster: &ClusterSpec, schedule: &PulseSchedule, grid: usize, sub: usize) -> Vec<Vec<Mat2>> {
    let n = cluster.n_sites;
    let mut frames = vec![Mat2::IDENTITY; n];
    let mut out = vec![frames.clone()];
    let h = 1.0 / (grid * sub) as f64;
    for interval in &schedule.intervals {
        let mut t = 0.0;
        for _ in 0..grid {
            for _ in 0..sub {
                let g1 = site_generators(interval, cluster, t);
                let k1 = frame_derivative(&g1, &frames);
                let gm = site_generators(interval, cluster, t + h / 2.0);
                let k2 = frame_derivative(&gm, &axpy_frames(&frames, &k1, h / 2.0));
                let k3 = frame_derivative(&gm, &axpy_frames(&frames, &k2, h / 2.0));
                let g4 = site_generators(interval, cluster, t + h);
                let k4 = frame_derivative(&g4, &axpy_frames(&frames, &k3, h));
                frames = axpy_frames(&frames, &k1, h / 6.0);
                frames = axpy_frames(&frames, &k2, h / 3.0);
                frames = axpy_frames(&frames, &k3, h / 3.0);
                frames = axpy_frames(&frames, &k4, h / 6.0);
                t += h;
            }
            out.push(frames.clone());
        }
    }
    out
}

/// C_2 = -(1/2) ∫dt2 ∫^{t2} dt1 [H̃_S(t2), H̃_S(t1)] by nested composite
/// trapezoid on the sample grid, with one Richardson step (grid and grid/2).
/// The later time stands on the left, as required by R_2 - R_1²/2.
pub fn magnus_c2_quadrature(cluster: &ClusterSpec, model: &ChainModel, schedule: &PulseSchedule, grid: usize) -> Result<CMatrix> {
    if grid < MIN_QUADRATURE_GRID {
        return Err(PulseError::InvalidArgument(format!("quadrature grid {grid} below minimum {MIN_QUADRATURE_GRID}")));
    }
    let grid = grid + grid % 2;
    let hs = spinmodel::build_internal(model, cluster)?;
    let sub = (8000 / grid).max(1);
    let traj = frame_trajectory(cluster, schedule, grid, sub);
    let rotated: Vec<CMatrix> = traj
        .iter()
        .map(|f| {
            let inv: Vec<Mat2> = f.iter().map(Mat2::adjoint).collect();
            matcore::conjugate_by_sites(&hs, &inv)
        })
        .collect();

    let trapezoid = |stride: usize| -> CMatrix {
        let h = stride as f64 / grid as f64;
        let d = hs.dim();
        let mut inner = CMatrix::zeros(d);
        let mut outer = CMatrix::zeros(d);
        let nodes: Vec<&CMatrix> = rotated.iter().step_by(stride).collect();
        let mut prev_g = CMatrix::zeros(d);
        for (j, node) in nodes.iter().enumerate() {
            if j > 0 {
                inner.add_scaled(nodes[j - 1], C64::new(h / 2.0, 0.0));
                inner.add_scaled(node, C64::new(h / 2.0, 0.0));
            }
            let g = node.commutator(&inner);
            if j > 0 {
                outer.add_scaled(&prev_g, C64::new(h / 2.0, 0.0));
                outer.add_scaled(&g, C64::new(h / 2.0, 0.0));
            }
            prev_g = g;
        }
        outer.scale_real(-0.5)
    };
    let fine = trapezoid(1);
    let coarse = trapezoid(2);
    let mut c2 = fine.scale_real(4.0 / 3.0);
    c2.add_scaled(&coarse, C64::new(-1.0 / 3.0, 0.0));
    Ok(c2)
}

/// Single-site bare propagator of one interval (2x2), RK4 with `steps`.
pub fn bare_rotation(pulse: Option<&spinmodel::AxisPulse>, steps: usize) -> Mat2 {
    let interval = SublatticePulses { odd: pulse.cloned(), even: None };
    let cluster = ClusterSpec::single(spinmodel::Parity::Odd);
    frame_trajectory(&cluster, &PulseSchedule::new(vec![interval]), 1, steps).last().unwrap()[0]
}
