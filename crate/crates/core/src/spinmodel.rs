//! Chain Hamiltonians on finite clusters, control generators, and the cluster
//! list needed to analyse an infinite nearest-neighbour chain to a given order.
//!
//! Time is measured in units of the pulse period τ and couplings in units of
//! 1/τ, so `jz` below is the dimensionless product J_z τ.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PulseError, Result};
use crate::matcore::{self, CMatrix, Mat2, Mat4, C64, MAX_QUBITS};
use crate::pulseshape::PulseShape;

/// Sublattice of a chain site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn flip(self) -> Parity {
        match self {
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
        }
    }

    pub fn digit(self) -> char {
        match self {
            Parity::Odd => '1',
            Parity::Even => '2',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ising,
    Xxz,
    Bath,
    /// Free chain, all couplings zero.
    None,
    Custom,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::Ising => "ising",
            ModelKind::Xxz => "xxz",
            ModelKind::Bath => "bath",
            ModelKind::None => "none",
            ModelKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Static random on-site fields ½ B_n (axis · σ_n), B_n uniform on [-b, b].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathFields {
    /// Amplitude scale b τ.
    pub b: f64,
    /// Field direction; the bath preset uses the z axis.
    pub axis: [f64; 3],
    pub seed: u64,
    /// Whether fields act on odd / even sites.
    pub on_odd: bool,
    pub on_even: bool,
}

impl BathFields {
    pub fn z(b: f64, seed: u64) -> Self {
        BathFields { b, axis: [0.0, 0.0, 1.0], seed, on_odd: true, on_even: true }
    }

    pub fn acts_on(&self, parity: Parity) -> bool {
        match parity {
            Parity::Odd => self.on_odd,
            Parity::Even => self.on_even,
        }
    }

    /// Field amplitude at a cluster site, fixed by (seed, parity, index).
    pub fn field(&self, parity: Parity, index: usize) -> f64 {
        let tag = (index as u64) << 1 | (parity == Parity::Even) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tag);
        if self.b == 0.0 {
            return 0.0;
        }
        rng.gen_range(-self.b..=self.b)
    }
}

/// Coupling constants of the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    pub name: ModelKind,
    pub jz: f64,
    pub jperp: f64,
    pub bath: Option<BathFields>,
}

/// Default J_⊥/J_z ratio for the xxz preset.
pub const XXZ_RATIO: f64 = 0.3;

impl ChainModel {
    pub fn ising(jz: f64) -> Self {
        ChainModel { name: ModelKind::Ising, jz, jperp: 0.0, bath: None }
    }

    pub fn xxz(jz: f64, jperp: f64) -> Self {
        ChainModel { name: ModelKind::Xxz, jz, jperp, bath: None }
    }

    pub fn bath(jz: f64, b: f64, seed: u64) -> Self {
        ChainModel { name: ModelKind::Bath, jz, jperp: 0.0, bath: Some(BathFields::z(b, seed)) }
    }

    pub fn none() -> Self {
        ChainModel { name: ModelKind::None, jz: 0.0, jperp: 0.0, bath: None }
    }

    /// Named preset with all dimensionless couplings set to one
    /// (J_⊥ = 0.3 J_z for xxz, bath seed 1).
    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ising" => Ok(Self::ising(1.0)),
            "xxz" => Ok(Self::xxz(1.0, XXZ_RATIO)),
            "bath" => Ok(Self::bath(1.0, 1.0, 1)),
            "none" | "free" => Ok(Self::none()),
            other => Err(PulseError::UnknownModel(other.to_string())),
        }
    }

    /// All couplings multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut m = self.clone();
        m.jz *= lambda;
        m.jperp *= lambda;
        if let Some(b) = m.bath.as_mut() {
            b.b *= lambda;
        }
        m
    }

    pub fn is_free(&self) -> bool {
        self.jz == 0.0 && self.jperp == 0.0 && self.bath.as_ref().is_none_or(|b| b.b == 0.0)
    }

    /// Checks the preset invariants for the tagged model kinds.
    pub fn validate(&self) -> Result<()> {
        let ok = match self.name {
            ModelKind::Ising => self.jperp == 0.0 && self.bath.is_none(),
            ModelKind::Xxz => self.jperp != 0.0 && self.bath.is_none(),
            ModelKind::Bath => {
                self.jz != 0.0
                    && self.jperp == 0.0
                    && self.bath.as_ref().is_some_and(|b| b.axis[0] == 0.0 && b.axis[1] == 0.0)
            }
            ModelKind::None => self.is_free(),
            ModelKind::Custom => true,
        };
        if ok {
            Ok(())
        } else {
            Err(PulseError::InvalidArgument(format!("couplings inconsistent with model tag `{}`", self.name)))
        }
    }
}

/// Nearest-neighbour bond between `left` and `left + 1`, with a coupling weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub left: usize,
    pub weight: f64,
}

/// A finite contiguous piece of the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub n_sites: usize,
    pub first: Parity,
    pub bonds: Vec<Bond>,
}

impl ClusterSpec {
    /// Open chain of `n_sites` with unit bond weights.
    pub fn chain(n_sites: usize, first: Parity) -> Self {
        assert!(n_sites >= 1);
        let bonds = (0..n_sites.saturating_sub(1)).map(|left| Bond { left, weight: 1.0 }).collect();
        ClusterSpec { n_sites, first, bonds }
    }

    pub fn single(parity: Parity) -> Self {
        Self::chain(1, parity)
    }

    pub fn parity(&self, site: usize) -> Parity {
        if site.is_multiple_of(2) {
            self.first
        } else {
            self.first.flip()
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn label(&self) -> String {
        let p = match self.first {
            Parity::Odd => "odd",
            Parity::Even => "even",
        };
        format!("{}-site {}-first", self.n_sites, p)
    }

    pub fn check_capacity(&self) -> Result<()> {
        if self.n_sites > MAX_QUBITS {
            return Err(PulseError::Capacity { n: self.n_sites, max: MAX_QUBITS });
        }
        Ok(())
    }
}

/// Coupling family a Hamiltonian term belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingTerm {
    Ising,
    Perp,
    BathOdd,
    BathEven,
}

impl CouplingTerm {
    pub const ALL: [CouplingTerm; 4] = [CouplingTerm::Ising, CouplingTerm::Perp, CouplingTerm::BathOdd, CouplingTerm::BathEven];

    pub fn name(self) -> &'static str {
        match self {
            CouplingTerm::Ising => "ising",
            CouplingTerm::Perp => "perp",
            CouplingTerm::BathOdd => "bath-odd",
            CouplingTerm::BathEven => "bath-even",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LocalOp {
    Site { site: usize, op: Mat2 },
    Pair { a: usize, b: usize, op: Mat4 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    pub tag: CouplingTerm,
    pub op: LocalOp,
}

/// Internal Hamiltonian as a sum of one- and two-site terms.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalHamiltonian {
    pub n_sites: usize,
    pub terms: Vec<LocalTerm>,
}

impl LocalHamiltonian {
    pub fn dense(&self) -> CMatrix {
        let d = 1 << self.n_sites;
        let id = CMatrix::identity(d);
        let mut h = CMatrix::zeros(d);
        for t in &self.terms {
            match &t.op {
                LocalOp::Site { site, op } => matcore::apply_site_left_acc(&mut h, op, matcore::ONE, *site, self.n_sites, &id),
                LocalOp::Pair { a, b, op } => matcore::apply_pair_left_acc(&mut h, op, matcore::ONE, *a, *b, self.n_sites, &id),
            }
        }
        h
    }

    /// Keeps only terms of the given families.
    pub fn filtered(&self, keep: &[CouplingTerm]) -> LocalHamiltonian {
        LocalHamiltonian { n_sites: self.n_sites, terms: self.terms.iter().filter(|t| keep.contains(&t.tag)).cloned().collect() }
    }

    pub fn tags(&self) -> Vec<CouplingTerm> {
        let mut tags: Vec<CouplingTerm> = self.terms.iter().map(|t| t.tag).collect();
        tags.sort();
        tags.dedup();
        tags
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Bit pattern identifying the operator content, used as a cache key.
    pub fn fingerprint(&self) -> Vec<u64> {
        let mut key = vec![self.n_sites as u64];
        for t in &self.terms {
            match &t.op {
                LocalOp::Site { site, op } => {
                    key.push(1 << 32 | *site as u64);
                    key.extend(op.0.iter().flat_map(|c| [c.re.to_bits(), c.im.to_bits()]));
                }
                LocalOp::Pair { a, b, op } => {
                    key.push(2 << 32 | (*a as u64) << 16 | *b as u64);
                    key.extend(op.0.iter().flat_map(|c| [c.re.to_bits(), c.im.to_bits()]));
                }
            }
        }
        key
    }
}

fn pauli_pair(mu: usize, nu: usize) -> Mat4 {
    Mat4::kron(&Mat2::pauli(mu), &Mat2::pauli(nu))
}

/// Local-term form of (1/4)Σ_bonds [J_z σ^zσ^z + J_⊥(σ^xσ^x + σ^yσ^y)] + (1/2)Σ_n B_n σ_n.
pub fn internal_terms(model: &ChainModel, cluster: &ClusterSpec) -> Result<LocalHamiltonian> {
    cluster.check_capacity()?;
    let mut terms = Vec::new();
    for bond in &cluster.bonds {
        let (a, b) = (bond.left, bond.left + 1);
        if b >= cluster.n_sites {
            return Err(PulseError::SiteOutOfRange { site: b, n: cluster.n_sites });
        }
        let jz = 0.25 * model.jz * bond.weight;
        if jz != 0.0 {
            let mut op = Mat4::zero();
            op.add_scaled(&pauli_pair(2, 2), C64::new(jz, 0.0));
            terms.push(LocalTerm { tag: CouplingTerm::Ising, op: LocalOp::Pair { a, b, op } });
        }
        let jp = 0.25 * model.jperp * bond.weight;
        if jp != 0.0 {
            let mut op = Mat4::zero();
            op.add_scaled(&pauli_pair(0, 0), C64::new(jp, 0.0));
            op.add_scaled(&pauli_pair(1, 1), C64::new(jp, 0.0));
            terms.push(LocalTerm { tag: CouplingTerm::Perp, op: LocalOp::Pair { a, b, op } });
        }
    }
    if let Some(bath) = &model.bath {
        for site in 0..cluster.n_sites {
            let parity = cluster.parity(site);
            if !bath.acts_on(parity) {
                continue;
            }
            let amp = 0.5 * bath.field(parity, site);
            if amp == 0.0 {
                continue;
            }
            let op = (0..3).fold(Mat2::ZERO, |acc, mu| acc + Mat2::pauli(mu).scale(C64::new(amp * bath.axis[mu], 0.0)));
            let tag = match parity {
                Parity::Odd => CouplingTerm::BathOdd,
                Parity::Even => CouplingTerm::BathEven,
            };
            terms.push(LocalTerm { tag, op: LocalOp::Site { site, op } });
        }
    }
    Ok(LocalHamiltonian { n_sites: cluster.n_sites, terms })
}

/// Dense internal Hamiltonian H_S (+ static bath fields) on a cluster.
pub fn build_internal(model: &ChainModel, cluster: &ClusterSpec) -> Result<CMatrix> {
    Ok(internal_terms(model, cluster)?.dense())
}

/// Control applied to one sublattice during an interval: V^x = sV cos φ, V^y = sV sin φ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisPulse {
    pub shape: Arc<PulseShape>,
    /// Axis phase in [0, 2π): 0 is x, π/2 is y.
    pub phase: f64,
    /// ±1
    pub sign: f64,
    /// Multiplies the whole envelope; 1 for nominal pulses.
    pub amplitude: f64,
}

impl AxisPulse {
    pub fn new(shape: Arc<PulseShape>, phase: f64, sign: f64) -> Self {
        AxisPulse { shape, phase: phase.rem_euclid(2.0 * PI), sign, amplitude: 1.0 }
    }

    pub fn x(shape: Arc<PulseShape>) -> Self {
        Self::new(shape, 0.0, 1.0)
    }

    /// Phase after folding the sign into the axis.
    pub fn effective_phase(&self) -> f64 {
        if self.sign < 0.0 {
            (self.phase + PI).rem_euclid(2.0 * PI)
        } else {
            self.phase
        }
    }

    /// Single-site generator ½ s a V(t) Ω (cos φ X + sin φ Y), t in units of τ.
    pub fn generator(&self, t: f64) -> Mat2 {
        let v = 0.5 * self.sign * self.amplitude * self.shape.value(t) * 2.0 * PI;
        let e = C64::from_polar(v, self.phase);
        Mat2([matcore::ZERO, e.conj(), e, matcore::ZERO])
    }
}

/// Per-sublattice control assignment for one interval; `None` is idle.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SublatticePulses {
    pub odd: Option<AxisPulse>,
    pub even: Option<AxisPulse>,
}

impl SublatticePulses {
    pub fn idle() -> Self {
        Self::default()
    }

    pub fn get(&self, parity: Parity) -> Option<&AxisPulse> {
        match parity {
            Parity::Odd => self.odd.as_ref(),
            Parity::Even => self.even.as_ref(),
        }
    }

    pub fn is_idle(&self) -> bool {
        self.odd.is_none() && self.even.is_none()
    }
}

/// Dense control Hamiltonian H_C(t) on a cluster, t in units of τ.
pub fn build_control(assignments: &SublatticePulses, t: f64, cluster: &ClusterSpec) -> Result<CMatrix> {
    if !(0.0..1.0).contains(&t) {
        return Err(PulseError::TimeOutOfRange { t, period: 1.0 });
    }
    cluster.check_capacity()?;
    let n = cluster.n_sites;
    let id = CMatrix::identity(1 << n);
    let mut h = CMatrix::zeros(1 << n);
    for site in 0..n {
        if let Some(p) = assignments.get(cluster.parity(site)) {
            matcore::apply_site_left_acc(&mut h, &p.generator(t), matcore::ONE, site, n, &id);
        }
    }
    Ok(h)
}

/// Clusters needed for order-`k` analysis of the infinite chain: contiguous
/// chains of 2..=k+1 sites at both sublattice offsets, plus single sites when
/// on-site fields are present. Sorted by size, odd-first before even-first.
pub fn enumerate_clusters(k: usize, model: &ChainModel) -> Vec<ClusterSpec> {
    let mut out = Vec::new();
    let has_fields = model.bath.as_ref().is_some_and(|b| b.b != 0.0 && (b.on_odd || b.on_even));
    if has_fields {
        for p in [Parity::Odd, Parity::Even] {
            out.push(ClusterSpec::single(p));
        }
    }
    for n in 2..=k + 1 {
        for p in [Parity::Odd, Parity::Even] {
            out.push(ClusterSpec::chain(n, p));
        }
    }
    out
}
