//! Dense complex matrices and multi-qubit operator embedding.
//!
//! Tensor slot 0 is the leftmost (slowest) factor everywhere in the crate, so
//! site `k` of an `n`-qubit register lives at bit `n - 1 - k` of a basis index.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{PulseError, Result};

pub type C64 = Complex64;

/// Largest register the embedding routines accept.
pub const MAX_QUBITS: usize = 10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// A 2x2 complex matrix stored row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [C64; 4]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([ONE, ZERO, ZERO, ONE]);
    pub const ZERO: Mat2 = Mat2([ZERO; 4]);

    pub fn pauli_x() -> Self {
        Mat2([ZERO, ONE, ONE, ZERO])
    }

    pub fn pauli_y() -> Self {
        Mat2([ZERO, -I, I, ZERO])
    }

    pub fn pauli_z() -> Self {
        Mat2([ONE, ZERO, ZERO, -ONE])
    }

    /// Pauli matrix by axis index (0 = x, 1 = y, 2 = z).
    pub fn pauli(axis: usize) -> Self {
        match axis {
            0 => Self::pauli_x(),
            1 => Self::pauli_y(),
            2 => Self::pauli_z(),
            _ => panic!("pauli axis {axis} out of range"),
        }
    }

    /// exp(-i angle/2 (cos(phase) X + sin(phase) Y)).
    pub fn rotation_xy(angle: f64, phase: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        let e = C64::from_polar(1.0, phase);
        // -i sin(a/2) (cos p X + sin p Y) has off-diagonals -i s e^{-ip}, -i s e^{ip}
        Mat2([C64::new(c, 0.0), -I * s * e.conj(), -I * s * e, C64::new(c, 0.0)])
    }

    /// exp(-i angle/2 Z).
    pub fn rotation_z(angle: f64) -> Self {
        Mat2([C64::from_polar(1.0, -angle / 2.0), ZERO, ZERO, C64::from_polar(1.0, angle / 2.0)])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([m[0].conj(), m[2].conj(), m[1].conj(), m[3].conj()])
    }

    pub fn scale(&self, s: C64) -> Self {
        Mat2(self.0.map(|x| x * s))
    }

    pub fn trace(&self) -> C64 {
        self.0[0] + self.0[3]
    }

    pub fn to_cmatrix(&self) -> CMatrix {
        CMatrix::from_vec(2, self.0.to_vec())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        Mat2(out)
    }
}

/// A 4x4 complex matrix acting on an ordered pair of qubits, row-major in
/// the local basis |s_a s_b>.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4(pub [C64; 16]);

impl Mat4 {
    pub fn kron(a: &Mat2, b: &Mat2) -> Self {
        let mut m = [ZERO; 16];
        for (i, row) in m.chunks_exact_mut(4).enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a.0[(i >> 1) * 2 + (j >> 1)] * b.0[(i & 1) * 2 + (j & 1)];
            }
        }
        Mat4(m)
    }

    pub fn zero() -> Self {
        Mat4([ZERO; 16])
    }

    pub fn add_scaled(&mut self, other: &Mat4, s: C64) {
        for (o, v) in self.0.iter_mut().zip(other.0.iter()) {
            *o += *v * s;
        }
    }

    pub fn matmul(&self, rhs: &Mat4) -> Mat4 {
        let mut m = [ZERO; 16];
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i * 4 + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..4 {
                    m[i * 4 + j] += a * rhs.0[k * 4 + j];
                }
            }
        }
        Mat4(m)
    }

    pub fn adjoint(&self) -> Mat4 {
        let mut m = [ZERO; 16];
        for i in 0..4 {
            for j in 0..4 {
                m[j * 4 + i] = self.0[i * 4 + j].conj();
            }
        }
        Mat4(m)
    }

    /// U† self U for U = a ⊗ b.
    pub fn conjugated(&self, a: &Mat2, b: &Mat2) -> Mat4 {
        let u = Mat4::kron(a, b);
        u.adjoint().matmul(&self.matmul(&u))
    }
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{})", self.dim, self.dim)?;
        for row in self.data.chunks(self.dim) {
            let cells: Vec<String> = row.iter().map(|c| format!("{:+.4}{:+.4}i", c.re, c.im)).collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        CMatrix { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim, "entry count must equal dim^2");
        CMatrix { dim, data }
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        let mut out = CMatrix::zeros(d);
        for i in 0..d {
            let orow = &mut out.data[i * d..(i + 1) * d];
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == ZERO {
                    continue;
                }
                let brow = &rhs.data[k * d..(k + 1) * d];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        let d = self.dim;
        let mut out = CMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> CMatrix {
        self.scale(C64::new(s, 0.0))
    }

    /// self += s * other
    pub fn add_scaled(&mut self, other: &CMatrix, s: C64) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    /// max |(M†M - I)_ij|
    pub fn unitarity_defect(&self) -> f64 {
        let mut p = self.adjoint().matmul(self);
        for i in 0..self.dim {
            p.data[i * self.dim + i] -= ONE;
        }
        p.max_abs()
    }

    /// max |(M - M†)_ij|
    pub fn hermiticity_defect(&self) -> f64 {
        (self - &self.adjoint()).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Kronecker product self ⊗ rhs.
    pub fn kron(&self, rhs: &CMatrix) -> CMatrix {
        let (da, db) = (self.dim, rhs.dim);
        let d = da * db;
        let mut out = CMatrix::zeros(d);
        for i in 0..da {
            for j in 0..da {
                let a = self.data[i * da + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..db {
                    for l in 0..db {
                        out.data[(i * db + k) * d + j * db + l] = a * rhs.data[k * db + l];
                    }
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

/// sqrt(Σ |M_ij|²)
pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn check_register(site: usize, n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(PulseError::Capacity { n, max: MAX_QUBITS });
    }
    if site >= n {
        return Err(PulseError::SiteOutOfRange { site, n });
    }
    Ok(())
}

/// I ⊗ … ⊗ op ⊗ … ⊗ I with `op` at tensor slot `site`.
pub fn kron_embed(op: &CMatrix, site: usize, n: usize) -> Result<CMatrix> {
    if op.dim() != 2 {
        return Err(PulseError::InvalidArgument(format!("kron_embed needs a 2x2 operator, got {}x{}", op.dim(), op.dim())));
    }
    check_register(site, n)?;
    let left = CMatrix::identity(1 << site);
    let right = CMatrix::identity(1 << (n - 1 - site));
    Ok(left.kron(op).kron(&right))
}

/// Dense form of a product of one 2x2 operator per site.
pub fn kron_sites(ops: &[Mat2]) -> CMatrix {
    ops.iter().fold(CMatrix::identity(1), |acc, op| acc.kron(&op.to_cmatrix()))
}

#[inline]
fn bit(site: usize, n: usize) -> usize {
    1 << (n - 1 - site)
}

/// acc += s · (op at `site`) · src
pub fn apply_site_left_acc(acc: &mut CMatrix, op: &Mat2, s: C64, site: usize, n: usize, src: &CMatrix) {
    let d = src.dim;
    debug_assert_eq!(d, 1 << n);
    let b = bit(site, n);
    let m = op.0.map(|x| x * s);
    for i0 in (0..d).filter(|i| i & b == 0) {
        let i1 = i0 | b;
        let (r0, r1) = (&src.data[i0 * d..(i0 + 1) * d], &src.data[i1 * d..(i1 + 1) * d]);
        let (lo, hi) = acc.data.split_at_mut(i1 * d);
        let (a0, a1) = (&mut lo[i0 * d..(i0 + 1) * d], &mut hi[..d]);
        for j in 0..d {
            let (x0, x1) = (r0[j], r1[j]);
            a0[j] += m[0] * x0 + m[1] * x1;
            a1[j] += m[2] * x0 + m[3] * x1;
        }
    }
}

/// acc += s · (op on sites (a, b)) · src, `op` in the local basis |s_a s_b>.
pub fn apply_pair_left_acc(acc: &mut CMatrix, op: &Mat4, s: C64, a: usize, b: usize, n: usize, src: &CMatrix) {
    let d = src.dim;
    debug_assert_eq!(d, 1 << n);
    let (ba, bb) = (bit(a, n), bit(b, n));
    let m = op.0.map(|x| x * s);
    for i0 in (0..d).filter(|i| i & (ba | bb) == 0) {
        let rows = [i0, i0 | bb, i0 | ba, i0 | ba | bb];
        for (k, &rk) in rows.iter().enumerate() {
            for (l, &rl) in rows.iter().enumerate() {
                let c = m[k * 4 + l];
                if c == ZERO {
                    continue;
                }
                let srow = &src.data[rl * d..(rl + 1) * d];
                let arow = &mut acc.data[rk * d..(rk + 1) * d];
                for (x, y) in arow.iter_mut().zip(srow) {
                    *x += c * y;
                }
            }
        }
    }
}

/// acc += s · (op at `site`) embedded in the full register.
pub fn add_site_embedded(acc: &mut CMatrix, op: &Mat2, s: C64, site: usize, n: usize) {
    let d = acc.dim;
    let b = bit(site, n);
    for i0 in (0..d).filter(|i| i & b == 0) {
        let rows = [i0, i0 | b];
        for (k, &rk) in rows.iter().enumerate() {
            for (l, &rl) in rows.iter().enumerate() {
                acc.data[rk * d + rl] += s * op.0[k * 2 + l];
            }
        }
    }
}

/// acc += s · (op on sites (a, b)) embedded in the full register.
pub fn add_pair_embedded(acc: &mut CMatrix, op: &Mat4, s: C64, a: usize, b: usize, n: usize) {
    let d = acc.dim;
    let (ba, bb) = (bit(a, n), bit(b, n));
    for i0 in (0..d).filter(|i| i & (ba | bb) == 0) {
        let rows = [i0, i0 | bb, i0 | ba, i0 | ba | bb];
        for (k, &rk) in rows.iter().enumerate() {
            for (l, &rl) in rows.iter().enumerate() {
                acc.data[rk * d + rl] += s * op.0[k * 4 + l];
            }
        }
    }
}

/// In-place M ← op_site · M.
pub fn left_mul_site(m: &mut CMatrix, op: &Mat2, site: usize, n: usize) {
    let d = m.dim;
    let b = bit(site, n);
    for i0 in (0..d).filter(|i| i & b == 0) {
        let i1 = i0 | b;
        for j in 0..d {
            let (x0, x1) = (m.data[i0 * d + j], m.data[i1 * d + j]);
            m.data[i0 * d + j] = op.0[0] * x0 + op.0[1] * x1;
            m.data[i1 * d + j] = op.0[2] * x0 + op.0[3] * x1;
        }
    }
}

/// In-place M ← M · op_site.
pub fn right_mul_site(m: &mut CMatrix, op: &Mat2, site: usize, n: usize) {
    let d = m.dim;
    let b = bit(site, n);
    for row in m.data.chunks_exact_mut(d) {
        for j0 in (0..d).filter(|j| j & b == 0) {
            let j1 = j0 | b;
            let (x0, x1) = (row[j0], row[j1]);
            row[j0] = x0 * op.0[0] + x1 * op.0[2];
            row[j1] = x0 * op.0[1] + x1 * op.0[3];
        }
    }
}

/// U M U† for U = ⊗ sites.
pub fn conjugate_by_sites(m: &CMatrix, sites: &[Mat2]) -> CMatrix {
    let n = sites.len();
    let mut out = m.clone();
    for (k, u) in sites.iter().enumerate() {
        if *u == Mat2::IDENTITY {
            continue;
        }
        left_mul_site(&mut out, u, k, n);
        right_mul_site(&mut out, &u.adjoint(), k, n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn embed_z_on_first_slot() {
        let m = kron_embed(&Mat2::pauli_z().to_cmatrix(), 0, 2).unwrap();
        assert_eq!(m, CMatrix::diagonal(&[c(1.0), c(1.0), c(-1.0), c(-1.0)]));
    }

    #[test]
    fn embed_x_on_second_slot() {
        let m = kron_embed(&Mat2::pauli_x().to_cmatrix(), 1, 2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = matches!((i, j), (0, 1) | (1, 0) | (2, 3) | (3, 2));
                assert_eq!(m[(i, j)], if expect { ONE } else { ZERO }, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn embed_identity_any_slot() {
        for k in 0..3 {
            assert_eq!(kron_embed(&CMatrix::identity(2), k, 3).unwrap(), CMatrix::identity(8));
        }
    }

    #[test]
    fn embed_errors() {
        let x = Mat2::pauli_x().to_cmatrix();
        assert_eq!(kron_embed(&x, 2, 2), Err(PulseError::SiteOutOfRange { site: 2, n: 2 }));
        assert_eq!(kron_embed(&x, 0, 11), Err(PulseError::Capacity { n: 11, max: 10 }));
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius_norm(&CMatrix::zeros(4)), 0.0);
        assert!((frobenius_norm(&CMatrix::identity(2)) - 2f64.sqrt()).abs() < 1e-15);
        let xy = Mat2::pauli_x().to_cmatrix().kron(&Mat2::pauli_y().to_cmatrix());
        assert!((frobenius_norm(&xy) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn local_application_matches_dense() {
        let n = 3;
        let src = CMatrix::from_vec(8, (0..64).map(|k| C64::new(k as f64 * 0.1, (k % 5) as f64)).collect());
        let y = Mat2::pauli_y();
        let mut acc = CMatrix::zeros(8);
        apply_site_left_acc(&mut acc, &y, c(2.0), 1, n, &src);
        let dense = kron_embed(&y.to_cmatrix(), 1, n).unwrap().matmul(&src).scale_real(2.0);
        assert!((&acc - &dense).max_abs() < 1e-12);

        let op = Mat4::kron(&Mat2::pauli_x(), &Mat2::rotation_xy(0.3, 0.7));
        let mut acc = CMatrix::zeros(8);
        apply_pair_left_acc(&mut acc, &op, ONE, 0, 2, n, &src);
        let dense_op = kron_embed(&Mat2::pauli_x().to_cmatrix(), 0, n)
            .unwrap()
            .matmul(&kron_embed(&Mat2::rotation_xy(0.3, 0.7).to_cmatrix(), 2, n).unwrap());
        assert!((&acc - &dense_op.matmul(&src)).max_abs() < 1e-12);
    }

    #[test]
    fn site_conjugation_matches_dense() {
        let sites = [Mat2::rotation_xy(0.4, 0.1), Mat2::IDENTITY, Mat2::rotation_z(1.3)];
        let m = CMatrix::from_vec(8, (0..64).map(|k| C64::new((k * 7 % 11) as f64, k as f64)).collect());
        let u = kron_sites(&sites);
        let dense = u.matmul(&m).matmul(&u.adjoint());
        assert!((&conjugate_by_sites(&m, &sites) - &dense).max_abs() < 1e-11);
    }

    #[test]
    fn rotation_is_unitary_and_pi_x_is_minus_i_x() {
        let r = Mat2::rotation_xy(std::f64::consts::PI, 0.0);
        let expect = Mat2::pauli_x().scale(-I);
        for (a, b) in r.0.iter().zip(expect.0.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(Mat2::rotation_xy(1.1, 2.2).to_cmatrix().unitarity_defect() < 1e-15);
    }
}
