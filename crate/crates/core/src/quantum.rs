//! Three-qubit symmetric states and real projective measurements.
//!
//! Basis order is |000⟩, |001⟩, …, |111⟩ with the first slot as the most
//! significant bit. |W⟩ has amplitude 1/√3 at indices 1, 2 and 4.

use bellforge_lp::Scalar;
use serde::{Deserialize, Serialize};

pub type Mat2 = [[f64; 2]; 2];

const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantumError {
    #[error("state amplitudes have squared norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("state has zero norm")]
    ZeroState,
    #[error("slopes must be finite with at least one nonzero entry")]
    InvalidSlopes,
    #[error("index {index} out of range for {len} slopes")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Rank-1 real projector onto cos(Φ/2)|1⟩ − sin(Φ/2)|0⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectorAngle {
    pub phi: f64,
}

impl ProjectorAngle {
    pub fn new(phi: f64) -> Self {
        ProjectorAngle { phi }
    }

    /// (1 − cos Φ)/2
    pub fn c_minus(&self) -> f64 {
        (1.0 - self.phi.cos()) / 2.0
    }

    /// −sin Φ / 2
    pub fn s(&self) -> f64 {
        -self.phi.sin() / 2.0
    }

    /// (1 + cos Φ)/2
    pub fn c_plus(&self) -> f64 {
        (1.0 + self.phi.cos()) / 2.0
    }

    pub fn matrix(&self) -> Mat2 {
        let s = self.s();
        [[self.c_minus(), s], [s, self.c_plus()]]
    }
}

pub fn projector(angle: ProjectorAngle) -> Mat2 {
    angle.matrix()
}

/// Operator acting on one party: identity or a projector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Identity,
    Projector(ProjectorAngle),
}

impl Slot {
    pub fn angle(phi: f64) -> Slot {
        Slot::Projector(ProjectorAngle::new(phi))
    }

    pub fn matrix(&self) -> Mat2 {
        match self {
            Slot::Identity => IDENTITY,
            Slot::Projector(a) => a.matrix(),
        }
    }
}

/// Real superposition of |W⟩, |111⟩ and |000⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricState {
    w: f64,
    p111: f64,
    p000: f64,
}

const NORM_TOL: f64 = 1e-12;

impl SymmetricState {
    pub fn new(w: f64, p111: f64, p000: f64) -> Result<Self, QuantumError> {
        let n = w * w + p111 * p111 + p000 * p000;
        if (n - 1.0).abs() > NORM_TOL {
            return Err(QuantumError::NotNormalized(n));
        }
        Ok(SymmetricState { w, p111, p000 })
    }

    pub fn normalized(w: f64, p111: f64, p000: f64) -> Result<Self, QuantumError> {
        let n = (w * w + p111 * p111 + p000 * p000).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(QuantumError::ZeroState);
        }
        Ok(SymmetricState {
            w: w / n,
            p111: p111 / n,
            p000: p000 / n,
        })
    }

    pub fn w() -> Self {
        SymmetricState { w: 1.0, p111: 0.0, p000: 0.0 }
    }

    pub fn ket111() -> Self {
        SymmetricState { w: 0.0, p111: 1.0, p000: 0.0 }
    }

    pub fn ket000() -> Self {
        SymmetricState { w: 0.0, p111: 0.0, p000: 1.0 }
    }

    /// cos α |W⟩ + sin α |111⟩
    pub fn psi(alpha: f64) -> Self {
        SymmetricState {
            w: alpha.cos(),
            p111: alpha.sin(),
            p000: 0.0,
        }
    }

    pub fn w_coeff(&self) -> f64 {
        self.w
    }

    pub fn p111_coeff(&self) -> f64 {
        self.p111
    }

    pub fn p000_coeff(&self) -> f64 {
        self.p000
    }

    pub fn amplitudes(&self) -> [f64; 8] {
        let a = self.w / 3f64.sqrt();
        [self.p000, a, a, 0.0, a, 0.0, 0.0, self.p111]
    }
}

/// (O_0 ⊗ O_1 ⊗ O_2) v by contracting one slot at a time.
pub fn apply(ops: &[Mat2; 3], v: &[f64; 8]) -> [f64; 8] {
    let mut cur = *v;
    for (slot, op) in ops.iter().enumerate() {
        let bit = 4 >> slot;
        let mut next = [0.0; 8];
        for (idx, out) in next.iter_mut().enumerate() {
            let x = usize::from(idx & bit != 0);
            let lo = idx & !bit;
            *out = op[x][0] * cur[lo] + op[x][1] * cur[lo | bit];
        }
        cur = next;
    }
    cur
}

/// ⟨bra| O_0⊗O_1⊗O_2 |ket⟩ for arbitrary real 8-vectors.
pub fn matrix_element_raw(bra: &[f64; 8], ket: &[f64; 8], ops: &[Mat2; 3]) -> f64 {
    let out = apply(ops, ket);
    bra.iter().zip(&out).map(|(a, b)| a * b).sum()
}

/// Generic tensor evaluator, the reference for every closed form below.
pub fn matrix_element(bra: &SymmetricState, ket: &SymmetricState, ops: &[Slot; 3]) -> f64 {
    let mats = [ops[0].matrix(), ops[1].matrix(), ops[2].matrix()];
    matrix_element_raw(&bra.amplitudes(), &ket.amplitudes(), &mats)
}

/// ⟨W|A_i⊗A_j⊗I|W⟩
pub fn w_two_party(i: ProjectorAngle, j: ProjectorAngle) -> f64 {
    let (mi, si, pi) = (i.c_minus(), i.s(), i.c_plus());
    let (mj, sj, pj) = (j.c_minus(), j.s(), j.c_plus());
    (2.0 * si * sj + mi * pj + pi * mj + mi * mj) / 3.0
}

/// ⟨W|A_i⊗A_j⊗A_k|W⟩
pub fn w_three_party(i: ProjectorAngle, j: ProjectorAngle, k: ProjectorAngle) -> f64 {
    let (mi, si, pi) = (i.c_minus(), i.s(), i.c_plus());
    let (mj, sj, pj) = (j.c_minus(), j.s(), j.c_plus());
    let (mk, sk, pk) = (k.c_minus(), k.s(), k.c_plus());
    (pi * mj * mk
        + mi * pj * mk
        + mi * mj * pk
        + 2.0 * (si * sj * mk + si * mj * sk + mi * sj * sk))
        / 3.0
}

/// Matrix elements between |W⟩ and |111⟩ and within |111⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossElements {
    /// ⟨W|A_i⊗A_j⊗I|111⟩
    pub w111_pair: f64,
    /// ⟨W|A_i⊗A_j⊗A_k|111⟩
    pub w111_triple: f64,
    /// ⟨111|A_i⊗A_j⊗I|111⟩
    pub p111_pair: f64,
    /// ⟨111|A_i⊗A_j⊗A_k|111⟩
    pub p111_triple: f64,
}

pub fn cross_elements(i: ProjectorAngle, j: ProjectorAngle, k: ProjectorAngle) -> CrossElements {
    let r3 = 3f64.sqrt();
    let (si, pi) = (i.s(), i.c_plus());
    let (sj, pj) = (j.s(), j.c_plus());
    let (sk, pk) = (k.s(), k.c_plus());
    CrossElements {
        w111_pair: si * sj / r3,
        w111_triple: (pi * sj * sk + si * pj * sk + si * sj * pk) / r3,
        p111_pair: pi * pj,
        p111_triple: pi * pj * pk,
    }
}

/// Angles Φ_i = φ_i·x and mixing α = a·x² in the limit x → 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallAngleSpec {
    phis: Vec<f64>,
    mixing_slope: f64,
}

impl SmallAngleSpec {
    pub fn new(phis: Vec<f64>, mixing_slope: f64) -> Result<Self, QuantumError> {
        if phis.iter().any(|p| !p.is_finite()) || phis.iter().all(|&p| p == 0.0) || !mixing_slope.is_finite() {
            return Err(QuantumError::InvalidSlopes);
        }
        Ok(SmallAngleSpec { phis, mixing_slope })
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn mixing_slope(&self) -> f64 {
        self.mixing_slope
    }
}

/// Leading small-angle coefficients for one index triple (pair terms use
/// the first two indices).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallAngleElements {
    /// ⟨W|A_iA_jI|W⟩ = x²·w_pair_x2 + x⁴·w_pair_x4 + O(x⁶)
    pub w_pair_x2: f64,
    pub w_pair_x4: f64,
    /// ⟨W|A_iA_jA_k|W⟩ = x⁴·w_triple_x4 + O(x⁶)
    pub w_triple_x4: f64,
    /// ⟨W|A_iA_jI|111⟩ = x²·w111_pair_x2 + O(x⁴)
    pub w111_pair_x2: f64,
    /// ⟨W|A_iA_jA_k|111⟩ = x²·w111_triple_x2 + O(x⁴)
    pub w111_triple_x2: f64,
    /// ⟨111|A_iA_jI|111⟩ → 1
    pub p111_pair: f64,
    /// ⟨111|A_iA_jA_k|111⟩ → 1
    pub p111_triple: f64,
}

pub fn small_angle_elements(
    spec: &SmallAngleSpec,
    i: usize,
    j: usize,
    k: usize,
) -> Result<SmallAngleElements, QuantumError> {
    let len = spec.phis.len();
    for index in [i, j, k] {
        if index >= len {
            return Err(QuantumError::IndexOutOfRange { index, len });
        }
    }
    let (a, b, c) = (spec.phis[i], spec.phis[j], spec.phis[k]);
    let r3 = 3f64.sqrt();
    let sum = a + b;
    Ok(SmallAngleElements {
        w_pair_x2: sum * sum / 12.0,
        w_pair_x4: small_pair_x4(&a, &b) - sum.powi(4) / 144.0,
        w_triple_x4: small_triple_x4(&a, &b, &c),
        w111_pair_x2: a * b / (4.0 * r3),
        w111_triple_x2: e2(&a, &b, &c) / (4.0 * r3),
        p111_pair: 1.0,
        p111_triple: 1.0,
    })
}

/// φ_iφ_j + φ_iφ_k + φ_jφ_k
pub fn e2<T: Scalar>(a: &T, b: &T, c: &T) -> T {
    a.mul(b).add(&a.mul(c)).add(&b.mul(c))
}

/// x⁴ coefficient of ⟨W|A_iA_jI|W⟩ when φ_i + φ_j = 0: φ_i²φ_j²/48.
pub fn small_pair_x4<T: Scalar>(a: &T, b: &T) -> T {
    let ab = a.mul(b);
    ab.mul(&ab).div(&T::from_i64(48))
}

/// x⁴ coefficient of ⟨W|A_iA_jA_k|W⟩: e₂²/48.
pub fn small_triple_x4<T: Scalar>(a: &T, b: &T, c: &T) -> T {
    let e = e2(a, b, c);
    e.mul(&e).div(&T::from_i64(48))
}
