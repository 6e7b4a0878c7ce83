//! Symmetric and asymmetric correlation-only Bell inequalities, their quantum
//! values and the efficiency threshold.

use std::collections::BTreeMap;

use bellforge_lp::{gcd_of_numerators, lcm_of_denominators, Rational};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::quantum::{
    matrix_element_raw, small_pair_x4, small_triple_x4, Mat2, ProjectorAngle, QuantumError, SymmetricState,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InequalityError {
    #[error("number of settings must be between 1 and {max}, got {got}")]
    Settings { got: usize, max: usize },
    #[error("index {index} out of range for m = {m}")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("coefficient given twice at {0:?}")]
    Duplicate(Vec<usize>),
    #[error("expected {expected} angles, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("efficiency {0} outside [0, 1]")]
    EtaOutOfRange(f64),
    #[error("no violation at any efficiency: three-party value {0} is not positive")]
    NoViolation(f64),
    #[error("pair ({0}, {1}) has a nonzero coefficient but its slopes do not cancel")]
    PairingRule(usize, usize),
    #[error("malformed inequality: {0}")]
    Format(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

pub const MAX_SETTINGS: usize = 8;

/// π for a sorted pair: number of ordered party assignments.
pub fn pair_multiplicity(i: usize, j: usize) -> u32 {
    if i == j {
        3
    } else {
        6
    }
}

/// π for a sorted triple: distinct permutations of (i, j, k).
pub fn triple_multiplicity(i: usize, j: usize, k: usize) -> u32 {
    if i == j && j == k {
        1
    } else if i == j || j == k || i == k {
        3
    } else {
        6
    }
}

pub fn sorted_pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |i| (i..m).map(move |j| (i, j)))
}

pub fn sorted_triples(m: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..m).flat_map(move |i| (i..m).flat_map(move |j| (j..m).map(move |k| (i, j, k))))
}

fn sort2(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

fn sort3(i: usize, j: usize, k: usize) -> (usize, usize, usize) {
    let mut v = [i, j, k];
    v.sort_unstable();
    (v[0], v[1], v[2])
}

/// Coefficients M⁽²⁾_{i≤j} and M⁽³⁾_{i≤j≤k} (0-based) of
/// Σ M⁽²⁾_{ij}[P(A_iB_j)+P(A_iC_j)+P(B_iC_j)] + Σ M⁽³⁾_{ijk} P(A_iB_jC_k) ≤ 0
/// with the full tensors obtained by symmetrization.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymmetricBellInequality {
    m: usize,
    m2: BTreeMap<(usize, usize), Rational>,
    m3: BTreeMap<(usize, usize, usize), Rational>,
}

impl SymmetricBellInequality {
    /// Index tuples may come in any order; zero coefficients are dropped.
    pub fn new(
        m: usize,
        m2: impl IntoIterator<Item = ((usize, usize), Rational)>,
        m3: impl IntoIterator<Item = ((usize, usize, usize), Rational)>,
    ) -> Result<Self, InequalityError> {
        if m == 0 || m > MAX_SETTINGS {
            return Err(InequalityError::Settings { got: m, max: MAX_SETTINGS });
        }
        let check = |idx: usize| {
            if idx >= m {
                Err(InequalityError::IndexOutOfRange { index: idx, m })
            } else {
                Ok(())
            }
        };
        let mut pairs = BTreeMap::new();
        for ((i, j), v) in m2 {
            check(i)?;
            check(j)?;
            let key = sort2(i, j);
            if pairs.insert(key, v).is_some() {
                return Err(InequalityError::Duplicate(vec![key.0, key.1]));
            }
        }
        let mut triples = BTreeMap::new();
        for ((i, j, k), v) in m3 {
            check(i)?;
            check(j)?;
            check(k)?;
            let key = sort3(i, j, k);
            if triples.insert(key, v).is_some() {
                return Err(InequalityError::Duplicate(vec![key.0, key.1, key.2]));
            }
        }
        pairs.retain(|_, v| !v.is_zero());
        triples.retain(|_, v| !v.is_zero());
        Ok(SymmetricBellInequality { m, m2: pairs, m3: triples })
    }

    /// Integer coefficients with 1-based indices, as they are usually written.
    pub fn from_integers(
        m: usize,
        m2: &[(usize, usize, i64)],
        m3: &[(usize, usize, usize, i64)],
    ) -> Result<Self, InequalityError> {
        let one_based = |i: usize| {
            i.checked_sub(1)
                .ok_or(InequalityError::IndexOutOfRange { index: 0, m })
        };
        let pairs = m2
            .iter()
            .map(|&(i, j, v)| Ok(((one_based(i)?, one_based(j)?), Rational::from_integer(v))))
            .collect::<Result<Vec<_>, InequalityError>>()?;
        let triples = m3
            .iter()
            .map(|&(i, j, k, v)| {
                Ok((
                    (one_based(i)?, one_based(j)?, one_based(k)?),
                    Rational::from_integer(v),
                ))
            })
            .collect::<Result<Vec<_>, InequalityError>>()?;
        Self::new(m, pairs, triples)
    }

    pub fn zero(m: usize) -> Result<Self, InequalityError> {
        Self::new(m, [], [])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn m2(&self) -> &BTreeMap<(usize, usize), Rational> {
        &self.m2
    }

    pub fn m3(&self) -> &BTreeMap<(usize, usize, usize), Rational> {
        &self.m3
    }

    /// Full-tensor entry M⁽²⁾_{ij}.
    pub fn pair(&self, i: usize, j: usize) -> Rational {
        self.m2.get(&sort2(i, j)).cloned().unwrap_or_else(Rational::zero)
    }

    /// Full-tensor entry M⁽³⁾_{ijk}.
    pub fn triple(&self, i: usize, j: usize, k: usize) -> Rational {
        self.m3.get(&sort3(i, j, k)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn support_size(&self) -> usize {
        self.m2.len() + self.m3.len()
    }

    pub fn m2_nonpositive(&self) -> bool {
        self.m2.values().all(|v| !v.is_positive())
    }

    pub fn scaled(&self, factor: &Rational) -> Self {
        SymmetricBellInequality {
            m: self.m,
            m2: self.m2.iter().map(|(k, v)| (*k, v * factor)).filter(|(_, v)| !v.is_zero()).collect(),
            m3: self.m3.iter().map(|(k, v)| (*k, v * factor)).filter(|(_, v)| !v.is_zero()).collect(),
        }
    }

    /// Smallest integer multiple by a positive rational.
    pub fn integer_normalized(&self) -> Self {
        let values: Vec<&Rational> = self.m2.values().chain(self.m3.values()).collect();
        if values.is_empty() {
            return self.clone();
        }
        let lcm = Rational::from(lcm_of_denominators(values.iter().copied()));
        let ints: Vec<Rational> = values.iter().map(|v| *v * &lcm).collect();
        let gcd = Rational::from(gcd_of_numerators(&ints));
        self.scaled(&(&lcm / &gcd))
    }

    /// Dense coefficient vector over all sorted pairs then all sorted triples.
    pub fn dense_vector(&self) -> Vec<Rational> {
        sorted_pairs(self.m)
            .map(|(i, j)| self.pair(i, j))
            .chain(sorted_triples(self.m).map(|(i, j, k)| self.triple(i, j, k)))
            .collect()
    }

    pub fn to_json(&self) -> InequalityJson {
        let frac = |v: &Rational| {
            (
                v.numer().to_i64().expect("coefficient fits in i64"),
                v.denom().to_i64().expect("coefficient fits in i64"),
            )
        };
        InequalityJson {
            m: self.m,
            m2: self
                .m2
                .iter()
                .map(|(&(i, j), v)| {
                    let (n, d) = frac(v);
                    (i + 1, j + 1, n, d)
                })
                .collect(),
            m3: self
                .m3
                .iter()
                .map(|(&(i, j, k), v)| {
                    let (n, d) = frac(v);
                    (i + 1, j + 1, k + 1, n, d)
                })
                .collect(),
        }
    }

    /// Strict: indices must be 1-based and sorted, denominators positive.
    pub fn from_json(json: &InequalityJson) -> Result<Self, InequalityError> {
        let bad = |msg: String| InequalityError::Format(msg);
        let mut pairs = Vec::new();
        for &(i, j, n, d) in &json.m2 {
            if i == 0 || i > j {
                return Err(bad(format!("pair indices ({}, {}) must satisfy 1 <= i <= j", i, j)));
            }
            if d <= 0 {
                return Err(bad(format!("denominator {} must be positive", d)));
            }
            pairs.push(((i - 1, j - 1), Rational::new(n, d)));
        }
        let mut triples = Vec::new();
        for &(i, j, k, n, d) in &json.m3 {
            if i == 0 || i > j || j > k {
                return Err(bad(format!(
                    "triple indices ({}, {}, {}) must satisfy 1 <= i <= j <= k",
                    i, j, k
                )));
            }
            if d <= 0 {
                return Err(bad(format!("denominator {} must be positive", d)));
            }
            triples.push(((i - 1, j - 1, k - 1), Rational::new(n, d)));
        }
        Self::new(json.m, pairs, triples)
    }
}

/// `{m, m2: [[i,j,num,den]...], m3: [[i,j,k,num,den]...]}` with 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InequalityJson {
    pub m: usize,
    pub m2: Vec<(usize, usize, i64, i64)>,
    pub m3: Vec<(usize, usize, usize, i64, i64)>,
}

/// Quantum value decomposed as η²·m2_value + η³·m3_value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EfficiencySplit {
    pub m2_value: f64,
    pub m3_value: f64,
}

impl EfficiencySplit {
    pub fn new(m2_value: f64, m3_value: f64) -> Self {
        EfficiencySplit { m2_value, m3_value }
    }

    /// Magnitude scale |m2| + |m3| used for relative comparisons.
    pub fn scale(&self) -> f64 {
        self.m2_value.abs() + self.m3_value.abs()
    }
}

/// Exact counterpart of [`EfficiencySplit`] for rational slopes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactSplit {
    pub m2: Rational,
    pub m3: Rational,
}

impl ExactSplit {
    pub fn to_f64(&self) -> EfficiencySplit {
        EfficiencySplit::new(self.m2.to_f64(), self.m3.to_f64())
    }

    pub fn eta_crit(&self) -> Result<Rational, InequalityError> {
        if !self.m3.is_positive() {
            return Err(InequalityError::NoViolation(self.m3.to_f64()));
        }
        Ok(-(&self.m2 / &self.m3))
    }
}

pub fn effective_value(split: &EfficiencySplit, eta: f64) -> Result<f64, InequalityError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(InequalityError::EtaOutOfRange(eta));
    }
    Ok(eta * eta * split.m2_value + eta * eta * eta * split.m3_value)
}

pub fn eta_crit(split: &EfficiencySplit) -> Result<f64, InequalityError> {
    if !(split.m3_value > 0.0) {
        return Err(InequalityError::NoViolation(split.m3_value));
    }
    Ok(-split.m2_value / split.m3_value)
}

fn check_angles(ineq: &SymmetricBellInequality, angles: &[f64]) -> Result<(), InequalityError> {
    if angles.len() != ineq.m {
        return Err(InequalityError::LengthMismatch {
            expected: ineq.m,
            got: angles.len(),
        });
    }
    Ok(())
}

const ID: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// ⟨bra|𝓜|ket⟩ split, using sorted coefficients weighted by their
/// multiplicities. Valid when bra and ket are both permutation symmetric.
pub fn operator_split(
    ineq: &SymmetricBellInequality,
    bra: &[f64; 8],
    ket: &[f64; 8],
    angles: &[f64],
) -> Result<EfficiencySplit, InequalityError> {
    check_angles(ineq, angles)?;
    let mats: Vec<Mat2> = angles.iter().map(|&p| ProjectorAngle::new(p).matrix()).collect();
    let mut m2 = 0.0;
    for (&(i, j), v) in &ineq.m2 {
        let e = matrix_element_raw(bra, ket, &[mats[i], mats[j], ID]);
        m2 += v.to_f64() * pair_multiplicity(i, j) as f64 * e;
    }
    let mut m3 = 0.0;
    for (&(i, j, k), v) in &ineq.m3 {
        let e = matrix_element_raw(bra, ket, &[mats[i], mats[j], mats[k]]);
        m3 += v.to_f64() * triple_multiplicity(i, j, k) as f64 * e;
    }
    Ok(EfficiencySplit::new(m2, m3))
}

pub fn quantum_split(
    ineq: &SymmetricBellInequality,
    state: &SymmetricState,
    angles: &[ProjectorAngle],
) -> Result<EfficiencySplit, InequalityError> {
    let phis: Vec<f64> = angles.iter().map(|a| a.phi).collect();
    let amps = state.amplitudes();
    operator_split(ineq, &amps, &amps, &phis)
}

/// Same split from the fully expanded tensors, summing every ordered index
/// tuple and every party pair separately. Slow, and independent of any
/// symmetry assumption on the states.
pub fn full_tensor_split(
    ineq: &SymmetricBellInequality,
    bra: &[f64; 8],
    ket: &[f64; 8],
    angles: &[f64],
) -> Result<EfficiencySplit, InequalityError> {
    check_angles(ineq, angles)?;
    let m = ineq.m;
    let mats: Vec<Mat2> = angles.iter().map(|&p| ProjectorAngle::new(p).matrix()).collect();
    let mut m2 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let c = ineq.pair(i, j).to_f64();
            if c == 0.0 {
                continue;
            }
            let ab = matrix_element_raw(bra, ket, &[mats[i], mats[j], ID]);
            let ac = matrix_element_raw(bra, ket, &[mats[i], ID, mats[j]]);
            let bc = matrix_element_raw(bra, ket, &[ID, mats[i], mats[j]]);
            m2 += c * (ab + ac + bc);
        }
    }
    let mut m3 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let c = ineq.triple(i, j, k).to_f64();
                if c != 0.0 {
                    m3 += c * matrix_element_raw(bra, ket, &[mats[i], mats[j], mats[k]]);
                }
            }
        }
    }
    Ok(EfficiencySplit::new(m2, m3))
}

fn check_slopes<T>(ineq: &SymmetricBellInequality, slopes: &[T]) -> Result<(), InequalityError> {
    if slopes.len() != ineq.m {
        return Err(InequalityError::LengthMismatch {
            expected: ineq.m,
            got: slopes.len(),
        });
    }
    Ok(())
}

/// Small-angle |W⟩ split in units of x⁴, exact for rational slopes.
pub fn small_angle_split_w(
    ineq: &SymmetricBellInequality,
    slopes: &[Rational],
) -> Result<ExactSplit, InequalityError> {
    check_slopes(ineq, slopes)?;
    let mut m2 = Rational::zero();
    for (&(i, j), v) in &ineq.m2 {
        if !(&slopes[i] + &slopes[j]).is_zero() {
            return Err(InequalityError::PairingRule(i, j));
        }
        let w = small_pair_x4(&slopes[i], &slopes[j]);
        m2 += &(v * &w * Rational::from_integer(pair_multiplicity(i, j) as i64));
    }
    let mut m3 = Rational::zero();
    for (&(i, j, k), v) in &ineq.m3 {
        let w = small_triple_x4(&slopes[i], &slopes[j], &slopes[k]);
        m3 += &(v * &w * Rational::from_integer(triple_multiplicity(i, j, k) as i64));
    }
    Ok(ExactSplit { m2, m3 })
}

/// Slopes whose sum is within this of zero count as cancelling.
pub const PAIRING_TOL: f64 = 1e-12;

fn cancels(a: f64, b: f64) -> bool {
    (a + b).abs() <= PAIRING_TOL * (1.0 + a.abs() + b.abs())
}

/// Floating point version of [`small_angle_split_w`].
pub fn small_angle_split_w_f64(
    ineq: &SymmetricBellInequality,
    slopes: &[f64],
) -> Result<EfficiencySplit, InequalityError> {
    Ok(small_angle_split_psi(ineq, slopes)?.ww)
}

/// Small-angle matrix elements of 𝓜 for |ψ⟩ = cos(a x²)|W⟩ + sin(a x²)|111⟩.
/// In units of x⁴ the value is ww + 2a·w111 + a²·p111 (each at efficiency η).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PsiSplit {
    /// ⟨W|𝓜|W⟩ / x⁴
    pub ww: EfficiencySplit,
    /// ⟨W|𝓜|111⟩ / x²
    pub w111: EfficiencySplit,
    /// ⟨111|𝓜|111⟩
    pub p111: EfficiencySplit,
}

fn at(s: &EfficiencySplit, eta: f64) -> f64 {
    eta * eta * s.m2_value + eta * eta * eta * s.m3_value
}

impl PsiSplit {
    pub fn value(&self, eta: f64, a: f64) -> f64 {
        at(&self.ww, eta) + 2.0 * a * at(&self.w111, eta) + a * a * at(&self.p111, eta)
    }

    /// Maximizer of [`PsiSplit::value`] over a, or `None` when ⟨111|𝓜|111⟩
    /// vanishes at this efficiency.
    pub fn optimal_slope(&self, eta: f64) -> Option<f64> {
        let e = at(&self.p111, eta);
        if e >= 0.0 {
            return None;
        }
        Some(-at(&self.w111, eta) / e)
    }

    /// Value at the optimal mixing slope.
    pub fn optimal_value(&self, eta: f64) -> f64 {
        match self.optimal_slope(eta) {
            Some(a) => self.value(eta, a),
            None => {
                if at(&self.w111, eta) != 0.0 {
                    f64::INFINITY
                } else {
                    at(&self.ww, eta)
                }
            }
        }
    }

    /// Coefficients (c0, c1, c2) of Q(η) = (w2+ηw3)(e2+ηe3) − (c2+ηc3)²; the
    /// optimally mixed state violates exactly where Q < 0.
    pub fn threshold_quadratic(&self) -> [f64; 3] {
        let (w2, w3) = (self.ww.m2_value, self.ww.m3_value);
        let (c2, c3) = (self.w111.m2_value, self.w111.m3_value);
        let (e2, e3) = (self.p111.m2_value, self.p111.m3_value);
        [w2 * e2 - c2 * c2, w2 * e3 + w3 * e2 - 2.0 * c2 * c3, w3 * e3 - c3 * c3]
    }

    /// Threshold efficiency with the mixing slope chosen optimally at each η.
    pub fn eta_crit(&self) -> Result<f64, InequalityError> {
        let [c0, c1, c2] = self.threshold_quadratic();
        let q = |x: f64| c0 + c1 * x + c2 * x * x;
        if !(q(1.0) < 0.0) {
            return Err(InequalityError::NoViolation(self.optimal_value(1.0)));
        }
        let mut roots = crate::optimize::quadratic_roots(c0, c1, c2);
        roots.retain(|r| *r < 1.0);
        let eta = roots.into_iter().fold(0.0, f64::max);
        // ⟨111|𝓜|111⟩ may vanish at η = 1 but must be negative inside
        if !(at(&self.p111, 0.5 * (eta + 1.0)) < 0.0) {
            return Err(InequalityError::NoViolation(self.optimal_value(1.0)));
        }
        Ok(eta)
    }
}

/// Small-angle split of 𝓜 between |W⟩ and |111⟩ combinations.
pub fn small_angle_split_psi(
    ineq: &SymmetricBellInequality,
    slopes: &[f64],
) -> Result<PsiSplit, InequalityError> {
    check_slopes(ineq, slopes)?;
    let r3 = 3f64.sqrt();
    let mut out = PsiSplit::default();
    for (&(i, j), v) in &ineq.m2 {
        let (a, b) = (slopes[i], slopes[j]);
        if !cancels(a, b) {
            return Err(InequalityError::PairingRule(i, j));
        }
        let c = v.to_f64() * pair_multiplicity(i, j) as f64;
        out.ww.m2_value += c * small_pair_x4(&a, &b);
        out.w111.m2_value += c * a * b / (4.0 * r3);
        out.p111.m2_value += c;
    }
    for (&(i, j, k), v) in &ineq.m3 {
        let (a, b, d) = (slopes[i], slopes[j], slopes[k]);
        let c = v.to_f64() * triple_multiplicity(i, j, k) as f64;
        out.ww.m3_value += c * small_triple_x4(&a, &b, &d);
        out.w111.m3_value += c * crate::quantum::e2(&a, &b, &d) / (4.0 * r3);
        out.p111.m3_value += c;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PartyPair {
    AB,
    AC,
    BC,
}

impl PartyPair {
    pub const ALL: [PartyPair; 3] = [PartyPair::AB, PartyPair::AC, PartyPair::BC];

    pub fn parties(&self) -> (usize, usize) {
        match self {
            PartyPair::AB => (0, 1),
            PartyPair::AC => (0, 2),
            PartyPair::BC => (1, 2),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PartyPair::AB => "AB",
            PartyPair::AC => "AC",
            PartyPair::BC => "BC",
        }
    }

    pub fn from_label(s: &str) -> Option<PartyPair> {
        PartyPair::ALL.into_iter().find(|p| p.label() == s)
    }
}

/// General correlation inequality Σ S_{XY,ij} P(11|X_iY_j) + Σ S_{ijk} P(111|A_iB_jC_k) ≤ 0
/// with possibly different setting counts per party.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AsymmetricBellInequality {
    settings: [usize; 3],
    pairs: BTreeMap<(PartyPair, usize, usize), Rational>,
    triples: BTreeMap<(usize, usize, usize), Rational>,
}

impl AsymmetricBellInequality {
    pub fn new(
        settings: [usize; 3],
        pairs: impl IntoIterator<Item = ((PartyPair, usize, usize), Rational)>,
        triples: impl IntoIterator<Item = ((usize, usize, usize), Rational)>,
    ) -> Result<Self, InequalityError> {
        for &s in &settings {
            if s == 0 || s > MAX_SETTINGS {
                return Err(InequalityError::Settings { got: s, max: MAX_SETTINGS });
            }
        }
        let mut p = BTreeMap::new();
        for ((pp, i, j), v) in pairs {
            let (x, y) = pp.parties();
            for (idx, party) in [(i, x), (j, y)] {
                if idx >= settings[party] {
                    return Err(InequalityError::IndexOutOfRange { index: idx, m: settings[party] });
                }
            }
            if p.insert((pp, i, j), v).is_some() {
                return Err(InequalityError::Duplicate(vec![i, j]));
            }
        }
        let mut t = BTreeMap::new();
        for ((i, j, k), v) in triples {
            for (idx, party) in [(i, 0), (j, 1), (k, 2)] {
                if idx >= settings[party] {
                    return Err(InequalityError::IndexOutOfRange { index: idx, m: settings[party] });
                }
            }
            if t.insert((i, j, k), v).is_some() {
                return Err(InequalityError::Duplicate(vec![i, j, k]));
            }
        }
        p.retain(|_, v: &mut Rational| !v.is_zero());
        t.retain(|_, v: &mut Rational| !v.is_zero());
        Ok(AsymmetricBellInequality { settings, pairs: p, triples: t })
    }

    pub fn settings(&self) -> [usize; 3] {
        self.settings
    }

    pub fn pairs(&self) -> &BTreeMap<(PartyPair, usize, usize), Rational> {
        &self.pairs
    }

    pub fn triples(&self) -> &BTreeMap<(usize, usize, usize), Rational> {
        &self.triples
    }

    pub fn support_size(&self) -> usize {
        self.pairs.len() + self.triples.len()
    }

    pub fn scaled(&self, factor: &Rational) -> Self {
        AsymmetricBellInequality {
            settings: self.settings,
            pairs: self.pairs.iter().map(|(k, v)| (*k, v * factor)).filter(|(_, v)| !v.is_zero()).collect(),
            triples: self.triples.iter().map(|(k, v)| (*k, v * factor)).filter(|(_, v)| !v.is_zero()).collect(),
        }
    }

    pub fn integer_normalized(&self) -> Self {
        let values: Vec<&Rational> = self.pairs.values().chain(self.triples.values()).collect();
        if values.is_empty() {
            return self.clone();
        }
        let lcm = Rational::from(lcm_of_denominators(values.iter().copied()));
        let ints: Vec<Rational> = values.iter().map(|v| *v * &lcm).collect();
        let gcd = Rational::from(gcd_of_numerators(&ints));
        self.scaled(&(&lcm / &gcd))
    }

    pub fn to_json(&self) -> AsymmetricJson {
        let frac = |v: &Rational| (v.numer().to_i64().unwrap(), v.denom().to_i64().unwrap());
        AsymmetricJson {
            settings: self.settings,
            pairs: self
                .pairs
                .iter()
                .map(|(&(p, i, j), v)| {
                    let (n, d) = frac(v);
                    (p.label().to_string(), i + 1, j + 1, n, d)
                })
                .collect(),
            triples: self
                .triples
                .iter()
                .map(|(&(i, j, k), v)| {
                    let (n, d) = frac(v);
                    (i + 1, j + 1, k + 1, n, d)
                })
                .collect(),
        }
    }

    pub fn from_json(json: &AsymmetricJson) -> Result<Self, InequalityError> {
        let mut pairs = Vec::new();
        for (label, i, j, n, d) in &json.pairs {
            let p = PartyPair::from_label(label)
                .ok_or_else(|| InequalityError::Format(format!("unknown party pair `{}`", label)))?;
            if *i == 0 || *j == 0 || *d <= 0 {
                return Err(InequalityError::Format("indices are 1-based, denominators positive".into()));
            }
            pairs.push(((p, i - 1, j - 1), Rational::new(*n, *d)));
        }
        let mut triples = Vec::new();
        for &(i, j, k, n, d) in &json.triples {
            if i == 0 || j == 0 || k == 0 || d <= 0 {
                return Err(InequalityError::Format("indices are 1-based, denominators positive".into()));
            }
            triples.push(((i - 1, j - 1, k - 1), Rational::new(n, d)));
        }
        Self::new(json.settings, pairs, triples)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsymmetricJson {
    pub settings: [usize; 3],
    pub pairs: Vec<(String, usize, usize, i64, i64)>,
    pub triples: Vec<(usize, usize, usize, i64, i64)>,
}

fn check_party_angles<T>(ineq: &AsymmetricBellInequality, angles: [&[T]; 3]) -> Result<(), InequalityError> {
    for (p, a) in angles.iter().enumerate() {
        if a.len() != ineq.settings[p] {
            return Err(InequalityError::LengthMismatch {
                expected: ineq.settings[p],
                got: a.len(),
            });
        }
    }
    Ok(())
}

/// Split of the asymmetric inequality on `state` through the tensor evaluator.
pub fn asym_split(
    ineq: &AsymmetricBellInequality,
    state: &SymmetricState,
    angles: [&[f64]; 3],
) -> Result<EfficiencySplit, InequalityError> {
    check_party_angles(ineq, angles)?;
    let amps = state.amplitudes();
    let mat = |party: usize, idx: usize| ProjectorAngle::new(angles[party][idx]).matrix();
    let mut m2 = 0.0;
    for (&(pp, i, j), v) in &ineq.pairs {
        let (x, y) = pp.parties();
        let mut ops = [ID; 3];
        ops[x] = mat(x, i);
        ops[y] = mat(y, j);
        m2 += v.to_f64() * matrix_element_raw(&amps, &amps, &ops);
    }
    let mut m3 = 0.0;
    for (&(i, j, k), v) in &ineq.triples {
        m3 += v.to_f64() * matrix_element_raw(&amps, &amps, &[mat(0, i), mat(1, j), mat(2, k)]);
    }
    Ok(EfficiencySplit::new(m2, m3))
}

pub fn asym_quantum_value(
    ineq: &AsymmetricBellInequality,
    state: &SymmetricState,
    angles: [&[f64]; 3],
    eta: f64,
) -> Result<f64, InequalityError> {
    effective_value(&asym_split(ineq, state, angles)?, eta)
}

/// Exact small-angle |W⟩ split (units of x⁴) of an asymmetric inequality.
pub fn asym_small_angle_split_w(
    ineq: &AsymmetricBellInequality,
    slopes: [&[Rational]; 3],
) -> Result<ExactSplit, InequalityError> {
    check_party_angles(ineq, slopes)?;
    let mut m2 = Rational::zero();
    for (&(pp, i, j), v) in &ineq.pairs {
        let (x, y) = pp.parties();
        let (a, b) = (&slopes[x][i], &slopes[y][j]);
        if !(a + b).is_zero() {
            return Err(InequalityError::PairingRule(i, j));
        }
        m2 += &(v * &small_pair_x4(a, b));
    }
    let mut m3 = Rational::zero();
    for (&(i, j, k), v) in &ineq.triples {
        m3 += &(v * &small_triple_x4(&slopes[0][i], &slopes[1][j], &slopes[2][k]));
    }
    Ok(ExactSplit { m2, m3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::SymmetricState;

    fn eq15() -> SymmetricBellInequality {
        SymmetricBellInequality::from_integers(2, &[(1, 1, -1)], &[(1, 1, 1, 2), (1, 1, 2, 1), (1, 2, 2, -1)]).unwrap()
    }

    #[test]
    fn multiplicities() {
        assert_eq!(pair_multiplicity(1, 1), 3);
        assert_eq!(pair_multiplicity(0, 2), 6);
        assert_eq!(triple_multiplicity(2, 2, 2), 1);
        assert_eq!(triple_multiplicity(0, 0, 1), 3);
        assert_eq!(triple_multiplicity(0, 1, 2), 6);
        assert_eq!(sorted_pairs(3).count(), 6);
        assert_eq!(sorted_triples(3).count(), 10);
    }

    #[test]
    fn effective_value_examples() {
        let s = EfficiencySplit::new(-1.0, 2.0);
        assert_eq!(effective_value(&s, 0.0).unwrap(), 0.0);
        assert_eq!(effective_value(&s, 1.0).unwrap(), 1.0);
        assert_eq!(effective_value(&s, 0.5).unwrap(), 0.0);
        assert!(effective_value(&s, 1.5).is_err());
        assert_eq!(eta_crit(&s).unwrap(), 0.5);
        assert_eq!(eta_crit(&EfficiencySplit::new(-18.0, 30.0)).unwrap(), 0.6);
        assert!(matches!(eta_crit(&EfficiencySplit::new(-1.0, 0.0)), Err(InequalityError::NoViolation(_))));
    }

    #[test]
    fn eq15_at_printed_angles() {
        let angles = [ProjectorAngle::new(2.28059), ProjectorAngle::new(0.33432)];
        let split = quantum_split(&eq15(), &SymmetricState::w(), &angles).unwrap();
        assert!((eta_crit(&split).unwrap() - 0.83747).abs() < 1e-5);
    }

    #[test]
    fn zero_inequality_has_zero_split() {
        let z = SymmetricBellInequality::zero(3).unwrap();
        let split = quantum_split(&z, &SymmetricState::w(), &[ProjectorAngle::new(0.3); 3]).unwrap();
        assert_eq!(split, EfficiencySplit::new(0.0, 0.0));
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let ineq = eq15();
        let json = ineq.to_json();
        assert_eq!(json.m2, vec![(1, 1, -1, 1)]);
        assert_eq!(SymmetricBellInequality::from_json(&json).unwrap(), ineq);
        let mut bad = json.clone();
        bad.m3.push((2, 1, 1, 1, 1));
        assert!(SymmetricBellInequality::from_json(&bad).is_err());
        let mut bad = json;
        bad.m2.push((1, 1, 1, 1));
        assert!(SymmetricBellInequality::from_json(&bad).is_err());
    }

    #[test]
    fn integer_normalization() {
        let ineq = SymmetricBellInequality::new(
            2,
            [((0, 0), Rational::new(-1, 3))],
            [((0, 0, 1), Rational::new(2, 9))],
        )
        .unwrap();
        let n = ineq.integer_normalized();
        assert_eq!(n.pair(0, 0), Rational::from_integer(-3));
        assert_eq!(n.triple(1, 0, 0), Rational::from_integer(2));
    }

    #[test]
    fn constructor_rejects_bad_indices() {
        assert!(SymmetricBellInequality::from_integers(2, &[(1, 3, -1)], &[]).is_err());
        assert!(SymmetricBellInequality::from_integers(2, &[(1, 2, -1), (2, 1, -1)], &[]).is_err());
        assert!(SymmetricBellInequality::zero(0).is_err());
        assert!(SymmetricBellInequality::zero(9).is_err());
    }
}
