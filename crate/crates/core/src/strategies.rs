//! Deterministic local strategies and exact classical values.
//!
//! A strategy is three m-bit outcome vectors. Its code is `a | b<<m | c<<2m`
//! and the canonical orbit representative under party swaps is the one with
//! the smallest code, which means c ≤ b ≤ a as integers.

use bellforge_lp::{lcm_of_denominators, Rational};
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::inequality::{AsymmetricBellInequality, InequalityError, PartyPair, SymmetricBellInequality, MAX_SETTINGS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StrategyError {
    #[error("number of settings must be between 1 and {max}, got {0}", max = MAX_SETTINGS)]
    Settings(usize),
    #[error("strategy has {got} settings, inequality has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coefficients too large for integer evaluation")]
    Overflow,
    #[error(transparent)]
    Inequality(#[from] InequalityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DeterministicStrategy {
    m: u8,
    a: u16,
    b: u16,
    c: u16,
}

impl DeterministicStrategy {
    pub fn new(m: usize, a: u32, b: u32, c: u32) -> Result<Self, StrategyError> {
        if m == 0 || m > MAX_SETTINGS {
            return Err(StrategyError::Settings(m));
        }
        let mask = (1u32 << m) - 1;
        Ok(DeterministicStrategy {
            m: m as u8,
            a: (a & mask) as u16,
            b: (b & mask) as u16,
            c: (c & mask) as u16,
        })
    }

    /// From explicit 0/1 vectors.
    pub fn from_bits(a: &[u8], b: &[u8], c: &[u8]) -> Result<Self, StrategyError> {
        let m = a.len();
        if b.len() != m || c.len() != m {
            return Err(StrategyError::DimensionMismatch { expected: m, got: b.len().max(c.len()) });
        }
        let pack = |v: &[u8]| v.iter().enumerate().fold(0u32, |acc, (i, &x)| acc | (u32::from(x & 1) << i));
        Self::new(m, pack(a), pack(b), pack(c))
    }

    pub fn from_code(m: usize, code: u32) -> Result<Self, StrategyError> {
        let mask = (1u32 << m) - 1;
        Self::new(m, code & mask, (code >> m) & mask, (code >> (2 * m)) & mask)
    }

    pub fn m(&self) -> usize {
        self.m as usize
    }

    pub fn code(&self) -> u32 {
        let m = self.m as u32;
        self.a as u32 | (self.b as u32) << m | (self.c as u32) << (2 * m)
    }

    /// Outcome words of the three parties.
    pub fn words(&self) -> [u32; 3] {
        [self.a as u32, self.b as u32, self.c as u32]
    }

    pub fn bit(&self, party: usize, setting: usize) -> u8 {
        ((self.words()[party] >> setting) & 1) as u8
    }

    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let w = self.words();
        DeterministicStrategy {
            m: self.m,
            a: w[perm[0]] as u16,
            b: w[perm[1]] as u16,
            c: w[perm[2]] as u16,
        }
    }

    pub fn canonical(&self) -> Self {
        let mut w = self.words();
        w.sort_unstable_by(|x, y| y.cmp(x));
        DeterministicStrategy {
            m: self.m,
            a: w[0] as u16,
            b: w[1] as u16,
            c: w[2] as u16,
        }
    }

    pub fn nonzero_parties(&self) -> usize {
        self.words().iter().filter(|&&w| w != 0).count()
    }
}

pub const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// All 2^{3m} strategies in ascending code order, or with `reduce` one
/// canonical representative per party-swap orbit, skipping strategies with
/// fewer than two nonzero parties (their value is always 0).
pub fn enumerate(m: usize, reduce: bool) -> Result<Box<dyn Iterator<Item = DeterministicStrategy>>, StrategyError> {
    if m == 0 || m > MAX_SETTINGS {
        return Err(StrategyError::Settings(m));
    }
    let n = 1u32 << m;
    if !reduce {
        let total = 1u32 << (3 * m);
        return Ok(Box::new((0..total).map(move |code| DeterministicStrategy::from_code(m, code).unwrap())));
    }
    Ok(Box::new((0..n).flat_map(move |c| {
        (c..n).flat_map(move |b| {
            (b..n).filter_map(move |a| {
                let s = DeterministicStrategy::new(m, a, b, c).unwrap();
                (s.nonzero_parties() >= 2).then_some(s)
            })
        })
    })))
}

/// Exact value of the fully expanded inequality at `s`.
pub fn classical_value(ineq: &SymmetricBellInequality, s: &DeterministicStrategy) -> Result<Rational, StrategyError> {
    let m = ineq.m();
    if s.m() != m {
        return Err(StrategyError::DimensionMismatch { expected: m, got: s.m() });
    }
    let bit = |p: usize, i: usize| i64::from(s.bit(p, i));
    let mut value = Rational::zero();
    for i in 0..m {
        for j in 0..m {
            let w = bit(0, i) * bit(1, j) + bit(0, i) * bit(2, j) + bit(1, i) * bit(2, j);
            if w != 0 {
                value += &(ineq.pair(i, j) * Rational::from_integer(w));
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                if bit(0, i) * bit(1, j) * bit(2, k) != 0 {
                    value += &ineq.triple(i, j, k);
                }
            }
        }
    }
    Ok(value)
}

/// Full symmetric tensors scaled by a common positive integer.
#[derive(Debug, Clone)]
pub struct IntegerTensors {
    pub m: usize,
    pub scale: Rational,
    pub t2: Vec<i64>,
    pub t3: Vec<i64>,
}

impl IntegerTensors {
    pub fn new(ineq: &SymmetricBellInequality) -> Result<Self, StrategyError> {
        let m = ineq.m();
        let lcm = Rational::from(lcm_of_denominators(ineq.m2().values().chain(ineq.m3().values())));
        let to_int = |r: Rational| -> Result<i64, StrategyError> {
            (r * &lcm).numer().to_i64().filter(|v| v.abs() < (1 << 40)).ok_or(StrategyError::Overflow)
        };
        let mut t2 = vec![0; m * m];
        for i in 0..m {
            for j in 0..m {
                t2[i * m + j] = to_int(ineq.pair(i, j))?;
            }
        }
        let mut t3 = vec![0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    t3[(i * m + j) * m + k] = to_int(ineq.triple(i, j, k))?;
                }
            }
        }
        Ok(IntegerTensors { m, scale: lcm, t2, t3 })
    }

    /// For fixed (a, b): value(c) = constant + Σ_{k∈c} linear[k].
    pub fn pair_data(&self, a: u32, b: u32) -> (i64, Vec<i64>) {
        let m = self.m;
        let mut lin = vec![0i64; m];
        let mut constant = 0i64;
        for i in (0..m).filter(|i| a >> i & 1 == 1) {
            for j in 0..m {
                lin[j] += self.t2[i * m + j];
            }
            for j in (0..m).filter(|j| b >> j & 1 == 1) {
                constant += self.t2[i * m + j];
                let base = (i * m + j) * m;
                for k in 0..m {
                    lin[k] += self.t3[base + k];
                }
            }
        }
        for i in (0..m).filter(|i| b >> i & 1 == 1) {
            for j in 0..m {
                lin[j] += self.t2[i * m + j];
            }
        }
        (constant, lin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalBound {
    pub value: Rational,
    pub argmax: DeterministicStrategy,
    pub strategies_checked: u64,
}

fn subset_sums(lin: &[i64]) -> Vec<i64> {
    let n = 1usize << lin.len();
    let mut sums = vec![0i64; n];
    for c in 1..n {
        let low = c.trailing_zeros() as usize;
        sums[c] = sums[c & (c - 1)] + lin[low];
    }
    sums
}

/// Maximum classical value over one representative per orbit (exact).
pub fn classical_bound(ineq: &SymmetricBellInequality) -> Result<ClassicalBound, StrategyError> {
    let t = IntegerTensors::new(ineq)?;
    let m = t.m;
    let n = 1u32 << m;
    let mut best = (0i64, DeterministicStrategy::new(m, 0, 0, 0)?);
    let mut checked = 1u64;
    for a in 0..n {
        for b in 0..=a {
            let (constant, lin) = t.pair_data(a, b);
            let sums = subset_sums(&lin);
            for c in 0..=b {
                let s_nonzero = (a != 0) as u8 + (b != 0) as u8 + (c != 0) as u8;
                if s_nonzero < 2 {
                    continue;
                }
                checked += 1;
                let v = constant + sums[c as usize];
                if v > best.0 {
                    best = (v, DeterministicStrategy::new(m, a, b, c)?);
                }
            }
        }
    }
    Ok(ClassicalBound {
        value: Rational::from_integer(best.0) / &t.scale,
        argmax: best.1,
        strategies_checked: checked,
    })
}

/// Maximum over all 2^{3m} strategies without any symmetry reduction.
pub fn classical_bound_full(ineq: &SymmetricBellInequality) -> Result<ClassicalBound, StrategyError> {
    let t = IntegerTensors::new(ineq)?;
    let m = t.m;
    let n = 1u32 << m;
    let mut best = (0i64, DeterministicStrategy::new(m, 0, 0, 0)?);
    for a in 0..n {
        for b in 0..n {
            let (constant, lin) = t.pair_data(a, b);
            let sums = subset_sums(&lin);
            for c in 0..n {
                let v = constant + sums[c as usize];
                if v > best.0 {
                    best = (v, DeterministicStrategy::new(m, a, b, c)?);
                }
            }
        }
    }
    Ok(ClassicalBound {
        value: Rational::from_integer(best.0) / &t.scale,
        argmax: best.1,
        strategies_checked: 1u64 << (3 * m),
    })
}

/// Coefficient of each LP variable in the classical value of `s`: sorted
/// pairs contribute their ordered-pair count, sorted triples the number of
/// distinct permutations realized by (a, b, c).
pub fn pair_coefficient(s: &DeterministicStrategy, i: usize, j: usize) -> i64 {
    let w = s.words();
    let bit = |p: usize, x: usize| i64::from((w[p] >> x) & 1);
    let ordered = |x: usize, y: usize| bit(0, x) * bit(1, y) + bit(0, x) * bit(2, y) + bit(1, x) * bit(2, y);
    if i == j {
        ordered(i, i)
    } else {
        ordered(i, j) + ordered(j, i)
    }
}

pub fn triple_coefficient(s: &DeterministicStrategy, i: usize, j: usize, k: usize) -> i64 {
    let w = s.words();
    let bit = |p: usize, x: usize| i64::from((w[p] >> x) & 1);
    let mut perms: Vec<[usize; 3]> = PERMUTATIONS
        .iter()
        .map(|p| {
            let idx = [i, j, k];
            [idx[p[0]], idx[p[1]], idx[p[2]]]
        })
        .collect();
    perms.sort_unstable();
    perms.dedup();
    perms.iter().map(|p| bit(0, p[0]) * bit(1, p[1]) * bit(2, p[2])).sum()
}

/// Exact value of an asymmetric inequality at outcome words (a, b, c).
pub fn asym_classical_value(ineq: &AsymmetricBellInequality, words: [u32; 3]) -> Rational {
    let bit = |p: usize, x: usize| (words[p] >> x) & 1 == 1;
    let mut v = Rational::zero();
    for (&(pp, i, j), c) in ineq.pairs() {
        let (x, y) = pp.parties();
        if bit(x, i) && bit(y, j) {
            v += c;
        }
    }
    for (&(i, j, k), c) in ineq.triples() {
        if bit(0, i) && bit(1, j) && bit(2, k) {
            v += c;
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymClassicalBound {
    pub value: Rational,
    pub argmax: [u32; 3],
    pub strategies_checked: u64,
}

/// Exhaustive maximum over all 2^{m_A+m_B+m_C} strategies.
pub fn asym_classical_bound(ineq: &AsymmetricBellInequality) -> Result<AsymClassicalBound, StrategyError> {
    let [ma, mb, mc] = ineq.settings();
    let lcm = Rational::from(lcm_of_denominators(ineq.pairs().values().chain(ineq.triples().values())));
    let to_int = |r: &Rational| -> Result<i64, StrategyError> {
        (r * &lcm).numer().to_i64().ok_or(StrategyError::Overflow)
    };
    let pairs: Vec<(PartyPair, usize, usize, i64)> = ineq
        .pairs()
        .iter()
        .map(|(&(p, i, j), v)| Ok((p, i, j, to_int(v)?)))
        .collect::<Result<_, StrategyError>>()?;
    let triples: Vec<(usize, usize, usize, i64)> = ineq
        .triples()
        .iter()
        .map(|(&(i, j, k), v)| Ok((i, j, k, to_int(v)?)))
        .collect::<Result<_, StrategyError>>()?;
    let mut best = (0i64, [0u32; 3]);
    for a in 0..1u32 << ma {
        for b in 0..1u32 << mb {
            for c in 0..1u32 << mc {
                let w = [a, b, c];
                let bit = |p: usize, x: usize| (w[p] >> x) & 1 == 1;
                let mut v = 0i64;
                for &(pp, i, j, coef) in &pairs {
                    let (x, y) = pp.parties();
                    if bit(x, i) && bit(y, j) {
                        v += coef;
                    }
                }
                for &(i, j, k, coef) in &triples {
                    if bit(0, i) && bit(1, j) && bit(2, k) {
                        v += coef;
                    }
                }
                if v > best.0 {
                    best = (v, w);
                }
            }
        }
    }
    Ok(AsymClassicalBound {
        value: Rational::from_integer(best.0) / &lcm,
        argmax: best.1,
        strategies_checked: 1u64 << (ma + mb + mc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq15() -> SymmetricBellInequality {
        SymmetricBellInequality::from_integers(2, &[(1, 1, -1)], &[(1, 1, 1, 2), (1, 1, 2, 1), (1, 2, 2, -1)]).unwrap()
    }

    #[test]
    fn counts() {
        assert_eq!(enumerate(1, false).unwrap().count(), 8);
        assert_eq!(enumerate(2, false).unwrap().count(), 64);
        assert!(enumerate(0, false).is_err());
        assert!(enumerate(9, true).is_err());
    }

    #[test]
    fn reduced_count_matches_brute_force_orbits() {
        for m in 1..=3 {
            let mut orbits: Vec<DeterministicStrategy> = enumerate(m, false)
                .unwrap()
                .filter(|s| s.nonzero_parties() >= 2)
                .map(|s| s.canonical())
                .collect();
            orbits.sort();
            orbits.dedup();
            assert_eq!(enumerate(m, true).unwrap().count(), orbits.len());
        }
        assert_eq!(enumerate(2, true).unwrap().count(), 16);
    }

    #[test]
    fn reduced_enumeration_is_ascending_and_canonical() {
        let codes: Vec<u32> = enumerate(3, true).unwrap().map(|s| s.code()).collect();
        assert!(codes.windows(2).all(|w| w[0] < w[1]));
        for s in enumerate(3, true).unwrap() {
            assert_eq!(s.canonical(), s);
            let min = PERMUTATIONS.iter().map(|p| s.permuted(*p).code()).min().unwrap();
            assert_eq!(s.code(), min);
        }
    }

    #[test]
    fn eq15_values() {
        let ineq = eq15();
        let zero = DeterministicStrategy::new(2, 0, 0, 0).unwrap();
        assert_eq!(classical_value(&ineq, &zero).unwrap(), Rational::zero());
        let s = DeterministicStrategy::from_bits(&[1, 0], &[1, 0], &[0, 0]).unwrap();
        assert_eq!(classical_value(&ineq, &s).unwrap(), Rational::from_integer(-1));
        let s = DeterministicStrategy::from_bits(&[1, 0], &[1, 0], &[1, 0]).unwrap();
        assert_eq!(classical_value(&ineq, &s).unwrap(), Rational::from_integer(-1));
        assert_eq!(classical_bound(&ineq).unwrap().value, Rational::zero());
        assert_eq!(classical_bound_full(&ineq).unwrap().value, Rational::zero());
    }

    #[test]
    fn zero_inequality_bound() {
        let z = SymmetricBellInequality::zero(3).unwrap();
        assert_eq!(classical_bound(&z).unwrap().value, Rational::zero());
    }

    #[test]
    fn mismatched_dimensions() {
        let s = DeterministicStrategy::new(3, 1, 1, 1).unwrap();
        assert!(classical_value(&eq15(), &s).is_err());
    }
}
