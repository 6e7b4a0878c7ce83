//! Threshold-minimizing inequality synthesis by column generation.
//!
//! For a fixed state and fixed measurements the quantum value of an
//! inequality with coefficient vector M is η²·(A·M) + η³·(B·M). Fixing
//! A·M = −1 and maximizing B·M over the cone {M : s·M ≤ 0 for every
//! deterministic strategy s} gives the smallest threshold 1/max(B·M).
//! The solver works on the dual, where strategies are columns, so only the
//! strategies that matter are ever generated.

use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use bellforge_lp::{
    Bound, LinearProgram, LpError, PhaseOne, PhaseTwo, PivotRule, Rational, Relation, RevisedSimplex, Scalar,
    Sense, SimplexError, Solution,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::inequality::{
    pair_multiplicity, sorted_pairs, sorted_triples, triple_multiplicity, AsymmetricBellInequality,
    EfficiencySplit, InequalityError, InequalityJson, PartyPair, SymmetricBellInequality, MAX_SETTINGS,
    PAIRING_TOL,
};
use crate::quantum::{e2, matrix_element_raw, small_pair_x4, small_triple_x4, ProjectorAngle, SymmetricState};
use crate::strategies::{
    asym_classical_value, classical_bound, classical_value, enumerate, pair_coefficient, triple_coefficient, DeterministicStrategy,
    StrategyError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthesisError {
    #[error("LP infeasible: the two-party part cannot be normalized to -1")]
    Infeasible,
    #[error("LP unbounded: degenerate angle set")]
    Unbounded,
    #[error("no violation: best achievable threshold is {0}")]
    NoViolation(f64),
    #[error("column generation did not converge in {0} rounds")]
    NoConvergence(usize),
    #[error("could not recover exact coefficients from the floating point optimum")]
    Reconstruction,
    #[error("mixing iteration did not converge after {0} iterations")]
    MixingNoConvergence(usize),
    #[error("no asymmetric inequality reproduces the symmetric quantum value with these settings")]
    AsymmetricInfeasible,
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Inequality(#[from] InequalityError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// Independent LP variable: a sorted two- or three-party coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Coefficient {
    Pair(usize, usize),
    Triple(usize, usize, usize),
}

impl Coefficient {
    pub fn strategy_coefficient(&self, s: &DeterministicStrategy) -> i64 {
        match *self {
            Coefficient::Pair(i, j) => pair_coefficient(s, i, j),
            Coefficient::Triple(i, j, k) => triple_coefficient(s, i, j, k),
        }
    }
}

/// State and measurements the inequality is optimized for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum QuantumModel {
    /// Finite projector angles, same for every party.
    Finite { state: SymmetricState, angles: Vec<f64> },
    /// |W⟩ at small angles φ_i·x, rational slopes (solved exactly).
    SmallAngleW { slopes: Vec<Rational> },
    /// |W⟩ at small angles, floating point slopes.
    SmallAngleWFloat { slopes: Vec<f64> },
    /// cos(a x²)|W⟩ + sin(a x²)|111⟩ at small angles with fixed mixing slope a.
    SmallAnglePsi { slopes: Vec<f64>, mixing: f64 },
}

fn cancels(a: f64, b: f64) -> bool {
    (a + b).abs() <= PAIRING_TOL * (1.0 + a.abs() + b.abs())
}

impl QuantumModel {
    pub fn m(&self) -> usize {
        match self {
            QuantumModel::Finite { angles, .. } => angles.len(),
            QuantumModel::SmallAngleW { slopes } => slopes.len(),
            QuantumModel::SmallAngleWFloat { slopes } | QuantumModel::SmallAnglePsi { slopes, .. } => slopes.len(),
        }
    }

    pub fn slopes_f64(&self) -> Option<Vec<f64>> {
        match self {
            QuantumModel::Finite { .. } => None,
            QuantumModel::SmallAngleW { slopes } => Some(slopes.iter().map(|s| s.to_f64()).collect()),
            QuantumModel::SmallAngleWFloat { slopes } | QuantumModel::SmallAnglePsi { slopes, .. } => {
                Some(slopes.clone())
            }
        }
    }

    fn validate(&self) -> Result<(), SynthesisError> {
        let m = self.m();
        if m == 0 || m > MAX_SETTINGS {
            return Err(SynthesisError::Input(format!("m must be between 1 and {}, got {}", MAX_SETTINGS, m)));
        }
        let finite = match self {
            QuantumModel::Finite { angles, .. } => angles.iter().all(|a| a.is_finite()),
            QuantumModel::SmallAngleW { .. } => true,
            QuantumModel::SmallAngleWFloat { slopes } => slopes.iter().all(|a| a.is_finite()),
            QuantumModel::SmallAnglePsi { slopes, mixing } => {
                mixing.is_finite() && slopes.iter().all(|a| a.is_finite())
            }
        };
        if !finite {
            return Err(SynthesisError::Input("non-finite angle or slope".into()));
        }
        Ok(())
    }

    /// LP variables. Small-angle models only admit two-party terms whose
    /// slopes cancel; any other pair would dominate at order x².
    pub fn variables(&self) -> Vec<Coefficient> {
        let m = self.m();
        let pair_ok = |i: usize, j: usize| match self {
            QuantumModel::Finite { .. } => true,
            QuantumModel::SmallAngleW { slopes } => (&slopes[i] + &slopes[j]).is_zero(),
            QuantumModel::SmallAngleWFloat { slopes } | QuantumModel::SmallAnglePsi { slopes, .. } => {
                cancels(slopes[i], slopes[j])
            }
        };
        let mut v: Vec<Coefficient> = sorted_pairs(m)
            .filter(|&(i, j)| pair_ok(i, j))
            .map(|(i, j)| Coefficient::Pair(i, j))
            .collect();
        v.extend(sorted_triples(m).map(|(i, j, k)| Coefficient::Triple(i, j, k)));
        v
    }

    /// (η² weight, η³ weight) of each variable.
    pub fn weights_f64(&self, vars: &[Coefficient]) -> (Vec<f64>, Vec<f64>) {
        let r3 = 3f64.sqrt();
        let mut a = vec![0.0; vars.len()];
        let mut b = vec![0.0; vars.len()];
        let amps = match self {
            QuantumModel::Finite { state, .. } => Some(state.amplitudes()),
            _ => None,
        };
        let id = [[1.0, 0.0], [0.0, 1.0]];
        for (n, v) in vars.iter().enumerate() {
            match (*v, self) {
                (Coefficient::Pair(i, j), QuantumModel::Finite { angles, .. }) => {
                    let amps = amps.as_ref().unwrap();
                    let ops = [ProjectorAngle::new(angles[i]).matrix(), ProjectorAngle::new(angles[j]).matrix(), id];
                    a[n] = pair_multiplicity(i, j) as f64 * matrix_element_raw(amps, amps, &ops);
                }
                (Coefficient::Triple(i, j, k), QuantumModel::Finite { angles, .. }) => {
                    let amps = amps.as_ref().unwrap();
                    let ops = [
                        ProjectorAngle::new(angles[i]).matrix(),
                        ProjectorAngle::new(angles[j]).matrix(),
                        ProjectorAngle::new(angles[k]).matrix(),
                    ];
                    b[n] = triple_multiplicity(i, j, k) as f64 * matrix_element_raw(amps, amps, &ops);
                }
                (Coefficient::Pair(i, j), _) => {
                    let s = self.slopes_f64().unwrap();
                    let mut w = small_pair_x4(&s[i], &s[j]);
                    if let QuantumModel::SmallAnglePsi { mixing, .. } = self {
                        w += 2.0 * mixing * s[i] * s[j] / (4.0 * r3) + mixing * mixing;
                    }
                    a[n] = pair_multiplicity(i, j) as f64 * w;
                }
                (Coefficient::Triple(i, j, k), _) => {
                    let s = self.slopes_f64().unwrap();
                    let mut w = small_triple_x4(&s[i], &s[j], &s[k]);
                    if let QuantumModel::SmallAnglePsi { mixing, .. } = self {
                        w += 2.0 * mixing * e2(&s[i], &s[j], &s[k]) / (4.0 * r3) + mixing * mixing;
                    }
                    b[n] = triple_multiplicity(i, j, k) as f64 * w;
                }
            }
        }
        (a, b)
    }

    /// Exact weights, available for rational |W⟩ slopes.
    pub fn weights_exact(&self, vars: &[Coefficient]) -> Option<(Vec<Rational>, Vec<Rational>)> {
        let QuantumModel::SmallAngleW { slopes } = self else {
            return None;
        };
        let mut a = vec![Rational::zero(); vars.len()];
        let mut b = vec![Rational::zero(); vars.len()];
        for (n, v) in vars.iter().enumerate() {
            match *v {
                Coefficient::Pair(i, j) => {
                    a[n] = small_pair_x4(&slopes[i], &slopes[j]) * Rational::from_integer(pair_multiplicity(i, j) as i64)
                }
                Coefficient::Triple(i, j, k) => {
                    b[n] = small_triple_x4(&slopes[i], &slopes[j], &slopes[k])
                        * Rational::from_integer(triple_multiplicity(i, j, k) as i64)
                }
            }
        }
        Some((a, b))
    }

    /// Split of an arbitrary inequality under this model.
    pub fn split(&self, ineq: &SymmetricBellInequality) -> EfficiencySplit {
        let vars: Vec<Coefficient> = ineq
            .m2()
            .keys()
            .map(|&(i, j)| Coefficient::Pair(i, j))
            .chain(ineq.m3().keys().map(|&(i, j, k)| Coefficient::Triple(i, j, k)))
            .collect();
        let (a, b) = self.weights_f64(&vars);
        let values = coefficient_values(ineq, &vars);
        let dot = |w: &[f64]| w.iter().zip(&values).map(|(x, y)| x * y.to_f64()).sum::<f64>();
        EfficiencySplit::new(dot(&a), dot(&b))
    }
}

fn coefficient_values(ineq: &SymmetricBellInequality, vars: &[Coefficient]) -> Vec<Rational> {
    vars.iter()
        .map(|v| match *v {
            Coefficient::Pair(i, j) => ineq.pair(i, j),
            Coefficient::Triple(i, j, k) => ineq.triple(i, j, k),
        })
        .collect()
}

fn build_inequality(m: usize, vars: &[Coefficient], values: &[Rational]) -> Result<SymmetricBellInequality, SynthesisError> {
    let mut pairs = Vec::new();
    let mut triples = Vec::new();
    for (v, x) in vars.iter().zip(values) {
        match *v {
            Coefficient::Pair(i, j) => pairs.push(((i, j), x.clone())),
            Coefficient::Triple(i, j, k) => triples.push(((i, j, k), x.clone())),
        }
    }
    Ok(SymmetricBellInequality::new(m, pairs, triples)?)
}

#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    /// Greedily drop coefficients while the optimum is unchanged.
    pub minimize_support: bool,
    /// Column generation rounds before giving up.
    pub max_rounds: usize,
    /// Strategies added per round at most.
    pub batch: usize,
    /// Solve rational |W⟩ slope models exactly up to this many settings.
    pub exact_max_m: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            minimize_support: true,
            max_rounds: 5000,
            batch: 40,
            exact_max_m: 5,
        }
    }
}

/// Strategies found by earlier solves, reused as starting columns.
#[derive(Debug, Clone, Default)]
pub struct ColumnPool {
    m: usize,
    codes: BTreeSet<u32>,
}

impl ColumnPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    fn reset_for(&mut self, m: usize) {
        if self.m != m {
            self.m = m;
            self.codes.clear();
        }
    }

    fn insert(&mut self, s: &DeterministicStrategy) {
        self.codes.insert(s.canonical().code());
    }

    fn strategies(&self) -> Vec<DeterministicStrategy> {
        self.codes
            .iter()
            .map(|&c| DeterministicStrategy::from_code(self.m, c).unwrap())
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// max B·M with A·M = −1.
    pub lp_value: f64,
    /// Strategies carrying the dual certificate with their weights.
    pub tight_strategies: Vec<(DeterministicStrategy, f64)>,
    pub classical_bound: Rational,
    pub strategies_checked: u64,
    pub columns: usize,
    pub rounds: usize,
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    /// Integer coefficients, gcd 1.
    pub inequality: SymmetricBellInequality,
    /// Split in the LP normalization, two-party part −1.
    pub split: EfficiencySplit,
    pub eta_crit: f64,
    pub eta_crit_exact: Option<Rational>,
    pub model: QuantumModel,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisReport {
    pub inequality: InequalityJson,
    pub split: EfficiencySplit,
    pub eta_crit: f64,
    pub eta_crit_exact: Option<String>,
    pub model: QuantumModel,
    pub lp_status: &'static str,
    pub certificate: Certificate,
}

impl SynthesisResult {
    pub fn report(&self) -> SynthesisReport {
        SynthesisReport {
            inequality: self.inequality.to_json(),
            split: self.split,
            eta_crit: self.eta_crit,
            eta_crit_exact: self.eta_crit_exact.as_ref().map(|r| r.to_string()),
            model: self.model.clone(),
            lp_status: "optimal",
            certificate: self.certificate.clone(),
        }
    }
}

// ---- separation ----

/// Strategies violating s·M ≤ 0 the most, one canonical representative each.
/// For fixed outcome words of A and B the best word for C is read off the
/// sign of its linear coefficients, so the search is exhaustive.
pub fn separate(m: usize, vars: &[Coefficient], values: &[f64], limit: usize) -> Vec<(f64, DeterministicStrategy)> {
    let mut t2 = vec![0.0; m * m];
    let mut t3 = vec![0.0; m * m * m];
    let mut scale = 0.0f64;
    for (v, &x) in vars.iter().zip(values) {
        scale = scale.max(x.abs());
        match *v {
            Coefficient::Pair(i, j) => {
                t2[i * m + j] = x;
                t2[j * m + i] = x;
            }
            Coefficient::Triple(i, j, k) => {
                for p in crate::strategies::PERMUTATIONS {
                    let idx = [i, j, k];
                    t3[(idx[p[0]] * m + idx[p[1]]) * m + idx[p[2]]] = x;
                }
            }
        }
    }
    let tol = 1e-9 * (1.0 + scale);
    let n = 1usize << m;
    let mut r2 = vec![0.0; n * m];
    for s in 1..n {
        let low = s.trailing_zeros() as usize;
        let prev = s & (s - 1);
        for k in 0..m {
            r2[s * m + k] = r2[prev * m + k] + t2[low * m + k];
        }
    }
    let mut found: Vec<(f64, u32)> = Vec::new();
    let mut t3a = vec![0.0; m * m];
    let mut lin = vec![0.0; m];
    for a in 1..n {
        t3a.iter_mut().for_each(|x| *x = 0.0);
        for i in (0..m).filter(|i| a >> i & 1 == 1) {
            for jk in 0..m * m {
                t3a[jk] += t3[i * m * m + jk];
            }
        }
        for b in 0..=a {
            let mut value = 0.0;
            for k in 0..m {
                lin[k] = r2[a * m + k] + r2[b * m + k];
            }
            for j in (0..m).filter(|j| b >> j & 1 == 1) {
                value += r2[a * m + j];
                for k in 0..m {
                    lin[k] += t3a[j * m + k];
                }
            }
            let mut c = 0u32;
            for (k, &l) in lin.iter().enumerate() {
                if l > 0.0 {
                    value += l;
                    c |= 1 << k;
                }
            }
            if value > tol {
                let s = DeterministicStrategy::new(m, a as u32, b as u32, c).unwrap().canonical();
                found.push((value, s.code()));
            }
        }
    }
    found.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (v, code) in found {
        if seen.insert(code) {
            out.push((v, DeterministicStrategy::from_code(m, code).unwrap()));
            if out.len() >= limit {
                break;
            }
        }
    }
    out
}

fn initial_strategies(m: usize) -> Vec<DeterministicStrategy> {
    let mut set = BTreeSet::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let s = DeterministicStrategy::new(m, 1 << i, 1 << j, 1 << k).unwrap();
                set.insert(s.canonical());
                set.insert(DeterministicStrategy::new(m, 1 << i, 1 << j, 0).unwrap().canonical());
            }
        }
    }
    set.into_iter().collect()
}

struct CgOutcome<T> {
    /// max B·M
    value: T,
    /// optimal M
    m_vec: Vec<T>,
    tight: Vec<(DeterministicStrategy, T)>,
    columns: usize,
    rounds: usize,
}

/// Dual LP: maximize t s.t. Σ_s y_s·s + t·A = B, y ≥ 0. Returns max B·M = −t*.
fn column_generation<T: Scalar>(
    m: usize,
    vars: &[Coefficient],
    a: &[T],
    b: &[T],
    seeds: &[DeterministicStrategy],
    opts: &SynthesisOptions,
    pool: &mut ColumnPool,
    exact_check: &dyn Fn(&[T]) -> Result<Option<DeterministicStrategy>, SynthesisError>,
) -> Result<CgOutcome<T>, SynthesisError> {
    if a.iter().all(|x| x.is_exact_zero()) {
        return Err(SynthesisError::Infeasible);
    }
    let mut lp = RevisedSimplex::new(b.to_vec(), PivotRule::Dantzig);
    lp.add_column(a.to_vec(), T::one())?;
    lp.add_column(a.iter().map(|x| x.neg()).collect(), T::one().neg())?;
    let mut strategies: Vec<DeterministicStrategy> = Vec::new();
    let mut present = BTreeSet::new();
    let column_of = |s: &DeterministicStrategy| -> Vec<T> {
        vars.iter().map(|v| T::from_i64(v.strategy_coefficient(s))).collect()
    };
    let mut add = |lp: &mut RevisedSimplex<T>, strategies: &mut Vec<DeterministicStrategy>, s: DeterministicStrategy| {
        let s = s.canonical();
        if present.insert(s.code()) {
            lp.add_column(column_of(&s), T::zero())?;
            strategies.push(s);
            Ok::<bool, SynthesisError>(true)
        } else {
            Ok(false)
        }
    };
    for s in seeds {
        add(&mut lp, &mut strategies, *s)?;
    }
    let mut rounds = 0;
    loop {
        rounds += 1;
        if rounds > opts.max_rounds {
            return Err(SynthesisError::NoConvergence(opts.max_rounds));
        }
        let phase_two = if lp.is_feasible() {
            true
        } else {
            lp.phase_one()? == PhaseOne::Feasible
        };
        if phase_two {
            if let PhaseTwo::Unbounded { .. } = lp.phase_two()? {
                // t grows without bound: A·M = −1 is incompatible with locality.
                return Err(SynthesisError::Infeasible);
            }
        }
        let m_vec: Vec<T> = lp.duals().into_iter().map(|p| p.neg()).collect();
        let m_f64: Vec<f64> = m_vec.iter().map(|x| x.to_f64()).collect();
        let candidates = separate(m, vars, &m_f64, opts.batch);
        let mut added = 0;
        for (_, s) in candidates {
            let col = column_of(&s);
            let mut value = T::zero();
            for (c, x) in col.iter().zip(&m_vec) {
                value = value.add(&c.mul(x));
            }
            if value.is_pos() && add(&mut lp, &mut strategies, s)? {
                added += 1;
            }
        }
        if added == 0 {
            if let Some(s) = exact_check(&m_vec)? {
                if add(&mut lp, &mut strategies, s)? {
                    continue;
                }
            }
            if !phase_two {
                // Phase one cannot reach feasibility with any strategy: the
                // primal has an unbounded direction.
                return Err(SynthesisError::Unbounded);
            }
            let primal = lp.primal();
            let tight = primal
                .iter()
                .enumerate()
                .skip(2)
                .filter(|(_, y)| !y.is_exact_zero())
                .map(|(j, y)| (strategies[j - 2], y.clone()))
                .collect();
            for s in &strategies {
                pool.insert(s);
            }
            return Ok(CgOutcome {
                value: lp.objective().neg(),
                m_vec,
                tight,
                columns: strategies.len(),
                rounds,
            });
        }
    }
}

/// Largest exact violation of `values` as an inequality, if any.
fn exact_violation(m: usize, vars: &[Coefficient], values: &[Rational]) -> Result<Option<DeterministicStrategy>, SynthesisError> {
    let ineq = build_inequality(m, vars, values)?.integer_normalized();
    match classical_bound(&ineq) {
        Ok(bound) => Ok(bound.value.is_positive().then_some(bound.argmax.canonical())),
        Err(StrategyError::Overflow) if m <= 5 => {
            let mut best: Option<(Rational, DeterministicStrategy)> = None;
            for s in enumerate(m, true)? {
                let v = classical_value(&ineq, &s)?;
                if v.is_positive() && best.as_ref().is_none_or(|(b, _)| v > *b) {
                    best = Some((v, s));
                }
            }
            Ok(best.map(|(_, s)| s))
        }
        Err(e) => Err(e.into()),
    }
}

/// Rational vector in the span of the kernel of the tight strategy rows
/// that best matches the floating point optimum.
fn reconstruct(
    vars: &[Coefficient],
    tight: &[DeterministicStrategy],
    approx: &[f64],
) -> Option<Vec<Rational>> {
    let n = vars.len();
    let scale = approx.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    let target: Vec<f64> = approx.iter().map(|x| x / scale).collect();
    // Row reduce the tight rows.
    let mut rows: Vec<Vec<Rational>> = tight
        .iter()
        .map(|s| vars.iter().map(|v| Rational::from_integer(v.strategy_coefficient(s))).collect())
        .collect();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][col].recip();
        for x in rows[r].iter_mut() {
            *x = &*x * &inv;
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && !row[col].is_zero() {
                let f = row[col].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    if !y.is_zero() {
                        *x -= &(&f * y);
                    }
                }
            }
        }
        pivots.push(col);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    if free.is_empty() {
        return None;
    }
    let free_scale = free.iter().fold(0.0f64, |acc, &f| acc.max(target[f].abs()));
    let mut candidates = Vec::new();
    for max_den in [1000u64, 1_000_000] {
        let mut vals = vec![Rational::zero(); n];
        let mut ok = true;
        for &f in &free {
            match Rational::approximate(target[f] / free_scale.max(1e-300), max_den, 1e-9) {
                Some(q) => vals[f] = q,
                None => ok = false,
            }
        }
        if !ok {
            continue;
        }
        for (row, &pc) in rows.iter().zip(&pivots) {
            let mut v = Rational::zero();
            for &f in &free {
                if !row[f].is_zero() {
                    v -= &(&row[f] * &vals[f]);
                }
            }
            vals[pc] = v;
        }
        candidates.push(vals);
    }
    candidates.into_iter().find(|vals| {
        let vmax = vals.iter().fold(0.0f64, |acc, x| acc.max(x.to_f64().abs()));
        vmax > 0.0
            && vals
                .iter()
                .zip(&target)
                .all(|(x, t)| (x.to_f64() / vmax - t).abs() < 1e-6)
    })
}

fn continued_fraction_guess(approx: &[f64]) -> Option<Vec<Rational>> {
    let scale = approx.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    approx
        .iter()
        .map(|x| Rational::approximate(x / scale, 100_000, 1e-8))
        .collect()
}

fn split_of(model: &QuantumModel, vars: &[Coefficient], values: &[Rational]) -> EfficiencySplit {
    let (a, b) = model.weights_f64(vars);
    let dot = |w: &[f64]| w.iter().zip(values).map(|(x, y)| x * y.to_f64()).sum::<f64>();
    EfficiencySplit::new(dot(&a), dot(&b))
}

struct Solved {
    values: Vec<Rational>,
    eta: f64,
    eta_exact: Option<Rational>,
    lp_value: f64,
    tight: Vec<(DeterministicStrategy, f64)>,
    columns: usize,
    rounds: usize,
}

fn solve_once(
    model: &QuantumModel,
    vars: &[Coefficient],
    opts: &SynthesisOptions,
    pool: &mut ColumnPool,
) -> Result<Solved, SynthesisError> {
    let m = model.m();
    let mut seeds = initial_strategies(m);
    seeds.extend(pool.strategies());
    let exact = model.weights_exact(vars).filter(|_| m <= opts.exact_max_m);
    if let Some((a, b)) = exact {
        let check = |v: &[Rational]| exact_violation(m, vars, v);
        let out = column_generation::<Rational>(m, vars, &a, &b, &seeds, opts, pool, &check)?;
        if !(out.value > Rational::one()) {
            return Err(SynthesisError::NoViolation(if out.value.is_positive() {
                out.value.recip().to_f64()
            } else {
                f64::INFINITY
            }));
        }
        let eta = out.value.recip();
        return Ok(Solved {
            values: out.m_vec,
            eta: eta.to_f64(),
            eta_exact: Some(eta),
            lp_value: out.value.to_f64(),
            tight: out.tight.into_iter().map(|(s, y)| (s, y.to_f64())).collect(),
            columns: out.columns,
            rounds: out.rounds,
        });
    }
    let (a, b) = model.weights_f64(vars);
    let no_check = |_: &[f64]| Ok(None);
    let mut extra: Vec<DeterministicStrategy> = Vec::new();
    for _ in 0..8 {
        let mut all_seeds = seeds.clone();
        all_seeds.extend(extra.iter().copied());
        let out = column_generation::<f64>(m, vars, &a, &b, &all_seeds, opts, pool, &no_check)?;
        if !(out.value > 1.0 + 1e-12) {
            return Err(SynthesisError::NoViolation(if out.value > 0.0 { 1.0 / out.value } else { f64::INFINITY }));
        }
        let tight_basic: Vec<DeterministicStrategy> = out.tight.iter().map(|(s, _)| *s).collect();
        let values = reconstruct(vars, &tight_basic, &out.m_vec)
            .or_else(|| continued_fraction_guess(&out.m_vec))
            .ok_or(SynthesisError::Reconstruction)?;
        if let Some(s) = exact_violation(m, vars, &values)? {
            extra.push(s);
            continue;
        }
        let split = split_of(model, vars, &values);
        if !(split.m3_value > 0.0) || !(split.m2_value < 0.0) {
            return Err(SynthesisError::Reconstruction);
        }
        let eta = -split.m2_value / split.m3_value;
        if (eta - 1.0 / out.value).abs() > 1e-7 * eta.max(1.0) {
            return Err(SynthesisError::Reconstruction);
        }
        return Ok(Solved {
            values,
            eta,
            eta_exact: None,
            lp_value: out.value,
            tight: out.tight,
            columns: out.columns,
            rounds: out.rounds,
        });
    }
    Err(SynthesisError::Reconstruction)
}

fn same_optimum(a: &Solved, b: &Solved) -> bool {
    match (&a.eta_exact, &b.eta_exact) {
        (Some(x), Some(y)) => x == y,
        _ => (a.eta - b.eta).abs() <= 1e-10 * a.eta.max(1.0),
    }
}

/// Threshold-minimizing inequality for the model.
pub fn synthesize(model: &QuantumModel, opts: &SynthesisOptions) -> Result<SynthesisResult, SynthesisError> {
    synthesize_with_pool(model, opts, &mut ColumnPool::new())
}

pub fn synthesize_with_pool(
    model: &QuantumModel,
    opts: &SynthesisOptions,
    pool: &mut ColumnPool,
) -> Result<SynthesisResult, SynthesisError> {
    model.validate()?;
    let m = model.m();
    pool.reset_for(m);
    let mut vars = model.variables();
    let mut best = solve_once(model, &vars, opts, pool)?;
    if opts.minimize_support {
        let support: Vec<Coefficient> = vars
            .iter()
            .zip(&best.values)
            .filter(|(_, x)| !x.is_zero())
            .map(|(v, _)| *v)
            .collect();
        let mut order = support;
        order.reverse();
        for v in order {
            if !best.values.iter().zip(&vars).any(|(x, w)| *w == v && !x.is_zero()) {
                continue;
            }
            let trial: Vec<Coefficient> = vars.iter().copied().filter(|w| *w != v).collect();
            if let Ok(s) = solve_once(model, &trial, opts, pool) {
                if same_optimum(&best, &s) {
                    vars = trial;
                    best = s;
                }
            }
        }
    }
    let ineq = build_inequality(m, &vars, &best.values)?.integer_normalized();
    let bound = classical_bound(&ineq)?;
    if !bound.value.is_zero() || !ineq.m2_nonpositive() {
        return Err(SynthesisError::Reconstruction);
    }
    let raw = model.split(&ineq);
    let split = EfficiencySplit::new(-1.0, raw.m3_value / -raw.m2_value);
    Ok(SynthesisResult {
        inequality: ineq,
        split,
        eta_crit: best.eta,
        eta_crit_exact: best.eta_exact,
        model: model.clone(),
        certificate: Certificate {
            lp_value: best.lp_value,
            tight_strategies: best.tight,
            classical_bound: bound.value,
            strategies_checked: bound.strategies_checked,
            columns: best.columns,
            rounds: best.rounds,
            exact: model.weights_exact(&vars).is_some() && m <= opts.exact_max_m,
        },
    })
}

// ---- scans ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub angles: Vec<f64>,
    pub eta_crit: Option<f64>,
    pub inequality_id: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ScanReport {
    pub best: Option<(ScanRecord, SymmetricBellInequality)>,
    /// Distinct integer-normalized inequalities keyed by id.
    pub distinct: BTreeMap<String, SymmetricBellInequality>,
    pub points: usize,
    /// Best grid point polished by a local search over the angles.
    pub refined: Option<(ScanRecord, SymmetricBellInequality)>,
}

/// Short stable identifier of an integer-normalized inequality.
pub fn inequality_id(ineq: &SymmetricBellInequality) -> String {
    let json = serde_json::to_string(&ineq.to_json()).expect("serializable");
    let mut h = std::collections::hash_map::DefaultHasher::new();
    json.hash(&mut h);
    format!("ineq-{:016x}", h.finish())
}

fn nondecreasing_tuples(values: &[f64], len: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; len];
    loop {
        out.push(idx.iter().map(|&i| values[i]).collect());
        let mut p = len;
        loop {
            if p == 0 {
                return out;
            }
            p -= 1;
            if idx[p] + 1 < values.len() {
                idx[p] += 1;
                for q in p + 1..len {
                    idx[q] = idx[p];
                }
                break;
            }
        }
    }
}

fn run_scan(
    points: Vec<(Vec<f64>, QuantumModel)>,
    opts: &SynthesisOptions,
    on_record: &mut dyn FnMut(&ScanRecord),
) -> ScanReport {
    let mut report = ScanReport {
        best: None,
        distinct: BTreeMap::new(),
        points: points.len(),
        refined: None,
    };
    let opts = SynthesisOptions {
        minimize_support: false,
        ..opts.clone()
    };
    for chunk in points.chunks(64) {
        let results: Vec<Option<SynthesisResult>> =
            chunk.par_iter().map(|(_, model)| synthesize(model, &opts).ok()).collect();
        for ((angles, _), res) in chunk.iter().zip(results) {
            let record = match &res {
                Some(r) => {
                    let id = inequality_id(&r.inequality);
                    report.distinct.entry(id.clone()).or_insert_with(|| r.inequality.clone());
                    ScanRecord {
                        angles: angles.clone(),
                        eta_crit: Some(r.eta_crit),
                        inequality_id: Some(id),
                    }
                }
                None => ScanRecord {
                    angles: angles.clone(),
                    eta_crit: None,
                    inequality_id: None,
                },
            };
            on_record(&record);
            if let (Some(r), Some(eta)) = (res, record.eta_crit) {
                let better = match &report.best {
                    None => true,
                    Some((b, bi)) => {
                        let be = b.eta_crit.unwrap();
                        eta < be - 1e-12
                            || ((eta - be).abs() <= 1e-12
                                && serde_json::to_string(&r.inequality.to_json()).unwrap()
                                    < serde_json::to_string(&bi.to_json()).unwrap())
                    }
                };
                if better {
                    report.best = Some((record.clone(), r.inequality));
                }
            }
        }
    }
    report
}

/// Finite-angle scan over [0, 2π) with the given step. Angle sets are taken
/// as sorted tuples since relabeling settings does not change the optimum.
pub fn grid_scan(
    m: usize,
    step: f64,
    state: &SymmetricState,
    opts: &SynthesisOptions,
    on_record: &mut dyn FnMut(&ScanRecord),
) -> Result<ScanReport, SynthesisError> {
    if m == 0 || m > 3 {
        return Err(SynthesisError::Input("finite-angle grids are limited to m <= 3".into()));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(SynthesisError::Input("step must be positive".into()));
    }
    let count = (2.0 * std::f64::consts::PI / step).ceil() as usize;
    let values: Vec<f64> = (0..count).map(|i| i as f64 * step).collect();
    let points = nondecreasing_tuples(&values, m)
        .into_iter()
        .map(|angles| {
            let model = QuantumModel::Finite {
                state: state.clone(),
                angles: angles.clone(),
            };
            (angles, model)
        })
        .collect();
    let mut report = run_scan(points, opts, on_record);
    if let Some((best, _)) = &report.best {
        let (angles, result) = refine_angles(state, &best.angles, step / 2.0, opts)?;
        let record = ScanRecord {
            angles,
            eta_crit: Some(result.eta_crit),
            inequality_id: Some(inequality_id(&result.inequality)),
        };
        report.refined = Some((record, result.inequality));
    }
    Ok(report)
}

/// Local Nelder–Mead search on the LP threshold starting from `angles`.
pub fn refine_angles(
    state: &SymmetricState,
    angles: &[f64],
    step: f64,
    opts: &SynthesisOptions,
) -> Result<(Vec<f64>, SynthesisResult), SynthesisError> {
    let opts = SynthesisOptions {
        minimize_support: false,
        ..opts.clone()
    };
    let model = |a: &[f64]| QuantumModel::Finite {
        state: state.clone(),
        angles: a.to_vec(),
    };
    let f = |a: &[f64]| synthesize(&model(a), &opts).map_or(f64::INFINITY, |r| r.eta_crit);
    let (mut x, fx) = crate::optimize::nelder_mead(&f, angles, step, 1e-12, 4000);
    if !(fx < f(angles)) {
        x = angles.to_vec();
    }
    let x: Vec<f64> = x.iter().map(|a| a.rem_euclid(2.0 * std::f64::consts::PI)).collect();
    let result = synthesize(&model(&x), &SynthesisOptions { minimize_support: true, ..opts })?;
    Ok((x, result))
}

/// Small-angle |W⟩ scan over slope vectors (1, s_2, ..., s_m) with every
/// s_i on a grid of [−1, 1]. Slopes are rational multiples of the step.
pub fn slope_scan(
    m: usize,
    step: &Rational,
    opts: &SynthesisOptions,
    on_record: &mut dyn FnMut(&ScanRecord),
) -> Result<ScanReport, SynthesisError> {
    if m < 2 || m > 4 {
        return Err(SynthesisError::Input("slope scans support 2 <= m <= 4".into()));
    }
    if !step.is_positive() {
        return Err(SynthesisError::Input("step must be positive".into()));
    }
    let mut grid = Vec::new();
    let mut x = Rational::from_integer(-1);
    while x <= Rational::one() {
        grid.push(x.clone());
        x = &x + step;
    }
    let idx: Vec<f64> = (0..grid.len()).map(|i| i as f64).collect();
    let points = nondecreasing_tuples(&idx, m - 1)
        .into_iter()
        .map(|t| {
            let mut slopes = vec![Rational::one()];
            slopes.extend(t.iter().map(|&i| grid[i as usize].clone()));
            let angles = slopes.iter().map(|s| s.to_f64()).collect();
            (angles, QuantumModel::SmallAngleW { slopes })
        })
        .collect();
    Ok(run_scan(points, opts, on_record))
}

// ---- asymmetric derivation ----

type ClassKey = (u8, Vec<Rational>);

fn class_key(slopes: &[&Rational]) -> ClassKey {
    let mut v: Vec<Rational> = slopes.iter().map(|r| (*r).clone()).collect();
    v.sort();
    // |W⟩ elements are unchanged when every angle flips sign
    let mut f: Vec<Rational> = v.iter().map(|r| -r.clone()).collect();
    f.sort();
    (v.len() as u8, v.min(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum AsymVar {
    Pair(PartyPair, usize, usize),
    Triple(usize, usize, usize),
}

/// Asymmetric inequality with the settings selected by `party_slopes` whose
/// |W⟩ quantum value equals that of `sym` (measured at `sym_slopes`) for
/// every η and every small angle scale. Terms are grouped by the multiset
/// of slopes they measure, up to a global sign flip, which fixes their
/// matrix element exactly; each
/// group must carry the same total weight as in the symmetric inequality.
/// Groups with two settings at zero angle vanish on |W⟩ and are left free.
/// Among feasible solutions one with small support is returned.
pub fn derive_asymmetric(
    sym: &SymmetricBellInequality,
    sym_slopes: &[Rational],
    party_slopes: [&[Rational]; 3],
) -> Result<AsymmetricBellInequality, SynthesisError> {
    let m = sym.m();
    if sym_slopes.len() != m {
        return Err(SynthesisError::Input("slope count does not match the inequality".into()));
    }
    let settings = [party_slopes[0].len(), party_slopes[1].len(), party_slopes[2].len()];
    if settings.iter().any(|&s| s == 0 || s > MAX_SETTINGS) {
        return Err(SynthesisError::Input("each party needs 1 to 8 settings".into()));
    }
    let three = Rational::from_integer(3);
    let mut target: BTreeMap<ClassKey, Rational> = BTreeMap::new();
    for i in 0..m {
        for j in 0..m {
            let c = sym.pair(i, j);
            if !c.is_zero() {
                *target.entry(class_key(&[&sym_slopes[i], &sym_slopes[j]])).or_insert_with(Rational::zero) +=
                    &(&c * &three);
            }
            for k in 0..m {
                let c = sym.triple(i, j, k);
                if !c.is_zero() {
                    *target
                        .entry(class_key(&[&sym_slopes[i], &sym_slopes[j], &sym_slopes[k]]))
                        .or_insert_with(Rational::zero) += &c;
                }
            }
        }
    }
    let mut vars: Vec<(AsymVar, ClassKey)> = Vec::new();
    for pp in PartyPair::ALL {
        let (x, y) = pp.parties();
        for i in 0..settings[x] {
            for j in 0..settings[y] {
                vars.push((AsymVar::Pair(pp, i, j), class_key(&[&party_slopes[x][i], &party_slopes[y][j]])));
            }
        }
    }
    for i in 0..settings[0] {
        for j in 0..settings[1] {
            for k in 0..settings[2] {
                vars.push((
                    AsymVar::Triple(i, j, k),
                    class_key(&[&party_slopes[0][i], &party_slopes[1][j], &party_slopes[2][k]]),
                ));
            }
        }
    }
    let mut classes: BTreeMap<ClassKey, Vec<usize>> = BTreeMap::new();
    for (n, (_, key)) in vars.iter().enumerate() {
        classes.entry(key.clone()).or_default().push(n);
    }
    // two projectors at Φ = 0 annihilate |W⟩, so those terms never contribute
    let vanishing = |key: &ClassKey| key.1.iter().filter(|r| r.is_zero()).count() >= 2;
    classes.retain(|key, _| !vanishing(key));
    for (key, t) in &target {
        if !t.is_zero() && !vanishing(key) && !classes.contains_key(key) {
            return Err(SynthesisError::AsymmetricInfeasible);
        }
    }
    let nv = vars.len();
    let words = |w: [u32; 3]| -> Vec<Rational> {
        vars.iter()
            .map(|(v, _)| {
                let bit = |p: usize, i: usize| (w[p] >> i) & 1 == 1;
                let on = match *v {
                    AsymVar::Pair(pp, i, j) => {
                        let (x, y) = pp.parties();
                        bit(x, i) && bit(y, j)
                    }
                    AsymVar::Triple(i, j, k) => bit(0, i) && bit(1, j) && bit(2, k),
                };
                if on {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect()
    };
    let all_words: Vec<[u32; 3]> = (0..1u32 << settings[0])
        .flat_map(|a| (0..1u32 << settings[1]).flat_map(move |b| (0..1u32 << settings[2]).map(move |c| [a, b, c])))
        .filter(|w| w.iter().filter(|&&x| x != 0).count() >= 2)
        .collect();
    let mut rows: Vec<[u32; 3]> = Vec::new();
    // single-term strategies force two-party coefficients to be non-positive
    for (v, _) in &vars {
        if let AsymVar::Pair(pp, i, j) = *v {
            let (x, y) = pp.parties();
            let mut w = [0u32; 3];
            w[x] = 1 << i;
            w[y] = 1 << j;
            rows.push(w);
        }
    }
    let solve = |rows: &[[u32; 3]], fixed: &BTreeSet<usize>| -> Result<Option<Vec<Rational>>, SynthesisError> {
        // variables: u_0..u_{n-1} free, w_0..w_{n-1} ≥ |u|
        // ties between equally sparse solutions go to two-party terms
        let mut objective = vec![Rational::zero(); 2 * nv];
        for (o, (v, _)) in objective.iter_mut().skip(nv).zip(&vars) {
            *o = match v {
                AsymVar::Pair(..) => Rational::one(),
                AsymVar::Triple(..) => Rational::new(101, 100),
            };
        }
        let mut lp = LinearProgram::new(Sense::Minimize, objective);
        for k in 0..nv {
            lp.set_bound(k, Bound::Free);
            let mut r = vec![Rational::zero(); 2 * nv];
            r[nv + k] = Rational::one();
            r[k] = Rational::from_integer(-1);
            lp.add_constraint(r.clone(), Relation::Ge, Rational::zero());
            r[k] = Rational::one();
            lp.add_constraint(r, Relation::Ge, Rational::zero());
        }
        for (key, members) in &classes {
            let mut r = vec![Rational::zero(); 2 * nv];
            for &n in members {
                r[n] = Rational::one();
            }
            lp.add_constraint(r, Relation::Eq, target.get(key).cloned().unwrap_or_else(Rational::zero));
        }
        for &k in fixed {
            let mut r = vec![Rational::zero(); 2 * nv];
            r[k] = Rational::one();
            lp.add_constraint(r, Relation::Eq, Rational::zero());
        }
        for w in rows {
            let mut r = words(*w);
            r.extend(std::iter::repeat(Rational::zero()).take(nv));
            lp.add_constraint(r, Relation::Le, Rational::zero());
        }
        match lp.solve_with(PivotRule::Dantzig)? {
            Solution::Optimal { x, .. } => Ok(Some(x[..nv].to_vec())),
            Solution::Infeasible => Ok(None),
            Solution::Unbounded { .. } => Err(SynthesisError::Unbounded),
        }
    };
    let to_ineq = |x: &[Rational]| -> Result<AsymmetricBellInequality, SynthesisError> {
        let mut pairs = Vec::new();
        let mut triples = Vec::new();
        for ((v, _), val) in vars.iter().zip(x) {
            match *v {
                AsymVar::Pair(pp, i, j) => pairs.push(((pp, i, j), val.clone())),
                AsymVar::Triple(i, j, k) => triples.push(((i, j, k), val.clone())),
            }
        }
        Ok(AsymmetricBellInequality::new(settings, pairs, triples)?)
    };
    // Lazy classical rows: solve, find the most violated strategy, repeat.
    let solve_lazy = |fixed: &BTreeSet<usize>, rows: &mut Vec<[u32; 3]>| -> Result<Option<Vec<Rational>>, SynthesisError> {
        loop {
            let Some(x) = solve(rows, fixed)? else {
                return Ok(None);
            };
            let ineq = to_ineq(&x)?;
            let mut worst: Option<(Rational, [u32; 3])> = None;
            for &w in &all_words {
                let v = asym_classical_value(&ineq, w);
                if v.is_positive() && worst.as_ref().is_none_or(|(b, _)| v > *b) {
                    worst = Some((v, w));
                }
            }
            match worst {
                None => return Ok(Some(x)),
                Some((_, w)) => rows.push(w),
            }
        }
    };
    let support = |x: &[Rational]| x.iter().filter(|r| !r.is_zero()).count();
    let mut fixed = BTreeSet::new();
    let Some(mut best) = solve_lazy(&fixed, &mut rows)? else {
        return Err(SynthesisError::AsymmetricInfeasible);
    };
    let order: Vec<usize> = (0..nv).filter(|&k| !best[k].is_zero()).collect();
    for k in order {
        if best[k].is_zero() {
            fixed.insert(k);
            continue;
        }
        let mut trial = fixed.clone();
        trial.insert(k);
        if let Some(x) = solve_lazy(&trial, &mut rows)? {
            if support(&x) < support(&best) {
                fixed = trial;
                best = x;
            }
        }
    }
    Ok(to_ineq(&best)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rats(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| Rational::from_integer(x)).collect()
    }

    #[test]
    fn separation_finds_single_positive_term() {
        let vars = vec![Coefficient::Triple(0, 0, 0)];
        let found = separate(1, &vars, &[1.0], 10);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].1.words(), [1, 1, 1]);
    }

    #[test]
    fn w_three_settings_threshold() {
        let model = QuantumModel::SmallAngleW { slopes: rats(&[0, 1, -1]) };
        let r = synthesize(&model, &SynthesisOptions::default()).unwrap();
        assert_eq!(r.eta_crit_exact, Some(Rational::new(3, 5)));
        assert_eq!(r.certificate.classical_bound, Rational::zero());
        assert!(r.inequality.m2_nonpositive());
        assert!((r.split.m2_value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_setting_cannot_violate() {
        for slopes in [rats(&[0]), rats(&[1])] {
            let model = QuantumModel::SmallAngleW { slopes };
            assert!(synthesize(&model, &SynthesisOptions::default()).is_err());
        }
    }

    #[test]
    fn tuples_are_sorted() {
        let t = nondecreasing_tuples(&[0.0, 1.0, 2.0], 2);
        assert_eq!(t.len(), 6);
        assert!(t.iter().all(|v| v[0] <= v[1]));
    }
}
