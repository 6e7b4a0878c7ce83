//! Closed-form thresholds of the catalogued families, optimization of their
//! free slope parameters, the mixing-slope iteration for |W⟩ + |111⟩ states
//! and the maximum-violation curve.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::inequality::{
    effective_value, quantum_split, small_angle_split_psi, InequalityError, SymmetricBellInequality,
};
use crate::quantum::{ProjectorAngle, SymmetricState};
use crate::synthesis::{synthesize_with_pool, ColumnPool, QuantumModel, SynthesisError, SynthesisOptions, SynthesisResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizeError {
    #[error("no violation at any efficiency for these parameters")]
    NoViolation,
    #[error("expected {expected} parameters, got {got}")]
    Parameters { expected: usize, got: usize },
    #[error("no stationary point found in the parameter domain")]
    NoRoot,
    #[error("mixing slope undefined: <111|M|111> = {0} is not negative")]
    Denominator(f64),
    #[error(transparent)]
    Inequality(#[from] InequalityError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

/// Real roots of c0 + c1·x + c2·x², ascending.
pub fn quadratic_roots(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    if c2 == 0.0 {
        return if c1 == 0.0 { vec![] } else { vec![-c0 / c1] };
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (c1 + c1.signum() * sq);
    let mut r = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / c2, c0 / q]
    };
    r.sort_by(f64::total_cmp);
    r
}

// ---- polynomials in several variables ----

/// Sparse polynomial with f64 coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(vec![0; nvars], c);
        }
        Poly { nvars, terms }
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Poly {
            nvars,
            terms: BTreeMap::from([(e, 1.0)]),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    fn clean(mut self) -> Self {
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut t = self.terms.clone();
        for (e, c) in &o.terms {
            *t.entry(e.clone()).or_insert(0.0) += c;
        }
        Poly { nvars: self.nvars, terms: t }.clean()
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * k)).collect(),
        }
        .clean()
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(-1.0))
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut t: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *t.entry(e).or_insert(0.0) += c1 * c2;
            }
        }
        Poly { nvars: self.nvars, terms: t }.clean()
    }

    pub fn pow(&self, n: u32) -> Poly {
        (0..n).fold(Poly::constant(self.nvars, 1.0), |acc, _| acc.mul(self))
    }

    pub fn deriv(&self, i: usize) -> Poly {
        let mut t = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                t.insert(e2, c * e[i] as f64);
            }
        }
        Poly { nvars: self.nvars, terms: t }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }
}

// ---- closed forms ----

/// Families with a closed-form violation condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClosedFormId {
    #[serde(rename = "W-333")]
    W333,
    #[serde(rename = "W-444")]
    W444,
    #[serde(rename = "W-666")]
    W666,
    #[serde(rename = "W-888")]
    W888,
    #[serde(rename = "SYM-222")]
    Sym222,
    #[serde(rename = "SYM-333")]
    Sym333,
    #[serde(rename = "SYM-444")]
    Sym444,
}

impl ClosedFormId {
    pub const ALL: [ClosedFormId; 7] = [
        ClosedFormId::W333,
        ClosedFormId::W444,
        ClosedFormId::W666,
        ClosedFormId::W888,
        ClosedFormId::Sym222,
        ClosedFormId::Sym333,
        ClosedFormId::Sym444,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ClosedFormId::W333 => "W-333",
            ClosedFormId::W444 => "W-444",
            ClosedFormId::W666 => "W-666",
            ClosedFormId::W888 => "W-888",
            ClosedFormId::Sym222 => "SYM-222",
            ClosedFormId::Sym333 => "SYM-333",
            ClosedFormId::Sym444 => "SYM-444",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.label().eq_ignore_ascii_case(s))
    }

    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            ClosedFormId::W444 | ClosedFormId::Sym444 => &["lambda"],
            ClosedFormId::W666 => &["mu", "nu"],
            ClosedFormId::W888 => &["rho", "sigma", "tau"],
            _ => &[],
        }
    }

    /// Whether the state is |W⟩ (otherwise the optimally mixed |W⟩ + |111⟩).
    pub fn is_w(&self) -> bool {
        matches!(self, ClosedFormId::W333 | ClosedFormId::W444 | ClosedFormId::W666 | ClosedFormId::W888)
    }

    fn check(&self, params: &[f64]) -> Result<(), OptimizeError> {
        let n = self.parameter_names().len();
        if params.len() != n {
            return Err(OptimizeError::Parameters { expected: n, got: params.len() });
        }
        Ok(())
    }

    /// Slope pattern the family is measured at.
    pub fn slopes(&self, params: &[f64]) -> Result<Vec<f64>, OptimizeError> {
        self.check(params)?;
        Ok(match self {
            ClosedFormId::W333 | ClosedFormId::Sym333 => vec![0.0, 1.0, -1.0],
            ClosedFormId::Sym222 => vec![0.0, 1.0],
            ClosedFormId::W444 | ClosedFormId::Sym444 => {
                let l = params[0];
                vec![1.0, -1.0, l, -l]
            }
            ClosedFormId::W666 => {
                let (mu, nu) = (params[0], params[1]);
                vec![1.0, -1.0, mu, -mu, nu, -nu]
            }
            ClosedFormId::W888 => {
                let (r, s, t) = (params[0], params[1], params[2]);
                vec![1.0, -1.0, r, -r, s, -s, t, -t]
            }
        })
    }

    /// (poly_state, poly_eta) for the |W⟩ families: violation iff
    /// poly_state + η·poly_eta > 0.
    pub fn linear_polys(&self) -> Option<(Poly, Poly)> {
        let n = self.parameter_names().len();
        let c = |v: f64| Poly::constant(n, v);
        let x = |i: usize| Poly::var(n, i);
        let sq = |p: Poly| p.pow(2);
        Some(match self {
            ClosedFormId::W333 => (c(-3.0), c(5.0)),
            ClosedFormId::W444 => {
                let l = x(0);
                (c(-3.0).sub(&l.pow(4)), c(6.0).sub(&sq(c(1.0).sub(&l.scale(2.0))).scale(3.0)))
            }
            ClosedFormId::W666 => {
                let (mu, nu) = (x(0), x(1));
                let state = c(1.0).add(&mu.pow(4)).add(&nu.pow(4)).scale(-3.0);
                let eta = c(6.0)
                    .add(&mu.pow(4).scale(6.0))
                    .add(&nu.pow(4).scale(4.0))
                    .sub(&sq(c(1.0).sub(&mu.scale(2.0))).scale(3.0))
                    .sub(&sq(mu.pow(2).sub(&mu.mul(&nu).scale(2.0))).scale(3.0))
                    .sub(&sq(mu.sub(&nu).sub(&mu.mul(&nu))).scale(3.0));
                (state, eta)
            }
            ClosedFormId::W888 => {
                let (r, s, t) = (x(0), x(1), x(2));
                let state = c(1.0).add(&r.pow(4)).add(&s.pow(4)).add(&t.pow(4)).scale(-3.0);
                let eta = c(6.0)
                    .add(&r.pow(4).scale(6.0))
                    .add(&s.pow(4).scale(6.0))
                    .add(&t.pow(4).scale(4.0))
                    .sub(&sq(c(1.0).sub(&r.scale(2.0))).scale(3.0))
                    .sub(&sq(r.pow(2).sub(&r.mul(&s).scale(2.0))).scale(3.0))
                    .sub(&sq(s.pow(2).sub(&s.mul(&t).scale(2.0))).scale(3.0))
                    .sub(&sq(r.sub(&s).sub(&r.mul(&s))).scale(3.0))
                    .sub(&sq(r.mul(&s).sub(&r.mul(&t)).sub(&s.mul(&t))).scale(3.0));
                (state, eta)
            }
            ClosedFormId::Sym222 => (c(-9.0), c(15.0)),
            _ => return None,
        })
    }

    pub fn condition(&self, params: &[f64]) -> Result<ClosedFormCondition, OptimizeError> {
        self.check(params)?;
        let coefficients = match self {
            ClosedFormId::Sym333 => vec![-3.0, -19.0, 48.0],
            ClosedFormId::Sym444 => {
                let (r, p, q) = sym444_rpq(params[0]);
                // r(η−½)² + p(η−½) − q expanded in η
                vec![r / 4.0 - p / 2.0 - q, p - r, r]
            }
            _ => {
                let (s, e) = self.linear_polys().expect("linear family");
                vec![s.eval(params), e.eval(params)]
            }
        };
        Ok(ClosedFormCondition {
            id: *self,
            params: params.to_vec(),
            coefficients,
        })
    }
}

/// Violation condition Σ_k coefficients[k]·η^k > 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormCondition {
    pub id: ClosedFormId,
    pub params: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl ClosedFormCondition {
    pub fn poly_state(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn poly_eta(&self) -> f64 {
        self.coefficients[1]
    }

    pub fn value(&self, eta: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * eta + c)
    }

    pub fn eta_crit(&self) -> Result<f64, OptimizeError> {
        if self.id == ClosedFormId::Sym444 {
            let (r, p, q) = sym444_rpq(self.params[0]);
            return Ok(0.5 + sym444_offset(r, p, q));
        }
        if self.coefficients.len() == 2 {
            if !(self.poly_eta() > 0.0) {
                return Err(OptimizeError::NoViolation);
            }
            return Ok(-self.poly_state() / self.poly_eta());
        }
        if !(self.value(1.0) > 0.0) {
            return Err(OptimizeError::NoViolation);
        }
        let roots = quadratic_roots(self.coefficients[0], self.coefficients[1], self.coefficients[2]);
        roots
            .into_iter()
            .filter(|&r| r < 1.0)
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
            .ok_or(OptimizeError::NoViolation)
    }
}

pub fn eta_crit_closed_form(id: ClosedFormId, params: &[f64]) -> Result<f64, OptimizeError> {
    id.condition(params)?.eta_crit()
}

/// (r, p, q) of the four-setting mixed-state family.
pub fn sym444_rpq(l: f64) -> (f64, f64, f64) {
    let r = 7.0 * l.powi(4) + 8.0 * l.powi(3) + 34.0 * l * l - 8.0 * l + 7.0;
    let p = 5.0 * l.powi(4) + 6.0 * l * l + 5.0;
    let q = (l * l + 4.0 * l - 1.0).powi(2) / 4.0;
    (r, p, q)
}

/// Sum-of-squares form of r.
pub fn sym444_r_alt(l: f64) -> f64 {
    5.0 * l.powi(4) + 2.0 * (l + 1.0).powi(4) + 6.0 * l * l + 4.0 * (2.0 * l - 1.0).powi(2) + 1.0
}

/// η_crit − ½ = (√(p² + 4rq) − p)/(2r), written to stay exact when q = 0.
pub fn sym444_offset(r: f64, p: f64, q: f64) -> f64 {
    let disc = (p * p + 4.0 * r * q).sqrt();
    2.0 * q / (disc + p)
}

/// 2λ⁵ − 3λ⁴ − λ³ − 6λ + 3
pub fn w444_quintic(l: f64) -> f64 {
    2.0 * l.powi(5) - 3.0 * l.powi(4) - l.powi(3) - 6.0 * l + 3.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamOptimum {
    pub id: ClosedFormId,
    pub names: Vec<&'static str>,
    pub params: Vec<f64>,
    pub eta_crit: f64,
    /// Largest residual of the stationarity equations.
    pub residual: f64,
}

fn stationarity(id: ClosedFormId) -> Option<(Vec<Poly>, Vec<Vec<Poly>>)> {
    let (s, e) = id.linear_polys()?;
    let n = s.nvars();
    // ∂(−s/e) = 0  ⇔  ∂s·e − s·∂e = 0
    let g: Vec<Poly> = (0..n).map(|i| s.deriv(i).mul(&e).sub(&s.mul(&e.deriv(i)))).collect();
    let jac = g.iter().map(|gi| (0..n).map(|j| gi.deriv(j)).collect()).collect();
    Some((g, jac))
}

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn newton(g: &[Poly], jac: &[Vec<Poly>], start: &[f64]) -> Option<(Vec<f64>, f64)> {
    let norm = |x: &[f64]| g.iter().map(|p| p.eval(x).abs()).fold(0.0, f64::max);
    let mut x = start.to_vec();
    let mut r = norm(&x);
    for _ in 0..200 {
        if r < 1e-13 {
            break;
        }
        let j: Vec<Vec<f64>> = jac.iter().map(|row| row.iter().map(|p| p.eval(&x)).collect()).collect();
        let rhs: Vec<f64> = g.iter().map(|p| -p.eval(&x)).collect();
        let step = solve_linear(j, rhs)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + t * d).collect();
            let rt = norm(&trial);
            if rt < r || t < 1e-10 {
                x = trial;
                r = rt;
                break;
            }
            t *= 0.5;
        }
    }
    (r < 1e-10).then_some((x, r))
}

/// Parameters minimizing the family's threshold.
pub fn minimize_eta_crit(id: ClosedFormId) -> Result<ParamOptimum, OptimizeError> {
    let names = id.parameter_names().to_vec();
    match id {
        ClosedFormId::W444 => {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            if w444_quintic(lo).signum() == w444_quintic(hi).signum() {
                return Err(OptimizeError::NoRoot);
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if w444_quintic(mid).signum() == w444_quintic(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let l = 0.5 * (lo + hi);
            Ok(ParamOptimum {
                id,
                names,
                params: vec![l],
                eta_crit: eta_crit_closed_form(id, &[l])?,
                residual: w444_quintic(l).abs(),
            })
        }
        ClosedFormId::W666 | ClosedFormId::W888 => {
            let (g, jac) = stationarity(id).expect("linear family");
            let n = names.len();
            let grid = [0.15, 0.3, 0.45, 0.6, 0.75];
            let mut best: Option<(f64, Vec<f64>, f64)> = None;
            let total = grid.len().pow(n as u32);
            for idx in 0..total {
                let start: Vec<f64> = (0..n).map(|d| grid[idx / grid.len().pow(d as u32) % grid.len()]).collect();
                let Some((x, r)) = newton(&g, &jac, &start) else {
                    continue;
                };
                if x.iter().any(|v| v.abs() > 1.0) {
                    continue;
                }
                let Ok(eta) = eta_crit_closed_form(id, &x) else {
                    continue;
                };
                if !(0.0..=1.0).contains(&eta) {
                    continue;
                }
                if best.as_ref().is_none_or(|(b, _, _)| eta < *b - 1e-14) {
                    best = Some((eta, x, r));
                }
            }
            let (eta, params, residual) = best.ok_or(OptimizeError::NoRoot)?;
            Ok(ParamOptimum {
                id,
                names,
                params,
                eta_crit: eta,
                residual,
            })
        }
        ClosedFormId::Sym444 => {
            let l = 5f64.sqrt() - 2.0;
            let (_, _, q) = sym444_rpq(l);
            Ok(ParamOptimum {
                id,
                names,
                params: vec![l],
                eta_crit: eta_crit_closed_form(id, &[l])?,
                residual: q,
            })
        }
        _ => Ok(ParamOptimum {
            id,
            names,
            params: vec![],
            eta_crit: eta_crit_closed_form(id, &[])?,
            residual: 0.0,
        }),
    }
}

/// Central-difference gradient of the closed-form threshold.
pub fn eta_gradient(id: ClosedFormId, params: &[f64], h: f64) -> Result<Vec<f64>, OptimizeError> {
    let mut g = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let mut p = params.to_vec();
        p[i] += h;
        let up = eta_crit_closed_form(id, &p)?;
        p[i] -= 2.0 * h;
        let down = eta_crit_closed_form(id, &p)?;
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

// ---- mixing slope ----

/// Best a for cos(a x²)|W⟩ + sin(a x²)|111⟩ at efficiency η.
pub fn optimal_mixing_slope(ineq: &SymmetricBellInequality, slopes: &[f64], eta: f64) -> Result<f64, OptimizeError> {
    let psi = small_angle_split_psi(ineq, slopes)?;
    let e = effective_value(&psi.p111, eta)?;
    let c = effective_value(&psi.w111, eta)?;
    if c == 0.0 {
        return Ok(0.0);
    }
    if !(e < 0.0) {
        return Err(OptimizeError::Denominator(e));
    }
    Ok(-c / e)
}

#[derive(Debug, Clone)]
pub struct MixingResult {
    pub result: SynthesisResult,
    pub mixing: f64,
    /// Threshold of the final inequality with the mixing chosen optimally.
    pub eta_crit: f64,
    pub iterations: usize,
}

pub const MIXING_TOL: f64 = 1e-10;
pub const MIXING_MAX_ITER: usize = 100;

/// Alternate LP synthesis at fixed mixing slope with the optimal slope update
/// until the slope or the inequality stops changing.
pub fn iterate_synthesis_with_mixing(
    slopes: &[f64],
    a0: f64,
    opts: &SynthesisOptions,
) -> Result<MixingResult, OptimizeError> {
    if !a0.is_finite() {
        return Err(SynthesisError::Input("initial mixing slope must be finite".into()).into());
    }
    let mut pool = ColumnPool::new();
    let mut a = a0;
    let mut previous: Option<SymmetricBellInequality> = None;
    for it in 1..=MIXING_MAX_ITER {
        let model = QuantumModel::SmallAnglePsi {
            slopes: slopes.to_vec(),
            mixing: a,
        };
        let result = synthesize_with_pool(&model, opts, &mut pool)?;
        let psi = small_angle_split_psi(&result.inequality, slopes)?;
        let eta = psi.eta_crit()?;
        let next = optimal_mixing_slope(&result.inequality, slopes, eta)?;
        let repeated = previous.as_ref() == Some(&result.inequality);
        if (next - a).abs() < MIXING_TOL || repeated {
            return Ok(MixingResult {
                result,
                mixing: next,
                eta_crit: eta,
                iterations: it,
            });
        }
        previous = Some(result.inequality.clone());
        a = next;
    }
    Err(SynthesisError::MixingNoConvergence(MIXING_MAX_ITER).into())
}

/// Runs the iteration from a₀, −a₀, a₀/10 and −a₀/10 and keeps the lowest
/// threshold; the sign of the useful mixing depends on the slope pattern.
pub fn best_mixing_synthesis(slopes: &[f64], a0: f64, opts: &SynthesisOptions) -> Result<MixingResult, OptimizeError> {
    let mut best: Option<MixingResult> = None;
    let mut last_err = None;
    for start in [a0, -a0, a0 / 10.0, -a0 / 10.0] {
        match iterate_synthesis_with_mixing(slopes, start, opts) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.eta_crit < b.eta_crit - 1e-12) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(OptimizeError::NoViolation))
}

// ---- violation curve ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveMode {
    /// General real symmetric state cos u|W⟩ + sin u (cos v|111⟩ + sin v|000⟩).
    Full,
    /// cos u|W⟩ + sin u|111⟩.
    No000,
    /// cos u|000⟩ + sin u|W⟩.
    Larsson,
}

impl CurveMode {
    fn state_params(&self) -> usize {
        match self {
            CurveMode::Full => 2,
            _ => 1,
        }
    }

    fn state(&self, p: &[f64]) -> (f64, f64, f64) {
        match self {
            CurveMode::Full => (p[0].cos(), p[0].sin() * p[1].cos(), p[0].sin() * p[1].sin()),
            CurveMode::No000 => (p[0].cos(), p[0].sin(), 0.0),
            CurveMode::Larsson => (p[0].sin(), 0.0, p[0].cos()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurveOptions {
    pub starts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_evals: usize,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            starts: 20,
            seed: 42,
            tol: 1e-12,
            max_evals: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationCurvePoint {
    pub eta: f64,
    pub max_violation: f64,
    pub w: f64,
    pub c111: f64,
    pub c000: f64,
    pub angles: Vec<f64>,
}

/// Nelder–Mead minimization with restarts from the converged point.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, tol: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut evals = 0;
    let mut best = (x0.to_vec(), f(x0));
    let mut step = step;
    for _restart in 0..4 {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push(best.clone());
        for i in 0..n {
            let mut x = best.0.clone();
            x[i] += step;
            let fx = f(&x);
            evals += 1;
            simplex.push((x, fx));
        }
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[n].1);
            let diameter = simplex
                .iter()
                .skip(1)
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if (hi - lo).abs() <= tol * lo.abs() + 1e-300 || diameter < 1e-13 || evals >= max_evals {
                break;
            }
            let centroid: Vec<f64> = (0..n).map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64).collect();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
            };
            let xr = along(1.0);
            let fr = f(&xr);
            evals += 1;
            if fr < simplex[0].1 {
                let xe = along(2.0);
                let fe = f(&xe);
                evals += 1;
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let x = along(0.5);
                    let v = f(&x);
                    (x, v)
                } else {
                    let x = along(-0.5);
                    let v = f(&x);
                    (x, v)
                };
                evals += 1;
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let x0 = simplex[0].0.clone();
                    for s in simplex.iter_mut().skip(1) {
                        s.0 = s.0.iter().zip(&x0).map(|(a, b)| b + 0.5 * (a - b)).collect();
                        s.1 = f(&s.0);
                        evals += 1;
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let improved = simplex[0].1 < best.1;
        let converged_same = !improved || (best.1 - simplex[0].1).abs() <= tol * simplex[0].1.abs();
        best = if improved { simplex[0].clone() } else { best };
        if converged_same || evals >= max_evals {
            break;
        }
        step = (step * 0.1).max(1e-6);
    }
    best
}

fn curve_value(ineq: &SymmetricBellInequality, mode: CurveMode, eta: f64, p: &[f64]) -> f64 {
    let k = mode.state_params();
    let (w, c111, c000) = mode.state(&p[..k]);
    let state = match SymmetricState::new(w, c111, c000) {
        Ok(s) => s,
        Err(_) => return f64::NEG_INFINITY,
    };
    let angles: Vec<ProjectorAngle> = p[k..].iter().map(|&a| ProjectorAngle::new(a)).collect();
    match quantum_split(ineq, &state, &angles) {
        Ok(s) => eta * eta * s.m2_value + eta * eta * eta * s.m3_value,
        Err(_) => f64::NEG_INFINITY,
    }
}

fn optimize_at(
    ineq: &SymmetricBellInequality,
    mode: CurveMode,
    eta: f64,
    starts: &[Vec<f64>],
    opts: &CurveOptions,
) -> (Vec<f64>, f64) {
    let f = |p: &[f64]| -curve_value(ineq, mode, eta, p);
    let results: Vec<(Vec<f64>, f64)> = starts
        .par_iter()
        .map(|s| nelder_mead(&f, s, 0.3, opts.tol, opts.max_evals))
        .collect();
    let mut best = results[0].clone();
    for r in results.into_iter().skip(1) {
        if r.1 < best.1 {
            best = r;
        }
    }
    // polish from the winner with a small simplex
    let polished = nelder_mead(&f, &best.0, 1e-3, opts.tol, opts.max_evals);
    if polished.1 < best.1 {
        best = polished;
    }
    (best.0, -best.1)
}

fn point(mode: CurveMode, eta: f64, p: &[f64], value: f64) -> ViolationCurvePoint {
    let k = mode.state_params();
    let (w, c111, c000) = mode.state(&p[..k]);
    ViolationCurvePoint {
        eta,
        max_violation: value.max(0.0),
        w,
        c111,
        c000,
        angles: p[k..].iter().map(|a| a.rem_euclid(2.0 * std::f64::consts::PI)).collect(),
    }
}

/// Maximum of the effective value over states of the chosen form and over
/// measurement angles, for every efficiency in `etas`. Efficiencies are
/// processed from the largest down so each optimum seeds the next, then a
/// forward pass re-seeds from the lower neighbor.
pub fn max_violation_curve(
    ineq: &SymmetricBellInequality,
    etas: &[f64],
    mode: CurveMode,
    opts: &CurveOptions,
) -> Vec<ViolationCurvePoint> {
    let m = ineq.m();
    let dim = mode.state_params() + m;
    let mut order: Vec<usize> = (0..etas.len()).collect();
    order.sort_by(|&a, &b| etas[b].total_cmp(&etas[a]).then(a.cmp(&b)));
    let mut params: Vec<Option<(Vec<f64>, f64)>> = vec![None; etas.len()];
    let mut carry: Option<Vec<f64>> = None;
    for (rank, &i) in order.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(rank as u64));
        let mut starts: Vec<Vec<f64>> = (0..opts.starts)
            .map(|_| {
                (0..dim)
                    .map(|d| {
                        if d < mode.state_params() {
                            rng.gen_range(0.0..std::f64::consts::PI)
                        } else {
                            rng.gen_range(0.0..2.0 * std::f64::consts::PI)
                        }
                    })
                    .collect()
            })
            .collect();
        if let Some(c) = &carry {
            starts.push(c.clone());
        }
        let (p, v) = optimize_at(ineq, mode, etas[i], &starts, opts);
        carry = Some(p.clone());
        params[i] = Some((p, v));
    }
    // forward pass: a lower efficiency's optimum is a valid start higher up
    for w in order.windows(2).rev() {
        let (hi, lo) = (w[0], w[1]);
        let seed = params[lo].as_ref().unwrap().0.clone();
        let f = |p: &[f64]| -curve_value(ineq, mode, etas[hi], p);
        let (p, fv) = nelder_mead(&f, &seed, 1e-3, opts.tol, opts.max_evals);
        if -fv > params[hi].as_ref().unwrap().1 {
            params[hi] = Some((p, -fv));
        }
    }
    etas.iter()
        .zip(params)
        .map(|(&eta, p)| {
            let (p, v) = p.unwrap();
            point(mode, eta, &p, v)
        })
        .collect()
}

/// CSV with header `eta,violation,w,c111,c000,phi1,...`.
pub fn curve_csv(points: &[ViolationCurvePoint]) -> String {
    let m = points.first().map_or(0, |p| p.angles.len());
    let mut out = String::from("eta,violation,w,c111,c000");
    for i in 1..=m {
        out.push_str(&format!(",phi{}", i));
    }
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}",
            sig9(p.eta),
            sig9(p.max_violation),
            sig9(p.w),
            sig9(p.c111),
            sig9(p.c000)
        ));
        for a in &p.angles {
            out.push_str(&format!(",{}", sig9(*a)));
        }
        out.push('\n');
    }
    out
}

/// Nine significant digits.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let s = format!("{:.8e}", x);
    let v: f64 = s.parse().unwrap();
    let mag = v.abs().log10().floor() as i32;
    if (-5..=15).contains(&mag) {
        let decimals = (8 - mag).max(0) as usize;
        let t = format!("{:.*}", decimals, v);
        if t.contains('.') {
            t.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            t
        }
    } else {
        s
    }
}

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_quadratics() {
        assert_eq!(quadratic_roots(-3.0, -19.0, 48.0).len(), 2);
        let r = quadratic_roots(2.0, -3.0, 1.0);
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 2.0).abs() < 1e-15);
        assert!(quadratic_roots(1.0, 0.0, 1.0).is_empty());
        assert_eq!(quadratic_roots(-9.0, 15.0, 0.0), vec![0.6]);
    }

    #[test]
    fn w444_at_zero_lambda_is_one() {
        assert!((eta_crit_closed_form(ClosedFormId::W444, &[0.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sym333_root() {
        let eta = eta_crit_closed_form(ClosedFormId::Sym333, &[]).unwrap();
        assert!((eta - (19.0 + 937f64.sqrt()) / 96.0).abs() < 1e-15);
    }

    #[test]
    fn poly_derivative() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = x.pow(3).mul(&y).add(&y.scale(2.0));
        assert_eq!(p.deriv(0).eval(&[2.0, 3.0]), 36.0);
        assert_eq!(p.deriv(1).eval(&[2.0, 3.0]), 10.0);
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(sig9(0.509036), "0.509036");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(123456.789), "123456.789");
    }

    #[test]
    fn nelder_mead_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2);
        let (x, v) = nelder_mead(&f, &[0.0, 0.0], 0.5, 1e-14, 10_000);
        assert!(v < 1e-10 && (x[0] - 1.0).abs() < 1e-5 && (x[1] + 2.0).abs() < 1e-5);
    }
}
