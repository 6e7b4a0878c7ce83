//! Built-in library of inequalities with their optimal measurement recipes
//! and reference thresholds.

use std::fmt;

use bellforge_lp::Rational;
use serde::{Deserialize, Serialize};

use crate::inequality::{
    asym_small_angle_split_w, eta_crit, quantum_split, small_angle_split_psi, small_angle_split_w,
    small_angle_split_w_f64, AsymmetricBellInequality, AsymmetricJson, InequalityError, InequalityJson,
    PartyPair, SymmetricBellInequality,
};
use crate::optimize::ClosedFormId;
use crate::quantum::{ProjectorAngle, SymmetricState};
use crate::strategies::{asym_classical_bound, classical_bound, classical_bound_full, StrategyError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CatalogError {
    #[error("unknown catalog id `{0}`")]
    UnknownId(String),
    #[error("entry {id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("catalog file: {0}")]
    Parse(String),
    #[error(transparent)]
    Inequality(#[from] InequalityError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// a + b·√c with rational a, b.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadraticSurd {
    pub a: Rational,
    #[serde(default = "Rational::zero", skip_serializing_if = "Rational::is_zero")]
    pub b: Rational,
    #[serde(default, skip_serializing_if = "is_zero_u64")]
    pub c: u64,
}

fn is_zero_u64(v: &u64) -> bool {
    *v == 0
}

impl QuadraticSurd {
    pub fn rational(a: Rational) -> Self {
        QuadraticSurd { a, b: Rational::zero(), c: 0 }
    }

    pub fn decimal(s: &str) -> Self {
        Self::rational(s.parse().expect("valid decimal literal"))
    }

    pub fn surd(a: Rational, b: Rational, c: u64) -> Self {
        QuadraticSurd { a, b, c }
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        (self.b.is_zero() || self.c == 0).then_some(&self.a)
    }

    pub fn to_f64(&self) -> f64 {
        self.a.to_f64() + self.b.to_f64() * (self.c as f64).sqrt()
    }

    pub fn is_exact_closed_form(&self) -> bool {
        !self.b.is_zero() && self.c != 0 || self.a.denom() <= &bellforge_lp::BigInt::from(1000)
    }
}

impl fmt::Display for QuadraticSurd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_rational() {
            Some(r) => write!(f, "{}", r),
            None => write!(f, "{} + {}*sqrt({})", self.a, self.b, self.c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateFamily {
    /// |W⟩
    W,
    /// cos α|W⟩ + sin α|111⟩ with α chosen optimally
    #[serde(rename = "W+111")]
    WPlus111,
    /// general real symmetric state
    #[serde(rename = "W+111+000")]
    WPlus111Plus000,
}

impl StateFamily {
    pub fn label(&self) -> &'static str {
        match self {
            StateFamily::W => "W",
            StateFamily::WPlus111 => "W+111",
            StateFamily::WPlus111Plus000 => "W+111+000",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntryInequality {
    Symmetric(SymmetricBellInequality),
    Asymmetric(AsymmetricBellInequality),
}

/// One slope: coefficient times an optional named parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlopeExpr {
    pub coeff: Rational,
    pub param: Option<String>,
}

impl SlopeExpr {
    /// `0`, `-1`, `1/2`, `lambda`, `-lambda`, `2*mu`
    pub fn parse(s: &str) -> Result<Self, CatalogError> {
        let t = s.trim();
        let err = || CatalogError::Parse(format!("bad slope expression `{}`", s));
        if let Ok(r) = t.parse::<Rational>() {
            return Ok(SlopeExpr { coeff: r, param: None });
        }
        let (coeff, name) = match t.split_once('*') {
            Some((c, n)) => (c.trim().parse::<Rational>().map_err(|_| err())?, n.trim()),
            None => match t.strip_prefix('-') {
                Some(n) => (Rational::from_integer(-1), n.trim()),
                None => (Rational::one(), t),
            },
        };
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err());
        }
        Ok(SlopeExpr {
            coeff,
            param: Some(name.to_string()),
        })
    }
}

impl fmt::Display for SlopeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.param {
            None => write!(f, "{}", self.coeff),
            Some(p) if self.coeff == Rational::one() => write!(f, "{}", p),
            Some(p) if self.coeff == Rational::from_integer(-1) => write!(f, "-{}", p),
            Some(p) => write!(f, "{}*{}", self.coeff, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parameter {
    pub name: String,
    pub value: QuadraticSurd,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Recipe {
    /// Finite projector angles, identical for every party.
    Angles(Vec<f64>),
    /// Small-angle slopes φ_i, identical for every party.
    Slopes { pattern: Vec<SlopeExpr>, params: Vec<Parameter> },
    /// Small-angle slopes per party.
    PartySlopes { pattern: [Vec<SlopeExpr>; 3], params: Vec<Parameter> },
}

/// Slope values: exact when every parameter used is rational.
#[derive(Debug, Clone, PartialEq)]
pub enum SlopeValues {
    Exact(Vec<Rational>),
    Float(Vec<f64>),
}

impl SlopeValues {
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            SlopeValues::Exact(v) => v.iter().map(|r| r.to_f64()).collect(),
            SlopeValues::Float(v) => v.clone(),
        }
    }
}

fn eval_slopes(pattern: &[SlopeExpr], params: &[Parameter]) -> Result<SlopeValues, CatalogError> {
    let lookup = |name: &str| {
        params
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| CatalogError::Parse(format!("undefined parameter `{}`", name)))
    };
    let mut exact = Vec::new();
    let mut float = Vec::new();
    let mut all_exact = true;
    for e in pattern {
        match &e.param {
            None => {
                exact.push(e.coeff.clone());
                float.push(e.coeff.to_f64());
            }
            Some(name) => {
                let p = lookup(name)?;
                match p.value.as_rational() {
                    Some(r) => {
                        exact.push(&e.coeff * r);
                        float.push((&e.coeff * r).to_f64());
                    }
                    None => {
                        all_exact = false;
                        float.push(e.coeff.to_f64() * p.value.to_f64());
                    }
                }
            }
        }
    }
    Ok(if all_exact { SlopeValues::Exact(exact) } else { SlopeValues::Float(float) })
}

impl Recipe {
    pub fn slopes(&self) -> Result<Option<SlopeValues>, CatalogError> {
        match self {
            Recipe::Slopes { pattern, params } => Ok(Some(eval_slopes(pattern, params)?)),
            _ => Ok(None),
        }
    }

    pub fn party_slopes(&self) -> Result<Option<[SlopeValues; 3]>, CatalogError> {
        match self {
            Recipe::PartySlopes { pattern, params } => Ok(Some([
                eval_slopes(&pattern[0], params)?,
                eval_slopes(&pattern[1], params)?,
                eval_slopes(&pattern[2], params)?,
            ])),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub id: String,
    pub label: String,
    pub family: StateFamily,
    pub inequality: EntryInequality,
    pub recipe: Recipe,
    pub reference_eta: QuadraticSurd,
    /// Allowed |recomputed − reference|.
    pub tolerance: f64,
    pub closed_form: Option<ClosedFormId>,
    pub notes: Vec<String>,
}

impl CatalogEntry {
    pub fn symmetric(&self) -> Option<&SymmetricBellInequality> {
        match &self.inequality {
            EntryInequality::Symmetric(s) => Some(s),
            EntryInequality::Asymmetric(_) => None,
        }
    }

    pub fn asymmetric(&self) -> Option<&AsymmetricBellInequality> {
        match &self.inequality {
            EntryInequality::Asymmetric(a) => Some(a),
            EntryInequality::Symmetric(_) => None,
        }
    }

    pub fn settings_label(&self) -> String {
        match &self.inequality {
            EntryInequality::Symmetric(s) => format!("{0}{0}{0}", s.m()),
            EntryInequality::Asymmetric(a) => {
                let [x, y, z] = a.settings();
                format!("{}{}{}", x, y, z)
            }
        }
    }

    /// Threshold recomputed from the stored recipe.
    pub fn recompute_eta(&self) -> Result<f64, CatalogError> {
        let invalid = |reason: &str| CatalogError::Invalid {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        match (&self.inequality, &self.recipe, self.family) {
            (EntryInequality::Symmetric(s), Recipe::Angles(angles), StateFamily::W) => {
                let a: Vec<ProjectorAngle> = angles.iter().map(|&p| ProjectorAngle::new(p)).collect();
                Ok(eta_crit(&quantum_split(s, &SymmetricState::w(), &a)?)?)
            }
            (EntryInequality::Symmetric(s), Recipe::Slopes { .. }, StateFamily::W) => {
                match self.recipe.slopes()?.expect("slope recipe") {
                    SlopeValues::Exact(v) => Ok(small_angle_split_w(s, &v)?.eta_crit()?.to_f64()),
                    SlopeValues::Float(v) => Ok(eta_crit(&small_angle_split_w_f64(s, &v)?)?),
                }
            }
            (EntryInequality::Symmetric(s), Recipe::Slopes { .. }, StateFamily::WPlus111) => {
                let v = self.recipe.slopes()?.expect("slope recipe").to_f64();
                Ok(small_angle_split_psi(s, &v)?.eta_crit()?)
            }
            (EntryInequality::Asymmetric(a), Recipe::PartySlopes { .. }, StateFamily::W) => {
                let slopes = self.recipe.party_slopes()?.expect("party recipe");
                let exact: Vec<Vec<Rational>> = slopes
                    .iter()
                    .map(|s| match s {
                        SlopeValues::Exact(v) => Ok(v.clone()),
                        SlopeValues::Float(_) => Err(invalid("asymmetric recipes need rational slopes")),
                    })
                    .collect::<Result<_, _>>()?;
                Ok(asym_small_angle_split_w(a, [&exact[0], &exact[1], &exact[2]])?.eta_crit()?.to_f64())
            }
            _ => Err(invalid("unsupported combination of inequality, recipe and state family")),
        }
    }

    /// Structural checks that do not need enumeration.
    pub fn validate_structure(&self) -> Result<(), CatalogError> {
        let invalid = |reason: String| CatalogError::Invalid {
            id: self.id.clone(),
            reason,
        };
        match (&self.inequality, &self.recipe) {
            (EntryInequality::Symmetric(s), Recipe::Angles(a)) if a.len() != s.m() => {
                Err(invalid(format!("{} angles for m = {}", a.len(), s.m())))
            }
            (EntryInequality::Symmetric(s), Recipe::Slopes { pattern, .. }) if pattern.len() != s.m() => {
                Err(invalid(format!("{} slopes for m = {}", pattern.len(), s.m())))
            }
            (EntryInequality::Asymmetric(a), Recipe::PartySlopes { pattern, .. }) => {
                for p in 0..3 {
                    if pattern[p].len() != a.settings()[p] {
                        return Err(invalid(format!("party {} slope count mismatch", p)));
                    }
                }
                Ok(())
            }
            (EntryInequality::Asymmetric(_), _) => Err(invalid("asymmetric entries need per-party slopes".into())),
            (_, Recipe::PartySlopes { .. }) => Err(invalid("per-party slopes need an asymmetric inequality".into())),
            _ => Ok(()),
        }?;
        self.recipe.slopes()?;
        self.recipe.party_slopes()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub id: String,
    pub classical_bound: String,
    pub strategies_checked: u64,
    pub classical_bound_ok: bool,
    pub eta_crit: Option<f64>,
    pub reference_eta: f64,
    pub eta_crit_ok: bool,
    pub m2_sign_ok: bool,
    pub error: Option<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.classical_bound_ok && self.eta_crit_ok && self.m2_sign_ok && self.error.is_none()
    }
}

/// Exhaustive enumeration for m ≤ 6, orbit-reduced above.
pub fn entry_classical_bound(entry: &CatalogEntry) -> Result<(Rational, u64), CatalogError> {
    Ok(match &entry.inequality {
        EntryInequality::Symmetric(s) if s.m() <= 6 => {
            let b = classical_bound_full(s)?;
            (b.value, b.strategies_checked)
        }
        EntryInequality::Symmetric(s) => {
            let b = classical_bound(s)?;
            (b.value, b.strategies_checked)
        }
        EntryInequality::Asymmetric(a) => {
            let b = asym_classical_bound(a)?;
            (b.value, b.strategies_checked)
        }
    })
}

pub fn verify_entry(entry: &CatalogEntry) -> VerifyReport {
    let m2_sign_ok = match &entry.inequality {
        EntryInequality::Symmetric(s) => s.m2_nonpositive(),
        EntryInequality::Asymmetric(a) => a.pairs().values().all(|v| !v.is_positive()),
    };
    let mut error = entry.validate_structure().err().map(|e| e.to_string());
    let (bound, checked) = match entry_classical_bound(entry) {
        Ok(b) => b,
        Err(e) => {
            error.get_or_insert(e.to_string());
            (Rational::from_integer(i64::MAX), 0)
        }
    };
    let eta = match entry.recompute_eta() {
        Ok(v) => Some(v),
        Err(e) => {
            error.get_or_insert(e.to_string());
            None
        }
    };
    let reference = entry.reference_eta.to_f64();
    VerifyReport {
        id: entry.id.clone(),
        classical_bound: bound.to_string(),
        strategies_checked: checked,
        classical_bound_ok: bound.is_zero(),
        eta_crit: eta,
        reference_eta: reference,
        eta_crit_ok: eta.is_some_and(|v| (v - reference).abs() <= entry.tolerance),
        m2_sign_ok,
        error,
    }
}

pub fn verify_all(entries: &[CatalogEntry]) -> Vec<VerifyReport> {
    entries.iter().map(verify_entry).collect()
}

pub const IDS: [&str; 9] = [
    "W-222", "W-223", "W-333", "W-444", "W-666", "W-888", "SYM-222", "SYM-333", "SYM-444",
];

fn slopes(pattern: &[&str], params: &[(&str, QuadraticSurd)]) -> Recipe {
    Recipe::Slopes {
        pattern: pattern.iter().map(|s| SlopeExpr::parse(s).unwrap()).collect(),
        params: params
            .iter()
            .map(|(n, v)| Parameter {
                name: n.to_string(),
                value: v.clone(),
            })
            .collect(),
    }
}

fn sym(m: usize, m2: &[(usize, usize, i64)], m3: &[(usize, usize, usize, i64)]) -> EntryInequality {
    EntryInequality::Symmetric(SymmetricBellInequality::from_integers(m, m2, m3).expect("built-in coefficients"))
}

fn eq15() -> EntryInequality {
    sym(2, &[(1, 1, -1)], &[(1, 1, 1, 2), (1, 1, 2, 1), (1, 2, 2, -1)])
}

fn w333() -> EntryInequality {
    sym(3, &[(1, 1, -6), (2, 3, -3)], &[(1, 2, 3, 3), (2, 2, 3, 2), (2, 3, 3, 2)])
}

fn w444() -> EntryInequality {
    sym(
        4,
        &[(1, 2, -6), (3, 4, -2)],
        &[
            (1, 1, 2, 6),
            (1, 1, 4, -6),
            (1, 2, 2, 6),
            (1, 2, 3, 3),
            (1, 2, 4, 3),
            (1, 3, 4, -1),
            (2, 2, 3, -6),
            (2, 3, 4, -1),
            (3, 3, 4, 2),
            (3, 4, 4, 2),
        ],
    )
}

fn w666() -> EntryInequality {
    sym(
        6,
        &[(1, 2, -18), (3, 4, -18), (5, 6, -18)],
        &[
            (1, 1, 2, 18),
            (1, 1, 4, -18),
            (1, 2, 2, 18),
            (1, 2, 3, 9),
            (1, 2, 4, 9),
            (1, 3, 6, -9),
            (1, 5, 6, 8),
            (2, 2, 3, -18),
            (2, 4, 5, -9),
            (2, 5, 6, 4),
            (3, 3, 4, 18),
            (3, 3, 6, -18),
            (3, 4, 4, 18),
            (3, 4, 5, 9),
            (3, 4, 6, 9),
            (3, 5, 6, 1),
            (4, 4, 5, -18),
            (4, 5, 6, 5),
            (5, 5, 6, 4),
            (5, 6, 6, 8),
        ],
    )
}

fn w888() -> EntryInequality {
    sym(
        8,
        &[(1, 2, -6), (3, 4, -6), (5, 6, -6), (7, 8, -6)],
        &[
            (1, 1, 2, 6),
            (1, 1, 4, -6),
            (1, 2, 2, 6),
            (1, 2, 3, 3),
            (1, 2, 4, 3),
            (1, 3, 6, -3),
            (2, 2, 3, -6),
            (2, 4, 5, -3),
            (3, 3, 4, 6),
            (3, 3, 6, -6),
            (3, 4, 4, 6),
            (3, 4, 5, 3),
            (3, 4, 6, 3),
            (3, 5, 8, -3),
            (3, 7, 8, 2),
            (4, 4, 5, -6),
            (4, 6, 7, -3),
            (4, 7, 8, 2),
            (5, 5, 6, 6),
            (5, 5, 8, -6),
            (5, 6, 6, 6),
            (5, 6, 7, 3),
            (5, 6, 8, 3),
            (5, 7, 8, 1),
            (6, 6, 7, -6),
            (6, 7, 8, 1),
            (7, 7, 8, 2),
            (7, 8, 8, 2),
        ],
    )
}

fn sym333() -> EntryInequality {
    sym(
        3,
        &[(1, 1, -2), (2, 3, -1)],
        &[
            (1, 1, 1, 4),
            (1, 1, 2, 1),
            (1, 1, 3, 1),
            (1, 2, 2, -2),
            (1, 2, 3, 1),
            (1, 3, 3, -2),
            (2, 2, 3, 1),
            (2, 3, 3, 1),
        ],
    )
}

fn sym444() -> EntryInequality {
    sym(
        4,
        &[(1, 2, -2), (3, 4, -2)],
        &[
            (1, 1, 2, 2),
            (1, 1, 4, -2),
            (1, 2, 2, 2),
            (1, 2, 3, 1),
            (1, 2, 4, 1),
            (1, 3, 3, -2),
            (1, 3, 4, 1),
            (2, 2, 3, -2),
            (2, 3, 4, 1),
            (2, 4, 4, -2),
            (3, 3, 4, 2),
            (3, 4, 4, 2),
        ],
    )
}

fn w223() -> EntryInequality {
    let one = Rational::one;
    let neg = || Rational::from_integer(-1);
    let pairs = vec![
        ((PartyPair::AB, 0, 0), neg()),
        ((PartyPair::AC, 0, 0), neg()),
        ((PartyPair::BC, 0, 0), neg()),
        ((PartyPair::AB, 2, 1), neg()),
        ((PartyPair::AC, 1, 1), neg()),
        ((PartyPair::BC, 1, 1), neg()),
    ];
    let triples = vec![
        ((0, 1, 1), one()),
        ((1, 0, 1), one()),
        ((2, 1, 0), one()),
        ((1, 1, 1), one()),
        ((2, 1, 1), one()),
    ];
    EntryInequality::Asymmetric(AsymmetricBellInequality::new([3, 2, 2], pairs, triples).expect("built-in coefficients"))
}

fn build(id: &str) -> Option<CatalogEntry> {
    let dec = QuadraticSurd::decimal;
    let entry = |label: &str,
                 family: StateFamily,
                 inequality: EntryInequality,
                 recipe: Recipe,
                 reference: QuadraticSurd,
                 tolerance: f64,
                 closed_form: Option<ClosedFormId>,
                 notes: &[&str]| CatalogEntry {
        id: id.to_string(),
        label: label.to_string(),
        family,
        inequality,
        recipe,
        reference_eta: reference,
        tolerance,
        closed_form,
        notes: notes.iter().map(|s| s.to_string()).collect(),
    };
    let lambda444 = ("lambda", dec("0.466715"));
    let golden = ("lambda", QuadraticSurd::surd(Rational::from_integer(-2), Rational::one(), 5));
    Some(match id {
        "W-222" => entry(
            "m=2, W state, finite angles",
            StateFamily::W,
            eq15(),
            Recipe::Angles(vec![2.28059, 0.33432]),
            dec("0.83747"),
            1e-5,
            None,
            &[],
        ),
        "W-223" => entry(
            "3-2-2 settings, W state, small angles",
            StateFamily::W,
            w223(),
            Recipe::PartySlopes {
                pattern: [
                    ["0", "1", "-1"].iter().map(|s| SlopeExpr::parse(s).unwrap()).collect(),
                    ["0", "1"].iter().map(|s| SlopeExpr::parse(s).unwrap()).collect(),
                    ["0", "-1"].iter().map(|s| SlopeExpr::parse(s).unwrap()).collect(),
                ],
                params: vec![],
            },
            dec("0.6"),
            1e-5,
            None,
            &["derived from W-333 by dropping one setting of B and one of C"],
        ),
        "W-333" => entry(
            "m=3, W state, small angles",
            StateFamily::W,
            w333(),
            slopes(&["0", "1", "-1"], &[]),
            dec("0.6"),
            1e-5,
            None,
            &["LP optimum at these slopes is not unique; this is one representative"],
        ),
        "W-444" => entry(
            "m=4, W state, small angles",
            StateFamily::W,
            w444(),
            slopes(&["1", "-1", "lambda", "-lambda"], &[lambda444]),
            dec("0.509036"),
            1e-5,
            Some(ClosedFormId::W444),
            &[],
        ),
        "W-666" => entry(
            "m=6, W state, small angles",
            StateFamily::W,
            w666(),
            slopes(
                &["1", "-1", "mu", "-mu", "nu", "-nu"],
                &[("mu", dec("0.495815")), ("nu", dec("0.295435"))],
            ),
            dec("0.502417"),
            1e-5,
            Some(ClosedFormId::W666),
            &[],
        ),
        "W-888" => entry(
            "m=8, W state, small angles",
            StateFamily::W,
            w888(),
            slopes(
                &["1", "-1", "rho", "-rho", "sigma", "-sigma", "tau", "-tau"],
                &[("rho", dec("0.498442")), ("sigma", dec("0.306395")), ("tau", dec("0.169989"))],
            ),
            dec("0.501338"),
            1e-5,
            Some(ClosedFormId::W888),
            &["source table cites the m=6 equation for this row; coefficients are those of the m=8 inequality"],
        ),
        "SYM-222" => entry(
            "m=2, W+111 state, small angles",
            StateFamily::WPlus111,
            eq15(),
            slopes(&["0", "1"], &[]),
            dec("0.6"),
            1e-5,
            Some(ClosedFormId::Sym222),
            &["same coefficients as W-222"],
        ),
        "SYM-333" => entry(
            "m=3, W+111 state, small angles",
            StateFamily::WPlus111,
            sym333(),
            slopes(&["0", "1", "-1"], &[]),
            QuadraticSurd::surd(Rational::new(19, 96), Rational::new(1, 96), 937),
            1e-10,
            Some(ClosedFormId::Sym333),
            &["threshold is the positive root of 48x^2 - 19x - 3"],
        ),
        "SYM-444" => entry(
            "m=4, W+111 state, small angles",
            StateFamily::WPlus111,
            sym444(),
            slopes(&["1", "-1", "lambda", "-lambda"], &[golden]),
            QuadraticSurd::rational(Rational::new(1, 2)),
            1e-10,
            Some(ClosedFormId::Sym444),
            &["lambda = -2 + sqrt(5) makes the threshold exactly 1/2"],
        ),
        _ => return None,
    })
}

/// Entry by id, validated before it is returned.
pub fn load(id: &str) -> Result<CatalogEntry, CatalogError> {
    let entry = build(id).ok_or_else(|| CatalogError::UnknownId(id.to_string()))?;
    entry.validate_structure()?;
    let invalid = |reason: String| CatalogError::Invalid {
        id: id.to_string(),
        reason,
    };
    if let EntryInequality::Symmetric(s) = &entry.inequality {
        if !s.m2_nonpositive() {
            return Err(invalid("positive two-party coefficient".into()));
        }
    }
    let (bound, _) = entry_classical_bound(&entry)?;
    if !bound.is_zero() {
        return Err(invalid(format!("classical bound is {}, expected 0", bound)));
    }
    Ok(entry)
}

pub fn load_all() -> Result<Vec<CatalogEntry>, CatalogError> {
    IDS.iter().map(|id| load(id)).collect()
}

/// Entries without the load-time enumeration, for callers that verify anyway.
pub fn builtin_entries() -> Vec<CatalogEntry> {
    IDS.iter().map(|id| build(id).expect("known id")).collect()
}

// ---- file format ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityFile {
    Symmetric(InequalityJson),
    Asymmetric(AsymmetricJson),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterFile {
    pub name: String,
    pub value: QuadraticSurd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeFile {
    Angles(Vec<f64>),
    Slopes {
        pattern: Vec<String>,
        #[serde(default)]
        params: Vec<ParameterFile>,
    },
    PartySlopes {
        pattern: [Vec<String>; 3],
        #[serde(default)]
        params: Vec<ParameterFile>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryFile {
    pub id: String,
    pub label: String,
    pub family: StateFamily,
    pub inequality: InequalityFile,
    pub recipe: RecipeFile,
    pub reference_eta: QuadraticSurd,
    pub tolerance: f64,
    #[serde(default)]
    pub closed_form: Option<ClosedFormId>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogFile {
    pub entries: Vec<EntryFile>,
}

fn params_to_file(params: &[Parameter]) -> Vec<ParameterFile> {
    params
        .iter()
        .map(|p| ParameterFile {
            name: p.name.clone(),
            value: p.value.clone(),
        })
        .collect()
}

fn params_from_file(params: &[ParameterFile]) -> Vec<Parameter> {
    params
        .iter()
        .map(|p| Parameter {
            name: p.name.clone(),
            value: p.value.clone(),
        })
        .collect()
}

impl From<&CatalogEntry> for EntryFile {
    fn from(e: &CatalogEntry) -> Self {
        let strs = |v: &[SlopeExpr]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        EntryFile {
            id: e.id.clone(),
            label: e.label.clone(),
            family: e.family,
            inequality: match &e.inequality {
                EntryInequality::Symmetric(s) => InequalityFile::Symmetric(s.to_json()),
                EntryInequality::Asymmetric(a) => InequalityFile::Asymmetric(a.to_json()),
            },
            recipe: match &e.recipe {
                Recipe::Angles(a) => RecipeFile::Angles(a.clone()),
                Recipe::Slopes { pattern, params } => RecipeFile::Slopes {
                    pattern: strs(pattern),
                    params: params_to_file(params),
                },
                Recipe::PartySlopes { pattern, params } => RecipeFile::PartySlopes {
                    pattern: [strs(&pattern[0]), strs(&pattern[1]), strs(&pattern[2])],
                    params: params_to_file(params),
                },
            },
            reference_eta: e.reference_eta.clone(),
            tolerance: e.tolerance,
            closed_form: e.closed_form,
            notes: e.notes.clone(),
        }
    }
}

impl TryFrom<&EntryFile> for CatalogEntry {
    type Error = CatalogError;

    fn try_from(f: &EntryFile) -> Result<Self, CatalogError> {
        let parse_all = |v: &[String]| v.iter().map(|s| SlopeExpr::parse(s)).collect::<Result<Vec<_>, _>>();
        let entry = CatalogEntry {
            id: f.id.clone(),
            label: f.label.clone(),
            family: f.family,
            inequality: match &f.inequality {
                InequalityFile::Symmetric(j) => EntryInequality::Symmetric(SymmetricBellInequality::from_json(j)?),
                InequalityFile::Asymmetric(j) => EntryInequality::Asymmetric(AsymmetricBellInequality::from_json(j)?),
            },
            recipe: match &f.recipe {
                RecipeFile::Angles(a) => Recipe::Angles(a.clone()),
                RecipeFile::Slopes { pattern, params } => Recipe::Slopes {
                    pattern: parse_all(pattern)?,
                    params: params_from_file(params),
                },
                RecipeFile::PartySlopes { pattern, params } => Recipe::PartySlopes {
                    pattern: [parse_all(&pattern[0])?, parse_all(&pattern[1])?, parse_all(&pattern[2])?],
                    params: params_from_file(params),
                },
            },
            reference_eta: f.reference_eta.clone(),
            tolerance: f.tolerance,
            closed_form: f.closed_form,
            notes: f.notes.clone(),
        };
        entry.validate_structure()?;
        Ok(entry)
    }
}

pub fn export(entries: &[CatalogEntry]) -> CatalogFile {
    CatalogFile {
        entries: entries.iter().map(EntryFile::from).collect(),
    }
}

/// Parse a catalog file. Structure is checked here; numerical invariants are
/// left to [`verify_all`] so a corrupted entry shows up in the report.
pub fn parse_catalog(text: &str) -> Result<Vec<CatalogEntry>, CatalogError> {
    let file: CatalogFile = serde_json::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
    file.entries.iter().map(CatalogEntry::try_from).collect()
}
