mod common;

use bellforge::catalog::{self, Recipe, StateFamily};
use bellforge::inequality::*;
use bellforge::quantum::{ProjectorAngle, SymmetricState};
use bellforge::Rational;
use common::*;
use proptest::prelude::*;

fn eq16() -> SymmetricBellInequality {
    catalog::load("W-333").unwrap().symmetric().unwrap().clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn multiplicity_sum_matches_full_tensor(
        m in 1usize..=4,
        pairs in prop::collection::vec(-5i64..=5, 10),
        triples in prop::collection::vec(-5i64..=5, 20),
        angles in prop::collection::vec(-3.2f64..3.2, 4),
        u in 0.0f64..3.2,
        v in 0.0f64..3.2,
    ) {
        let ineq = random_inequality(m, &pairs, &triples);
        let state = SymmetricState::new(u.cos(), u.sin() * v.cos(), u.sin() * v.sin()).unwrap();
        let a: Vec<ProjectorAngle> = angles[..m].iter().map(|&p| ProjectorAngle::new(p)).collect();
        let split = quantum_split(&ineq, &state, &a).unwrap();
        let (m2, m3) = oracle_split(&ineq, &state.amplitudes(), &angles[..m]);
        prop_assert!((split.m2_value - m2).abs() < 1e-12);
        prop_assert!((split.m3_value - m3).abs() < 1e-12);
        let amps = state.amplitudes();
        let full = full_tensor_split(&ineq, &amps, &amps, &angles[..m]).unwrap();
        prop_assert!((full.m2_value - m2).abs() < 1e-12);
        prop_assert!((full.m3_value - m3).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn eta_crit_is_scale_invariant(num in 1i64..50, den in 1i64..50, slope in 0.1f64..0.9) {
        let ineq = catalog::load("W-444").unwrap().symmetric().unwrap().clone();
        let slopes = [1.0, -1.0, slope, -slope];
        let base = small_angle_split_w_f64(&ineq, &slopes).unwrap();
        let scaled = ineq.scaled(&Rational::new(num, den));
        let s = small_angle_split_w_f64(&scaled, &slopes).unwrap();
        match (eta_crit(&base), eta_crit(&s)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "scaling changed the violation status"),
        }
        let exact: Vec<Rational> = vec![Rational::from_integer(1), Rational::from_integer(-1), Rational::new(num, 50), Rational::new(-num, 50)];
        let a = small_angle_split_w(&ineq, &exact).unwrap();
        let b = small_angle_split_w(&scaled, &exact).unwrap();
        if let (Ok(x), Ok(y)) = (a.eta_crit(), b.eta_crit()) {
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn integer_normalization_keeps_ratios(num in 1i64..30, den in 1i64..30) {
        let ineq = eq16();
        let n = ineq.scaled(&Rational::new(num, den)).integer_normalized();
        prop_assert_eq!(n, ineq.integer_normalized());
    }
}

#[test]
fn effective_value_and_threshold_examples() {
    let s = EfficiencySplit::new(-1.0, 2.0);
    assert_eq!(effective_value(&s, 0.0).unwrap(), 0.0);
    assert_eq!(effective_value(&s, 1.0).unwrap(), 1.0);
    assert_eq!(effective_value(&s, 0.5).unwrap(), 0.0);
    assert!(effective_value(&s, 1.5).is_err());
    assert!(effective_value(&s, -0.1).is_err());
    assert_eq!(eta_crit(&s).unwrap(), 0.5);
    assert!((eta_crit(&EfficiencySplit::new(-18.0, 30.0)).unwrap() - 0.6).abs() < 1e-15);
    assert!(matches!(eta_crit(&EfficiencySplit::new(-1.0, 0.0)), Err(InequalityError::NoViolation(_))));
}

#[test]
fn three_setting_small_angle_split() {
    let ineq = eq16();
    let slopes = [0, 1, -1].map(Rational::from_integer);
    let exact = small_angle_split_w(&ineq, &slopes).unwrap();
    assert_eq!(exact.m2, Rational::new(-18, 48));
    assert_eq!(exact.m3, Rational::new(30, 48));
    assert_eq!(exact.eta_crit().unwrap(), Rational::new(3, 5));
    let x = 1e-3;
    let angles = [0.0, x, -x].map(ProjectorAngle::new);
    let s = quantum_split(&ineq, &SymmetricState::w(), &angles).unwrap();
    assert!((s.m2_value / x.powi(4) + 18.0 / 48.0).abs() < 1e-4);
    assert!((s.m3_value / x.powi(4) - 30.0 / 48.0).abs() < 1e-4);
    let zero = SymmetricBellInequality::zero(3).unwrap();
    let z = quantum_split(&zero, &SymmetricState::w(), &angles).unwrap();
    assert_eq!((z.m2_value, z.m3_value), (0.0, 0.0));
    assert!(quantum_split(&ineq, &SymmetricState::w(), &angles[..2]).is_err());
}

#[test]
fn two_setting_finite_angles() {
    let ineq = catalog::load("W-222").unwrap().symmetric().unwrap().clone();
    let a = [2.28059, 0.33432].map(ProjectorAngle::new);
    let s = quantum_split(&ineq, &SymmetricState::w(), &a).unwrap();
    assert!((eta_crit(&s).unwrap() - 0.83747).abs() < 1e-5);
}

/// Value at η of an entry with its stored state and measurements; for the
/// |W⟩+|111⟩ family the mixing is chosen optimally at each η.
fn entry_value(entry: &catalog::CatalogEntry, eta: f64) -> f64 {
    let ineq = entry.symmetric().unwrap();
    match (&entry.recipe, entry.family) {
        (Recipe::Angles(a), _) => {
            let a: Vec<ProjectorAngle> = a.iter().map(|&p| ProjectorAngle::new(p)).collect();
            effective_value(&quantum_split(ineq, &SymmetricState::w(), &a).unwrap(), eta).unwrap()
        }
        (Recipe::Slopes { .. }, StateFamily::W) => {
            let v = entry.recipe.slopes().unwrap().unwrap().to_f64();
            effective_value(&small_angle_split_w_f64(ineq, &v).unwrap(), eta).unwrap()
        }
        (Recipe::Slopes { .. }, _) => {
            let v = entry.recipe.slopes().unwrap().unwrap().to_f64();
            small_angle_split_psi(ineq, &v).unwrap().optimal_value(eta)
        }
        _ => unreachable!(),
    }
}

#[test]
fn catalog_entries_violate_exactly_above_threshold() {
    for entry in catalog::load_all().unwrap() {
        if entry.symmetric().is_none() {
            continue;
        }
        let eta_c = entry.recompute_eta().unwrap();
        for n in 0..=100 {
            let eta = n as f64 / 100.0;
            let v = entry_value(&entry, eta);
            let scale = entry_value(&entry, 1.0).abs();
            if eta > eta_c + 1e-9 {
                assert!(v > 0.0, "{} at η = {eta}: {v}", entry.id);
            } else if eta < eta_c - 1e-9 {
                assert!(v <= 1e-12 * scale, "{} at η = {eta}: {v}", entry.id);
            }
        }
    }
}

#[test]
fn json_round_trip_uses_one_based_indices() {
    let ineq = eq16();
    let json = serde_json::to_value(ineq.to_json()).unwrap();
    assert_eq!(json["m"], 3);
    let first = &json["m2"][0];
    assert!(first[0].as_u64().unwrap() >= 1);
    let back: InequalityJson = serde_json::from_value(json).unwrap();
    assert_eq!(SymmetricBellInequality::from_json(&back).unwrap(), ineq);
    let bad: InequalityJson = serde_json::from_str(r#"{"m":2,"m2":[[0,1,-1,1]],"m3":[]}"#).unwrap();
    assert!(SymmetricBellInequality::from_json(&bad).is_err());
}

#[test]
fn multiplicities() {
    assert_eq!(pair_multiplicity(0, 0), 3);
    assert_eq!(pair_multiplicity(0, 1), 6);
    assert_eq!(triple_multiplicity(1, 1, 1), 1);
    assert_eq!(triple_multiplicity(0, 0, 1), 3);
    assert_eq!(triple_multiplicity(0, 1, 2), 6);
}

#[test]
fn asymmetric_entry_matches_one_sixth_of_symmetric_value() {
    let asym = catalog::load("W-223").unwrap().asymmetric().unwrap().clone();
    let sym = eq16();
    let x = 1e-2;
    let (a, b, c) = ([0.0, x, -x], [0.0, x], [0.0, -x]);
    let w = SymmetricState::w();
    let angles = [0.0, x, -x].map(ProjectorAngle::new);
    let split = quantum_split(&sym, &w, &angles).unwrap();
    for n in 1..=10 {
        let eta = n as f64 / 10.0;
        let s = effective_value(&split, eta).unwrap() / 6.0;
        let v = asym_quantum_value(&asym, &w, [&a, &b, &c], eta).unwrap();
        assert!((v - s).abs() <= 1e-10 * s.abs().max(1e-300), "η = {eta}: {v} vs {s}");
    }
    assert_eq!(asym_quantum_value(&asym, &w, [&a, &b, &c], 0.0).unwrap(), 0.0);
    assert!(asym_quantum_value(&asym, &w, [&a, &a, &c], 0.5).is_err());
}
