use bellforge_lp::{Bound, LinearProgram, PivotRule, Rational, Relation, Sense, Solution};
use proptest::prelude::*;

fn q(n: i64) -> Rational {
    Rational::from_integer(n)
}

/// Random program in two or three nonnegative variables, boxed so it is never
/// unbounded.
fn boxed_program() -> impl Strategy<Value = LinearProgram<Rational>> {
    (2usize..=3)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(-5i64..=5, n),
                prop::collection::vec((prop::collection::vec(-4i64..=4, n), 0usize..3, -6i64..=12), 0..5),
            )
        })
        .prop_map(|(n, obj, rows)| {
            let mut lp = LinearProgram::new(Sense::Maximize, obj.into_iter().map(q).collect());
            for (coeffs, rel, rhs) in rows {
                let rel = [Relation::Le, Relation::Ge, Relation::Eq][rel];
                lp.add_constraint(coeffs.into_iter().map(q).collect(), rel, q(rhs));
            }
            for v in 0..n {
                let mut unit = vec![q(0); n];
                unit[v] = q(1);
                lp.add_constraint(unit, Relation::Le, q(10));
            }
            lp
        })
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn optimal_solutions_are_exact_and_certified(lp in boxed_program()) {
        if let Solution::Optimal { value, x, duals } = lp.solve().unwrap() {
            prop_assert_eq!(lp.max_violation(&x), 0.0);
            prop_assert_eq!(dot(&lp.objective, &x), value.clone());
            let rhs: Vec<Rational> = lp.constraints.iter().map(|c| c.rhs.clone()).collect();
            prop_assert_eq!(dot(&rhs, &duals), value);
            for (c, y) in lp.constraints.iter().zip(&duals) {
                match c.relation {
                    Relation::Le => prop_assert!(!y.is_negative()),
                    Relation::Ge => prop_assert!(!y.is_positive()),
                    Relation::Eq => {}
                }
            }
            for (j, cj) in lp.objective.iter().enumerate() {
                let aty: Rational = lp.constraints.iter().zip(&duals).map(|(c, y)| &c.coeffs[j] * y).sum();
                prop_assert!(aty >= *cj);
            }
        }
    }

    #[test]
    fn identical_input_identical_output(lp in boxed_program()) {
        prop_assert_eq!(lp.solve().unwrap(), lp.solve().unwrap());
    }

    #[test]
    fn float_path_agrees_with_exact(lp in boxed_program()) {
        let float = LinearProgram {
            sense: lp.sense,
            objective: lp.objective.iter().map(|v| v.to_f64()).collect(),
            constraints: lp.constraints.iter().map(|c| bellforge_lp::Constraint {
                coeffs: c.coeffs.iter().map(|v| v.to_f64()).collect(),
                relation: c.relation,
                rhs: c.rhs.to_f64(),
            }).collect(),
            bounds: lp.bounds.clone(),
        };
        match (lp.solve().unwrap(), float.solve_with(PivotRule::Dantzig).unwrap()) {
            (Solution::Optimal { value: a, .. }, Solution::Optimal { value: b, .. }) => {
                prop_assert!((a.to_f64() - b).abs() < 1e-9);
            }
            (Solution::Infeasible, Solution::Infeasible) => {}
            (a, b) => prop_assert!(false, "exact {:?} vs float {:?}", a, b),
        }
    }

    /// Two variables: the optimum sits at a vertex, so enumerating all
    /// pairwise intersections of the boundary lines is an independent oracle.
    #[test]
    fn two_variable_vertex_oracle(
        obj in prop::collection::vec(-5i64..=5, 2),
        rows in prop::collection::vec((prop::collection::vec(-4i64..=4, 2), -6i64..=12), 0..5),
    ) {
        let mut lp = LinearProgram::new(Sense::Maximize, obj.iter().map(|&v| q(v)).collect());
        let mut lines: Vec<(Vec<Rational>, Rational)> = Vec::new();
        for (c, b) in &rows {
            lp.add_constraint(c.iter().map(|&v| q(v)).collect(), Relation::Le, q(*b));
            lines.push((c.iter().map(|&v| q(v)).collect(), q(*b)));
        }
        for v in 0..2 {
            let mut unit = vec![q(0); 2];
            unit[v] = q(1);
            lp.add_constraint(unit.clone(), Relation::Le, q(10));
            lines.push((unit.clone(), q(10)));
            lines.push((unit.iter().map(|u| -u).collect(), q(0)));
        }
        let feasible = |x: &[Rational]| {
            lines.iter().all(|(c, b)| dot(c, x) <= *b)
        };
        let mut best: Option<Rational> = None;
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                let (a, b) = (&lines[i], &lines[j]);
                let det = &a.0[0] * &b.0[1] - &a.0[1] * &b.0[0];
                if det.is_zero() {
                    continue;
                }
                let x0 = (&a.1 * &b.0[1] - &a.0[1] * &b.1) / det.clone();
                let x1 = (&a.0[0] * &b.1 - &a.1 * &b.0[0]) / det;
                let x = [x0, x1];
                if feasible(&x) {
                    let v = dot(&lp.objective, &x);
                    if best.as_ref().map_or(true, |b| v > *b) {
                        best = Some(v);
                    }
                }
            }
        }
        match lp.solve().unwrap() {
            Solution::Optimal { value, .. } => prop_assert_eq!(Some(value), best),
            Solution::Infeasible => prop_assert_eq!(best, None),
            Solution::Unbounded { .. } => prop_assert!(false, "boxed program reported unbounded"),
        }
    }
}

#[test]
fn unbounded_ray_is_a_recession_direction() {
    // max x + y  s.t.  x - y <= 1, x, y >= 0
    let mut lp = LinearProgram::new(Sense::Maximize, vec![q(1), q(1)]);
    lp.add_constraint(vec![q(1), q(-1)], Relation::Le, q(1));
    match lp.solve().unwrap() {
        Solution::Unbounded { ray } => {
            assert!(dot(&lp.objective, &ray).is_positive());
            assert!(dot(&lp.constraints[0].coeffs, &ray) <= q(0));
            assert!(ray.iter().all(|r| !r.is_negative()));
        }
        other => panic!("{:?}", other),
    }
}

#[test]
fn free_variable_can_go_negative() {
    let mut lp = LinearProgram::new(Sense::Minimize, vec![q(1)]);
    lp.set_bound(0, Bound::Free);
    lp.add_constraint(vec![q(1)], Relation::Ge, Rational::new(-7, 3));
    match lp.solve().unwrap() {
        Solution::Optimal { value, .. } => assert_eq!(value, Rational::new(-7, 3)),
        other => panic!("{:?}", other),
    }
}

#[test]
fn degenerate_program_terminates_under_bland() {
    // Beale's cycling example.
    let mut lp = LinearProgram::new(
        Sense::Maximize,
        vec![Rational::new(3, 4), q(-150), Rational::new(1, 50), q(-6)],
    );
    lp.add_constraint(vec![Rational::new(1, 4), q(-60), Rational::new(-1, 25), q(9)], Relation::Le, q(0));
    lp.add_constraint(vec![Rational::new(1, 2), q(-90), Rational::new(-1, 50), q(3)], Relation::Le, q(0));
    lp.add_constraint(vec![q(0), q(0), q(1), q(0)], Relation::Le, q(1));
    match lp.solve().unwrap() {
        Solution::Optimal { value, .. } => assert_eq!(value, Rational::new(1, 20)),
        other => panic!("{:?}", other),
    }
}
