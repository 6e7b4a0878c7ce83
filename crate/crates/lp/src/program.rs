use crate::scalar::Scalar;
use crate::simplex::{PhaseOne, PhaseTwo, PivotRule, RevisedSimplex, SimplexError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bound {
    #[default]
    NonNegative,
    NonPositive,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sense {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// `sense c·x` subject to rows `a·x (<=|=|>=) b` and per-variable sign bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub sense: Sense,
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub bounds: Vec<Bound>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("program has no variables")]
    NoVariables,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Solution<T> {
    Optimal {
        value: T,
        x: Vec<T>,
        /// One multiplier per constraint with `b·y = value` at optimality.
        duals: Vec<T>,
    },
    /// A feasible point exists and `ray` improves the objective without bound.
    Unbounded { ray: Vec<T> },
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility<T> {
    Feasible(Vec<T>),
    Infeasible,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(sense: Sense, objective: Vec<T>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            constraints: Vec::new(),
            bounds: vec![Bound::NonNegative; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<T>, relation: Relation, rhs: T) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn set_bound(&mut self, var: usize, bound: Bound) -> &mut Self {
        self.bounds[var] = bound;
        self
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if n == 0 {
            return Err(LpError::NoVariables);
        }
        if self.bounds.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                n
            )));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::DimensionMismatch(format!(
                    "row {} has {} coefficients, expected {}",
                    i,
                    c.coeffs.len(),
                    n
                )));
            }
        }
        Ok(())
    }

    /// Equality-form engine plus the map from engine columns back to
    /// variables: (variable, sign) for split parts, `None` for slacks.
    fn standard_form(&self, rule: PivotRule) -> Result<(RevisedSimplex<T>, Vec<Option<(usize, bool)>>), LpError> {
        self.validate()?;
        let rhs = self.constraints.iter().map(|c| c.rhs.clone()).collect();
        let mut engine = RevisedSimplex::new(rhs, rule);
        let mut origin = Vec::new();
        let sign = match self.sense {
            Sense::Maximize => T::one(),
            Sense::Minimize => T::one().neg(),
        };
        for (v, bound) in self.bounds.iter().enumerate() {
            let col: Vec<T> = self.constraints.iter().map(|c| c.coeffs[v].clone()).collect();
            let cost = self.objective[v].mul(&sign);
            let parts: &[bool] = match bound {
                Bound::NonNegative => &[true],
                Bound::NonPositive => &[false],
                Bound::Free => &[true, false],
            };
            for &positive in parts {
                if positive {
                    engine.add_column(col.clone(), cost.clone())?;
                } else {
                    engine.add_column(col.iter().map(|a| a.neg()).collect(), cost.neg())?;
                }
                origin.push(Some((v, positive)));
            }
        }
        let rows = self.constraints.len();
        for (i, c) in self.constraints.iter().enumerate() {
            let unit = match c.relation {
                Relation::Le => T::one(),
                Relation::Ge => T::one().neg(),
                Relation::Eq => continue,
            };
            let mut col = vec![T::zero(); rows];
            col[i] = unit;
            engine.add_column(col, T::zero())?;
            origin.push(None);
        }
        Ok((engine, origin))
    }

    fn recover(&self, values: &[T], origin: &[Option<(usize, bool)>]) -> Vec<T> {
        let mut x = vec![T::zero(); self.num_vars()];
        for (val, o) in values.iter().zip(origin) {
            if let Some((v, positive)) = o {
                x[*v] = if *positive { x[*v].add(val) } else { x[*v].sub(val) };
            }
        }
        x
    }

    pub fn solve(&self) -> Result<Solution<T>, LpError> {
        self.solve_with(PivotRule::Bland)
    }

    pub fn solve_with(&self, rule: PivotRule) -> Result<Solution<T>, LpError> {
        let (mut engine, origin) = self.standard_form(rule)?;
        if engine.phase_one()? == PhaseOne::Infeasible {
            return Ok(Solution::Infeasible);
        }
        match engine.phase_two()? {
            PhaseTwo::Optimal => {
                let x = self.recover(&engine.primal(), &origin);
                let mut duals = engine.duals();
                let mut value = engine.objective();
                if self.sense == Sense::Minimize {
                    value = value.neg();
                    duals = duals.into_iter().map(|y| y.neg()).collect();
                }
                Ok(Solution::Optimal { value, x, duals })
            }
            PhaseTwo::Unbounded { column, ray } => {
                let mut dir = vec![T::zero(); origin.len()];
                dir[column] = T::one();
                for (k, v) in ray {
                    dir[k] = v;
                }
                Ok(Solution::Unbounded {
                    ray: self.recover(&dir, &origin),
                })
            }
        }
    }

    /// Phase one only.
    pub fn feasibility(&self) -> Result<Feasibility<T>, LpError> {
        let (mut engine, origin) = self.standard_form(PivotRule::Bland)?;
        match engine.phase_one()? {
            PhaseOne::Infeasible => Ok(Feasibility::Infeasible),
            PhaseOne::Feasible => Ok(Feasibility::Feasible(self.recover(&engine.primal(), &origin))),
        }
    }

    /// Largest violation of any row or bound at `x` (0 means feasible).
    pub fn max_violation(&self, x: &[T]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let mut lhs = T::zero();
            for (a, v) in c.coeffs.iter().zip(x) {
                lhs = lhs.add(&a.mul(v));
            }
            let diff = lhs.sub(&c.rhs).to_f64();
            let viol = match c.relation {
                Relation::Le => diff.max(0.0),
                Relation::Ge => (-diff).max(0.0),
                Relation::Eq => diff.abs(),
            };
            worst = worst.max(viol);
        }
        for (b, v) in self.bounds.iter().zip(x) {
            let v = v.to_f64();
            let viol = match b {
                Bound::NonNegative => (-v).max(0.0),
                Bound::NonPositive => v.max(0.0),
                Bound::Free => 0.0,
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn q(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn maximize_bounded_by_row() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![q(1)]);
        lp.add_constraint(vec![q(1)], Relation::Le, q(3));
        match lp.solve().unwrap() {
            Solution::Optimal { value, x, duals } => {
                assert_eq!(value, q(3));
                assert_eq!(x, vec![q(3)]);
                assert_eq!(duals, vec![q(1)]);
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn unbounded_without_rows() {
        let lp = LinearProgram::new(Sense::Maximize, vec![q(1)]);
        match lp.solve().unwrap() {
            Solution::Unbounded { ray } => assert_eq!(ray, vec![q(1)]),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn contradictory_rows_infeasible() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![q(0)]);
        lp.set_bound(0, Bound::Free);
        lp.add_constraint(vec![q(1)], Relation::Le, q(-1));
        lp.add_constraint(vec![q(1)], Relation::Ge, q(0));
        assert_eq!(lp.solve().unwrap(), Solution::Infeasible);
        assert_eq!(lp.feasibility().unwrap(), Feasibility::Infeasible);
    }

    #[test]
    fn empty_constraint_set_feasible_at_origin() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![q(1), q(-1)]);
        lp.set_bound(1, Bound::Free);
        assert_eq!(lp.feasibility().unwrap(), Feasibility::Feasible(vec![q(0), q(0)]));
    }

    #[test]
    fn free_and_nonpositive_bounds() {
        // min x + y  s.t. x - y = 2, x free, y <= 0, x >= -5
        let mut lp = LinearProgram::new(Sense::Minimize, vec![q(1), q(1)]);
        lp.set_bound(0, Bound::Free).set_bound(1, Bound::NonPositive);
        lp.add_constraint(vec![q(1), q(-1)], Relation::Eq, q(2));
        lp.add_constraint(vec![q(1), q(0)], Relation::Ge, q(-5));
        match lp.solve().unwrap() {
            Solution::Optimal { value, x, duals } => {
                assert_eq!(value, q(-12));
                assert_eq!(x, vec![q(-5), q(-7)]);
                let dual_value = &duals[0] * &q(2) + &duals[1] * &q(-5);
                assert_eq!(dual_value, value);
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn errors_on_malformed_input() {
        let lp: LinearProgram<Rational> = LinearProgram::new(Sense::Maximize, vec![]);
        assert_eq!(lp.solve().unwrap_err(), LpError::NoVariables);
        let mut lp = LinearProgram::new(Sense::Maximize, vec![q(1), q(1)]);
        lp.add_constraint(vec![q(1)], Relation::Le, q(1));
        assert!(matches!(lp.solve().unwrap_err(), LpError::DimensionMismatch(_)));
    }
}
