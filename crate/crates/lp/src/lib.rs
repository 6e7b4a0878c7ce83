//! Dense revised simplex over exact rationals or `f64`.
//!
//! [`LinearProgram`] takes rows in general form. [`RevisedSimplex`] is the
//! equality-form engine underneath, exposed for column generation.

mod program;
mod rational;
mod scalar;
mod simplex;

pub use program::{Bound, Constraint, Feasibility, LinearProgram, LpError, Relation, Sense, Solution};
pub use rational::{cmp_f64, gcd_of_numerators, lcm_of_denominators, ParseRationalError, Rational};
pub use scalar::{Scalar, F64_TOL};
pub use simplex::{PhaseOne, PhaseTwo, PivotRule, RevisedSimplex, SimplexError};

pub use num_bigint::BigInt;
