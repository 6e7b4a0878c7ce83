//! Revised primal simplex on equality-form programs
//! `maximize c·x  s.t.  A x = b,  x >= 0`
//! with an explicit dense basis inverse. Every row carries an artificial
//! variable that starts basic, so phase one needs no crash basis. Columns can
//! be appended at any time and the solve resumes from the current basis,
//! which is what column generation needs.

use crate::scalar::{Scalar, F64_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Smallest-index entering and leaving variable. Never cycles.
    #[default]
    Bland,
    /// Most negative reduced cost, with a switch to Bland after a run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Art(usize),
    Col(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseOne {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseTwo<T> {
    Optimal,
    /// Column `column` can increase without bound. `ray` lists the rate of
    /// change of every basic structural column per unit of `column`.
    Unbounded { column: usize, ray: Vec<(usize, T)> },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimplexError {
    #[error("column has {got} entries, expected {expected}")]
    ColumnLength { expected: usize, got: usize },
    #[error("pivot limit of {0} reached")]
    PivotLimit(usize),
    #[error("phase two requested before a feasible basis was found")]
    NotFeasible,
}

const REFACTOR_EVERY: usize = 50;
const DEGENERATE_RUN: usize = 30;

#[derive(Debug, Clone)]
pub struct RevisedSimplex<T: Scalar> {
    rows: usize,
    rhs: Vec<T>,
    flip: Vec<bool>,
    cols: Vec<Vec<T>>,
    costs: Vec<T>,
    basic_row: Vec<Option<usize>>,
    basis: Vec<Var>,
    binv: Vec<Vec<T>>,
    xb: Vec<T>,
    rule: PivotRule,
    pivots: usize,
    since_refactor: usize,
    degenerate_run: usize,
    feasible: bool,
    pivot_limit: usize,
}

impl<T: Scalar> RevisedSimplex<T> {
    pub fn new(rhs: Vec<T>, rule: PivotRule) -> Self {
        let rows = rhs.len();
        let flip: Vec<bool> = rhs.iter().map(|b| b.lt(&T::zero())).collect();
        let rhs: Vec<T> = rhs
            .into_iter()
            .zip(&flip)
            .map(|(b, &f)| if f { b.neg() } else { b })
            .collect();
        let mut binv = vec![vec![T::zero(); rows]; rows];
        for (i, row) in binv.iter_mut().enumerate() {
            row[i] = T::one();
        }
        RevisedSimplex {
            rows,
            xb: rhs.clone(),
            rhs,
            flip,
            cols: Vec::new(),
            costs: Vec::new(),
            basic_row: Vec::new(),
            basis: (0..rows).map(Var::Art).collect(),
            binv,
            rule,
            pivots: 0,
            since_refactor: 0,
            degenerate_run: 0,
            feasible: rows == 0,
            pivot_limit: 200_000,
        }
    }

    pub fn set_pivot_limit(&mut self, limit: usize) {
        self.pivot_limit = limit;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn num_columns(&self) -> usize {
        self.cols.len()
    }

    pub fn pivots(&self) -> usize {
        self.pivots
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    /// Append a column in the original row orientation. Returns its index.
    pub fn add_column(&mut self, column: Vec<T>, cost: T) -> Result<usize, SimplexError> {
        if column.len() != self.rows {
            return Err(SimplexError::ColumnLength {
                expected: self.rows,
                got: column.len(),
            });
        }
        let column = column
            .into_iter()
            .zip(&self.flip)
            .map(|(a, &f)| if f { a.neg() } else { a })
            .collect();
        self.cols.push(column);
        self.costs.push(cost);
        self.basic_row.push(None);
        Ok(self.cols.len() - 1)
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.cols[j]
            .iter()
            .zip(&self.flip)
            .map(|(a, &f)| if f { a.neg() } else { a.clone() })
            .collect()
    }

    pub fn artificial_sum(&self) -> T {
        let mut s = T::zero();
        for (i, v) in self.basis.iter().enumerate() {
            if let Var::Art(_) = v {
                s = s.add(&self.xb[i]);
            }
        }
        s
    }

    fn infeasibility_tolerance(&self) -> f64 {
        let scale = self.rhs.iter().map(|b| b.abs_f64()).fold(1.0, f64::max);
        F64_TOL * scale
    }

    fn artificial_sum_is_zero(&self) -> bool {
        let s = self.artificial_sum();
        if T::EXACT {
            s.is_exact_zero()
        } else {
            s.to_f64() <= self.infeasibility_tolerance()
        }
    }

    /// Run phase one to optimality. Resumable after new columns are added.
    pub fn phase_one(&mut self) -> Result<PhaseOne, SimplexError> {
        if self.feasible {
            return Ok(PhaseOne::Feasible);
        }
        self.iterate(false)?;
        if self.artificial_sum_is_zero() {
            self.feasible = true;
            Ok(PhaseOne::Feasible)
        } else {
            Ok(PhaseOne::Infeasible)
        }
    }

    /// Run phase two to optimality or until an unbounded column appears.
    pub fn phase_two(&mut self) -> Result<PhaseTwo<T>, SimplexError> {
        if !self.feasible {
            return Err(SimplexError::NotFeasible);
        }
        match self.iterate(true)? {
            None => Ok(PhaseTwo::Optimal),
            Some((column, d)) => {
                let ray = self
                    .basis
                    .iter()
                    .zip(d)
                    .filter_map(|(v, di)| match v {
                        Var::Col(k) if !di.is_exact_zero() => Some((*k, di.neg())),
                        _ => None,
                    })
                    .collect();
                Ok(PhaseTwo::Unbounded { column, ray })
            }
        }
    }

    fn basic_cost(&self, i: usize, phase_two: bool) -> T {
        match (self.basis[i], phase_two) {
            (Var::Art(_), false) => T::one().neg(),
            (Var::Art(_), true) => T::zero(),
            (Var::Col(_), false) => T::zero(),
            (Var::Col(j), true) => self.costs[j].clone(),
        }
    }

    fn pi(&self, phase_two: bool) -> Vec<T> {
        let mut pi = vec![T::zero(); self.rows];
        for i in 0..self.rows {
            let cb = self.basic_cost(i, phase_two);
            if cb.is_exact_zero() {
                continue;
            }
            for (p, b) in pi.iter_mut().zip(&self.binv[i]) {
                if !b.is_exact_zero() {
                    p.sub_mul(&cb.neg(), b);
                }
            }
        }
        pi
    }

    /// Simplex multipliers of the current basis for the phase in progress,
    /// in the original row orientation.
    pub fn duals(&self) -> Vec<T> {
        self.pi(self.feasible)
            .into_iter()
            .zip(&self.flip)
            .map(|(p, &f)| if f { p.neg() } else { p })
            .collect()
    }

    /// Reduced cost of column `j` for the phase in progress (negative means
    /// the column would improve the objective).
    pub fn reduced_cost(&self, j: usize) -> T {
        let pi = self.pi(self.feasible);
        self.reduced_cost_with(&pi, j, self.feasible)
    }

    fn reduced_cost_with(&self, pi: &[T], j: usize, phase_two: bool) -> T {
        let mut rc = if phase_two {
            self.costs[j].neg()
        } else {
            T::zero()
        };
        for (p, a) in pi.iter().zip(&self.cols[j]) {
            if !a.is_exact_zero() && !p.is_exact_zero() {
                rc.sub_mul(&p.neg(), a);
            }
        }
        rc
    }

    pub fn objective(&self) -> T {
        let mut z = T::zero();
        for i in 0..self.rows {
            if let Var::Col(j) = self.basis[i] {
                z = z.add(&self.costs[j].mul(&self.xb[i]));
            }
        }
        z
    }

    /// Values of all structural columns.
    pub fn primal(&self) -> Vec<T> {
        let mut x = vec![T::zero(); self.cols.len()];
        for (i, v) in self.basis.iter().enumerate() {
            if let Var::Col(j) = v {
                x[*j] = self.xb[i].clone();
            }
        }
        x
    }

    pub fn basic_columns(&self) -> Vec<usize> {
        self.basis
            .iter()
            .filter_map(|v| match v {
                Var::Col(j) => Some(*j),
                Var::Art(_) => None,
            })
            .collect()
    }

    fn var_order(&self, v: Var) -> usize {
        match v {
            Var::Art(i) => i,
            Var::Col(j) => self.rows + j,
        }
    }

    fn ftran(&self, j: usize) -> Vec<T> {
        let col = &self.cols[j];
        let nz: Vec<usize> = (0..self.rows).filter(|&k| !col[k].is_exact_zero()).collect();
        self.binv
            .iter()
            .map(|row| {
                let mut s = T::zero();
                for &k in &nz {
                    if !row[k].is_exact_zero() {
                        s.sub_mul(&row[k].neg(), &col[k]);
                    }
                }
                s
            })
            .collect()
    }

    fn choose_entering(&self, pi: &[T], phase_two: bool, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for j in 0..self.cols.len() {
            if self.basic_row[j].is_some() {
                continue;
            }
            let rc = self.reduced_cost_with(pi, j, phase_two);
            if !rc.is_neg() {
                continue;
            }
            if bland {
                return Some(j);
            }
            match &best {
                Some((_, b)) if !rc.lt(b) => {}
                _ => best = Some((j, rc)),
            }
        }
        best.map(|(j, _)| j)
    }

    fn choose_leaving(&self, d: &[T], phase_two: bool, bland: bool) -> Option<usize> {
        if phase_two {
            // Artificials still basic at zero leave first, with a zero step.
            let mut pick: Option<usize> = None;
            for i in 0..self.rows {
                if matches!(self.basis[i], Var::Art(_)) && !d[i].is_zero() {
                    pick = match pick {
                        None => Some(i),
                        Some(p) if !bland && d[i].abs_f64() > d[p].abs_f64() => Some(i),
                        Some(p) => Some(p),
                    };
                }
            }
            if pick.is_some() {
                return pick;
            }
        }
        let mut best: Option<(usize, T)> = None;
        for i in 0..self.rows {
            if !d[i].is_pos() {
                continue;
            }
            let x = if self.xb[i].is_neg() || (!T::EXACT && self.xb[i].to_f64() < 0.0) {
                T::zero()
            } else {
                self.xb[i].clone()
            };
            let ratio = x.div(&d[i]);
            best = match best {
                None => Some((i, ratio)),
                Some((p, r)) => {
                    if T::EXACT {
                        if ratio.lt(&r)
                            || (ratio == r
                                && self.var_order(self.basis[i]) < self.var_order(self.basis[p]))
                        {
                            Some((i, ratio))
                        } else {
                            Some((p, r))
                        }
                    } else {
                        let (rf, nf) = (r.to_f64(), ratio.to_f64());
                        let tie = (nf - rf).abs() <= 1e-12 * (1.0 + rf.abs());
                        let better_tie = if bland {
                            self.var_order(self.basis[i]) < self.var_order(self.basis[p])
                        } else {
                            d[i].to_f64() > d[p].to_f64()
                        };
                        if (!tie && nf < rf) || (tie && better_tie) {
                            Some((i, ratio))
                        } else {
                            Some((p, r))
                        }
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, r: usize, j: usize, d: &[T]) {
        let piv = d[r].clone();
        let degenerate = self.xb[r].is_zero();
        for v in self.binv[r].iter_mut() {
            if !v.is_exact_zero() {
                *v = v.div(&piv);
            }
        }
        self.xb[r] = self.xb[r].div(&piv);
        let pivot_row = self.binv[r].clone();
        let xr = self.xb[r].clone();
        let nz: Vec<usize> = (0..self.rows)
            .filter(|&k| !pivot_row[k].is_exact_zero())
            .collect();
        for i in 0..self.rows {
            if i == r || d[i].is_exact_zero() {
                continue;
            }
            let di = &d[i];
            let row = &mut self.binv[i];
            for &k in &nz {
                row[k].sub_mul(di, &pivot_row[k]);
            }
            self.xb[i].sub_mul(di, &xr);
        }
        if let Var::Col(old) = self.basis[r] {
            self.basic_row[old] = None;
        }
        self.basis[r] = Var::Col(j);
        self.basic_row[j] = Some(r);
        self.pivots += 1;
        self.since_refactor += 1;
        if degenerate {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        if !T::EXACT && self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    /// Rebuild the basis inverse from scratch (floating point only).
    fn refactor(&mut self) {
        self.since_refactor = 0;
        let n = self.rows;
        let mut a: Vec<Vec<f64>> = vec![vec![0.0; 2 * n]; n];
        for (c, v) in self.basis.iter().enumerate() {
            match v {
                Var::Art(i) => a[*i][c] = 1.0,
                Var::Col(j) => {
                    for i in 0..n {
                        a[i][c] = self.cols[*j][i].to_f64();
                    }
                }
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[n + i] = 1.0;
        }
        for col in 0..n {
            let p = (col..n)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            if a[p][col].abs() < 1e-14 {
                return;
            }
            a.swap(p, col);
            let inv = 1.0 / a[col][col];
            for v in a[col].iter_mut() {
                *v *= inv;
            }
            let prow = a[col].clone();
            for (i, row) in a.iter_mut().enumerate() {
                if i == col || row[col] == 0.0 {
                    continue;
                }
                let f = row[col];
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
        // a now holds [I | B^-1]
        for i in 0..n {
            for k in 0..n {
                self.binv[i][k] = T::from_f64(a[i][n + k]);
            }
        }
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i][n + k] * self.rhs[k].to_f64();
            }
            if s < 0.0 && s > -F64_TOL {
                s = 0.0;
            }
            self.xb[i] = T::from_f64(s);
        }
    }

    /// Pivot until optimal. Returns the entering column and its ftran image
    /// when the objective is unbounded.
    fn iterate(&mut self, phase_two: bool) -> Result<Option<(usize, Vec<T>)>, SimplexError> {
        loop {
            if self.pivots >= self.pivot_limit {
                return Err(SimplexError::PivotLimit(self.pivot_limit));
            }
            let bland = self.rule == PivotRule::Bland || self.degenerate_run >= DEGENERATE_RUN;
            let pi = self.pi(phase_two);
            let Some(j) = self.choose_entering(&pi, phase_two, bland) else {
                return Ok(None);
            };
            let d = self.ftran(j);
            match self.choose_leaving(&d, phase_two, bland) {
                Some(r) => self.pivot(r, j, &d),
                None => {
                    if phase_two {
                        return Ok(Some((j, d)));
                    }
                    // Phase one is bounded above by zero, so this only happens
                    // through round-off; treat as converged.
                    return Ok(None);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn tiny_equality_program() {
        // max x0 + x1  s.t. x0 + 2 x1 + s = 4, 3 x0 + x1 + t = 6
        let mut s = RevisedSimplex::new(vec![r(4), r(6)], PivotRule::Bland);
        s.add_column(vec![r(1), r(3)], r(1)).unwrap();
        s.add_column(vec![r(2), r(1)], r(1)).unwrap();
        s.add_column(vec![r(1), r(0)], r(0)).unwrap();
        s.add_column(vec![r(0), r(1)], r(0)).unwrap();
        assert_eq!(s.phase_one().unwrap(), PhaseOne::Feasible);
        assert_eq!(s.phase_two().unwrap(), PhaseTwo::Optimal);
        assert_eq!(s.objective(), Rational::new(14, 5));
        let y = s.duals();
        assert_eq!(&y[0] * &r(4) + &y[1] * &r(6), Rational::new(14, 5));
    }

    #[test]
    fn infeasible_detected() {
        // x = -1 with x >= 0
        let mut s = RevisedSimplex::new(vec![r(-1)], PivotRule::Bland);
        s.add_column(vec![r(1)], r(0)).unwrap();
        assert_eq!(s.phase_one().unwrap(), PhaseOne::Infeasible);
    }

    #[test]
    fn columns_added_after_optimum_resume() {
        let mut s = RevisedSimplex::new(vec![1.0], PivotRule::Dantzig);
        s.add_column(vec![1.0], 1.0).unwrap();
        s.phase_one().unwrap();
        s.phase_two().unwrap();
        assert_eq!(s.objective(), 1.0);
        s.add_column(vec![0.5], 1.0).unwrap();
        s.phase_two().unwrap();
        assert!((s.objective() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_length_rejected() {
        let mut s: RevisedSimplex<f64> = RevisedSimplex::new(vec![1.0, 2.0], PivotRule::Bland);
        assert!(s.add_column(vec![1.0], 0.0).is_err());
    }
}
