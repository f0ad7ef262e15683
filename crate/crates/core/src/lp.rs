//! Thin wrapper over the `microlp` simplex solver.
//!
//! Terms sharing a variable inside one row are merged before they reach the
//! solver, and tiny negative primal values are clamped to zero on readout.

use crate::error::{Error, Result};
use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

pub struct LinearProgram {
    problem: Problem,
    vars: Vec<Variable>,
    rows: usize,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub objective: f64,
    pub values: Vec<f64>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        let dir = match sense {
            Sense::Minimize => OptimizationDirection::Minimize,
            Sense::Maximize => OptimizationDirection::Maximize,
        };
        Self { problem: Problem::new(dir), vars: Vec::new(), rows: 0 }
    }

    /// Adds a variable with objective coefficient `cost` and bounds `[lo, hi]`
    /// (use `f64::INFINITY` for no upper bound). Returns its index.
    pub fn add_var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.vars.push(self.problem.add_var(cost, (lo, hi)));
        self.vars.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn add_row(&mut self, terms: &[(usize, f64)], cmp: Cmp, rhs: f64) {
        let mut sorted: Vec<(usize, f64)> = terms.iter().copied().filter(|t| t.1 != 0.0).collect();
        sorted.sort_by_key(|t| t.0);
        let mut expr = LinearExpr::empty();
        let mut i = 0;
        while i < sorted.len() {
            let (v, mut c) = sorted[i];
            i += 1;
            while i < sorted.len() && sorted[i].0 == v {
                c += sorted[i].1;
                i += 1;
            }
            if c != 0.0 {
                expr.add(self.vars[v], c);
            }
        }
        let op = match cmp {
            Cmp::Eq => ComparisonOp::Eq,
            Cmp::Le => ComparisonOp::Le,
            Cmp::Ge => ComparisonOp::Ge,
        };
        self.problem.add_constraint(expr, op, rhs);
        self.rows += 1;
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let outcome = self.problem.solve().map_err(|e| match e {
            microlp::Error::Infeasible => Error::Infeasible("no point satisfies the constraints".into()),
            other => Error::Lp(other.to_string()),
        })?;
        let sol = outcome.into_solution().map_err(|_| Error::Lp("solve interrupted before a solution was found".into()))?;
        let values = self
            .vars
            .iter()
            .map(|&v| {
                let x = sol.var_value(v);
                if x < 0.0 && x > -crate::tol::LP {
                    0.0
                } else {
                    x
                }
            })
            .collect();
        Ok(LpSolution { objective: sol.objective(), values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_min() {
        // min x + 2y s.t. x + y >= 1, x <= 0.25
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(1.0, 0.0, 0.25);
        let y = lp.add_var(2.0, 0.0, f64::INFINITY);
        lp.add_row(&[(x, 1.0), (y, 0.5), (y, 0.5)], Cmp::Ge, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 1.75).abs() < 1e-12);
        assert!((s.values[y] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn infeasible_is_reported() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(&[(x, 1.0)], Cmp::Ge, 2.0);
        assert!(matches!(lp.solve(), Err(Error::Infeasible(_))));
    }
}
