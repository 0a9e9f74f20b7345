//! Linear programs, solver backends, and the ADP upper-bound formulations.

mod adp;
mod export;
#[cfg(feature = "highs")]
mod highs_backend;
mod simplex;

pub use adp::{
    build_adp_lp, build_adp_lp_with, build_assort_adp_lp, build_fluid_uf_lp, check_adp_feasibility,
    check_assort_adp_feasibility, extract_weights, high_variance_view, solve_adp_bound, AdpIndex, AdpLpOptions,
    AdpWeights, FeasibilityReport, HighVarianceView,
};
pub use export::write_lp_format;
#[cfg(feature = "highs")]
pub use highs_backend::HighsSolver;
pub use simplex::{DenseSimplex, SimplexOptions};

use serde::{Deserialize, Serialize};

use crate::error::{NrmError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub var_names: Vec<String>,
    /// (row, column, value); duplicates are summed.
    pub triplets: Vec<(usize, usize, f64)>,
    pub row_sense: Vec<RowSense>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            var_names: Vec::new(),
            triplets: Vec::new(),
            row_sense: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_names.push(name.into());
        self.objective.len() - 1
    }

    /// Nonnegative variable with no upper bound.
    pub fn add_nonneg(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.add_var(name, cost, 0.0, f64::INFINITY)
    }

    pub fn add_row(&mut self, terms: &[(usize, f64)], sense: RowSense, rhs: f64) -> usize {
        let r = self.rhs.len();
        for &(j, a) in terms {
            if a != 0.0 {
                self.triplets.push((r, j, a));
            }
        }
        self.row_sense.push(sense);
        self.rhs.push(rhs);
        r
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Row activities A x.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.num_rows()];
        for &(r, j, a) in &self.triplets {
            act[r] += a * x[j];
        }
        act
    }

    /// Largest violation of any row or bound at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, act) in self.activities(x).into_iter().enumerate() {
            let b = self.rhs[r];
            let v = match self.row_sense[r] {
                RowSense::Le => act - b,
                RowSense::Ge => b - act,
                RowSense::Eq => (act - b).abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn require_optimal(self) -> Result<LpSolution> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            other => Err(NrmError::NotOptimal(other)),
        }
    }
}

pub trait LpSolver {
    fn name(&self) -> &'static str;
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Dense tableau while it fits comfortably in memory, HiGHS beyond.
    #[default]
    Auto,
    Dense,
    Highs,
}

/// Tableau cells above which `Backend::Auto` leaves the dense simplex.
pub const DENSE_CELL_LIMIT: usize = 4_000_000;

fn dense_cells(lp: &LinearProgram) -> usize {
    let rows = lp.num_rows() + lp.upper.iter().filter(|u| u.is_finite()).count();
    (rows + 1) * (lp.num_vars() + 2 * rows + 1)
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with(lp, Backend::Auto)
}

pub fn solve_with(lp: &LinearProgram, backend: Backend) -> Result<LpSolution> {
    let backend = match backend {
        Backend::Auto if dense_cells(lp) > DENSE_CELL_LIMIT && cfg!(feature = "highs") => Backend::Highs,
        Backend::Auto => Backend::Dense,
        b => b,
    };
    match backend {
        Backend::Highs => {
            #[cfg(feature = "highs")]
            {
                HighsSolver::default().solve(lp)
            }
            #[cfg(not(feature = "highs"))]
            {
                Err(NrmError::Solver("built without the `highs` feature".into()))
            }
        }
        _ => DenseSimplex::default().solve(lp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violation_measures_rows_and_bounds() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var("x", 1.0, 0.0, 2.0);
        lp.add_row(&[(x, 1.0)], RowSense::Ge, 1.0);
        assert_eq!(lp.max_violation(&[1.5]), 0.0);
        assert_eq!(lp.max_violation(&[0.5]), 0.5);
        assert_eq!(lp.max_violation(&[3.0]), 1.0);
    }
}
