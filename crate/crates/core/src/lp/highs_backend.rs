use std::num::NonZeroU32;

use highs::{HighsModelStatus, RowProblem};

use super::{LinearProgram, LpSolution, LpSolver, LpStatus, RowSense, Sense};
use crate::error::{NrmError, Result};

const ATTEMPTS: [(&str, i32); 3] = [("simplex", 4), ("simplex", 1), ("ipm", 1)];

/// HiGHS, single-threaded so repeated solves return the same vertex.
#[derive(Clone, Copy, Debug, Default)]
pub struct HighsSolver;

impl LpSolver for HighsSolver {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution> {
        let n = lp.num_vars();
        if n == 0 {
            return super::DenseSimplex::default().solve(lp);
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = (0..n).map(|j| pb.add_column(lp.objective[j], lp.lower[j]..=lp.upper[j])).collect();
        let mut rows: Vec<Vec<(highs::Col, f64)>> = vec![Vec::new(); lp.num_rows()];
        for &(r, j, a) in &lp.triplets {
            rows[r].push((cols[j], a));
        }
        for (r, terms) in rows.iter().enumerate() {
            let b = lp.rhs[r];
            match lp.row_sense[r] {
                RowSense::Le => pb.add_row(..=b, terms),
                RowSense::Ge => pb.add_row(b.., terms),
                RowSense::Eq => pb.add_row(b..=b, terms),
            }
        }
        let sense = match lp.sense {
            Sense::Minimize => highs::Sense::Minimise,
            Sense::Maximize => highs::Sense::Maximise,
        };
        // Primal simplex copes best with the staircase ADP programs; the
        // others are fallbacks for when it stops with a solve error.
        let mut last_err = None;
        let mut solved = None;
        for (solver, strategy) in ATTEMPTS {
            let mut model = pb.clone().try_optimise(sense).map_err(|e| NrmError::Solver(format!("{e:?}")))?;
            model.make_quiet();
            model.set_threads(NonZeroU32::new(1).expect("nonzero"));
            model.set_option("random_seed", 0);
            model.set_option("solver", solver);
            model.set_option("simplex_strategy", strategy);
            match model.try_solve() {
                Ok(s) if s.status() != HighsModelStatus::SolveError => {
                    solved = Some(s);
                    break;
                }
                Ok(s) => last_err = Some(format!("{solver}: {:?}", s.status())),
                Err(e) => last_err = Some(format!("{solver}: {e:?}")),
            }
            log::debug!("HiGHS {solver} (strategy {strategy}) failed; trying the next method");
        }
        let solved = solved.ok_or_else(|| NrmError::Solver(last_err.unwrap_or_default()))?;
        let iterations = solved.simplex_iteration_count().max(0) as usize;
        let status = match solved.status() {
            HighsModelStatus::Optimal => LpStatus::Optimal,
            HighsModelStatus::Infeasible => LpStatus::Infeasible,
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => LpStatus::Unbounded,
            HighsModelStatus::ReachedIterationLimit => LpStatus::IterationLimit,
            other => return Err(NrmError::Solver(format!("HiGHS finished with status {other:?}"))),
        };
        if status != LpStatus::Optimal {
            return Ok(LpSolution { status, objective: f64::NAN, x: vec![0.0; n], iterations });
        }
        let x = solved.get_solution().columns().to_vec();
        Ok(LpSolution { status, objective: lp.objective_at(&x), x, iterations })
    }
}
