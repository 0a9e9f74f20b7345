//! Two-phase primal simplex on a dense tableau.
//!
//! Every variable is shifted/split into nonnegative standard-form columns,
//! finite upper bounds become rows, and each row gets a slack, surplus, or
//! artificial. Phase I minimises the artificial sum, phase II the real
//! objective. Pricing is Dantzig's rule until a run of degenerate pivots
//! suggests cycling, after which Bland's rule takes over for the phase.

use super::{LinearProgram, LpSolution, LpSolver, LpStatus, RowSense, Sense};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Defaults to 50 * (rows + columns) of the tableau.
    pub iteration_limit: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { pivot_tol: 1e-9, feasibility_tol: 1e-7, optimality_tol: 1e-9, iteration_limit: None }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DenseSimplex {
    pub options: SimplexOptions,
}

/// How an original variable is rebuilt from standard-form columns.
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct Tableau {
    m: usize,
    width: usize,
    a: Vec<f64>,
    /// Reduced costs; the last entry holds minus the objective value.
    d: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.a[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let inv = 1.0 / self.a[r * w + c];
        for v in &mut self.a[r * w..(r + 1) * w] {
            *v *= inv;
        }
        self.a[r * w + c] = 1.0;
        let (before, rest) = self.a.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = self.d[c];
        if f != 0.0 {
            for (x, p) in self.d.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            self.d[c] = 0.0;
        }
        self.basis[r] = c;
    }
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl DenseSimplex {
    pub fn new(options: SimplexOptions) -> Self {
        DenseSimplex { options }
    }

    fn run(&self, tab: &mut Tableau, allowed: &[bool], iters: &mut usize, limit: usize) -> Outcome {
        let opt = &self.options;
        let ncols = tab.width - 1;
        let degenerate_cap = 2 * (tab.m + ncols);
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut is_basic = vec![false; ncols];
        for &b in &tab.basis {
            is_basic[b] = true;
        }
        loop {
            if *iters >= limit {
                return Outcome::IterationLimit;
            }
            let mut enter = None;
            let mut best = -opt.optimality_tol;
            for j in 0..ncols {
                if !allowed[j] || is_basic[j] {
                    continue;
                }
                let dj = tab.d[j];
                if dj < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = dj;
                }
            }
            let Some(c) = enter else { return Outcome::Optimal };

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..tab.m {
                let aic = tab.at(i, c);
                if aic <= opt.pivot_tol {
                    continue;
                }
                let ratio = tab.rhs(i).max(0.0) / aic;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        if ratio < best_ratio - 1e-12 {
                            true
                        } else if ratio <= best_ratio + 1e-12 {
                            if bland {
                                tab.basis[i] < tab.basis[l]
                            } else {
                                aic > tab.at(l, c)
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some(i);
                    best_ratio = best_ratio.min(ratio);
                }
            }
            let Some(r) = leave else { return Outcome::Unbounded };

            if best_ratio <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > degenerate_cap {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            is_basic[tab.basis[r]] = false;
            is_basic[c] = true;
            tab.pivot(r, c);
            *iters += 1;
        }
    }
}

impl LpSolver for DenseSimplex {
    fn name(&self) -> &'static str {
        "dense-simplex"
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution> {
        let opt = &self.options;
        let n = lp.num_vars();

        // Standard-form columns.
        let mut maps = Vec::with_capacity(n);
        let mut cost = Vec::new();
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
        for j in 0..n {
            let (lo, hi, c) = (lp.lower[j], lp.upper[j], sign * lp.objective[j]);
            let map = if lo.is_finite() {
                let k = cost.len();
                cost.push(c);
                if hi.is_finite() {
                    bound_rows.push((k, hi - lo));
                }
                VarMap { offset: lo, cols: vec![(k, 1.0)] }
            } else if hi.is_finite() {
                let k = cost.len();
                cost.push(-c);
                VarMap { offset: hi, cols: vec![(k, -1.0)] }
            } else {
                let k = cost.len();
                cost.push(c);
                cost.push(-c);
                VarMap { offset: 0.0, cols: vec![(k, 1.0), (k + 1, -1.0)] }
            };
            maps.push(map);
        }
        let nstruct = cost.len();

        // Rows over standard columns.
        let mut rows: Vec<(Vec<(usize, f64)>, RowSense, f64)> =
            lp.row_sense.iter().zip(&lp.rhs).map(|(&s, &b)| (Vec::new(), s, b)).collect();
        for &(r, j, a) in &lp.triplets {
            let map = &maps[j];
            rows[r].2 -= a * map.offset;
            for &(k, f) in &map.cols {
                rows[r].0.push((k, a * f));
            }
        }
        for &(k, ub) in &bound_rows {
            rows.push((vec![(k, 1.0)], RowSense::Le, ub));
        }

        let m = rows.len();
        let nslack = rows.iter().filter(|r| r.1 != RowSense::Eq).count();
        // Decide the starting basis before sizing the tableau.
        let mut needs_art = Vec::with_capacity(m);
        for (_, s, b) in &rows {
            let slack_pos = match s {
                RowSense::Le => *b >= 0.0,
                RowSense::Ge => *b < 0.0,
                RowSense::Eq => false,
            };
            needs_art.push(!slack_pos);
        }
        let nart = needs_art.iter().filter(|&&x| x).count();
        let ncols = nstruct + nslack + nart;
        let width = ncols + 1;
        let mut tab = Tableau { m, width, a: vec![0.0; m * width], d: vec![0.0; width], basis: vec![0; m] };

        let mut next_slack = nstruct;
        let mut next_art = nstruct + nslack;
        for (i, (terms, s, b)) in rows.iter().enumerate() {
            let flip = if *b < 0.0 { -1.0 } else { 1.0 };
            let row = &mut tab.a[i * width..(i + 1) * width];
            for &(k, a) in terms {
                row[k] += flip * a;
            }
            row[width - 1] = flip * b;
            if *s != RowSense::Eq {
                let coef = if *s == RowSense::Le { 1.0 } else { -1.0 };
                row[next_slack] = flip * coef;
                if !needs_art[i] {
                    tab.basis[i] = next_slack;
                }
                next_slack += 1;
            }
            if needs_art[i] {
                row[next_art] = 1.0;
                tab.basis[i] = next_art;
                next_art += 1;
            }
        }

        let limit = opt.iteration_limit.unwrap_or(50 * (m + ncols).max(1));
        let mut iters = 0usize;
        let is_art = |j: usize| j >= nstruct + nslack;

        // Phase I.
        if nart > 0 {
            for i in 0..m {
                if is_art(tab.basis[i]) {
                    for j in 0..width {
                        tab.d[j] -= tab.a[i * width + j];
                    }
                }
            }
            for j in nstruct + nslack..ncols {
                tab.d[j] += 1.0;
            }
            let allowed = vec![true; ncols];
            match self.run(&mut tab, &allowed, &mut iters, limit) {
                Outcome::IterationLimit => return Ok(unsolved(LpStatus::IterationLimit, n, iters)),
                Outcome::Unbounded => unreachable!("phase I objective is bounded below by zero"),
                Outcome::Optimal => {}
            }
            let infeas = -tab.d[width - 1];
            let scale = rows.iter().map(|r| r.2.abs()).fold(1.0, f64::max);
            if infeas > opt.feasibility_tol * scale {
                return Ok(unsolved(LpStatus::Infeasible, n, iters));
            }
            // Pivot zero-level artificials out where the row allows it.
            for i in 0..m {
                if !is_art(tab.basis[i]) {
                    continue;
                }
                let mut best: Option<(usize, f64)> = None;
                for j in 0..nstruct + nslack {
                    let v = tab.at(i, j).abs();
                    if v > opt.pivot_tol && best.map_or(true, |(_, bv)| v > bv) {
                        best = Some((j, v));
                    }
                }
                if let Some((j, _)) = best {
                    tab.pivot(i, j);
                }
            }
        }

        // Phase II.
        tab.d.iter_mut().for_each(|v| *v = 0.0);
        tab.d[..nstruct].copy_from_slice(&cost);
        for i in 0..m {
            let b = tab.basis[i];
            let cb = if b < nstruct { cost[b] } else { 0.0 };
            if cb != 0.0 {
                for j in 0..width {
                    tab.d[j] -= cb * tab.a[i * width + j];
                }
            }
        }
        let allowed: Vec<bool> = (0..ncols).map(|j| !is_art(j)).collect();
        let status = match self.run(&mut tab, &allowed, &mut iters, limit) {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Unbounded => return Ok(unsolved(LpStatus::Unbounded, n, iters)),
            Outcome::IterationLimit => return Ok(unsolved(LpStatus::IterationLimit, n, iters)),
        };

        let mut xs = vec![0.0; ncols];
        for i in 0..m {
            xs[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
        let x: Vec<f64> = maps
            .iter()
            .map(|map| map.offset + map.cols.iter().map(|&(k, f)| f * xs[k]).sum::<f64>())
            .collect();
        Ok(LpSolution { status, objective: lp.objective_at(&x), x, iterations: iters })
    }
}

fn unsolved(status: LpStatus, n: usize, iterations: usize) -> LpSolution {
    LpSolution { status, objective: f64::NAN, x: vec![0.0; n], iterations }
}
