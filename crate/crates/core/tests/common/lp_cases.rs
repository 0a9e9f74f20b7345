//! Hand-solved LPs shared by the core tests and the acceptance run.

use nrm_core::lp::{LinearProgram, LpStatus, RowSense, Sense};

pub const REL_TOL: f64 = 1e-8;
const INF: f64 = f64::INFINITY;

pub enum Expect {
    Optimum(f64),
    Status(LpStatus),
}

pub struct Case {
    pub name: &'static str,
    pub lp: LinearProgram,
    pub expect: Expect,
}

fn lp(sense: Sense, costs: &[f64]) -> LinearProgram {
    let mut lp = LinearProgram::new(sense);
    for (j, &c) in costs.iter().enumerate() {
        lp.add_nonneg(format!("x{j}"), c);
    }
    lp
}

fn row(lp: &mut LinearProgram, coefs: &[f64], sense: RowSense, rhs: f64) {
    let terms: Vec<(usize, f64)> = coefs.iter().copied().enumerate().collect();
    lp.add_row(&terms, sense, rhs);
}

pub fn library() -> Vec<Case> {
    use RowSense::*;
    let mut cases = Vec::new();

    // max 3x + 5y; x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
    let mut p = lp(Sense::Maximize, &[3.0, 5.0]);
    row(&mut p, &[1.0, 0.0], Le, 4.0);
    row(&mut p, &[0.0, 2.0], Le, 12.0);
    row(&mut p, &[3.0, 2.0], Le, 18.0);
    cases.push(Case { name: "textbook maximisation", lp: p, expect: Expect::Optimum(36.0) });

    // min 2x + 3y; x + y ≥ 4, x + 3y ≥ 6 → (3, 1), 9
    let mut p = lp(Sense::Minimize, &[2.0, 3.0]);
    row(&mut p, &[1.0, 1.0], Ge, 4.0);
    row(&mut p, &[1.0, 3.0], Ge, 6.0);
    cases.push(Case { name: "covering minimisation", lp: p, expect: Expect::Optimum(9.0) });

    // min x + 2y + 3z; x + y + z = 6, y + z ≥ 2 → (4, 2, 0), 8
    let mut p = lp(Sense::Minimize, &[1.0, 2.0, 3.0]);
    row(&mut p, &[1.0, 1.0, 1.0], Eq, 6.0);
    row(&mut p, &[0.0, 1.0, 1.0], Ge, 2.0);
    cases.push(Case { name: "equality row", lp: p, expect: Expect::Optimum(8.0) });

    let mut p = lp(Sense::Minimize, &[1.0, 1.0]);
    row(&mut p, &[1.0, 1.0], Le, 1.0);
    row(&mut p, &[1.0, 1.0], Ge, 3.0);
    cases.push(Case { name: "infeasible", lp: p, expect: Expect::Status(LpStatus::Infeasible) });

    let mut p = lp(Sense::Maximize, &[1.0, 1.0]);
    row(&mut p, &[1.0, -1.0], Le, 1.0);
    cases.push(Case { name: "unbounded", lp: p, expect: Expect::Status(LpStatus::Unbounded) });

    // Beale's example, which cycles under textbook Dantzig pricing: -1/20
    let mut p = lp(Sense::Minimize, &[-0.75, 150.0, -0.02, 6.0]);
    row(&mut p, &[0.25, -60.0, -0.04, 9.0], Le, 0.0);
    row(&mut p, &[0.5, -90.0, -0.02, 3.0], Le, 0.0);
    row(&mut p, &[0.0, 0.0, 1.0, 0.0], Le, 1.0);
    cases.push(Case { name: "Beale cycling", lp: p, expect: Expect::Optimum(-0.05) });

    // Klee–Minty cube, n = 3: 100^(n-1)
    let mut p = lp(Sense::Maximize, &[100.0, 10.0, 1.0]);
    row(&mut p, &[1.0, 0.0, 0.0], Le, 1.0);
    row(&mut p, &[20.0, 1.0, 0.0], Le, 100.0);
    row(&mut p, &[200.0, 20.0, 1.0], Le, 10_000.0);
    cases.push(Case { name: "Klee-Minty", lp: p, expect: Expect::Optimum(10_000.0) });

    // Free variables: min x + y; x + y ≥ -5, x - y = 1 → (-2, -3), -5
    let mut p = LinearProgram::new(Sense::Minimize);
    let x = p.add_var("x", 1.0, -INF, INF);
    let y = p.add_var("y", 1.0, -INF, INF);
    p.add_row(&[(x, 1.0), (y, 1.0)], Ge, -5.0);
    p.add_row(&[(x, 1.0), (y, -1.0)], Eq, 1.0);
    cases.push(Case { name: "free variables", lp: p, expect: Expect::Optimum(-5.0) });

    // Boxed variables: max x + 2y; 0 ≤ x ≤ 3, 1 ≤ y ≤ 2, x + y ≤ 4 → (2, 2), 6
    let mut p = LinearProgram::new(Sense::Maximize);
    let x = p.add_var("x", 1.0, 0.0, 3.0);
    let y = p.add_var("y", 2.0, 1.0, 2.0);
    p.add_row(&[(x, 1.0), (y, 1.0)], Le, 4.0);
    cases.push(Case { name: "bounded variables", lp: p, expect: Expect::Optimum(6.0) });

    // Balanced transportation (one redundant equality): supplies 3, 4;
    // demands 5, 2; costs [[1, 3], [2, 1]] → 9
    let mut p = lp(Sense::Minimize, &[1.0, 3.0, 2.0, 1.0]);
    row(&mut p, &[1.0, 1.0, 0.0, 0.0], Eq, 3.0);
    row(&mut p, &[0.0, 0.0, 1.0, 1.0], Eq, 4.0);
    row(&mut p, &[1.0, 0.0, 1.0, 0.0], Eq, 5.0);
    row(&mut p, &[0.0, 1.0, 0.0, 1.0], Eq, 2.0);
    cases.push(Case { name: "degenerate transportation", lp: p, expect: Expect::Optimum(9.0) });

    cases
}
