//! CPLEX-style `.lp` text export for cross-checking with external solvers.

use std::collections::HashSet;
use std::fmt::Write;

use super::{LinearProgram, RowSense, Sense};

fn sanitize(names: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut s: String = name
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
                .collect();
            if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') || s.eq_ignore_ascii_case("e") {
                s.insert_str(0, "x_");
            }
            if !seen.insert(s.clone()) {
                s = format!("{s}__{j}");
                seen.insert(s.clone());
            }
            s
        })
        .collect()
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names[0]);
        return;
    }
    for (k, &(j, a)) in terms.iter().enumerate() {
        if k > 0 && k % 6 == 0 {
            out.push_str("\n   ");
        }
        if a < 0.0 {
            let _ = write!(out, " - {} {}", -a, names[j]);
        } else {
            let _ = write!(out, " + {} {}", a, names[j]);
        }
    }
}

fn number(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn write_lp_format(lp: &LinearProgram) -> String {
    let names = sanitize(&lp.var_names);
    let mut out = String::new();
    out.push_str(match lp.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    let obj: Vec<(usize, f64)> = lp.objective.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(j, &c)| (j, c)).collect();
    out.push_str(" obj:");
    if lp.num_vars() > 0 {
        write_terms(&mut out, &obj, &names);
    }
    out.push_str("\nSubject To\n");

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_rows()];
    for &(r, j, a) in &lp.triplets {
        rows[r].push((j, a));
    }
    for (r, terms) in rows.iter().enumerate() {
        let _ = write!(out, " c{r}:");
        write_terms(&mut out, terms, &names);
        let op = match lp.row_sense[r] {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", lp.rhs[r]);
    }

    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo == 0.0 && hi == f64::INFINITY {
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " {} free", names[j]);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", number(lo), names[j], number(hi));
        }
    }
    out.push_str("End\n");
    out
}
