//! Plain-text dump of a [`ConicProgram`].
//!
//! Format, version 1 (one item per line):
//!
//! ```text
//! conic-program v1
//! sense <minimize|maximize>
//! scalar s<i> <name> [<lower>, <upper>]        # "-inf"/"inf" when unbounded
//! hermitian m<k> <name> dim <n> psd
//! objective <expr>
//! linear <name>: <expr> <op> 0                # op is one of <=, ==, >=
//! plog <name>: s<t> <= s<tau> * log2(1 + (<expr>) / s<tau>)
//! end
//! ```
//!
//! `<expr>` is a sum of terms: a constant, `<coef>*s<i>`, or
//! `tr(m<k>, [[a+bi, ...], ...])` for the Hermitian coefficient matrix.
//! Numbers use the shortest representation that round-trips.

use std::fmt::Write;

use super::{Constraint, ConicProgram, LinExpr, Relation, Sense};

pub const DUMP_VERSION: u32 = 1;

fn bound(v: Option<f64>, neg: bool) -> String {
    match v {
        Some(x) => format!("{x}"),
        None if neg => "-inf".into(),
        None => "inf".into(),
    }
}

fn expr(e: &LinExpr) -> String {
    let mut parts = Vec::new();
    for &(v, c) in &e.scalars {
        parts.push(format!("{c}*s{}", v.0));
    }
    for (x, a) in &e.traces {
        let rows: Vec<String> = (0..a.nrows())
            .map(|i| {
                let row: Vec<String> =
                    (0..a.ncols()).map(|j| format!("{}{:+}i", a[(i, j)].re, a[(i, j)].im)).collect();
                format!("[{}]", row.join(", "))
            })
            .collect();
        parts.push(format!("tr(m{}, [{}])", x.0, rows.join(", ")));
    }
    if e.constant != 0.0 || parts.is_empty() {
        parts.push(format!("{}", e.constant));
    }
    parts.join(" + ")
}

pub fn dump(prog: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "conic-program v{DUMP_VERSION}");
    let sense = match prog.sense {
        Sense::Minimize => "minimize",
        Sense::Maximize => "maximize",
    };
    let _ = writeln!(out, "sense {sense}");
    for (i, s) in prog.scalars.iter().enumerate() {
        let _ = writeln!(out, "scalar s{i} {} [{}, {}]", s.name, bound(s.lower, true), bound(s.upper, false));
    }
    for (k, h) in prog.herms.iter().enumerate() {
        let _ = writeln!(out, "hermitian m{k} {} dim {} psd", h.name, h.dim);
    }
    let _ = writeln!(out, "objective {}", expr(&prog.objective));
    for c in &prog.constraints {
        match c {
            Constraint::Linear(l) => {
                let op = match l.relation {
                    Relation::LessEq => "<=",
                    Relation::Equal => "==",
                    Relation::GreaterEq => ">=",
                };
                let _ = writeln!(out, "linear {}: {} {op} 0", l.name, expr(&l.expr));
            }
            Constraint::PerspectiveLog(p) => {
                let _ = writeln!(
                    out,
                    "plog {}: s{} <= s{} * log2(1 + ({}) / s{})",
                    p.name,
                    p.t.0,
                    p.tau.0,
                    expr(&p.x),
                    p.tau.0
                );
            }
        }
    }
    out.push_str("end\n");
    out
}
