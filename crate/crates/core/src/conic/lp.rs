//! CPLEX LP writer. Each cone `||v|| <= s` becomes auxiliary variables
//! `c<n>_0 = s` and `c<n>_i = v_i`, plus the quadratic row
//! `c<n>_1^2 + ... - c<n>_0^2 <= 0` with `c<n>_0 >= 0`, the form LP readers
//! recognise as a second-order cone. Brackets are not legal in LP names, so
//! `y[0,1]` is written as `y(0,1)`.

use std::fmt::Write as _;

use super::{AffineExpr, ConicProgram, Sense, VarKind};

fn lp_name(s: &str) -> String {
    s.replace('[', "(").replace(']', ")")
}

fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn write_expr(out: &mut String, p: &ConicProgram, e: &AffineExpr, aux: &[(String, f64)]) {
    let mut first = true;
    let mut term = |out: &mut String, coef: f64, name: &str| {
        let sign = if coef < 0.0 {
            "-"
        } else if first {
            ""
        } else {
            "+"
        };
        write!(out, " {sign} {} {name}", fmt_num(coef.abs())).unwrap();
        first = false;
    };
    for &(v, c) in &e.terms {
        term(out, c, &lp_name(&p.variables[v].name));
    }
    for (name, c) in aux {
        term(out, *c, name);
    }
    if first {
        out.push_str(" 0 ");
        out.push_str(&lp_name(&p.variables[0].name));
    }
}

/// Renders the program. LP rows carry the constant on the right-hand side.
pub fn write_string(p: &ConicProgram) -> String {
    let mut out = String::new();
    writeln!(out, "\\ dronefleet {} program, budget {}", p.meta.model, p.meta.budget).unwrap();
    writeln!(out, "\\ instance {}", p.meta.instance_hash).unwrap();
    out.push_str("Minimize\n obj:");
    write_expr(&mut out, p, &p.objective, &[]);
    if p.objective.constant != 0.0 {
        write!(out, " + {} constant_one", fmt_num(p.objective.constant)).unwrap();
    }
    out.push_str("\nSubject To\n");
    for c in &p.linear {
        write!(out, " {}:", lp_name(&c.name)).unwrap();
        write_expr(&mut out, p, &c.expr, &[]);
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        writeln!(out, " {op} {}", fmt_num(c.rhs - c.expr.constant)).unwrap();
    }
    let mut aux_bounds = Vec::new();
    for (n, c) in p.soc.iter().enumerate() {
        let entries: Vec<&AffineExpr> = std::iter::once(&c.scalar).chain(&c.vector).collect();
        for (i, e) in entries.iter().enumerate() {
            let aux = format!("c{n}_{i}");
            write!(out, " {}_d{i}:", lp_name(&c.name)).unwrap();
            write_expr(&mut out, p, e, &[(aux.clone(), -1.0)]);
            writeln!(out, " = {}", fmt_num(-e.constant)).unwrap();
            aux_bounds.push((aux, i == 0));
        }
        write!(out, " {}: [", lp_name(&c.name)).unwrap();
        for i in 1..entries.len() {
            write!(out, " {}c{n}_{i} ^2", if i == 1 { "" } else { "+ " }).unwrap();
        }
        writeln!(out, " - c{n}_0 ^2 ] <= 0").unwrap();
    }
    if p.objective.constant != 0.0 {
        out.push_str(" fix_constant_one: constant_one = 1\n");
    }

    out.push_str("Bounds\n");
    for v in &p.variables {
        let name = lp_name(&v.name);
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => writeln!(out, " {} <= {name} <= {}", fmt_num(v.lower), fmt_num(v.upper)).unwrap(),
            (true, false) => writeln!(out, " {name} >= {}", fmt_num(v.lower)).unwrap(),
            (false, true) => writeln!(out, " -inf <= {name} <= {}", fmt_num(v.upper)).unwrap(),
            (false, false) => writeln!(out, " {name} free").unwrap(),
        }
    }
    for (aux, nonneg) in aux_bounds {
        if nonneg {
            writeln!(out, " {aux} >= 0").unwrap();
        } else {
            writeln!(out, " {aux} free").unwrap();
        }
    }
    let section = |out: &mut String, title: &str, kind: VarKind| {
        let names: Vec<String> = p
            .variables
            .iter()
            .filter(|v| v.kind == kind)
            .map(|v| lp_name(&v.name))
            .collect();
        if !names.is_empty() {
            writeln!(out, "{title}").unwrap();
            for chunk in names.chunks(8) {
                writeln!(out, " {}", chunk.join(" ")).unwrap();
            }
        }
    };
    section(&mut out, "Binaries", VarKind::Binary);
    section(&mut out, "Generals", VarKind::Integer);
    out.push_str("End\n");
    out
}
