//! Conic Benchmark Format (CBF, version 3) writer and reader.
//!
//! The data sections are plain CBF, so the files load in any CBF-aware
//! solver. Names, variable kinds and the role of each row live in `#`
//! comment lines that CBF readers ignore; [`parse`] needs them to rebuild
//! the program. Layout of the metadata:
//!
//! ```text
//! # dronefleet-conic 1
//! # model np
//! # instance <sha256>
//! # budget <K>
//! # var <name> <C|B|I> <lower> <upper>     one per variable, in order
//! # row linear <name> <rhs>                one per linear row
//! # row upper <var-name>                   x - ub in L-
//! # row lower <var-name>                   x - lb in L+
//! # row cone <name> <dim>                  a Q block of dim rows
//! ```
//!
//! Variables with lower bound 0 get domain `L+`, those with lower bound
//! `-inf` domain `F`; any other finite bound becomes a row. A cone
//! `||v|| <= s` is the `Q` block `(s, v)`. Floats are written with Rust's
//! shortest round-trip formatting, so `parse(write(p)) == p`.

use std::fmt::Write as _;
use std::path::Path;

use super::{AffineExpr, ConicProgram, LinearConstraint, ProgramMeta, Sense, SocConstraint, VarKind, Variable};
use crate::error::{Error, Result};
use crate::instance::Mode;

const MAGIC: &str = "dronefleet-conic 1";

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Domain {
    Free,
    NonNeg,
    NonPos,
    Zero,
    Soc,
}

impl Domain {
    fn token(self) -> &'static str {
        match self {
            Domain::Free => "F",
            Domain::NonNeg => "L+",
            Domain::NonPos => "L-",
            Domain::Zero => "L=",
            Domain::Soc => "Q",
        }
    }

    fn parse(s: &str) -> Option<Domain> {
        Some(match s {
            "F" => Domain::Free,
            "L+" => Domain::NonNeg,
            "L-" => Domain::NonPos,
            "L=" => Domain::Zero,
            "Q" => Domain::Soc,
            _ => return None,
        })
    }
}

fn kind_token(k: VarKind) -> &'static str {
    match k {
        VarKind::Continuous => "C",
        VarKind::Binary => "B",
        VarKind::Integer => "I",
    }
}

/// Run-length encoded domain list: consecutive equal domains share a block,
/// except cones, which always form their own block.
fn push_run(runs: &mut Vec<(Domain, usize)>, d: Domain, len: usize) {
    match runs.last_mut() {
        Some((last, n)) if *last == d && d != Domain::Soc => *n += len,
        _ => runs.push((d, len)),
    }
}

pub fn write_string(p: &ConicProgram) -> String {
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "# {MAGIC}").unwrap();
    writeln!(w, "# model {}", p.meta.model).unwrap();
    writeln!(w, "# instance {}", p.meta.instance_hash).unwrap();
    writeln!(w, "# budget {}", p.meta.budget).unwrap();
    for v in &p.variables {
        assert!(
            !v.name.contains(char::is_whitespace),
            "variable names must not contain spaces"
        );
        writeln!(w, "# var {} {} {:?} {:?}", v.name, kind_token(v.kind), v.lower, v.upper).unwrap();
    }

    // Rows: (domain, expression rows as (terms, b)).
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut runs: Vec<(Domain, usize)> = Vec::new();
    let mut meta_rows = String::new();
    for c in &p.linear {
        writeln!(meta_rows, "# row linear {} {:?}", c.name, c.rhs).unwrap();
        let d = match c.sense {
            Sense::Le => Domain::NonPos,
            Sense::Ge => Domain::NonNeg,
            Sense::Eq => Domain::Zero,
        };
        push_run(&mut runs, d, 1);
        rows.push((c.expr.terms.clone(), c.expr.constant - c.rhs));
    }
    for (i, v) in p.variables.iter().enumerate() {
        if v.upper.is_finite() {
            writeln!(meta_rows, "# row upper {}", v.name).unwrap();
            push_run(&mut runs, Domain::NonPos, 1);
            rows.push((vec![(i, 1.0)], -v.upper));
        }
        if v.lower.is_finite() && v.lower != 0.0 {
            writeln!(meta_rows, "# row lower {}", v.name).unwrap();
            push_run(&mut runs, Domain::NonNeg, 1);
            rows.push((vec![(i, 1.0)], -v.lower));
        }
    }
    for c in &p.soc {
        writeln!(meta_rows, "# row cone {} {}", c.name, c.vector.len() + 1).unwrap();
        push_run(&mut runs, Domain::Soc, c.vector.len() + 1);
        rows.push((c.scalar.terms.clone(), c.scalar.constant));
        for e in &c.vector {
            rows.push((e.terms.clone(), e.constant));
        }
    }
    w.push_str(&meta_rows);

    writeln!(w, "VER\n3\n").unwrap();
    writeln!(w, "OBJSENSE\nMIN\n").unwrap();

    let mut var_runs: Vec<(Domain, usize)> = Vec::new();
    for v in &p.variables {
        let d = if v.lower == 0.0 { Domain::NonNeg } else { Domain::Free };
        push_run(&mut var_runs, d, 1);
    }
    writeln!(w, "VAR\n{} {}", p.n_vars(), var_runs.len()).unwrap();
    for (d, n) in &var_runs {
        writeln!(w, "{} {n}", d.token()).unwrap();
    }
    w.push('\n');

    let ints: Vec<usize> = (0..p.n_vars()).filter(|&i| p.variables[i].kind.is_integral()).collect();
    if !ints.is_empty() {
        writeln!(w, "INT\n{}", ints.len()).unwrap();
        for i in ints {
            writeln!(w, "{i}").unwrap();
        }
        w.push('\n');
    }

    writeln!(w, "CON\n{} {}", rows.len(), runs.len()).unwrap();
    for (d, n) in &runs {
        writeln!(w, "{} {n}", d.token()).unwrap();
    }
    w.push('\n');

    if !p.objective.terms.is_empty() {
        writeln!(w, "OBJACOORD\n{}", p.objective.terms.len()).unwrap();
        for (v, c) in &p.objective.terms {
            writeln!(w, "{v} {c:?}").unwrap();
        }
        w.push('\n');
    }
    if p.objective.constant != 0.0 {
        writeln!(w, "OBJBCOORD\n{:?}\n", p.objective.constant).unwrap();
    }

    let nnz: usize = rows.iter().map(|r| r.0.len()).sum();
    if nnz > 0 {
        writeln!(w, "ACOORD\n{nnz}").unwrap();
        for (r, (terms, _)) in rows.iter().enumerate() {
            for (v, c) in terms {
                writeln!(w, "{r} {v} {c:?}").unwrap();
            }
        }
        w.push('\n');
    }
    let bnz: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.1 != 0.0)
        .map(|(i, r)| (i, r.1))
        .collect();
    if !bnz.is_empty() {
        writeln!(w, "BCOORD\n{}", bnz.len()).unwrap();
        for (r, b) in bnz {
            writeln!(w, "{r} {b:?}").unwrap();
        }
        w.push('\n');
    }
    out
}

pub fn write(p: &ConicProgram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_string(p)).map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>) -> Result<ConicProgram> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}

enum RowRole {
    Linear { name: String, rhs: f64 },
    Upper(String),
    Lower(String),
    Cone { name: String, dim: usize },
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-empty, non-comment line.
    fn next_data(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if !t.is_empty() && !t.starts_with('#') {
                self.last = i + 1;
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self) -> Result<(usize, &'a str)> {
        let last = self.last;
        self.next_data().ok_or_else(|| perr(last + 1, "unexpected end of file"))
    }
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: msg.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| perr(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| perr(line, format!("bad {what}")))
}

pub fn parse(text: &str) -> Result<ConicProgram> {
    // Metadata first.
    let mut model = None;
    let mut hash = None;
    let mut budget = None;
    let mut variables = Vec::new();
    let mut roles = Vec::new();
    let mut saw_magic = false;
    for (i, l) in text.lines().enumerate() {
        let ln = i + 1;
        let Some(rest) = l.trim().strip_prefix('#') else {
            continue;
        };
        let mut tok = rest.split_whitespace();
        match tok.next() {
            Some("dronefleet-conic") => saw_magic = true,
            Some("model") => {
                let m: Mode = tok
                    .next()
                    .ok_or_else(|| perr(ln, "missing model"))?
                    .parse()
                    .map_err(|_| perr(ln, "bad model"))?;
                model = Some(m);
            }
            Some("instance") => hash = tok.next().map(str::to_string),
            Some("budget") => budget = Some(num::<u32>(ln, tok.next(), "budget")?),
            Some("var") => {
                let name = tok.next().ok_or_else(|| perr(ln, "missing variable name"))?.to_string();
                let kind = match tok.next() {
                    Some("C") => VarKind::Continuous,
                    Some("B") => VarKind::Binary,
                    Some("I") => VarKind::Integer,
                    _ => return Err(perr(ln, "bad variable kind")),
                };
                let lower = num(ln, tok.next(), "lower bound")?;
                let upper = num(ln, tok.next(), "upper bound")?;
                variables.push(Variable {
                    name,
                    kind,
                    lower,
                    upper,
                });
            }
            Some("row") => {
                let role = tok.next();
                let name = tok.next().ok_or_else(|| perr(ln, "missing row name"))?.to_string();
                roles.push(match role {
                    Some("linear") => RowRole::Linear {
                        name,
                        rhs: num(ln, tok.next(), "right-hand side")?,
                    },
                    Some("upper") => RowRole::Upper(name),
                    Some("lower") => RowRole::Lower(name),
                    Some("cone") => RowRole::Cone {
                        name,
                        dim: num(ln, tok.next(), "cone dimension")?,
                    },
                    _ => return Err(perr(ln, "bad row role")),
                });
            }
            _ => {}
        }
    }
    if !saw_magic {
        return Err(perr(1, format!("missing `# {MAGIC}` header")));
    }
    let meta = ProgramMeta {
        model: model.ok_or_else(|| perr(1, "missing model line"))?,
        instance_hash: hash.unwrap_or_default(),
        budget: budget.ok_or_else(|| perr(1, "missing budget line"))?,
    };

    // CBF data sections.
    let mut lines = Lines {
        inner: text.lines().enumerate().peekable(),
        last: 0,
    };
    let mut n_vars = None;
    let mut con_runs: Vec<(Domain, usize)> = Vec::new();
    let mut n_rows = 0usize;
    let mut ints = Vec::new();
    let mut obj = AffineExpr::default();
    let mut acoord: Vec<(usize, usize, f64)> = Vec::new();
    let mut bcoord: Vec<(usize, f64)> = Vec::new();
    while let Some((ln, head)) = lines.next_data() {
        match head {
            "VER" => {
                let (l, v) = lines.expect()?;
                if v != "3" {
                    return Err(perr(l, format!("unsupported CBF version {v}")));
                }
            }
            "OBJSENSE" => {
                let (l, v) = lines.expect()?;
                if v != "MIN" {
                    return Err(perr(l, "only minimisation is supported"));
                }
            }
            "VAR" => {
                let (l, v) = lines.expect()?;
                let mut t = v.split_whitespace();
                let n: usize = num(l, t.next(), "variable count")?;
                let k: usize = num(l, t.next(), "domain count")?;
                for _ in 0..k {
                    lines.expect()?;
                }
                n_vars = Some(n);
            }
            "INT" => {
                let (l, v) = lines.expect()?;
                let k: usize = num(l, Some(v), "integer count")?;
                for _ in 0..k {
                    let (l, v) = lines.expect()?;
                    ints.push(num::<usize>(l, Some(v), "integer index")?);
                }
            }
            "CON" => {
                let (l, v) = lines.expect()?;
                let mut t = v.split_whitespace();
                n_rows = num(l, t.next(), "row count")?;
                let k: usize = num(l, t.next(), "domain count")?;
                for _ in 0..k {
                    let (l, v) = lines.expect()?;
                    let mut t = v.split_whitespace();
                    let d = t.next().and_then(Domain::parse).ok_or_else(|| perr(l, "bad domain"))?;
                    con_runs.push((d, num(l, t.next(), "domain size")?));
                }
            }
            "OBJACOORD" => {
                let (l, v) = lines.expect()?;
                let k: usize = num(l, Some(v), "entry count")?;
                for _ in 0..k {
                    let (l, v) = lines.expect()?;
                    let mut t = v.split_whitespace();
                    obj.terms
                        .push((num(l, t.next(), "variable index")?, num(l, t.next(), "coefficient")?));
                }
            }
            "OBJBCOORD" => {
                let (l, v) = lines.expect()?;
                obj.constant = num(l, Some(v), "objective constant")?;
            }
            "ACOORD" => {
                let (l, v) = lines.expect()?;
                let k: usize = num(l, Some(v), "entry count")?;
                for _ in 0..k {
                    let (l, v) = lines.expect()?;
                    let mut t = v.split_whitespace();
                    acoord.push((
                        num(l, t.next(), "row index")?,
                        num(l, t.next(), "variable index")?,
                        num(l, t.next(), "coefficient")?,
                    ));
                }
            }
            "BCOORD" => {
                let (l, v) = lines.expect()?;
                let k: usize = num(l, Some(v), "entry count")?;
                for _ in 0..k {
                    let (l, v) = lines.expect()?;
                    let mut t = v.split_whitespace();
                    bcoord.push((num(l, t.next(), "row index")?, num(l, t.next(), "constant")?));
                }
            }
            other => return Err(perr(ln, format!("unsupported section `{other}`"))),
        }
    }

    let end = lines.last;
    let n = variables.len();
    if n_vars != Some(n) {
        return Err(perr(end, "VAR count does not match the variable list"));
    }
    for &i in &ints {
        if i >= n || !variables[i].kind.is_integral() {
            return Err(perr(end, format!("INT entry {i} does not match the variable kinds")));
        }
    }
    let mut rows: Vec<AffineExpr> = vec![AffineExpr::default(); n_rows];
    for (r, v, c) in acoord {
        if r >= n_rows || v >= n {
            return Err(perr(end, format!("coordinate ({r}, {v}) out of range")));
        }
        rows[r].terms.push((v, c));
    }
    for (r, b) in bcoord {
        if r >= n_rows {
            return Err(perr(end, format!("row {r} out of range")));
        }
        rows[r].constant = b;
    }
    let domains: Vec<Domain> = con_runs.iter().flat_map(|&(d, k)| std::iter::repeat_n(d, k)).collect();
    if domains.len() != n_rows {
        return Err(perr(end, "CON domain sizes do not add up to the row count"));
    }

    let mut p = ConicProgram::new(meta);
    p.variables = variables;
    p.rebuild_index()?;
    p.objective = obj;
    let mut row = 0usize;
    let mut rows = rows.into_iter();
    for role in roles {
        match role {
            RowRole::Linear { name, rhs } => {
                let mut expr = rows.next().ok_or_else(|| perr(end, "fewer rows than declared"))?;
                let sense = match domains[row] {
                    Domain::NonPos => Sense::Le,
                    Domain::NonNeg => Sense::Ge,
                    Domain::Zero => Sense::Eq,
                    _ => return Err(perr(end, format!("row `{name}` has a non-linear domain"))),
                };
                expr.constant += rhs;
                p.linear.push(LinearConstraint { name, expr, sense, rhs });
                row += 1;
            }
            RowRole::Upper(name) | RowRole::Lower(name) => {
                p.var(&name)?;
                rows.next().ok_or_else(|| perr(end, "fewer rows than declared"))?;
                row += 1;
            }
            RowRole::Cone { name, dim } => {
                let block: Vec<AffineExpr> = rows.by_ref().take(dim).collect();
                if block.len() != dim || domains[row] != Domain::Soc {
                    return Err(perr(end, format!("cone `{name}` does not match the CON section")));
                }
                let mut it = block.into_iter();
                let scalar = it.next().unwrap();
                p.soc.push(SocConstraint {
                    name,
                    vector: it.collect(),
                    scalar,
                });
                row += dim;
            }
        }
    }
    if row != n_rows {
        return Err(perr(end, "row metadata does not cover the CON section"));
    }
    Ok(p)
}
