//! Point checking and the closed-form back-solve of the cones.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::{AffineExpr, ConicProgram, Sense, SocConstraint, VarKind};
use crate::error::{Error, Result};
use crate::instance::{Instance, Mode};
use crate::queueing::{self, Assignment};

/// Absolute tolerance on linear rows, bounds and integrality.
pub const LINEAR_TOL: f64 = 1e-7;
/// A cone is violated when `||vector|| - scalar` exceeds this.
pub const SOC_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Linear,
    Cone,
    Bound,
    Integrality,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Constraint or variable name.
    pub name: String,
    pub amount: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
    pub max_violation: f64,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// Violations of the given constraint or variable.
    pub fn of(&self, name: &str) -> Option<&Violation> {
        self.violations.iter().find(|v| v.name == name)
    }
}

/// Checks a point given by variable name. Every variable must be assigned
/// and every name must belong to the program.
pub fn check_point(program: &ConicProgram, point: &HashMap<String, f64>) -> Result<FeasibilityReport> {
    let values = values_from_names(program, point)?;
    let missing: Vec<_> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_none())
        .map(|(i, _)| program.variables[i].name.as_str())
        .collect();
    if let Some(first) = missing.first() {
        return Err(Error::InvalidArgument(format!(
            "point leaves {} variables unassigned, first `{first}`",
            missing.len()
        )));
    }
    let values: Vec<f64> = values.into_iter().map(Option::unwrap).collect();
    Ok(check_values(program, &values))
}

fn values_from_names(program: &ConicProgram, point: &HashMap<String, f64>) -> Result<Vec<Option<f64>>> {
    let mut values = vec![None; program.n_vars()];
    // Sorted so the reported unknown name does not depend on hash order.
    let mut names: Vec<_> = point.iter().collect();
    names.sort_by(|a, b| a.0.cmp(b.0));
    for (name, &v) in names {
        values[program.var(name)?] = Some(v);
    }
    Ok(values)
}

/// Checks a point given in variable order.
pub fn check_values(program: &ConicProgram, values: &[f64]) -> FeasibilityReport {
    assert_eq!(values.len(), program.n_vars(), "point has the wrong length");
    let mut report = FeasibilityReport::default();
    let mut push = |kind, name: &str, amount: f64, tol: f64| {
        let amount = if amount.is_nan() { f64::INFINITY } else { amount };
        if amount > tol {
            report.max_violation = report.max_violation.max(amount);
            report.violations.push(Violation {
                kind,
                name: name.to_string(),
                amount,
            });
        }
    };
    for (var, &v) in program.variables.iter().zip(values) {
        push(
            ViolationKind::Bound,
            &var.name,
            (var.lower - v).max(v - var.upper),
            LINEAR_TOL,
        );
        if var.kind.is_integral() {
            push(ViolationKind::Integrality, &var.name, (v - v.round()).abs(), LINEAR_TOL);
        }
    }
    for c in &program.linear {
        let lhs = c.expr.eval(values);
        let amount = match c.sense {
            Sense::Le => lhs - c.rhs,
            Sense::Ge => c.rhs - lhs,
            Sense::Eq => (lhs - c.rhs).abs(),
        };
        push(ViolationKind::Linear, &c.name, amount, LINEAR_TOL);
    }
    for c in &program.soc {
        let norm = c.vector.iter().map(|e| e.eval(values).powi(2)).sum::<f64>().sqrt();
        push(ViolationKind::Cone, &c.name, norm - c.scalar.eval(values), SOC_TOL);
    }
    report
}

/// Point completed from fixed integer values by [`minimal_w_via_cones`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConeSolution {
    /// Full point in variable order.
    pub values: Vec<f64>,
    /// Waiting-time variables (`W[..]`) by name.
    pub waits: BTreeMap<String, f64>,
    /// Objective at the completed point.
    pub objective: f64,
}

impl ConeSolution {
    pub fn wait(&self, name: &str) -> Option<f64> {
        self.waits.get(name).copied()
    }

    pub fn named(&self, program: &ConicProgram) -> HashMap<String, f64> {
        program
            .variables
            .iter()
            .zip(&self.values)
            .map(|(v, &x)| (v.name.clone(), x))
            .collect()
    }
}

/// Cone `||v, e|| <= s` read as `||v||^2 <= 4 A B` with `A = (s + e) / 2`,
/// `B = (s - e) / 2`.
struct Rotated {
    v: Vec<AffineExpr>,
    a: AffineExpr,
    b: AffineExpr,
}

fn rotate(c: &SocConstraint) -> Rotated {
    let (last, v) = c.vector.split_last().expect("cone with an empty vector");
    Rotated {
        v: v.to_vec(),
        a: c.scalar.combine(last, 1.0).scaled(0.5),
        b: c.scalar.combine(last, -1.0).scaled(0.5),
    }
}

/// Given values for every binary and integer variable, computes the
/// smallest waiting times the cones allow, by back-solving each cone in
/// turn once a single variable in it is still unknown. A variable found in
/// the vector part of a cone is set to the largest value the cone admits;
/// one found in the `A`/`B` part to the smallest. Remaining equality rows
/// are solved directly, and the last free variables (the objective
/// epigraphs) take their tightest lower bound.
///
/// Fails with a stability error when a waiting cone has no finite solution.
pub fn minimal_w_via_cones(program: &ConicProgram, fixed: &HashMap<String, f64>) -> Result<ConeSolution> {
    let mut known = values_from_names(program, fixed)?;
    for (i, var) in program.variables.iter().enumerate() {
        if var.kind.is_integral() && known[i].is_none() {
            return Err(Error::InvalidArgument(format!(
                "integer variable `{}` is not fixed",
                var.name
            )));
        }
    }
    let cones: Vec<(usize, Rotated)> = program.soc.iter().map(rotate).enumerate().collect();
    let mut done_cone = vec![false; cones.len()];
    let mut done_row = vec![false; program.linear.len()];

    loop {
        let mut progress = false;
        for (ci, rc) in &cones {
            if done_cone[*ci] {
                continue;
            }
            let unknown = unknown_vars(&known, rc.v.iter().chain([&rc.a, &rc.b]));
            match unknown.as_slice() {
                [] => done_cone[*ci] = true,
                [u] => {
                    let val = solve_cone(program, &program.soc[*ci], rc, &known, *u)?;
                    known[*u] = Some(val.max(program.variables[*u].lower));
                    done_cone[*ci] = true;
                    progress = true;
                }
                _ => {}
            }
        }
        for (ri, row) in program.linear.iter().enumerate() {
            if done_row[ri] || row.sense != Sense::Eq {
                continue;
            }
            let unknown = unknown_vars(&known, [&row.expr]);
            match unknown.as_slice() {
                [] => done_row[ri] = true,
                [u] => {
                    let coef = row.expr.coef(*u);
                    let rest = eval_without(&row.expr, &known, *u);
                    known[*u] = Some((row.rhs - rest) / coef);
                    done_row[ri] = true;
                    progress = true;
                }
                _ => {}
            }
        }
        if !progress {
            break;
        }
    }

    // Epigraph variables: tightest bound in the minimising direction.
    let mut lower: HashMap<usize, f64> = HashMap::new();
    for row in &program.linear {
        let unknown = unknown_vars(&known, [&row.expr]);
        let [u] = unknown.as_slice() else {
            if unknown.len() > 1 {
                return Err(Error::Validation(format!("row `{}` cannot be back-solved", row.name)));
            }
            continue;
        };
        let coef = row.expr.coef(*u);
        let bound = (row.rhs - eval_without(&row.expr, &known, *u)) / coef;
        let is_lower = matches!((row.sense, coef > 0.0), (Sense::Ge, true) | (Sense::Le, false));
        if is_lower {
            let e = lower.entry(*u).or_insert(f64::NEG_INFINITY);
            *e = e.max(bound);
        }
    }
    for (i, var) in program.variables.iter().enumerate() {
        if known[i].is_none() {
            let lb = lower.get(&i).copied().unwrap_or(f64::NEG_INFINITY).max(var.lower);
            if !lb.is_finite() {
                return Err(Error::Validation(format!("variable `{}` is not determined", var.name)));
            }
            known[i] = Some(lb);
        }
    }
    let values: Vec<f64> = known.into_iter().map(Option::unwrap).collect();
    let waits = program
        .vars_with_prefix("W")
        .map(|(i, v)| (v.name.clone(), values[i]))
        .collect();
    let objective = program.objective.eval(&values);
    Ok(ConeSolution {
        values,
        waits,
        objective,
    })
}

fn unknown_vars<'a>(known: &[Option<f64>], exprs: impl IntoIterator<Item = &'a AffineExpr>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for e in exprs {
        for &(v, _) in &e.terms {
            if known[v].is_none() && !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

fn eval_without(e: &AffineExpr, known: &[Option<f64>], skip: usize) -> f64 {
    e.terms
        .iter()
        .filter(|t| t.0 != skip)
        .map(|&(v, c)| c * known[v].expect("back-solve order"))
        .sum::<f64>()
        + e.constant
}

fn solve_cone(
    program: &ConicProgram,
    cone: &SocConstraint,
    rc: &Rotated,
    known: &[Option<f64>],
    u: usize,
) -> Result<f64> {
    let in_v = rc.v.iter().position(|e| e.coef(u) != 0.0);
    let ca = rc.a.coef(u);
    let cb = rc.b.coef(u);
    if let Some(pos) = in_v {
        if ca != 0.0 || cb != 0.0 {
            return Err(unsupported(cone));
        }
        // (c u + d)^2 <= 4AB - |v_rest|^2; take the largest root.
        let a = eval_without(&rc.a, known, u);
        let b = eval_without(&rc.b, known, u);
        let rest: f64 =
            rc.v.iter()
                .enumerate()
                .filter(|(i, _)| *i != pos)
                .map(|(_, e)| eval_without(e, known, u).powi(2))
                .sum();
        let slack = 4.0 * a * b - rest;
        if a < 0.0 || b < 0.0 || slack < 0.0 {
            return Err(cone_failure(program, cone, known));
        }
        let c = rc.v[pos].coef(u);
        let d = eval_without(&rc.v[pos], known, u);
        return Ok(if c > 0.0 {
            (slack.sqrt() - d) / c
        } else {
            (-slack.sqrt() - d) / c
        });
    }
    if ca != 0.0 && cb != 0.0 {
        return Err(unsupported(cone));
    }
    let (target, other, coef) = if ca != 0.0 {
        (&rc.a, &rc.b, ca)
    } else {
        (&rc.b, &rc.a, cb)
    };
    if coef < 0.0 {
        return Err(unsupported(cone));
    }
    let other = eval_without(other, known, u);
    let norm2: f64 = rc.v.iter().map(|e| eval_without(e, known, u).powi(2)).sum();
    let needed = if other > 0.0 {
        norm2 / (4.0 * other)
    } else if other == 0.0 && norm2 == 0.0 {
        0.0
    } else {
        return Err(cone_failure(program, cone, known));
    };
    Ok((needed - eval_without(target, known, u)) / coef)
}

fn unsupported(cone: &SocConstraint) -> Error {
    Error::Validation(format!("cone `{}` cannot be back-solved", cone.name))
}

/// A cone without solution at fixed integers means the queue of its
/// facility is overloaded; the facility is read from the cone name.
fn cone_failure(program: &ConicProgram, cone: &SocConstraint, known: &[Option<f64>]) -> Error {
    let facility = facility_of_cone(&cone.name);
    let row = facility.and_then(|j| program.linear.iter().find(|r| r.name == format!("stab[{j}]")));
    match (facility, row) {
        (Some(j), Some(row)) => {
            let k = program
                .var_index(&format!("k[{j}]"))
                .and_then(|v| known[v])
                .unwrap_or(0.0);
            let excess: f64 = row.expr.terms.iter().map(|&(v, c)| c * known[v].unwrap_or(0.0)).sum();
            Error::Stability {
                facility: j,
                load: excess + k,
                drones: k.round() as u32,
            }
        }
        _ => Error::Infeasible(format!("cone `{}` has no solution at the fixed point", cone.name)),
    }
}

fn facility_of_cone(name: &str) -> Option<usize> {
    let open = name.find('[')?;
    let idx: Vec<&str> = name[open + 1..].trim_end_matches(']').split(',').collect();
    let pos = match &name[..open] {
        "wait" | "prod" => 0,
        "theta" | "beta" => 1,
        "pi" | "p" => 2,
        _ => return None,
    };
    idx.get(pos)?.parse().ok()
}

/// Feasible point built from the closed-form auxiliaries of the validity
/// proofs: `beta = sqrt(free drones)`, `theta = y / beta`,
/// `p = sqrt(k y_l / h)`, `pi = y_i sqrt(h / k)` and `Q = sum pi^2 / k`,
/// with waiting times from the queueing formulas and the objective from the
/// epigraph rows.
pub fn witness_point(program: &ConicProgram, inst: &Instance, asg: &Assignment) -> Result<HashMap<String, f64>> {
    let mut point = super::integer_point(program, inst, asg)?;
    let m = inst.n_facilities();
    let n = inst.n_nodes();
    let classes = inst.n_classes();
    let model = program.meta.model;
    let loads = queueing::facility_loads(inst, asg)?;
    let get = |point: &HashMap<String, f64>, name: String| point.get(&name).copied().unwrap_or(0.0);

    for j in 0..m {
        let k = f64::from(asg.drones[j]);
        match model {
            Mode::Np | Mode::Dp => {
                let total = loads[j].total_load();
                let w = if asg.open[j] && k > 0.0 {
                    queueing::pk_wait(loads[j].total_second(), total, asg.drones[j])
                } else {
                    0.0
                };
                point.insert(format!("W[{j}]"), w);
                for i in 0..n {
                    let y = get(&point, format!("y[{i},{j}]"));
                    let beta = k.sqrt();
                    point.insert(format!("beta[{i},{j}]"), beta);
                    point.insert(format!("theta[{i},{j}]"), if beta > 0.0 { y / beta } else { 0.0 });
                }
            }
            Mode::Sp => {
                let waits = if asg.open[j] && k > 0.0 {
                    queueing::static_waits(&loads[j], asg.drones[j])
                } else {
                    vec![0.0; classes]
                };
                let mut cum = 0.0;
                for r in 0..classes {
                    point.insert(format!("W[{j},{r}]"), waits[r]);
                    let beta = (k - cum).max(0.0).sqrt();
                    for l in 0..classes {
                        for i in 0..n {
                            let y = get(&point, format!("y[{i},{j},{l}]"));
                            let tag = format!("{i},{j},{l},{r}");
                            point.insert(format!("beta[{tag}]"), beta);
                            point.insert(format!("theta[{tag}]"), if beta > 0.0 { y / beta } else { 0.0 });
                        }
                    }
                    cum += loads[j].load[r];
                }
            }
        }
        if model == Mode::Dp {
            let rates: Vec<f64> = inst.nodes().iter().map(|nd| nd.lambda).collect();
            for r in 0..classes {
                let mut q = 0.0;
                for i in 0..n {
                    for l in (0..n).filter(|&l| inst.node_class(l) == r) {
                        let h = rates[i] * rates[l] * inst.service(i, j) * inst.service(l, j);
                        let tag = format!("{i},{l},{j},{r}");
                        if program.var_index(&format!("pi[{tag}]")).is_none() {
                            continue;
                        }
                        let yi = get(&point, format!("y[{i},{j}]"));
                        let yl = get(&point, format!("y[{l},{j}]"));
                        let (p, pi) = if k > 0.0 {
                            ((k * yl / h).sqrt(), if yl > 0.5 { yi * (h / k).sqrt() } else { 0.0 })
                        } else {
                            (0.0, 0.0)
                        };
                        point.insert(format!("p[{tag}]"), p);
                        point.insert(format!("pi[{tag}]"), pi);
                        q += pi * pi;
                    }
                }
                point.insert(format!("Q[{j},{r}]"), if k > 0.0 { q / k } else { 0.0 });
            }
            for r in 1..classes {
                let mut w = get(&point, format!("W[{j}]"));
                for l in 0..r {
                    w += inst.priority().delta_a(l, r) * get(&point, format!("Q[{j},{l}]"));
                }
                point.insert(format!("W[{j},{r}]"), w);
            }
        }
    }

    // Objective variables from the epigraph rows.
    let mut values = vec![0.0; program.n_vars()];
    for (i, v) in program.variables.iter().enumerate() {
        match point.get(&v.name) {
            Some(&x) => values[i] = x,
            None if v.kind == VarKind::Continuous && (v.name == "Z" || v.name.starts_with("Z[")) => {}
            None => {
                return Err(Error::Validation(format!("witness has no value for `{}`", v.name)));
            }
        }
    }
    for row in &program.linear {
        if !row.name.starts_with("epi[") {
            continue;
        }
        let z = row.expr.terms[0].0;
        let bound = row.rhs - eval_without(&row.expr, &values.iter().copied().map(Some).collect::<Vec<_>>(), z);
        values[z] = values[z].max(bound);
    }
    Ok(program
        .variables
        .iter()
        .zip(values)
        .map(|(v, x)| (v.name.clone(), x))
        .collect())
}
