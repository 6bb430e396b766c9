//! Mixed-integer second-order cone programs for the three location models.
//!
//! A [`ConicProgram`] is a plain container: named variables with kinds and
//! bounds, a linear objective (always minimised), affine constraints and
//! second-order cones `||vector||_2 <= scalar` whose entries are affine
//! expressions. Builders live in [`build`], point checking and the closed-form
//! back-solve in [`verify`], text formats in [`cbf`] and [`lp`].
//!
//! Variable names use zero-based indices throughout: `y[i,j]`, `W[j,r]`,
//! `theta[i,j,l,r]`, and so on.

pub mod build;
pub mod cbf;
pub mod lp;
pub mod verify;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Mode;

pub use build::{build, build_dp, build_np, build_sp, integer_point};
pub use verify::{
    check_point, check_values, minimal_w_via_cones, witness_point, ConeSolution, FeasibilityReport, Violation,
    ViolationKind, LINEAR_TOL, SOC_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// `sum coef * var + constant`. Terms keep insertion order so emitted files
/// are byte-stable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: usize) -> Self {
        AffineExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    /// Adds `coef * var`, merging with an existing term on the same
    /// variable; zero coefficients are dropped.
    pub fn add(&mut self, var: usize, coef: f64) -> &mut Self {
        if coef == 0.0 {
            return self;
        }
        if let Some(t) = self.terms.iter_mut().find(|t| t.0 == var) {
            t.1 += coef;
        } else {
            self.terms.push((var, coef));
        }
        self
    }

    pub fn plus(mut self, var: usize, coef: f64) -> Self {
        self.add(var, coef);
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant = c;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        AffineExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    /// `self + s * other`.
    pub fn combine(&self, other: &AffineExpr, s: f64) -> Self {
        let mut out = self.clone();
        for &(v, c) in &other.terms {
            out.add(v, c * s);
        }
        out.constant += s * other.constant;
        out
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum::<f64>() + self.constant
    }

    pub fn coef(&self, var: usize) -> f64 {
        self.terms.iter().filter(|t| t.0 == var).map(|t| t.1).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// `expr sense rhs`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: String,
    pub expr: AffineExpr,
    pub sense: Sense,
    pub rhs: f64,
}

/// `||vector||_2 <= scalar`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocConstraint {
    pub name: String,
    pub vector: Vec<AffineExpr>,
    pub scalar: AffineExpr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramMeta {
    pub model: Mode,
    pub instance_hash: String,
    /// Drone budget K the program was built with.
    pub budget: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    pub meta: ProgramMeta,
    pub variables: Vec<Variable>,
    pub objective: AffineExpr,
    pub linear: Vec<LinearConstraint>,
    pub soc: Vec<SocConstraint>,
    index: HashMap<String, usize>,
}

impl ConicProgram {
    pub fn new(meta: ProgramMeta) -> Self {
        ConicProgram {
            meta,
            variables: Vec::new(),
            objective: AffineExpr::default(),
            linear: Vec::new(),
            soc: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> usize {
        let name = name.into();
        let id = self.variables.len();
        let prev = self.index.insert(name.clone(), id);
        assert!(prev.is_none(), "duplicate variable {name}");
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        id
    }

    pub fn add_linear(&mut self, name: impl Into<String>, expr: AffineExpr, sense: Sense, rhs: f64) {
        self.linear.push(LinearConstraint {
            name: name.into(),
            expr,
            sense,
            rhs,
        });
    }

    pub fn add_soc(&mut self, name: impl Into<String>, vector: Vec<AffineExpr>, scalar: AffineExpr) {
        self.soc.push(SocConstraint {
            name: name.into(),
            vector,
            scalar,
        });
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn var(&self, name: &str) -> Result<usize> {
        self.var_index(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    /// Variables whose name starts with `prefix[`.
    pub fn vars_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (usize, &'a Variable)> + 'a {
        self.variables.iter().enumerate().filter(move |(_, v)| {
            v.name.len() > prefix.len() && v.name.starts_with(prefix) && v.name.as_bytes()[prefix.len()] == b'['
        })
    }

    /// Every variable referenced by a constraint or the objective is declared.
    pub fn check_references(&self) -> Result<()> {
        let n = self.variables.len();
        let bad = |e: &AffineExpr| e.terms.iter().any(|t| t.0 >= n);
        if bad(&self.objective)
            || self.linear.iter().any(|c| bad(&c.expr))
            || self.soc.iter().any(|c| bad(&c.scalar) || c.vector.iter().any(bad))
        {
            return Err(Error::Validation("constraint references an undeclared variable".into()));
        }
        Ok(())
    }

    pub(crate) fn rebuild_index(&mut self) -> Result<()> {
        self.index.clear();
        for (i, v) in self.variables.iter().enumerate() {
            if self.index.insert(v.name.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate variable name {}", v.name)));
            }
        }
        Ok(())
    }
}

/// Output format of [`emit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConicFormat {
    Cbf,
    Lp,
}

impl std::str::FromStr for ConicFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cbf" => Ok(ConicFormat::Cbf),
            "lp" => Ok(ConicFormat::Lp),
            other => Err(Error::InvalidArgument(format!("unknown conic format `{other}`"))),
        }
    }
}

pub fn to_text(program: &ConicProgram, format: ConicFormat) -> String {
    match format {
        ConicFormat::Cbf => cbf::write_string(program),
        ConicFormat::Lp => lp::write_string(program),
    }
}

pub fn emit(program: &ConicProgram, path: impl AsRef<Path>, format: ConicFormat) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_text(program, format)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queueing::fixtures::{dp, np, sp};
    use crate::queueing::{waiting_np, waiting_sp, Assignment};

    fn sides(p: &ConicProgram, point: &HashMap<String, f64>, name: &str) -> (f64, f64) {
        let values: Vec<f64> = p.variables.iter().map(|v| point[&v.name]).collect();
        let c = p.soc.iter().find(|c| c.name == name).unwrap();
        let lhs = c.vector.iter().map(|e| e.eval(&values).powi(2)).sum::<f64>().sqrt();
        (lhs, c.scalar.eval(&values))
    }

    fn np_example() -> (ConicProgram, HashMap<String, f64>) {
        let inst = np(&[0.4], vec![vec![1.0]]);
        let p = build_np(&inst, 1);
        let point: HashMap<String, f64> = [
            ("x[0]", 1.0),
            ("y[0,0]", 1.0),
            ("k[0]", 1.0),
            ("W[0]", 1.0 / 3.0),
            ("Z", 1.0 + 1.0 / 3.0),
            ("theta[0,0]", 1.0),
            ("beta[0,0]", 1.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        (p, point)
    }

    #[test]
    fn np_single_pair_counts() {
        let (p, _) = np_example();
        assert_eq!(p.n_vars(), 7);
        assert_eq!(p.soc.len(), 3);
        assert_eq!(p.count_kind(VarKind::Binary), 2);
        assert_eq!(p.count_kind(VarKind::Integer), 1);
        p.check_references().unwrap();
    }

    #[test]
    fn np_example_point_is_tight() {
        let (p, point) = np_example();
        let (lhs, rhs) = sides(&p, &point, "wait[0]");
        assert!((lhs - 0.9333333333333333).abs() < 1e-12);
        assert!((rhs - 0.9333333333333333).abs() < 1e-12);
        let report = check_point(&p, &point).unwrap();
        assert!(report.feasible(), "{report:?}");
        assert!(report.max_violation <= 1e-9);
    }

    #[test]
    fn lowering_w_violates_wait_cone() {
        let (p, mut point) = np_example();
        *point.get_mut("W[0]").unwrap() -= 0.01;
        let report = check_point(&p, &point).unwrap();
        let v = report.of("wait[0]").expect("wait cone violated");
        assert_eq!(v.kind, ViolationKind::Cone);
        assert!(v.amount > 1e-3);
    }

    #[test]
    fn zero_point_violates_assignment() {
        let (p, mut point) = np_example();
        for v in point.values_mut() {
            *v = 0.0;
        }
        let report = check_point(&p, &point).unwrap();
        assert!(report.of("assign[0]").is_some());
        // Idle auxiliaries sit inside their cones.
        assert!(report.of("theta[0,0]").is_none());
        assert!(report.of("beta[0,0]").is_none());
    }

    #[test]
    fn unknown_and_missing_names_rejected() {
        let (p, mut point) = np_example();
        point.insert("nope".into(), 1.0);
        assert!(matches!(check_point(&p, &point), Err(Error::UnknownVariable(n)) if n == "nope"));
        point.remove("nope");
        point.remove("Z");
        assert!(matches!(check_point(&p, &point), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn np_back_solve_matches_closed_form() {
        let inst = np(&[0.4], vec![vec![1.0]]);
        let p = build_np(&inst, 1);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        let sol = minimal_w_via_cones(&p, &integer_point(&p, &inst, &asg).unwrap()).unwrap();
        assert!((sol.wait("W[0]").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((sol.objective - 4.0 / 3.0).abs() < 1e-12);
        let closed = waiting_np(&inst, &asg, 0).unwrap();
        assert!((sol.wait("W[0]").unwrap() - closed).abs() <= 1e-15);
    }

    #[test]
    fn unused_facility_back_solves_to_zero() {
        let inst = np(&[0.3], vec![vec![2.0, 1.0]]);
        let p = build_np(&inst, 3);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1, 2]);
        let sol = minimal_w_via_cones(&p, &integer_point(&p, &inst, &asg).unwrap()).unwrap();
        assert_eq!(sol.wait("W[1]"), Some(0.0));
    }

    #[test]
    fn overloaded_facility_is_a_stability_error() {
        let inst = np(&[1.0], vec![vec![1.0]]);
        let p = build_np(&inst, 1);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        let err = minimal_w_via_cones(&p, &integer_point(&p, &inst, &asg).unwrap()).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Stability {
                    facility: 0,
                    drones: 1,
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn sp_single_class_matches_np_layout() {
        let travel = vec![vec![1.0, 2.0], vec![3.0, 1.5]];
        let s = build_sp(&sp(&[0.3, 0.4], &[vec![1.0], vec![1.0]], travel.clone(), vec![1.0]), 5);
        let n = build_np(&np(&[0.3, 0.4], travel), 5);
        assert_eq!(s.n_vars(), n.n_vars());
        assert_eq!(s.linear.len(), n.linear.len());
        assert_eq!(s.soc.len(), n.soc.len());
        for (a, b) in s.soc.iter().zip(&n.soc) {
            assert_eq!(a.vector.len(), b.vector.len());
            assert_eq!(a.vector, b.vector.iter().map(|e| remap(e, &n, &s)).collect::<Vec<_>>());
        }
    }

    /// Maps an NP expression to SP variable indices (`y[i,j]` -> `y[i,j,0]`,
    /// `W[j]` -> `W[j,0]`, auxiliaries gain the class indices).
    fn remap(e: &AffineExpr, from: &ConicProgram, to: &ConicProgram) -> AffineExpr {
        let mut out = AffineExpr::default().with_constant(e.constant);
        for &(v, c) in &e.terms {
            let name = &from.variables[v].name;
            let mapped = if name.starts_with("theta[") || name.starts_with("beta[") {
                name.replace(']', ",0,0]")
            } else if name.starts_with("y[") || name.starts_with("W[") {
                name.replace(']', ",0]")
            } else {
                name.clone()
            };
            out.terms.push((to.var(&mapped).unwrap(), c));
        }
        out
    }

    #[test]
    fn sp_two_class_counts() {
        // One wait cone per class, and one theta and one beta cone per
        // (stream, target class) pair: 2 + 2*2 + 2*2.
        let inst = sp(&[1.0], &[vec![0.5, 0.5]], vec![vec![1.0]], vec![0.7, 0.3]);
        let p = build_sp(&inst, 2);
        assert_eq!(p.soc.len(), 10);
    }

    #[test]
    fn sp_example_point_is_tight() {
        let inst = sp(&[1.0], &[vec![0.5, 0.5]], vec![vec![1.0]], vec![0.7, 0.3]);
        let p = build_sp(&inst, 2);
        let asg = Assignment::from_routes(vec![vec![0, 0]], vec![2]);
        let point = witness_point(&p, &inst, &asg).unwrap();
        assert!((point["W[0,0]"] - 1.0 / 6.0).abs() < 1e-12);
        assert!((point["W[0,1]"] - 1.0 / 3.0).abs() < 1e-12);
        for name in ["wait[0,0]", "wait[0,1]"] {
            let (lhs, rhs) = sides(&p, &point, name);
            assert!((lhs - rhs).abs() < 1e-9, "{name}: {lhs} vs {rhs}");
        }
        assert!(check_point(&p, &point).unwrap().feasible());
        let sol = minimal_w_via_cones(&p, &integer_point(&p, &inst, &asg).unwrap()).unwrap();
        assert!((sol.wait("W[0,0]").unwrap() - waiting_sp(&inst, &asg, 0, 0).unwrap()).abs() < 1e-12);
        assert!((sol.wait("W[0,1]").unwrap() - 0.3333333333333333).abs() < 1e-12);
    }

    #[test]
    fn dp_product_term_example() {
        let inst = dp(
            &[0.4, 0.4],
            &[1, 2],
            vec![vec![1.0], vec![1.0]],
            vec![0.7, 0.3],
            vec![3.0, 0.0],
        );
        let p = build_dp(&inst, 1);
        let asg = Assignment::from_routes(vec![vec![0], vec![0]], vec![1]);
        let point = witness_point(&p, &inst, &asg).unwrap();
        assert!((point["Q[0,0]"] - 0.32).abs() < 1e-12);
        assert!((point["pi[0,0,0,0]"].powi(2) + point["pi[1,0,0,0]"].powi(2) - 0.32).abs() < 1e-12);
        let report = check_point(&p, &point).unwrap();
        assert!(report.feasible(), "{report:?}");
        assert!((point["W[0,1]"] - 2.96).abs() < 1e-12);
        let sol = minimal_w_via_cones(&p, &integer_point(&p, &inst, &asg).unwrap()).unwrap();
        assert!((sol.wait("W[0]").unwrap() - 2.0).abs() < 1e-12);
        assert!((sol.wait("W[0,1]").unwrap() - 2.96).abs() < 1e-12);
    }

    #[test]
    fn dp_zero_gap_gives_np_waits() {
        let inst = dp(
            &[0.4, 0.4],
            &[1, 2],
            vec![vec![1.0], vec![1.0]],
            vec![0.7, 0.3],
            vec![0.0, 0.0],
        );
        let p = build_dp(&inst, 1);
        let asg = Assignment::from_routes(vec![vec![0], vec![0]], vec![1]);
        let sol = minimal_w_via_cones(&p, &integer_point(&p, &inst, &asg).unwrap()).unwrap();
        assert_eq!(sol.wait("W[0]"), sol.wait("W[0,1]"));
    }

    #[test]
    fn dp_guard_relaxes_unassigned_pairs() {
        // Node 1 goes to facility 1, so every product cone of facility 0 that
        // involves node 1 as the class node is relaxed by the guard term.
        let inst = dp(
            &[0.4, 0.4],
            &[1, 1],
            vec![vec![1.0, 2.0], vec![1.0, 2.0]],
            vec![1.0],
            vec![0.0],
        );
        let p = build_dp(&inst, 2);
        let asg = Assignment::from_routes(vec![vec![0], vec![1]], vec![1, 1]);
        let point = witness_point(&p, &inst, &asg).unwrap();
        assert_eq!(point["pi[0,1,0,0]"], 0.0);
        assert_eq!(point["p[0,1,0,0]"], 0.0);
        assert!(check_point(&p, &point).unwrap().feasible());
    }

    #[test]
    fn cbf_round_trip_and_determinism() {
        let (p, _) = np_example();
        let text = cbf::write_string(&p);
        assert_eq!(text, cbf::write_string(&p));
        assert_eq!(cbf::parse(&text).unwrap(), p);
        assert!(text.contains("\nVAR\n7 1\n"));
        assert_eq!(text.matches("\nQ ").count(), 3);
        let inst = dp(
            &[0.4, 0.4],
            &[1, 2],
            vec![vec![1.0], vec![1.0]],
            vec![0.7, 0.3],
            vec![3.0, 0.0],
        );
        let d = build_dp(&inst, 4);
        assert_eq!(cbf::parse(&cbf::write_string(&d)).unwrap(), d);
    }

    #[test]
    fn cbf_errors_carry_line_numbers() {
        let (p, _) = np_example();
        let text = cbf::write_string(&p).replace("OBJSENSE\nMIN", "OBJSENSE\nMAX");
        let line = text.lines().position(|l| l == "MAX").unwrap() + 1;
        match cbf::parse(&text) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line),
            other => panic!("{other:?}"),
        }
        assert!(cbf::parse("VER\n3\n").is_err());
    }

    #[test]
    fn lp_output_lists_cones() {
        let (p, _) = np_example();
        let text = lp::write_string(&p);
        assert_eq!(text, lp::write_string(&p));
        assert!(text.starts_with("\\ dronefleet np program"));
        assert!(text.contains(" wait(0): [ c0_1 ^2 + c0_2 ^2 - c0_0 ^2 ] <= 0"));
        assert!(text.contains("Binaries\n x(0) y(0,0)\n"));
        assert!(text.contains("Generals\n k(0)\n"));
        assert!(text.ends_with("End\n"));
    }
}
