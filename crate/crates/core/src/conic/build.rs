//! Program builders. All three share the location/allocation rows
//! (single assignment, assign-only-to-open, endurance, stability, budget)
//! and differ in how waiting times are tied to the cones.
//!
//! The waiting-time cone of a facility is
//! `|| (sqrt(2 lambda_i) s_ij theta_ij)_i , D_j - W_j || <= D_j + W_j`, the
//! rotated form of `sum_i 2 lambda_i s_ij^2 theta_ij^2 <= 4 D_j W_j` with
//! `D_j = k_j - sum_i lambda_i s_ij y_ij`. The pair of cones
//! `y_ij^2 <= theta_ij beta_ij` and `beta_ij^2 <= k_j` forces
//! `theta_ij^2 >= y_ij / k_j`. Here `s_ij` is the service time.

use std::collections::HashMap;

use super::{AffineExpr, ConicProgram, ProgramMeta, Sense, VarKind};
use crate::error::{Error, Result};
use crate::instance::{Instance, Mode};
use crate::queueing::Assignment;

const INF: f64 = f64::INFINITY;

/// Builds the program of the instance's own model.
pub fn build(inst: &Instance, budget: u32) -> ConicProgram {
    match inst.mode() {
        Mode::Np => build_np(inst, budget),
        Mode::Sp => build_sp(inst, budget),
        Mode::Dp => build_dp(inst, budget),
    }
}

fn meta(inst: &Instance, model: Mode, budget: u32) -> ProgramMeta {
    ProgramMeta {
        model,
        instance_hash: inst.content_hash(),
        budget,
    }
}

struct Common {
    x: Vec<usize>,
    k: Vec<usize>,
}

fn add_facility_vars(p: &mut ConicProgram, inst: &Instance, budget: u32) -> Common {
    let m = inst.n_facilities();
    let x = (0..m)
        .map(|j| p.add_var(format!("x[{j}]"), VarKind::Binary, 0.0, 1.0))
        .collect();
    let k = (0..m)
        .map(|j| p.add_var(format!("k[{j}]"), VarKind::Integer, 0.0, f64::from(budget)))
        .collect();
    Common { x, k }
}

/// Single assignment, open-facility link and endurance rows for one
/// assignment slot. `y[i][j]` are the slot's variables.
fn add_routing_rows(p: &mut ConicProgram, inst: &Instance, c: &Common, y: &[Vec<usize>], tag: &str) {
    let m = inst.n_facilities();
    for (i, yi) in y.iter().enumerate() {
        let mut sum = AffineExpr::default();
        for &v in yi {
            sum.add(v, 1.0);
        }
        p.add_linear(format!("assign[{i}{tag}]"), sum, Sense::Eq, 1.0);
    }
    for (i, yi) in y.iter().enumerate() {
        for j in 0..m {
            let e = AffineExpr::var(yi[j]).plus(c.x[j], -1.0);
            p.add_linear(format!("open[{i},{j}{tag}]"), e, Sense::Le, 0.0);
        }
    }
    for (i, yi) in y.iter().enumerate() {
        let mut e = AffineExpr::default();
        for j in 0..m {
            e.add(yi[j], inst.travel(i, j));
        }
        p.add_linear(format!("range[{i}{tag}]"), e, Sense::Le, inst.fleet().endurance);
    }
}

fn add_budget_row(p: &mut ConicProgram, c: &Common, budget: u32) {
    let mut e = AffineExpr::default();
    for &k in &c.k {
        e.add(k, 1.0);
    }
    p.add_linear("budget", e, Sense::Le, f64::from(budget));
}

/// `sum_i rate_i s_ij y_ij` over the given (rate, y-variable) pairs.
fn load_expr(inst: &Instance, j: usize, terms: &[(usize, f64, usize)]) -> AffineExpr {
    let mut e = AffineExpr::default();
    for &(i, rate, yv) in terms {
        e.add(yv, rate * inst.service(i, j));
    }
    e
}

/// Waiting cone, theta cones and beta cones of the single-class queue at one
/// facility. `terms` lists (node, rate, y-variable); `offset` is the load of
/// higher-priority work already subtracted from the drone count in the
/// beta cone (zero for the plain queue), `drain` the load subtracted in the
/// waiting cone.
#[allow(clippy::too_many_arguments)]
fn add_wait_block(
    p: &mut ConicProgram,
    inst: &Instance,
    j: usize,
    k: usize,
    w: usize,
    terms: &[(usize, f64, usize)],
    suffix: &dyn Fn(usize, usize) -> String,
    offset: &AffineExpr,
    drain: &AffineExpr,
    wait_name: String,
) {
    let mut vector = Vec::with_capacity(terms.len() + 1);
    let mut thetas = Vec::with_capacity(terms.len());
    for (idx, &(i, rate, _)) in terms.iter().enumerate() {
        let theta = p.add_var(format!("theta[{}]", suffix(i, idx)), VarKind::Continuous, 0.0, INF);
        let beta = p.add_var(format!("beta[{}]", suffix(i, idx)), VarKind::Continuous, 0.0, INF);
        thetas.push((theta, beta));
        vector.push(AffineExpr::default().plus(theta, (2.0 * rate).sqrt() * inst.service(i, j)));
    }
    // D = k - drain
    let d = AffineExpr::var(k).combine(drain, -1.0);
    vector.push(d.clone().plus(w, -1.0));
    p.add_soc(wait_name, vector, d.plus(w, 1.0));

    for (idx, &(i, _, yv)) in terms.iter().enumerate() {
        let (theta, beta) = thetas[idx];
        let tag = suffix(i, idx);
        p.add_soc(
            format!("theta[{tag}]"),
            vec![
                AffineExpr::default().plus(yv, 2.0),
                AffineExpr::var(theta).plus(beta, -1.0),
            ],
            AffineExpr::var(theta).plus(beta, 1.0),
        );
        // 1 - (k - offset) and 1 + (k - offset)
        let free = AffineExpr::var(k).combine(offset, -1.0);
        p.add_soc(
            format!("beta[{tag}]"),
            vec![
                AffineExpr::default().plus(beta, 2.0),
                free.scaled(-1.0).with_constant(1.0 - free.constant),
            ],
            free.clone().with_constant(1.0 + free.constant),
        );
    }
}

/// Non-priority model: minimise the largest response time
/// `t_ij y_ij + W_j` over all assigned requests.
pub fn build_np(inst: &Instance, budget: u32) -> ConicProgram {
    let n = inst.n_nodes();
    let m = inst.n_facilities();
    let mut p = ConicProgram::new(meta(inst, Mode::Np, budget));
    let c = add_facility_vars(&mut p, inst, budget);
    let y: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| p.add_var(format!("y[{i},{j}]"), VarKind::Binary, 0.0, 1.0))
                .collect()
        })
        .collect();
    let w: Vec<usize> = (0..m)
        .map(|j| p.add_var(format!("W[{j}]"), VarKind::Continuous, 0.0, INF))
        .collect();
    let z = p.add_var("Z", VarKind::Continuous, 0.0, INF);
    p.objective = AffineExpr::var(z);

    add_routing_rows(&mut p, inst, &c, &y, "");
    let rates: Vec<f64> = inst.nodes().iter().map(|nd| nd.lambda).collect();
    add_stability_rows(&mut p, inst, &c, &y, &rates);
    add_budget_row(&mut p, &c, budget);
    for i in 0..n {
        if rates[i] <= 0.0 {
            continue;
        }
        for j in 0..m {
            let e = AffineExpr::var(z).plus(y[i][j], -inst.travel(i, j)).plus(w[j], -1.0);
            p.add_linear(format!("epi[{i},{j}]"), e, Sense::Ge, 0.0);
        }
    }
    add_np_cones(&mut p, inst, &c, &y, &rates, &w);
    p
}

fn add_stability_rows(p: &mut ConicProgram, inst: &Instance, c: &Common, y: &[Vec<usize>], rates: &[f64]) {
    for j in 0..inst.n_facilities() {
        let terms: Vec<_> = (0..inst.n_nodes()).map(|i| (i, rates[i], y[i][j])).collect();
        let e = load_expr(inst, j, &terms).plus(c.k[j], -1.0);
        p.add_linear(format!("stab[{j}]"), e, Sense::Le, 0.0);
    }
}

fn add_np_cones(p: &mut ConicProgram, inst: &Instance, c: &Common, y: &[Vec<usize>], rates: &[f64], w: &[usize]) {
    for j in 0..inst.n_facilities() {
        let terms: Vec<_> = (0..inst.n_nodes())
            .filter(|&i| rates[i] > 0.0)
            .map(|i| (i, rates[i], y[i][j]))
            .collect();
        let drain = load_expr(inst, j, &terms);
        add_wait_block(
            p,
            inst,
            j,
            c.k[j],
            w[j],
            &terms,
            &|i, _| format!("{i},{j}"),
            &AffineExpr::default(),
            &drain,
            format!("wait[{j}]"),
        );
    }
}

/// Static-priority model. Each class of each node has its own assignment
/// `y[i,j,r]`; the waiting time of class r at j is bounded through the
/// cumulative load `C_r` of classes up to r.
pub fn build_sp(inst: &Instance, budget: u32) -> ConicProgram {
    let n = inst.n_nodes();
    let m = inst.n_facilities();
    let classes = inst.n_classes();
    let mut p = ConicProgram::new(meta(inst, Mode::Sp, budget));
    let c = add_facility_vars(&mut p, inst, budget);
    // y[r][i][j]
    let y: Vec<Vec<Vec<usize>>> = (0..classes)
        .map(|r| {
            (0..n)
                .map(|i| {
                    (0..m)
                        .map(|j| p.add_var(format!("y[{i},{j},{r}]"), VarKind::Binary, 0.0, 1.0))
                        .collect()
                })
                .collect()
        })
        .collect();
    let w: Vec<Vec<usize>> = (0..m)
        .map(|j| {
            (0..classes)
                .map(|r| p.add_var(format!("W[{j},{r}]"), VarKind::Continuous, 0.0, INF))
                .collect()
        })
        .collect();
    let z: Vec<usize> = (0..classes)
        .map(|r| p.add_var(format!("Z[{r}]"), VarKind::Continuous, 0.0, INF))
        .collect();
    let mut obj = AffineExpr::default();
    for (r, &zr) in z.iter().enumerate() {
        obj.add(zr, inst.priority().weights[r]);
    }
    p.objective = obj;

    for (r, yr) in y.iter().enumerate() {
        add_routing_rows(&mut p, inst, &c, yr, &format!(",{r}"));
    }
    // Stability on the total (all-class) load.
    let stream_terms = |j: usize, upto: usize| -> Vec<(usize, f64, usize)> {
        let mut t = Vec::new();
        for (l, yl) in y.iter().enumerate().take(upto) {
            for (i, yi) in yl.iter().enumerate() {
                let rate = inst.class_rate(i, l);
                if rate > 0.0 {
                    t.push((i, rate, yi[j]));
                }
            }
        }
        t
    };
    for j in 0..m {
        let e = load_expr(inst, j, &stream_terms(j, classes)).plus(c.k[j], -1.0);
        p.add_linear(format!("stab[{j}]"), e, Sense::Le, 0.0);
    }
    add_budget_row(&mut p, &c, budget);
    for r in 0..classes {
        for i in 0..n {
            if inst.class_rate(i, r) <= 0.0 {
                continue;
            }
            for j in 0..m {
                let e = AffineExpr::var(z[r])
                    .plus(y[r][i][j], -inst.travel(i, j))
                    .plus(w[j][r], -1.0);
                p.add_linear(format!("epi[{i},{j},{r}]"), e, Sense::Ge, 0.0);
            }
        }
    }

    for j in 0..m {
        let all = stream_terms(j, classes);
        // (node, class) labels of the streams, in the same order as `all`.
        let mut labels = Vec::new();
        for l in 0..classes {
            for i in 0..n {
                if inst.class_rate(i, l) > 0.0 {
                    labels.push((i, l));
                }
            }
        }
        for r in 0..classes {
            let drain = load_expr(inst, j, &stream_terms(j, r + 1));
            let offset = load_expr(inst, j, &stream_terms(j, r));
            let lab = labels.clone();
            add_wait_block(
                &mut p,
                inst,
                j,
                c.k[j],
                w[j][r],
                &all,
                &move |i, idx| format!("{i},{j},{},{r}", lab[idx].1),
                &offset,
                &drain,
                format!("wait[{j},{r}]"),
            );
        }
    }
    p
}

/// Dynamic-priority model: the non-priority waiting time `W_j` plus
/// `W_jr = W_j + sum_{l<r} delta_a(l, r) Q_jl`, where
/// `Q_jl >= (sum_i lambda_i s_ij y_ij)(sum_{i in I_l} lambda_i s_ij y_ij) / k_j^2`
/// is represented by one product variable `pi` per node pair.
pub fn build_dp(inst: &Instance, budget: u32) -> ConicProgram {
    let n = inst.n_nodes();
    let m = inst.n_facilities();
    let classes = inst.n_classes();
    let mut p = ConicProgram::new(meta(inst, Mode::Dp, budget));
    let c = add_facility_vars(&mut p, inst, budget);
    let y: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| p.add_var(format!("y[{i},{j}]"), VarKind::Binary, 0.0, 1.0))
                .collect()
        })
        .collect();
    let w: Vec<usize> = (0..m)
        .map(|j| p.add_var(format!("W[{j}]"), VarKind::Continuous, 0.0, INF))
        .collect();
    // Class 0 uses W[j] directly.
    let wr: Vec<Vec<usize>> = (0..m)
        .map(|j| {
            (0..classes)
                .map(|r| {
                    if r == 0 {
                        w[j]
                    } else {
                        p.add_var(format!("W[{j},{r}]"), VarKind::Continuous, 0.0, INF)
                    }
                })
                .collect()
        })
        .collect();
    let q: Vec<Vec<usize>> = (0..m)
        .map(|j| {
            (0..classes)
                .map(|r| p.add_var(format!("Q[{j},{r}]"), VarKind::Continuous, 0.0, INF))
                .collect()
        })
        .collect();
    let z: Vec<usize> = (0..classes)
        .map(|r| p.add_var(format!("Z[{r}]"), VarKind::Continuous, 0.0, INF))
        .collect();
    let mut obj = AffineExpr::default();
    for (r, &zr) in z.iter().enumerate() {
        obj.add(zr, inst.priority().weights[r]);
    }
    p.objective = obj;

    add_routing_rows(&mut p, inst, &c, &y, "");
    let rates: Vec<f64> = inst.nodes().iter().map(|nd| nd.lambda).collect();
    add_stability_rows(&mut p, inst, &c, &y, &rates);
    add_budget_row(&mut p, &c, budget);
    for r in 0..classes {
        for i in (0..n).filter(|&i| inst.node_class(i) == r && rates[i] > 0.0) {
            for j in 0..m {
                let e = AffineExpr::var(z[r])
                    .plus(y[i][j], -inst.travel(i, j))
                    .plus(wr[j][r], -1.0);
                p.add_linear(format!("epi[{i},{j},{r}]"), e, Sense::Ge, 0.0);
            }
        }
    }
    for j in 0..m {
        for r in 1..classes {
            let mut e = AffineExpr::var(wr[j][r]).plus(w[j], -1.0);
            for l in 0..r {
                e.add(q[j][l], -inst.priority().delta_a(l, r));
            }
            p.add_linear(format!("link[{j},{r}]"), e, Sense::Eq, 0.0);
        }
    }

    add_np_cones(&mut p, inst, &c, &y, &rates, &w);

    for j in 0..m {
        for r in 0..classes {
            let mut vector = Vec::new();
            let mut pairs = Vec::new();
            for i in (0..n).filter(|&i| rates[i] > 0.0) {
                for l in (0..n).filter(|&l| inst.node_class(l) == r && rates[l] > 0.0) {
                    let h = rates[i] * rates[l] * inst.service(i, j) * inst.service(l, j);
                    if h <= 0.0 {
                        continue;
                    }
                    let pi = p.add_var(format!("pi[{i},{l},{j},{r}]"), VarKind::Continuous, 0.0, INF);
                    let pv = p.add_var(format!("p[{i},{l},{j},{r}]"), VarKind::Continuous, 0.0, INF);
                    vector.push(AffineExpr::default().plus(pi, 2.0));
                    pairs.push((i, l, h, pi, pv));
                }
            }
            vector.push(AffineExpr::var(q[j][r]).plus(c.k[j], -1.0));
            p.add_soc(
                format!("prod[{j},{r}]"),
                vector,
                AffineExpr::var(q[j][r]).plus(c.k[j], 1.0),
            );
            for (i, l, h, pi, pv) in pairs {
                // || 2 y_ij, p - pi || <= p + pi + 2 (1 - y_lj)
                p.add_soc(
                    format!("pi[{i},{l},{j},{r}]"),
                    vec![
                        AffineExpr::default().plus(y[i][j], 2.0),
                        AffineExpr::var(pv).plus(pi, -1.0),
                    ],
                    AffineExpr::var(pv).plus(pi, 1.0).plus(y[l][j], -2.0).with_constant(2.0),
                );
                // || 2 p, k - y_lj / h || <= k + y_lj / h
                p.add_soc(
                    format!("p[{i},{l},{j},{r}]"),
                    vec![
                        AffineExpr::default().plus(pv, 2.0),
                        AffineExpr::var(c.k[j]).plus(y[l][j], -1.0 / h),
                    ],
                    AffineExpr::var(c.k[j]).plus(y[l][j], 1.0 / h),
                );
            }
        }
    }
    p
}

/// Values of the binary and integer variables (`x`, `y`, `k`) encoded by an
/// assignment.
pub fn integer_point(program: &ConicProgram, inst: &Instance, asg: &Assignment) -> Result<HashMap<String, f64>> {
    if (program.meta.model == Mode::Sp) != (inst.mode() == Mode::Sp) {
        return Err(Error::Mismatch(format!(
            "program is {} but the instance is {}",
            program.meta.model,
            inst.mode()
        )));
    }
    asg.check_shape(inst)?;
    let m = inst.n_facilities();
    let mut point = HashMap::new();
    for j in 0..m {
        point.insert(format!("x[{j}]"), if asg.open[j] { 1.0 } else { 0.0 });
        point.insert(format!("k[{j}]"), f64::from(asg.drones[j]));
    }
    for (i, slots) in asg.y.iter().enumerate() {
        for j in 0..m {
            if program.meta.model == Mode::Sp {
                for (r, &s) in slots.iter().enumerate() {
                    point.insert(format!("y[{i},{j},{r}]"), if s == j { 1.0 } else { 0.0 });
                }
            } else {
                point.insert(format!("y[{i},{j}]"), if slots[0] == j { 1.0 } else { 0.0 });
            }
        }
    }
    Ok(point)
}
