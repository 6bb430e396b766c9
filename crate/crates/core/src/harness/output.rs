//! CSV and manifest files of an experiment.
//!
//! `rows.csv` has one line per row: identification columns, then for each
//! class r the analytic `Z_r_an sumZ_r_an W_r_an sumW_r_an`, the simulated
//! means `*_sim`, their half-widths `*_sim_hw` and the paired gaps
//! `gap_*` against `gap_vs`, then runtimes and `error`. Cells that do not
//! apply hold `na`; `error` holds `none` for successful rows.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{ClassValues, ExperimentPlan, ExperimentRow};
use crate::error::{Error, Result};

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TAILS_FILE: &str = "tails.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

const NA: &str = "na";

fn num(x: f64) -> String {
    x.to_string()
}

fn delta(r: &ExperimentRow) -> String {
    r.delta_a.map_or_else(|| NA.to_string(), num)
}

fn class_fields(v: &ClassValues) -> [f64; 4] {
    [v.z, v.sum_z, v.w, v.sum_w]
}

const CLASS_METRICS: [&str; 4] = ["Z", "sumZ", "W", "sumW"];

fn rows_header(classes: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "seed",
        "model",
        "discipline",
        "alpha",
        "w1",
        "delta_a",
        "k_star",
        "budget",
        "open",
        "z_an",
        "z_sim",
        "z_sim_hw",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for suffix in ["an", "sim", "sim_hw"] {
        for r in 1..=classes {
            for m in CLASS_METRICS {
                h.push(format!("{m}_{r}_{suffix}"));
            }
        }
    }
    h.push("gap_vs".into());
    for r in 1..=classes {
        for m in CLASS_METRICS {
            h.push(format!("gap_{m}_{r}"));
        }
    }
    h.extend(["solve_seconds", "sim_seconds", "error"].map(String::from));
    h
}

fn row_record(r: &ExperimentRow, classes: usize) -> Vec<String> {
    let ok = r.ok();
    let val = |x: f64| if ok { num(x) } else { NA.to_string() };
    let mut rec = vec![
        r.seed.to_string(),
        r.model.to_string(),
        r.discipline.to_string(),
        num(r.alpha),
        num(r.w1),
        delta(r),
        if ok { r.k_star.to_string() } else { NA.into() },
        if ok { r.budget.to_string() } else { NA.into() },
        if ok { r.open.to_string() } else { NA.into() },
        val(r.z_analytic),
        val(r.z_sim),
        val(r.z_sim_half_width),
    ];
    for set in [&r.analytic, &r.simulated, &r.sim_half_width] {
        for c in 0..classes {
            let v = set.get(c).copied().unwrap_or_default();
            rec.extend(class_fields(&v).map(val));
        }
    }
    rec.push(r.gap_vs.map_or_else(|| NA.to_string(), |m| m.to_string()));
    for c in 0..classes {
        match r.gap.get(c) {
            Some(g) => rec.extend(class_fields(g).map(num)),
            None => rec.extend(std::iter::repeat_n(NA.to_string(), 4)),
        }
    }
    rec.push(num(r.solve_seconds));
    rec.push(num(r.sim_seconds));
    rec.push(r.error.clone().unwrap_or_else(|| "none".into()));
    rec
}

/// Quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and nonempty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Distribution of one metric across seeds at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub model: String,
    pub alpha: f64,
    pub w1: f64,
    pub delta_a: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Named metrics of a successful row, including class-1 to class-r ratios
/// of the simulated totals and Z_r / Z_1.
fn metrics(r: &ExperimentRow) -> Vec<(String, f64)> {
    let mut out = vec![("z_an".to_string(), r.z_analytic), ("z_sim".to_string(), r.z_sim)];
    for (suffix, set) in [("an", &r.analytic), ("sim", &r.simulated)] {
        for (c, v) in set.iter().enumerate() {
            for (m, x) in CLASS_METRICS.iter().zip(class_fields(v)) {
                out.push((format!("{m}_{}_{suffix}", c + 1), x));
            }
        }
    }
    for (c, g) in r.gap.iter().enumerate() {
        for (m, x) in CLASS_METRICS.iter().zip(class_fields(g)) {
            out.push((format!("gap_{m}_{}", c + 1), x));
        }
    }
    if let Some(first) = r.simulated.first() {
        for (c, v) in r.simulated.iter().enumerate().skip(1) {
            let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
            let k = c + 1;
            out.push((format!("ratio_sumZ_1_{k}_sim"), ratio(first.sum_z, v.sum_z)));
            out.push((format!("ratio_sumW_1_{k}_sim"), ratio(first.sum_w, v.sum_w)));
            out.push((format!("ratio_Z_{k}_1_sim"), ratio(v.z, first.z)));
        }
    }
    out
}

/// Per grid point and metric: mean and quartiles across seeds, over
/// successful rows, in first-appearance order.
pub fn summarize(rows: &[ExperimentRow]) -> Vec<SummaryRow> {
    type Key = (String, f64, f64, String);
    type Series = Vec<(String, Vec<f64>)>;
    let mut groups: Vec<(Key, Series)> = Vec::new();
    for r in rows.iter().filter(|r| r.ok()) {
        let key = (r.model.to_string(), r.alpha, r.w1, delta(r));
        let pos = match groups.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                groups.push((key, Vec::new()));
                groups.len() - 1
            }
        };
        let bucket = &mut groups[pos].1;
        for (name, x) in metrics(r) {
            match bucket.iter_mut().find(|(n, _)| *n == name) {
                Some((_, xs)) => xs.push(x),
                None => bucket.push((name, vec![x])),
            }
        }
    }
    let mut out = Vec::new();
    for ((model, alpha, w1, delta_a), bucket) in groups {
        for (metric, mut xs) in bucket {
            xs.sort_by(f64::total_cmp);
            out.push(SummaryRow {
                model: model.clone(),
                alpha,
                w1,
                delta_a: delta_a.clone(),
                metric,
                n: xs.len(),
                mean: xs.iter().sum::<f64>() / xs.len() as f64,
                min: xs[0],
                q1: quantile(&xs, 0.25),
                median: quantile(&xs, 0.5),
                q3: quantile(&xs, 0.75),
                max: xs[xs.len() - 1],
            });
        }
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    plan: &'a ExperimentPlan,
    rows: usize,
    failed_rows: usize,
    budget_rule: &'static str,
    quantiles: &'static str,
    files: [&'static str; 4],
}

/// Writes through a temporary file and a rename, so a reader never sees a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_bytes(header: &[String], records: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for rec in records {
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Writes rows.csv, summary.csv, tails.csv and manifest.json into `dir`
/// (created if missing).
pub fn write_outputs(plan: &ExperimentPlan, rows: &[ExperimentRow], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let classes = rows.iter().map(ExperimentRow::classes).max().unwrap_or(0);

    let bytes = csv_bytes(&rows_header(classes), rows.iter().map(|r| row_record(r, classes)))?;
    write_atomic(&dir.join(ROWS_FILE), &bytes)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for s in summarize(rows) {
        w.serialize(s)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    write_atomic(&dir.join(SUMMARY_FILE), &bytes)?;

    let header: Vec<String> = [
        "seed",
        "model",
        "discipline",
        "alpha",
        "w1",
        "delta_a",
        "class",
        "t",
        "p",
        "p_hw",
    ]
    .map(String::from)
    .to_vec();
    let tails = rows.iter().filter(|r| r.ok()).flat_map(|r| {
        r.tails.iter().enumerate().flat_map(move |(c, tail)| {
            tail.iter().map(move |&(t, p, hw)| {
                vec![
                    r.seed.to_string(),
                    r.model.to_string(),
                    r.discipline.to_string(),
                    num(r.alpha),
                    num(r.w1),
                    delta(r),
                    (c + 1).to_string(),
                    num(t),
                    num(p),
                    num(hw),
                ]
            })
        })
    });
    let bytes = csv_bytes(&header, tails)?;
    write_atomic(&dir.join(TAILS_FILE), &bytes)?;

    let manifest = Manifest {
        tool: "dronefleet",
        version: env!("CARGO_PKG_VERSION"),
        plan,
        rows: rows.len(),
        failed_rows: rows.iter().filter(|r| !r.ok()).count(),
        budget_rule: "K* = largest minimum fleet over the plan's models; K = max(K*, min(cap, floor((1 + alpha) K*)))",
        quantiles: "linear interpolation between order statistics, h = (n - 1) p",
        files: [ROWS_FILE, SUMMARY_FILE, TAILS_FILE, MANIFEST_FILE],
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    write_atomic(&dir.join(MANIFEST_FILE), &json)
}
