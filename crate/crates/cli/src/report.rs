//! Machine-readable outputs: `solution.json`, `gap_curve.csv`, `report.json`
//! and the side-by-side comparison table.
//!
//! Numbers are encoded with 17 significant decimal digits so every value
//! round-trips through the text format; non-finite values are written as the
//! strings "inf" / "-inf" / "nan".

use riskopt_core::market::AssumptionReport;
use riskopt_core::probe::RobustnessReport;
use riskopt_core::solution::SolutionFunction;
use riskopt_core::witness::WitnessSequence;
use riskopt_core::MarketModel;
use serde_json::{json, Map, Value};
use std::io::Write;
use std::path::Path;

/// 17-significant-digit decimal encoding (1 leading + 16 fractional).
pub fn sig17(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

/// JSON value for a float: a number when finite, a string otherwise.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(sig17(x))
    }
}

fn sanitize(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                Value::Number(n)
            } else {
                match n.as_f64() {
                    Some(x) => num(x),
                    None => Value::Number(n),
                }
            }
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sanitize).collect()),
        Value::Object(map) => {
            let mut out = Map::new();
            for (k, val) in map {
                out.insert(k, sanitize(val));
            }
            Value::Object(out)
        }
        other => other,
    }
}

pub fn to_clean_value<T: serde::Serialize>(t: &T) -> Value {
    sanitize(serde_json::to_value(t).expect("serializable"))
}

pub fn write_pretty_json(path: &Path, value: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// The solved-instance record: problem echo, assumption report, solution
/// shape with its structural parameters, and the objective value.
pub fn solution_record(
    config_echo: Value,
    model: &MarketModel,
    assumptions: &AssumptionReport,
    solution: Option<&SolutionFunction>,
    witness: Option<&WitnessSequence>,
    status: &str,
) -> Value {
    let mut record = Map::new();
    record.insert("schema_version".to_string(), json!(crate::config::SCHEMA_VERSION));
    record.insert("status".to_string(), json!(status));
    record.insert("problem".to_string(), config_echo);
    record.insert(
        "model".to_string(),
        json!({
            "x": to_clean_value(model.x()),
            "gamma": to_clean_value(&model.gamma().describe()),
        }),
    );
    record.insert("assumptions".to_string(), to_clean_value(assumptions));
    if let Some(g) = solution {
        let segments: Vec<Value> = g
            .segments()
            .iter()
            .map(|s| {
                json!({
                    "hi": num(s.hi),
                    "hi_closed": s.hi_closed,
                    "piece": to_clean_value(&s.piece),
                })
            })
            .collect();
        record.insert(
            "solution".to_string(),
            json!({
                "segments": segments,
                "params": {
                    "q": g.meta.q.map(num),
                    "q_prime": g.meta.q_prime.map(num),
                    "c": g.meta.c.map(num),
                    "r": g.meta.r.map(num),
                    "lambda": g.meta.lambda.map(num),
                    "threshold": g.meta.threshold.map(num),
                },
                "jump_locations": g.meta.jump_locations.iter().map(|b| num(*b)).collect::<Vec<_>>(),
                "max_jump": num(g.max_jump()),
                "objective": num(g.meta.objective),
                "budget": num(g.meta.budget),
                "budget_residual": num(g.meta.budget_residual),
                "uniqueness": to_clean_value(&g.meta.uniqueness),
                "checks": to_clean_value(&g.meta.checks),
            }),
        );
    }
    if let Some(w) = witness {
        record.insert(
            "witness".to_string(),
            json!({
                "description": w.description,
                "elements": w
                    .elements
                    .iter()
                    .map(|e| {
                        json!({
                            "param": num(e.param),
                            "objective": num(e.objective),
                            "budget_residual": num(e.solution.meta.budget_residual),
                        })
                    })
                    .collect::<Vec<_>>(),
            }),
        );
    }
    Value::Object(record)
}

pub const GAP_CURVE_HEADER: &str = "eps,metric,rho_at_Z,rho_at_X,solvency_gap,mc_stderr";

pub fn write_gap_curve(path: &Path, report: &RobustnessReport) -> std::io::Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{GAP_CURVE_HEADER}")?;
    for pt in &report.gap_curve {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sig17(pt.eps),
            report.metric.label(),
            sig17(pt.rho_at_z),
            sig17(pt.rho_at_x),
            sig17(pt.gap),
            sig17(pt.mc_stderr)
        )?;
    }
    std::fs::write(path, out)
}

pub fn report_record(report: &RobustnessReport) -> Value {
    to_clean_value(report)
}

/// Two-column comparison of a pair of probes on the same instance, one row
/// per quantity, size rows sorted by decreasing eps.
pub fn comparison_table(
    label_a: &str,
    label_b: &str,
    a: &RobustnessReport,
    b: &RobustnessReport,
) -> String {
    let mut rows: Vec<(String, String, String)> = Vec::new();
    rows.push((
        "objective".to_string(),
        sig17(a.solution_meta.objective),
        sig17(b.solution_meta.objective),
    ));
    rows.push((
        "jump_size".to_string(),
        sig17(max_jump_from_meta(a)),
        sig17(max_jump_from_meta(b)),
    ));
    for (pa, pb) in a.gap_curve.iter().zip(&b.gap_curve) {
        rows.push((
            format!("gap eps={}", sig17(pa.eps)),
            sig17(pa.gap),
            sig17(pb.gap),
        ));
    }
    rows.push((
        "limit_gap".to_string(),
        sig17(a.limit_gap_estimate),
        sig17(b.limit_gap_estimate),
    ));
    let verdict_label = |v: &riskopt_core::probe::Verdict| -> String {
        serde_json::to_value(v)
            .ok()
            .and_then(|j| j.as_str().map(str::to_string))
            .unwrap_or_else(|| format!("{v:?}"))
    };
    rows.push((
        "verdict".to_string(),
        verdict_label(&a.verdict),
        verdict_label(&b.verdict),
    ));

    let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(8).max("quantity".len());
    let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(8).max(label_a.len());
    let mut out = String::new();
    out.push_str(&format!(
        "{:<w0$}  {:<w1$}  {}\n",
        "quantity", label_a, label_b,
    ));
    for (name, va, vb) in rows {
        out.push_str(&format!("{name:<w0$}  {va:<w1$}  {vb}\n"));
    }
    out
}

fn max_jump_from_meta(r: &RobustnessReport) -> f64 {
    // The report carries the solution metadata, not the function itself;
    // jump locations without sizes mean zero only when the list is empty.
    if r.solution_meta.jump_locations.is_empty() {
        0.0
    } else {
        r.solution_meta.max_jump
    }
}
