//! Machine-readable report files. Reports deliberately omit wall-clock
//! timings so identical inputs yield byte-identical files; timings go to
//! stdout only. The eval report is the exception: latency measurement is its
//! purpose.

use std::path::Path;

use serde_json::{json, Value};

use vkg::alert::Alert;
use vkg::eval::{EvalReport, SpeedupReport};
use vkg::query::QueryResult;

type CmdResult = Result<(), Box<dyn std::error::Error>>;

fn write_json(value: &Value, path: &Path) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_query_report(result: &QueryResult, path: &Path) -> CmdResult {
    let bindings: Vec<Value> = result
        .bindings
        .iter()
        .map(|b| {
            json!({
                "name": b.name,
                "members": b.members.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
                "provenance": b.provenance,
            })
        })
        .collect();
    let verdicts: Vec<Value> = result
        .verdicts
        .iter()
        .map(|v| {
            json!({
                "name": v.name,
                "value": if v.value { "yes" } else { "no" },
                "witness": v.witness.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
                "context": v.context.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                "rule": v.rule,
            })
        })
        .collect();
    let trace: Vec<Value> = result
        .trace
        .iter()
        .map(|t| json!({ "clause": t.clause, "out": t.out, "part": t.part.name() }))
        .collect();
    write_json(&json!({ "bindings": bindings, "verdicts": verdicts, "trace": trace }), path)
}

fn alert_value(a: &Alert) -> Value {
    json!({
        "product": a.product.to_string(),
        "vulnerability": a.vulnerability.to_string(),
        "phase": match a.phase {
            vkg::alert::AlertPhase::Factual => "factual",
            vkg::alert::AlertPhase::SimilarProduct => "similar-product",
        },
        "score": a.score,
        "rule": a.rule,
        "neighbor": a.evidence.neighbor.as_ref().map(|n| n.to_string()),
        "similarity": a.evidence.similarity,
        "shared_dependencies": a.evidence.shared_dependencies,
        "total_dependencies": a.evidence.total_dependencies,
        "evidence_triples": a.evidence.matched_triples.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
    })
}

pub fn write_alert_report(
    factual: &[Alert],
    similar: &[Alert],
    diagnostics: &[String],
    path: &Path,
) -> CmdResult {
    write_json(
        &json!({
            "factual": factual.iter().map(alert_value).collect::<Vec<_>>(),
            "similar_product": similar.iter().map(alert_value).collect::<Vec<_>>(),
            "diagnostics": diagnostics,
        }),
        path,
    )
}

pub fn write_eval_report(
    reports: &[EvalReport],
    speedup: Option<&SpeedupReport>,
    path: &Path,
) -> CmdResult {
    write_json(
        &json!({
            "models": reports,
            "latency_comparison": speedup,
        }),
        path,
    )
}

#[derive(serde::Serialize)]
pub struct SweepRow {
    pub dimension: usize,
    pub min_term_frequency: u64,
    pub map_graph: f64,
    pub map_vector: f64,
    pub map_vkg: f64,
}

pub fn write_sweep_report(rows: &[SweepRow], path: &Path) -> CmdResult {
    write_json(&json!({ "sweep": rows }), path)
}
