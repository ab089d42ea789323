//! Versioned CSV and JSON output formats.
//!
//! CSV files open with a `# schema: <name>/v<k>` comment line followed by a
//! column header. JSON documents carry a top-level `"schema"` field. Radio
//! ids are written 1-based, as in trace files.

use serde::Serialize;
use serde_json::{json, Value};

use crate::atelnet::{LinkDecision, TopologyEstimate};
use crate::error::{Error, Result};
use crate::trace::{ActivityTrace, LinkMatrix};

pub const DECISIONS_SCHEMA: &str = "linkscope.decisions/v1";
pub const REPORT_SCHEMA: &str = "linkscope.report/v1";
pub const ANALYSIS_SCHEMA: &str = "linkscope.mc-analysis/v1";
pub const PROFILE_SCHEMA: &str = "linkscope.profile/v1";
pub const SCORE_SCHEMA: &str = "linkscope.score/v1";
pub const SIM_SCHEMA: &str = "linkscope.simulation/v1";
pub const TRIALS_SCHEMA: &str = "linkscope.trials/v1";
pub const SUMMARY_SCHEMA: &str = "linkscope.summary/v1";
pub const ROC_SCHEMA: &str = "linkscope.roc/v1";

pub const DECISION_COLUMNS: &str = "i,j,tau_hat,statistic,threshold,decision,method";

pub fn schema_line(schema: &str) -> String {
    format!("# schema: {schema}\n")
}

/// Decision table with 1-based radio ids.
pub fn decisions_csv(est: &TopologyEstimate, method: &str) -> String {
    let mut out = schema_line(DECISIONS_SCHEMA);
    out.push_str(DECISION_COLUMNS);
    out.push('\n');
    for d in &est.details {
        out.push_str(&format!(
            "{},{},{},{:e},{:e},{},{}\n",
            d.i + 1,
            d.j + 1,
            d.tau_hat,
            d.statistic,
            d.threshold,
            u8::from(d.decision),
            method
        ));
    }
    out
}

/// Detected links from a decision table; `m` defaults to the largest id.
pub fn parse_decisions_csv(text: &str, m: Option<usize>) -> Result<LinkMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == schema_line(DECISIONS_SCHEMA).trim() => {}
        Some((idx, l)) => {
            return Err(Error::MalformedHeader {
                line: idx + 1,
                msg: format!("expected `# schema: {DECISIONS_SCHEMA}`, got `{l}`"),
            })
        }
        None => {
            return Err(Error::MalformedHeader {
                line: 1,
                msg: "empty decision file".into(),
            })
        }
    }
    match lines.next() {
        Some((_, l)) if l.trim() == DECISION_COLUMNS => {}
        Some((idx, l)) => {
            return Err(Error::MalformedHeader {
                line: idx + 1,
                msg: format!("expected columns `{DECISION_COLUMNS}`, got `{l}`"),
            })
        }
        None => {
            return Err(Error::MalformedHeader {
                line: 2,
                msg: "missing column header".into(),
            })
        }
    }
    let mut pairs = Vec::new();
    let mut max_id = 0;
    for (idx, l) in lines {
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        let bad = |msg: String| Error::MalformedRow { line: idx + 1, msg };
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields, got {}", f.len())));
        }
        let id = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(bad(format!("bad radio id `{s}`"))),
            }
        };
        let (i, j) = (id(f[0])?, id(f[1])?);
        max_id = max_id.max(i).max(j);
        match f[5] {
            "1" | "true" => pairs.push((i - 1, j - 1)),
            "0" | "false" => {}
            other => return Err(bad(format!("bad decision `{other}`"))),
        }
    }
    let m = m.unwrap_or(max_id);
    LinkMatrix::from_pairs(m, pairs)
}

#[derive(Serialize)]
struct TraceMeta {
    num_radios: usize,
    num_samples: u64,
    sample_period_s: f64,
}

fn decision_json(d: &LinkDecision) -> Value {
    json!({
        "i": d.i + 1,
        "j": d.j + 1,
        "tau_hat": d.tau_hat,
        "dof": d.dof,
        "statistic": d.statistic,
        "threshold": d.threshold,
        "decision": d.decision,
        "effect": d.effect,
        "overflow": d.overflow,
    })
}

/// Full inference report: parameters, trace metadata, links, decisions.
pub fn decisions_json(
    est: &TopologyEstimate,
    method: &str,
    params: &impl Serialize,
    trace: &ActivityTrace,
) -> Result<Value> {
    let meta = TraceMeta {
        num_radios: trace.num_radios(),
        num_samples: trace.num_samples(),
        sample_period_s: trace.sample_period_s(),
    };
    Ok(json!({
        "schema": REPORT_SCHEMA,
        "method": method,
        "params": serde_json::to_value(params)?,
        "trace": serde_json::to_value(meta)?,
        "links": est.links.links().iter().map(|&(i, j)| [i + 1, j + 1]).collect::<Vec<_>>(),
        "decisions": est.details.iter().map(decision_json).collect::<Vec<_>>(),
    }))
}
