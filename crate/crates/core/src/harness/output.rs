use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::diagnostics::json_line;
use crate::error::Result;
use crate::harness::config::Format;
use crate::harness::run::ExperimentResult;
use crate::regress::ReportRow;

/// Marker line written when a run was interrupted.
pub fn truncation_marker(result: &ExperimentResult) -> String {
    let done = result.outcomes.len().max(result.diagnostics.len());
    format!("truncated: {done} of {} trials completed", result.config.trials)
}

/// CSV body: header plus one row per completed trial. Deterministic for a
/// given configuration.
pub fn csv_body(result: &ExperimentResult) -> String {
    let mut out = String::from(ReportRow::CSV_HEADER);
    out.push('\n');
    for o in &result.outcomes {
        out.push_str(&o.row.to_csv());
        out.push('\n');
    }
    out
}

/// Full CSV file: `#` comment header (the only place a timestamp appears),
/// body, and a trailing truncation comment when interrupted.
pub fn csv_document(result: &ExperimentResult) -> Result<String> {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = format!(
        "# sketchreg {}\n# config: {}\n# started_unix: {stamp}\n",
        result.config.experiment,
        serde_json::to_string(&result.config)?
    );
    out.push_str(&csv_body(result));
    if result.truncated {
        out.push_str(&format!("# {}\n", truncation_marker(result)));
    }
    Ok(out)
}

fn summary_value(result: &ExperimentResult) -> Result<Value> {
    let mut v = json!({
        "config": result.config,
        "truncated": result.truncated,
    });
    if let Some(s) = &result.summary {
        v["summary"] = serde_json::to_value(s)?;
    }
    if let Some(s) = &result.diagnostics_summary {
        v["summary"] = serde_json::to_value(s)?;
    }
    let events: Vec<Value> = result
        .outcomes
        .iter()
        .filter_map(|o| {
            let ev = o.events.as_ref()?;
            let j = ev.witness_column?;
            Some(json!({
                "trial": o.row.trial,
                "witness_column": j,
                "intersect_row": ev.intersect_row,
                "intersect_sign": ev.intersect_sign,
                "witness_err": o.witness_err,
                "linf_pass": o.check.linf_pass,
            }))
        })
        .collect();
    if result.outcomes.iter().any(|o| o.events.is_some()) {
        v["events"] = Value::Array(events);
    }
    if result.outcomes.iter().any(|o| o.instance.is_some()) {
        let d1 = result
            .outcomes
            .iter()
            .filter(|o| o.instance.as_deref() == Some("d1"))
            .count();
        v["distribution_counts"] = json!({"d1": d1, "d2": result.outcomes.len() - d1});
    }
    Ok(v)
}

/// JSON-lines document: one object per trial (or per diagnostic record),
/// then a final `{"summary": …}` object.
pub fn json_document(result: &ExperimentResult) -> Result<String> {
    let mut out = String::new();
    for o in &result.outcomes {
        out.push_str(&serde_json::to_string(&o.row)?);
        out.push('\n');
    }
    for t in &result.diagnostics {
        let mut push = |name: &str, v: Value| -> Result<()> {
            let mut v = v;
            v["trial"] = json!(t.trial);
            out.push_str(&json_line(name, &v)?);
            out.push('\n');
            Ok(())
        };
        push("embedding_distortion", serde_json::to_value(&t.distortion)?)?;
        push("amp_error", json!({"error": t.amp_error}))?;
        if let Some(a) = &t.aips {
            push("aips", serde_json::to_value(a)?)?;
        }
        match &t.neumann {
            Ok(r) => push("neumann", serde_json::to_value(r)?)?,
            Err(msg) => push("neumann", json!({"rejected": msg}))?,
        }
        push("gaussian_norm_identity", serde_json::to_value(&t.norm_identity)?)?;
    }
    let mut last = summary_value(result)?;
    if result.truncated {
        last["truncation"] = json!(truncation_marker(result));
    }
    out.push_str(&serde_json::to_string(&last)?);
    out.push('\n');
    Ok(out)
}

/// Path of the summary sidecar written next to a CSV file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

/// Writes the result in `format` to `out` (stdout when `None`). CSV output
/// to a file also writes the summary sidecar; CSV to stdout appends the
/// summary as a trailing comment.
pub fn write_result(result: &ExperimentResult, format: Format, out: Option<&Path>) -> Result<()> {
    match (format, out) {
        (Format::Csv, Some(path)) => {
            fs::write(path, csv_document(result)?)?;
            fs::write(
                sidecar_path(path),
                serde_json::to_string_pretty(&summary_value(result)?)? + "\n",
            )?;
        }
        (Format::Csv, None) => {
            let mut doc = csv_document(result)?;
            doc.push_str(&format!(
                "# summary: {}\n",
                serde_json::to_string(&summary_value(result)?)?
            ));
            std::io::stdout().write_all(doc.as_bytes())?;
        }
        (Format::Json, Some(path)) => fs::write(path, json_document(result)?)?,
        (Format::Json, None) => std::io::stdout().write_all(json_document(result)?.as_bytes())?,
    }
    Ok(())
}
