//! Command-line driver for the `ising-relax` engines: configuration,
//! per-step metrics, history comparison, and iteration-count sweeps.

pub mod compare;
pub mod config;
pub mod error;
pub mod metrics;
pub mod runs;

pub use compare::{compare_histories, Comparison};
pub use config::{parse_config, Invocation, RunConfig};
pub use error::{HarnessError, Result};
pub use metrics::{collect_metrics, RunMetrics};

use serde_json::Value;

/// Runs a parsed invocation and returns the lines to print on success.
pub fn dispatch(invocation: Invocation) -> Result<Vec<String>> {
    match invocation {
        Invocation::Help(text) => Ok(vec![text.trim_end().to_string()]),
        Invocation::Compare(args) => {
            let report = runs::compare_files(&args)?;
            if report.equal {
                Ok(vec![report.to_string()])
            } else {
                Err(HarnessError::Mismatch(report.to_string()))
            }
        }
        Invocation::Run(cfg) => {
            let summary = runs::execute(&cfg)?;
            let mut lines = headline(&summary);
            lines.extend(runs::output_files(&cfg).iter().map(|p| format!("wrote {}", p.display())));
            Ok(lines)
        }
    }
}

fn headline(summary: &Value) -> Vec<String> {
    let r = &summary["results"];
    let mut lines = Vec::new();
    if let Some(m) = r.get("measured") {
        let exact = &m["exact"];
        for (name, key, exact_key) in [("E", "energy", "mean_energy"), ("|M|", "abs_magnetization", "mean_abs_magnetization")] {
            let est: ising_relax::observables::Estimate =
                serde_json::from_value(m["observables"][key].clone()).expect("estimate round-trips");
            lines.push(runs::describe(name, &est, exact[exact_key].as_f64()));
        }
    }
    if let Some(a) = r.get("aggregates") {
        lines.push(format!(
            "steps {} mean g {:.3} mean f {:.3} events {}",
            a["steps"], a["mean_g"].as_f64().unwrap_or(f64::NAN), a["mean_f"].as_f64().unwrap_or(f64::NAN), a["events"]
        ));
    }
    if let Some(x) = r.get("exact") {
        lines.push(format!("<E> = {} <|M|> = {} ln Z = {}", x["mean_energy"], x["mean_abs_magnetization"], x["log_partition"]));
    }
    if let Some(rows) = r.get("sweep").and_then(Value::as_array) {
        for row in rows {
            lines.push(format!(
                "N = {:>3}  mean g {:.3} ± {:.3}  mean f {:.3} ± {:.3}",
                row["n_pes"], row["mean_g"].as_f64().unwrap_or(f64::NAN), row["sd_g"].as_f64().unwrap_or(f64::NAN),
                row["mean_f"].as_f64().unwrap_or(f64::NAN), row["sd_f"].as_f64().unwrap_or(f64::NAN)
            ));
        }
    }
    if let Some(n) = r.get("events") {
        lines.push(format!("events {n}"));
    }
    lines
}
