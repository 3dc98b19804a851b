//! CSV / JSON / text renderings of experiment and verify results.

use std::fmt::Write as _;

use frameless_core::checks::VerifyReport;
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

/// Metrics of one experiment, in report order.
pub const METRICS: [&str; 8] = [
    "shots",
    "p0_empirical",
    "p0_analytic",
    "mean",
    "stderr",
    "analytic",
    "verdict",
    "runtime_ms",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub shots: u64,
    pub p0_empirical: Option<f64>,
    pub p0_analytic: f64,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub analytic: f64,
    pub verdict: Verdict,
    /// Only filled in with `--timing`, so reports stay reproducible.
    pub runtime_ms: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Entangled,
    NotDetected,
    Undefined,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Entangled => "entangled",
            Verdict::NotDetected => "not-detected",
            Verdict::Undefined => "undefined",
        }
    }
}

fn number(x: Option<f64>) -> Value {
    x.and_then(serde_json::Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

impl ExperimentReport {
    fn values(&self) -> [Value; 8] {
        [
            Value::from(self.shots),
            number(self.p0_empirical),
            number(Some(self.p0_analytic)),
            number(self.mean),
            number(self.stderr),
            number(Some(self.analytic)),
            Value::from(self.verdict.as_str()),
            number(self.runtime_ms),
        ]
    }

    pub fn to_json(&self) -> Value {
        let map: Map<String, Value> = METRICS
            .iter()
            .map(|k| k.to_string())
            .zip(self.values())
            .collect();
        Value::Object(map)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => format!("{}\n", serde_json::to_string_pretty(&self.to_json()).expect("plain values")),
            Format::Csv => {
                let mut out = String::from("metric,value\n");
                for (k, v) in METRICS.iter().zip(self.values()) {
                    let v = match v {
                        Value::Null => String::new(),
                        Value::String(s) => s,
                        other => other.to_string(),
                    };
                    let _ = writeln!(out, "{k},{v}");
                }
                out
            }
            Format::Text => {
                let mut out = String::new();
                for (k, v) in METRICS.iter().zip(self.values()) {
                    let v = match v {
                        Value::Null => "-".to_string(),
                        Value::String(s) => s,
                        other => other.to_string(),
                    };
                    let _ = writeln!(out, "{k:<13} {v}");
                }
                out
            }
        }
    }
}

pub fn render_verify(report: &VerifyReport, format: Format) -> String {
    match format {
        Format::Text => {
            let mut out = format!("{:<28} {:<9} {:>2} {:>10} {:>10}  result\n", "check", "module", "d", "worst", "tolerance");
            for o in &report.outcomes {
                let _ = writeln!(
                    out,
                    "{:<28} {:<9} {:>2} {:>10.2e} {:>10.1e}  {}",
                    o.id,
                    o.module,
                    o.d,
                    o.worst,
                    o.tolerance,
                    if o.passed { "pass" } else { "FAIL" }
                );
            }
            let _ = writeln!(
                out,
                "{} of {} checks passed; manifest coverage {}/{}",
                report.outcomes.iter().filter(|o| o.passed).count(),
                report.outcomes.len(),
                report.covered(),
                frameless_core::checks::MANIFEST.len()
            );
            out
        }
        Format::Csv => {
            let mut out = String::from("check,module,d,trials,worst,tolerance,passed\n");
            for o in &report.outcomes {
                let _ = writeln!(out, "{},{},{},{},{},{},{}", o.id, o.module, o.d, o.trials, o.worst, o.tolerance, o.passed);
            }
            out
        }
        Format::Json => {
            let checks: Vec<Value> = report
                .outcomes
                .iter()
                .map(|o| {
                    serde_json::json!({
                        "check": o.id,
                        "module": o.module,
                        "d": o.d,
                        "trials": o.trials,
                        "worst": o.worst,
                        "tolerance": o.tolerance,
                        "passed": o.passed,
                    })
                })
                .collect();
            let value = serde_json::json!({
                "passed": report.all_passed(),
                "manifest": frameless_core::checks::MANIFEST.len(),
                "covered": report.covered(),
                "checks": checks,
            });
            format!("{}\n", serde_json::to_string_pretty(&value).expect("plain values"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        ExperimentReport {
            shots: 10,
            p0_empirical: Some(0.3),
            p0_analytic: 0.25,
            mean: Some(-0.4),
            stderr: Some(0.05),
            analytic: -0.5,
            verdict: Verdict::Entangled,
            runtime_ms: None,
        }
    }

    #[test]
    fn csv_has_one_row_per_metric() {
        let csv = sample().render(Format::Csv);
        assert_eq!(csv.lines().count(), METRICS.len() + 1);
        assert!(csv.contains("verdict,entangled\n"));
        assert!(csv.contains("runtime_ms,\n"));
    }

    #[test]
    fn json_is_flat_with_all_keys() {
        let v: Value = serde_json::from_str(&sample().render(Format::Json)).unwrap();
        let obj = v.as_object().unwrap();
        for k in METRICS {
            assert!(obj.contains_key(k), "{k}");
            assert!(!obj[k].is_object() && !obj[k].is_array());
        }
        assert_eq!(obj["mean"], Value::from(-0.4));
    }
}
