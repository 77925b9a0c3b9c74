//! Table-shaped CSV and JSON report emission, plus validation of the JSON
//! against the schema shipped with the crate.

use serde_json::Value;

use crate::datagen::TrajectorySample;
use crate::{Error, Result};

use super::metrics::MetricsReport;

/// Schema the benchmark JSON is validated against (shipped with the
/// crate; a subset of JSON Schema: type/properties/required/items).
pub const BENCHMARK_SCHEMA: &str = include_str!("../../schema/benchmark.schema.json");

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LatencyEntry {
    pub controller: String,
    pub mean_ms: f64,
}

/// The full benchmark output. The `timing` section holds every wall-clock
/// quantity and is excluded from byte-reproducibility comparisons.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BenchmarkReport {
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub task_a: Vec<MetricsReport>,
    pub task_b: Vec<MetricsReport>,
    pub timing: Vec<LatencyEntry>,
    /// How pooled statistics are defined, recorded for the reader.
    pub notes: Vec<String>,
}

pub const BENCHMARK_REPORT_VERSION: u32 = 1;

impl BenchmarkReport {
    pub fn new(config_hash: String, seed: u64) -> Self {
        BenchmarkReport {
            version: BENCHMARK_REPORT_VERSION,
            config_hash,
            seed,
            task_a: Vec::new(),
            task_b: Vec::new(),
            timing: Vec::new(),
            notes: vec![
                "per-axis STD is the population standard deviation of signed errors pooled over all samples and trials".into(),
                "rmse aggregates per-axis squared errors with the three axes averaged inside the mean".into(),
                "latency_ms and the timing section are wall-clock and non-deterministic".into(),
            ],
        }
    }
}

pub fn benchmark_json(report: &BenchmarkReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// Table-shaped CSV: one row per (trajectory/point, controller).
pub fn task_table_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(
        "trajectory,controller,mae_pos_x,std_pos_x,mae_pos_y,std_pos_y,mae_pos_z,std_pos_z,\
         mae_ori_x,std_ori_x,mae_ori_y,std_ori_y,mae_ori_z,std_ori_z,rmse_pos,rmse_ori\n",
    );
    for r in reports {
        out.push_str(&format!("{},{}", r.trajectory, r.controller));
        for a in 0..6 {
            out.push_str(&format!(",{},{}", r.mae[a], r.std[a]));
        }
        out.push_str(&format!(",{},{}\n", r.rmse_pos, r.rmse_ori));
    }
    out
}

/// Per-sample error log in task axes: `errors_<controller>_<traj>_<trial>.csv`.
pub fn error_log_csv(samples: &[TrajectorySample]) -> String {
    let mut out = String::from("t,ex,ey,ez,eox,eoy,eoz\n");
    for s in samples {
        let e = super::metrics::task_error(&s.desired_pose, &s.measured_pose);
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.t, e[0], e[1], e[2], e[3], e[4], e[5]
        ));
    }
    out
}

/// Validate a value against the subset of JSON Schema used by the shipped
/// schema: `type`, `properties`, `required`, `items`.
fn validate_value(value: &Value, schema: &Value, path: &str) -> Result<()> {
    if let Some(ty) = schema.get("type").and_then(Value::as_str) {
        let ok = match ty {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_i64() || value.is_u64(),
            "boolean" => value.is_boolean(),
            other => {
                return Err(Error::Parse(format!(
                    "schema uses unsupported type '{other}' at {path}"
                )))
            }
        };
        if !ok {
            return Err(Error::Parse(format!(
                "{path}: expected {ty}, found {value:.0}"
            )));
        }
    }
    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        for key in required {
            let key = key.as_str().unwrap_or_default();
            if value.get(key).is_none() {
                return Err(Error::Parse(format!("{path}: missing required key '{key}'")));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        for (key, sub) in props {
            if let Some(v) = value.get(key) {
                validate_value(v, sub, &format!("{path}.{key}"))?;
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(arr) = value.as_array() {
            for (i, v) in arr.iter().enumerate() {
                validate_value(v, items, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

/// Check a serialized benchmark report against the shipped schema.
pub fn validate_benchmark_json(text: &str) -> Result<()> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))?;
    let schema: Value =
        serde_json::from_str(BENCHMARK_SCHEMA).map_err(|e| Error::Parse(format!("schema: {e}")))?;
    validate_value(&value, &schema, "$")
}
