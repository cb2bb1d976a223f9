//! Parameter sweeps: one experiment per grid point, aggregated into a tidy
//! CSV with the grid coordinates as columns.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::Value;

use super::config::ExperimentConfig;
use super::runner::{run_experiment, ExperimentError, ExperimentOutcome, Stage};

/// Dotted config paths mapped to the values to sweep over.
pub type Grid = BTreeMap<String, Vec<Value>>;

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub overrides: BTreeMap<String, Value>,
    pub output_dir: PathBuf,
    /// `ok` or the stage-tagged failure message.
    pub status: String,
    pub map: Option<f64>,
    pub ndcg10: Option<f64>,
    pub err10: Option<f64>,
    pub propensity_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub keys: Vec<String>,
    pub rows: Vec<SweepRow>,
    /// Successful outcomes, indexed like `rows` (failures hold `None`).
    pub outcomes: Vec<Option<ExperimentOutcome>>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for key in &self.keys {
            out.push_str(key);
            out.push(',');
        }
        out.push_str("status,map,ndcg@10,err@10,propensity_mse,output_dir\n");
        for row in &self.rows {
            for key in &self.keys {
                out.push_str(&scalar(&row.overrides[key]));
                out.push(',');
            }
            let fmt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.status.replace(',', ";"),
                fmt(&row.map),
                fmt(&row.ndcg10),
                fmt(&row.err10),
                fmt(&row.propensity_mse),
                row.output_dir.display(),
            ));
        }
        out
    }
}

fn scalar(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let mut cursor = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = cursor
            .as_object_mut()
            .ok_or_else(|| format!("{path}: {} is not an object", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cursor = map
            .get_mut(*part)
            .ok_or_else(|| format!("{path}: missing key {part}"))?;
    }
    unreachable!("paths are nonempty")
}

fn grid_points(grid: &Grid) -> Vec<BTreeMap<String, Value>> {
    let mut points: Vec<BTreeMap<String, Value>> = vec![BTreeMap::new()];
    for (key, values) in grid {
        let mut next = Vec::with_capacity(points.len() * values.len());
        for point in &points {
            for value in values {
                let mut extended = point.clone();
                extended.insert(key.clone(), value.clone());
                next.push(extended);
            }
        }
        points = next;
    }
    points
}

/// Run one experiment per grid point. An empty grid degenerates to a single
/// base run. Per-point failures are recorded in the table and the sweep moves
/// on.
pub fn run_sweep(base: &ExperimentConfig, grid: &Grid) -> Result<SweepTable, ExperimentError> {
    let keys: Vec<String> = grid.keys().cloned().collect();
    let base_value = serde_json::to_value(base).map_err(|e| ExperimentError {
        stage: Stage::DataLoad,
        message: e.to_string(),
    })?;

    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for (idx, overrides) in grid_points(grid).into_iter().enumerate() {
        let output_dir = base.output_dir.join(format!("point_{idx:03}"));
        let configured: Result<ExperimentConfig, String> = (|| {
            let mut value = base_value.clone();
            for (path, v) in &overrides {
                set_path(&mut value, path, v.clone())?;
            }
            set_path(
                &mut value,
                "output_dir",
                Value::String(output_dir.to_string_lossy().into_owned()),
            )?;
            serde_json::from_value(value).map_err(|e| e.to_string())
        })();

        let result = configured
            .map_err(|message| ExperimentError {
                stage: Stage::DataLoad,
                message,
            })
            .and_then(|config| run_experiment(&config));
        match result {
            Ok(outcome) => {
                rows.push(SweepRow {
                    overrides,
                    output_dir,
                    status: "ok".into(),
                    map: Some(outcome.report.mean.map),
                    ndcg10: outcome.report.mean_ndcg_at(10),
                    err10: outcome.report.mean_err_at(10),
                    propensity_mse: outcome.report.propensity_mse,
                });
                outcomes.push(Some(outcome));
            }
            Err(err) => {
                rows.push(SweepRow {
                    overrides,
                    output_dir,
                    status: err.to_string(),
                    map: None,
                    ndcg10: None,
                    err10: None,
                    propensity_mse: None,
                });
                outcomes.push(None);
            }
        }
    }
    Ok(SweepTable {
        keys,
        rows,
        outcomes,
    })
}
