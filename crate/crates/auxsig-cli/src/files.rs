//! Model file loading.
//!
//! A model file is JSON holding exactly one of two shapes:
//!
//! * generic two-model problem — `normal` and `faulty` sections with
//!   `theta_map`/`meas_map`/`noise_map` (row-major nested arrays) and optional
//!   `ineq_lhs`/`ineq_rhs`, plus a `cost` matrix and optional `noise_bound`;
//! * distance-protection spec — impedances `z_minus`/`z_plus`/`z_fault` as
//!   `{re, im}` pairs.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use auxsig::distance::{Phasor, PhasorModelSpec};
use auxsig::model::{DesignProblem, StaticModel};

#[derive(Debug)]
pub struct FileError(pub String);

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for FileError {}

pub enum ModelFile {
    Generic(DesignProblem),
    Distance(PhasorModelSpec),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    theta_map: Vec<Vec<f64>>,
    meas_map: Vec<Vec<f64>>,
    noise_map: Vec<Vec<f64>>,
    #[serde(default)]
    ineq_lhs: Vec<Vec<f64>>,
    #[serde(default)]
    ineq_rhs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenericFile {
    normal: ModelSection,
    faulty: ModelSection,
    cost: Vec<Vec<f64>>,
    #[serde(default = "default_noise_bound")]
    noise_bound: f64,
}

fn default_noise_bound() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PhasorJson {
    re: f64,
    im: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DistanceFile {
    z_minus: PhasorJson,
    z_plus: PhasorJson,
    z_fault: PhasorJson,
}

fn matrix_from_rows(key: &str, rows: &[Vec<f64>], default_cols: usize) -> Result<DMatrix<f64>, FileError> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, default_cols));
    }
    let cols = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(FileError(format!(
                "key `{key}`: row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

fn section_to_model(role: &str, section: &ModelSection) -> Result<StaticModel, FileError> {
    let key = |name: &str| format!("{role}.{name}");
    let theta_map = matrix_from_rows(&key("theta_map"), &section.theta_map, 0)?;
    let meas_map = matrix_from_rows(&key("meas_map"), &section.meas_map, 0)?;
    let noise_map = matrix_from_rows(&key("noise_map"), &section.noise_map, 0)?;
    let ineq_lhs = matrix_from_rows(&key("ineq_lhs"), &section.ineq_lhs, meas_map.ncols())?;
    let ineq_rhs = DVector::from_vec(section.ineq_rhs.clone());
    Ok(StaticModel::new(theta_map, meas_map, noise_map, ineq_lhs, ineq_rhs))
}

/// Loads a model file, deciding its shape from the top-level keys.
pub fn load_model(path: &Path) -> Result<ModelFile, FileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FileError(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| FileError(format!("{}: {e}", path.display())))?;
    let obj = value
        .as_object()
        .ok_or_else(|| FileError(format!("{}: top level must be an object", path.display())))?;

    let generic_keys = ["normal", "faulty", "cost", "noise_bound"];
    let distance_keys = ["z_minus", "z_plus", "z_fault"];
    let looks_generic = generic_keys.iter().any(|k| obj.contains_key(*k));
    let looks_distance = distance_keys.iter().any(|k| obj.contains_key(*k));
    match (looks_generic, looks_distance) {
        (true, true) => Err(FileError(format!(
            "{}: mixes generic-problem keys with distance-spec keys; use exactly one shape",
            path.display()
        ))),
        (false, false) => Err(FileError(format!(
            "{}: expected either keys `normal`/`faulty`/`cost` or `z_minus`/`z_plus`/`z_fault`",
            path.display()
        ))),
        (true, false) => {
            let file: GenericFile = serde_json::from_value(value)
                .map_err(|e| FileError(format!("{}: {e}", path.display())))?;
            let normal = section_to_model("normal", &file.normal)?;
            let faulty = section_to_model("faulty", &file.faulty)?;
            let cost = matrix_from_rows("cost", &file.cost, 0)?;
            let problem =
                DesignProblem::new(normal, faulty, cost).with_noise_bound(file.noise_bound);
            Ok(ModelFile::Generic(problem))
        }
        (false, true) => {
            let file: DistanceFile = serde_json::from_value(value)
                .map_err(|e| FileError(format!("{}: {e}", path.display())))?;
            Ok(ModelFile::Distance(PhasorModelSpec::new(
                Phasor::new(file.z_minus.re, file.z_minus.im),
                Phasor::new(file.z_plus.re, file.z_plus.im),
                Phasor::new(file.z_fault.re, file.z_fault.im),
            )))
        }
    }
}
