//! File formats: instance JSON, dense matrices as CSV or JSON, and the
//! number formatting shared by reports.
//!
//! An instance file pairs a partition with an objective:
//!
//! ```json
//! {
//!   "partition": {"n": 3, "groups": [[0, 1], [2]]},
//!   "objective": {"kind": "least_squares",
//!                 "x": {"rows": 2, "cols": 3, "data": [1, 0, 0, 0, 1, 1]},
//!                 "y": [1.0, 2.0], "ridge": 0.1}
//! }
//! ```
//!
//! `kind` is one of `quadratic` (`a`, `b`, `c`), `least_squares` or
//! `logistic` (`x`, `y`, `ridge`). Matrices are row-major.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::objectives::{
    default_ridge, least_squares, Objective, QuadraticObjective, RidgeLogisticObjective,
};
use crate::partition::GroupPartition;

/// Significant digits kept in JSON reports.
pub const REPORT_DIGITS: usize = 12;

fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", REPORT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal form of `x` rounded to [`REPORT_DIGITS`] significant digits.
pub fn format_sig(x: f64) -> String {
    round_sig(x).to_string()
}

/// Rounds every non-integer number in `value` to [`REPORT_DIGITS`]
/// significant digits, in place.
pub fn round_json_floats(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json_floats),
        Value::Object(map) => map.values_mut().for_each(round_json_floats),
        _ => {}
    }
}

/// Serializes `value` as pretty JSON with rounded floats.
pub fn to_report_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_json_floats(&mut v);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch { expected: self.rows * self.cols, got: self.data.len() });
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        MatrixJson { rows: m.nrows(), cols: m.ncols(), data: m.transpose().as_slice().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    /// `½βᵀAβ + bᵀβ + c`.
    Quadratic {
        a: MatrixJson,
        b: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
    /// `‖y − Xβ‖² + ρ‖β‖²`; `ridge` defaults to `1e-6·‖X‖_F²/n`.
    LeastSquares { x: MatrixJson, y: Vec<f64>, ridge: Option<f64> },
    /// `Σ log(1 + exp(−y_i x_iᵀβ)) + ρ‖β‖²` with labels in {−1, 1}.
    Logistic { x: MatrixJson, y: Vec<f64>, ridge: f64 },
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Box<dyn Objective>> {
        Ok(match self {
            ObjectiveSpec::Quadratic { a, b, c } => {
                let a = a.to_matrix()?;
                let b = DVector::from_column_slice(b);
                Box::new(QuadraticObjective::new(a, b, *c, true)?)
            }
            ObjectiveSpec::LeastSquares { x, y, ridge } => {
                let x = x.to_matrix()?;
                let y = DVector::from_column_slice(y);
                let rho = ridge.unwrap_or_else(|| default_ridge(&x));
                let obj = least_squares(&x, &y, rho)?;
                if !obj.is_strictly_convex() {
                    return Err(Error::NotStrictlyConvex(
                        "XᵀX + ρI is singular; pass a positive ridge".into(),
                    ));
                }
                Box::new(obj)
            }
            ObjectiveSpec::Logistic { x, y, ridge } => {
                Box::new(RidgeLogisticObjective::new(x.to_matrix()?, DVector::from_column_slice(y), *ridge)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub partition: GroupPartition,
    pub objective: ObjectiveSpec,
}

impl InstanceFile {
    /// Builds the objective and checks it against the partition.
    pub fn build(&self) -> Result<(Box<dyn Objective>, Arc<GroupPartition>)> {
        let obj = self.objective.build()?;
        self.partition.check_dim(obj.dim())?;
        Ok((obj, Arc::new(self.partition.clone())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        f.write_all(to_report_json_exact(self)?.as_bytes())?;
        Ok(())
    }
}

/// Pretty JSON without rounding, for inputs that must round-trip exactly.
pub fn to_report_json_exact<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn load_partition(path: &Path) -> Result<GroupPartition> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Reads a headerless numeric CSV into a matrix.
pub fn read_matrix_csv<R: Read>(input: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::DimensionMismatch { expected: c, got: record.len() })
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("row {}: not a number: {field:?}", rows + 1)))?;
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("row {}: non-finite entry", rows + 1)));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::InvalidArgument("empty matrix".into()))?;
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn read_matrix_csv_path(path: &Path) -> Result<DMatrix<f64>> {
    read_matrix_csv(File::open(path)?)
}

/// Writes a matrix as headerless CSV with full precision.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix from `.json` (as [`MatrixJson`]) or any other extension as CSV.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let m: MatrixJson = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        m.to_matrix()
    } else {
        read_matrix_csv_path(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(format_sig(0.1 + 0.2), "0.3");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(-2.5e-20), "-0.000000000000000000025");
        assert_eq!(format_sig(0.0), "0");
        let mut v = serde_json::json!({"a": [1.0 / 3.0, 7], "b": {"c": 1.0 / 7.0}});
        round_json_floats(&mut v);
        assert_eq!(v["a"][0].as_f64(), Some(0.333333333333));
        assert_eq!(v["a"][1].as_u64(), Some(7));
        assert_eq!(v["b"]["c"].as_f64(), Some(0.142857142857));
    }

    #[test]
    fn matrix_json_is_row_major() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let j = MatrixJson::from(&m);
        assert_eq!(j.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(j.to_matrix().unwrap(), m);
        let bad = MatrixJson { rows: 2, cols: 2, data: vec![1.0] };
        assert!(bad.to_matrix().is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, -1e-300, 1.0 / 3.0, 12345.678]);
        let mut buf = Vec::new();
        write_matrix_csv(&m, &mut buf).unwrap();
        assert_eq!(read_matrix_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn csv_rejects_ragged_and_text() {
        assert!(read_matrix_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(read_matrix_csv("1,x\n".as_bytes()).is_err());
        assert!(read_matrix_csv("".as_bytes()).is_err());
        let m = read_matrix_csv("# comment\n1, 2\n\n3,4\n".as_bytes()).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn instance_file_parses_and_builds() {
        let text = r#"{
            "partition": {"n": 3, "groups": [[0, 1], [2]]},
            "objective": {"kind": "least_squares",
                          "x": {"rows": 2, "cols": 3, "data": [1, 0, 0, 0, 1, 1]},
                          "y": [1.0, 2.0], "ridge": 0.1}
        }"#;
        let inst: InstanceFile = serde_json::from_str(text).unwrap();
        let (obj, p) = inst.build().unwrap();
        assert_eq!(obj.dim(), 3);
        assert_eq!(p.num_groups(), 2);
        assert!((obj.value(&DVector::zeros(3)) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_partition_is_rejected() {
        let text = r#"{
            "partition": {"n": 3, "groups": [[0, 1], [1, 2]]},
            "objective": {"kind": "quadratic",
                          "a": {"rows": 3, "cols": 3, "data": [1,0,0,0,1,0,0,0,1]},
                          "b": [0, 0, 0]}
        }"#;
        let err = serde_json::from_str::<InstanceFile>(text).unwrap_err();
        assert!(err.to_string().contains("group"), "{err}");
    }

    #[test]
    fn dimension_mismatch_between_partition_and_objective() {
        let inst = InstanceFile {
            partition: GroupPartition::singletons(2),
            objective: ObjectiveSpec::Quadratic {
                a: MatrixJson::from(&DMatrix::<f64>::identity(3, 3)),
                b: vec![0.0; 3],
                c: 0.0,
            },
        };
        assert!(matches!(inst.build(), Err(Error::DimensionMismatch { .. })));
    }
}
