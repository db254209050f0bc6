//! File formats: CSV matrices (points, measurements, traces) and JSON
//! descriptors for basis families and noise models.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{builtin_basis, BasisSet, Family};
use crate::error::{Error, Result};
use crate::online::OnlineTrace;
use crate::qmi::{validate_noise_model, NoiseModel, PartitionedSymmetric};

/// Reads a headerless numeric CSV into a rows-by-columns matrix.
pub fn read_csv_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Invalid(format!("bad number in {path:?}: {e}")))?);
    }
    matrix_from_rows(&rows)
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::Invalid("empty matrix".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Invalid("ragged rows in matrix".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Writes a matrix as CSV (shortest round-trip float formatting, hence
/// byte-stable for identical inputs).
pub fn write_csv_matrix(path: &Path, m: &DMatrix<f64>, header: Option<&[&str]>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_path(path)?;
    if let Some(h) = header {
        wtr.write_record(h)?;
    }
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// JSON noise descriptor: either the energy shorthand
/// `{"type":"energy","q":[[..]]}` meaning `Pi = blkdiag(Q, -I_T)`, or a dense
/// `Pi` with its output split.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum NoiseDescriptor {
    Energy { q: Vec<Vec<f64>> },
    Dense { pi: Vec<Vec<f64>>, output_dim: usize },
}

impl NoiseDescriptor {
    /// Builds and validates the model for `t` samples.
    pub fn build(&self, t: usize) -> Result<NoiseModel> {
        match self {
            NoiseDescriptor::Energy { q } => {
                let qm = matrix_from_rows(q)?;
                NoiseModel::energy_bound(qm, t)
            }
            NoiseDescriptor::Dense { pi, output_dim } => {
                let full = matrix_from_rows(pi)?;
                if full.nrows() != output_dim + t {
                    return Err(Error::DimensionMismatch(format!(
                        "dense Pi is {}x{}, expected {}x{}",
                        full.nrows(),
                        full.ncols(),
                        output_dim + t,
                        output_dim + t
                    )));
                }
                validate_noise_model(PartitionedSymmetric::from_full(&full, *output_dim)?)
            }
        }
    }
}

/// JSON basis descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "snake_case")]
pub enum BasisDescriptor {
    Affine { dim: usize },
    Polynomial { dim: usize, degree: usize },
    Trig6,
}

impl BasisDescriptor {
    pub fn build(&self) -> Result<BasisSet> {
        match self {
            BasisDescriptor::Affine { dim } => builtin_basis(&Family::Affine { dim: *dim }),
            BasisDescriptor::Polynomial { dim, degree } => builtin_basis(&Family::Polynomial {
                dim: *dim,
                degree: *degree,
            }),
            BasisDescriptor::Trig6 => builtin_basis(&Family::TrigSixComponent),
        }
    }
}

/// Writes an online trace as CSV: `k, z_1..z_n, bound, gap, uncertainty`.
pub fn write_trace_csv(path: &Path, trace: &OnlineTrace) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_path(path)?;
    let n = trace
        .rows
        .first()
        .map(|r| r.z.len())
        .unwrap_or(0);
    let mut header = vec!["k".to_string()];
    for i in 0..n {
        header.push(format!("z{}", i + 1));
    }
    header.push("bound".into());
    header.push("gap".into());
    header.push("uncertainty".into());
    wtr.write_record(&header)?;
    for row in &trace.rows {
        let mut rec = vec![format!("{}", row.round)];
        for i in 0..n {
            rec.push(format!("{}", row.z[i]));
        }
        rec.push(format!("{}", row.bound));
        rec.push(format!("{}", row.gap));
        rec.push(format!("{}", row.probe_uncertainty));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join("cautious_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.csv");
        let m = DMatrix::from_row_slice(2, 3, &[1.5, -2.0, 0.25, 1e-9, 3.0, -0.125]);
        write_csv_matrix(&path, &m, None).unwrap();
        let back = read_csv_matrix(&path).unwrap();
        assert_relative_eq!(m, back, epsilon = 0.0);
    }

    #[test]
    fn noise_descriptor_shapes() {
        let energy: NoiseDescriptor =
            serde_json::from_str(r#"{"type":"energy","q":[[1.0,0.0],[0.0,1.0]]}"#).unwrap();
        let model = energy.build(3).unwrap();
        assert_eq!(model.output_dim(), 2);
        assert_eq!(model.samples(), 3);
        // Unknown keys rejected.
        let bad = serde_json::from_str::<NoiseDescriptor>(
            r#"{"type":"energy","q":[[1.0]],"extra":1}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn basis_descriptor_builds() {
        let d: BasisDescriptor = serde_json::from_str(r#"{"family":"affine","dim":2}"#).unwrap();
        assert_eq!(d.build().unwrap().count(), 3);
        let t: BasisDescriptor = serde_json::from_str(r#"{"family":"trig6"}"#).unwrap();
        assert_eq!(t.build().unwrap().count(), 6);
    }
}
