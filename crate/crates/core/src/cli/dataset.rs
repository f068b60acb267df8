//! Reading and writing CSV datasets.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::glm::{DataShard, GlmFamily};

/// Which CSV columns form the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvDataset {
    pub response: String,
    /// Empty means every column except the response, in file order.
    pub covariates: Vec<String>,
    pub add_intercept: bool,
}

/// A loaded dataset with the coefficient names in design order.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub shard: DataShard,
    pub names: Vec<String>,
}

pub const INTERCEPT: &str = "(Intercept)";

impl CsvDataset {
    pub fn load(&self, path: &Path, family: GlmFamily) -> Result<LoadedData, CliError> {
        let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("{}: cannot read header: {e}", path.display())))?
            .iter()
            .map(str::to_owned)
            .collect();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CliError::Config(format!("column '{name}' not found in {}", path.display())))
        };
        let y_col = col(&self.response)?;
        let cov_names: Vec<String> = if self.covariates.is_empty() {
            headers.iter().filter(|h| **h != self.response).cloned().collect()
        } else {
            self.covariates.clone()
        };
        let cov_cols = cov_names.iter().map(|c| col(c)).collect::<Result<Vec<_>, _>>()?;
        let mut names = Vec::with_capacity(cov_cols.len() + 1);
        if self.add_intercept {
            names.push(INTERCEPT.to_string());
        }
        names.extend(cov_names);
        let d = names.len();
        if d == 0 {
            return Err(CliError::Config("no covariates selected".into()));
        }

        let (mut y, mut x) = (Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            // Row numbers are 1-based data rows, header excluded.
            let row = i + 1;
            let rec = rec.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
            let cell = |j: usize| -> Result<f64, CliError> {
                let raw = rec.get(j).ok_or_else(|| CliError::Data(format!("row {row}: missing column '{}'", headers[j])))?;
                let v: f64 =
                    raw.parse().map_err(|_| CliError::Data(format!("row {row}, column '{}': '{raw}' is not a number", headers[j])))?;
                if !v.is_finite() {
                    return Err(CliError::Data(format!("row {row}, column '{}': value is not finite", headers[j])));
                }
                Ok(v)
            };
            let yv = cell(y_col)?;
            if !family.is_valid_response(yv) {
                return Err(CliError::Data(format!(
                    "row {row}, column '{}': {yv} is not a valid {family} response",
                    self.response
                )));
            }
            y.push(yv);
            if self.add_intercept {
                x.push(1.0);
            }
            for &j in &cov_cols {
                x.push(cell(j)?);
            }
        }
        if y.is_empty() {
            return Err(CliError::Data(format!("{}: no data rows", path.display())));
        }
        let shard = DataShard::from_rows(y, x, d).map_err(|e| CliError::Data(e.to_string()))?;
        Ok(LoadedData { shard, names })
    }
}

/// Writes `shard` with header `response,names...`. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv(path: &Path, shard: &DataShard, response: &str, names: &[String]) -> Result<(), CliError> {
    if names.len() != shard.dim() {
        return Err(CliError::Config(format!("{} names for d={}", names.len(), shard.dim())));
    }
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    writeln!(w, "{response},{}", names.join(",")).map_err(io)?;
    for (yv, row) in shard.rows() {
        write!(w, "{yv}").map_err(io)?;
        for v in row {
            write!(w, ",{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
