use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::GlmFamily;
use crate::error::{Error, Result};

/// One worker's rows: response vector, row-major covariate matrix, and the
/// global index of each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataShard {
    y: Vec<f64>,
    x: Vec<f64>,
    dim: usize,
    row_ids: Vec<u64>,
}

impl DataShard {
    pub fn new(y: Vec<f64>, x: Vec<f64>, dim: usize, row_ids: Vec<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("covariate dimension must be at least 1".into()));
        }
        if x.len() != y.len() * dim {
            return Err(Error::Shape(format!(
                "{} responses need {} covariate entries at d={dim}, got {}",
                y.len(),
                y.len() * dim,
                x.len()
            )));
        }
        if row_ids.len() != y.len() {
            return Err(Error::Shape(format!("{} row ids for {} rows", row_ids.len(), y.len())));
        }
        let mut seen = HashSet::with_capacity(row_ids.len());
        if let Some(dup) = row_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::Shape(format!("duplicate row id {dup}")));
        }
        Ok(Self { y, x, dim, row_ids })
    }

    /// Rows numbered 0..m in order.
    pub fn from_rows(y: Vec<f64>, x: Vec<f64>, dim: usize) -> Result<Self> {
        let ids = (0..y.len() as u64).collect();
        Self::new(y, x, dim, ids)
    }

    pub fn empty(dim: usize) -> Self {
        Self { y: Vec::new(), x: Vec::new(), dim, row_ids: Vec::new() }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Row-major covariates.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.y.iter().copied().zip(self.x.chunks_exact(self.dim))
    }

    /// Rows at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> DataShard {
        let mut y = Vec::with_capacity(positions.len());
        let mut x = Vec::with_capacity(positions.len() * self.dim);
        let mut ids = Vec::with_capacity(positions.len());
        for &p in positions {
            y.push(self.y[p]);
            x.extend_from_slice(self.row(p));
            ids.push(self.row_ids[p]);
        }
        DataShard { y, x, dim: self.dim, row_ids: ids }
    }

    /// Concatenates shards in order. Fails on differing dimensions or
    /// overlapping row ids.
    pub fn concat<'a>(dim: usize, parts: impl IntoIterator<Item = &'a DataShard>) -> Result<DataShard> {
        let (mut y, mut x, mut ids) = (Vec::new(), Vec::new(), Vec::new());
        for p in parts {
            if p.dim != dim {
                return Err(Error::Shape(format!("shard has d={} but d={dim} expected", p.dim)));
            }
            y.extend_from_slice(&p.y);
            x.extend_from_slice(&p.x);
            ids.extend_from_slice(&p.row_ids);
        }
        DataShard::new(y, x, dim, ids)
    }

    /// Checks every response against the family's support.
    pub fn check_responses(&self, family: GlmFamily) -> Result<()> {
        match self.y.iter().position(|&v| !family.is_valid_response(v)) {
            None => Ok(()),
            Some(i) => Err(Error::Domain(format!(
                "row {} has response {} outside the {family} support",
                self.row_ids[i], self.y[i]
            ))),
        }
    }

    /// Multiplies covariate column `j` by `c`.
    pub fn scale_column(&mut self, j: usize, c: f64) {
        for row in self.x.chunks_exact_mut(self.dim) {
            row[j] *= c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(DataShard::from_rows(vec![1.0], vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(DataShard::from_rows(vec![], vec![], 0).is_err());
        assert!(DataShard::new(vec![1.0, 0.0], vec![1.0, 2.0], 1, vec![3, 3]).is_err());
    }

    #[test]
    fn select_and_concat() {
        let s = DataShard::from_rows(vec![0.0, 1.0, 1.0], vec![1.0, 2.0, 3.0], 1).unwrap();
        let a = s.select(&[2, 0]);
        assert_eq!(a.row_ids(), &[2, 0]);
        assert_eq!(a.x(), &[3.0, 1.0]);
        let b = s.select(&[1]);
        let c = DataShard::concat(1, [&a, &b]).unwrap();
        assert_eq!(c.len(), 3);
        assert!(DataShard::concat(1, [&a, &a]).is_err());
    }

    #[test]
    fn response_support() {
        let s = DataShard::from_rows(vec![0.0, 2.0], vec![1.0, 1.0], 1).unwrap();
        assert!(s.check_responses(GlmFamily::Poisson).is_ok());
        let err = s.check_responses(GlmFamily::Logistic).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }
}
