use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Null hypothesis fixing a subset of coefficients: `β_j = v` for each
/// listed `(j, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    restricted: Vec<(usize, f64)>,
}

impl Hypothesis {
    pub fn new(mut restricted: Vec<(usize, f64)>) -> Result<Self> {
        if restricted.is_empty() {
            return Err(Error::Config("a hypothesis must fix at least one coefficient".into()));
        }
        restricted.sort_by_key(|&(j, _)| j);
        if restricted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("a coefficient is fixed more than once".into()));
        }
        if let Some(&(j, v)) = restricted.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("coefficient {j} fixed at non-finite value {v}")));
        }
        Ok(Self { restricted })
    }

    /// Fixes every coefficient at the given vector.
    pub fn full(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().copied().enumerate().collect())
    }

    pub fn restricted(&self) -> &[(usize, f64)] {
        &self.restricted
    }

    /// Number of restricted coefficients (the test's degrees of freedom).
    pub fn s(&self) -> usize {
        self.restricted.len()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.restricted.last() {
            Some(&(j, _)) if j >= dim => {
                Err(Error::Shape(format!("hypothesis fixes coefficient {j} but d={dim}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_full(&self, dim: usize) -> bool {
        self.restricted.len() == dim
    }

    pub fn free_indices(&self, dim: usize) -> Vec<usize> {
        (0..dim).filter(|j| !self.restricted.iter().any(|(r, _)| r == j)).collect()
    }

    /// Full-length vector with the free coordinates taken from `free` in order.
    pub fn embed(&self, free: &[f64], dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&j, &v) in self.free_indices(dim).iter().zip(free) {
            out[j] = v;
        }
        for &(j, v) in &self.restricted {
            out[j] = v;
        }
        out
    }

    /// Overwrites the restricted coordinates of `beta`.
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = beta.to_vec();
        for &(j, v) in &self.restricted {
            out[j] = v;
        }
        out
    }
}
