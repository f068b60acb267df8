use serde::{Deserialize, Serialize};

use super::{DataShard, GlmFamily};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Score, expected information, log-likelihood kernel and row count of a set
/// of rows evaluated at one coefficient vector. Bundles over disjoint rows add.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBundle {
    pub score: Vec<f64>,
    pub info: Matrix,
    pub log_lik: f64,
    pub count: u64,
}

impl DerivativeBundle {
    pub fn zeros(dim: usize) -> Self {
        Self { score: vec![0.0; dim], info: Matrix::zeros(dim), log_lik: 0.0, count: 0 }
    }

    pub fn dim(&self) -> usize {
        self.score.len()
    }

    pub fn add_assign(&mut self, other: &DerivativeBundle) -> Result<()> {
        if other.dim() != self.dim() || other.info.dim() != self.dim() {
            return Err(Error::Shape(format!(
                "cannot add a d={} bundle to a d={} bundle",
                other.dim(),
                self.dim()
            )));
        }
        for (a, b) in self.score.iter_mut().zip(&other.score) {
            *a += b;
        }
        self.info.add_assign(&other.info);
        self.log_lik += other.log_lik;
        self.count += other.count;
        Ok(())
    }

    /// Keeps the coordinates listed in `keep`: the score entries and the
    /// matching rows and columns of the information.
    pub fn restrict(&self, keep: &[usize]) -> DerivativeBundle {
        DerivativeBundle {
            score: keep.iter().map(|&j| self.score[j]).collect(),
            info: self.info.submatrix(keep),
            log_lik: self.log_lik,
            count: self.count,
        }
    }
}

fn check_beta(shard: &DataShard, beta: &[f64]) -> Result<()> {
    if beta.len() != shard.dim() {
        return Err(Error::Shape(format!(
            "coefficient vector has length {}, shard has d={}",
            beta.len(),
            shard.dim()
        )));
    }
    Ok(())
}

#[inline]
fn linear_predictor(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}

#[inline]
fn finite_eta(eta: f64, row_id: u64) -> Result<f64> {
    if eta.is_finite() {
        Ok(eta)
    } else {
        Err(Error::Domain(format!("linear predictor is {eta} at row {row_id}")))
    }
}

/// Log-likelihood kernel `Σ yᵢηᵢ − g(ηᵢ)`; normalizing constants are dropped.
pub fn log_lik_kernel(family: GlmFamily, shard: &DataShard, beta: &[f64]) -> Result<f64> {
    check_beta(shard, beta)?;
    let mut ll = 0.0;
    for (i, (y, x)) in shard.rows().enumerate() {
        let eta = finite_eta(linear_predictor(x, beta), shard.row_ids()[i])?;
        ll += family.kernel_term(y, eta);
    }
    Ok(ll)
}

/// Full derivative bundle at `beta`, summed in ascending row order.
pub fn derivatives(family: GlmFamily, shard: &DataShard, beta: &[f64]) -> Result<DerivativeBundle> {
    derivatives_counting(family, shard, beta).map(|(b, _)| b)
}

/// As [`derivatives`], also returning how many rows hit the Poisson η cap.
pub(crate) fn derivatives_counting(
    family: GlmFamily,
    shard: &DataShard,
    beta: &[f64],
) -> Result<(DerivativeBundle, u64)> {
    check_beta(shard, beta)?;
    let d = shard.dim();
    let mut out = DerivativeBundle::zeros(d);
    let mut capped = 0u64;
    for (i, (y, x)) in shard.rows().enumerate() {
        let eta = finite_eta(linear_predictor(x, beta), shard.row_ids()[i])?;
        let (mu, hit) = family.mean_capped(eta);
        capped += hit as u64;
        let resid = y - mu;
        for (s, xj) in out.score.iter_mut().zip(x) {
            *s += resid * xj;
        }
        out.info.add_outer(family.variance_unchecked(mu), x);
        out.log_lik += family.kernel_term(y, eta);
    }
    out.count = shard.len() as u64;
    if capped > 0 {
        log::debug!("{capped} rows hit the Poisson linear-predictor cap");
    }
    Ok((out, capped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric_logistic() -> DataShard {
        DataShard::from_rows(vec![0.0, 1.0, 0.0, 1.0], vec![-1.0, -1.0, 1.0, 1.0], 1).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let one = DataShard::from_rows(vec![1.0], vec![0.0, 0.0], 2).unwrap();
        let ll = log_lik_kernel(GlmFamily::Logistic, &one, &[3.0, -7.0]).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);

        let p = DataShard::from_rows(vec![0.0], vec![1.0], 1).unwrap();
        assert_eq!(log_lik_kernel(GlmFamily::Poisson, &p, &[0.0]).unwrap(), -1.0);

        let ll = log_lik_kernel(GlmFamily::Logistic, &symmetric_logistic(), &[0.0]).unwrap();
        assert!((ll - 4.0 * 0.5f64.ln()).abs() < 1e-14);
        assert!((ll + 2.772589).abs() < 1e-6);
    }

    #[test]
    fn kernel_shape_error() {
        let s = symmetric_logistic();
        assert!(matches!(log_lik_kernel(GlmFamily::Logistic, &s, &[0.0, 1.0]), Err(Error::Shape(_))));
        assert!(matches!(derivatives(GlmFamily::Logistic, &s, &[]), Err(Error::Shape(_))));
    }

    #[test]
    fn derivative_examples() {
        let b = derivatives(GlmFamily::Logistic, &symmetric_logistic(), &[0.0]).unwrap();
        assert_eq!(b.score, vec![0.0]);
        assert_eq!(b.info.as_slice(), &[1.0]);
        assert_eq!(b.count, 4);

        let p = DataShard::from_rows(vec![2.0], vec![1.0], 1).unwrap();
        let b = derivatives(GlmFamily::Poisson, &p, &[2f64.ln()]).unwrap();
        assert!(b.score[0].abs() < 1e-15);
        assert!((b.info[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn empty_shard_is_zero() {
        for fam in [GlmFamily::Logistic, GlmFamily::Poisson] {
            let b = derivatives(fam, &DataShard::empty(3), &[1.0, 2.0, 3.0]).unwrap();
            assert_eq!(b, DerivativeBundle::zeros(3));
        }
    }

    #[test]
    fn non_finite_predictor_is_domain_error() {
        let s = DataShard::from_rows(vec![1.0], vec![f64::INFINITY], 1).unwrap();
        assert!(matches!(derivatives(GlmFamily::Logistic, &s, &[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn poisson_cap_counted() {
        let s = DataShard::from_rows(vec![1.0, 1.0], vec![8.0, 0.01], 1).unwrap();
        // η = 800 on the first row.
        let (b, capped) = derivatives_counting(GlmFamily::Poisson, &s, &[100.0]).unwrap();
        assert_eq!(capped, 1);
        assert!(b.score[0].is_finite() && b.info[(0, 0)].is_finite());
    }

    #[test]
    fn restrict_drops_coordinates() {
        let mut b = DerivativeBundle::zeros(2);
        b.score = vec![1.0, 2.0];
        b.info = Matrix::from_rows(&[&[3.0, 4.0], &[4.0, 5.0]]).unwrap();
        let r = b.restrict(&[0]);
        assert_eq!(r.score, vec![1.0]);
        assert_eq!(r.info.as_slice(), &[3.0]);
    }
}
