use crate::error::{Error, Result};

/// Per-coordinate root-mean-squared error of `estimates` around `truth`.
pub fn rmse(estimates: &[Vec<f64>], truth: &[f64]) -> Result<Vec<f64>> {
    if estimates.is_empty() {
        return Err(Error::Shape("rmse needs at least one estimate".into()));
    }
    let mut acc = vec![0.0; truth.len()];
    for (b, est) in estimates.iter().enumerate() {
        if est.len() != truth.len() {
            return Err(Error::Shape(format!("estimate {b} has length {}, truth has {}", est.len(), truth.len())));
        }
        for ((a, e), t) in acc.iter_mut().zip(est).zip(truth) {
            *a += (e - t).powi(2);
        }
    }
    let n = estimates.len() as f64;
    Ok(acc.into_iter().map(|a| (a / n).sqrt()).collect())
}

pub fn armse(rmse: &[f64]) -> f64 {
    rmse.iter().sum::<f64>() / rmse.len() as f64
}

/// Empirical rejection probability.
pub fn erp(rejections: &[bool]) -> Result<f64> {
    if rejections.is_empty() {
        return Err(Error::Shape("erp needs at least one indicator".into()));
    }
    Ok(rejections.iter().filter(|&&r| r).count() as f64 / rejections.len() as f64)
}
