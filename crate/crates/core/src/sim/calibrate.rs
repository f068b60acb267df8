//! Choosing the alternative for power studies from the asymptotic power of
//! the global likelihood-ratio test.

use crate::error::{Error, Result};
use crate::glm::GlmFamily;
use crate::inference::{chi2_critical, normal_cdf};

/// Simpson nodes on [0, 1] used for the information integrals.
const NODES: usize = 2001;

/// Per-row efficient information for the slope in `η = b₁ + b₂·u`,
/// `u ~ U(0,1)`: `I₂₂ − I₁₂²/I₁₁` with `I = E[V(µ) (1,u)(1,u)ᵀ]`.
pub fn slope_efficient_information(family: GlmFamily, b1: f64, b2: f64) -> f64 {
    let h = 1.0 / (NODES - 1) as f64;
    let (mut i11, mut i12, mut i22) = (0.0, 0.0, 0.0);
    for k in 0..NODES {
        let u = k as f64 * h;
        let w = if k == 0 || k == NODES - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let mu = family.mean_capped(b1 + b2 * u).0;
        let v = family.variance_unchecked(mu) * w;
        i11 += v;
        i12 += v * u;
        i22 += v * u * u;
    }
    let s = h / 3.0;
    (i22 - i12 * i12 / i11) * s
}

/// Asymptotic power of a level-`alpha` χ²(1) test with noncentrality `delta`.
pub fn power_one_df(delta: f64, alpha: f64) -> Result<f64> {
    let z = chi2_critical(alpha, 1)?.sqrt();
    let r = delta.max(0.0).sqrt();
    Ok(normal_cdf(r - z) + normal_cdf(-r - z))
}

/// Smallest positive slope whose predicted global-LRT power at `n_total`
/// rows reaches `target_power`, found by bisection.
pub fn calibrate_beta_alt(family: GlmFamily, b1: f64, n_total: usize, target_power: f64, alpha: f64) -> Result<f64> {
    if !(target_power > alpha && target_power < 1.0) {
        return Err(Error::Config(format!("target power {target_power} must lie in (alpha, 1)")));
    }
    let power = |b2: f64| power_one_df(n_total as f64 * b2 * b2 * slope_efficient_information(family, b1, b2), alpha);
    let (mut lo, mut hi) = (0.0, 0.05);
    while power(hi)? < target_power {
        hi *= 2.0;
        if hi > 100.0 {
            return Err(Error::Config("target power unreachable".into()));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if power(mid)? < target_power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn information_closed_form_at_flat_logistic() {
        // V = 1/4 everywhere: efficient info = Var(u)/4 = 1/48.
        let i = slope_efficient_information(GlmFamily::Logistic, 0.0, 0.0);
        assert!((i - 1.0 / 48.0).abs() < 1e-12);
    }

    #[test]
    fn power_endpoints() {
        assert!((power_one_df(0.0, 0.05).unwrap() - 0.05).abs() < 1e-9);
        assert!(power_one_df(100.0, 0.05).unwrap() > 0.999);
    }

    #[test]
    fn calibration_hits_target() {
        let b = calibrate_beta_alt(GlmFamily::Logistic, 0.2, 50_000, 0.96, 0.05).unwrap();
        let p = power_one_df(50_000.0 * b * b * slope_efficient_information(GlmFamily::Logistic, 0.2, b), 0.05).unwrap();
        assert!((p - 0.96).abs() < 1e-9);
        assert!(b > 0.05 && b < 0.2, "{b}");
    }
}
