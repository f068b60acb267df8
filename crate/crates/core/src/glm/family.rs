use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear predictors above this are clamped before `exp` for the Poisson family.
pub const POISSON_ETA_CAP: f64 = 700.0;

/// Exponential-family response distribution under its canonical link, with
/// unit dispersion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlmFamily {
    Logistic,
    Poisson,
}

impl GlmFamily {
    pub fn dispersion(self) -> f64 {
        1.0
    }

    pub fn name(self) -> &'static str {
        match self {
            GlmFamily::Logistic => "logistic",
            GlmFamily::Poisson => "poisson",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            GlmFamily::Logistic => 0,
            GlmFamily::Poisson => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(GlmFamily::Logistic),
            1 => Some(GlmFamily::Poisson),
            _ => None,
        }
    }

    /// Mean at a finite linear predictor, plus whether the Poisson cap fired.
    #[inline]
    pub(crate) fn mean_capped(self, eta: f64) -> (f64, bool) {
        match self {
            GlmFamily::Logistic => (logistic(eta), false),
            GlmFamily::Poisson => {
                if eta > POISSON_ETA_CAP {
                    (POISSON_ETA_CAP.exp(), true)
                } else {
                    (eta.exp(), false)
                }
            }
        }
    }

    /// Log-likelihood kernel `yη − g(η)` of one observation.
    #[inline]
    pub(crate) fn kernel_term(self, y: f64, eta: f64) -> f64 {
        match self {
            GlmFamily::Logistic => y * eta - softplus(eta),
            GlmFamily::Poisson => {
                let eta = eta.min(POISSON_ETA_CAP);
                y * eta - eta.exp()
            }
        }
    }

    /// Variance function on an already-valid mean; no range check.
    #[inline]
    pub(crate) fn variance_unchecked(self, mu: f64) -> f64 {
        match self {
            GlmFamily::Logistic => mu * (1.0 - mu),
            GlmFamily::Poisson => mu,
        }
    }

    pub fn is_valid_response(self, y: f64) -> bool {
        match self {
            GlmFamily::Logistic => y == 0.0 || y == 1.0,
            GlmFamily::Poisson => y.is_finite() && y >= 0.0 && y.fract() == 0.0,
        }
    }
}

impl std::fmt::Display for GlmFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GlmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" | "binomial" => Ok(GlmFamily::Logistic),
            "poisson" => Ok(GlmFamily::Poisson),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

#[inline]
fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^η) without overflow.
#[inline]
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Mean function `µ(η)` of the canonical link.
pub fn mean(family: GlmFamily, eta: f64) -> Result<f64> {
    if !eta.is_finite() {
        return Err(Error::Domain(format!("linear predictor {eta} is not finite")));
    }
    Ok(family.mean_capped(eta).0)
}

/// Variance function `V(µ)`; boundary means are accepted.
pub fn variance_fn(family: GlmFamily, mu: f64) -> Result<f64> {
    let ok = match family {
        GlmFamily::Logistic => (0.0..=1.0).contains(&mu),
        GlmFamily::Poisson => mu >= 0.0 && mu.is_finite(),
    };
    if !ok {
        return Err(Error::Domain(format!("mean {mu} is outside the {family} range")));
    }
    Ok(family.variance_unchecked(mu))
}
