//! Physical parameters of the two-speed run-and-tumble model.

use crate::error::{ModelError, Result};
use serde::{Deserialize, Serialize};

/// Model constants in the moving-frame normalization.
///
/// The model describes a density of left/right movers whose tumbling rate is
/// `1 + chi * sign(y) * sign(v)` in the frame of the chemoattractant peak,
/// coupled to the chemical field through `-S'' + alpha * S = rho`. The
/// normalization fixes the tumbling intensity at `sigma = 2` and the total
/// mass at `1/chi`; every explicit constant downstream (entropy rates, A-
/// operator bounds, velocity bounds) assumes it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelParams {
    /// Chemotactic sensitivity, strictly inside (0, 1).
    pub chi: f64,
    /// Chemical degradation rate, >= 0. `alpha = 0` means pure production
    /// balance; only the gradient of S is then defined.
    pub alpha: f64,
    /// Tumbling intensity; 2 in the supported normalization.
    pub sigma: f64,
    /// Total mass; 1/chi in the supported normalization.
    pub mass: f64,
    /// Derived decay rate of the velocity-difference functional:
    /// `lambda = 2*chi + sqrt(alpha)`.
    pub lambda: f64,
    /// True when sigma/mass were overridden away from the normalization.
    /// Theory-constant comparisons are disabled in that case.
    pub non_normalized: bool,
}

impl ModelParams {
    /// Normalized parameters (`sigma = 2`, `mass = 1/chi`).
    pub fn new(chi: f64, alpha: f64) -> Result<Self> {
        if !(chi > 0.0 && chi < 1.0) {
            return Err(ModelError::Config(format!(
                "chi must be in (0,1), got {chi}"
            )));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(ModelError::Config(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        Ok(Self {
            chi,
            alpha,
            sigma: 2.0,
            mass: 1.0 / chi,
            lambda: 2.0 * chi + alpha.sqrt(),
            non_normalized: false,
        })
    }

    /// Escape hatch for a non-normalized tumbling intensity. All simulation
    /// paths still work, but [`crate::constants::theory_constants`] flags its
    /// output invalid because the cited constants assume `sigma = 2`.
    pub fn with_sigma(chi: f64, alpha: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(ModelError::Config(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let mut p = Self::new(chi, alpha)?;
        if sigma != 2.0 {
            p.sigma = sigma;
            p.non_normalized = true;
        }
        Ok(p)
    }

    /// sqrt(alpha), the screening rate of the chemical field.
    pub fn sqrt_alpha(&self) -> f64 {
        self.alpha.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_is_two_chi_plus_sqrt_alpha() {
        let p = ModelParams::new(0.5, 0.25).unwrap();
        assert_eq!(p.lambda, 2.0 * 0.5 + 0.5, "lambda must be derived exactly");
        let p0 = ModelParams::new(0.3, 0.0).unwrap();
        assert_eq!(p0.lambda, 0.6);
    }

    #[test]
    fn normalization_is_frozen() {
        let p = ModelParams::new(0.25, 1.0).unwrap();
        assert_eq!(p.sigma, 2.0);
        assert_eq!(p.mass, 4.0);
        assert!(!p.non_normalized);
    }

    #[test]
    fn chi_bounds_are_strict() {
        assert!(ModelParams::new(0.0, 0.0).is_err(), "chi = 0 must be rejected");
        assert!(ModelParams::new(1.0, 0.0).is_err(), "chi = 1 must be rejected");
        assert!(ModelParams::new(-0.5, 0.0).is_err());
        assert!(ModelParams::new(0.5, -1e-9).is_err(), "negative alpha rejected");
    }

    #[test]
    fn sigma_override_sets_flag() {
        let p = ModelParams::with_sigma(0.5, 0.0, 3.0).unwrap();
        assert!(p.non_normalized);
        let q = ModelParams::with_sigma(0.5, 0.0, 2.0).unwrap();
        assert!(!q.non_normalized, "sigma = 2 is the normalized value");
    }
}
