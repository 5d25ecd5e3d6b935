//! Physical and reduction parameters.

use serde::{Deserialize, Serialize};

use crate::error::{DwsError, Result};
use crate::symbols::BandSpec;

/// Scalars of the travelling-wave reduction. The wave speed is slaved to the
/// small parameter by `c^2 = 2(1 - eps^2)` and never stored separately.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WaveParams {
    pub epsilon: f64,
    /// Carrier-band radius, in (0, 1/5).
    pub delta: f64,
    /// Smallness exponent used in reported ratios.
    pub theta: f64,
    /// Ball radius for the scaled norm of the band component.
    pub r1: f64,
    /// Ball radius for the H^3 norm of the off-band correction.
    pub r3: f64,
}

impl WaveParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        let p = WaveParams {
            epsilon,
            delta: 0.15,
            theta: 5.0 / 6.0,
            r1: 20.0,
            r3: 10.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(DwsError::InvalidParameter(format!(
                "epsilon must lie in (0, 1) (got {})",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 0.2) {
            return Err(DwsError::InvalidParameter(format!(
                "delta must lie in (0, 1/5) (got {})",
                self.delta
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(DwsError::InvalidParameter(format!(
                "theta must lie in (0, 1) (got {})",
                self.theta
            )));
        }
        if !(self.r1 > 0.0 && self.r3 > 0.0) {
            return Err(DwsError::InvalidParameter(
                "ball radii must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn band(&self) -> BandSpec {
        BandSpec::new(self.delta).expect("validated radius")
    }

    pub fn c_squared(&self) -> f64 {
        2.0 * (1.0 - self.epsilon * self.epsilon)
    }

    pub fn c(&self) -> f64 {
        self.c_squared().sqrt()
    }

    /// The configured default range is eps in [0.01, 0.1]; outside it the
    /// solvers still run but reports are marked as extrapolation.
    pub fn is_extrapolation(&self) -> bool {
        !(0.01..=0.1).contains(&self.epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speed_is_slaved_to_epsilon() {
        let p = WaveParams::new(0.05).unwrap();
        assert_eq!(p.c_squared(), 2.0 * (1.0 - 0.0025));
        assert!((p.c() - p.c_squared().sqrt()).abs() == 0.0);
        assert!(!p.is_extrapolation());
        assert!(WaveParams::new(0.2).unwrap().is_extrapolation());
        assert!(WaveParams::new(0.0).is_err());
        assert!(WaveParams::new(1.5).is_err());
    }
}
