//! Dispersion relation, quadratic symbols, and the sharp band cutoffs.
//!
//! Travelling waves of speed `c` in the x-direction linearize to a Fourier
//! multiplier whose zero set, at the minimal speed `c = sqrt(2)`, collapses
//! to the two carrier wavenumbers `(±1, 0)`. Everything downstream splits
//! the spectrum into small balls around these points (`chi`) and their
//! complement, where the linearized operator is invertible.

use num_complex::Complex64;

use crate::error::{DwsError, Result};
use crate::field::SpectralField;

/// Phase speed of a plane gravity-capillary wave with wavenumber `k1 > 0`
/// travelling over infinitely deep water: `c(k1) = sqrt(k1 + 1/k1)`.
pub fn dispersion_speed(k1: f64) -> f64 {
    (k1 + 1.0 / k1).sqrt()
}

/// Minimize [`dispersion_speed`] over `k1 > 0` by ternary search.
///
/// Returns `(argmin, min)`; the analytic answer is `(1, sqrt(2))`.
pub fn dispersion_minimum() -> (f64, f64) {
    let (mut a, mut b) = (0.25f64, 4.0f64);
    while b - a > 1e-13 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if dispersion_speed(m1) < dispersion_speed(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let k = 0.5 * (a + b);
    (k, dispersion_speed(k))
}

/// `f(k) = k1^2 / |k|`, with `f(0) = 0`.
pub fn f_symbol(k1: f64, k3: f64) -> f64 {
    let n = (k1 * k1 + k3 * k3).sqrt();
    if n == 0.0 {
        0.0
    } else {
        k1 * k1 / n
    }
}

/// `g(k) = 1 + |k|^2 - 2 f(k)`, with `g(0) = 1`.
///
/// Computed in the equivalent form `(|k| - 1)^2 + 2 k3^2 / |k|`, which is a
/// sum of nonnegative terms and so avoids the catastrophic cancellation of
/// the textbook expression near the carriers. Vanishes exactly at
/// `k = (±1, 0)`.
pub fn g_symbol(k1: f64, k3: f64) -> f64 {
    let n = k1.hypot(k3);
    if n == 0.0 {
        1.0
    } else {
        (n - 1.0).powi(2) + 2.0 * k3 * k3 / n
    }
}

/// Long-wave limit of the shifted, rescaled symbol: `2 + K1^2 + 2 K3^2`.
pub fn limit_symbol(kk1: f64, kk3: f64) -> f64 {
    2.0 + kk1 * kk1 + 2.0 * kk3 * kk3
}

/// Shifted, rescaled linear symbol of the full-dispersion envelope equation:
/// `eps^{-2} g(1 + eps K1, eps K3) + 2 f(1 + eps K1, eps K3)`.
///
/// Converges to [`limit_symbol`] as `eps -> 0`, uniformly on compact sets;
/// on the axis it is exactly `3 + 2 eps K1 + eps^2 K1^2 / |1 + eps K1|`.
pub fn shifted_symbol(eps: f64, kk1: f64, kk3: f64) -> f64 {
    let s1 = 1.0 + eps * kk1;
    let s3 = eps * kk3;
    g_symbol(s1, s3) / (eps * eps) + 2.0 * f_symbol(s1, s3)
}

/// Radius-`delta` balls around the carriers `(±1, 0)` and the sharp cutoffs
/// onto them.
#[derive(Debug, Clone, Copy)]
pub struct BandSpec {
    delta: f64,
}

impl Default for BandSpec {
    fn default() -> Self {
        BandSpec { delta: 0.15 }
    }
}

impl BandSpec {
    /// `delta` must lie in `(0, 1/5)` so the two balls are well separated
    /// and `g` stays bounded away from zero off the band.
    pub fn new(delta: f64) -> Result<Self> {
        if delta > 0.0 && delta < 0.2 {
            Ok(BandSpec { delta })
        } else {
            Err(DwsError::InvalidParameter(format!(
                "band radius must lie in (0, 0.2), got {delta}"
            )))
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn in_plus(&self, k1: f64, k3: f64) -> bool {
        (k1 - 1.0).powi(2) + k3 * k3 < self.delta * self.delta
    }

    pub fn in_minus(&self, k1: f64, k3: f64) -> bool {
        (k1 + 1.0).powi(2) + k3 * k3 < self.delta * self.delta
    }

    pub fn in_band(&self, k1: f64, k3: f64) -> bool {
        self.in_plus(k1, k3) || self.in_minus(k1, k3)
    }

    /// Indicator of both balls (`chi = chi_plus + chi_minus`).
    pub fn chi(&self, k1: f64, k3: f64) -> f64 {
        if self.in_band(k1, k3) {
            1.0
        } else {
            0.0
        }
    }

    pub fn chi_plus(&self, k1: f64, k3: f64) -> f64 {
        if self.in_plus(k1, k3) {
            1.0
        } else {
            0.0
        }
    }

    pub fn chi_minus(&self, k1: f64, k3: f64) -> f64 {
        if self.in_minus(k1, k3) {
            1.0
        } else {
            0.0
        }
    }

    /// Indicator of the origin-centred ball of radius `delta` (used with the
    /// scaled argument `eps K` on envelope grids).
    pub fn chi_zero(&self, k1: f64, k3: f64) -> f64 {
        if k1 * k1 + k3 * k3 < self.delta * self.delta {
            1.0
        } else {
            0.0
        }
    }

    /// Apply the multiplier `(1 - chi(k)) / g(k)`: zero on the band, the
    /// inverse of the nondegenerate linearized operator off it.
    pub fn offband_inverse(&self, field: &SpectralField) -> SpectralField {
        field
            .apply_multiplier(|k1, k3| {
                if self.in_band(k1, k3) {
                    0.0
                } else {
                    1.0 / g_symbol(k1, k3)
                }
            })
            .expect("g is bounded away from zero off the band")
    }

    /// Apply the sharp cutoff `chi(k)` (both balls).
    pub fn project_band(&self, field: &SpectralField) -> SpectralField {
        field
            .apply_multiplier(|k1, k3| self.chi(k1, k3))
            .expect("indicator is finite")
    }

    /// Apply `chi_plus` / `chi_minus`.
    pub fn project_plus(&self, field: &SpectralField) -> SpectralField {
        field
            .apply_multiplier(|k1, k3| self.chi_plus(k1, k3))
            .expect("indicator is finite")
    }

    pub fn project_minus(&self, field: &SpectralField) -> SpectralField {
        field
            .apply_multiplier(|k1, k3| self.chi_minus(k1, k3))
            .expect("indicator is finite")
    }
}

/// Half-spectrum extraction: keep modes with `k1 > 0`, annihilating the rest.
/// For a real field `u = p + conj(p)` this returns the analytic part `p`.
pub fn positive_k1_part(field: &SpectralField) -> SpectralField {
    field
        .apply_multiplier_complex(|k1, _| {
            if k1 > 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        })
        .expect("indicator is finite")
}
