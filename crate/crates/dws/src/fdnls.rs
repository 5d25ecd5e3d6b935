//! The full-dispersion envelope equation
//! `eps^{-2} g(e + eps D) zeta + 2 f(e + eps D) zeta = (11/8) chi0(eps D)(|zeta|^2 zeta)`
//! and its Newton solver, continued from the limiting ground state.
//!
//! As `eps -> 0` the linear symbol tends to `2 + K1^2 + 2 K3^2` and the
//! equation reduces to twice the limiting cubic Schrödinger equation, so the
//! ground state `zeta0` is the natural seed; the two solution branches are
//! continuations of `+zeta0` and `-zeta0`.

use serde::{Deserialize, Serialize};

use crate::error::{DwsError, Result};
use crate::field::{Parity, SpectralField};
use crate::linalg;
use crate::nls::GroundState;
use crate::report::SolverReport;
use crate::symbols::{limit_symbol, shifted_symbol, BandSpec};

/// Cubic coefficient of the envelope equation (twice the limiting 11/16).
pub const ENVELOPE_CUBIC: f64 = 11.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        }
    }
}

/// Sharp projection onto the envelope band `|K| < delta/eps`
/// (`chi0(eps D)` on the envelope grid).
pub fn band_project(zeta: &SpectralField, eps: f64, band: &BandSpec) -> SpectralField {
    zeta.apply_multiplier(|k1, k3| band.chi_zero(eps * k1, eps * k3))
        .expect("indicator is finite")
}

/// Relative spectral mass outside the envelope band.
pub fn band_leak(zeta: &SpectralField, eps: f64, band: &BandSpec) -> f64 {
    zeta.spectral_mass_outside(|k1, k3| band.chi_zero(eps * k1, eps * k3) == 1.0)
}

fn check_band(zeta: &SpectralField, eps: f64, band: &BandSpec) -> Result<()> {
    let leak = band_leak(zeta, eps, band);
    if leak > 1e-12 {
        Err(DwsError::SpectrumOutsideBand { leak, limit: 1e-12 })
    } else {
        Ok(())
    }
}

/// Linear part `eps^{-2} g(e + eps D) + 2 f(e + eps D)` applied spectrally.
pub fn apply_linear(zeta: &SpectralField, eps: f64) -> SpectralField {
    zeta.apply_multiplier(|k1, k3| shifted_symbol(eps, k1, k3))
        .expect("finite symbol on the lattice")
}

/// Band-projected cubic `chi0(eps D)(|zeta|^2 zeta)`, alias-free.
pub fn projected_cubic(zeta: &SpectralField, eps: f64, band: &BandSpec) -> SpectralField {
    band_project(
        &SpectralField::cubic_dealiased(zeta, &zeta.conj(), zeta),
        eps,
        band,
    )
}

/// Residual of the envelope equation; `remainder`, when supplied, is the
/// exact higher-order coupling computed by the surface reduction and is
/// simply added.
pub fn fdnls_residual(
    zeta: &SpectralField,
    eps: f64,
    band: &BandSpec,
    remainder: Option<&SpectralField>,
) -> Result<SpectralField> {
    check_band(zeta, eps, band)?;
    let mut r = apply_linear(zeta, eps).sub(&projected_cubic(zeta, eps, band).scale(ENVELOPE_CUBIC));
    if let Some(extra) = remainder {
        r = r.add(extra);
    }
    Ok(r)
}

/// Jacobian of the residual at `zeta` (real-linear in `v` through the
/// conjugate): `L v - (11/8) chi0(2 |zeta|^2 v + zeta^2 conj v)`.
pub fn apply_jacobian(
    zeta: &SpectralField,
    eps: f64,
    band: &BandSpec,
    v: &SpectralField,
) -> SpectralField {
    let v = band_project(v, eps, band);
    let zc = zeta.conj();
    let cubic = SpectralField::cubic_dealiased(zeta, &zc, &v)
        .scale(2.0)
        .add(&SpectralField::cubic_dealiased(zeta, zeta, &v.conj()));
    apply_linear(&v, eps).sub(&band_project(&cubic, eps, band).scale(ENVELOPE_CUBIC))
}

/// A converged branch solution.
#[derive(Debug, Clone)]
pub struct FdnlsSolution {
    pub zeta: SpectralField,
    pub epsilon: f64,
    pub branch: Branch,
    pub residual_h1: f64,
    /// `|| zeta - sign * zeta0 ||_{H^1}`.
    pub h1_distance_to_ground_state: f64,
    pub sup_distance_to_ground_state: f64,
}

/// Newton continuation from `sign * zeta0`, pure envelope equation.
pub fn solve_fdnls(
    eps: f64,
    branch: Branch,
    ground: &GroundState,
    tol: f64,
    band: &BandSpec,
) -> Result<(FdnlsSolution, SolverReport)> {
    solve_fdnls_with(eps, branch, ground, tol, band, None)
}

/// Newton continuation with an optional remainder coupling: the closure
/// receives the current iterate and returns the extra residual term (the
/// reduction round-trip). The coupling is refreshed every iteration but kept
/// frozen inside the linear solve, which is harmless since it is
/// higher-order in `eps`.
pub fn solve_fdnls_with(
    eps: f64,
    branch: Branch,
    ground: &GroundState,
    tol: f64,
    band: &BandSpec,
    remainder: Option<&dyn Fn(&SpectralField) -> Result<SpectralField>>,
) -> Result<(FdnlsSolution, SolverReport)> {
    if !(eps > 0.0) || !(tol > 0.0) {
        return Err(DwsError::InvalidParameter(
            "eps and tol must be positive".into(),
        ));
    }
    let mut report = SolverReport::new("newton-fdnls");
    report.note(format!("branch {}", branch.label()));
    if eps > 0.1 {
        report.note(format!("eps = {eps} outside the configured range (extrapolation)"));
    }

    let class = |z: &SpectralField| band_project(z, eps, band).symmetrize(Parity::ConjEven);
    let mut zeta = class(&ground.zeta.scale(branch.sign()));
    let precond2 = |x: &SpectralField| {
        x.apply_multiplier(|k1, k3| 1.0 / limit_symbol(k1, k3).powi(2))
            .expect("finite symbol")
    };

    let mut converged = false;
    for _ in 0..40 {
        let extra = match remainder {
            Some(f) => Some(f(&zeta)?),
            None => None,
        };
        let r = fdnls_residual(&zeta, eps, band, extra.as_ref())?;
        let rn = r.h1_norm();
        report.push(rn);
        if !rn.is_finite() {
            return Err(DwsError::Divergence("non-finite envelope residual".into()));
        }
        if rn <= tol {
            converged = true;
            break;
        }
        let n = report.residuals.len();
        if n >= 3 && report.residuals[n - 1] > report.residuals[n - 2]
            && report.residuals[n - 2] > report.residuals[n - 3]
        {
            return Err(DwsError::Divergence(format!(
                "envelope Newton residual growing ({:.3e} -> {:.3e})",
                report.residuals[n - 3],
                report.residuals[n - 1]
            )));
        }
        let base = zeta.clone();
        let apply_j = |v: &SpectralField| class(&apply_jacobian(&base, eps, band, &class(v)));
        let (d, _) = linalg::cgnr(apply_j, precond2, &class(&r), (tol * 0.1).max(1e-12), 4000)?;
        zeta = class(&zeta.sub(&d));
    }
    if !converged {
        return Err(DwsError::Divergence(format!(
            "envelope Newton cap reached (last residual {:.3e})",
            report.last_residual()
        )));
    }
    report.converged = true;

    let signed_gs = ground.zeta.scale(branch.sign());
    let diff = zeta.sub(&signed_gs);
    let sol = FdnlsSolution {
        residual_h1: report.last_residual(),
        h1_distance_to_ground_state: diff.h1_norm(),
        sup_distance_to_ground_state: diff.max_abs(),
        zeta,
        epsilon: eps,
        branch,
    };
    Ok((sol, report))
}
