//! Dirichlet–Neumann machinery on the flattened lower half-space.
//!
//! The free-boundary potential problem is flattened to
//! `Σ = ℝ × (-∞, 0) × ℝ`, where it becomes a Poisson problem with
//! divergence-form data `F(η, u)` and a Neumann condition at `y = 0`. The
//! explicit solution operator [`solve::solve_s`] inverts that problem per
//! horizontal wavenumber; [`solve::solve_dn`] closes the nonlinearity by
//! Picard iteration. On top of these sit the trace operators `K(η)`, `L(η)`
//! and the closed-form expansion pieces of the energy gradients
//! ([`operators`]).

pub mod half_space;
pub mod operators;
pub mod solve;
pub mod ygrid;

pub use half_space::HalfSpaceField;
pub use solve::{k_op, l_op, solve_dn, solve_s, DnReport, DnSolution};
pub use ygrid::YGrid;

use crate::error::{DwsError, Result};

/// Knobs for the half-space solves.
#[derive(Debug, Clone, Copy)]
pub struct DnoConfig {
    /// Truncation depth (the slab is `[-ymax, 0]`).
    pub ymax: f64,
    /// Number of vertical nodes.
    pub ny: usize,
    /// Picard stopping tolerance on the relative iterate change.
    pub picard_tol: f64,
    /// Picard iteration cap.
    pub picard_max: usize,
}

impl Default for DnoConfig {
    fn default() -> Self {
        DnoConfig {
            ymax: 30.0,
            ny: 128,
            picard_tol: 1e-12,
            picard_max: 60,
        }
    }
}

impl DnoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ymax > 0.0) {
            return Err(DwsError::InvalidParameter("ymax must be positive".into()));
        }
        if self.ny < 16 {
            return Err(DwsError::InvalidParameter(format!(
                "ny must be at least 16 (got {})",
                self.ny
            )));
        }
        if !(self.picard_tol > 0.0) {
            return Err(DwsError::InvalidParameter(
                "picard_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}
