//! Iteration traces and convergence diagnostics, serializable for sidecars.

use serde::{Deserialize, Serialize};

use crate::dno::DnReport;

/// A generic record of one iterative solve.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverReport {
    pub solver: String,
    pub iterations: usize,
    /// Residual (or relative-change) trace, one entry per iteration.
    pub residuals: Vec<f64>,
    /// Ratios of consecutive trace entries.
    pub contraction: Vec<f64>,
    pub converged: bool,
    /// Free-form diagnostics (mode flags, measured constants, warnings).
    pub notes: Vec<String>,
}

impl SolverReport {
    pub fn new(solver: &str) -> Self {
        SolverReport {
            solver: solver.to_string(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, residual: f64) {
        if let Some(&last) = self.residuals.last() {
            self.contraction.push(residual / last);
        }
        self.residuals.push(residual);
        self.iterations = self.residuals.len();
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn last_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }

    /// Largest observed contraction factor (NaN if fewer than two entries).
    pub fn worst_contraction(&self) -> f64 {
        self.contraction
            .iter()
            .copied()
            .fold(f64::NAN, |m, r| if m.is_nan() || r > m { r } else { m })
    }
}

impl From<&DnReport> for SolverReport {
    fn from(r: &DnReport) -> Self {
        SolverReport {
            solver: "picard-dn".into(),
            iterations: r.iterations,
            residuals: r.changes.clone(),
            contraction: r.contraction.clone(),
            converged: true,
            notes: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_trace_follows_residuals() {
        let mut r = SolverReport::new("test");
        r.push(1.0);
        r.push(0.25);
        r.push(0.05);
        assert_eq!(r.iterations, 3);
        assert_eq!(r.contraction, vec![0.25, 0.2]);
        assert!((r.worst_contraction() - 0.25).abs() < 1e-15);
        assert_eq!(r.last_residual(), 0.05);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"solver\":\"test\""));
    }
}
