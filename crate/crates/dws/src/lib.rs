//! Pseudo-spectral machinery for three-dimensional deep-water
//! gravity-capillary solitary waves.
//!
//! The crate approximates the free surface of an infinitely deep fluid on a
//! large periodic box. It provides the Fourier substrate ([`grid`],
//! [`field`], [`symbols`]), the Dirichlet–Neumann machinery on the flattened
//! half-space ([`dno`]), solvers for the cubic Schrödinger ground state and
//! its full-dispersion refinement ([`nls`], [`fdnls`]), and the reduction
//! that reconstructs small-amplitude solitary surface profiles from envelope
//! solutions ([`reduction`]).

pub mod cli;
pub mod dno;
pub mod error;
pub mod fdnls;
pub mod fft;
pub mod field;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod nls;
pub mod params;
pub mod reduction;
pub mod report;
pub mod symbols;

pub use error::{DwsError, Result};
pub use field::{Axis, Parity, SpectralField};
pub use grid::Grid2D;
pub use params::WaveParams;
pub use report::SolverReport;
