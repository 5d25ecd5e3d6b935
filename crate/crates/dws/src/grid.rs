//! Periodic computational domain and its discrete wavenumber lattice.
//!
//! The box is `[-Lx, Lx) x [-Lz, Lz)` with `nx x nz` points (powers of two).
//! Wavenumbers follow the usual FFT ordering: index `j` maps to
//! `j*dk` for `j < n/2` and `(j - n)*dk` otherwise, with `dk = pi/L`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{DwsError, Result};

/// Periodic rectangle and its wavenumber lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    nx: usize,
    nz: usize,
    lx: f64,
    lz: f64,
}

impl Grid2D {
    pub fn new(nx: usize, nz: usize, lx: f64, lz: f64) -> Result<Arc<Self>> {
        if !nx.is_power_of_two() || !nz.is_power_of_two() || nx < 4 || nz < 4 {
            return Err(DwsError::InvalidGrid(format!(
                "nx, nz must be powers of two >= 4 (got {nx}, {nz})"
            )));
        }
        if !(lx > 0.0) || !(lz > 0.0) {
            return Err(DwsError::InvalidGrid(format!(
                "box half-lengths must be positive (got {lx}, {lz})"
            )));
        }
        Ok(Arc::new(Grid2D { nx, nz, lx, lz }))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn lz(&self) -> f64 {
        self.lz
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.lx / self.nx as f64
    }

    pub fn dz(&self) -> f64 {
        2.0 * self.lz / self.nz as f64
    }

    /// Wavenumber spacing in the x-direction, `pi / Lx`.
    pub fn dk1(&self) -> f64 {
        PI / self.lx
    }

    /// Wavenumber spacing in the z-direction, `pi / Lz`.
    pub fn dk3(&self) -> f64 {
        PI / self.lz
    }

    /// Physical coordinate of column `ix`.
    pub fn x_at(&self, ix: usize) -> f64 {
        -self.lx + ix as f64 * self.dx()
    }

    /// Physical coordinate of row `iz`.
    pub fn z_at(&self, iz: usize) -> f64 {
        -self.lz + iz as f64 * self.dz()
    }

    /// Wavenumber `k1` of column `ix` in FFT ordering.
    pub fn k1_at(&self, ix: usize) -> f64 {
        let j = if ix < self.nx / 2 {
            ix as isize
        } else {
            ix as isize - self.nx as isize
        };
        j as f64 * self.dk1()
    }

    /// Wavenumber `k3` of row `iz` in FFT ordering.
    pub fn k3_at(&self, iz: usize) -> f64 {
        let l = if iz < self.nz / 2 {
            iz as isize
        } else {
            iz as isize - self.nz as isize
        };
        l as f64 * self.dk3()
    }

    /// Row-major (z-major) linear index.
    pub fn index(&self, ix: usize, iz: usize) -> usize {
        iz * self.nx + ix
    }

    /// Spectral cell area `dk1 * dk3`.
    pub fn cell_area_k(&self) -> f64 {
        self.dk1() * self.dk3()
    }

    /// Physical cell area `dx * dz`.
    pub fn cell_area_x(&self) -> f64 {
        self.dx() * self.dz()
    }

    /// Factor converting a raw (unnormalized) forward-FFT coefficient into the
    /// value of the continuum Fourier transform `(1/2pi) \int u e^{-ik.x}` at
    /// the lattice point.
    pub fn hat_scale(&self) -> f64 {
        self.cell_area_x() / (2.0 * PI)
    }

    /// Iterate over `(ix, iz, k1, k3)` for the whole lattice.
    pub fn modes(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.nz).flat_map(move |iz| {
            (0..self.nx).map(move |ix| (ix, iz, self.k1_at(ix), self.k3_at(iz)))
        })
    }

    pub fn same_grid(&self, other: &Grid2D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(DwsError::GridMismatch(format!(
                "{}x{} [{},{}] vs {}x{} [{},{}]",
                self.nx, self.nz, self.lx, self.lz, other.nx, other.nz, other.lx, other.lz
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumber_lattice_ordering() {
        let g = Grid2D::new(8, 4, PI, PI).unwrap();
        assert_eq!(g.dk1(), 1.0);
        let ks: Vec<f64> = (0..8).map(|i| g.k1_at(i)).collect();
        assert_eq!(ks, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid2D::new(6, 4, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 4, -1.0, 1.0).is_err());
    }

    #[test]
    fn physical_coordinates_cover_the_box() {
        let g = Grid2D::new(8, 8, 2.0, 4.0).unwrap();
        assert_eq!(g.x_at(0), -2.0);
        assert_eq!(g.z_at(0), -4.0);
        assert!((g.x_at(7) - (2.0 - g.dx())).abs() < 1e-14);
    }
}
