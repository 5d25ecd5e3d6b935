//! Layered spectral representation of a field on the truncated slab.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{DwsError, Result};
use crate::field::SpectralField;
use crate::grid::Grid2D;

use super::ygrid::YGrid;

/// A scalar field on `[-ymax, 0] ×` the periodic rectangle, stored as one
/// raw (x,z)-spectral slice per vertical node, bottom to top.
#[derive(Debug, Clone)]
pub struct HalfSpaceField {
    grid: Arc<Grid2D>,
    ygrid: Arc<YGrid>,
    layers: Vec<Vec<Complex64>>,
}

impl HalfSpaceField {
    pub fn zero(grid: &Arc<Grid2D>, ygrid: &Arc<YGrid>) -> Self {
        HalfSpaceField {
            grid: grid.clone(),
            ygrid: ygrid.clone(),
            layers: vec![vec![Complex64::default(); grid.len()]; ygrid.ny()],
        }
    }

    pub fn from_layers(
        grid: &Arc<Grid2D>,
        ygrid: &Arc<YGrid>,
        layers: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        if layers.len() != ygrid.ny() || layers.iter().any(|l| l.len() != grid.len()) {
            return Err(DwsError::GridMismatch(
                "layer count or size does not match the grids".into(),
            ));
        }
        Ok(HalfSpaceField {
            grid: grid.clone(),
            ygrid: ygrid.clone(),
            layers,
        })
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn ygrid(&self) -> &Arc<YGrid> {
        &self.ygrid
    }

    /// Raw spectral slice at node `i` (0 = bottom, `ny-1` = top).
    pub fn layer(&self, i: usize) -> &[Complex64] {
        &self.layers[i]
    }

    pub fn layer_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.layers[i]
    }

    /// Trace at `y = 0` as a 2D field.
    pub fn top(&self) -> SpectralField {
        SpectralField::from_coeffs(&self.grid, self.layers[self.ygrid.ny() - 1].clone())
    }

    /// L^2(dx dz) norm of layer `i`.
    pub fn layer_l2(&self, i: usize) -> f64 {
        let s = self.grid.hat_scale();
        let a = self.grid.cell_area_k();
        (self.layers[i].iter().map(|c| (c * s).norm_sqr()).sum::<f64>() * a).sqrt()
    }

    /// Require the bottom layer to carry less than `limit` of the top-layer
    /// norm (depth-truncation sanity check).
    pub fn check_decay(&self, limit: f64) -> Result<()> {
        let top = self.layer_l2(self.ygrid.ny() - 1);
        let bottom = self.layer_l2(0);
        if top == 0.0 || bottom <= limit * top {
            Ok(())
        } else {
            Err(DwsError::InsufficientDepth {
                bottom: bottom / top,
                limit,
            })
        }
    }

    /// Volume Sobolev-type norm
    /// `(Σ_i w_i Σ_k (1+|k|^2)^s |hat|^2 dk)^{1/2}` with trapezoid weights.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let w = self.ygrid.weights();
        let hs = self.grid.hat_scale();
        let a = self.grid.cell_area_k();
        let mut acc = 0.0;
        let weights: Vec<f64> = self
            .grid
            .modes()
            .map(|(_, _, k1, k3)| (1.0 + k1 * k1 + k3 * k3).powf(s))
            .collect();
        for (wi, layer) in w.iter().zip(&self.layers) {
            let mut layer_acc = 0.0;
            for (c, kw) in layer.iter().zip(&weights) {
                layer_acc += kw * (c * hs).norm_sqr();
            }
            acc += wi * layer_acc;
        }
        (acc * a).sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        HalfSpaceField {
            grid: self.grid.clone(),
            ygrid: self.ygrid.clone(),
            layers,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|a| a.iter().map(|x| x * s).collect())
            .collect();
        HalfSpaceField {
            grid: self.grid.clone(),
            ygrid: self.ygrid.clone(),
            layers,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        HalfSpaceField {
            grid: self.grid.clone(),
            ygrid: self.ygrid.clone(),
            layers,
        }
    }
}
