//! Graded vertical grid on `[-ymax, 0]`.
//!
//! Nodes follow a geometric progression clustering at the free surface
//! `y = 0`, where the exponential kernels `e^{|k| y}` vary fastest. The
//! growth ratio is chosen so the first (topmost) interval has a fixed small
//! width; interval widths then grow geometrically towards the bottom.

use std::sync::Arc;

use crate::error::{DwsError, Result};

#[derive(Debug, Clone)]
pub struct YGrid {
    /// Strictly increasing nodes, `nodes[0] = -ymax`, last node exactly 0.
    nodes: Vec<f64>,
    ymax: f64,
}

impl YGrid {
    /// Build `ny` nodes on `[-ymax, 0]` with geometric grading. The top
    /// interval width is `min(0.02, ymax/ny)`.
    pub fn new(ymax: f64, ny: usize) -> Result<Arc<Self>> {
        if !(ymax > 0.0) || ny < 16 {
            return Err(DwsError::InvalidParameter(format!(
                "ygrid needs ymax > 0 and ny >= 16 (got {ymax}, {ny})"
            )));
        }
        let m = (ny - 1) as i32;
        let h_top = (0.02f64).min(ymax / ny as f64);
        // Find the ratio r with ymax (r-1)/(r^m - 1) = h_top by bisection;
        // the left side decreases from ymax/m (r -> 1) towards 0.
        let target = h_top / ymax;
        let width = |r: f64| {
            if (r - 1.0).abs() < 1e-12 {
                1.0 / m as f64
            } else {
                (r - 1.0) / (r.powi(m) - 1.0)
            }
        };
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if width(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        let denom = r.powi(m) - 1.0;
        let mut nodes: Vec<f64> = (0..ny)
            .map(|i| -ymax * (r.powi(m - i as i32) - 1.0) / denom)
            .collect();
        nodes[0] = -ymax;
        nodes[ny - 1] = 0.0;
        Ok(Arc::new(YGrid { nodes, ymax }))
    }

    /// Rebuild a grid from stored nodes (file round-trips).
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Arc<Self>> {
        if nodes.len() < 2
            || *nodes.last().unwrap() != 0.0
            || nodes.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(DwsError::Format(
                "vertical nodes must increase strictly and end at 0".into(),
            ));
        }
        let ymax = -nodes[0];
        if !(ymax > 0.0) {
            return Err(DwsError::Format("vertical grid has no depth".into()));
        }
        Ok(Arc::new(YGrid { nodes, ymax }))
    }

    pub fn ny(&self) -> usize {
        self.nodes.len()
    }

    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Composite trapezoid weights for integration over `[-ymax, 0]`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = self.nodes[i + 1] - self.nodes[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    }

    pub fn same_ygrid(&self, other: &YGrid) -> Result<()> {
        if self.nodes == other.nodes {
            Ok(())
        } else {
            Err(DwsError::GridMismatch("vertical grids differ".into()))
        }
    }
}
