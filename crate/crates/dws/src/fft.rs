//! Thin 2D FFT layer over rustfft with per-thread plan caching.
//!
//! Coefficients are stored unnormalized; the `1/(nx*nz)` normalization is
//! applied on the inverse transform only.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::grid::Grid2D;

thread_local! {
    static CACHE: RefCell<PlanCache> = RefCell::new(PlanCache::default());
}

#[derive(Default)]
struct PlanCache {
    planner: Option<FftPlanner<f64>>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if let Some(p) = c.plans.get(&(n, inverse)) {
            return p.clone();
        }
        let planner = c.planner.get_or_insert_with(FftPlanner::new);
        let dir = if inverse {
            FftDirection::Inverse
        } else {
            FftDirection::Forward
        };
        let p = planner.plan_fft(n, dir);
        c.plans.insert((n, inverse), p.clone());
        p
    })
}

fn transform_2d(grid: &Grid2D, data: &mut [Complex64], inverse: bool) {
    let (nx, nz) = (grid.nx(), grid.nz());
    debug_assert_eq!(data.len(), nx * nz);

    let row_plan = plan(nx, inverse);
    let mut scratch = vec![Complex64::default(); row_plan.get_inplace_scratch_len()];
    for iz in 0..nz {
        row_plan.process_with_scratch(&mut data[iz * nx..(iz + 1) * nx], &mut scratch);
    }

    let col_plan = plan(nz, inverse);
    let mut col = vec![Complex64::default(); nz];
    let mut scratch = vec![Complex64::default(); col_plan.get_inplace_scratch_len()];
    for ix in 0..nx {
        for iz in 0..nz {
            col[iz] = data[iz * nx + ix];
        }
        col_plan.process_with_scratch(&mut col, &mut scratch);
        for iz in 0..nz {
            data[iz * nx + ix] = col[iz];
        }
    }

    if inverse {
        let scale = 1.0 / (nx * nz) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// In-place forward 2D transform (unnormalized).
pub fn forward(grid: &Grid2D, data: &mut [Complex64]) {
    transform_2d(grid, data, false);
}

/// In-place inverse 2D transform (normalized by `1/(nx*nz)`).
pub fn inverse(grid: &Grid2D, data: &mut [Complex64]) {
    transform_2d(grid, data, true);
}
