//! The explicit half-space solution operator and the Picard closure.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{DwsError, Result};
use crate::fft;
use crate::field::SpectralField;
use crate::grid::Grid2D;

use super::half_space::HalfSpaceField;
use super::ygrid::YGrid;
use super::DnoConfig;

/// Moments `M_p = ∫_0^h s^p e^{-t(h-s)} ds`, `p = 0..3`, for `t >= 0`.
///
/// Series below `t h = 0.5` (the recurrence cancels there), integration by
/// parts above.
fn far_moments(t: f64, h: f64) -> [f64; 4] {
    let tau = t * h;
    let mut m = [0.0; 4];
    if tau < 0.5 {
        // M_p = h^{p+1} sum_m (-tau)^m p!/(p+m+1)!
        let mut hp = h;
        for (p, mp) in m.iter_mut().enumerate() {
            let mut term = 1.0 / (p as f64 + 1.0);
            let mut acc = term;
            for k in 1..25 {
                term *= -tau / (p as f64 + 1.0 + k as f64);
                acc += term;
                if term.abs() < 1e-18 * acc.abs() {
                    break;
                }
            }
            *mp = hp * acc;
            hp *= h;
        }
    } else {
        let e = (-tau).exp();
        m[0] = (1.0 - e) / t;
        let mut hp = 1.0;
        for p in 1..4 {
            hp *= h;
            m[p] = (hp - p as f64 * m[p - 1]) / t;
        }
    }
    m
}

/// Moments `N_p = ∫_0^h s^p e^{-t s} ds`, `p = 0..3`.
fn near_moments(t: f64, h: f64) -> [f64; 4] {
    let tau = t * h;
    let mut n = [0.0; 4];
    if tau < 0.5 {
        // N_p = h^{p+1} sum_m (-tau)^m / (m! (p+m+1))
        let mut hp = h;
        for (p, np) in n.iter_mut().enumerate() {
            let mut term = 1.0; // (-tau)^m / m!
            let mut acc = 1.0 / (p as f64 + 1.0);
            for k in 1..25 {
                term *= -tau / k as f64;
                let add = term / (p as f64 + 1.0 + k as f64);
                acc += add;
                if add.abs() < 1e-18 * acc.abs() {
                    break;
                }
            }
            *np = hp * acc;
            hp *= h;
        }
    } else {
        let e = (-tau).exp();
        n[0] = (1.0 - e) / t;
        let mut hp = 1.0;
        for p in 1..4 {
            hp *= h;
            n[p] = (p as f64 * n[p - 1] - hp * e) / t;
        }
    }
    n
}

/// Per-interval cubic interpolation stencils: for interval `i` the matrix
/// maps the four data values on nodes `sten..sten+4` to monomial
/// coefficients in the local variable `s = y - y_i`.
struct CubicStencils {
    sten: Vec<usize>,
    basis: Vec<[[f64; 4]; 4]>,
}

fn cubic_stencils(ys: &[f64]) -> CubicStencils {
    let n = ys.len();
    let mut sten = Vec::with_capacity(n - 1);
    let mut basis = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let s0 = i.saturating_sub(1).min(n - 4);
        sten.push(s0);
        // Vandermonde in local coordinates, then invert.
        let mut v = [[0.0f64; 4]; 4];
        for j in 0..4 {
            let s = ys[s0 + j] - ys[i];
            v[j] = [1.0, s, s * s, s * s * s];
        }
        basis.push(invert4(v));
    }
    CubicStencils { sten, basis }
}

/// Inverse of a 4x4 matrix by Gauss-Jordan with partial pivoting.
fn invert4(mut a: [[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut inv = [[0.0f64; 4]; 4];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..4 {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for row in 0..4 {
            if row != col {
                let f = a[row][col];
                for j in 0..4 {
                    a[row][j] -= f * a[col][j];
                    inv[row][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

/// Monomial coefficients of the cubic through the stencil values.
#[inline]
fn cubic_coeffs(b: &[[f64; 4]; 4], f: [Complex64; 4]) -> [Complex64; 4] {
    let mut c = [Complex64::default(); 4];
    for (p, cp) in c.iter_mut().enumerate() {
        *cp = b[p][0] * f[0] + b[p][1] * f[1] + b[p][2] * f[2] + b[p][3] * f[3];
    }
    c
}

#[inline]
fn dot_moments(c: &[Complex64; 4], m: &[f64; 4]) -> Complex64 {
    c[0] * m[0] + c[1] * m[1] + c[2] * m[2] + c[3] * m[3]
}

/// Solve the linear half-space problem with divergence-form data
/// `(F1, F2, F3)` and Neumann data `xi_x`, returning `(u, u_y)`.
///
/// Per wavenumber `k != 0` the solution is the sum of a two-sided
/// exponential-kernel integral of the data, its image term, and the boundary
/// term `(i k1/|k|) hat(xi) e^{|k| y}`; the vertical derivative is obtained
/// analytically from the same sweeps. The `k = 0` mode is gauged to zero.
/// The data profiles are interpolated by per-interval cubics (4-node
/// stencils) and the kernel is integrated exactly against them, so the
/// quadrature bias is O(h^4) per interval.
pub fn solve_s(
    f: Option<[&HalfSpaceField; 3]>,
    xi: &SpectralField,
    ygrid: &Arc<YGrid>,
) -> Result<(HalfSpaceField, HalfSpaceField)> {
    let grid = xi.grid().clone();
    if let Some(fs) = f {
        for fi in fs {
            grid.same_grid(fi.grid())?;
            ygrid.same_ygrid(fi.ygrid())?;
        }
    }
    let ny = ygrid.ny();
    let ys: Vec<f64> = ygrid.nodes().to_vec();
    let st = cubic_stencils(&ys);
    let mut u = HalfSpaceField::zero(&grid, ygrid);
    let mut uy = HalfSpaceField::zero(&grid, ygrid);

    let mut a = vec![Complex64::default(); ny];
    let mut b = vec![Complex64::default(); ny];
    let mut f2v = vec![Complex64::default(); ny];
    let mut aup = vec![Complex64::default(); ny];
    let mut adown = vec![Complex64::default(); ny];

    for (ix, iz, k1, k3) in grid.modes() {
        let t = k1.hypot(k3);
        if t == 0.0 {
            continue;
        }
        let idx = grid.index(ix, iz);
        let xib = xi.coeffs()[idx];

        if let Some([f1, f2, f3]) = f {
            for i in 0..ny {
                let g = (Complex64::new(0.0, -k1) * f1.layer(i)[idx]
                    + Complex64::new(0.0, -k3) * f3.layer(i)[idx])
                    / (2.0 * t);
                f2v[i] = f2.layer(i)[idx];
                let half = 0.5 * f2v[i];
                a[i] = g + half;
                b[i] = g - half;
            }
            aup[0] = Complex64::default();
            for i in 0..ny - 1 {
                let h = ys[i + 1] - ys[i];
                let s0 = st.sten[i];
                let c = cubic_coeffs(&st.basis[i], [a[s0], a[s0 + 1], a[s0 + 2], a[s0 + 3]]);
                aup[i + 1] = aup[i] * (-t * h).exp() + dot_moments(&c, &far_moments(t, h));
            }
            adown[ny - 1] = Complex64::default();
            for i in (0..ny - 1).rev() {
                let h = ys[i + 1] - ys[i];
                let s0 = st.sten[i];
                let c = cubic_coeffs(&st.basis[i], [b[s0], b[s0 + 1], b[s0 + 2], b[s0 + 3]]);
                adown[i] = adown[i + 1] * (-t * h).exp() + dot_moments(&c, &near_moments(t, h));
            }
            let c = aup[ny - 1];
            for i in 0..ny {
                let ey = (t * ys[i]).exp();
                let j = c * ey;
                let bdry = Complex64::new(0.0, k1 / t) * xib * ey;
                u.layer_mut(i)[idx] = aup[i] + adown[i] + j + bdry;
                uy.layer_mut(i)[idx] =
                    f2v[i] + t * (adown[i] - aup[i] + j) + Complex64::new(0.0, k1) * xib * ey;
            }
        } else {
            for i in 0..ny {
                let ey = (t * ys[i]).exp();
                u.layer_mut(i)[idx] = Complex64::new(0.0, k1 / t) * xib * ey;
                uy.layer_mut(i)[idx] = Complex64::new(0.0, k1) * xib * ey;
            }
        }
    }
    Ok((u, uy))
}

/// 2/3-rule mask on a raw spectral slice.
fn mask23(grid: &Grid2D, coeffs: &mut [Complex64]) {
    let (nx, nz) = (grid.nx(), grid.nz());
    let (jmax, lmax) = (nx / 3, nz / 3);
    for iz in 0..nz {
        let l = if iz < nz / 2 { iz } else { nz - iz };
        for ix in 0..nx {
            let j = if ix < nx / 2 { ix } else { nx - ix };
            if j > jmax || l > lmax {
                coeffs[grid.index(ix, iz)] = Complex64::default();
            }
        }
    }
}

fn to_phys(grid: &Grid2D, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut v = coeffs.to_vec();
    fft::inverse(grid, &mut v);
    v
}

fn to_spec_masked(grid: &Grid2D, mut vals: Vec<Complex64>) -> Vec<Complex64> {
    fft::forward(grid, &mut vals);
    mask23(grid, &mut vals);
    vals
}

/// The divergence-form data `F(η, u)` of the flattened problem:
/// `F1 = η_x u_y`, `F2 = η_x u_x + η_z u_z - (η_x^2 + η_z^2) u_y`,
/// `F3 = η_z u_y`, layer by layer. All products are 2/3-dealiased; the
/// cubic `(η_x^2 + η_z^2) u_y` is built as two cascaded masked quadratics,
/// which keeps it alias-free as well.
pub fn nonlinear_f(
    eta: &SpectralField,
    u: &HalfSpaceField,
    uy: &HalfSpaceField,
) -> (HalfSpaceField, HalfSpaceField, HalfSpaceField) {
    let grid = u.grid().clone();
    let ygrid = u.ygrid().clone();
    let ny = ygrid.ny();

    let ex = to_phys(&grid, eta.derivative_x().dealias().coeffs());
    let ez = to_phys(&grid, eta.derivative_z().dealias().coeffs());
    // q = η_x^2 + η_z^2, masked before it multiplies u_y.
    let q_spec = to_spec_masked(
        &grid,
        ex.iter().zip(&ez).map(|(a, b)| a * a + b * b).collect(),
    );
    let q = to_phys(&grid, &q_spec);

    let mut f1 = HalfSpaceField::zero(&grid, &ygrid);
    let mut f2 = HalfSpaceField::zero(&grid, &ygrid);
    let mut f3 = HalfSpaceField::zero(&grid, &ygrid);

    let n = grid.len();
    let mut ux_s = vec![Complex64::default(); n];
    let mut uz_s = vec![Complex64::default(); n];
    let mut uy_s = vec![Complex64::default(); n];
    for i in 0..ny {
        let ul = u.layer(i);
        for (ixz, (_, _, k1, k3)) in grid.modes().enumerate() {
            ux_s[ixz] = Complex64::new(0.0, k1) * ul[ixz];
            uz_s[ixz] = Complex64::new(0.0, k3) * ul[ixz];
        }
        uy_s.copy_from_slice(uy.layer(i));
        mask23(&grid, &mut ux_s);
        mask23(&grid, &mut uz_s);
        mask23(&grid, &mut uy_s);
        let uxp = to_phys(&grid, &ux_s);
        let uzp = to_phys(&grid, &uz_s);
        let uyp = to_phys(&grid, &uy_s);

        let f1p: Vec<Complex64> = ex.iter().zip(&uyp).map(|(a, b)| a * b).collect();
        let f3p: Vec<Complex64> = ez.iter().zip(&uyp).map(|(a, b)| a * b).collect();
        let f2p: Vec<Complex64> = (0..n)
            .map(|j| ex[j] * uxp[j] + ez[j] * uzp[j] - q[j] * uyp[j])
            .collect();
        f1.layer_mut(i).copy_from_slice(&to_spec_masked(&grid, f1p));
        f2.layer_mut(i).copy_from_slice(&to_spec_masked(&grid, f2p));
        f3.layer_mut(i).copy_from_slice(&to_spec_masked(&grid, f3p));
    }
    (f1, f2, f3)
}

/// Convergence trace of a Picard solve.
#[derive(Debug, Clone)]
pub struct DnReport {
    pub iterations: usize,
    /// Relative iterate changes, one per iteration.
    pub changes: Vec<f64>,
    /// Ratios of consecutive changes (contraction factors).
    pub contraction: Vec<f64>,
}

/// Converged solution of the flattened problem: the field and its vertical
/// derivative (obtained analytically, not by differencing).
#[derive(Debug, Clone)]
pub struct DnSolution {
    pub u: HalfSpaceField,
    pub uy: HalfSpaceField,
    pub report: DnReport,
}

/// Solve the nonlinear flattened problem by Picard iteration
/// `u_{n+1} = S(F(η, u_n), ξ)`, starting from the `η = 0` solution.
pub fn solve_dn(
    eta: &SpectralField,
    xi: &SpectralField,
    cfg: &DnoConfig,
) -> Result<DnSolution> {
    cfg.validate()?;
    eta.grid().same_grid(xi.grid())?;
    let ygrid = YGrid::new(cfg.ymax, cfg.ny)?;

    // Additive-constant gauge: drop the mean mode of the Neumann data.
    let xi = {
        let mut c = xi.coeffs().to_vec();
        c[0] = Complex64::default();
        SpectralField::from_coeffs(xi.grid(), c)
    };

    let (mut u, mut uy) = solve_s(None, &xi, &ygrid)?;
    let base = u.sobolev_norm(2.0) + uy.sobolev_norm(2.0);
    let mut changes = Vec::new();
    if base == 0.0 {
        u.check_decay(1e-8)?;
        return Ok(DnSolution {
            u,
            uy,
            report: DnReport {
                iterations: 0,
                changes,
                contraction: Vec::new(),
            },
        });
    }

    let mut converged = false;
    for it in 1..=cfg.picard_max {
        let (f1, f2, f3) = nonlinear_f(eta, &u, &uy);
        let (u2, uy2) = solve_s(Some([&f1, &f2, &f3]), &xi, &ygrid)?;
        let change =
            (u2.sub(&u).sobolev_norm(2.0) + uy2.sub(&uy).sobolev_norm(2.0)) / base;
        u = u2;
        uy = uy2;
        changes.push(change);
        if change <= cfg.picard_tol {
            converged = true;
        }
        let n = changes.len();
        if n >= 2 && changes[n - 1] >= changes[n - 2] && changes[n - 1] > 100.0 * cfg.picard_tol
        {
            return Err(DwsError::Divergence(format!(
                "picard iteration not contracting at step {it} (changes {:.3e} -> {:.3e}); \
                 surface elevation too large for the solver's regime",
                changes[n - 2],
                changes[n - 1]
            )));
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(DwsError::Divergence(format!(
            "picard iteration cap {} reached (last change {:.3e})",
            cfg.picard_max,
            changes.last().copied().unwrap_or(f64::NAN)
        )));
    }
    let contraction = changes.windows(2).map(|w| w[1] / w[0]).collect();
    u.check_decay(1e-8)?;
    Ok(DnSolution {
        u,
        uy,
        report: DnReport {
            iterations: changes.len(),
            changes: changes.clone(),
            contraction,
        },
    })
}


/// `K(η)ξ = -∂_x (u|_{y=0})` of the flattened solution.
pub fn k_op(eta: &SpectralField, xi: &SpectralField, cfg: &DnoConfig) -> Result<SpectralField> {
    let sol = solve_dn(eta, xi, cfg)?;
    Ok(sol.u.top().derivative_x().scale(-1.0))
}

/// `L(η)ξ = -∂_z (u|_{y=0})`.
pub fn l_op(eta: &SpectralField, xi: &SpectralField, cfg: &DnoConfig) -> Result<SpectralField> {
    let sol = solve_dn(eta, xi, cfg)?;
    Ok(sol.u.top().derivative_z().scale(-1.0))
}

/// Both traces from a single solve.
pub fn kl_op(
    eta: &SpectralField,
    xi: &SpectralField,
    cfg: &DnoConfig,
) -> Result<(SpectralField, SpectralField, DnReport)> {
    let sol = solve_dn(eta, xi, cfg)?;
    let top = sol.u.top();
    Ok((
        top.derivative_x().scale(-1.0),
        top.derivative_z().scale(-1.0),
        sol.report,
    ))
}
