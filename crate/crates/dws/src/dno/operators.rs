//! Closed-form expansion pieces of the trace operators and the energy
//! gradients.
//!
//! `K0`, `L0`, `M0` are the flat-surface multipliers; `K1`/`L1` are the
//! first-order corrections in closed form; `kprime*`/`lprime*` are the
//! Maclaurin terms of the gradients of the surface energy `𝒦` and the
//! kinetic energy `ℒ`, with `kprime_full`/`lprime_full` evaluating the exact
//! formulae (the latter through the half-space solver).

use num_complex::Complex64;

use crate::error::{DwsError, Result};
use crate::field::SpectralField;

use super::solve::kl_op;
use super::DnoConfig;

/// `K0 = k1^2/|k|` (mean mode annihilated).
pub fn k0(f: &SpectralField) -> SpectralField {
    f.apply_multiplier(|k1, k3| {
        let n = k1.hypot(k3);
        if n == 0.0 {
            0.0
        } else {
            k1 * k1 / n
        }
    })
    .expect("finite symbol")
}

/// `L0 = k1 k3/|k|`.
pub fn l0(f: &SpectralField) -> SpectralField {
    f.apply_multiplier(|k1, k3| {
        let n = k1.hypot(k3);
        if n == 0.0 {
            0.0
        } else {
            k1 * k3 / n
        }
    })
    .expect("finite symbol")
}

/// `M0 = k3^2/|k|`.
pub fn m0(f: &SpectralField) -> SpectralField {
    f.apply_multiplier(|k1, k3| {
        let n = k1.hypot(k3);
        if n == 0.0 {
            0.0
        } else {
            k3 * k3 / n
        }
    })
    .expect("finite symbol")
}

/// First-order trace expansion `K1(η)ξ = -(η ξ_x)_x - K0(η K0 ξ) - L0(η L0 ξ)`
/// (the displayed diagonal formula, polarized by bilinearity).
pub fn k1_closed(eta: &SpectralField, xi: &SpectralField) -> SpectralField {
    let t1 = eta.mul(&xi.derivative_x()).derivative_x();
    let t2 = k0(&eta.mul(&k0(xi)));
    let t3 = l0(&eta.mul(&l0(xi)));
    t1.add(&t2).add(&t3).scale(-1.0)
}

/// `L1(η)ξ = -(η ξ_x)_z - L0(η K0 ξ) - M0(η L0 ξ)`.
pub fn l1_closed(eta: &SpectralField, xi: &SpectralField) -> SpectralField {
    let t1 = eta.mul(&xi.derivative_x()).derivative_z();
    let t2 = l0(&eta.mul(&k0(xi)));
    let t3 = m0(&eta.mul(&l0(xi)));
    t1.add(&t2).add(&t3).scale(-1.0)
}

/// Symmetric bilinear form with `m(η, η)` the quadratic term of the kinetic
/// gradient:
/// `m(u,v) = 1/2 (u_x v_x - K0u K0v - L0u L0v)
///         + 1/2 (-(u_x v + u v_x)_x - K0(u K0v + v K0u) - L0(u L0v + v L0u))`.
pub fn m_bilinear(u: &SpectralField, v: &SpectralField) -> SpectralField {
    let (ux, vx) = (u.derivative_x(), v.derivative_x());
    let (k0u, k0v) = (k0(u), k0(v));
    let (l0u, l0v) = (l0(u), l0(v));
    let pointwise = ux
        .mul(&vx)
        .sub(&k0u.mul(&k0v))
        .sub(&l0u.mul(&l0v));
    let dx_part = ux.mul(v).add(&u.mul(&vx)).derivative_x();
    let k_part = k0(&u.mul(&k0v).add(&v.mul(&k0u)));
    let l_part = l0(&u.mul(&l0v).add(&v.mul(&l0u)));
    pointwise.sub(&dx_part).sub(&k_part).sub(&l_part).scale(0.5)
}

/// `𝒦′₁(η) = η - η_xx - η_zz` (symbol `1 + |k|^2`).
pub fn kprime1(eta: &SpectralField) -> SpectralField {
    eta.apply_multiplier(|k1, k3| 1.0 + k1 * k1 + k3 * k3)
        .expect("finite symbol")
}

/// `𝒦′₃(η) = 1/2 ((|∇η|^2 η_x)_x + (|∇η|^2 η_z)_z)`.
pub fn kprime3(eta: &SpectralField) -> SpectralField {
    let ex = eta.derivative_x();
    let ez = eta.derivative_z();
    let q = ex.mul(&ex).add(&ez.mul(&ez));
    q.mul(&ex)
        .derivative_x()
        .add(&q.mul(&ez).derivative_z())
        .scale(0.5)
}

/// Exact gradient of the surface energy:
/// `𝒦′(η) = η - [η_x/W]_x - [η_z/W]_z`, `W = sqrt(1 + |∇η|^2)`.
pub fn kprime_full(eta: &SpectralField) -> SpectralField {
    let ex = eta.derivative_x();
    let ez = eta.derivative_z();
    let w_inv: Vec<Complex64> = ex
        .values()
        .iter()
        .zip(ez.values())
        .map(|(a, b)| Complex64::new(1.0 / (1.0 + a.re * a.re + b.re * b.re).sqrt(), 0.0))
        .collect();
    let winv = SpectralField::from_values(eta.grid(), w_inv);
    eta.sub(&ex.mul(&winv).derivative_x())
        .sub(&ez.mul(&winv).derivative_z())
}

/// Surface energy `𝒦(η) = ∫ (η^2/2 + W - 1) dx dz`.
pub fn kfunc(eta: &SpectralField) -> f64 {
    let ex = eta.derivative_x();
    let ez = eta.derivative_z();
    let mut acc = 0.0;
    for ((e, a), b) in eta.values().iter().zip(ex.values()).zip(ez.values()) {
        let w = (1.0 + a.re * a.re + b.re * b.re).sqrt();
        acc += 0.5 * e.re * e.re + w - 1.0;
    }
    acc * eta.grid().cell_area_x()
}

/// `ℒ′₁(η) = K0 η`.
pub fn lprime1(eta: &SpectralField) -> SpectralField {
    k0(eta)
}

/// `ℒ′₂(η) = m(η, η)`; the derivative is `dℒ′₂[η](v) = 2 m(η, v)`.
pub fn lprime2(eta: &SpectralField) -> SpectralField {
    m_bilinear(eta, eta)
}

/// Third-order term of the kinetic gradient (14 displayed terms), valid for
/// fields with compactly supported spectrum; rejected otherwise since the
/// unmasked products would alias.
pub fn lprime3(eta: &SpectralField) -> Result<SpectralField> {
    check_band_limited(eta)?;
    let k0e = k0(eta);
    let l0e = l0(eta);
    let k_ke = k0(&eta.mul(&k0e)); // K0(η K0 η)
    let l_le = l0(&eta.mul(&l0e)); // L0(η L0 η)
    let l_ke = l0(&eta.mul(&k0e)); // L0(η K0 η)
    let m_le = m0(&eta.mul(&l0e)); // M0(η L0 η)

    let exx = eta.derivative_x().derivative_x();
    let exz = eta.derivative_x().derivative_z();
    let e2 = eta.mul(eta);

    let mut acc = k0e.mul(&k_ke);
    acc = acc.add(&k0e.mul(&l_le));
    acc = acc.add(&l0e.mul(&l_ke));
    acc = acc.add(&l0e.mul(&m_le));
    acc = acc.add(&k0(&eta.mul(&k_ke)));
    acc = acc.add(&k0(&eta.mul(&l_le)));
    acc = acc.add(&l0(&eta.mul(&l_ke)));
    acc = acc.add(&l0(&eta.mul(&m_le)));
    acc = acc.add(&eta.mul(&k0e).mul(&exx));
    acc = acc.add(&k0(&e2.mul(&exx)).scale(0.5));
    acc = acc.add(&e2.mul(&k0e).derivative_x().derivative_x().scale(0.5));
    acc = acc.add(&eta.mul(&l0e).mul(&exz));
    acc = acc.add(&l0(&e2.mul(&exz)).scale(0.5));
    acc = acc.add(&e2.mul(&l0e).derivative_x().derivative_z().scale(0.5));
    Ok(acc)
}

/// Exact kinetic gradient from the traces `Kη = K(η)η`, `Lη = L(η)η`:
/// `ℒ′(η) = -1/2 (Kη)^2 - 1/2 (Lη)^2
///        + (η_x - η_x Kη - η_z Lη)^2 / (2(1 + |∇η|^2)) + Kη`.
pub fn lprime_full_with(
    eta: &SpectralField,
    keta: &SpectralField,
    leta: &SpectralField,
) -> SpectralField {
    let ex = eta.derivative_x();
    let ez = eta.derivative_z();
    let vals: Vec<Complex64> = (0..eta.grid().len())
        .map(|j| {
            let (a, b) = (ex.values()[j].re, ez.values()[j].re);
            let (k, l) = (keta.values()[j].re, leta.values()[j].re);
            let num = a - a * k - b * l;
            let v = -0.5 * k * k - 0.5 * l * l
                + num * num / (2.0 * (1.0 + a * a + b * b))
                + k;
            Complex64::new(v, 0.0)
        })
        .collect();
    SpectralField::from_values(eta.grid(), vals)
}

/// `ℒ′(η)` via a fresh half-space solve.
pub fn lprime_full(eta: &SpectralField, cfg: &DnoConfig) -> Result<SpectralField> {
    let (keta, leta, _) = kl_op(eta, eta, cfg)?;
    Ok(lprime_full_with(eta, &keta, &leta))
}

/// Kinetic energy `ℒ(η) = 1/2 ∫ η K(η)η dx dz`.
pub fn lfunc(eta: &SpectralField, cfg: &DnoConfig) -> Result<f64> {
    let (keta, _, _) = kl_op(eta, eta, cfg)?;
    Ok(0.5 * eta.inner(&keta).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid(nx: usize, nz: usize) -> Arc<Grid2D> {
        Grid2D::new(nx, nz, PI, PI).unwrap()
    }

    fn random_direction(g: &Arc<Grid2D>, rng: &mut ChaCha8Rng) -> SpectralField {
        let mut a = [[0.0f64; 2]; 3];
        let mut b = [[0.0f64; 2]; 3];
        for j in 0..3 {
            for l in 0..2 {
                a[j][l] = rng.gen_range(-1.0..1.0);
                b[j][l] = rng.gen_range(-1.0..1.0);
            }
        }
        a[0][0] = 0.0; // keep the mean mode out of the direction
        b[0][0] = 0.0;
        SpectralField::from_fn_real(g, |x, z| {
            let mut s = 0.0;
            for j in 0..3 {
                for l in 0..2 {
                    let (jx, lz) = (j as f64 * x, l as f64 * z);
                    s += a[j][l] * jx.cos() * lz.cos() + b[j][l] * jx.sin() * lz.cos();
                }
            }
            s
        })
    }

    #[test]
    fn flat_multipliers() {
        let g = grid(32, 8);
        let cosx = SpectralField::from_fn_real(&g, |x, _| x.cos());
        assert!(k0(&cosx).sub(&cosx).max_abs() < 1e-13);
        assert!(m0(&cosx).max_abs() < 1e-13);
        assert!(l0(&cosx).max_abs() < 1e-13);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_direction(&g, &mut rng);
        let v = random_direction(&g, &mut rng);
        // K0 + M0 = |D|.
        let abs_d = u
            .apply_multiplier(|k1, k3| k1.hypot(k3))
            .unwrap();
        assert!(k0(&u).add(&m0(&u)).sub(&abs_d).max_abs() < 1e-12);
        // K0 self-adjoint and positive semidefinite.
        let uv = k0(&u).inner(&v).re;
        let vu = u.inner(&k0(&v)).re;
        assert!((uv - vu).abs() < 1e-12 * uv.abs().max(1.0));
        assert!(k0(&u).inner(&u).re >= -1e-12);
    }

    #[test]
    fn first_order_trace_closed_forms() {
        let g = grid(32, 8);
        let cosx = SpectralField::from_fn_real(&g, |x, _| x.cos());
        let sinx = SpectralField::from_fn_real(&g, |x, _| x.sin());
        let cos2x = SpectralField::from_fn_real(&g, |x, _| (2.0 * x).cos());
        // Hand-checked cancellations and couplings.
        assert!(k1_closed(&cosx, &cosx).max_abs() < 1e-12);
        assert!(l1_closed(&cosx, &cosx).max_abs() < 1e-12);
        assert!(k1_closed(&SpectralField::zero(&g), &sinx).max_abs() == 0.0);
        assert!(k1_closed(&cos2x, &sinx).sub(&sinx).max_abs() < 1e-12);
    }

    #[test]
    fn bilinear_form_closed_forms() {
        let g = grid(32, 8);
        let cosx = SpectralField::from_fn_real(&g, |x, _| x.cos());
        let want = SpectralField::from_fn_real(&g, |x, _| -0.5 * (2.0 * x).cos());
        assert!(m_bilinear(&cosx, &cosx).sub(&want).max_abs() < 1e-12);
        assert!(m_bilinear(&cosx, &SpectralField::zero(&g)).max_abs() == 0.0);
        assert!(lprime2(&cosx).sub(&want).max_abs() < 1e-12);
    }

    #[test]
    fn surface_gradient_terms() {
        let g = grid(32, 8);
        let a = 0.5;
        let cosx = SpectralField::from_fn_real(&g, |x, _| x.cos());
        assert!(kprime1(&cosx).sub(&cosx.scale(2.0)).max_abs() < 1e-13);
        let a3 = a * a * a;
        let want = SpectralField::from_fn_real(&g, |x, _| {
            -3.0 * a3 / 8.0 * x.cos() + 3.0 * a3 / 8.0 * (3.0 * x).cos()
        });
        assert!(kprime3(&cosx.scale(a)).sub(&want).max_abs() < 1e-12);
        assert!(kprime_full(&SpectralField::zero(&g)).max_abs() == 0.0);
    }

    #[test]
    fn kinetic_third_order_single_mode() {
        let g = grid(32, 8);
        let a = 0.4;
        let eta = SpectralField::from_fn_real(&g, |x, _| a * x.cos());
        let cosx = SpectralField::from_fn_real(&g, |x, _| x.cos());
        let lp3 = lprime3(&eta).unwrap();
        // cos x component is twice the (1,0)-mode, i.e. -a^3/2.
        let comp = lp3.inner(&cosx).re / cosx.inner(&cosx).re;
        assert!((comp + a * a * a / 2.0).abs() < 1e-12, "component {comp}");
        // Broadband input is rejected (cubes would alias).
        let wide = SpectralField::from_fn_real(&g, |x, _| (8.0 * x).cos());
        assert!(matches!(lprime3(&wide), Err(DwsError::NotBandLimited(_))));
    }

    #[test]
    fn surface_gradient_expansion_remainder_is_fifth_order() {
        let g = grid(32, 8);
        let shape = SpectralField::from_fn_real(&g, |x, z| x.cos() * (1.0 + 0.3 * z.cos()));
        let r = |a: f64| {
            let eta = shape.scale(a);
            kprime_full(&eta)
                .sub(&kprime1(&eta))
                .sub(&kprime3(&eta))
                .l2_norm()
        };
        let (r1, r2) = (r(0.2), r(0.1));
        let slope = (r1 / r2).log2();
        assert!((4.7..=5.5).contains(&slope), "slope {slope} ({r1:.3e}, {r2:.3e})");
    }

    #[test]
    fn surface_energy_gradient_matches_finite_differences() {
        let g = grid(32, 8);
        let eta = SpectralField::from_fn_real(&g, |x, z| {
            0.1 * (x.cos() + 0.4 * (2.0 * x).cos() * z.cos())
        });
        let grad = kprime_full(&eta);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = 1e-4;
        for _ in 0..10 {
            let v = random_direction(&g, &mut rng);
            let fd = (kfunc(&eta.add(&v.scale(s))) - kfunc(&eta.sub(&v.scale(s)))) / (2.0 * s);
            let pairing = grad.inner(&v).re;
            assert!(
                (fd - pairing).abs() <= 1e-5 * pairing.abs().max(1e-3),
                "fd {fd} vs pairing {pairing}"
            );
        }
    }

    #[test]
    fn kinetic_energy_gradient_matches_finite_differences() {
        let g = grid(32, 8);
        let cfg = DnoConfig::default();
        let eta = SpectralField::from_fn_real(&g, |x, z| {
            0.1 * (x.cos() + 0.4 * (2.0 * x).cos() * z.cos())
        });
        let grad = lprime_full(&eta, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let s = 1e-4;
        for _ in 0..10 {
            let v = random_direction(&g, &mut rng);
            let fd = (lfunc(&eta.add(&v.scale(s)), &cfg).unwrap()
                - lfunc(&eta.sub(&v.scale(s)), &cfg).unwrap())
                / (2.0 * s);
            let pairing = grad.inner(&v).re;
            assert!(
                (fd - pairing).abs() <= 1e-5 * pairing.abs().max(1e-3),
                "fd {fd} vs pairing {pairing}"
            );
        }
    }

    #[test]
    fn kinetic_gradient_maclaurin_terms() {
        let g = grid(32, 16);
        let cfg = DnoConfig::default();
        let eta = SpectralField::from_fn_real(&g, |x, z| x.cos() * (1.0 + 0.4 * z.cos()));
        let lp1 = lprime1(&eta);
        let lp2 = lprime2(&eta);
        let lp3 = lprime3(&eta).unwrap();

        // Extracting the quadratic term from the full gradient converges at
        // first order in t.
        let extract_err = |t: f64| {
            lprime_full(&eta.scale(t), &cfg)
                .unwrap()
                .sub(&lp1.scale(t))
                .scale(1.0 / (t * t))
                .sub(&lp2)
                .l2_norm()
        };
        let (e1, e2) = (extract_err(0.1), extract_err(0.01));
        let slope = (e1 / e2).log10();
        assert!((0.9..=1.1).contains(&slope), "slope {slope} ({e1:.3e}, {e2:.3e})");

        // The remainder after three Maclaurin terms decays like t^4.
        let rem = |t: f64| {
            lprime_full(&eta.scale(t), &cfg)
                .unwrap()
                .sub(&lp1.scale(t))
                .sub(&lp2.scale(t * t))
                .sub(&lp3.scale(t * t * t))
                .l2_norm()
        };
        let (r1, r2) = (rem(0.2), rem(0.1));
        let slope4 = (r1 / r2).log2();
        assert!((3.4..=4.6).contains(&slope4), "slope {slope4} ({r1:.3e}, {r2:.3e})");
        assert!(lprime_full(&SpectralField::zero(&g), &cfg).unwrap().max_abs() == 0.0);
    }
}

/// Require the spectrum to sit low enough that triple products cannot alias
/// (max active mode index below n/6 in each direction).
fn check_band_limited(eta: &SpectralField) -> Result<()> {
    let g = eta.grid();
    let peak = eta
        .coeffs()
        .iter()
        .fold(0.0f64, |m, c| m.max(c.norm()));
    if peak == 0.0 {
        return Ok(());
    }
    let (mut jmax, mut lmax) = (0usize, 0usize);
    for iz in 0..g.nz() {
        let l = if iz < g.nz() / 2 { iz } else { g.nz() - iz };
        for ix in 0..g.nx() {
            let j = if ix < g.nx() / 2 { ix } else { g.nx() - ix };
            if eta.coeffs()[g.index(ix, iz)].norm() > 1e-13 * peak {
                jmax = jmax.max(j);
                lmax = lmax.max(l);
            }
        }
    }
    if 3 * jmax < g.nx() / 2 && 3 * lmax < g.nz() / 2 {
        Ok(())
    } else {
        Err(DwsError::NotBandLimited(format!(
            "active modes up to ({jmax}, {lmax}) on a {}x{} grid; cubic products would alias",
            g.nx(),
            g.nz()
        )))
    }
}
