//! Dual-represented scalar fields on the periodic rectangle.
//!
//! A [`SpectralField`] keeps its physical values and its (unnormalized)
//! Fourier coefficients in sync at all times; every operation is a pure
//! function returning a new field. The continuum Fourier transform is
//! recovered from a raw coefficient via [`Grid2D::hat_scale`], matching the
//! convention `hat u(k) = (1/2pi) \int u e^{-i k.x} dx dz`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{DwsError, Result};
use crate::fft;
use crate::grid::Grid2D;

/// Relative tolerance below which a field is flagged as real.
const REALNESS_TOL: f64 = 1e-12;

/// Parity classes used by [`SpectralField::symmetrize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// Real class: even in x and even in z.
    EvenEven,
    /// Complex class: `u(x,z) = conj(u(-x,z))` and `u(x,z) = u(x,-z)`.
    ConjEven,
}

/// Reflection axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Z,
}

#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<Grid2D>,
    values: Vec<Complex64>,
    coeffs: Vec<Complex64>,
    real: bool,
}

impl SpectralField {
    pub fn zero(grid: &Arc<Grid2D>) -> Self {
        SpectralField {
            grid: grid.clone(),
            values: vec![Complex64::default(); grid.len()],
            coeffs: vec![Complex64::default(); grid.len()],
            real: true,
        }
    }

    pub fn from_values(grid: &Arc<Grid2D>, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.len());
        let mut coeffs = values.clone();
        fft::forward(grid, &mut coeffs);
        let real = max_imag(&values) <= REALNESS_TOL * max_norm(&values).max(f64::MIN_POSITIVE);
        SpectralField {
            grid: grid.clone(),
            values,
            coeffs,
            real,
        }
    }

    pub fn from_coeffs(grid: &Arc<Grid2D>, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len());
        let mut values = coeffs.clone();
        fft::inverse(grid, &mut values);
        let real = max_imag(&values) <= REALNESS_TOL * max_norm(&values).max(f64::MIN_POSITIVE);
        SpectralField {
            grid: grid.clone(),
            values,
            coeffs,
            real,
        }
    }

    pub fn from_fn_real(grid: &Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let (ix, iz) = (i % grid.nx(), i / grid.nx());
                Complex64::new(f(grid.x_at(ix), grid.z_at(iz)), 0.0)
            })
            .collect();
        Self::from_values(grid, values)
    }

    pub fn from_fn(grid: &Arc<Grid2D>, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let (ix, iz) = (i % grid.nx(), i / grid.nx());
                f(grid.x_at(ix), grid.z_at(iz))
            })
            .collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Continuum Fourier transform value at lattice point `(ix, iz)`.
    pub fn hat(&self, ix: usize, iz: usize) -> Complex64 {
        self.coeffs[self.grid.index(ix, iz)] * self.grid.hat_scale()
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    // ---- multiplier application ---------------------------------------

    /// Apply the Fourier multiplier with real symbol `m(k1, k3)`.
    ///
    /// Every symbol must be finite on the lattice (the value at `k = 0` is
    /// supplied by the symbol itself); a non-finite value is rejected with a
    /// diagnostic naming the offending wavenumber.
    pub fn apply_multiplier(&self, symbol: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut coeffs = self.coeffs.clone();
        for (ix, iz, k1, k3) in self.grid.modes() {
            let m = symbol(k1, k3);
            if !m.is_finite() {
                return Err(DwsError::NonFiniteSymbol {
                    k1,
                    k3,
                    value: m,
                });
            }
            coeffs[self.grid.index(ix, iz)] *= m;
        }
        Ok(Self::from_coeffs(&self.grid, coeffs))
    }

    /// Apply a complex-symbol multiplier (e.g. `i k1` for a derivative).
    pub fn apply_multiplier_complex(
        &self,
        symbol: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        let mut coeffs = self.coeffs.clone();
        for (ix, iz, k1, k3) in self.grid.modes() {
            let m = symbol(k1, k3);
            if !m.re.is_finite() || !m.im.is_finite() {
                return Err(DwsError::NonFiniteSymbol {
                    k1,
                    k3,
                    value: f64::NAN,
                });
            }
            coeffs[self.grid.index(ix, iz)] *= m;
        }
        Ok(Self::from_coeffs(&self.grid, coeffs))
    }

    pub fn derivative_x(&self) -> Self {
        self.apply_multiplier_complex(|k1, _| Complex64::new(0.0, k1))
            .expect("finite symbol")
    }

    pub fn derivative_z(&self) -> Self {
        self.apply_multiplier_complex(|_, k3| Complex64::new(0.0, k3))
            .expect("finite symbol")
    }

    // ---- algebra ------------------------------------------------------

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    /// Pointwise physical-space product.
    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        self.map(|v| v * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// Drop any imaginary residue, returning a real field.
    pub fn real_part(&self) -> Self {
        self.map(|v| Complex64::new(v.re, 0.0))
    }

    fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_values(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        self.grid
            .same_grid(&other.grid)
            .expect("fields on different grids");
        Self::from_values(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    // ---- dealiasing ---------------------------------------------------

    /// 2/3-rule mask (alias-free for quadratic products): zero all modes
    /// with `|j| > nx/3` or `|l| > nz/3`.
    pub fn dealias(&self) -> Self {
        self.truncate(self.grid.nx() / 3, self.grid.nz() / 3)
    }

    /// Half-spectrum mask, alias-free for cubic products: with modes kept up
    /// to `n/4 - 1`, triple-product alias images fall strictly outside the
    /// kept band.
    pub fn dealias_cubic(&self) -> Self {
        self.truncate(self.grid.nx() / 4 - 1, self.grid.nz() / 4 - 1)
    }

    fn truncate(&self, jmax: usize, lmax: usize) -> Self {
        let (nx, nz) = (self.grid.nx(), self.grid.nz());
        let mut coeffs = self.coeffs.clone();
        for iz in 0..nz {
            let l = if iz < nz / 2 { iz } else { nz - iz };
            for ix in 0..nx {
                let j = if ix < nx / 2 { ix } else { nx - ix };
                if j > jmax || l > lmax {
                    coeffs[self.grid.index(ix, iz)] = Complex64::default();
                }
            }
        }
        Self::from_coeffs(&self.grid, coeffs)
    }

    /// Alias-free cubic product `a*b*c` (inputs and output masked with the
    /// quarter-spectrum cubic mask).
    pub fn cubic_dealiased(a: &Self, b: &Self, c: &Self) -> Self {
        let (a, b, c) = (a.dealias_cubic(), b.dealias_cubic(), c.dealias_cubic());
        a.mul(&b).mul(&c).dealias_cubic()
    }

    /// Zero all modes with `|j| > jmax` or `|l| > lmax`.
    pub fn truncate_modes(&self, jmax: usize, lmax: usize) -> Self {
        self.truncate(jmax, lmax)
    }

    /// Trigonometric refinement onto a finer lattice over the same box: the
    /// spectrum is zero-padded, so the result agrees with the original at
    /// shared points exactly (the original's Nyquist rows, which carry no
    /// signed frequency, are dropped).
    pub fn upsample(&self, nx: usize, nz: usize) -> Result<Self> {
        let g = &self.grid;
        if nx < g.nx() || nz < g.nz() {
            return Err(DwsError::InvalidParameter(format!(
                "upsample target {nx}x{nz} smaller than source {}x{}",
                g.nx(),
                g.nz()
            )));
        }
        if nx == g.nx() && nz == g.nz() {
            return Ok(self.clone());
        }
        let fine = Grid2D::new(nx, nz, g.lx(), g.lz())?;
        // Unnormalized forward coefficients scale with the point count.
        let gain = (nx * nz) as f64 / g.len() as f64;
        let mut coeffs = vec![Complex64::default(); nx * nz];
        for iz in 0..g.nz() {
            if 2 * iz == g.nz() {
                continue;
            }
            let fz = if iz < g.nz() / 2 { iz } else { nz - (g.nz() - iz) };
            for ix in 0..g.nx() {
                if 2 * ix == g.nx() {
                    continue;
                }
                let fx = if ix < g.nx() / 2 { ix } else { nx - (g.nx() - ix) };
                coeffs[fine.index(fx, fz)] = self.coeffs[g.index(ix, iz)] * gain;
            }
        }
        Ok(Self::from_coeffs(&fine, coeffs))
    }

    /// Spectral restriction onto a coarser lattice over the same box; the
    /// inverse of [`upsample`](Self::upsample). Mass above the coarse Nyquist
    /// band (relative to the total) beyond `1e-10` is rejected, since the
    /// restriction would silently discard it.
    pub fn downsample(&self, nx: usize, nz: usize) -> Result<Self> {
        let g = &self.grid;
        if nx > g.nx() || nz > g.nz() {
            return Err(DwsError::InvalidParameter(format!(
                "downsample target {nx}x{nz} larger than source {}x{}",
                g.nx(),
                g.nz()
            )));
        }
        if nx == g.nx() && nz == g.nz() {
            return Ok(self.clone());
        }
        let coarse = Grid2D::new(nx, nz, g.lx(), g.lz())?;
        let gain = (nx * nz) as f64 / g.len() as f64;
        let mut coeffs = vec![Complex64::default(); nx * nz];
        let mut kept = 0.0f64;
        let mut total = 0.0f64;
        for iz in 0..g.nz() {
            let l = if iz < g.nz() / 2 { iz } else { g.nz() - iz };
            for ix in 0..g.nx() {
                let j = if ix < g.nx() / 2 { ix } else { g.nx() - ix };
                let c = self.coeffs[g.index(ix, iz)];
                total += c.norm_sqr();
                if 2 * j >= nx || 2 * l >= nz {
                    continue;
                }
                kept += c.norm_sqr();
                let cx = if ix < g.nx() / 2 { ix } else { nx - (g.nx() - ix) };
                let cz = if iz < g.nz() / 2 { iz } else { nz - (g.nz() - iz) };
                coeffs[coarse.index(cx, cz)] = c * gain;
            }
        }
        if total > 0.0 && (total - kept) / total > 1e-10 {
            return Err(DwsError::SpectrumOutsideBand {
                leak: (total - kept) / total,
                limit: 1e-10,
            });
        }
        Ok(Self::from_coeffs(&coarse, coeffs))
    }

    // ---- norms --------------------------------------------------------

    /// `(sum (1+|k|^2)^s |hat(k)|^2 dk1 dk3)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let scale = self.grid.hat_scale();
        let area = self.grid.cell_area_k();
        let mut acc = 0.0;
        for (ix, iz, k1, k3) in self.grid.modes() {
            let w = (1.0 + k1 * k1 + k3 * k3).powf(s);
            acc += w * (self.coeffs[self.grid.index(ix, iz)] * scale).norm_sqr();
        }
        (acc * area).sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0.0)
    }

    pub fn h1_norm(&self) -> f64 {
        self.sobolev_norm(1.0)
    }

    /// `L^1` norm of the continuum Fourier transform, `sum |hat| dk1 dk3`.
    pub fn l1_spectrum(&self) -> f64 {
        let w = self.grid.hat_scale() * self.grid.cell_area_k();
        self.coeffs.iter().map(|c| c.norm()).sum::<f64>() * w
    }

    /// L^2 inner product by physical quadrature, `sum u conj(v) dx dz`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.grid
            .same_grid(&other.grid)
            .expect("fields on different grids");
        let mut acc = Complex64::default();
        for (a, b) in self.values.iter().zip(&other.values) {
            acc += a * b.conj();
        }
        acc * self.grid.cell_area_x()
    }

    pub fn max_abs(&self) -> f64 {
        max_norm(&self.values)
    }

    /// Scaled (triple) norm
    /// `(sum (1 + eps^{-2}((|k1|-1)^2 + k3^2)) |hat|^2 dk1 dk3)^{1/2}`.
    ///
    /// The spectrum must be contained in `B_delta(1,0) u B_delta(-1,0)` up to
    /// a relative mass of `1e-12`.
    pub fn scaled_norm(&self, eps: f64, delta: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(DwsError::InvalidParameter("eps must be positive".into()));
        }
        let leak = self.spectral_mass_outside(|k1, k3| {
            let d1 = (k1 - 1.0).powi(2) + k3 * k3;
            let d2 = (k1 + 1.0).powi(2) + k3 * k3;
            d1 < delta * delta || d2 < delta * delta
        });
        if leak > 1e-12 {
            return Err(DwsError::SpectrumOutsideBand {
                leak,
                limit: 1e-12,
            });
        }
        let scale = self.grid.hat_scale();
        let area = self.grid.cell_area_k();
        let inv_e2 = eps.powi(-2);
        let mut acc = 0.0;
        for (ix, iz, k1, k3) in self.grid.modes() {
            let w = 1.0 + inv_e2 * ((k1.abs() - 1.0).powi(2) + k3 * k3);
            acc += w * (self.coeffs[self.grid.index(ix, iz)] * scale).norm_sqr();
        }
        Ok((acc * area).sqrt())
    }

    /// Relative spectral mass (L^2) of modes where `inside` is false.
    pub fn spectral_mass_outside(&self, inside: impl Fn(f64, f64) -> bool) -> f64 {
        let mut out = 0.0;
        let mut tot = 0.0;
        for (ix, iz, k1, k3) in self.grid.modes() {
            let m = self.coeffs[self.grid.index(ix, iz)].norm_sqr();
            tot += m;
            if !inside(k1, k3) {
                out += m;
            }
        }
        if tot == 0.0 {
            0.0
        } else {
            out / tot
        }
    }

    /// Relative L^2 mass within `frac` of the box boundary (periodization
    /// diagnostic for localized fields).
    pub fn boundary_ring_mass(&self, frac: f64) -> f64 {
        let mut ring = 0.0;
        let mut tot = 0.0;
        for iz in 0..self.grid.nz() {
            for ix in 0..self.grid.nx() {
                let m = self.values[self.grid.index(ix, iz)].norm_sqr();
                tot += m;
                let near_x = self.grid.x_at(ix).abs() > self.grid.lx() * (1.0 - frac);
                let near_z = self.grid.z_at(iz).abs() > self.grid.lz() * (1.0 - frac);
                if near_x || near_z {
                    ring += m;
                }
            }
        }
        if tot == 0.0 {
            0.0
        } else {
            ring / tot
        }
    }

    /// Relative deviation of the coefficients from Hermitian symmetry.
    pub fn hermitian_residual(&self) -> f64 {
        let (nx, nz) = (self.grid.nx(), self.grid.nz());
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for iz in 0..nz {
            for ix in 0..nx {
                let c = self.coeffs[self.grid.index(ix, iz)];
                let cm = self.coeffs[self.grid.index((nx - ix) % nx, (nz - iz) % nz)];
                worst = worst.max((c - cm.conj()).norm());
                scale = scale.max(c.norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    // ---- symmetry -----------------------------------------------------

    /// `u(-x, z)` or `u(x, -z)` on the periodic grid.
    pub fn reflect(&self, axis: Axis) -> Self {
        let (nx, nz) = (self.grid.nx(), self.grid.nz());
        let mut values = vec![Complex64::default(); self.grid.len()];
        for iz in 0..nz {
            for ix in 0..nx {
                let (sx, sz) = match axis {
                    Axis::X => ((nx - ix) % nx, iz),
                    Axis::Z => (ix, (nz - iz) % nz),
                };
                values[self.grid.index(ix, iz)] = self.values[self.grid.index(sx, sz)];
            }
        }
        Self::from_values(&self.grid, values)
    }

    /// Project onto a parity class by averaging with reflections.
    pub fn symmetrize(&self, parity: Parity) -> Self {
        match parity {
            Parity::EvenEven => {
                let rx = self.reflect(Axis::X);
                let rz = self.reflect(Axis::Z);
                let rxz = rx.reflect(Axis::Z);
                self.add(&rx).add(&rz).add(&rxz).scale(0.25)
            }
            Parity::ConjEven => {
                // Average with conj(u(-x, z)), then with u(x, -z).
                let a = self.add(&self.reflect(Axis::X).conj()).scale(0.5);
                a.add(&a.reflect(Axis::Z)).scale(0.5)
            }
        }
    }
}

fn max_imag(values: &[Complex64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
}

fn max_norm(values: &[Complex64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid() -> Arc<Grid2D> {
        Grid2D::new(32, 32, PI, PI).unwrap()
    }

    #[test]
    fn identity_multiplier_returns_same_field() {
        let f = SpectralField::from_fn_real(&grid(), |x, z| (x.sin() + z.cos()) * 0.3);
        let g = f.apply_multiplier(|_, _| 1.0).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn plane_wave_eigenfunction_of_k0_symbol() {
        // cos x with symbol k1^2/|k| -> cos x; cos 2x -> 2 cos 2x.
        let g = grid();
        let sym = |k1: f64, k3: f64| {
            let n = (k1 * k1 + k3 * k3).sqrt();
            if n == 0.0 {
                0.0
            } else {
                k1 * k1 / n
            }
        };
        let f1 = SpectralField::from_fn_real(&g, |x, _| x.cos());
        let r1 = f1.apply_multiplier(sym).unwrap();
        let f2 = SpectralField::from_fn_real(&g, |x, _| (2.0 * x).cos());
        let r2 = f2.apply_multiplier(sym).unwrap();
        for i in 0..g.len() {
            assert!((r1.values()[i] - f1.values()[i]).norm() < 1e-12);
            assert!((r2.values()[i] - f2.values()[i] * 2.0).norm() < 1e-11);
        }
    }

    #[test]
    fn non_finite_symbol_is_rejected_with_location() {
        let f = SpectralField::from_fn_real(&grid(), |x, _| x.cos());
        let err = f.apply_multiplier(|k1, k3| 1.0 / (k1 * k1 + k3 * k3)).unwrap_err();
        match err {
            DwsError::NonFiniteSymbol { k1, k3, .. } => {
                assert_eq!((k1, k3), (0.0, 0.0));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn sobolev_norm_of_cos_x_matches_quadrature() {
        // On [-pi,pi)^2, int cos^2 x dx dz = 2 pi^2.
        let f = SpectralField::from_fn_real(&grid(), |x, _| x.cos());
        assert_relative_eq!(f.l2_norm(), (2.0 * PI * PI).sqrt(), max_relative = 1e-12);
        // Zero field.
        assert_eq!(SpectralField::zero(&grid()).sobolev_norm(2.0), 0.0);
    }

    #[test]
    fn s1_norm_of_cos_2x_is_sqrt5_times_s0() {
        let f = SpectralField::from_fn_real(&grid(), |x, _| (2.0 * x).cos());
        assert_relative_eq!(
            f.sobolev_norm(1.0),
            5.0f64.sqrt() * f.sobolev_norm(0.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn parseval_on_random_band_limited_field() {
        use rand::{Rng, SeedableRng};
        let g = grid();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut coeffs = vec![Complex64::default(); g.len()];
        // Hermitian-random content on low modes.
        for _ in 0..40 {
            let ix = rng.gen_range(0..8usize);
            let iz = rng.gen_range(0..8usize);
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            coeffs[g.index(ix, iz)] += c;
            coeffs[g.index((g.nx() - ix) % g.nx(), (g.nz() - iz) % g.nz())] += c.conj();
        }
        let f = SpectralField::from_coeffs(&g, coeffs);
        let phys: f64 = f
            .values()
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            * g.cell_area_x();
        assert_relative_eq!(phys.sqrt(), f.l2_norm(), max_relative = 1e-12);
    }

    #[test]
    fn real_even_symbol_preserves_realness() {
        let f = SpectralField::from_fn_real(&grid(), |x, z| (x.cos() + (2.0 * z).sin()) * 0.7);
        assert!(f.is_real());
        let r = f.apply_multiplier(|k1, k3| (k1 * k1 + k3 * k3).sqrt()).unwrap();
        assert!(r.is_real());
    }

    #[test]
    fn multiplier_composition_matches_product_symbol() {
        let f = SpectralField::from_fn_real(&grid(), |x, z| (x + 0.3).sin() * z.cos());
        let m1 = |k1: f64, k3: f64| 1.0 + k1 * k1 + k3 * k3;
        let m2 = |k1: f64, _k3: f64| (1.0 + k1 * k1).recip();
        let a = f.apply_multiplier(m1).unwrap().apply_multiplier(m2).unwrap();
        let b = f.apply_multiplier(|k1, k3| m1(k1, k3) * m2(k1, k3)).unwrap();
        let diff = a.sub(&b).l2_norm();
        assert!(diff < 1e-13 * f.l2_norm().max(1.0));
    }

    #[test]
    fn reflect_x_flips_sin_keeps_cos() {
        let g = grid();
        let f = SpectralField::from_fn_real(&g, |x, _| x.cos() + x.sin());
        let r = f.reflect(Axis::X);
        let expect = SpectralField::from_fn_real(&g, |x, _| x.cos() - x.sin());
        assert!(r.sub(&expect).l2_norm() < 1e-12);
    }

    #[test]
    fn symmetrize_annihilates_odd_and_is_idempotent() {
        let g = grid();
        let odd = SpectralField::from_fn_real(&g, |x, z| x.sin() * z.cos());
        assert!(odd.symmetrize(Parity::EvenEven).l2_norm() < 1e-12);

        let mixed = SpectralField::from_fn_real(&g, |x, z| x.sin() * z.cos() + x.cos());
        let once = mixed.symmetrize(Parity::EvenEven);
        let twice = once.symmetrize(Parity::EvenEven);
        assert!(once.sub(&twice).l2_norm() < 1e-14 * once.l2_norm().max(1.0));
        // Even-even input is fixed.
        let even = SpectralField::from_fn_real(&g, |x, z| x.cos() * (2.0 * z).cos());
        assert!(even.symmetrize(Parity::EvenEven).sub(&even).l2_norm() < 1e-12);
    }

    #[test]
    fn scaled_norm_of_carrier_cosine() {
        // eta1 = eps cos x has spectrum exactly at (±1, 0): weight 1,
        // so the scaled norm equals the L2 norm independently of eps.
        let g = grid();
        for &eps in &[0.1, 0.01] {
            let f = SpectralField::from_fn_real(&g, |x, _| eps * x.cos());
            let n = f.scaled_norm(eps, 0.15).unwrap();
            assert_relative_eq!(n, f.l2_norm(), max_relative = 1e-12);
        }
        assert_eq!(SpectralField::zero(&g).scaled_norm(0.1, 0.15).unwrap(), 0.0);
    }

    #[test]
    fn scaled_norm_rejects_offband_spectrum() {
        let g = grid();
        let f = SpectralField::from_fn_real(&g, |x, _| (3.0 * x).cos());
        assert!(matches!(
            f.scaled_norm(0.1, 0.15),
            Err(DwsError::SpectrumOutsideBand { .. })
        ));
    }

    #[test]
    fn dealias_removes_high_modes_only() {
        let g = grid();
        let f = SpectralField::from_fn_real(&g, |x, _| (3.0 * x).cos() + (12.0 * x).cos());
        let d = f.dealias();
        // nx/3 = 10, so mode 12 is masked, mode 3 kept.
        let low = SpectralField::from_fn_real(&g, |x, _| (3.0 * x).cos());
        assert!(d.sub(&low).l2_norm() < 1e-12);
    }
}
