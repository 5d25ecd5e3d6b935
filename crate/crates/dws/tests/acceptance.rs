//! Acceptance gate: one test per criterion, each printing a single
//! `acceptance N: PASS/FAIL` line (visible with `--nocapture`; the harness
//! line per test mirrors it). Criteria that the implementation cannot meet
//! are asserted literally and fail honestly rather than being weakened.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dws::dno::operators::{k0, k1_closed, kfunc, kprime_full, l1_closed, lfunc, lprime2, lprime_full};
use dws::dno::solve::{k_op, l_op};
use dws::fdnls::{self, Branch};
use dws::field::{Parity, SpectralField};
use dws::grid::Grid2D;
use dws::linalg;
use dws::nls;
use dws::params::WaveParams;
use dws::reduction::{self, ReductionConfig};
use dws::symbols::{self, BandSpec};

fn verdict(n: usize, pass: bool, detail: &str) -> bool {
    println!(
        "acceptance {n}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

// ---- shared fixtures ---------------------------------------------------

/// Envelope-scale ground state on a 128^2 box of half-length 10.
fn ground10() -> &'static nls::GroundState {
    static GS: OnceLock<nls::GroundState> = OnceLock::new();
    GS.get_or_init(|| {
        let grid = Grid2D::new(128, 128, 10.0, 10.0).unwrap();
        nls::ground_state(&grid, 1e-11).unwrap()
    })
}

/// Carrier field eta1 built from the ground-state envelope on the
/// commensurate surface lattice for the given eps, plus the plan.
fn carrier_setup(eps: f64) -> (reduction::ReductionPlan, SpectralField, SpectralField) {
    let m = (6.0 / (eps * std::f64::consts::PI)).round() as usize;
    let nx = (16 * m).next_power_of_two();
    let plan = reduction::plan(eps, (6.0, 6.0), (64, 32), (nx, 64)).unwrap();
    let gs = nls::ground_state(&plan.envelope, 1e-10).unwrap();
    let zeta = fdnls::band_project(&gs.zeta, eps, &BandSpec::default());
    let eta1 = reduction::carrier_from_envelope(&zeta, eps, &plan.surface).unwrap();
    (plan, zeta, eta1)
}

// ---- 1: dispersion minimum ---------------------------------------------

#[test]
fn a01_dispersion_minimum() {
    let (k1, cmin) = symbols::dispersion_minimum();
    let ok = (k1 - 1.0).abs() <= 1e-6 && (cmin - 2.0f64.sqrt()).abs() <= 1e-12;
    assert!(
        verdict(1, ok, &format!("argmin {k1:.9}, c_min {cmin:.15}")),
        "dispersion minimum off: k1 {k1}, cmin {cmin}"
    );
}

// ---- 2: symbol limit ---------------------------------------------------

#[test]
fn a02_symbol_limit_is_first_order_in_eps() {
    let worst = |eps: f64| {
        let mut w = 0.0f64;
        let n = 101;
        for i in 0..n {
            for j in 0..n {
                let k1 = -5.0 + 10.0 * i as f64 / (n - 1) as f64;
                let k3 = -5.0 + 10.0 * j as f64 / (n - 1) as f64;
                if k1 * k1 + k3 * k3 > 25.0 {
                    continue;
                }
                w = w.max(
                    (symbols::shifted_symbol(eps, k1, k3) - symbols::limit_symbol(k1, k3)).abs(),
                );
            }
        }
        w
    };
    let (d1, d2) = (worst(0.01), worst(0.005));
    let ok = d2 <= 0.55 * d1;
    assert!(
        verdict(2, ok, &format!("sup defect {d1:.3e} at eps 0.01, {d2:.3e} at 0.005")),
        "symbol defect not O(eps): {d1:.3e} -> {d2:.3e}"
    );
}

// ---- 3: ground state against the radial shooting oracle ----------------

/// Townes profile height by radial shooting: R'' + R'/r - R + R^3 = 0,
/// R'(0) = 0, bisected on R(0) between undershoot (falls back into the well,
/// stays positive) and overshoot (crosses zero).
fn townes_peak() -> f64 {
    let overshoots = |a: f64| {
        let (mut r, mut rp) = (a, 0.0f64);
        let h = 5e-4;
        let mut t = h; // start one step out; the r=0 friction term is finite by symmetry
        while t < 15.0 {
            // RK4 on (R, R')' = (R', -R'/t + R - R^3).
            let f = |t: f64, r: f64, rp: f64| (rp, -rp / t + r - r * r * r);
            let (k1a, k1b) = f(t, r, rp);
            let (k2a, k2b) = f(t + h / 2.0, r + h / 2.0 * k1a, rp + h / 2.0 * k1b);
            let (k3a, k3b) = f(t + h / 2.0, r + h / 2.0 * k2a, rp + h / 2.0 * k2b);
            let (k4a, k4b) = f(t + h, r + h * k3a, rp + h * k3b);
            r += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            rp += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
            t += h;
            if r < 0.0 {
                return true;
            }
            if r > a + 1.0 {
                return false;
            }
        }
        false
    };
    let (mut lo, mut hi) = (2.0f64, 2.4f64);
    assert!(!overshoots(lo) && overshoots(hi), "shooting bracket invalid");
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if overshoots(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn a03_ground_state_matches_the_shooting_oracle() {
    let grid = Grid2D::new(256, 256, 12.0, 12.0).unwrap();
    let gs = nls::ground_state(&grid, 1e-9).unwrap();
    let peak = gs.zeta.max_abs();
    let oracle = 4.0 / 11.0f64.sqrt() * townes_peak();
    let rel = (peak - oracle).abs() / oracle;

    let min_val = gs
        .zeta
        .values()
        .iter()
        .map(|v| v.re)
        .fold(f64::INFINITY, f64::min);
    let sym = gs.zeta.sub(&gs.zeta.symmetrize(Parity::EvenEven)).max_abs();

    // Box-doubling control at fixed lattice spacing: the peak must be
    // converged in the box size, not just the resolution.
    let wide = nls::ground_state(&Grid2D::new(512, 512, 24.0, 24.0).unwrap(), 1e-9).unwrap();
    let box_defect = (wide.zeta.max_abs() - peak).abs() / peak;

    // Positivity up to the spectral-truncation ringing of the decaying tail.
    let ok = gs.residual_h1 <= 1e-9
        && rel <= 1e-3
        && min_val >= -1e-6 * peak
        && sym <= 1e-12 * peak
        && box_defect < 1e-6;
    assert!(
        verdict(
            3,
            ok,
            &format!(
                "residual {:.2e}, peak {peak:.6} vs oracle {oracle:.6} (rel {rel:.2e}), min {min_val:.2e}, box-doubling defect {box_defect:.2e}",
                gs.residual_h1
            )
        ),
        "ground state check failed"
    );
}

// ---- 4: nondegeneracy --------------------------------------------------

#[test]
fn a04_linearization_kernels_and_spectral_floor() {
    let gs = ground10();
    let (rx, rz, r2) = nls::kernel_residuals(&gs.zeta);

    // Smallest eigenvalue of T1 on the even-even class, where the
    // translation kernel is projected out. Floor pinned at 0.05.
    let zeta0 = gs.zeta.clone();
    let apply = |v: &SpectralField| nls::apply_t1(&zeta0, v);
    let project = |v: &SpectralField| v.symmetrize(Parity::EvenEven);
    let precond2 = |v: &SpectralField| {
        v.apply_multiplier(|k1, k3| 1.0 / nls::linear_symbol(k1, k3).powi(2))
            .unwrap()
    };
    let grid = gs.zeta.grid();
    let seeds = vec![
        gs.zeta.clone(),
        SpectralField::from_fn_real(grid, |x, z| (-(x * x + z * z) / 6.0).exp()),
        SpectralField::from_fn_real(grid, |x, z| {
            (x * x + z * z - 2.0) * (-(x * x + z * z) / 2.0).exp()
        }),
        SpectralField::from_fn_real(grid, |x, z| (-(2.0 * x * x + z * z)).exp()),
    ];
    let pairs = linalg::eigs_near_zero(apply, project, precond2, seeds, 10, 1e-10).unwrap();
    let lambda = pairs[0].0.abs();

    let ok = rx <= 1e-6 && rz <= 1e-6 && r2 <= 1e-6 && lambda >= 0.05;
    assert!(
        verdict(
            4,
            ok,
            &format!("kernel residuals {rx:.2e}/{rz:.2e}/{r2:.2e}, even-even floor {lambda:.4}")
        ),
        "nondegeneracy check failed"
    );
}

// ---- 5: envelope branches and their distance scaling --------------------

#[test]
fn a05_envelope_branches_and_distance_scaling() {
    let gs = ground10();
    let band = BandSpec::default();
    let mut h1 = Vec::new();
    let mut sup = Vec::new();
    let mut residual_ok = true;
    for eps in [0.1, 0.05, 0.025] {
        let (sol, _) = fdnls::solve_fdnls(eps, Branch::Plus, gs, 1e-9, &band).unwrap();
        residual_ok &= sol.residual_h1 <= 1e-9;
        h1.push(sol.h1_distance_to_ground_state);
        sup.push(sol.sup_distance_to_ground_state);
    }
    // One eps-quartering: 0.1 -> 0.025.
    let ratio = h1[0] / h1[2];
    let sup_trend = sup[0] > sup[1] && sup[1] > sup[2];
    let ok = residual_ok && (1.5..=2.7).contains(&ratio) && sup_trend;
    assert!(
        verdict(
            5,
            ok,
            &format!(
                "residuals <= 1e-9: {residual_ok}; H1 distances {:?} (quartering ratio {ratio:.2}, window [1.5, 2.7]); sup distances {:?}",
                h1.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
                sup.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>()
            )
        ),
        "branch distance scaling outside the pinned window (distance floor is the band cut of the ground state itself, which decays faster than sqrt(eps))"
    );
}

// ---- 6: Dirichlet-Neumann operator suite -------------------------------

#[test]
fn a06_dirichlet_neumann_suite() {
    let grid = Grid2D::new(32, 32, 6.0, 6.0).unwrap();
    let cfg = reduction::auto_dno_config(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut rand_field = |width: f64| {
        let (cx, cz): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let a: f64 = rng.gen_range(0.5..1.5);
        SpectralField::from_fn_real(&grid, |x, z| {
            a * (-((x - cx) * (x - cx) + (z - cz) * (z - cz)) / width).exp()
        })
        .truncate_modes(8, 8)
    };

    // Flat-surface trace operator against its multiplier form.
    let zero = SpectralField::zero(&grid);
    let mut flat_worst = 0.0f64;
    for _ in 0..20 {
        let xi = rand_field(2.0);
        let defect = k_op(&zero, &xi, &cfg).unwrap().sub(&k0(&xi)).l2_norm() / xi.l2_norm();
        flat_worst = flat_worst.max(defect);
    }

    // First-order term by divided differences, quadratic in amplitude; the
    // probe amplitudes sit above the vertical-quadrature floor (~5e-6).
    let eta = rand_field(3.0);
    let eta = eta.scale(1.0 / eta.max_abs());
    let xi = rand_field(2.0);
    let lead_k = k1_closed(&eta, &xi);
    let lead_l = l1_closed(&eta, &xi);
    let dd_err = |a: f64| {
        let kp = k_op(&eta.scale(a), &xi, &cfg).unwrap();
        let km = k_op(&eta.scale(-a), &xi, &cfg).unwrap();
        let lp = l_op(&eta.scale(a), &xi, &cfg).unwrap();
        let lm = l_op(&eta.scale(-a), &xi, &cfg).unwrap();
        (
            kp.sub(&km).scale(0.5 / a).sub(&lead_k).l2_norm(),
            lp.sub(&lm).scale(0.5 / a).sub(&lead_l).l2_norm(),
        )
    };
    let (ek1, el1) = dd_err(0.2);
    let (ek2, el2) = dd_err(0.1);
    let slope_k = (ek1 / ek2).log2();
    let slope_l = (el1 / el2).log2();

    // Gradients of the two functionals against central differences.
    let base = eta.scale(0.08);
    let gk = kprime_full(&base);
    let gl = lprime_full(&base, &cfg).unwrap();
    let mut grad_worst = 0.0f64;
    for _ in 0..10 {
        let v = rand_field(2.5);
        let h = 1e-4 / v.max_abs();
        let dk = (kfunc(&base.add(&v.scale(h))) - kfunc(&base.sub(&v.scale(h)))) / (2.0 * h);
        let dl = (lfunc(&base.add(&v.scale(h)), &cfg).unwrap()
            - lfunc(&base.sub(&v.scale(h)), &cfg).unwrap())
            / (2.0 * h);
        let pk = gk.inner(&v).re;
        let pl = gl.inner(&v).re;
        grad_worst = grad_worst
            .max((dk - pk).abs() / dk.abs().max(1e-12))
            .max((dl - pl).abs() / dl.abs().max(1e-12));
    }

    let ok = flat_worst <= 1e-8
        && (1.9..=2.1).contains(&slope_k)
        && (1.9..=2.1).contains(&slope_l)
        && grad_worst <= 1e-5;
    assert!(
        verdict(
            6,
            ok,
            &format!(
                "flat-trace defect {flat_worst:.2e}, divided-difference slopes {slope_k:.3}/{slope_l:.3}, gradient defect {grad_worst:.2e}"
            )
        ),
        "trace-operator suite failed"
    );
}

// ---- 7: leading-order cascade ------------------------------------------

#[test]
fn a07_cascade_coefficients() {
    let cfg = ReductionConfig::cheap();
    let mut rows = Vec::new();
    for eps in [0.04, 0.02] {
        let (_, _, eta1) = carrier_setup(eps);
        let w = WaveParams::new(eps).unwrap();
        let (eta3, _) = reduction::solve_eta3(&eta1, &w, &cfg).unwrap();
        rows.push(reduction::cascade_coefficients(&eta1, &eta3, &w, &cfg).unwrap());
    }
    let fine = &rows[1];
    let devs = [
        (fine.slave_quadratic - 4.0).abs() / 4.0,
        (fine.kprime3 + 1.5).abs() / 1.5,
        (fine.lprime3 + 2.0).abs() / 2.0,
        (fine.tails - 2.5).abs() / 2.5,
    ];
    let worst = devs.iter().cloned().fold(0.0, f64::max);
    let total_dev = (fine.total + 5.5).abs() / 5.5;
    let ok = worst <= 0.10 && total_dev <= 0.05;
    assert!(
        verdict(
            7,
            ok,
            &format!(
                "eps 0.02 coefficients [{:.3}, {:.3}, {:.3}, {:.3}] (worst dev {:.1}%), total {:.3} (dev {:.1}%)",
                fine.slave_quadratic,
                fine.kprime3,
                fine.lprime3,
                fine.tails,
                100.0 * worst,
                fine.total,
                100.0 * total_dev
            )
        ),
        "cascade coefficients out of tolerance"
    );
}

// ---- 8: exact cancellations --------------------------------------------

#[test]
fn a08_exact_band_cancellations() {
    let (_, _, eta1) = carrier_setup(0.05);
    let band = BandSpec::default();

    let l2 = lprime2(&eta1);
    let c1 = band.project_band(&l2).l2_norm() / l2.l2_norm();
    let k1e = k1_closed(&eta1, &eta1).dealias();
    let sq = k1e.mul(&k1e).dealias();
    let c2 = band.project_plus(&sq).l2_norm() / sq.l2_norm();

    let ok = c1 < 1e-13 && c2 < 1e-13;
    assert!(
        verdict(8, ok, &format!("relative band content {c1:.2e} and {c2:.2e}")),
        "band cancellations not exact"
    );
}

// ---- 9: off-band contraction at the pinned eps -------------------------

#[test]
fn a09_offband_contraction_at_pinned_eps() {
    let cfg = ReductionConfig::cheap();
    let theta = 5.0 / 6.0;

    let ratio_at = |eps: f64| -> Result<(f64, f64), String> {
        let (_, _, eta1) = carrier_setup(eps);
        let w = WaveParams::new(eps).unwrap();
        let (eta3, report) =
            reduction::solve_eta3(&eta1, &w, &cfg).map_err(|e| e.to_string())?;
        let t = eta1.scaled_norm(eps, w.delta).unwrap();
        Ok((
            report.worst_contraction(),
            eta3.sobolev_norm(3.0) / (eps.powf(2.0 * theta) * t * t),
        ))
    };

    let half = ratio_at(0.025);
    let pinned = ratio_at(0.05);
    let detail = match (&pinned, &half) {
        (Ok((c, r)), Ok((_, rh))) => format!(
            "eps 0.05 contraction {c:.3} (required <= 1/3), size ratio {r:.2} vs {rh:.2} at 0.025"
        ),
        (Err(e), Ok((ch, rh))) => format!(
            "eps 0.05: {e}; eps 0.025 works (contraction {ch:.3}, size ratio {rh:.2})"
        ),
        (p, h) => format!("eps 0.05: {p:?}; eps 0.025: {h:?}"),
    };
    let ok = matches!((&pinned, &half), (Ok((c, r)), Ok((_, rh)))
        if *c <= 1.0 / 3.0 && *r / rh <= 2.0 && rh / r <= 2.0);
    assert!(
        verdict(9, ok, &detail),
        "off-band fixed point leaves the contraction regime at eps 0.05 with the full ground-state envelope (branch folds near 92% amplitude); the regime holds for eps <= 0.025"
    );
}

// ---- 10: end-to-end reconstruction at the pinned eps --------------------

#[test]
fn a10_end_to_end_reconstruction() {
    let cfg = ReductionConfig::cheap();

    // Pinned run: eps = 0.05, both branches. The plus branch already fails
    // (the off-band branch folds below the full envelope amplitude), which
    // decides the criterion; the mirrored branch is not attempted then.
    let (plan, zeta, _) = carrier_setup(0.05);
    let w = WaveParams::new(0.05).unwrap();
    let pinned = reduction::reconstruct_surface(&zeta, &w, &plan.surface, &cfg)
        .map(|dec| dec.report.notes.join("; "))
        .map_err(|e| e.to_string());

    // The same pipeline where the fixed point exists: leading-order profile
    // error against eps * zeta0(eps x, eps z) cos x, with its eps^{5/4} trend.
    let mut lead_errs = Vec::new();
    for eps in [0.025, 0.0125] {
        let (plan, zeta, eta1) = carrier_setup(eps);
        let w = WaveParams::new(eps).unwrap();
        match reduction::reconstruct_surface(&zeta, &w, &plan.surface, &cfg) {
            Ok(dec) => lead_errs.push((eps, dec.eta().sub(&eta1).max_abs())),
            Err(e) => {
                println!("acceptance 10: pipeline demonstration at eps {eps} failed: {e}");
            }
        }
    }
    let trend = if lead_errs.len() == 2 {
        let r = lead_errs[0].1 / lead_errs[1].1;
        format!(
            "demonstration at eps {{0.025, 0.0125}}: leading-order sup errors {:.3e}/{:.3e} (halving ratio {r:.2}, eps^(5/4) predicts >= 2.38)",
            lead_errs[0].1, lead_errs[1].1
        )
    } else {
        "demonstration incomplete".to_string()
    };

    let ok = pinned.is_ok();
    let detail = match &pinned {
        Ok(notes) => format!("eps 0.05 reconstruction notes: {notes}; {trend}"),
        Err(e) => format!("eps 0.05: {e}; {trend}"),
    };
    assert!(
        verdict(10, ok, &detail),
        "end-to-end reconstruction unattainable at eps 0.05 (off-band branch folds); the pipeline is demonstrated at eps <= 0.025"
    );
}
