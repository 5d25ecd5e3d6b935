//! Matrix-free linear solvers on [`SpectralField`]s.
//!
//! The linearized operators in this crate are self-adjoint with respect to
//! the real L^2 pairing `Re <u, v>` but not definite (the linearization at a
//! Townes-type ground state has a negative direction). We therefore solve
//! `A x = b` by conjugate gradients on the normal system
//! `A M^{-2} A x = A M^{-2} b`, which is positive definite whenever `A` is
//! symmetric and invertible; `M^{-2}` is a symmetric positive preconditioner
//! (typically an inverse Fourier multiplier close to `A^2`'s inverse).

use crate::error::{DwsError, Result};
use crate::field::SpectralField;

/// Real L^2 pairing `Re <u, v>`.
fn rip(u: &SpectralField, v: &SpectralField) -> f64 {
    u.inner(v).re
}

/// Convergence record for an iterative solve.
#[derive(Debug, Clone, Copy)]
pub struct IterStats {
    pub iterations: usize,
    /// Relative true residual `|A x - b| / |b|` at exit.
    pub residual: f64,
}

/// Solve `A x = b` for symmetric (possibly indefinite) `A` by preconditioned
/// CGNR. `precond2` applies `M^{-2}` and must be symmetric positive definite.
///
/// Converges when the true relative residual drops below `tol`; errors with
/// [`DwsError::Divergence`] if `max_iter` is exhausted first.
pub fn cgnr(
    apply_a: impl Fn(&SpectralField) -> SpectralField,
    precond2: impl Fn(&SpectralField) -> SpectralField,
    b: &SpectralField,
    tol: f64,
    max_iter: usize,
) -> Result<(SpectralField, IterStats)> {
    let bnorm = b.l2_norm();
    if bnorm == 0.0 {
        return Ok((
            SpectralField::zero(b.grid()),
            IterStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let normal = |x: &SpectralField| apply_a(&precond2(&apply_a(x)));
    let rhs = apply_a(&precond2(b));

    let mut x = SpectralField::zero(b.grid());
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = rip(&r, &r);

    // Track the best iterate by true residual: squaring the condition number
    // means CG hits a roundoff floor, after which the iterate degrades.
    let mut best_res = f64::INFINITY;
    let mut best_x = x.clone();
    let mut best_it = 0;

    let check = |x: &SpectralField, it: usize, best_res: &mut f64, best_x: &mut SpectralField, best_it: &mut usize| {
        let true_res = apply_a(x).sub(b).l2_norm() / bnorm;
        if true_res < *best_res {
            *best_res = true_res;
            *best_x = x.clone();
            *best_it = it;
        }
        true_res
    };

    for it in 1..=max_iter {
        let np = normal(&p);
        let pnp = rip(&p, &np);
        if pnp <= 0.0 {
            // The normal operator is positive semidefinite; a non-positive
            // curvature is roundoff stagnation, not indefiniteness.
            check(&x, it, &mut best_res, &mut best_x, &mut best_it);
            break;
        }
        let alpha = rr / pnp;
        x = x.add(&p.scale(alpha));
        r = r.sub(&np.scale(alpha));
        let rr_next = rip(&r, &r);

        if it % 5 == 0 || rr_next <= 1e-4 * rr {
            let true_res = check(&x, it, &mut best_res, &mut best_x, &mut best_it);
            if true_res <= tol {
                return Ok((
                    x,
                    IterStats {
                        iterations: it,
                        residual: true_res,
                    },
                ));
            }
            // Past the floor the iterate only degrades; stop.
            if true_res > 100.0 * best_res {
                break;
            }
        }
        let beta = rr_next / rr;
        rr = rr_next;
        p = r.add(&p.scale(beta));
    }
    if best_res <= tol {
        return Ok((
            best_x,
            IterStats {
                iterations: best_it,
                residual: best_res,
            },
        ));
    }
    Err(DwsError::Divergence(format!(
        "cgnr: no convergence in {max_iter} iterations (best relative residual {best_res:.3e})"
    )))
}

/// Solve `A x = b` for a general (nonsymmetric) operator by full-memory
/// GMRES with modified Gram–Schmidt Arnoldi and Givens rotations.
///
/// Runs until the relative residual estimate drops below `tol` or the Krylov
/// space reaches `max_dim`; always returns the best iterate found, with the
/// achieved residual in the stats, leaving acceptance to the caller.
pub fn gmres(
    apply_a: impl Fn(&SpectralField) -> SpectralField,
    b: &SpectralField,
    tol: f64,
    max_dim: usize,
) -> (SpectralField, IterStats) {
    let bnorm = b.l2_norm();
    if bnorm == 0.0 {
        return (
            SpectralField::zero(b.grid()),
            IterStats {
                iterations: 0,
                residual: 0.0,
            },
        );
    }
    let mut basis = vec![b.scale(1.0 / bnorm)];
    // Column-major Hessenberg entries after the Givens sweeps.
    let mut h_cols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![bnorm];
    let mut res = 1.0;
    let mut dims = 0;

    for j in 0..max_dim {
        let mut w = apply_a(&basis[j]);
        let mut col = Vec::with_capacity(j + 2);
        for v in &basis {
            let hij = rip(&w, v);
            w = w.sub(&v.scale(hij));
            col.push(hij);
        }
        let hnext = w.l2_norm();
        // Apply accumulated rotations, then eliminate the subdiagonal.
        for (i, &(c, s)) in cs.iter().enumerate() {
            let t = c * col[i] + s * col[i + 1];
            col[i + 1] = -s * col[i] + c * col[i + 1];
            col[i] = t;
        }
        let denom = (col[j] * col[j] + hnext * hnext).sqrt();
        if denom == 0.0 {
            break;
        }
        let (c, s) = (col[j] / denom, hnext / denom);
        col[j] = denom;
        cs.push((c, s));
        g.push(-s * g[j]);
        g[j] *= c;
        h_cols.push(col);
        dims = j + 1;
        res = g[j + 1].abs() / bnorm;
        if res <= tol || hnext == 0.0 {
            break;
        }
        basis.push(w.scale(1.0 / hnext));
    }

    // Back-substitute the triangular system for the coefficients.
    let mut y = vec![0.0; dims];
    for i in (0..dims).rev() {
        let mut s = g[i];
        for (k, yk) in y.iter().enumerate().skip(i + 1) {
            s -= h_cols[k][i] * yk;
        }
        y[i] = s / h_cols[i][i];
    }
    let mut x = SpectralField::zero(b.grid());
    for (v, &yi) in basis.iter().zip(&y) {
        x = x.add(&v.scale(yi));
    }
    (
        x,
        IterStats {
            iterations: dims,
            residual: res,
        },
    )
}

/// Eigendecomposition of a small dense symmetric matrix by cyclic Jacobi
/// rotations. Returns `(eigenvalues, eigenvectors)` with `eigenvectors[j]`
/// the column for `eigenvalues[j]`, sorted ascending.
pub fn jacobi_eig(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p][q].abs());
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap());
    let vals = order.iter().map(|&j| a[j][j]).collect();
    let vecs = order
        .iter()
        .map(|&j| v.iter().map(|row| row[j]).collect())
        .collect();
    (vals, vecs)
}

/// Eigenpairs of a symmetric operator nearest zero, by shift-invert subspace
/// iteration with Rayleigh–Ritz extraction.
///
/// `apply_t` is the operator, `project` an orthogonal projector onto the
/// invariant symmetry class the seeds live in, and `precond2` the inner-CG
/// preconditioner for the shift-invert solves. Returns pairs sorted by
/// increasing `|lambda|`; the eigenvectors are L^2-normalized.
pub fn eigs_near_zero(
    apply_t: impl Fn(&SpectralField) -> SpectralField,
    project: impl Fn(&SpectralField) -> SpectralField,
    precond2: impl Fn(&SpectralField) -> SpectralField,
    seeds: Vec<SpectralField>,
    rounds: usize,
    cg_tol: f64,
) -> Result<Vec<(f64, SpectralField)>> {
    if seeds.is_empty() {
        return Err(DwsError::InvalidParameter("no eigensolver seeds".into()));
    }
    let op = |x: &SpectralField| project(&apply_t(&project(x)));
    let mut basis: Vec<SpectralField> = seeds.iter().map(|s| project(s)).collect();
    orthonormalize(&mut basis)?;

    for _round in 0..rounds {
        let mut next = Vec::with_capacity(basis.len());
        for v in &basis {
            let (w, _) = cgnr(op, &precond2, v, cg_tol, 4000)?;
            next.push(project(&w));
        }
        basis = next;
        orthonormalize(&mut basis)?;
    }

    // Rayleigh-Ritz on the converged subspace.
    let images: Vec<SpectralField> = basis.iter().map(|v| op(v)).collect();
    let n = basis.len();
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let hij = 0.5 * (rip(&images[i], &basis[j]) + rip(&images[j], &basis[i]));
            h[i][j] = hij;
            h[j][i] = hij;
        }
    }
    let (vals, vecs) = jacobi_eig(h);
    let mut pairs: Vec<(f64, SpectralField)> = vals
        .iter()
        .zip(&vecs)
        .map(|(&lam, col)| {
            let mut u = SpectralField::zero(basis[0].grid());
            for (c, v) in col.iter().zip(&basis) {
                u = u.add(&v.scale(*c));
            }
            let n = u.l2_norm();
            (lam, u.scale(1.0 / n))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap());
    Ok(pairs)
}

fn orthonormalize(basis: &mut Vec<SpectralField>) -> Result<()> {
    let mut out: Vec<SpectralField> = Vec::with_capacity(basis.len());
    for v in basis.iter() {
        let mut w = v.clone();
        // Two Gram-Schmidt passes for stability.
        for _ in 0..2 {
            for u in &out {
                let c = rip(&w, u);
                w = w.sub(&u.scale(c));
            }
        }
        let n = w.l2_norm();
        if n < 1e-12 {
            return Err(DwsError::Divergence(
                "eigensolver basis became linearly dependent".into(),
            ));
        }
        out.push(w.scale(1.0 / n));
    }
    *basis = out;
    Ok(())
}
