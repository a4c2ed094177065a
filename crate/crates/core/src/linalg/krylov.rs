//! Restarted Krylov solvers: Arnoldi for the dominant eigenpair and GMRES
//! for linear systems. Both take a warm-start vector and a small subspace
//! dimension (4 suffices for the tensor-network superoperators here).

use super::{CMatrix, CVector, LinAlgError, Result};
use num_complex::Complex64;

/// A matrix-free linear map on complex vectors of fixed dimension.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &CVector) -> CVector;
}

/// Dense matrix viewed as a [`LinearOperator`].
pub struct DenseOperator(pub CMatrix);

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, v: &CVector) -> CVector {
        &self.0 * v
    }
}

/// Arnoldi factorization `A V_k = V_{k+1} H̄_k` from a unit start vector,
/// with one reorthogonalization pass. Returns the basis, the
/// (k+1)×k Hessenberg block, and the realized dimension k (smaller than
/// requested on happy breakdown).
fn arnoldi_process(
    op: &dyn LinearOperator,
    start: &CVector,
    m: usize,
) -> (Vec<CVector>, CMatrix, usize) {
    let mut basis = vec![start.clone()];
    let mut h = CMatrix::zeros(m + 1, m);
    let breakdown = 1e-14;
    for j in 0..m {
        let mut w = op.apply(&basis[j]);
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let coeff = v.dotc(&w);
                h[(i, j)] += coeff;
                w.axpy(-coeff, v, Complex64::from(1.0));
            }
        }
        let nw = w.norm();
        h[(j + 1, j)] = Complex64::from(nw);
        if nw <= breakdown {
            return (basis, h, j + 1);
        }
        basis.push(w.unscale(nw));
    }
    (basis, h, m)
}

/// Eigenvalues of a small complex matrix by the shifted QR algorithm.
/// Intended for Krylov Hessenberg blocks (n of order 10).
fn small_eigenvalues(mut h: CMatrix) -> Result<Vec<Complex64>> {
    let n = h.nrows();
    let mut eigs = Vec::with_capacity(n);
    let mut hi = n;
    let mut stall = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        if hi == 1 {
            eigs.push(h[(0, 0)]);
            break;
        }
        let scale = h[(hi - 1, hi - 1)].norm() + h[(hi - 2, hi - 2)].norm();
        if h[(hi - 1, hi - 2)].norm() <= 1e-15 * (scale + 1e-300) {
            eigs.push(h[(hi - 1, hi - 1)]);
            hi -= 1;
            stall = 0;
            continue;
        }
        total += 1;
        stall += 1;
        if total > 200 * n {
            return Err(LinAlgError::NoConvergence {
                method: "small_eigenvalues",
                residual: h[(hi - 1, hi - 2)].norm(),
                iterations: total,
            });
        }
        // Wilkinson shift from the trailing 2x2; exceptional shift on stall.
        let a = h[(hi - 2, hi - 2)];
        let b = h[(hi - 2, hi - 1)];
        let c = h[(hi - 1, hi - 2)];
        let d = h[(hi - 1, hi - 1)];
        let tr = a + d;
        let det = a * d - b * c;
        let disc = (tr * tr * Complex64::from(0.25) - det).sqrt();
        let m1 = tr * Complex64::from(0.5) + disc;
        let m2 = tr * Complex64::from(0.5) - disc;
        let mut shift = if (m1 - d).norm() < (m2 - d).norm() {
            m1
        } else {
            m2
        };
        if stall % 15 == 0 {
            shift = d + Complex64::from(0.75 * c.norm());
        }
        let mut blk = h.view((0, 0), (hi, hi)).into_owned();
        for i in 0..hi {
            blk[(i, i)] -= shift;
        }
        let qr = blk.qr();
        let q = qr.q();
        let mut next = qr.r() * &q;
        for i in 0..hi {
            next[(i, i)] += shift;
        }
        h.view_mut((0, 0), (hi, hi)).copy_from(&next);
    }
    Ok(eigs)
}

/// Eigenvector of a small matrix for a known eigenvalue, by a few steps of
/// inverse iteration with a slightly shifted LU.
fn small_eigenvector(h: &CMatrix, mu: Complex64) -> CVector {
    let n = h.nrows();
    let mut eps = 1e-13 * (h.norm() + mu.norm() + 1.0);
    loop {
        let mut shifted = h.clone();
        for i in 0..n {
            shifted[(i, i)] -= mu + Complex64::from(eps);
        }
        let lu = shifted.lu();
        let mut v = CVector::from_element(n, Complex64::from(1.0)).unscale((n as f64).sqrt());
        let mut ok = true;
        for _ in 0..3 {
            match lu.solve(&v) {
                Some(w) if w.norm() > 0.0 => v = w.unscale(w.norm()),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return v;
        }
        eps *= 10.0;
    }
}

/// Fixes the arbitrary global phase so the largest-magnitude entry is
/// real and positive. Keeps restarted runs deterministic.
fn fix_phase(v: &mut CVector) {
    let mut idx = 0;
    let mut best = 0.0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > best {
            best = z.norm();
            idx = i;
        }
    }
    if best > 0.0 {
        let phase = v[idx] / Complex64::from(best);
        let corr = phase.conj();
        for z in v.iter_mut() {
            *z *= corr;
        }
    }
}

/// Dominant eigenpair of `op` by restarted Arnoldi with warm start `v0`.
///
/// Converged when `||op(v) - lambda v|| <= tol * |lambda|`. On failure the
/// error carries the best residual seen.
pub fn arnoldi_dominant(
    op: &dyn LinearOperator,
    v0: &CVector,
    krylov_dim: usize,
    tol: f64,
    max_restarts: usize,
) -> Result<(Complex64, CVector)> {
    let n0 = v0.norm();
    if n0 == 0.0 || !n0.is_finite() {
        return Err(LinAlgError::NonFinite);
    }
    let mut x = v0.unscale(n0);
    let mut best = f64::INFINITY;
    let mut applications = 0usize;
    for _ in 0..max_restarts {
        let (basis, h, k) = arnoldi_process(op, &x, krylov_dim);
        applications += k;
        let hk = h.view((0, 0), (k, k)).into_owned();
        let eigs = small_eigenvalues(hk.clone())?;
        let mu = eigs
            .into_iter()
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .expect("nonempty spectrum");
        let z = small_eigenvector(&hk, mu);
        let mut y = CVector::zeros(op.dim());
        for (i, v) in basis.iter().take(k).enumerate() {
            y.axpy(z[i], v, Complex64::from(1.0));
        }
        let ny = y.norm();
        if ny == 0.0 {
            return Err(LinAlgError::NoConvergence {
                method: "arnoldi",
                residual: best,
                iterations: applications,
            });
        }
        x = y.unscale(ny);
        fix_phase(&mut x);
        let ax = op.apply(&x);
        applications += 1;
        let resid = (&ax - x.scale2(mu)).norm();
        best = best.min(resid);
        if resid <= tol * mu.norm().max(1e-300) {
            return Ok((mu, x));
        }
    }
    Err(LinAlgError::NoConvergence {
        method: "arnoldi",
        residual: best,
        iterations: applications,
    })
}

trait Scale2 {
    fn scale2(&self, z: Complex64) -> CVector;
}
impl Scale2 for CVector {
    fn scale2(&self, z: Complex64) -> CVector {
        self.map(|x| x * z)
    }
}

/// Least-squares solve of the (k+1)×k Hessenberg system `min ||beta e1 - H y||`.
/// Returns the coefficients and the residual norm.
fn hessenberg_lsq(h: &CMatrix, k: usize, beta: f64) -> (CVector, f64) {
    let hbar = h.view((0, 0), (k + 1, k)).into_owned();
    let mut rhs = CVector::zeros(k + 1);
    rhs[0] = Complex64::from(beta);
    let qr = hbar.qr();
    let qtb = qr.q().adjoint() * &rhs;
    let r = qr.r();
    let y = r
        .solve_upper_triangular(&qtb)
        .unwrap_or_else(|| CVector::zeros(k));
    let mut hy = CVector::zeros(k + 1);
    for j in 0..k {
        for i in 0..(k + 1).min(j + 2) {
            hy[i] += h[(i, j)] * y[j];
        }
    }
    let resid = (&rhs - &hy).norm();
    (y, resid)
}

/// Solves `op(x) = rhs` by restarted GMRES with warm start `x0`.
///
/// Converged when `||op(x) - rhs|| <= tol * ||rhs||`.
pub fn gmres_solve(
    op: &dyn LinearOperator,
    rhs: &CVector,
    x0: &CVector,
    krylov_dim: usize,
    tol: f64,
    max_restarts: usize,
) -> Result<CVector> {
    let bnorm = rhs.norm();
    if bnorm == 0.0 {
        return Ok(CVector::zeros(op.dim()));
    }
    let mut x = x0.clone();
    let mut best = f64::INFINITY;
    let mut applications = 0usize;
    for _ in 0..max_restarts {
        let r = rhs - op.apply(&x);
        applications += 1;
        let beta = r.norm();
        best = best.min(beta / bnorm);
        if beta <= tol * bnorm {
            return Ok(x);
        }
        let start = r.unscale(beta);
        let (basis, h, kmax) = arnoldi_process(op, &start, krylov_dim);
        applications += kmax;
        // Pick the smallest prefix whose least-squares residual already
        // meets the tolerance; otherwise use the full cycle.
        let mut chosen = None;
        for k in 1..=kmax {
            let (y, resid) = hessenberg_lsq(&h, k, beta);
            if resid <= tol * bnorm || k == kmax {
                chosen = Some((y, k));
                break;
            }
        }
        let (y, k) = chosen.expect("kmax >= 1");
        for (j, v) in basis.iter().take(k).enumerate() {
            x.axpy(y[j], v, Complex64::from(1.0));
        }
    }
    let resid = (rhs - op.apply(&x)).norm() / bnorm;
    if resid <= tol {
        Ok(x)
    } else {
        Err(LinAlgError::NoConvergence {
            method: "gmres",
            residual: resid.min(best),
            iterations: applications,
        })
    }
}
