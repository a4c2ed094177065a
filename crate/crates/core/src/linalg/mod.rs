//! Dense complex matrix kernels shared by every other module.
//!
//! All kernels operate on [`CMatrix`] (column-major, complex f64) and are
//! pure functions of their inputs: identical input bits give identical
//! output bits. Decomposition sign/phase freedom is pinned explicitly
//! (see [`qr_thin`]) so downstream results are reproducible.

mod krylov;

pub use krylov::{arnoldi_dominant, gmres_solve, DenseOperator, LinearOperator};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex matrix, column-major storage.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex vector.
pub type CVector = DVector<Complex64>;

/// Errors produced by the dense and Krylov kernels.
#[derive(Debug, Error)]
pub enum LinAlgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not hermitian: relative asymmetry {0:.3e}")]
    NotHermitian(f64),
    #[error("matrix is not skew-hermitian: relative asymmetry {0:.3e}")]
    NotSkewHermitian(f64),
    #[error("singular Sylvester pencil: eigenvalue pair sum {0:.3e} below cutoff")]
    SingularPencil(f64),
    #[error("{method} did not converge: best residual {residual:.3e} after {iterations} operator applications")]
    NoConvergence {
        method: &'static str,
        residual: f64,
        iterations: usize,
    },
    #[error("line search requires a descent direction (initial slope {0:.3e} >= 0)")]
    NotDescent(f64),
}

pub type Result<T> = std::result::Result<T, LinAlgError>;

fn ensure_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(LinAlgError::NonFinite)
    }
}

/// Thin QR decomposition `M = Q R` with `Q` an n×p isometry and `R` upper
/// triangular with non-negative real diagonal. The diagonal phase of `R`
/// is absorbed into `Q`'s columns, which makes the factorization unique
/// (hence bit-deterministic) for full-rank input.
pub fn qr_thin(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let (n, p) = m.shape();
    if n < p {
        return Err(LinAlgError::DimensionMismatch {
            expected: format!("n >= p"),
            got: format!("{n}x{p}"),
        });
    }
    ensure_finite(m)?;
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    // Pin the phase: scale column j of Q by the phase of r[j,j] and row j
    // of R by its conjugate so the diagonal becomes non-negative real.
    for j in 0..p {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / Complex64::from(d.norm());
            for i in 0..n {
                q[(i, j)] *= phase;
            }
            let pc = phase.conj();
            for k in 0..p {
                r[(j, k)] *= pc;
            }
        }
    }
    Ok((q, r))
}

/// Thin singular value decomposition `M = U diag(S) V†` with `S` sorted
/// descending, `U` n×k and `V` p×k isometric, `k = min(n, p)`.
pub fn svd(m: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    ensure_finite(m)?;
    let k = m.nrows().min(m.ncols());
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("svd requested u");
    let vt = dec.v_t.expect("svd requested v_t");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        dec.singular_values[b]
            .partial_cmp(&dec.singular_values[a])
            .unwrap()
    });
    let s: Vec<f64> = order.iter().map(|&i| dec.singular_values[i]).collect();
    let u = CMatrix::from_fn(m.nrows(), k, |i, j| u[(i, order[j])]);
    let v = CMatrix::from_fn(m.ncols(), k, |i, j| vt[(order[j], i)].conj());
    Ok((u, s, v))
}

/// Eigendecomposition of a hermitian matrix: `H = U diag(lambda) U†` with
/// real eigenvalues sorted ascending. Input is symmetrized internally;
/// asymmetry beyond `1e-10 * ||H||` is rejected.
pub fn eigh(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(LinAlgError::DimensionMismatch {
            expected: "square".into(),
            got: format!("{}x{}", h.nrows(), h.ncols()),
        });
    }
    ensure_finite(h)?;
    let norm = h.norm();
    let asym = (h - h.adjoint()).norm();
    if norm > 0.0 && asym > 1e-10 * norm {
        return Err(LinAlgError::NotHermitian(asym / norm));
    }
    let sym = (h + h.adjoint()).scale(0.5);
    let dec = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[a].partial_cmp(&dec.eigenvalues[b]).unwrap());
    let lambda: Vec<f64> = order.iter().map(|&i| dec.eigenvalues[i]).collect();
    let u = CMatrix::from_fn(n, n, |i, j| dec.eigenvectors[(i, order[j])]);
    Ok((lambda, u))
}

/// Matrix exponential of a skew-hermitian matrix, computed through the
/// hermitian eigendecomposition of `iK`: the result is unitary up to
/// rounding by construction.
pub fn expm_skew(k: &CMatrix) -> Result<CMatrix> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(LinAlgError::DimensionMismatch {
            expected: "square".into(),
            got: format!("{}x{}", k.nrows(), k.ncols()),
        });
    }
    ensure_finite(k)?;
    let norm = k.norm();
    let asym = (k + k.adjoint()).norm();
    if norm > 0.0 && asym > 1e-10 * norm {
        return Err(LinAlgError::NotSkewHermitian(asym / norm));
    }
    // iK is hermitian; K = U diag(-i mu) U†, so exp(K) = U diag(exp(-i mu)) U†.
    let ik = k.map(|z| Complex64::i() * z);
    let (mu, u) = eigh(&ik)?;
    let phases = CVector::from_iterator(n, mu.iter().map(|&m| (-Complex64::i() * m).exp()));
    let mut scaled = u.clone();
    for j in 0..n {
        let ph = phases[j];
        for i in 0..n {
            scaled[(i, j)] *= ph;
        }
    }
    Ok(&scaled * u.adjoint())
}

/// Polar decomposition of an n×p matrix, n >= p.
#[derive(Debug, Clone)]
pub struct PolarDecomp {
    /// Isometric factor, n×p.
    pub q: CMatrix,
    /// Hermitian positive semi-definite factor, p×p.
    pub p: CMatrix,
    /// True when the smallest singular value is below `1e-14 * sigma_max`,
    /// in which case `q`'s null-direction columns follow the SVD convention.
    pub rank_deficient: bool,
}

/// Polar decomposition `M = Q P` via the SVD: `Q = U V†`, `P = V diag(S) V†`.
pub fn polar(m: &CMatrix) -> Result<PolarDecomp> {
    let (n, p) = m.shape();
    if n < p {
        return Err(LinAlgError::DimensionMismatch {
            expected: "n >= p".into(),
            got: format!("{n}x{p}"),
        });
    }
    let (u, s, v) = svd(m)?;
    let q = &u * v.adjoint();
    let mut sv = v.clone();
    for j in 0..p {
        for i in 0..p {
            sv[(i, j)] *= Complex64::from(s[j]);
        }
    }
    let pmat = &sv * v.adjoint();
    let rank_deficient = match s.first() {
        Some(&smax) if smax > 0.0 => s[p - 1] <= 1e-14 * smax,
        _ => true,
    };
    Ok(PolarDecomp {
        q,
        p: pmat,
        rank_deficient,
    })
}

/// Solves the Sylvester equation `X rho + rho X = 2 A` for skew-hermitian
/// `A` and hermitian PSD `rho`, in `rho`'s eigenbasis:
/// `X'_{ij} = 2 A'_{ij} / (lambda_i + lambda_j)`.
///
/// The solution of a skew-hermitian right-hand side is skew-hermitian;
/// this is re-enforced exactly on the output.
pub fn solve_sylvester_hpd(rho: &CMatrix, a: &CMatrix) -> Result<CMatrix> {
    let p = rho.nrows();
    if rho.ncols() != p || a.nrows() != p || a.ncols() != p {
        return Err(LinAlgError::DimensionMismatch {
            expected: format!("{p}x{p}"),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let (lambda, u) = eigh(rho)?;
    let lmax = lambda.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = 1e-14 * lmax;
    let a_eig = u.adjoint() * a * &u;
    let mut x_eig = CMatrix::zeros(p, p);
    for j in 0..p {
        for i in 0..p {
            let denom = lambda[i] + lambda[j];
            if denom <= cutoff {
                return Err(LinAlgError::SingularPencil(denom));
            }
            x_eig[(i, j)] = Complex64::from(2.0) * a_eig[(i, j)] / Complex64::from(denom);
        }
    }
    let x = &u * x_eig * u.adjoint();
    Ok((&x - x.adjoint()).scale(0.5))
}

/// Standard complex Gaussian matrix (real and imaginary parts i.i.d.
/// standard normal) from the given RNG.
pub fn gaussian_matrix<R: rand::Rng>(n: usize, p: usize, rng: &mut R) -> CMatrix {
    use rand_distr::{Distribution, StandardNormal};
    CMatrix::from_fn(n, p, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    })
}

/// Frobenius-relative distance, with an absolute fallback for zero reference.
pub fn rel_err(value: &CMatrix, reference: &CMatrix) -> f64 {
    let denom = reference.norm();
    if denom > 0.0 {
        (value - reference).norm() / denom
    } else {
        value.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_hermitian(n: usize, r: &mut ChaCha8Rng) -> CMatrix {
        let m = gaussian_matrix(n, n, r);
        (&m + m.adjoint()).scale(0.5)
    }

    fn random_skew(n: usize, r: &mut ChaCha8Rng) -> CMatrix {
        let m = gaussian_matrix(n, n, r);
        (&m - m.adjoint()).scale(0.5)
    }

    fn random_hpd(n: usize, r: &mut ChaCha8Rng) -> CMatrix {
        let m = gaussian_matrix(n, n, r);
        &m * m.adjoint() + CMatrix::identity(n, n).scale(0.1)
    }

    #[test]
    fn qr_identity() {
        let id = CMatrix::identity(3, 3);
        let (q, r) = qr_thin(&id).unwrap();
        assert!(rel_err(&q, &id) < 1e-14);
        assert!(rel_err(&r, &id) < 1e-14);
    }

    #[test]
    fn qr_column_normalization() {
        let m = CMatrix::from_column_slice(2, 1, &[Complex64::from(3.0), Complex64::from(4.0)]);
        let (q, r) = qr_thin(&m).unwrap();
        assert!((q[(0, 0)] - Complex64::from(0.6)).norm() < 1e-14);
        assert!((q[(1, 0)] - Complex64::from(0.8)).norm() < 1e-14);
        assert!((r[(0, 0)] - Complex64::from(5.0)).norm() < 1e-14);
    }

    #[test]
    fn qr_random_residual_and_isometry() {
        let mut r = rng(7);
        let m = gaussian_matrix(8, 3, &mut r);
        let (q, rr) = qr_thin(&m).unwrap();
        assert!(rel_err(&(&q * &rr), &m) < 1e-12);
        assert!((q.adjoint() * &q - CMatrix::identity(3, 3)).norm() < 1e-12);
        for j in 0..3 {
            assert!(rr[(j, j)].im.abs() < 1e-13);
            assert!(rr[(j, j)].re >= 0.0);
        }
    }

    #[test]
    fn qr_bitwise_deterministic() {
        let mut r = rng(11);
        let m = gaussian_matrix(10, 4, &mut r);
        let (q1, r1) = qr_thin(&m).unwrap();
        let (q2, r2) = qr_thin(&m).unwrap();
        assert_eq!(q1.as_slice(), q2.as_slice());
        assert_eq!(r1.as_slice(), r2.as_slice());
    }

    #[test]
    fn qr_rejects_nan() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(qr_thin(&m), Err(LinAlgError::NonFinite)));
    }

    #[test]
    fn svd_diagonal() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::from(3.0),
            Complex64::from(1.0),
        ]));
        let (_, s, _) = svd(&m).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-14);
        assert!((s[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_zero_matrix() {
        let m = CMatrix::zeros(4, 2);
        let (u, s, v) = svd(&m).unwrap();
        assert!(s.iter().all(|&x| x.abs() < 1e-15));
        assert!((u.adjoint() * &u - CMatrix::identity(2, 2)).norm() < 1e-12);
        assert!((v.adjoint() * &v - CMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn svd_random_reconstruction() {
        let mut r = rng(13);
        let m = gaussian_matrix(6, 4, &mut r);
        let (u, s, v) = svd(&m).unwrap();
        let mut us = u.clone();
        for j in 0..4 {
            for i in 0..6 {
                us[(i, j)] *= Complex64::from(s[j]);
            }
        }
        assert!(rel_err(&(&us * v.adjoint()), &m) < 1e-12);
        for w in s.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn eigh_identity_and_pauli_z() {
        let (l, _) = eigh(&CMatrix::identity(2, 2)).unwrap();
        assert!((l[0] - 1.0).abs() < 1e-14 && (l[1] - 1.0).abs() < 1e-14);
        let z = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::from(1.0),
            Complex64::from(-1.0),
        ]));
        let (l, _) = eigh(&z).unwrap();
        assert!((l[0] + 1.0).abs() < 1e-14 && (l[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_random_reconstruction() {
        let mut r = rng(17);
        let h = random_hermitian(10, &mut r);
        let (l, u) = eigh(&h).unwrap();
        let mut ul = u.clone();
        for j in 0..10 {
            for i in 0..10 {
                ul[(i, j)] *= Complex64::from(l[j]);
            }
        }
        assert!(rel_err(&(&ul * u.adjoint()), &h) < 1e-12);
    }

    #[test]
    fn eigh_rejects_nonhermitian() {
        let mut r = rng(18);
        let m = gaussian_matrix(4, 4, &mut r);
        assert!(matches!(eigh(&m), Err(LinAlgError::NotHermitian(_))));
    }

    #[test]
    fn expm_zero_is_identity() {
        let e = expm_skew(&CMatrix::zeros(3, 3)).unwrap();
        assert!(rel_err(&e, &CMatrix::identity(3, 3)) < 1e-14);
    }

    #[test]
    fn expm_rotation_closed_form() {
        let theta = std::f64::consts::FRAC_PI_2;
        let k = CMatrix::from_column_slice(
            2,
            2,
            &[
                Complex64::from(0.0),
                Complex64::from(theta),
                Complex64::from(-theta),
                Complex64::from(0.0),
            ],
        );
        let e = expm_skew(&k).unwrap();
        let expected = CMatrix::from_column_slice(
            2,
            2,
            &[
                Complex64::from(0.0),
                Complex64::from(1.0),
                Complex64::from(-1.0),
                Complex64::from(0.0),
            ],
        );
        assert!(rel_err(&e, &expected) < 1e-12);
    }

    /// Scaling-and-squaring Taylor series, independent of the eigh path.
    fn expm_taylor(k: &CMatrix) -> CMatrix {
        let n = k.nrows();
        let mut scale = 0u32;
        let mut norm = k.norm();
        while norm > 0.5 {
            norm /= 2.0;
            scale += 1;
        }
        let ks = k.scale(1.0 / (2f64.powi(scale as i32)));
        let mut result = CMatrix::identity(n, n);
        let mut term = CMatrix::identity(n, n);
        for order in 1..=24 {
            term = (&term * &ks).scale(1.0 / order as f64);
            result += &term;
        }
        for _ in 0..scale {
            result = &result * &result;
        }
        result
    }

    #[test]
    fn expm_random_matches_taylor() {
        let mut r = rng(19);
        let k = random_skew(6, &mut r);
        let e = expm_skew(&k).unwrap();
        assert!(rel_err(&e, &expm_taylor(&k)) < 1e-10);
        assert!((e.adjoint() * &e - CMatrix::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn polar_of_isometry() {
        let mut r = rng(23);
        let (q0, _) = qr_thin(&gaussian_matrix(5, 3, &mut r)).unwrap();
        let dec = polar(&q0).unwrap();
        assert!(rel_err(&dec.q, &q0) < 1e-12);
        assert!(rel_err(&dec.p, &CMatrix::identity(3, 3)) < 1e-12);
        assert!(!dec.rank_deficient);
    }

    #[test]
    fn polar_of_diagonal() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::from(2.0),
            Complex64::from(3.0),
        ]));
        let dec = polar(&m).unwrap();
        assert!(rel_err(&dec.q, &CMatrix::identity(2, 2)) < 1e-12);
        assert!(rel_err(&dec.p, &m) < 1e-12);
    }

    #[test]
    fn polar_random_reconstruction() {
        let mut r = rng(29);
        let m = gaussian_matrix(5, 2, &mut r);
        let dec = polar(&m).unwrap();
        assert!(rel_err(&(&dec.q * &dec.p), &m) < 1e-12);
        assert!((dec.q.adjoint() * &dec.q - CMatrix::identity(2, 2)).norm() < 1e-12);
        assert!((&dec.p - dec.p.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn polar_maximizes_overlap() {
        // Q maximizes Re Tr[Q†M] over isometries of the same shape.
        let mut r = rng(31);
        let m = gaussian_matrix(4, 2, &mut r);
        let dec = polar(&m).unwrap();
        let best = (dec.q.adjoint() * &m).trace().re;
        for _ in 0..10_000 {
            let (w, _) = qr_thin(&gaussian_matrix(4, 2, &mut r)).unwrap();
            let overlap = (w.adjoint() * &m).trace().re;
            assert!(overlap <= best + 1e-10);
        }
    }

    #[test]
    fn sylvester_identity_rho() {
        let mut r = rng(37);
        let a = random_skew(4, &mut r);
        let x = solve_sylvester_hpd(&CMatrix::identity(4, 4), &a).unwrap();
        assert!(rel_err(&x, &a) < 1e-12);
        let x2 = solve_sylvester_hpd(&CMatrix::identity(4, 4).scale(2.0), &a).unwrap();
        assert!(rel_err(&x2, &a.scale(0.5)) < 1e-12);
    }

    #[test]
    fn sylvester_random_residual() {
        let mut r = rng(41);
        let rho = random_hpd(5, &mut r);
        let a = random_skew(5, &mut r);
        let x = solve_sylvester_hpd(&rho, &a).unwrap();
        let resid = (&x * &rho + &rho * &x - a.scale(2.0)).norm();
        assert!(resid < 1e-10 * a.norm());
        assert!((&x + x.adjoint()).norm() < 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn sylvester_singular_pencil_rejected() {
        let rho = CMatrix::zeros(3, 3);
        let mut r = rng(43);
        let a = random_skew(3, &mut r);
        assert!(matches!(
            solve_sylvester_hpd(&rho, &a),
            Err(LinAlgError::SingularPencil(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn expm_inverse_property(m in 1usize..=16, seed in 0u64..1000) {
            let mut r = rng(seed);
            let k = random_skew(m, &mut r);
            let e = expm_skew(&k).unwrap();
            let einv = expm_skew(&k.scale(-1.0)).unwrap();
            prop_assert!((&e * &einv - CMatrix::identity(m, m)).norm() < 1e-12 * (m as f64));
        }

        #[test]
        fn sylvester_preserves_skew(p in 2usize..=6, seed in 0u64..1000) {
            let mut r = rng(seed);
            let rho = random_hpd(p, &mut r);
            let a = random_skew(p, &mut r);
            let x = solve_sylvester_hpd(&rho, &a).unwrap();
            prop_assert!((&x + x.adjoint()).norm() < 1e-12 * x.norm().max(1.0));
        }
    }
}
