//! Complex Stiefel and Grassmann manifold geometry.
//!
//! Points are isometric matrices `W` (n×p, `W†W = 1`). Tangent vectors are
//! kept in factored form `X = W A + Z` with `A` skew-hermitian (identically
//! zero on Grassmann) and `W†Z = 0`; `Z` is the product `W_perp B` without
//! ever materializing a basis of the orthogonal complement. The metric is
//! the Euclidean one, `g(X, Y) = Re Tr[X†Y]`.
//!
//! Retraction and vector transport follow the one-parameter unitary flow
//! `e^{alpha Q_X}` generated by a tangent, evaluated in the 2p-dimensional
//! subspace spanned by `[W, Z]`: sines and cosines of the singular values
//! of `Z` on Grassmann, a 2p×2p skew-hermitian exponential on Stiefel. The
//! flow preserves inner products (a metric connection), which the
//! optimizers rely on.

mod product;

pub use product::{
    product_metric, product_precondition, product_project, product_retract, product_transport,
    ProductPoint, ProductTangent, ProductTransporter,
};

use crate::linalg::{
    self, eigh, expm_skew, polar, qr_thin, solve_sylvester_hpd, CMatrix, LinAlgError,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not isometric: ||W†W - 1|| = {0:.3e}")]
    NotIsometric(f64),
    #[error("unitary kind requires a square matrix, got {n}x{p}")]
    NotSquare { n: usize, p: usize },
    #[error("tangent is not based at the given point (||W†Z|| = {0:.3e})")]
    BaseMismatch(f64),
    #[error("manifold kinds differ")]
    KindMismatch,
    #[error("retraction parameter must be finite, got {0}")]
    NonFiniteStep(f64),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
}

pub type Result<T> = std::result::Result<T, ManifoldError>;

/// Which quotient the isometry lives on. `Unitary` is the square Stiefel
/// special case and shares all of its code paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum IsometryKind {
    Stiefel,
    Grassmann,
    Unitary,
}

impl IsometryKind {
    pub fn is_grassmann(self) -> bool {
        matches!(self, IsometryKind::Grassmann)
    }
}

/// An isometric matrix tagged with its manifold kind.
#[derive(Debug, Clone)]
pub struct IsometryPoint {
    w: CMatrix,
    kind: IsometryKind,
}

const ISOMETRY_TOL: f64 = 1e-10;
const REPOLISH_TOL: f64 = 1e-12;

impl IsometryPoint {
    /// Wraps a matrix already isometric to within 1e-10.
    pub fn new(w: CMatrix, kind: IsometryKind) -> Result<Self> {
        let (n, p) = w.shape();
        if n < p {
            return Err(ManifoldError::DimensionMismatch(format!(
                "isometry needs n >= p, got {n}x{p}"
            )));
        }
        if kind == IsometryKind::Unitary && n != p {
            return Err(ManifoldError::NotSquare { n, p });
        }
        let drift = isometry_drift(&w);
        if drift > ISOMETRY_TOL {
            return Err(ManifoldError::NotIsometric(drift));
        }
        Ok(IsometryPoint { w, kind })
    }

    /// Projects an arbitrary full-rank matrix onto the manifold by its
    /// polar factor, then wraps it.
    pub fn polished(w: &CMatrix, kind: IsometryKind) -> Result<Self> {
        let dec = polar(w)?;
        IsometryPoint::new(dec.q, kind)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.w
    }

    pub fn kind(&self) -> IsometryKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.w.nrows()
    }

    pub fn cols(&self) -> usize {
        self.w.ncols()
    }

    /// Zero tangent vector at this point.
    pub fn zero_tangent(&self) -> Tangent {
        Tangent {
            kind: self.kind,
            a: CMatrix::zeros(self.cols(), self.cols()),
            z: CMatrix::zeros(self.rows(), self.cols()),
        }
    }
}

pub fn isometry_drift(w: &CMatrix) -> f64 {
    let p = w.ncols();
    (w.adjoint() * w - CMatrix::identity(p, p)).norm()
}

/// Tangent vector in factored form `X = W A + Z`, `W†Z = 0`.
#[derive(Debug, Clone)]
pub struct Tangent {
    kind: IsometryKind,
    /// p×p skew-hermitian block; identically zero on Grassmann.
    a: CMatrix,
    /// n×p horizontal block (`W_perp B` without the explicit basis).
    z: CMatrix,
}

impl Tangent {
    pub fn kind(&self) -> IsometryKind {
        self.kind
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn z(&self) -> &CMatrix {
        &self.z
    }

    /// Builds a tangent from raw factors; `a` is re-skewed, `z` is taken
    /// as-is (callers must guarantee `W†Z = 0`).
    pub fn from_parts(kind: IsometryKind, a: CMatrix, z: CMatrix) -> Tangent {
        let a = if kind.is_grassmann() {
            CMatrix::zeros(a.nrows(), a.ncols())
        } else {
            (&a - a.adjoint()).scale(0.5)
        };
        Tangent { kind, a, z }
    }

    /// Dense embedding-space representation `W A + Z`.
    pub fn materialize(&self, base: &IsometryPoint) -> CMatrix {
        base.matrix() * &self.a + &self.z
    }

    pub fn scale(&self, s: f64) -> Tangent {
        Tangent {
            kind: self.kind,
            a: self.a.scale(s),
            z: self.z.scale(s),
        }
    }

    pub fn axpy(&mut self, s: f64, other: &Tangent) {
        let c = Complex64::from(s);
        for (a, b) in self.a.iter_mut().zip(other.a.iter()) {
            *a += c * b;
        }
        for (a, b) in self.z.iter_mut().zip(other.z.iter()) {
            *a += c * b;
        }
    }

    pub fn norm(&self) -> f64 {
        metric(self, self).sqrt()
    }
}

/// Orthogonal projection of an arbitrary matrix onto the tangent space at
/// `w`: `A = skew(W†D)` (zero on Grassmann), `Z = (1 - WW†) D`.
pub fn project(w: &IsometryPoint, d: &CMatrix) -> Result<Tangent> {
    if d.shape() != w.matrix().shape() {
        return Err(ManifoldError::DimensionMismatch(format!(
            "point is {}x{}, matrix is {}x{}",
            w.rows(),
            w.cols(),
            d.nrows(),
            d.ncols()
        )));
    }
    let wd = w.matrix().adjoint() * d;
    let a = if w.kind().is_grassmann() {
        CMatrix::zeros(w.cols(), w.cols())
    } else {
        (&wd - wd.adjoint()).scale(0.5)
    };
    let z = d - w.matrix() * &wd;
    Ok(Tangent {
        kind: w.kind(),
        a,
        z,
    })
}

/// Euclidean metric `Re Tr[X†Y]` evaluated in factored form.
pub fn metric(x: &Tangent, y: &Tangent) -> f64 {
    let mut acc = 0.0;
    for (xa, ya) in x.a.iter().zip(y.a.iter()) {
        acc += (xa.conj() * ya).re;
    }
    for (xz, yz) in x.z.iter().zip(y.z.iter()) {
        acc += (xz.conj() * yz).re;
    }
    acc
}

/// Cached data of one retraction flow `alpha -> e^{alpha Q_X} W`, able to
/// carry any tangent at the start point to the end point.
#[derive(Debug, Clone)]
pub enum Transporter {
    Identity,
    Grassmann {
        wv: CMatrix,
        u: CMatrix,
        cos_m1: Vec<f64>,
        sin: Vec<f64>,
        wnew: CMatrix,
    },
    Stiefel {
        w: CMatrix,
        u: CMatrix,
        flow: CMatrix,
        wnew: CMatrix,
        kind: IsometryKind,
    },
}

/// Retraction result: end point, transported initial tangent (the local
/// velocity of the curve), and the reusable transporter.
pub struct Retraction {
    pub point: IsometryPoint,
    pub tangent: Tangent,
    pub transporter: Transporter,
}

/// Moves `alpha` along the flow generated by tangent `x` at `w`.
///
/// Grassmann uses sines/cosines of the singular values of `Z`; Stiefel
/// exponentiates the 2p×2p generator `[[A, -B†], [B, 0]]` in the subspace
/// basis completed by a QR of `[W Z]`. The end point is re-polished by a
/// polar decomposition when isometry drift exceeds 1e-12.
pub fn retract(w: &IsometryPoint, x: &Tangent, alpha: f64) -> Result<Retraction> {
    if !alpha.is_finite() {
        return Err(ManifoldError::NonFiniteStep(alpha));
    }
    check_based(w, x)?;
    let p = w.cols();
    if alpha == 0.0 || (x.a.norm() == 0.0 && x.z.norm() == 0.0) {
        return Ok(Retraction {
            point: w.clone(),
            tangent: x.clone(),
            transporter: Transporter::Identity,
        });
    }
    if w.kind().is_grassmann() {
        let (u, s, v) = linalg::svd(&x.z)?;
        let wv = w.matrix() * &v;
        let cos_m1: Vec<f64> = s.iter().map(|&si| (alpha * si).cos() - 1.0).collect();
        let sin: Vec<f64> = s.iter().map(|&si| (alpha * si).sin()).collect();
        // W' = W + (WV)(cos - 1)V† + U sin V†; terms with s_i = 0 vanish,
        // which keeps arbitrary SVD null-space columns of U harmless.
        let mut wnew = w.matrix().clone();
        wnew += &wv * diag_real(&cos_m1) * v.adjoint();
        wnew += &u * diag_real(&sin) * v.adjoint();
        // Local velocity: dW'/dalpha = (-WV S sin + U S cos) V†.
        let s_sin: Vec<f64> = s.iter().zip(&sin).map(|(&si, &sn)| -si * sn).collect();
        let s_cos: Vec<f64> = s
            .iter()
            .zip(&cos_m1)
            .map(|(&si, &cm)| si * (cm + 1.0))
            .collect();
        let znew = (&wv * diag_real(&s_sin) + &u * diag_real(&s_cos)) * v.adjoint();
        let (point, znew) = polish(wnew, znew, w.kind())?;
        let tangent = Tangent {
            kind: w.kind(),
            a: CMatrix::zeros(p, p),
            z: znew,
        };
        Ok(Retraction {
            transporter: Transporter::Grassmann {
                wv,
                u,
                cos_m1,
                sin,
                wnew: point.matrix().clone(),
            },
            point,
            tangent,
        })
    } else {
        // Orthonormal basis for the part of Z outside col(W), from the
        // deterministic completion in a QR of the concatenation.
        let u = complement_basis(w.matrix(), &x.z);
        let k = u.ncols();
        let b = u.adjoint() * &x.z;
        let mut gen = CMatrix::zeros(p + k, p + k);
        gen.view_mut((0, 0), (p, p)).copy_from(&x.a);
        gen.view_mut((0, p), (p, k)).copy_from(&(-b.adjoint()));
        gen.view_mut((p, 0), (k, p)).copy_from(&b);
        let flow = expm_skew(&gen.scale(alpha))?;
        let e_left = flow.view((0, 0), (p + k, p)).into_owned();
        let wnew = w.matrix() * e_left.view((0, 0), (p, p)) + &u * e_left.view((p, 0), (k, p));
        // Velocity = [W U] (G E)[:, :p] with G the generator.
        let ge = &gen * &e_left;
        let xnew = w.matrix() * ge.view((0, 0), (p, p)) + &u * ge.view((p, 0), (k, p));
        let (point, xnew) = polish(wnew, xnew, w.kind())?;
        let tangent = factor_tangent(&point, &xnew);
        Ok(Retraction {
            transporter: Transporter::Stiefel {
                w: w.matrix().clone(),
                u,
                flow,
                wnew: point.matrix().clone(),
                kind: w.kind(),
            },
            point,
            tangent,
        })
    }
}

fn diag_real(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d.len(),
        d.iter().map(|&x| Complex64::from(x)),
    ))
}

/// Orthonormal basis (n×k, k = min(p, n-p)) of the part of the complement
/// of col(W) that can hold col(Z), from the Householder completion in a QR
/// of `[W Z]`. Works for any rank of Z, including zero.
fn complement_basis(w: &CMatrix, z: &CMatrix) -> CMatrix {
    let (n, p) = w.shape();
    let k = p.min(n - p);
    if k == 0 {
        return CMatrix::zeros(n, 0);
    }
    let mut cat = CMatrix::zeros(n, 2 * p);
    cat.view_mut((0, 0), (n, p)).copy_from(w);
    cat.view_mut((0, p), (n, p)).copy_from(z);
    let q = cat.qr().q();
    q.view((0, p), (n, k)).into_owned()
}

/// Re-isometrizes a drifted end point and re-orthogonalizes the velocity.
fn polish(wnew: CMatrix, vel: CMatrix, kind: IsometryKind) -> Result<(IsometryPoint, CMatrix)> {
    let drift = isometry_drift(&wnew);
    let wfixed = if drift > REPOLISH_TOL {
        polar(&wnew)?.q
    } else {
        wnew
    };
    // Remove any column-space drift from the velocity: the whole overlap
    // on Grassmann, only the hermitian part on Stiefel (the skew part is
    // a legitimate tangent component).
    let overlap = wfixed.adjoint() * &vel;
    let vel = if kind.is_grassmann() {
        vel - &wfixed * overlap
    } else {
        let herm = (&overlap + overlap.adjoint()).scale(0.5);
        vel - &wfixed * herm
    };
    Ok((IsometryPoint::new(wfixed, kind)?, vel))
}

/// Splits a dense tangent representative at `w` into factored form.
fn factor_tangent(w: &IsometryPoint, x: &CMatrix) -> Tangent {
    let wx = w.matrix().adjoint() * x;
    let a = if w.kind().is_grassmann() {
        CMatrix::zeros(w.cols(), w.cols())
    } else {
        (&wx - wx.adjoint()).scale(0.5)
    };
    let z = x - w.matrix() * &wx;
    Tangent {
        kind: w.kind(),
        a,
        z,
    }
}

impl Transporter {
    /// Carries a tangent at the flow's start point to its end point.
    pub fn apply(&self, y: &Tangent) -> Tangent {
        match self {
            Transporter::Identity => y.clone(),
            Transporter::Grassmann {
                wv,
                u,
                cos_m1,
                sin,
                wnew,
            } => {
                // Y' = Y - (WV) sin (U†Y) + U (cos - 1)(U†Y), using W†Y = 0.
                let uy = u.adjoint() * &y.z;
                let mut znew = y.z.clone();
                let neg_sin: Vec<f64> = sin.iter().map(|&s| -s).collect();
                znew += wv * diag_real(&neg_sin) * &uy;
                znew += u * diag_real(cos_m1) * &uy;
                // Re-enforce horizontality at the (possibly polished) end point.
                let overlap = wnew.adjoint() * &znew;
                znew -= wnew * overlap;
                Tangent {
                    kind: y.kind,
                    a: y.a.clone(),
                    z: znew,
                }
            }
            Transporter::Stiefel {
                w,
                u,
                flow,
                wnew,
                kind,
            } => {
                let p = y.a.nrows();
                let k = u.ncols();
                let uy = u.adjoint() * &y.z;
                let mut coeff = CMatrix::zeros(p + k, p);
                coeff.view_mut((0, 0), (p, p)).copy_from(&y.a);
                coeff.view_mut((p, 0), (k, p)).copy_from(&uy);
                let moved = flow * &coeff;
                let rest = &y.z - u * &uy;
                let dense = w * moved.view((0, 0), (p, p)) + u * moved.view((p, 0), (k, p)) + rest;
                let base = IsometryPoint {
                    w: wnew.clone(),
                    kind: *kind,
                };
                factor_tangent(&base, &dense)
            }
        }
    }
}

fn check_based(w: &IsometryPoint, y: &Tangent) -> Result<()> {
    if y.kind != w.kind() {
        return Err(ManifoldError::KindMismatch);
    }
    if y.z.shape() != w.matrix().shape() || y.a.nrows() != w.cols() {
        return Err(ManifoldError::DimensionMismatch(
            "tangent blocks do not match the point".into(),
        ));
    }
    let overlap = (w.matrix().adjoint() * &y.z).norm();
    let scale = y.z.norm();
    if overlap > 1e-8 * (scale + 1.0) {
        return Err(ManifoldError::BaseMismatch(overlap));
    }
    Ok(())
}

/// Transports `y` along the flow of `x` at `w` by `alpha`. The transport
/// is the same unitary flow as the retraction, hence metric-preserving.
pub fn transport(y: &Tangent, w: &IsometryPoint, x: &Tangent, alpha: f64) -> Result<Tangent> {
    check_based(w, y)?;
    let r = retract(w, x, alpha)?;
    Ok(r.transporter.apply(y))
}

/// Preconditioning `X -> X~` with the regularized density matrix:
/// eigenvalues of `rho` are replaced by `(lambda^2 + delta^2)^{1/2}`, then
/// `Z~ = Z rho_reg^{-1}` and (Stiefel) `A~ rho_reg + rho_reg A~ = 2A`.
pub fn precondition(x: &Tangent, rho: &CMatrix, delta: f64) -> Result<Tangent> {
    let p = x.a.nrows();
    if rho.nrows() != p || rho.ncols() != p {
        return Err(ManifoldError::DimensionMismatch(format!(
            "density matrix must be {p}x{p}"
        )));
    }
    let (lambda, u) = eigh(rho)?;
    let reg: Vec<f64> = lambda
        .iter()
        .map(|&l| (l * l + delta * delta).sqrt())
        .collect();
    let lmax = reg.iter().cloned().fold(0.0f64, f64::max);
    if reg.iter().any(|&l| l <= 1e-14 * lmax.max(1e-300)) {
        return Err(ManifoldError::LinAlg(LinAlgError::SingularPencil(
            reg.iter().cloned().fold(f64::INFINITY, f64::min),
        )));
    }
    let inv: Vec<f64> = reg.iter().map(|&l| 1.0 / l).collect();
    let znew = &x.z * (&u * diag_real(&inv) * u.adjoint());
    let anew = if x.kind.is_grassmann() {
        CMatrix::zeros(p, p)
    } else {
        let rho_reg = &u * diag_real(&reg) * u.adjoint();
        solve_sylvester_hpd(&rho_reg, &x.a)?
    };
    Ok(Tangent {
        kind: x.kind,
        a: anew,
        z: znew,
    })
}

/// Random point from a QR-orthonormalized complex Gaussian matrix.
pub fn random_point(n: usize, p: usize, kind: IsometryKind, seed: u64) -> Result<IsometryPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_point_with(n, p, kind, &mut rng)
}

pub fn random_point_with<R: rand::Rng>(
    n: usize,
    p: usize,
    kind: IsometryKind,
    rng: &mut R,
) -> Result<IsometryPoint> {
    let g = linalg::gaussian_matrix(n, p, rng);
    let (q, _) = qr_thin(&g)?;
    IsometryPoint::new(q, kind)
}

/// Random tangent from projecting a complex Gaussian matrix.
pub fn random_tangent(w: &IsometryPoint, seed: u64) -> Result<Tangent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_tangent_with(w, &mut rng)
}

pub fn random_tangent_with<R: rand::Rng>(w: &IsometryPoint, rng: &mut R) -> Result<Tangent> {
    let g = linalg::gaussian_matrix(w.rows(), w.cols(), rng);
    project(w, &g)
}
