use super::*;
use crate::linalg::{gaussian_matrix, svd, CMatrix, CVector};
use crate::manifolds::{
    metric, project, random_point, IsometryKind, IsometryPoint, Tangent,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Rayleigh quotient `C(W) = Re Tr[W† H W]` for hermitian `H`; minimized
/// over Grassmann(n, p) it converges to the sum of the p smallest
/// eigenvalues.
struct Rayleigh {
    h: CMatrix,
}

impl Problem for Rayleigh {
    fn evaluate(&mut self, x: &ProductPoint) -> Result<(f64, ProductTangent)> {
        let w = &x.0[0];
        let cost = (w.matrix().adjoint() * &self.h * w.matrix()).trace().re;
        let d = (&self.h * w.matrix()).scale(2.0);
        let g = project(w, &d)?;
        Ok((cost, ProductTangent(vec![g])))
    }
}

/// `C(W) = -Re Tr[W† M]` on Stiefel; the minimum is minus the sum of
/// singular values of `M`, attained at the polar factor.
struct Procrustes {
    m: CMatrix,
}

impl Problem for Procrustes {
    fn evaluate(&mut self, x: &ProductPoint) -> Result<(f64, ProductTangent)> {
        let w = &x.0[0];
        let cost = -(w.matrix().adjoint() * &self.m).trace().re;
        let d = self.m.scale(-1.0);
        let g = project(w, &d)?;
        Ok((cost, ProductTangent(vec![g])))
    }
}

fn spectrum_matrix(lambda: &[f64], seed: u64) -> CMatrix {
    let n = lambda.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u, _) = crate::linalg::qr_thin(&gaussian_matrix(n, n, &mut rng)).unwrap();
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        lambda.iter().map(|&l| Complex64::from(l)),
    ));
    &u * d * u.adjoint()
}

#[test]
fn rayleigh_reaches_smallest_eigenvalues() {
    let lambda = [-1.0, -0.5, 0.3, 0.8, 1.2, 2.0, 2.5, 3.0];
    let h = spectrum_matrix(&lambda, 11);
    for method in [Method::Lbfgs, Method::ConjugateGradient] {
        let mut problem = Rayleigh { h: h.clone() };
        let x0 = ProductPoint(vec![
            random_point(8, 2, IsometryKind::Grassmann, 7).unwrap()
        ]);
        let mut opts = OptimizerOptions::new(method);
        opts.grad_tol = 1e-10;
        opts.max_iters = 500;
        let ls = match method {
            Method::ConjugateGradient => LineSearchParams::default_cg(),
            _ => LineSearchParams::default_lbfgs(),
        };
        let res = minimize(&mut problem, x0, &opts, &ls).unwrap();
        assert!(res.converged, "{method:?} did not converge");
        assert!(
            (res.cost - (-1.5)).abs() < 1e-10,
            "{method:?} cost {} vs -1.5",
            res.cost
        );
    }
}

#[test]
fn critical_start_returns_immediately() {
    let lambda = [-1.0, -0.5, 0.3, 0.8, 1.2, 2.0];
    let h = spectrum_matrix(&lambda, 13);
    let (_, u) = crate::linalg::eigh(&h).unwrap();
    let w = IsometryPoint::new(u.view((0, 0), (6, 2)).into_owned(), IsometryKind::Grassmann)
        .unwrap();
    let mut problem = Rayleigh { h };
    let opts = OptimizerOptions::new(Method::Lbfgs);
    let res = minimize(
        &mut problem,
        ProductPoint(vec![w]),
        &opts,
        &LineSearchParams::default_lbfgs(),
    )
    .unwrap();
    assert!(res.converged);
    assert_eq!(res.trace.len(), 1, "no iterations should be spent");
}

#[test]
fn procrustes_reaches_singular_value_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let m = gaussian_matrix(6, 3, &mut rng);
    let (_, s, _) = svd(&m).unwrap();
    let target = -s.iter().sum::<f64>();
    let mut problem = Procrustes { m };
    let x0 = ProductPoint(vec![random_point(6, 3, IsometryKind::Stiefel, 19).unwrap()]);
    let mut opts = OptimizerOptions::new(Method::Lbfgs);
    opts.grad_tol = 1e-9;
    opts.max_iters = 300;
    let res = minimize(&mut problem, x0, &opts, &LineSearchParams::default_lbfgs()).unwrap();
    assert!(res.converged);
    assert!((res.cost - target).abs() < 1e-8, "{} vs {target}", res.cost);
}

#[test]
fn cost_decreases_monotonically() {
    let lambda = [-2.0, -0.4, 0.1, 0.9, 1.4, 2.2, 2.9, 3.3];
    let h = spectrum_matrix(&lambda, 23);
    let mut problem = Rayleigh { h };
    let x0 = ProductPoint(vec![
        random_point(8, 3, IsometryKind::Grassmann, 29).unwrap()
    ]);
    let mut opts = OptimizerOptions::new(Method::ConjugateGradient);
    opts.grad_tol = 1e-9;
    let res = minimize(
        &mut problem,
        x0,
        &opts,
        &LineSearchParams::default_cg(),
    )
    .unwrap();
    assert!(res.converged);
    for pair in res.trace.windows(2) {
        assert!(
            pair[1].cost <= pair[0].cost + 1e-12 * pair[0].cost.abs().max(1.0),
            "cost increased: {} -> {}",
            pair[0].cost,
            pair[1].cost
        );
    }
}

/// Orthonormal real test tangents in the horizontal space at W = e1 on
/// Grassmann(4, 1).
fn test_frame() -> (IsometryPoint, Vec<Tangent>) {
    let mut w = CMatrix::zeros(4, 1);
    w[(0, 0)] = Complex64::from(1.0);
    let point = IsometryPoint::new(w, IsometryKind::Grassmann).unwrap();
    let mut frame = Vec::new();
    for i in 1..4 {
        let mut z = CMatrix::zeros(4, 1);
        z[(i, 0)] = Complex64::from(1.0);
        frame.push(Tangent::from_parts(
            IsometryKind::Grassmann,
            CMatrix::zeros(1, 1),
            z,
        ));
    }
    (point, frame)
}

fn combo(frame: &[Tangent], coeffs: &[f64]) -> ProductTangent {
    let mut t = frame[0].scale(coeffs[0]);
    for (c, f) in coeffs.iter().zip(frame.iter()).skip(1) {
        t.axpy(*c, f);
    }
    ProductTangent(vec![t])
}

#[test]
fn cg_beta_zero_direction_restarts() {
    let (_, frame) = test_frame();
    let g_new = combo(&frame, &[1.0, 0.0, 0.0]);
    let g_old = combo(&frame, &[0.5, 0.5, 0.0]);
    let d_zero = combo(&frame, &[0.0, 0.0, 0.0]);
    let mut y = g_new.clone();
    y.axpy(-1.0, &g_old);
    assert_eq!(cg_beta(&g_new, &g_old, &d_zero, &y, 1.0), 0.0);
}

#[test]
fn cg_beta_orthogonal_gradients_give_fletcher_reeves() {
    let (_, frame) = test_frame();
    let g_old = combo(&frame, &[2.0, 0.0, 0.0]);
    let g_new = combo(&frame, &[0.0, 3.0, 0.0]);
    let d_old = g_old.scale(-1.0);
    let mut y = g_new.clone();
    y.axpy(-1.0, &g_old);
    let beta = cg_beta(&g_new, &g_old, &d_old, &y, 2.0);
    assert!((beta - 9.0 / 4.0).abs() < 1e-14, "beta {beta}");
}

#[test]
fn cg_beta_matches_scalar_formula() {
    let (_, frame) = test_frame();
    let g_old = combo(&frame, &[1.0, 0.0, 0.0]);
    let g_new = combo(&frame, &[0.5, 1.0, 0.0]);
    let d_old = combo(&frame, &[-1.5, 0.2, 0.0]);
    let mut y = g_new.clone();
    y.axpy(-1.0, &g_old);
    let beta = cg_beta(&g_new, &g_old, &d_old, &y, 1.0);
    // Scalar evaluation of the same formula on the coefficients.
    let yv = [-0.5, 1.0];
    let dv = [-1.5, 0.2];
    let gv = [0.5, 1.0];
    let dy: f64 = yv.iter().zip(&dv).map(|(a, b)| a * b).sum();
    let yg: f64 = yv.iter().zip(&gv).map(|(a, b)| a * b).sum();
    let yy: f64 = yv.iter().map(|a| a * a).sum();
    let dg: f64 = dv.iter().zip(&gv).map(|(a, b)| a * b).sum();
    let expected = (yg - 2.0 * yy * dg / dy) / dy;
    assert!((beta - expected).abs() < 1e-14, "{beta} vs {expected}");
}

#[test]
fn lbfgs_empty_history_is_steepest_descent() {
    let (_, frame) = test_frame();
    let g = combo(&frame, &[0.3, -0.7, 0.1]);
    let history = VecDeque::new();
    let d = lbfgs_direction(&g, &history, |_| Ok(None)).unwrap();
    let mut diff = d;
    diff.axpy(1.0, &g);
    assert!(diff.norm() < 1e-14);
}

#[test]
fn lbfgs_single_pair_matches_newton_in_span() {
    // With one exact secant pair (s, y = H s) and gradient g = y, the
    // two-loop recursion returns the exact Newton step -H^{-1} g = -s.
    let (_, frame) = test_frame();
    let s = combo(&frame, &[0.7, -0.4, 0.0]);
    // H = [[2, 0.3], [0.3, 1]] acting on the first two frame coefficients.
    let y = combo(&frame, &[2.0 * 0.7 + 0.3 * (-0.4), 0.3 * 0.7 - 0.4, 0.0]);
    let sy = product_metric(&s, &y);
    assert!(sy > 0.0);
    let mut history = VecDeque::new();
    history.push_back(SecantPair {
        s: s.clone(),
        y: y.clone(),
        sy,
    });
    let d = lbfgs_direction(&y, &history, |_| Ok(None)).unwrap();
    let mut diff = d;
    diff.axpy(1.0, &s);
    assert!(diff.norm() < 1e-13, "direction is not the Newton step");
}

#[test]
fn transported_history_keeps_inner_products() {
    // Metric connection: g(G_old, d_old) is invariant under transport.
    let w = random_point(8, 3, IsometryKind::Stiefel, 31).unwrap();
    let g = crate::manifolds::random_tangent(&w, 32).unwrap();
    let d = crate::manifolds::random_tangent(&w, 33).unwrap();
    let before = metric(&g, &d);
    let gt = crate::manifolds::transport(&g, &w, &d, 0.8).unwrap();
    let dt = crate::manifolds::transport(&d, &w, &d, 0.8).unwrap();
    let after = metric(&gt, &dt);
    assert!((before - after).abs() < 1e-10);
}
