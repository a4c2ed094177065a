//! Riemannian first-order optimizers: gradient descent, Hager–Zhang
//! nonlinear conjugate gradient, and L-BFGS, all sharing one Wolfe line
//! search and an optional preconditioner.
//!
//! History data (previous gradients, search directions, L-BFGS secant
//! pairs) is vector-transported to the current iterate before use, along
//! the same unitary flow as the retraction, so inner products between
//! carried tangents are preserved exactly up to rounding.

mod linesearch;

pub use linesearch::{linesearch, LineSearchFailure, LineSearchParams, LineSearchResult};

use crate::linalg::LinAlgError;
use crate::manifolds::{
    product_metric, product_retract, ManifoldError, ProductPoint, ProductTangent,
};
use std::collections::VecDeque;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
    #[error("cost function returned a non-finite value: {0}")]
    NonFiniteCost(f64),
    #[error("{0}")]
    Problem(String),
}

pub type Result<T> = std::result::Result<T, OptimizeError>;

/// A differentiable cost on a product of isometry manifolds. `evaluate`
/// returns the cost and its Riemannian gradient (the metric dual of the
/// differential). Implementations may cache warm-start data internally,
/// hence `&mut self`.
pub trait Problem {
    fn evaluate(&mut self, x: &ProductPoint) -> Result<(f64, ProductTangent)>;

    /// Optional positive-definite preconditioner applied to tangents at
    /// `x`. The default is none (identity).
    fn precondition(
        &mut self,
        _x: &ProductPoint,
        _g: &ProductTangent,
    ) -> Result<Option<ProductTangent>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Method {
    GradientDescent,
    ConjugateGradient,
    Lbfgs,
}

#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    pub method: Method,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub lbfgs_memory: usize,
    /// Force a steepest-descent restart every this many CG iterations;
    /// 0 disables periodic restarts.
    pub cg_restart_period: usize,
    pub verbosity: u8,
}

impl OptimizerOptions {
    pub fn new(method: Method) -> Self {
        OptimizerOptions {
            method,
            grad_tol: 1e-8,
            max_iters: 1000,
            lbfgs_memory: 8,
            cg_restart_period: 100,
            verbosity: 0,
        }
    }
}

/// One optimizer iteration for logging: cumulative function evaluations
/// and wall-clock seconds since the run started.
#[derive(Debug, Clone)]
pub struct IterateRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step_alpha: f64,
    pub fevals: usize,
    pub wall_seconds: f64,
    pub flag: Option<&'static str>,
}

#[derive(Debug)]
pub struct MinimizeResult {
    pub point: ProductPoint,
    pub cost: f64,
    pub grad_norm: f64,
    pub trace: Vec<IterateRecord>,
    pub converged: bool,
    /// Set when the run stopped on a line-search failure rather than on
    /// the gradient tolerance or the iteration cap.
    pub failure: Option<String>,
}

const ETA_HZ: f64 = 0.01;
const EPS_CURVATURE: f64 = 1e-12;

/// Hager–Zhang conjugate-gradient coefficient with the standard lower
/// bound, all inner products taken in the manifold metric.
///
/// With a preconditioner P (applied at the current point), the formula is
/// the preconditioned CG_DESCENT update
///
/// ```text
/// y    = g_new - g_old_t
/// beta = ( g(Py, g_new) - 2 g(y, Py) g(d, g_new) / g(d, y) ) / g(d, y)
/// beta = max(beta, -1 / (||d|| min(0.01, ||g_old||)))
/// ```
///
/// which reduces to the plain HZ coefficient for P = identity. Callers
/// pass `py = P(y)` (or `y` itself when unpreconditioned).
pub fn cg_beta(
    g_new: &ProductTangent,
    g_old_t: &ProductTangent,
    d_old_t: &ProductTangent,
    py: &ProductTangent,
    g_old_norm: f64,
) -> f64 {
    let mut y = g_new.clone();
    y.axpy(-1.0, g_old_t);
    let dy = product_metric(d_old_t, &y);
    let dnorm = d_old_t.norm();
    if !dy.is_finite() || dy.abs() < 1e-300 || dnorm == 0.0 {
        return 0.0;
    }
    let beta = (product_metric(py, g_new)
        - 2.0 * product_metric(&y, py) * product_metric(d_old_t, g_new) / dy)
        / dy;
    let eta_k = -1.0 / (dnorm * ETA_HZ.min(g_old_norm).max(1e-300));
    beta.max(eta_k)
}

/// Secant pair for L-BFGS, kept transported to the current iterate.
#[derive(Debug, Clone)]
pub struct SecantPair {
    pub s: ProductTangent,
    pub y: ProductTangent,
    /// Cached curvature g(s, y) > 0.
    pub sy: f64,
}

/// Two-loop recursion. History is ordered oldest to newest and must
/// already live in the current tangent space. The center is either the
/// preconditioner or the usual `g(s,y)/g(y,y)` scaling from the newest
/// pair (identity when the history is empty).
pub fn lbfgs_direction(
    g: &ProductTangent,
    history: &VecDeque<SecantPair>,
    mut precond: impl FnMut(&ProductTangent) -> Result<Option<ProductTangent>>,
) -> Result<ProductTangent> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let a = product_metric(&pair.s, &q) / pair.sy;
        q.axpy(-a, &pair.y);
        alphas.push(a);
    }
    let mut r = match precond(&q)? {
        Some(pq) => pq,
        None => {
            let gamma = history
                .back()
                .map(|p| p.sy / product_metric(&p.y, &p.y))
                .unwrap_or(1.0);
            q.scale(gamma)
        }
    };
    for (pair, &a) in history.iter().zip(alphas.iter().rev()) {
        let b = product_metric(&pair.y, &r) / pair.sy;
        r.axpy(a - b, &pair.s);
    }
    Ok(r.scale(-1.0))
}

enum MethodState {
    Gd,
    Cg {
        prev_grad: Option<ProductTangent>,
        prev_dir: Option<ProductTangent>,
        prev_grad_norm: f64,
        since_restart: usize,
    },
    Lbfgs {
        history: VecDeque<SecantPair>,
    },
}

struct EvalCache {
    alpha: f64,
    point: ProductPoint,
    dir_t: ProductTangent,
    transporter: crate::manifolds::ProductTransporter,
    cost: f64,
    grad: ProductTangent,
}

/// Minimizes `problem` from `x0`. Stops when the unpreconditioned
/// gradient norm falls below `options.grad_tol` or after
/// `options.max_iters` accepted iterations. On a line-search failure the
/// history is invalidated and the iteration retried once from steepest
/// descent; a second failure ends the run with the best iterate and a
/// failure flag.
pub fn minimize<P: Problem>(
    problem: &mut P,
    x0: ProductPoint,
    options: &OptimizerOptions,
    ls_params: &LineSearchParams,
) -> Result<MinimizeResult> {
    let start = Instant::now();
    let mut x = x0;
    let (mut cost, mut grad) = problem.evaluate(&x)?;
    if !cost.is_finite() {
        return Err(OptimizeError::NonFiniteCost(cost));
    }
    let mut fevals = 1usize;
    let mut trace = Vec::new();
    let mut state = match options.method {
        Method::GradientDescent => MethodState::Gd,
        Method::ConjugateGradient => MethodState::Cg {
            prev_grad: None,
            prev_dir: None,
            prev_grad_norm: 0.0,
            since_restart: 0,
        },
        Method::Lbfgs => MethodState::Lbfgs {
            history: VecDeque::new(),
        },
    };
    let mut grad_norm = grad.norm();
    trace.push(IterateRecord {
        iter: 0,
        cost,
        grad_norm,
        step_alpha: 0.0,
        fevals,
        wall_seconds: start.elapsed().as_secs_f64(),
        flag: None,
    });
    let mut converged = grad_norm <= options.grad_tol;
    let mut failure: Option<String> = None;
    let mut prev_alpha = ls_params.alpha_init;
    let mut prev_slope = 0.0f64;
    let mut iter = 0usize;

    while !converged && iter < options.max_iters {
        iter += 1;
        let mut flag: Option<&'static str> = None;

        // Preconditioned gradient with positivity guard.
        let mut pgrad = match problem.precondition(&x, &grad)? {
            Some(pg) => {
                if product_metric(&grad, &pg) <= 0.0 {
                    flag = Some("precond-fallback");
                    grad.clone()
                } else {
                    pg
                }
            }
            None => grad.clone(),
        };

        let mut attempt = 0usize;
        loop {
            attempt += 1;
            let force_steepest = attempt > 1;

            // Search direction.
            let mut dir = match (&mut state, force_steepest) {
                (_, true) => pgrad.scale(-1.0),
                (MethodState::Gd, _) => pgrad.scale(-1.0),
                (
                    MethodState::Cg {
                        prev_grad,
                        prev_dir,
                        prev_grad_norm,
                        since_restart,
                    },
                    _,
                ) => {
                    let periodic = options.cg_restart_period > 0
                        && *since_restart >= options.cg_restart_period;
                    match (prev_grad.as_ref(), prev_dir.as_ref()) {
                        (Some(pg_old), Some(d_old)) if !periodic => {
                            let mut y = grad.clone();
                            y.axpy(-1.0, pg_old);
                            let py = match problem.precondition(&x, &y)? {
                                Some(py) => py,
                                None => y.clone(),
                            };
                            let beta = cg_beta(&grad, pg_old, d_old, &py, *prev_grad_norm);
                            let mut d = pgrad.scale(-1.0);
                            d.axpy(beta, d_old);
                            d
                        }
                        _ => {
                            *since_restart = 0;
                            pgrad.scale(-1.0)
                        }
                    }
                }
                (MethodState::Lbfgs { history }, _) => {
                    lbfgs_direction(&grad, history, |t| problem.precondition(&x, t))?
                }
            };

            let mut slope0 = product_metric(&grad, &dir);
            if slope0 >= 0.0 {
                flag = Some("non-descent-reset");
                dir = pgrad.scale(-1.0);
                slope0 = product_metric(&grad, &dir);
                if slope0 >= 0.0 {
                    dir = grad.scale(-1.0);
                    slope0 = -grad_norm * grad_norm;
                    pgrad = grad.clone();
                }
                invalidate(&mut state);
            }

            // Initial trial step: unit for L-BFGS, slope-matched
            // extrapolation of the previous step otherwise.
            let alpha0 = match options.method {
                Method::Lbfgs => 1.0,
                _ => {
                    if trace.len() > 1 && prev_slope < 0.0 && slope0 < 0.0 {
                        (prev_alpha * prev_slope / slope0)
                            .clamp(0.1 * prev_alpha, 10.0 * prev_alpha)
                    } else {
                        ls_params.alpha_init
                    }
                }
            };

            let mut cache: Option<EvalCache> = None;
            let mut eval_error: Option<OptimizeError> = None;
            let mut ls_evals = 0usize;
            let result = {
                let phi = |alpha: f64| -> (f64, f64) {
                    ls_evals += 1;
                    match product_retract(&x, &dir, alpha) {
                        Ok((xn, dn, tr)) => match problem.evaluate(&xn) {
                            Ok((f, g)) => {
                                let slope = product_metric(&g, &dn);
                                cache = Some(EvalCache {
                                    alpha,
                                    point: xn,
                                    dir_t: dn,
                                    transporter: tr,
                                    cost: f,
                                    grad: g,
                                });
                                (f, slope)
                            }
                            Err(e) => {
                                eval_error = Some(e);
                                (f64::INFINITY, f64::INFINITY)
                            }
                        },
                        Err(e) => {
                            eval_error = Some(e.into());
                            (f64::INFINITY, f64::INFINITY)
                        }
                    }
                };
                let params = LineSearchParams {
                    alpha_init: alpha0,
                    ..ls_params.clone()
                };
                linesearch(phi, cost, slope0, &params)
            };
            fevals += ls_evals;

            match result {
                Ok(res) => {
                    let c = match cache {
                        Some(c) if c.alpha == res.alpha => c,
                        _ => {
                            // The accepted sample is normally the last
                            // evaluation; re-evaluate defensively if not.
                            let (xn, dn, tr) = product_retract(&x, &dir, res.alpha)?;
                            let (f, g) = problem.evaluate(&xn)?;
                            fevals += 1;
                            EvalCache {
                                alpha: res.alpha,
                                point: xn,
                                dir_t: dn,
                                transporter: tr,
                                cost: f,
                                grad: g,
                            }
                        }
                    };
                    debug_assert!(
                        c.cost <= cost + ls_params.c1 * c.alpha * slope0
                            || (c.cost - cost).abs()
                                <= ls_params.approx_wolfe_switch * cost.abs(),
                        "accepted step violates the decrease condition"
                    );
                    debug_assert!(
                        product_metric(&c.grad, &c.dir_t) >= ls_params.c2 * slope0,
                        "accepted step violates the curvature condition"
                    );

                    // Carry history to the new point.
                    match &mut state {
                        MethodState::Gd => {}
                        MethodState::Cg {
                            prev_grad,
                            prev_dir,
                            prev_grad_norm,
                            since_restart,
                        } => {
                            *prev_grad = Some(c.transporter.apply(&grad));
                            *prev_dir = Some(c.dir_t.clone());
                            *prev_grad_norm = grad_norm;
                            *since_restart += 1;
                        }
                        MethodState::Lbfgs { history } => {
                            for pair in history.iter_mut() {
                                pair.s = c.transporter.apply(&pair.s);
                                pair.y = c.transporter.apply(&pair.y);
                            }
                            let s = c.dir_t.scale(c.alpha);
                            let mut y = c.grad.clone();
                            y.axpy(-1.0, &c.transporter.apply(&grad));
                            let sy = product_metric(&s, &y);
                            if sy > EPS_CURVATURE * s.norm() * y.norm() {
                                history.push_back(SecantPair { s, y, sy });
                                while history.len() > options.lbfgs_memory.max(1) {
                                    history.pop_front();
                                }
                            }
                        }
                    }

                    x = c.point;
                    cost = c.cost;
                    grad = c.grad;
                    grad_norm = grad.norm();
                    prev_alpha = c.alpha;
                    prev_slope = slope0;
                    converged = grad_norm <= options.grad_tol;
                    trace.push(IterateRecord {
                        iter,
                        cost,
                        grad_norm,
                        step_alpha: c.alpha,
                        fevals,
                        wall_seconds: start.elapsed().as_secs_f64(),
                        flag,
                    });
                    if options.verbosity >= 1 {
                        eprintln!(
                            "iter {iter:5}  cost {cost:+.12e}  |g| {grad_norm:.3e}  alpha {:.3e}  fevals {fevals}",
                            c.alpha
                        );
                    }
                    break;
                }
                Err(ls_failure) => {
                    if let Some(e) = eval_error {
                        return Err(e);
                    }
                    invalidate(&mut state);
                    if attempt >= 2 {
                        failure = Some(format!(
                            "line search failed twice at iteration {iter}: {}",
                            ls_failure.error
                        ));
                        trace.push(IterateRecord {
                            iter,
                            cost,
                            grad_norm,
                            step_alpha: 0.0,
                            fevals,
                            wall_seconds: start.elapsed().as_secs_f64(),
                            flag: Some("ls-failure"),
                        });
                        break;
                    }
                    flag = Some("ls-retry");
                }
            }
        }
        if failure.is_some() {
            break;
        }
    }

    Ok(MinimizeResult {
        point: x,
        cost,
        grad_norm,
        trace,
        converged,
        failure,
    })
}

fn invalidate(state: &mut MethodState) {
    match state {
        MethodState::Gd => {}
        MethodState::Cg {
            prev_grad,
            prev_dir,
            since_restart,
            ..
        } => {
            *prev_grad = None;
            *prev_dir = None;
            *since_restart = 0;
        }
        MethodState::Lbfgs { history } => history.clear(),
    }
}

#[cfg(test)]
mod tests;
