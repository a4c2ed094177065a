//! Wolfe line search in the style of Hager and Zhang: bracketing plus
//! interpolation against the weak Wolfe conditions, with a switch to the
//! approximate (slope-only) conditions once the objective change drops
//! into the rounding-noise regime.

use crate::linalg::LinAlgError;

/// Line-search parameters. The defaults follow common Hager–Zhang usage:
/// `c1 = 1e-4`, `c2 = 0.9` (0.1 for conjugate gradient), and an
/// approximate-Wolfe switch at a relative objective change of `1e-12`.
#[derive(Debug, Clone)]
pub struct LineSearchParams {
    pub c1: f64,
    pub c2: f64,
    pub alpha_init: f64,
    pub max_evals: usize,
    /// Relative-decrease threshold below which the value comparison is
    /// considered noise and the slope-only conditions take over.
    pub approx_wolfe_switch: f64,
}

impl LineSearchParams {
    pub fn new(c1: f64, c2: f64, alpha_init: f64, max_evals: usize) -> Self {
        assert!(
            0.0 < c1 && c1 < c2 && c2 < 1.0,
            "Wolfe constants need 0 < c1 < c2 < 1"
        );
        assert!(alpha_init > 0.0);
        LineSearchParams {
            c1,
            c2,
            alpha_init,
            max_evals,
            approx_wolfe_switch: 1e-12,
        }
    }

    pub fn default_gd() -> Self {
        Self::new(1e-4, 0.9, 1.0, 30)
    }

    pub fn default_cg() -> Self {
        Self::new(1e-4, 0.1, 1.0, 30)
    }

    pub fn default_lbfgs() -> Self {
        Self::new(1e-4, 0.9, 1.0, 30)
    }
}

/// Accepted step: position on the ray, value, slope, and the number of
/// `phi` evaluations spent.
#[derive(Debug, Clone, Copy)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub value: f64,
    pub slope: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    alpha: f64,
    value: f64,
    slope: f64,
}

/// Searches along `phi: alpha -> (value, slope)` for a point satisfying
/// the Wolfe conditions
///
/// ```text
/// value(a) <= value(0) + c1 a slope(0)      (sufficient decrease)
/// slope(a) >= c2 slope(0)                   (curvature)
/// ```
///
/// or, once `|value(a) - value(0)| <= eps |value(0)|` makes the first
/// comparison meaningless, the approximate variant
/// `(2 c1 - 1) slope(0) >= slope(a) >= c2 slope(0)`.
///
/// `phi(0)` must have a strictly negative slope. On failure the error
/// carries the best step found so far.
pub fn linesearch<F>(
    mut phi: F,
    phi0: f64,
    slope0: f64,
    params: &LineSearchParams,
) -> Result<LineSearchResult, LineSearchFailure>
where
    F: FnMut(f64) -> (f64, f64),
{
    if !(slope0 < 0.0) {
        return Err(LineSearchFailure {
            error: LinAlgError::NotDescent(slope0),
            best: None,
        });
    }
    let eps_flat = params.approx_wolfe_switch * phi0.abs();
    let armijo = |s: &Sample| s.value <= phi0 + params.c1 * s.alpha * slope0;
    let flat = |s: &Sample| (s.value - phi0).abs() <= eps_flat;
    let accepts = |s: &Sample| {
        let curvature = s.slope >= params.c2 * slope0;
        let exact = armijo(s) && curvature;
        let approx = flat(s) && curvature && s.slope <= (2.0 * params.c1 - 1.0) * slope0;
        exact || approx
    };

    let mut evals = 0usize;
    let mut best: Option<Sample> = None;
    let mut eval = |alpha: f64, evals: &mut usize, best: &mut Option<Sample>| -> Sample {
        let (value, slope) = phi(alpha);
        *evals += 1;
        let s = Sample {
            alpha,
            value,
            slope,
        };
        if best.map_or(true, |b| value < b.value) {
            *best = Some(s);
        }
        s
    };

    // Bracketing phase: extend until the Armijo bound is violated, the
    // value stops decreasing, or the slope turns around.
    let mut lo = Sample {
        alpha: 0.0,
        value: phi0,
        slope: slope0,
    };
    let mut hi: Option<Sample> = None;
    let mut alpha = params.alpha_init;
    const GROW: f64 = 5.0;
    while evals < params.max_evals {
        let s = eval(alpha, &mut evals, &mut best);
        if accepts(&s) {
            return Ok(LineSearchResult {
                alpha: s.alpha,
                value: s.value,
                slope: s.slope,
                evals,
            });
        }
        if !s.value.is_finite() || !armijo(&s) || (s.value >= lo.value && !flat(&s)) {
            hi = Some(s);
            break;
        }
        if s.slope >= 0.0 {
            // Armijo holds and the slope is non-negative: the weak
            // curvature condition would have accepted; reaching here
            // means numerics put us past the flat minimum.
            hi = Some(s);
            break;
        }
        lo = s;
        alpha *= GROW;
    }

    // Zoom phase: shrink [lo, hi] keeping the invariant that lo satisfies
    // the decrease condition with negative slope.
    if let Some(mut hi) = hi {
        while evals < params.max_evals {
            // Secant step on the slopes, safeguarded by bisection.
            let denom = hi.slope - lo.slope;
            let mut mid = if denom.abs() > 1e-300 {
                lo.alpha - lo.slope * (hi.alpha - lo.alpha) / denom
            } else {
                0.5 * (lo.alpha + hi.alpha)
            };
            let (a, b) = if lo.alpha < hi.alpha {
                (lo.alpha, hi.alpha)
            } else {
                (hi.alpha, lo.alpha)
            };
            let span = b - a;
            if !(mid > a + 0.1 * span && mid < b - 0.1 * span) {
                mid = 0.5 * (a + b);
            }
            if span <= 1e-16 * (1.0 + a.abs()) {
                break;
            }
            let s = eval(mid, &mut evals, &mut best);
            if accepts(&s) {
                return Ok(LineSearchResult {
                    alpha: s.alpha,
                    value: s.value,
                    slope: s.slope,
                    evals,
                });
            }
            if !s.value.is_finite() || !armijo(&s) || (s.value >= lo.value && !flat(&s)) {
                hi = s;
            } else if s.slope < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
        }
    }

    Err(LineSearchFailure {
        error: LinAlgError::NoConvergence {
            method: "linesearch",
            residual: best.map_or(f64::INFINITY, |b| b.value - phi0),
            iterations: evals,
        },
        best: best.map(|b| LineSearchResult {
            alpha: b.alpha,
            value: b.value,
            slope: b.slope,
            evals,
        }),
    })
}

/// Line-search failure carrying the best point seen, so callers can fall
/// back to it.
#[derive(Debug)]
pub struct LineSearchFailure {
    pub error: LinAlgError,
    pub best: Option<LineSearchResult>,
}
