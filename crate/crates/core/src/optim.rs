//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Two-loop recursion over a bounded history of curvature pairs, bracketing
//! line search per Nocedal & Wright (Algorithms 3.5/3.6, bisection zoom).
//! The objective may return `f64::INFINITY` to mark infeasible points; the
//! line search treats those as insufficient decrease and backs off.

use crate::error::{Error, Result};

pub(crate) struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Convergence threshold on the gradient infinity norm.
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
    /// Budget on objective evaluations (gradient calls count as 2n);
    /// guards against unbounded-descent objectives where every line search
    /// runs its full expansion.
    pub max_fevals: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 200,
            grad_tol: 1e-5,
            c1: 1e-4,
            c2: 0.9,
            max_fevals: 50_000,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, xi) in out.iter_mut().zip(x) {
        *o += a * xi;
    }
}

pub(crate) fn minimize<F, G>(
    mut raw_f: F,
    mut raw_grad: G,
    x0: &[f64],
    opts: &LbfgsOptions,
) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let mut f = |v: &[f64]| {
        evals.set(evals.get() + 1);
        raw_f(v)
    };
    let mut grad = |v: &[f64]| {
        evals.set(evals.get() + 2 * n);
        raw_grad(v)
    };

    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::Numerical(
            "objective is not finite at the initial point".into(),
        ));
    }
    let mut g = grad(&x)?;
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        if evals.get() >= opts.max_fevals {
            break;
        }
        if inf_norm(&g) < opts.grad_tol {
            return Ok(LbfgsOutcome {
                grad_inf_norm: inf_norm(&g),
                x,
                value: fx,
                iterations,
                converged: true,
            });
        }
        let mut dir = two_loop(&g, &history);
        for d in dir.iter_mut() {
            *d = -*d;
        }
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // Curvature information went stale; fall back to steepest descent.
            history.clear();
            dir = g.iter().map(|gi| -gi).collect();
            slope = dot(&g, &dir);
            if slope >= 0.0 {
                break;
            }
        }

        // Without curvature history the direction is raw steepest descent,
        // whose natural step is 1/|g| rather than 1.
        let first_step = if history.is_empty() {
            (1.0 / inf_norm(&dir).max(1e-300)).min(1.0)
        } else {
            1.0
        };
        let ls = match line_search(&mut f, &mut grad, &x, fx, &dir, slope, first_step, opts)? {
            Some(ls) => ls,
            None => break, // no acceptable step along this direction
        };

        let s: Vec<f64> = ls.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = ls.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-10 * inf_norm(&s).max(1e-300) * inf_norm(&yv).max(1e-300) {
            if history.len() == opts.memory {
                history.remove(0);
            }
            history.push((s, yv, 1.0 / sy));
        }
        x = ls.x;
        fx = ls.value;
        g = ls.g;
        iterations += 1;
    }

    Ok(LbfgsOutcome {
        grad_inf_norm: inf_norm(&g),
        converged: inf_norm(&g) < opts.grad_tol,
        x,
        value: fx,
        iterations,
    })
}

fn two_loop(g: &[f64], history: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut coeffs = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(&mut q, -a, y);
        coeffs.push(a);
    }
    if let Some((s, y, _)) = history.last() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(coeffs.iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(&mut q, a - b, s);
    }
    q
}

struct LineSearchPoint {
    x: Vec<f64>,
    value: f64,
    g: Vec<f64>,
}

/// Strong Wolfe line search; returns `None` when no acceptable step exists
/// along the direction (e.g. the bracket collapses).
#[allow(clippy::too_many_arguments)]
fn line_search<F, G>(
    f: &mut F,
    grad: &mut G,
    x: &[f64],
    f0: f64,
    dir: &[f64],
    slope0: f64,
    first_step: f64,
    opts: &LbfgsOptions,
) -> Result<Option<LineSearchPoint>>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    const MAX_EXPAND: usize = 20;
    const MAX_ZOOM: usize = 25;
    let probe = |a: f64| -> Vec<f64> {
        let mut p = x.to_vec();
        axpy(&mut p, a, dir);
        p
    };

    let mut a_prev = 0.0;
    let mut f_prev = f0;
    let mut a = first_step;
    let mut bracket: Option<(f64, f64, f64)> = None; // (lo, f_lo, hi)

    for i in 0..MAX_EXPAND {
        let xp = probe(a);
        let fa = f(&xp);
        if !fa.is_finite() || fa > f0 + opts.c1 * a * slope0 || (i > 0 && fa >= f_prev) {
            bracket = Some((a_prev, f_prev, a));
            break;
        }
        let ga = grad(&xp)?;
        let slope_a = dot(&ga, dir);
        if slope_a.abs() <= -opts.c2 * slope0 {
            return Ok(Some(LineSearchPoint {
                x: xp,
                value: fa,
                g: ga,
            }));
        }
        if slope_a >= 0.0 {
            bracket = Some((a, fa, a_prev));
            break;
        }
        a_prev = a;
        f_prev = fa;
        a *= 2.0;
    }

    let (mut lo, mut f_lo, mut hi) = match bracket {
        Some(b) => b,
        None => return Ok(None), // never bracketed within the expansion budget
    };

    for _ in 0..MAX_ZOOM {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() < 1e-14 * lo.abs().max(1.0) {
            break;
        }
        let xp = probe(mid);
        let fm = f(&xp);
        if !fm.is_finite() || fm > f0 + opts.c1 * mid * slope0 || fm >= f_lo {
            hi = mid;
            continue;
        }
        let gm = grad(&xp)?;
        let slope_m = dot(&gm, dir);
        if slope_m.abs() <= -opts.c2 * slope0 {
            return Ok(Some(LineSearchPoint {
                x: xp,
                value: fm,
                g: gm,
            }));
        }
        if slope_m * (hi - lo) >= 0.0 {
            hi = lo;
        }
        lo = mid;
        f_lo = fm;
    }

    // Wolfe failed to close; accept a plain decrease at `lo` if we found one
    // so the outer loop can still make progress.
    if lo > 0.0 && f_lo < f0 {
        let xp = probe(lo);
        let g = grad(&xp)?;
        return Ok(Some(LineSearchPoint {
            x: xp,
            value: f_lo,
            g,
        }));
    }
    Ok(None)
}
