//! Shared numerical oracles: finite differences, quadrature, and numeric
//! application of operators to bivariate kernels. Everything here is kept
//! independent of the closed-form kernel code it is used to check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

/// Fourth-order central difference for first and second derivatives.
pub fn fd_deriv(f: &dyn Fn(f64) -> f64, x: f64, order: u32, h: f64) -> f64 {
    match order {
        0 => f(x),
        1 => (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h),
        2 => {
            (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h)
                - f(x + 2.0 * h))
                / (12.0 * h * h)
        }
        other => panic!("fd_deriv supports orders 0..=2, got {other}"),
    }
}

/// Composite Simpson rule with interval doubling until the result moves by
/// less than `tol`.
pub fn quad(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let simpson = |n: usize| -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let mut n = 64;
    let mut prev = simpson(n);
    for _ in 0..12 {
        n *= 2;
        let next = simpson(n);
        if (next - prev).abs() <= tol {
            return next;
        }
        prev = next;
    }
    prev
}

/// Tensor-product Simpson quadrature over `[0,a] x [0,b]`.
pub fn quad2(f: &dyn Fn(f64, f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    quad(&|x| quad(&|y| f(x, y), 0.0, b, tol * 0.1), 0.0, a, tol)
}

/// One atomic operator term for the numeric oracle, acting on one argument
/// of a multivariate function.
#[derive(Clone, Copy, Debug)]
pub enum NumAtomic {
    Identity,
    /// `order`-th partial derivative in dimension `dim`.
    Deriv { dim: usize, order: u32 },
    /// Integral from 0 to the current coordinate in dimension `dim`.
    Integral { dim: usize },
}

/// Applies `sum_j c_j A_j` numerically to `f` at the point `x`.
pub fn apply_operator(
    terms: &[(f64, NumAtomic)],
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
) -> f64 {
    let mut acc = 0.0;
    for (c, atomic) in terms {
        let value = match atomic {
            NumAtomic::Identity => f(x),
            NumAtomic::Deriv { dim, order } => {
                let dim = *dim;
                let slice = |t: f64| {
                    let mut p = x.to_vec();
                    p[dim] = t;
                    f(&p)
                };
                // Large enough that nesting two second-order stencils stays
                // above the f64 cancellation floor.
                fd_deriv(&slice, x[dim], *order, 0.02)
            }
            NumAtomic::Integral { dim } => {
                let dim = *dim;
                let slice = |t: f64| {
                    let mut p = x.to_vec();
                    p[dim] = t;
                    f(&p)
                };
                quad(&slice, 0.0, x[dim], 1e-12)
            }
        };
        acc += c * value;
    }
    acc
}

/// `(L_{x'} k)(x, x')`: the operator applied numerically to the second
/// argument of a bivariate kernel.
pub fn operator_right(
    terms: &[(f64, NumAtomic)],
    kernel: &dyn Fn(&[f64], &[f64]) -> f64,
    x: &[f64],
    x2: &[f64],
) -> f64 {
    apply_operator(terms, &|p| kernel(x, p), x2)
}

/// `(L_x L_{x'} k)(x, x')`: the operator applied numerically to both
/// arguments in succession.
pub fn operator_both(
    terms: &[(f64, NumAtomic)],
    kernel: &dyn Fn(&[f64], &[f64]) -> f64,
    x: &[f64],
    x2: &[f64],
) -> f64 {
    apply_operator(terms, &|p| operator_right(terms, kernel, p, x2), x)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-12)
}

/// Uniform point in `[lo, hi]^d`.
pub fn uniform_point(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(lo..hi)).collect()
}
