//! Closed-form kernel factors against finite-difference and quadrature
//! oracles on randomized inputs.

mod common;

use common::{fd_deriv, quad, quad2, rel_err, rng};
use opinfer::kernel::{
    se_antideriv, se_double_antideriv, se_eval, se_partial, IntegralSide, SEKernelParams,
};
use rand::Rng;

fn random_theta(rng: &mut rand_chacha::ChaCha8Rng, d: usize) -> SEKernelParams {
    let variance = rng.random_range(0.5..2.0);
    let weights = (0..d).map(|_| rng.random_range(0.5..5.0)).collect();
    SEKernelParams::new(variance, weights).unwrap()
}

#[test]
fn se_partial_matches_finite_differences() {
    let mut rng = rng(601);
    for case in 0..100 {
        let d = 1 + case % 2;
        let theta = random_theta(&mut rng, d);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Keep the pair within two length scales so the relative comparison
        // is not dominated by the Gaussian tail.
        let x2: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(dim, v)| v + rng.random_range(-2.0..2.0) / theta.weights()[dim].sqrt())
            .collect();
        // Total order capped at 4: beyond that, nested f64 stencils hit
        // their roundoff floor above the 1e-6 target.
        let (orders_left, orders_right) = loop {
            let ol: Vec<u32> = (0..d).map(|_| rng.random_range(0..3)).collect();
            let or: Vec<u32> = (0..d).map(|_| rng.random_range(0..3)).collect();
            let total: u32 = ol.iter().chain(&or).sum();
            if total <= 4 {
                break (ol, or);
            }
        };

        let got = se_partial(&theta, &x, &x2, &orders_left, &orders_right).unwrap();

        // Tensor-product FD stencil with per-length-scale steps, Richardson-
        // extrapolated over a global step factor to tame high-order
        // truncation.
        let stencil = |scale: f64| -> f64 {
            let base_theta = theta.clone();
            let mut numeric_fn: Box<dyn Fn(&[f64], &[f64]) -> f64> =
                Box::new(move |a: &[f64], b: &[f64]| se_eval(&base_theta, a, b).unwrap());
            for dim in 0..d {
                let h = scale * 0.03 / theta.weights()[dim].sqrt();
                let (ol, or) = (orders_left[dim], orders_right[dim]);
                let prev = numeric_fn;
                numeric_fn = Box::new(move |a: &[f64], b: &[f64]| {
                    let inner = |s: f64| {
                        let mut bb = b.to_vec();
                        bb[dim] = s;
                        let aa = a.to_vec();
                        let right_applied = |t: f64| {
                            let mut aaa = aa.clone();
                            aaa[dim] = t;
                            prev(&aaa, &bb)
                        };
                        fd_deriv(&right_applied, a[dim], ol, h)
                    };
                    fd_deriv(&inner, b[dim], or, h)
                });
            }
            numeric_fn(&x, &x2)
        };
        let want = (16.0 * stencil(0.5) - stencil(1.0)) / 15.0;
        assert!(
            rel_err(got, want) < 1e-6 || (got - want).abs() < 1e-9,
            "case {case}: orders ({orders_left:?},{orders_right:?}), got {got}, fd {want}"
        );
    }
}

#[test]
fn se_antideriv_matches_quadrature() {
    let mut rng = rng(602);
    for case in 0..100 {
        let d = 1 + case % 2;
        let theta = random_theta(&mut rng, d);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.5)).collect();
        let x2: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.5)).collect();
        let dim = case % d;
        for side in [IntegralSide::Left, IntegralSide::Right] {
            let got = se_antideriv(&theta, dim, &x, &x2, side).unwrap();
            let theta2 = theta.clone();
            let (x_c, x2_c) = (x.clone(), x2.clone());
            let integrand = move |t: f64| {
                let mut a = x_c.clone();
                let mut b = x2_c.clone();
                match side {
                    IntegralSide::Left => a[dim] = t,
                    IntegralSide::Right => b[dim] = t,
                }
                se_eval(&theta2, &a, &b).unwrap()
            };
            let upper = match side {
                IntegralSide::Left => x[dim],
                IntegralSide::Right => x2[dim],
            };
            let want = quad(&integrand, 0.0, upper, 1e-12);
            assert!(
                (got - want).abs() < 1e-8,
                "case {case} side {side:?}: got {got}, quadrature {want}"
            );
        }
    }
}

#[test]
fn se_double_antideriv_matches_tensor_quadrature() {
    let mut rng = rng(603);
    for case in 0..100 {
        let d = 1 + case % 2;
        let theta = random_theta(&mut rng, d);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.5)).collect();
        let x2: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.5)).collect();
        let dim = case % d;
        let got = se_double_antideriv(&theta, dim, &x, &x2).unwrap();
        let theta2 = theta.clone();
        let (x_c, x2_c) = (x.clone(), x2.clone());
        let integrand = move |s: f64, t: f64| {
            let mut a = x_c.clone();
            let mut b = x2_c.clone();
            a[dim] = s;
            b[dim] = t;
            se_eval(&theta2, &a, &b).unwrap()
        };
        let want = quad2(&integrand, x[dim], x2[dim], 1e-10);
        assert!(
            (got - want).abs() < 1e-7,
            "case {case}: got {got}, quadrature {want}"
        );
    }
    // the documented 1-D reference value
    let theta = SEKernelParams::new(1.0, vec![1.0]).unwrap();
    let got = se_double_antideriv(&theta, 0, &[1.0], &[1.0]).unwrap();
    let want = quad2(
        &|s, t| se_eval(&theta, &[s], &[t]).unwrap(),
        1.0,
        1.0,
        1e-10,
    );
    assert!((got - want).abs() < 1e-7);
}

#[test]
fn se_eval_symmetry_on_random_inputs() {
    let mut rng = rng(604);
    for _ in 0..100 {
        let d = 1 + rng.random_range(0..3);
        let theta = random_theta(&mut rng, d);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x2: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = se_eval(&theta, &x, &x2).unwrap();
        let b = se_eval(&theta, &x2, &x).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0 && a <= theta.variance());
    }
}

#[test]
fn se_partial_swap_identities_on_random_inputs() {
    let mut rng = rng(605);
    for _ in 0..100 {
        let theta = random_theta(&mut rng, 1);
        let x = rng.random_range(-1.0..1.0);
        let x2 = rng.random_range(-1.0..1.0);
        let m = rng.random_range(0..3u32);
        let n = rng.random_range(0..3u32);
        let p_mn = se_partial(&theta, &[x], &[x2], &[m], &[n]).unwrap();
        let p_nm_swapped = se_partial(&theta, &[x2], &[x], &[n], &[m]).unwrap();
        let p_nm = se_partial(&theta, &[x], &[x2], &[n], &[m]).unwrap();
        let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
        let scale = p_mn.abs().max(1e-3);
        assert!(
            (p_mn - p_nm_swapped).abs() <= 1e-10 * scale,
            "covariance symmetry failed for ({m},{n})"
        );
        assert!(
            (p_mn - sign * p_nm).abs() <= 1e-10 * scale,
            "stationarity sign rule failed for ({m},{n})"
        );
    }
}

#[test]
fn mixed_second_derivative_at_coincident_points_is_exact() {
    let mut rng = rng(606);
    for _ in 0..20 {
        let d = 1 + rng.random_range(0..2);
        let theta = random_theta(&mut rng, d);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for dim in 0..d {
            let mut ol = vec![0u32; d];
            let mut or = vec![0u32; d];
            ol[dim] = 1;
            or[dim] = 1;
            let got = se_partial(&theta, &x, &x, &ol, &or).unwrap();
            let want = theta.variance() * theta.weights()[dim];
            assert!(
                (got - want).abs() <= 1e-14 * want,
                "sigma^2 w_d mismatch: {got} vs {want}"
            );
        }
    }
}
