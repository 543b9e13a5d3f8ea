use opinfer::benchmarks::{operator_for, BenchmarkName};
use opinfer::kernel::{se_eval, SEKernelParams};
use opinfer::operator::{kernel_ff, kernel_uf, OperatorParams};

// numeric d/dx via 5-point stencil
fn d1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}
// Simpson quadrature 0..b
fn quad(f: &dyn Fn(f64) -> f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = b / n as f64;
    let mut s = f(0.0) + f(b);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn main() {
    let theta = SEKernelParams::new(1.0, vec![1.0]).unwrap();
    let (expr, _) = operator_for(BenchmarkName::Integro);
    let phi = OperatorParams::new().set("alpha", 2.0).set("beta", 5.0);
    let (a, b) = (2.0, 5.0);

    let k = |x: f64, x2: f64| se_eval(&theta, &[x], &[x2]).unwrap();
    // operator applied to second argument
    let op_right = move |x: f64, x2: f64| -> f64 {
        d1(&|t| k(x, t), x2, 1e-3) + a * k(x, x2) + b * quad(&|t| k(x, t), x2, 400)
    };
    // operator applied to first argument of op_right
    let op_both = |x: f64, x2: f64| -> f64 {
        d1(&{ let f = op_right; move |s| f(s, x2) }, x, 1e-3)
            + a * op_right(x, x2)
            + b * quad(&{ let f = op_right; move |s| f(s, x2) }, x, 400)
    };

    for (x, x2) in [(0.2, 0.6), (0.7, 0.3), (0.5, 0.5), (0.9, 0.1)] {
        let uf = kernel_uf(&expr, &phi, &theta, &[x], &[x2]).unwrap();
        let uf_num = op_right(x, x2);
        let ff = kernel_ff(&expr, &phi, &theta, &[x], &[x2]).unwrap();
        let ff_num = op_both(x, x2);
        println!(
            "({x},{x2}): uf={uf:.8} num={uf_num:.8} rel={:.2e} | ff={ff:.8} num={ff_num:.8} rel={:.2e}",
            ((uf - uf_num) / uf_num).abs(),
            ((ff - ff_num) / ff_num).abs()
        );
    }
}
