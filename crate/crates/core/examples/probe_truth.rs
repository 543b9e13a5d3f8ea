use opinfer::benchmarks::{generate, operator_for, BenchmarkSpec};
use opinfer::gp::{nlml, ModelParams};
use opinfer::kernel::SEKernelParams;
use opinfer::operator::OperatorParams;

fn main() {
    for seed in [1u64, 2, 3, 4, 5] {
        let spec = BenchmarkSpec::integro(false, seed);
        let data = generate(&spec).unwrap();
        let (expr, _) = operator_for(spec.name);
        // profile over theta at the true phi: crude grid search
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for lw in 0..40 {
            let w = (0.25f64.ln() + (200.0f64/0.25).ln() * lw as f64 / 39.0).exp();
            for ls in 0..30 {
                let s2 = (0.01f64.ln() + (100.0f64/0.01).ln() * ls as f64 / 29.0).exp();
                let p = ModelParams {
                    kernel: SEKernelParams::new(s2, vec![w]).unwrap(),
                    operator: OperatorParams::new().set("alpha", 2.0).set("beta", 5.0),
                    noise_u: 1e-10,
                    noise_f: 1e-10,
                };
                if let Ok(v) = nlml(&data, &expr, &p) {
                    if v < best.0 { best = (v, w, s2); }
                }
            }
        }
        println!("seed {seed}: best nlml at true phi = {:.4} (w={:.2}, s2={:.3})", best.0, best.1, best.2);
    }
}
