use opinfer::benchmarks::{generate, operator_for, BenchmarkSpec};
use opinfer::train::{fit, NoiseMode, TrainConfig};

fn main() {
    for mode in ["fixed10", "trained", "fixed8"] {
        let mut errs: Vec<(f64, f64)> = vec![];
        for seed in 1u64..=8 {
            let spec = BenchmarkSpec::integro(false, seed);
            let data = generate(&spec).unwrap();
            let (expr, _) = operator_for(spec.name);
            let mut cfg = TrainConfig { seed, ..Default::default() };
            match mode {
                "fixed10" => { cfg.noise_u = NoiseMode::Fixed(1e-10); cfg.noise_f = NoiseMode::Fixed(1e-10); }
                "fixed8" => { cfg.noise_u = NoiseMode::Fixed(1e-8); cfg.noise_f = NoiseMode::Fixed(1e-8); }
                _ => {}
            }
            let (model, report) = fit(&data, &expr, &cfg).unwrap();
            let p = model.params();
            let a = p.operator.get("alpha").unwrap();
            let b = p.operator.get("beta").unwrap();
            errs.push(((a - 2.0).abs(), (b - 5.0).abs()));
            println!(
                "{mode} seed {seed}: alpha={a:.3} beta={b:.3} s2={:.3} w={:.2} nlml={:.3} iters={}",
                p.kernel.variance(), p.kernel.weights()[0], report.best_nlml, report.iterations
            );
        }
        let med = |mut v: Vec<f64>| { v.sort_by(|a, b| a.partial_cmp(b).unwrap()); v[v.len() / 2] };
        println!(
            "{mode}: median d_alpha={:.3} d_beta={:.3}\n",
            med(errs.iter().map(|e| e.0).collect()),
            med(errs.iter().map(|e| e.1).collect())
        );
    }
}
