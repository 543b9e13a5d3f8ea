use opinfer::benchmarks::{run_benchmark, BenchmarkSpec};
use opinfer::train::TrainConfig;
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "integro".into());
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = TrainConfig { seed, ..Default::default() };
    let spec = match which.as_str() {
        "integro" => BenchmarkSpec::integro(false, seed),
        "noisy" => BenchmarkSpec::integro(true, seed),
        "heat" => BenchmarkSpec::heat(seed),
        "fractional" => BenchmarkSpec::fractional(seed),
        _ => panic!(),
    };
    let t0 = Instant::now();
    match run_benchmark(&spec, &cfg) {
        Ok(run) => println!(
            "{which} seed={seed}: learned={:?} nlml={:.4} rel_l2_u={:.3e} rel_l2_f={:.3e} iters={} in {:.2?}",
            run.report.learned, run.report.nlml, run.report.rel_l2_u, run.report.rel_l2_f,
            run.fit.iterations, t0.elapsed()
        ),
        Err(e) => println!("{which} seed={seed}: FAILED {e}"),
    }
}
