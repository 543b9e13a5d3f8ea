use opinfer::gapgene::{fit_gene, synth_records, Gene, GeneTable};
use opinfer::train::TrainConfig;
use std::time::Instant;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let n: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(60);
    let restarts: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(5);
    let table = GeneTable::default();
    let t0 = Instant::now();
    let records = synth_records(Gene::Kni, 0.10, 0.40, &table, n, seed).unwrap();
    let umax = records.iter().filter(|r| r.gene == opinfer::gapgene::Regulator::Kni).map(|r| r.value).fold(0.0f64, f64::max);
    println!("synth {} records in {:.2?}, max Kni value {:.1}", records.len(), t0.elapsed(), umax);
    let cfg = TrainConfig { seed, restarts, max_iters: 120, ..Default::default() };
    let t0 = Instant::now();
    match fit_gene(&records, Gene::Kni, &table, &cfg) {
        Ok(fit) => println!(
            "seed={seed} n={n}: lambda={:.4} (err {:.1}%) D={:.4} (err {:.1}%) nlml={:.2} iters={} in {:.2?}",
            fit.lambda, 100.0 * (fit.lambda - 0.10).abs() / 0.10,
            fit.diffusion, 100.0 * (fit.diffusion - 0.40).abs() / 0.40,
            fit.report.best_nlml, fit.report.iterations, t0.elapsed()
        ),
        Err(e) => println!("seed={seed}: FAILED {e}"),
    }
}
