use opinfer::gapgene::{fit_gene, synth_records, Gene, GeneTable};
use opinfer::train::TrainConfig;

fn rel(a: f64, b: f64) -> f64 { (a - b).abs() / b }

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "counts".into());
    let table = GeneTable::default();
    if mode == "counts" {
        for n in [20usize, 80] {
            let mut errs = vec![];
            for seed in 1u64..=5 {
                let records = synth_records(Gene::Kni, 0.10, 0.40, &table, n, seed).unwrap();
                let cfg = TrainConfig { seed, restarts: 4, max_iters: 100, ..Default::default() };
                match fit_gene(&records, Gene::Kni, &table, &cfg) {
                    Ok(f) => errs.push(0.5 * (rel(f.lambda, 0.10) + rel(f.diffusion, 0.40))),
                    Err(e) => println!("n={n} seed={seed} FAILED {e}"),
                }
            }
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            println!("n={n}: errors {:?} mean {:.3}", errs.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>(), mean);
        }
    } else {
        // smallest tested diffusion
        for seed in 1u64..=5 {
            let records = synth_records(Gene::Kr, 0.10, 0.05, &table, 60, seed).unwrap();
            let cfg = TrainConfig { seed, restarts: 5, max_iters: 120, ..Default::default() };
            match fit_gene(&records, Gene::Kr, &table, &cfg) {
                Ok(f) => println!(
                    "seed={seed}: lambda={:.4} ({:.1}%) D={:.4} ({:.1}%)",
                    f.lambda, 100.0 * rel(f.lambda, 0.10), f.diffusion, 100.0 * rel(f.diffusion, 0.05)
                ),
                Err(e) => println!("seed={seed} FAILED {e}"),
            }
        }
    }
}
