use opinfer::dataset::JointDataset;
use opinfer::operator::{AtomicTerm, Coefficient, OperatorExpr, Term};
use opinfer::train::{fit, TrainConfig};

fn main() {
    let points: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
    let data = JointDataset::new(points.clone(), vec![0.0; 6], points, vec![0.0; 6]).unwrap();
    let expr = OperatorExpr::new(
        vec![Term { coeff: Coefficient::slot("c"), atomic: AtomicTerm::Identity }],
        None,
    )
    .unwrap();
    let cfg = TrainConfig { seed: 5, restarts: 4, max_iters: 40, ..Default::default() };
    eprintln!("starting fit");
    let t0 = std::time::Instant::now();
    match fit(&data, &expr, &cfg) {
        Ok((_, report)) => eprintln!("done in {:.1?}: best={} iters={}", t0.elapsed(), report.best_nlml, report.iterations),
        Err(e) => eprintln!("fit error after {:.1?}: {e}", t0.elapsed()),
    }
}
