use opinfer::kernel::SEKernelParams;
use opinfer::spectral::{spectral_pair, SpectralSide};
fn main() {
    let theta = SEKernelParams::new(1.0, vec![2.0]).unwrap();
    for i in 0..8 {
        let alpha = 0.5 + 0.25 * i as f64;
        let v = spectral_pair(SpectralSide::Both, alpha, &theta, 0.3, 0.3).unwrap();
        println!("alpha={alpha}: {v}");
    }
}
