use opinfer::benchmarks::{generate, operator_for, BenchmarkSpec};
use opinfer::gp::{nlml_breakdown, ModelParams};
use opinfer::kernel::SEKernelParams;
use opinfer::operator::OperatorParams;
use opinfer::train::{fd_gradient, ParamLayout, TrainConfig, NoiseMode};

fn main() {
    let spec = BenchmarkSpec::integro(false, 1);
    let data = generate(&spec).unwrap();
    println!("x_u={:?}", data.x_u());
    println!("y_u={:?}", data.y_u());
    println!("x_f={:?}", data.x_f());
    println!("y_f={:?}", data.y_f());
    let (expr, _) = operator_for(spec.name);

    // NLML at the true parameters with a sensible length scale
    for w in [10.0, 30.0, 60.0, 100.0] {
        for noise in [1e-10f64, 1e-8] {
            let params = ModelParams {
                kernel: SEKernelParams::new(1.0, vec![w]).unwrap(),
                operator: OperatorParams::new().set("alpha", 2.0).set("beta", 5.0),
                noise_u: noise,
                noise_f: noise,
            };
            match nlml_breakdown(&data, &expr, &params) {
                Ok(b) => println!("w={w} noise={noise:.0e}: nlml={:.4} jitter={:.3e}", b.value, b.jitter),
                Err(e) => println!("w={w} noise={noise:.0e}: ERR {e}"),
            }
        }
    }
    // gradient at a reasonable point
    let cfg = TrainConfig { noise_u: NoiseMode::Fixed(1e-10), noise_f: NoiseMode::Fixed(1e-10), ..Default::default() };
    let layout = ParamLayout::new(&expr, 1, &cfg).unwrap();
    let params = ModelParams {
        kernel: SEKernelParams::new(1.0, vec![30.0]).unwrap(),
        operator: OperatorParams::new().set("alpha", 1.0).set("beta", 3.0),
        noise_u: 1e-10,
        noise_f: 1e-10,
    };
    let v = layout.pack(&params).unwrap();
    let mut obj = |vv: &[f64]| layout.unpack(vv).and_then(|p| opinfer::gp::nlml(&data, &expr, &p));
    println!("nlml at probe: {:?}", obj(&v));
    match fd_gradient(&mut obj, &v, 1e-6) {
        Ok(g) => println!("grad = {g:?}"),
        Err(e) => println!("grad ERR: {e}"),
    }
    for h in [1e-7, 1e-6, 1e-5, 1e-4] {
        let g = fd_gradient(&mut obj, &v, h);
        println!("h={h:.0e}: {:?}", g.map(|g| g.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>()));
    }
}
