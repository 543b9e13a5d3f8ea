use opinfer::dsl::parse_ast;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let dims = vec!["t".to_string(), "x".to_string()];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let idents = ["a", "b", "c", "al", "be"];
    let mut ok = 0;
    let mut total = 0;
    for _ in 0..2000 {
        let n = rng.random_range(1..6);
        let mut text = String::new();
        for i in 0..n {
            if i > 0 {
                text.push_str(if rng.random_bool(0.5) { " - " } else { " + " });
            }
            match rng.random_range(0..3) {
                0 => {}
                1 => text.push_str(&format!("{}*", rng.random_range(0.001..100.0))),
                _ => text.push_str(&format!("{}*", idents[rng.random_range(0..5)])),
            }
            match rng.random_range(0..5) {
                0 => text.push('u'),
                1 => text.push_str(&format!("d/d{}", ["t", "x"][rng.random_range(0..2)])),
                2 => text.push_str(&format!("d2/d{}2", ["t", "x"][rng.random_range(0..2)])),
                3 => text.push_str(&format!("int[{}]", ["t", "x"][rng.random_range(0..2)])),
                _ => text.push_str(&format!("frac[x,o{}]", idents[rng.random_range(0..5)])),
            }
        }
        total += 1;
        if parse_ast(&text, &dims).is_ok() {
            ok += 1;
        }
    }
    println!("{ok}/{total} parse cleanly");
}
