use radialface::learn::train_linear_svm;
use radialface::mesh_io::Gender;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 119usize;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let off = if i % 2 == 0 { 0.02 } else { -0.02 };
            (0..4000).map(|_| off + rng.gen_range(-1.0..1.0)).collect()
        })
        .collect();
    let y: Vec<Gender> =
        (0..n).map(|i| if i % 2 == 0 { Gender::Female } else { Gender::Male }).collect();
    let t = std::time::Instant::now();
    let mut acc = 0.0;
    for xi in &x {
        for xj in &x {
            acc += xi.iter().zip(xj).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    println!("gram: {:?} (acc={acc:.1})", t.elapsed());
    let t = std::time::Instant::now();
    let m = train_linear_svm(&x, &y, 1.0, 7, 1e-3).unwrap();
    println!("train total: {:?} iters={}", t.elapsed(), m.training_meta.iterations);
}
