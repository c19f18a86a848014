use num_complex::Complex64;
use quadri::increment::heilbronn_approx;
use quadri::restriction::{lp_moment, moment8_exact};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    // Heilbronn oracle: 100 seeded alphas, Q in {1e2, 1e3, 1e4}.
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let alphas: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
    for &q_max in &[100u64, 1000, 10000] {
        for &a in &alphas {
            let h = heilbronn_approx(a, q_max);
            let norm = h.value * (q_max as f64).powf(1.0 / 3.0);
            if norm > worst {
                worst = norm;
            }
        }
    }
    println!("heilbronn C_H oracle (seed 1212): {worst:.6}");

    // p = 7 scaling ratios over N in {16,24,32,48}, 5 seeds.
    let t0 = Instant::now();
    for seed in 0..5u64 {
        let mut ratios = Vec::new();
        for &n in &[16u64, 24, 32, 48] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n);
            let g: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0))
                .collect();
            let m = lp_moment(&g, n, 7.0, 1, 1).unwrap();
            ratios.push(m.value / (n as f64).powi(4));
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        println!(
            "seed {seed}: ratios {ratios:?} max/min = {:.3}",
            max / min
        );
    }
    println!("p7 scan took {:?}", t0.elapsed());

    // p = 8 oracle at N = 32 (criterion 7 second half) timing.
    let t0 = Instant::now();
    let n = 32u64;
    let g = vec![Complex64::new(1.0, 0.0); n as usize];
    let exact = moment8_exact(&g, n);
    let grid = lp_moment(&g, n, 8.0, 1, 1).unwrap();
    println!(
        "p8 N=32: exact {exact:.6e} grid {:.6e} rel {:.2e} ({:?})",
        grid.value,
        (grid.value - exact).abs() / exact,
        t0.elapsed()
    );
}
