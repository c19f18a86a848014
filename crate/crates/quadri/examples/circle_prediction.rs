//! Circle-method prediction against the exact count.
//!
//! Computes the truncated singular series, the normalized singular integral
//! by both routes (seeded Monte Carlo and truncated-box quadrature), and
//! compares 𝔖·J·N⁴ with the exact DP count for the reference system.
//!
//! Run with `cargo run --release --example circle_prediction`.

use quadri::circle::{
    predict_z, singular_integral_mc, singular_integral_quadrature, singular_series,
};
use quadri::expsums::GaussCache;
use quadri::represent::count_solutions;
use quadri::systems::DiagonalSystem;

fn main() {
    let sys = DiagonalSystem::reference();
    let cache = GaussCache::default();

    let sing = singular_series(&sys, 64, &cache).unwrap();
    println!(
        "singular series  S(64) = {:.8}   tail proxy |S(64)-S(32)| = {:.3e}",
        sing.value, sing.tail_proxy
    );

    let mc = singular_integral_mc(&sys, 1 << 20, 42, 16.0);
    println!(
        "singular integral (monte carlo, 2^20 samples): J = {:.8} ± {:.2e}",
        mc.value, mc.error
    );
    let quad = singular_integral_quadrature(&sys, 12.0, 80.0);
    println!(
        "singular integral (quadrature, box 12x80):     J = {:.8} ± {:.2e}",
        quad.value, quad.error
    );

    for n in [16u64, 24, 32, 48] {
        let exact = count_solutions(&sys, n, None).unwrap();
        let p = predict_z(&sys, n, 64, 1 << 20, 42, false, &cache).unwrap();
        println!(
            "N = {n:3}: exact Z = {exact:10}  prediction = {:12.1}  rel err = {:+.3}",
            p.prediction,
            (p.prediction - exact as f64) / exact as f64
        );
    }
}
