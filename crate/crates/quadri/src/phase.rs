//! Exact phase arithmetic modulo one.
//!
//! Quadratic phases like `α·n²` reach 10¹² for the window sizes used here, so
//! reducing them modulo 1 in plain `f64` arithmetic destroys the fractional
//! part. Every routine in this crate therefore reduces `α·k` through the
//! exact dyadic representation of the `f64` value `α = m·2^e`: the product
//! `m·k` fits in 128 bits and the reduction is exact integer arithmetic.

use num_complex::Complex64;
use std::f64::consts::TAU;

/// Decompose a finite `f64` into `(sign, mantissa, exponent)` with
/// `x = sign · mantissa · 2^exponent` exactly.
fn decompose(x: f64) -> (i8, u64, i32) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac_bits = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 {
        // subnormal
        (sign, frac_bits, -1074)
    } else {
        (sign, frac_bits | (1u64 << 52), exp_bits - 1075)
    }
}

/// `frac(alpha · k)` in `[0, 1)`, computed exactly from the dyadic
/// representation of `alpha`.
///
/// `|k|` must be below 2⁶³; `alpha` must be finite.
pub fn frac_times(alpha: f64, k: i64) -> f64 {
    frac_times_mod(alpha, k, 0)
}

/// `(alpha · k) mod 2` in `[0, 2)`, exact in the same sense as [`frac_times`].
pub fn frac_times_mod2(alpha: f64, k: i64) -> f64 {
    frac_times_mod(alpha, k, 1)
}

/// Reduce `alpha·k` modulo `2^extra` (`extra` ∈ {0,1}), result in `[0, 2^extra)`.
fn frac_times_mod(alpha: f64, k: i64, extra: u32) -> f64 {
    debug_assert!(alpha.is_finite());
    if alpha == 0.0 || k == 0 {
        return 0.0;
    }
    let (s, m, e) = decompose(alpha);
    let negative = (s < 0) ^ (k < 0);
    let prod = (m as u128) * (k.unsigned_abs() as u128);
    let modulus = 1.0f64 * (1u64 << extra) as f64;
    if e >= 0 {
        // alpha·k is an even integer times 2^e unless extra bits matter.
        if extra == 1 && e == 0 {
            let r = (prod & 1) as f64;
            return if negative && r != 0.0 { 2.0 - r } else { r };
        }
        return 0.0;
    }
    let shift = (-e) as u32;
    let val = if shift as usize >= 127 {
        // |alpha·k| < 2^(116-127) < 1: the value itself is the fraction.
        let v = (prod as f64) * (0.5f64).powi(shift as i32);
        v % modulus
    } else {
        let keep = shift + extra;
        let rem = if keep >= 128 {
            prod
        } else {
            prod & ((1u128 << keep) - 1)
        };
        (rem as f64) * (0.5f64).powi(shift as i32)
    };
    if val == 0.0 {
        return 0.0;
    }
    let out = if negative { modulus - val } else { val };
    if out >= modulus {
        out - modulus
    } else {
        out
    }
}

/// Distance of `x` to the nearest integer (the circle norm ‖x‖).
pub fn circle_norm(x: f64) -> f64 {
    let f = x - x.floor();
    f.min(1.0 - f)
}

/// Exact circle norm of `alpha · k`.
pub fn norm_times(alpha: f64, k: i64) -> f64 {
    let f = frac_times(alpha, k);
    f.min(1.0 - f)
}

/// Reduce `x` to the fundamental domain `[-1/2, 1/2)`.
pub fn reduce_half(x: f64) -> f64 {
    let r = x - (x + 0.5).floor();
    // Guard the boundary case where rounding pushed us to +1/2.
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// `e(t) = exp(2πi t)`.
pub fn e(t: f64) -> Complex64 {
    let (s, c) = (TAU * t).sin_cos();
    Complex64::new(c, s)
}

/// `e(α₂n² + α₁n)` with both phase products reduced exactly modulo one.
pub fn e_quad(alpha1: f64, alpha2: f64, n: i64) -> Complex64 {
    let sq = n.checked_mul(n).expect("n^2 overflows i64");
    e(frac_times(alpha2, sq) + frac_times(alpha1, n))
}

/// Circle distance between the quadratic phases at `n` and `m`.
pub fn quad_phase_distance(alpha1: f64, alpha2: f64, n: i64, m: i64) -> f64 {
    let pn = frac_times(alpha2, n * n) + frac_times(alpha1, n);
    let pm = frac_times(alpha2, m * m) + frac_times(alpha1, m);
    circle_norm(pn - pm)
}
