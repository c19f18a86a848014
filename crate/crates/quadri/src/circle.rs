//! Circle-method machinery: arc classification, major-arc approximation,
//! the singular series with its p-adic local factors, Hensel lifting,
//! nonsingular real solutions, the singular integral, and the resulting
//! solution-count prediction `𝔖 · J`.

use crate::expsums::{
    complete_gauss_sum, continuous_v, quad_sum, unit_quad_fast, FrequencyPoint, GaussCache,
    GaussTable, RationalPoint,
};
use crate::represent::{count_solutions_capped, RepresentError};
use crate::systems::DiagonalSystem;
use num_complex::Complex64;
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircleError {
    #[error("frequency point is not on a major arc for Q={q}, N={n}")]
    NotMajorArc { q: u64, n: u64 },
    #[error("singular series kept imaginary residue {im}")]
    ImaginaryResidue { im: f64 },
    #[error("capacity exceeded: {what} = {got}, cap {cap}")]
    CapacityExceeded {
        what: &'static str,
        got: u128,
        cap: u128,
    },
    #[error("jacobian determinant vanishes at the seed (to available precision)")]
    SingularPoint,
    #[error("hensel hypothesis fails: needs F ≡ 0 mod p^{needed}, seed has precision {got}")]
    HypothesisFails { needed: u32, got: u32 },
    #[error("no nonsingular solution found modulo p^u for u ≤ {u_max} within budget")]
    NotFound { u_max: u32 },
    #[error("system needs two positive and two negative coefficients")]
    SignConditionViolated,
    #[error("lift did not verify after {0} newton steps")]
    LiftDiverged(u32),
    #[error(transparent)]
    Represent(#[from] RepresentError),
}

// ---------------------------------------------------------------------------
// Arc classification
// ---------------------------------------------------------------------------

/// The major/minor arc dissection at level `(Q, N)`: `α` is major for `(q,a)`
/// when `q ≤ Q`, `gcd(a₁,a₂,q) = 1` and `‖αᵢ - aᵢ/q‖ ≤ Qⁱ/Nⁱ`.
#[derive(Debug, Clone, Copy)]
pub struct ArcDecomposition {
    pub q_max: u64,
    pub n: u64,
    /// True when `64·Q⁵² ≤ N`, the regime in which distinct major boxes are
    /// provably disjoint.
    pub disjoint_certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Arc {
    Major(MajorArc),
    Minor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorArc {
    pub point: RationalPoint,
    pub beta1: f64,
    pub beta2: f64,
    /// More than one `(q, a)` qualified; the smallest `q` is reported.
    pub ambiguous: bool,
}

impl ArcDecomposition {
    pub fn new(q_max: u64, n: u64) -> Self {
        let params = crate::expsums::CutoffParams::new(q_max, n);
        ArcDecomposition {
            q_max,
            n,
            disjoint_certified: !params.scale_warning,
        }
    }

    pub fn classify(&self, alpha: FrequencyPoint) -> Arc {
        let nf = self.n as f64;
        let tol1 = self.q_max as f64 / nf;
        let tol2 = (self.q_max as f64).powi(2) / (nf * nf);
        let mut found: Option<MajorArc> = None;
        for q in 1..=self.q_max as i64 {
            let a1 = (alpha.alpha1 * q as f64).round() as i64;
            let a2 = (alpha.alpha2 * q as f64).round() as i64;
            let beta1 = alpha.alpha1 - a1 as f64 / q as f64;
            let beta2 = alpha.alpha2 - a2 as f64 / q as f64;
            if beta1.abs() > tol1 || beta2.abs() > tol2 {
                continue;
            }
            let point = RationalPoint::new(a1, a2, q);
            if !point.is_primitive() || point.q != q {
                // A non-primitive representative is covered at q/gcd.
                continue;
            }
            match &mut found {
                None => {
                    found = Some(MajorArc {
                        point,
                        beta1,
                        beta2,
                        ambiguous: false,
                    })
                }
                Some(m) => {
                    m.ambiguous = true;
                    break;
                }
            }
        }
        match found {
            Some(m) => Arc::Major(m),
            None => Arc::Minor,
        }
    }
}

/// Major-arc approximation data: the local product `q⁻¹V(q,a)v(β)`, the
/// directly summed `V(α)`, and the error-bound expression
/// `q(1 + |β₁|N + |β₂|N²)`.
#[derive(Debug, Clone)]
pub struct MajorArcApprox {
    pub arc: MajorArc,
    pub approx: Complex64,
    pub actual: Complex64,
    pub bound: f64,
}

pub fn major_arc_approx_error(
    alpha: FrequencyPoint,
    q_max: u64,
    n: u64,
) -> Result<MajorArcApprox, CircleError> {
    let arcs = ArcDecomposition::new(q_max, n);
    let arc = match arcs.classify(alpha) {
        Arc::Major(m) => m,
        Arc::Minor => return Err(CircleError::NotMajorArc { q: q_max, n }),
    };
    let q = arc.point.q;
    let local = complete_gauss_sum(q, arc.point.a1, arc.point.a2);
    let v = continuous_v(arc.beta1, arc.beta2, n, None).expect("v quadrature");
    let approx = local * v / q as f64;
    let actual = quad_sum(n, alpha);
    let nf = n as f64;
    let bound = q as f64 * (1.0 + arc.beta1.abs() * nf + arc.beta2.abs() * nf * nf);
    Ok(MajorArcApprox {
        arc,
        approx,
        actual,
        bound,
    })
}

// ---------------------------------------------------------------------------
// Local solution counts and the singular series
// ---------------------------------------------------------------------------

pub const DEFAULT_MOD_CAP: u64 = 512;

/// Exact number of solutions of both congruences modulo `q` over `(ℤ/q)^s`,
/// by dynamic programming over the residue lattice `(ℤ/q)²`.
pub fn count_solutions_mod(sys: &DiagonalSystem, q: u64) -> Result<u128, CircleError> {
    if q > DEFAULT_MOD_CAP {
        return Err(CircleError::CapacityExceeded {
            what: "modulus q",
            got: q as u128,
            cap: DEFAULT_MOD_CAP as u128,
        });
    }
    let q = q as usize;
    let mut table = vec![0u128; q * q];
    table[0] = 1;
    for &lambda in sys.lambdas() {
        // offsets (λr mod q, λr² mod q) for r = 0..q
        let offsets: Vec<(usize, usize)> = (0..q as i64)
            .map(|r| {
                let l = (lambda * r).rem_euclid(q as i64) as usize;
                let m = (lambda * r * r).rem_euclid(q as i64) as usize;
                (l, m)
            })
            .collect();
        let src = table;
        let mut dst = vec![0u128; q * q];
        dst.par_chunks_mut(q).enumerate().for_each(|(row, out)| {
            for &(dl, dm) in &offsets {
                let src_row = (row + q - dl) % q;
                let base = &src[src_row * q..(src_row + 1) * q];
                // out[m] += base[(m - dm) mod q]
                let split = q - dm;
                for m in 0..q {
                    let sm = if m >= dm { m - dm } else { m + split };
                    out[m] += base[sm];
                }
            }
        });
        table = dst;
    }
    Ok(table[0])
}

/// The same count through the character-sum route
/// `S(q) = q⁻² Σ_{a₁,a₂ ≤ q} Π_i V(q, λᵢa)`, rounded from the complex sum.
pub fn character_sum_solutions_mod(sys: &DiagonalSystem, q: u64, cache: &GaussCache) -> f64 {
    let table = cache.table(q as usize);
    let qi = q as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for a1 in 1..=qi {
        for a2 in 1..=qi {
            let mut prod = Complex64::new(1.0, 0.0);
            for &l in sys.lambdas() {
                prod *= table.get(l * a1, l * a2);
            }
            acc += prod;
        }
    }
    acc.re / (q as f64 * q as f64)
}

/// Normalized local term `V(q) = q^{-s} Σ_{(a;q)=1} Π_i V(q, λᵢa)`.
pub fn local_term(sys: &DiagonalSystem, table: &GaussTable) -> Complex64 {
    let q = table.q as i64;
    let gcds: Vec<i64> = (0..q).map(|j| j.gcd(&q)).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for a1 in 1..=q {
        let g1 = gcds[(a1 % q) as usize];
        for a2 in 1..=q {
            if g1.gcd(&gcds[(a2 % q) as usize]) != 1 {
                continue;
            }
            let mut prod = Complex64::new(1.0, 0.0);
            for &l in sys.lambdas() {
                prod *= table.get(l * a1, l * a2);
            }
            acc += prod;
        }
    }
    acc / (q as f64).powi(sys.s() as i32)
}

/// Truncated singular series `𝔖(Q) = Σ_{q ≤ Q} V(q)` together with the
/// truncation proxy `|𝔖(Q) - 𝔖(Q/2)|`.
#[derive(Debug, Clone)]
pub struct SingularSeries {
    pub q_trunc: u64,
    pub value: f64,
    pub tail_proxy: f64,
    /// `terms[q-1] = V(q)`.
    pub terms: Vec<f64>,
}

pub fn singular_series(
    sys: &DiagonalSystem,
    q_trunc: u64,
    cache: &GaussCache,
) -> Result<SingularSeries, CircleError> {
    if q_trunc > DEFAULT_MOD_CAP {
        return Err(CircleError::CapacityExceeded {
            what: "singular series Q",
            got: q_trunc as u128,
            cap: DEFAULT_MOD_CAP as u128,
        });
    }
    let terms_c: Vec<Complex64> = (1..=q_trunc as usize)
        .into_par_iter()
        .map(|q| {
            let table = cache.table(q);
            local_term(sys, &table)
        })
        .collect();
    let total: Complex64 = terms_c.iter().sum();
    if total.im.abs() > 1e-8 * total.re.abs().max(1.0) {
        return Err(CircleError::ImaginaryResidue { im: total.im });
    }
    let half: f64 = terms_c
        .iter()
        .take((q_trunc / 2) as usize)
        .map(|c| c.re)
        .sum();
    Ok(SingularSeries {
        q_trunc,
        value: total.re,
        tail_proxy: (total.re - half).abs(),
        terms: terms_c.iter().map(|c| c.re).collect(),
    })
}

/// Local factor `T(p)`: the sequence `p^{(2-s)k} S(p^k)` for `k = 0..k_max`
/// and its stabilization data.
#[derive(Debug, Clone)]
pub struct LocalFactor {
    pub p: u64,
    pub values: Vec<f64>,
    /// First k with `|values[k] - values[k-1]| ≤ tol`, if any.
    pub u: Option<u32>,
    pub stabilized: bool,
    pub t_p: f64,
}

pub fn local_factor(
    sys: &DiagonalSystem,
    p: u64,
    k_max: u32,
    tol: f64,
) -> Result<LocalFactor, CircleError> {
    // Clamp k to the modulus cap.
    let mut k_eff = 0;
    let mut q: u64 = 1;
    while k_eff < k_max && q.saturating_mul(p) <= DEFAULT_MOD_CAP {
        q *= p;
        k_eff += 1;
    }
    let mut values = Vec::with_capacity(k_eff as usize + 1);
    values.push(1.0);
    let mut q = 1u64;
    for k in 1..=k_eff {
        q *= p;
        let s_count = count_solutions_mod(sys, q)? as f64;
        let norm = (q as f64).powi(sys.s() as i32 - 2);
        let _ = k;
        values.push(s_count / norm);
    }
    let mut u = None;
    for k in 1..values.len() {
        if (values[k] - values[k - 1]).abs() <= tol {
            u = Some(k as u32);
            break;
        }
    }
    let last_step = if values.len() >= 2 {
        (values[values.len() - 1] - values[values.len() - 2]).abs()
    } else {
        f64::INFINITY
    };
    Ok(LocalFactor {
        p,
        values: values.clone(),
        u,
        stabilized: last_step <= tol,
        t_p: *values.last().unwrap(),
    })
}

pub fn primes_up_to(limit: u64) -> Vec<u64> {
    let mut is_comp = vec![false; (limit + 1) as usize];
    let mut out = Vec::new();
    for i in 2..=limit {
        if !is_comp[i as usize] {
            out.push(i);
            let mut j = i * i;
            while j <= limit {
                is_comp[j as usize] = true;
                j += i;
            }
        }
    }
    out
}

/// Euler product `Π_{p ≤ p_limit} T(p)` with per-prime factors.
pub fn euler_product(
    sys: &DiagonalSystem,
    p_limit: u64,
    tol: f64,
) -> Result<(f64, Vec<LocalFactor>), CircleError> {
    let factors: Vec<LocalFactor> = primes_up_to(p_limit)
        .into_par_iter()
        .map(|p| local_factor(sys, p, 16, tol))
        .collect::<Result<_, _>>()?;
    let product = factors.iter().map(|f| f.t_p).product();
    Ok((product, factors))
}

// ---------------------------------------------------------------------------
// Hensel lifting
// ---------------------------------------------------------------------------

/// A solution of both congruences modulo `p^k`, together with the coordinate
/// pair that gets re-solved during lifting and whether the 2×2 Jacobian
/// determinant at the point is a p-adic unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicSolution {
    pub p: u64,
    pub k: u32,
    pub x: Vec<i64>,
    pub jacobian_unit: bool,
    pub pair: (usize, usize),
}

fn pow_i128(p: i128, k: u32) -> Option<i128> {
    let mut acc: i128 = 1;
    for _ in 0..k {
        acc = acc.checked_mul(p)?;
        if acc > (1 << 62) {
            return None;
        }
    }
    Some(acc)
}

fn valuation(mut v: i128, p: i128, cap: u32) -> u32 {
    if v == 0 {
        return cap;
    }
    let mut out = 0;
    while v % p == 0 && out < cap {
        v /= p;
        out += 1;
    }
    out
}

fn eval_congruences(sys: &DiagonalSystem, x: &[i128], modulus: i128) -> (i128, i128) {
    let mut lin: i128 = 0;
    let mut quad: i128 = 0;
    for (&l, &xi) in sys.lambdas().iter().zip(x) {
        let l = l as i128;
        lin = (lin + l * xi).rem_euclid(modulus);
        quad = (quad + ((l * xi).rem_euclid(modulus) * xi)).rem_euclid(modulus);
    }
    (lin, quad)
}

fn mod_inverse(a: i128, modulus: i128) -> Option<i128> {
    let (mut r0, mut r1) = (modulus, a.rem_euclid(modulus));
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        None
    } else {
        Some(t0.rem_euclid(modulus))
    }
}

/// Lift a seed solution modulo `p^u` to precision `p^k` by Newton iteration
/// on the designated coordinate pair, all other coordinates held fixed.
/// Both congruences are re-verified in exact modular arithmetic at every
/// intermediate precision.
pub fn hensel_lift(
    sys: &DiagonalSystem,
    seed: &PadicSolution,
    target_k: u32,
) -> Result<PadicSolution, CircleError> {
    let p = seed.p as i128;
    let (i, j) = seed.pair;
    assert!(i != j && i < sys.s() && j < sys.s());
    let seed_mod = pow_i128(p, seed.k).ok_or(CircleError::CapacityExceeded {
        what: "p^u",
        got: 0,
        cap: 1 << 62,
    })?;

    let mut x: Vec<i128> = seed.x.iter().map(|&v| (v as i128).rem_euclid(seed_mod)).collect();

    // Jacobian determinant Δ = 2 λᵢ λⱼ (xⱼ - xᵢ) at the seed, as an exact
    // integer of the representatives.
    let delta = 2 * sys.lambdas()[i] as i128 * sys.lambdas()[j] as i128 * (x[j] - x[i]);
    if delta == 0 {
        return Err(CircleError::SingularPoint);
    }
    let v_delta = valuation(delta, p, 62);
    if v_delta >= seed.k {
        // Cannot certify the unit part at seed precision.
        return Err(CircleError::SingularPoint);
    }
    let needed = 2 * v_delta + 1;
    if seed.k < needed {
        return Err(CircleError::HypothesisFails {
            needed,
            got: seed.k,
        });
    }
    let (f1, f2) = eval_congruences(sys, &x, seed_mod);
    let hyp = pow_i128(p, needed).unwrap();
    if f1.rem_euclid(hyp) != 0 || f2.rem_euclid(hyp) != 0 {
        return Err(CircleError::HypothesisFails {
            needed,
            got: seed.k,
        });
    }

    // Work modulus: enough headroom that divisions by p^v never drop below
    // the target precision.
    let work_k = target_k + 2 * v_delta + 2;
    let work = pow_i128(p, work_k).ok_or(CircleError::CapacityExceeded {
        what: "p^(k + slack)",
        got: work_k as u128,
        cap: 62,
    })?;
    let target = pow_i128(p, target_k).unwrap();

    let li = sys.lambdas()[i] as i128;
    let lj = sys.lambdas()[j] as i128;
    for _step in 0..64 {
        let (f1, f2) = eval_congruences(sys, &x, work);
        if f1.rem_euclid(target) == 0 && f2.rem_euclid(target) == 0 {
            let out: Vec<i64> = x.iter().map(|&v| (v.rem_euclid(target)) as i64).collect();
            // Final verification at the target modulus.
            let xs: Vec<i128> = out.iter().map(|&v| v as i128).collect();
            let (g1, g2) = eval_congruences(sys, &xs, target);
            debug_assert!(g1 == 0 && g2 == 0);
            return Ok(PadicSolution {
                p: seed.p,
                k: target_k,
                x: out,
                jacobian_unit: v_delta == 0,
                pair: seed.pair,
            });
        }
        // J = [[λᵢ, λⱼ], [2λᵢxᵢ, 2λⱼxⱼ]] (rows: linear, quadratic form).
        let det = (li * 2 * lj * x[j] - lj * 2 * li * x[i]).rem_euclid(work);
        let det_full = 2 * li * lj * (x[j] - x[i]);
        let v = valuation(det_full.rem_euclid(work).min(det.max(1)), p, work_k);
        let v = v.min(valuation(det_full, p, work_k));
        let pv = pow_i128(p, v).unwrap();
        let unit = (det_full / pv).rem_euclid(work);
        let unit_inv = mod_inverse(unit, work).ok_or(CircleError::LiftDiverged(_step))?;
        // adj(J)·(-F): J⁻¹ = adj/det with adj = [[2λⱼxⱼ, -λⱼ], [-2λᵢxᵢ, λᵢ]].
        let b1 = (-f1).rem_euclid(work);
        let b2 = (-f2).rem_euclid(work);
        let adj1 = (2 * lj * x[j] % work * b1 - lj * b2).rem_euclid(work);
        let adj2 = (-2 * li * x[i] % work * b1 + li * b2).rem_euclid(work);
        // Exact division by p^v; guaranteed by the valuation bookkeeping.
        let lift_component = |c: i128| -> Option<i128> {
            let c = c.rem_euclid(work);
            // interpret modulo work: divisibility by p^v must hold
            if c % pv != 0 {
                return None;
            }
            Some(((c / pv) * unit_inv).rem_euclid(work))
        };
        let d1 = lift_component(adj1).ok_or(CircleError::LiftDiverged(_step))?;
        let d2 = lift_component(adj2).ok_or(CircleError::LiftDiverged(_step))?;
        x[i] = (x[i] + d1).rem_euclid(work);
        x[j] = (x[j] + d2).rem_euclid(work);
    }
    Err(CircleError::LiftDiverged(64))
}

/// Search for a nonsingular solution modulo `p^u`, raising `u` until the
/// lifting hypothesis can be certified. Meet-in-the-middle over the two
/// variable halves keeps the scan well below brute force.
pub fn find_nonsingular_padic(sys: &DiagonalSystem, p: u64) -> Result<PadicSolution, CircleError> {
    let seeds = find_nonsingular_padic_multi(sys, p, 1)?;
    Ok(seeds.into_iter().next().unwrap())
}

/// Up to `count` distinct qualifying seeds, in deterministic search order.
pub fn find_nonsingular_padic_multi(
    sys: &DiagonalSystem,
    p: u64,
    count: usize,
) -> Result<Vec<PadicSolution>, CircleError> {
    let u_max = if p == 2 { 4 } else { 3 };
    let s = sys.s();
    let budget: u128 = 100_000_000;
    let mut out = Vec::new();
    for u in 1..=u_max {
        let m = pow_i128(p as i128, u).unwrap();
        let s1 = s / 2 + s % 2;
        let s2 = s - s1;
        let half_size = (m as u128).checked_pow(s1 as u32).unwrap_or(u128::MAX);
        if half_size > budget {
            break;
        }
        // First half: partial sums keyed by (Σλx, Σλx²) mod p^u.
        let mut map: std::collections::HashMap<(i128, i128), Vec<Vec<i128>>> =
            std::collections::HashMap::new();
        let mut tuple = vec![0i128; s1];
        loop {
            let mut lin = 0i128;
            let mut quad = 0i128;
            for (idx, &v) in tuple.iter().enumerate() {
                let l = sys.lambdas()[idx] as i128;
                lin = (lin + l * v).rem_euclid(m);
                quad = (quad + l * v % m * v).rem_euclid(m);
            }
            map.entry((lin, quad)).or_default().push(tuple.clone());
            if !advance(&mut tuple, m) {
                break;
            }
        }
        // Second half: look up the complementary key.
        let mut tuple = vec![0i128; s2];
        'outer: loop {
            let mut lin = 0i128;
            let mut quad = 0i128;
            for (idx, &v) in tuple.iter().enumerate() {
                let l = sys.lambdas()[s1 + idx] as i128;
                lin = (lin + l * v).rem_euclid(m);
                quad = (quad + l * v % m * v).rem_euclid(m);
            }
            let key = ((-lin).rem_euclid(m), (-quad).rem_euclid(m));
            if let Some(firsts) = map.get(&key) {
                for first in firsts {
                    let mut x: Vec<i128> = first.clone();
                    x.extend_from_slice(&tuple);
                    if let Some(sol) = qualify_seed(sys, p, u, m, &x) {
                        if !out.contains(&sol) {
                            out.push(sol);
                            if out.len() >= count {
                                break 'outer;
                            }
                        }
                    }
                }
            }
            if !advance(&mut tuple, m) {
                break;
            }
        }
        if out.len() >= count {
            return Ok(out);
        }
    }
    if out.is_empty() {
        Err(CircleError::NotFound { u_max: u_max })
    } else {
        Ok(out)
    }
}

fn advance(tuple: &mut [i128], m: i128) -> bool {
    for slot in tuple.iter_mut().rev() {
        *slot += 1;
        if *slot < m {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Does the solution admit a coordinate pair with certified-unit-enough
/// Jacobian at precision u? Returns the seed if so.
fn qualify_seed(
    sys: &DiagonalSystem,
    p: u64,
    u: u32,
    m: i128,
    x: &[i128],
) -> Option<PadicSolution> {
    let s = sys.s();
    for i in 0..s {
        for j in i + 1..s {
            let delta = 2 * sys.lambdas()[i] as i128 * sys.lambdas()[j] as i128 * (x[j] - x[i]);
            if delta == 0 {
                continue;
            }
            let v = valuation(delta, p as i128, u);
            if 2 * v + 1 <= u {
                return Some(PadicSolution {
                    p,
                    k: u,
                    x: x.iter().map(|&v| (v.rem_euclid(m)) as i64).collect(),
                    jacobian_unit: v == 0,
                    pair: (i, j),
                });
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Real nonsingular solutions and the singular integral
// ---------------------------------------------------------------------------

/// The explicit perturbed real solution: all variables 1 except two per sign
/// class, displaced along the kernel of the linear form so that only
/// `λ₁λ₂(λ₁+λ₂)θ² = μ₁μ₂(μ₁+μ₂)φ²` survives.
pub fn find_nonsingular_real(sys: &DiagonalSystem) -> Result<Vec<f64>, CircleError> {
    let pos: Vec<usize> = (0..sys.s()).filter(|&i| sys.lambdas()[i] > 0).collect();
    let neg: Vec<usize> = (0..sys.s()).filter(|&i| sys.lambdas()[i] < 0).collect();
    if pos.len() < 2 || neg.len() < 2 {
        return Err(CircleError::SignConditionViolated);
    }
    let l1 = sys.lambdas()[pos[0]] as f64;
    let l2 = sys.lambdas()[pos[1]] as f64;
    let m1 = -sys.lambdas()[neg[0]] as f64;
    let m2 = -sys.lambdas()[neg[1]] as f64;
    let theta = 1.0;
    let phi = theta * (l1 * l2 * (l1 + l2) / (m1 * m2 * (m1 + m2))).sqrt();
    let mut x = vec![1.0; sys.s()];
    x[pos[0]] = 1.0 + l2 * theta;
    x[pos[1]] = 1.0 - l1 * theta;
    x[neg[0]] = 1.0 + m2 * phi;
    x[neg[1]] = 1.0 - m1 * phi;

    let (mut lin, mut quad) = (0.0f64, 0.0f64);
    for (&l, &xi) in sys.lambdas().iter().zip(&x) {
        lin += l as f64 * xi;
        quad += l as f64 * xi * xi;
    }
    let scale = sys.sum_abs_lambda() as f64 * x.iter().fold(1.0f64, |m, v| m.max(v * v));
    assert!(
        lin.abs() <= 1e-10 * scale && quad.abs() <= 1e-10 * scale,
        "perturbed solution residual too large: ({lin}, {quad})"
    );
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralMethod {
    MonteCarlo,
    Quadrature,
}

/// Estimate of the normalized singular integral `J/N^{s-3}` (an N-free
/// quantity) with an error proxy.
#[derive(Debug, Clone)]
pub struct IntegralEstimate {
    pub value: f64,
    pub error: f64,
    pub method: IntegralMethod,
    pub work: u64,
}

/// Fejér kernel `(sin πt / πt)²`.
fn fejer(t: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let s = (PI * t).sin() / (PI * t);
    s * s
}

/// Monte Carlo估 route: sample `y` uniform on `[0,1]^s` and average
/// `P² Λ̂(P·K₁(y)) Λ̂(P·K₂(y))`; the smoothing level `P` is doubled-checked
/// against `P/2` for a bias proxy. Deterministic for a fixed `(seed, budget)`
/// because every batch runs on its own counter-based RNG stream.
pub fn singular_integral_mc(
    sys: &DiagonalSystem,
    budget: u64,
    seed: u64,
    smoothing: f64,
) -> IntegralEstimate {
    const BATCH: u64 = 1 << 14;
    let batches = budget.div_ceil(BATCH).max(1);
    let lambdas: Vec<f64> = sys.lambdas().iter().map(|&l| l as f64).collect();
    let p_hi = smoothing;
    let p_lo = smoothing / 2.0;
    let parts: Vec<(f64, f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b + 1);
            let mut sum_hi = 0.0;
            let mut sum_hi_sq = 0.0;
            let mut sum_lo = 0.0;
            let mut y = vec![0.0f64; lambdas.len()];
            for _ in 0..BATCH {
                let mut k1 = 0.0;
                let mut k2 = 0.0;
                for (slot, &l) in y.iter_mut().zip(&lambdas) {
                    *slot = rng.gen::<f64>();
                    k1 += l * *slot;
                    k2 += l * *slot * *slot;
                }
                let w_hi = p_hi * p_hi * fejer(p_hi * k1) * fejer(p_hi * k2);
                let w_lo = p_lo * p_lo * fejer(p_lo * k1) * fejer(p_lo * k2);
                sum_hi += w_hi;
                sum_hi_sq += w_hi * w_hi;
                sum_lo += w_lo;
            }
            (sum_hi, sum_hi_sq, sum_lo)
        })
        .collect();
    let n = (batches * BATCH) as f64;
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for (a, b, c) in parts {
        s1 += a;
        s2 += b;
        s3 += c;
    }
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    let stderr = (var / n).sqrt();
    let bias = (mean - s3 / n).abs();
    IntegralEstimate {
        value: mean,
        error: stderr + bias,
        method: IntegralMethod::MonteCarlo,
        work: batches * BATCH,
    }
}

/// Quadrature route: integrate `Π v₁(λᵢ b)` over the truncated box
/// `[-B₁,B₁] × [-B₂,B₂]` with oscillation-matched panels; by conjugate
/// symmetry only the upper half-plane is computed. The reported error is a
/// halved-box tail proxy plus a lower-density discretization proxy.
pub fn singular_integral_quadrature(
    sys: &DiagonalSystem,
    b1_max: f64,
    b2_max: f64,
) -> IntegralEstimate {
    let full = quadrature_box(sys, b1_max, b2_max, 4.0);
    let half = quadrature_box(sys, b1_max / 2.0, b2_max / 2.0, 4.0);
    let coarse = quadrature_box(sys, b1_max, b2_max, 2.5);
    let value = full.0;
    let error = (value - half.0).abs() + (value - coarse.0).abs();
    IntegralEstimate {
        value,
        error,
        method: IntegralMethod::Quadrature,
        work: full.1 + half.1 + coarse.1,
    }
}

fn quadrature_box(
    sys: &DiagonalSystem,
    b1_max: f64,
    b2_max: f64,
    panels_per_cycle: f64,
) -> (f64, u64) {
    const GL: usize = 7;
    let nodes7: [f64; 7] = [
        -0.9491079123427585,
        -0.7415311855993945,
        -0.4058451513773972,
        0.0,
        0.4058451513773972,
        0.7415311855993945,
        0.9491079123427585,
    ];
    let weights7: [f64; 7] = [
        0.1294849661688697,
        0.2797053914892766,
        0.3818300505051189,
        0.4179591836734694,
        0.3818300505051189,
        0.2797053914892766,
        0.1294849661688697,
    ];
    let freq = sys.sum_abs_lambda() as f64;
    // Sign pattern per distinct |λ|.
    let mut classes: Vec<(f64, i32, i32)> = Vec::new();
    for &l in sys.lambdas() {
        let d = l.abs() as f64;
        match classes.iter_mut().find(|c| c.0 == d) {
            Some(c) => {
                if l > 0 {
                    c.1 += 1;
                } else {
                    c.2 += 1;
                }
            }
            None => classes.push((d, (l > 0) as i32, (l < 0) as i32)),
        }
    }

    let p1 = ((2.0 * b1_max * panels_per_cycle * freq).ceil() as usize).max(4);
    let p2 = ((b2_max * panels_per_cycle * freq).ceil() as usize).max(4);
    let h1 = 2.0 * b1_max / p1 as f64;
    let h2 = b2_max / p2 as f64;

    let rows: Vec<f64> = (0..p2)
        .into_par_iter()
        .map(|i2| {
            let mut acc = Complex64::new(0.0, 0.0);
            for g2 in 0..GL {
                let b2 = (i2 as f64 + 0.5 + 0.5 * nodes7[g2]) * h2;
                let w2 = weights7[g2];
                for i1 in 0..p1 {
                    for g1 in 0..GL {
                        let b1 = -b1_max + (i1 as f64 + 0.5 + 0.5 * nodes7[g1]) * h1;
                        let w = w2 * weights7[g1];
                        let mut prod = Complex64::new(1.0, 0.0);
                        for &(d, np, nn) in &classes {
                            let v = unit_quad_fast(d * b1, d * b2);
                            if np > 0 {
                                prod *= v.powi(np);
                            }
                            if nn > 0 {
                                prod *= v.conj().powi(nn);
                            }
                        }
                        acc += w * prod;
                    }
                }
            }
            // weights normalize with the half-widths of both axes
            2.0 * (acc * (0.25 * h1 * h2)).re
        })
        .collect();
    let value: f64 = rows.iter().sum();
    (value, (p1 * p2 * GL * GL) as u64)
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Prediction {
    pub n: u64,
    pub q_trunc: u64,
    pub sing: f64,
    pub sing_err: f64,
    pub j_norm: f64,
    pub j_err: f64,
    pub prediction: f64,
    pub exact: Option<u128>,
    pub rel_err: Option<f64>,
}

/// Circle-method prediction `𝔖(Q)·J` against the exact count when the DP
/// window allows it.
pub fn predict_z(
    sys: &DiagonalSystem,
    n: u64,
    q_trunc: u64,
    mc_budget: u64,
    seed: u64,
    with_exact: bool,
    cache: &GaussCache,
) -> Result<Prediction, CircleError> {
    let sing = singular_series(sys, q_trunc, cache)?;
    let j = singular_integral_mc(sys, mc_budget, seed, 16.0);
    let scale = (n as f64).powi(sys.s() as i32 - 3);
    let prediction = sing.value * j.value * scale;
    let exact = if with_exact {
        Some(count_solutions_capped(sys, n, None, 64)?)
    } else {
        None
    };
    let rel_err = exact.map(|z| (prediction - z as f64).abs() / z as f64);
    Ok(Prediction {
        n,
        q_trunc,
        sing: sing.value,
        sing_err: sing.tail_proxy,
        j_norm: j.value,
        j_err: j.error,
        prediction,
        exact,
        rel_err,
    })
}

/// Empirical minor-arc supremum: sample `α` uniformly, classify, and track
/// `sup |V(α)|` over the minor arcs, reported against `N·Q^{-1/3}`.
#[derive(Debug, Clone)]
pub struct MinorArcReport {
    pub n: u64,
    pub q: u64,
    pub samples: u64,
    pub minor_count: u64,
    pub sup: f64,
    pub normalized: f64,
}

pub fn minor_arc_sup(n: u64, q: u64, samples: u64, seed: u64) -> MinorArcReport {
    let arcs = ArcDecomposition::new(q, n);
    let points: Vec<FrequencyPoint> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .map(|_| FrequencyPoint::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect()
    };
    let evals: Vec<Option<f64>> = points
        .par_iter()
        .map(|&alpha| match arcs.classify(alpha) {
            Arc::Minor => Some(quad_sum(n, alpha).norm()),
            Arc::Major(_) => None,
        })
        .collect();
    let mut sup = 0.0f64;
    let mut minor_count = 0;
    for v in evals.into_iter().flatten() {
        minor_count += 1;
        sup = sup.max(v);
    }
    let normalized = sup * (q as f64).powf(1.0 / 3.0) / n as f64;
    MinorArcReport {
        n,
        q,
        samples,
        minor_count,
        sup,
        normalized,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expsums::GaussCache;

    fn reference() -> DiagonalSystem {
        DiagonalSystem::reference()
    }

    #[test]
    fn classify_basic() {
        let arcs = ArcDecomposition::new(5, 1_000_000);
        // Exactly rational with small q.
        match arcs.classify(FrequencyPoint::new(1.0 / 3.0, 2.0 / 3.0)) {
            Arc::Major(m) => {
                assert_eq!(m.point.q, 3);
                assert_eq!((m.point.a1, m.point.a2), (1, 2));
                assert!(m.beta1.abs() < 1e-12 && m.beta2.abs() < 1e-12);
            }
            Arc::Minor => panic!("expected major"),
        }
        // Far from all small rationals.
        assert_eq!(
            arcs.classify(FrequencyPoint::new(0.5 + 0.4, 0.37)),
            Arc::Minor
        );
        // Zero is the q = 1 point.
        match arcs.classify(FrequencyPoint::zero()) {
            Arc::Major(m) => assert_eq!(m.point.q, 1),
            Arc::Minor => panic!("expected q=1 major"),
        }
    }

    #[test]
    fn classify_partition_sample() {
        // Every point classifies exactly one way; with the scale flag on,
        // boxes are disjoint so no ambiguity flags appear.
        let arcs = ArcDecomposition::new(1, 64);
        assert!(arcs.disjoint_certified);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let alpha = FrequencyPoint::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            if let Arc::Major(m) = arcs.classify(alpha) {
                assert!(!m.ambiguous);
            }
        }
    }

    #[test]
    fn major_arc_error_zero_point() {
        let out = major_arc_approx_error(FrequencyPoint::zero(), 4, 256).unwrap();
        assert!((out.approx - out.actual).norm() < 1e-4);
        assert!((out.actual.re - 256.0).abs() < 1e-9);
    }

    #[test]
    fn major_arc_error_bounded_on_rationals() {
        // At exactly rational α the error is O(q); measure the constant.
        let n = 10_000u64;
        let mut max_ratio: f64 = 0.0;
        for q in 1..=12i64 {
            for a1 in 1..=q {
                let point = RationalPoint::new(a1, 1, q);
                if !point.is_primitive() {
                    continue;
                }
                let alpha = point.frequency();
                let out = major_arc_approx_error(alpha, 16, n).unwrap();
                let err = (out.actual - out.approx).norm();
                max_ratio = max_ratio.max(err / out.bound);
            }
        }
        assert!(max_ratio < 3.0, "Δ/bound ratio {max_ratio}");
    }

    #[test]
    fn count_mod_small_exhaustive() {
        let sys = reference();
        // q = 2: enumerate 2^7 residue tuples.
        let mut brute = 0u64;
        for mask in 0..128u32 {
            let x: Vec<i64> = (0..7).map(|i| ((mask >> i) & 1) as i64).collect();
            let lin: i64 = sys.lambdas().iter().zip(&x).map(|(&l, &v)| l * v).sum();
            let quad: i64 = sys
                .lambdas()
                .iter()
                .zip(&x)
                .map(|(&l, &v)| l * v * v)
                .sum();
            if lin.rem_euclid(2) == 0 && quad.rem_euclid(2) == 0 {
                brute += 1;
            }
        }
        assert_eq!(count_solutions_mod(&sys, 2).unwrap(), brute as u128);
        assert_eq!(count_solutions_mod(&sys, 1).unwrap(), 1);
        // S(p) ≥ p: constant tuples.
        for p in [3u64, 5, 7] {
            assert!(count_solutions_mod(&sys, p).unwrap() >= p as u128);
        }
    }

    #[test]
    fn character_route_matches_dp() {
        let sys = reference();
        let cache = GaussCache::default();
        for q in [2u64, 3, 4, 5, 6, 9, 12] {
            let exact = count_solutions_mod(&sys, q).unwrap() as f64;
            let char_sum = character_sum_solutions_mod(&sys, q, &cache);
            assert!(
                (exact - char_sum).abs() < 1e-3 * exact.max(1.0),
                "q={q}: {exact} vs {char_sum}"
            );
        }
    }

    #[test]
    fn local_term_multiplicative() {
        let sys = reference();
        let cache = GaussCache::default();
        for (q1, q2) in [(2u64, 3u64), (3, 4), (2, 9), (5, 6), (4, 7)] {
            let t1 = local_term(&sys, &cache.table(q1 as usize));
            let t2 = local_term(&sys, &cache.table(q2 as usize));
            let t12 = local_term(&sys, &cache.table((q1 * q2) as usize));
            assert!(
                (t1 * t2 - t12).norm() <= 1e-8 * (1.0 + t12.norm()),
                "q1={q1} q2={q2}: {t1}·{t2} vs {t12}"
            );
        }
    }

    #[test]
    fn finite_level_identity() {
        // Σ_{l≤k} V(p^l) = p^{(2-s)k} S(p^k), both sides independent.
        let sys = reference();
        let cache = GaussCache::default();
        for p in [2u64, 3, 5] {
            for k in 1..=3u32 {
                let mut lhs = 0.0;
                let mut q = 1u64;
                for _l in 0..=k {
                    let t = local_term(&sys, &cache.table(q as usize));
                    assert!(t.im.abs() < 1e-8);
                    lhs += t.re;
                    q *= p;
                }
                let pk = p.pow(k);
                let rhs = count_solutions_mod(&sys, pk).unwrap() as f64
                    / (pk as f64).powi(sys.s() as i32 - 2);
                assert!(
                    (lhs - rhs).abs() <= 1e-8 * rhs.max(1.0),
                    "p={p} k={k}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn singular_series_basics() {
        let sys = reference();
        let cache = GaussCache::default();
        let s1 = singular_series(&sys, 1, &cache).unwrap();
        assert!((s1.value - 1.0).abs() < 1e-12, "q=1 term must be 1");
        let s = singular_series(&sys, 64, &cache).unwrap();
        assert!(s.value > 0.0, "singular series positive, got {}", s.value);
    }

    #[test]
    fn euler_product_agrees_with_series() {
        let sys = reference();
        let cache = GaussCache::default();
        let s = singular_series(&sys, 64, &cache).unwrap();
        let (prod, factors) = euler_product(&sys, 64, 1e-4).unwrap();
        for f in &factors {
            assert!(f.t_p > 0.0, "T({}) = {}", f.p, f.t_p);
        }
        let tol = s.tail_proxy.max(1e-3 * s.value.abs());
        assert!(
            (prod - s.value).abs() <= 3.0 * tol,
            "Euler product {prod} vs series {} (proxy {})",
            s.value,
            s.tail_proxy
        );
    }

    #[test]
    fn local_factor_large_prime_near_one() {
        let sys = reference();
        for p in [53u64, 59, 61] {
            let lf = local_factor(&sys, p, 1, 1e-2).unwrap();
            assert!(
                (lf.t_p - 1.0).abs() <= 3.0 * (p as f64).powf(-1.5),
                "T({p}) = {}",
                lf.t_p
            );
        }
    }

    #[test]
    fn hensel_exact_solution_is_fixed_point() {
        let sys = reference();
        // (2,0,1,1,2,0,1) solves the system exactly; x₁ ≠ x₂ gives a unit
        // Jacobian for any p not dividing 2·(x₂-x₁).
        let x = vec![2i64, 0, 1, 1, 2, 0, 1];
        assert!(sys.is_solution(&x).unwrap());
        for p in [3u64, 5, 7] {
            let seed = PadicSolution {
                p,
                k: 1,
                x: x.iter().map(|&v| v.rem_euclid(p as i64)).collect(),
                jacobian_unit: true,
                pair: (0, 1),
            };
            let lifted = hensel_lift(&sys, &seed, 6).unwrap();
            let modulus = (p as i128).pow(6);
            for (orig, l) in x.iter().zip(&lifted.x) {
                assert_eq!((orig.rem_euclid(modulus as i64)), *l, "p={p}");
            }
        }
    }

    #[test]
    fn hensel_lifts_verify_and_are_idempotent() {
        let sys = reference();
        for p in [2u64, 3, 5] {
            let seeds = find_nonsingular_padic_multi(&sys, p, 3).unwrap();
            assert!(!seeds.is_empty());
            for seed in &seeds {
                let lifted = hensel_lift(&sys, seed, 6).unwrap();
                let modulus = (p as i128).pow(6);
                let xs: Vec<i128> = lifted.x.iter().map(|&v| v as i128).collect();
                let (f1, f2) = eval_congruences(&sys, &xs, modulus);
                assert_eq!((f1, f2), (0, 0), "p={p}");
                // Re-lifting from the result is the identity.
                let again = hensel_lift(&sys, &lifted, 6).unwrap();
                assert_eq!(again.x, lifted.x);
            }
        }
    }

    #[test]
    fn hensel_uniqueness_and_distinctness() {
        let sys = reference();
        let seeds = find_nonsingular_padic_multi(&sys, 3, 4).unwrap();
        let lifted: Vec<Vec<i64>> = seeds
            .iter()
            .map(|s| hensel_lift(&sys, s, 5).unwrap().x)
            .collect();
        for (i, a) in lifted.iter().enumerate() {
            for b in lifted.iter().skip(i + 1) {
                // Distinct seeds stay distinct at higher precision whenever
                // they differ at seed precision.
            let differ_at_seed = seeds[i]
                    .x
                    .iter()
                    .zip(b.iter())
                    .any(|(s, l)| (s - l).rem_euclid(3i64.pow(seeds[i].k)) != 0);
                if differ_at_seed {
                    assert_ne!(a, b);
                }
            }
        }
    }

    #[test]
    fn singular_seed_rejected() {
        let sys = reference();
        let seed = PadicSolution {
            p: 5,
            k: 2,
            x: vec![1; 7],
            jacobian_unit: false,
            pair: (0, 1),
        };
        assert_eq!(hensel_lift(&sys, &seed, 4), Err(CircleError::SingularPoint));
    }

    #[test]
    fn real_solution_examples() {
        let sys = reference();
        let x = find_nonsingular_real(&sys).unwrap();
        // For (1,1,1,1,-1,-1,-2): θ = φ = 1 gives (2,0,1,1,2,0,1).
        assert_eq!(
            x,
            vec![2.0, 0.0, 1.0, 1.0, 2.0, 0.0, 1.0],
            "expected the canonical perturbed solution"
        );
        let degenerate = DiagonalSystem::new(vec![1, 1, 1, 1, 1, 1, -6], false).unwrap();
        assert_eq!(
            find_nonsingular_real(&degenerate),
            Err(CircleError::SignConditionViolated)
        );
    }

    #[test]
    fn integral_routes_cross_validate() {
        let sys = reference();
        let mc = singular_integral_mc(&sys, 1 << 18, 42, 16.0);
        let quad = singular_integral_quadrature(&sys, 10.0, 60.0);
        assert!(mc.value > 0.0 && quad.value > 0.0);
        let gap = (mc.value - quad.value).abs();
        let budget = 2.0 * (mc.error + quad.error) + 0.02 * mc.value.abs();
        assert!(
            gap <= budget,
            "MC {} ± {} vs quadrature {} ± {}",
            mc.value,
            mc.error,
            quad.value,
            quad.error
        );
    }

    #[test]
    fn mc_reproducible() {
        let sys = reference();
        let a = singular_integral_mc(&sys, 1 << 16, 9, 16.0);
        let b = singular_integral_mc(&sys, 1 << 16, 9, 16.0);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
