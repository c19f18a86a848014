//! Exact integer combinatorics: the three-fold representation table `R(m)`,
//! weighted variants, moment sums, divisor-bound checks, and exact solution
//! counting by dynamic-programming convolution over the signed
//! (linear, quadratic) lattice.

use crate::systems::{DiagonalSystem, SubsetWindow};
use num_bigint::BigUint;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::ops::ControlFlow;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepresentError {
    #[error("capacity exceeded: {what} = {got}, cap {cap}")]
    CapacityExceeded {
        what: &'static str,
        got: u128,
        cap: u128,
    },
    #[error("weight at n={n} has magnitude {magnitude}, above 1")]
    WeightOutOfRange { n: usize, magnitude: f64 },
    #[error("divisor bound violated at m=({m1},{m2}): R={count}, bound {bound}")]
    InvariantViolated {
        m1: i64,
        m2: i64,
        count: u32,
        bound: u32,
    },
}

/// Cap for materializing the full row structure of `R`.
pub const DEFAULT_TABLE_CAP: u64 = 256;
/// Cap for streaming scans over the rows of `R`.
pub const DEFAULT_SCAN_CAP: u64 = 1200;
/// Cap for the exact-counting DP window.
pub const DEFAULT_DP_CAP: u64 = 64;
/// Cap for the inclusion-exclusion nontrivial count.
pub const DEFAULT_NONTRIVIAL_CAP: u64 = 24;

// ---------------------------------------------------------------------------
// Row enumeration for R(m₁, m₂) = #{y ≤ N : Σyᵢ = m₁, Σyᵢ² = m₂}
// ---------------------------------------------------------------------------

/// Bounds of the nonzero `m₂`-range of row `m₁` (inclusive).
fn row_bounds(n: u64, m1: i64) -> (i64, i64) {
    let lo = (m1 * m1 + 2) / 3; // ceil(m₁²/3)
    // Greedy extreme point maximizes Σy² for fixed sum on [1,N]³.
    let y1 = (n as i64).min(m1 - 2);
    let y2 = (n as i64).min(m1 - y1 - 1);
    let y3 = m1 - y1 - y2;
    let hi = y1 * y1 + y2 * y2 + y3 * y3;
    (lo, hi)
}

/// Fill `buf` (reused between rows) with row `m₁` of `R`; returns the row
/// offset `lo` such that `buf[i]` counts triples with `m₂ = lo + i`.
fn fill_row(n: u64, m1: i64, buf: &mut Vec<u32>) -> i64 {
    let (lo, hi) = row_bounds(n, m1);
    buf.clear();
    buf.resize((hi - lo + 1) as usize, 0);
    let n = n as i64;
    let y1_lo = 1.max(m1 - 2 * n);
    let y1_hi = n.min(m1 - 2);
    for y1 in y1_lo..=y1_hi {
        let rest = m1 - y1;
        let y2_lo = 1.max(rest - n);
        let y2_hi = n.min(rest - 1);
        let y1sq = y1 * y1;
        for y2 in y2_lo..=y2_hi {
            let y3 = rest - y2;
            let m2 = y1sq + y2 * y2 + y3 * y3;
            buf[(m2 - lo) as usize] += 1;
        }
    }
    lo
}

/// Map every row of `R` through `map` in parallel and reduce the images in
/// `m₁` order. Output is identical regardless of worker count.
pub fn map_reduce_rows<T, F, R>(n: u64, map: F, init: T, mut reduce: R) -> T
where
    T: Send,
    F: Fn(i64, i64, &[u32]) -> T + Sync,
    R: FnMut(T, T) -> T,
{
    let parts: Vec<T> = (3..=3 * n as i64)
        .into_par_iter()
        .map_init(Vec::new, |buf, m1| {
            let lo = fill_row(n, m1, buf);
            map(m1, lo, buf)
        })
        .collect();
    let mut acc = init;
    for p in parts {
        acc = reduce(acc, p);
    }
    acc
}

/// Dense-by-row representation table. Row `m₁` stores the contiguous nonzero
/// span of `m₂` values.
pub struct RepresentationTable {
    n: u64,
    rows: Vec<(i64, Vec<u32>)>,
    total: u128,
}

impl RepresentationTable {
    pub fn build(n: u64) -> Result<Self, RepresentError> {
        Self::build_with_cap(n, DEFAULT_TABLE_CAP)
    }

    pub fn build_with_cap(n: u64, cap: u64) -> Result<Self, RepresentError> {
        if n > cap {
            return Err(RepresentError::CapacityExceeded {
                what: "representation table N",
                got: n as u128,
                cap: cap as u128,
            });
        }
        let rows: Vec<(i64, Vec<u32>)> = (3..=3 * n as i64)
            .into_par_iter()
            .map(|m1| {
                let mut buf = Vec::new();
                let lo = fill_row(n, m1, &mut buf);
                (lo, buf)
            })
            .collect();
        let total = rows
            .iter()
            .map(|(_, r)| r.iter().map(|&c| c as u128).sum::<u128>())
            .sum();
        Ok(RepresentationTable { n, rows, total })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Σ_m R(m); equals N³ exactly.
    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn get(&self, m1: i64, m2: i64) -> u32 {
        if m1 < 3 || m1 > 3 * self.n as i64 {
            return 0;
        }
        let (lo, row) = &self.rows[(m1 - 3) as usize];
        if m2 < *lo || m2 >= lo + row.len() as i64 {
            0
        } else {
            row[(m2 - lo) as usize]
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = (i64, i64, &[u32])> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, (lo, row))| (i as i64 + 3, *lo, row.as_slice()))
    }

    /// Nonzero entries as `(m1, m2, count)`.
    pub fn entries(&self) -> impl Iterator<Item = (i64, i64, u32)> + '_ {
        self.rows().flat_map(|(m1, lo, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(move |(i, &c)| (m1, lo + i as i64, c))
        })
    }

    pub fn moment(&self, k: u32) -> BigUint {
        moment_from_rows(self.rows().map(|(_, _, r)| r), k)
    }
}

fn moment_from_rows<'a>(rows: impl Iterator<Item = &'a [u32]>, k: u32) -> BigUint {
    let mut acc = BigUint::from(0u32);
    let mut partial: u128 = 0;
    for row in rows {
        for &c in row {
            if c == 0 {
                continue;
            }
            match (c as u128).checked_pow(k) {
                Some(p) => match partial.checked_add(p) {
                    Some(s) => partial = s,
                    None => {
                        acc += BigUint::from(partial);
                        partial = p;
                    }
                },
                None => {
                    acc += BigUint::from(c).pow(k);
                }
            }
        }
    }
    acc + BigUint::from(partial)
}

/// Σ_m R(m) without materializing the table.
pub fn representation_mass(n: u64) -> Result<u128, RepresentError> {
    scan_guard(n)?;
    Ok(map_reduce_rows(
        n,
        |_, _, row| row.iter().map(|&c| c as u128).sum::<u128>(),
        0u128,
        |a, b| a + b,
    ))
}

/// Σ_m R(m)^k by streaming row enumeration.
pub fn moment_sum(n: u64, k: u32) -> Result<BigUint, RepresentError> {
    scan_guard(n)?;
    Ok(map_reduce_rows(
        n,
        move |_, _, row| moment_from_rows(std::iter::once(row), k),
        BigUint::from(0u32),
        |a, b| a + b,
    ))
}

fn scan_guard(n: u64) -> Result<(), RepresentError> {
    if n > DEFAULT_SCAN_CAP {
        return Err(RepresentError::CapacityExceeded {
            what: "representation scan N",
            got: n as u128,
            cap: DEFAULT_SCAN_CAP as u128,
        });
    }
    Ok(())
}

/// Result of the per-entry divisor-bound verification.
#[derive(Debug, Clone)]
pub struct DivisorReport {
    pub n: u64,
    pub max_ratio: f64,
    pub worst: (i64, i64, u32),
    pub stripe_max: u32,
    pub entries_checked: u128,
}

/// Number of divisors via a smallest-prime-factor sieve.
struct DivisorSieve {
    spf: Vec<u32>,
}

impl DivisorSieve {
    fn new(limit: usize) -> Self {
        let mut spf = vec![0u32; limit + 1];
        for i in 2..=limit {
            if spf[i] == 0 {
                let mut j = i;
                while j <= limit {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        DivisorSieve { spf }
    }

    fn tau(&self, mut v: u64) -> u32 {
        debug_assert!(v >= 1 && (v as usize) < self.spf.len());
        let mut tau = 1u32;
        while v > 1 {
            let p = self.spf[v as usize] as u64;
            let mut e = 0;
            while v % p == 0 {
                v /= p;
                e += 1;
            }
            tau *= e + 1;
        }
        tau
    }
}

/// Verify `R(m) ≤ 9·τ(3m₂ - m₁²)` for all entries off the degenerate stripe
/// and `R(m) ≤ 1` on it; returns the maximal observed ratio `R/τ`.
pub fn divisor_bound_check(n: u64) -> Result<DivisorReport, RepresentError> {
    scan_guard(n)?;
    let sieve = DivisorSieve::new((9 * n * n) as usize);
    struct Part {
        max_ratio: f64,
        worst: (i64, i64, u32),
        stripe_max: u32,
        entries: u128,
        violation: Option<RepresentError>,
    }
    let zero = Part {
        max_ratio: 0.0,
        worst: (0, 0, 0),
        stripe_max: 0,
        entries: 0,
        violation: None,
    };
    let out = map_reduce_rows(
        n,
        |m1, lo, row| {
            let mut part = Part {
                max_ratio: 0.0,
                worst: (0, 0, 0),
                stripe_max: 0,
                entries: 0,
                violation: None,
            };
            for (i, &c) in row.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                part.entries += 1;
                let m2 = lo + i as i64;
                let d = 3 * m2 - m1 * m1;
                if d == 0 {
                    part.stripe_max = part.stripe_max.max(c);
                    if c > 1 && part.violation.is_none() {
                        part.violation = Some(RepresentError::InvariantViolated {
                            m1,
                            m2,
                            count: c,
                            bound: 1,
                        });
                    }
                } else {
                    let tau = sieve.tau(d as u64);
                    let ratio = c as f64 / tau as f64;
                    if ratio > part.max_ratio {
                        part.max_ratio = ratio;
                        part.worst = (m1, m2, c);
                    }
                    if c > 9 * tau && part.violation.is_none() {
                        part.violation = Some(RepresentError::InvariantViolated {
                            m1,
                            m2,
                            count: c,
                            bound: 9 * tau,
                        });
                    }
                }
            }
            part
        },
        zero,
        |mut a, b| {
            if b.max_ratio > a.max_ratio {
                a.max_ratio = b.max_ratio;
                a.worst = b.worst;
            }
            a.stripe_max = a.stripe_max.max(b.stripe_max);
            a.entries += b.entries;
            a.violation = a.violation.or(b.violation);
            a
        },
    );
    if let Some(v) = out.violation {
        return Err(v);
    }
    Ok(DivisorReport {
        n,
        max_ratio: out.max_ratio,
        worst: out.worst,
        stripe_max: out.stripe_max,
        entries_checked: out.entries,
    })
}

/// Complex-weighted representation table:
/// entry(m) = Σ_{triples → m} g(x₁)g(x₂)g(x₃), for |g| ≤ 1.
pub fn weighted_table(
    g: &[Complex64],
    n: u64,
) -> Result<HashMap<(i64, i64), Complex64>, RepresentError> {
    assert_eq!(g.len(), n as usize);
    for (i, w) in g.iter().enumerate() {
        if w.norm() > 1.0 + 1e-12 {
            return Err(RepresentError::WeightOutOfRange {
                n: i + 1,
                magnitude: w.norm(),
            });
        }
    }
    if n > 128 {
        return Err(RepresentError::CapacityExceeded {
            what: "weighted table N",
            got: n as u128,
            cap: 128,
        });
    }
    let mut map = HashMap::new();
    let ni = n as i64;
    for x1 in 1..=ni {
        for x2 in 1..=ni {
            let g12 = g[(x1 - 1) as usize] * g[(x2 - 1) as usize];
            if g12.norm_sqr() == 0.0 {
                continue;
            }
            for x3 in 1..=ni {
                let w = g12 * g[(x3 - 1) as usize];
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                let key = (x1 + x2 + x3, x1 * x1 + x2 * x2 + x3 * x3);
                *map.entry(key).or_insert(Complex64::new(0.0, 0.0)) += w;
            }
        }
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// Exact solution counting over the signed (linear, quadratic) lattice
// ---------------------------------------------------------------------------

/// Dense table of tuple counts indexed by the signed pair
/// `(Σλᵢxᵢ, Σλᵢxᵢ²)` of partial sums. After all `s` convolution steps the
/// entry at `(0,0)` is the exact solution count.
pub struct SignedCountTable {
    pub lin_lo: i64,
    pub lin_hi: i64,
    pub quad_lo: i64,
    pub quad_hi: i64,
    data: Vec<u64>,
}

impl SignedCountTable {
    fn qspan(&self) -> usize {
        (self.quad_hi - self.quad_lo + 1) as usize
    }

    pub fn get(&self, lin: i64, quad: i64) -> u64 {
        if lin < self.lin_lo || lin > self.lin_hi || quad < self.quad_lo || quad > self.quad_hi {
            return 0;
        }
        let q = self.qspan();
        self.data[(lin - self.lin_lo) as usize * q + (quad - self.quad_lo) as usize]
    }

    pub fn at_origin(&self) -> u64 {
        self.get(0, 0)
    }
}

const DP_CELL_CAP: u128 = 80_000_000;

/// The admissible values of one variable (window members or `1..=N`).
fn variable_values(n: u64, a: Option<&SubsetWindow>) -> Vec<i64> {
    match a {
        Some(w) => w.iter().map(|v| v as i64).collect(),
        None => (1..=n as i64).collect(),
    }
}

/// Bounds of `λ·x` and `λ·x²` over the value set.
fn contribution_bounds(lambda: i64, values: &[i64]) -> ((i64, i64), (i64, i64)) {
    let xmin = *values.first().unwrap();
    let xmax = *values.last().unwrap();
    let lin = if lambda > 0 {
        (lambda * xmin, lambda * xmax)
    } else {
        (lambda * xmax, lambda * xmin)
    };
    let quad = if lambda > 0 {
        (lambda * xmin * xmin, lambda * xmax * xmax)
    } else {
        (lambda * xmax * xmax, lambda * xmin * xmin)
    };
    (lin, quad)
}

/// Run the full DP and return the prefix tables (one per processed variable,
/// in the processing order), the processing order itself, and the value set.
fn dp_tables(
    sys: &DiagonalSystem,
    n: u64,
    a: Option<&SubsetWindow>,
    cap: u64,
) -> Result<(Vec<SignedCountTable>, Vec<usize>, Vec<i64>), RepresentError> {
    if n > cap {
        return Err(RepresentError::CapacityExceeded {
            what: "DP window N",
            got: n as u128,
            cap: cap as u128,
        });
    }
    let values = variable_values(n, a);
    // Convolution order: |λ| descending keeps intermediate support small.
    let mut order: Vec<usize> = (0..sys.s()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(sys.lambdas()[i].abs()));
    let tables = dp_tables_in_order(sys.lambdas(), &values, &order)?;
    Ok((tables, order, values))
}

fn dp_tables_in_order(
    lambdas: &[i64],
    values: &[i64],
    order: &[usize],
) -> Result<Vec<SignedCountTable>, RepresentError> {
    if values.is_empty() {
        // Empty window: a single all-zero table makes every count zero.
        return Ok(vec![SignedCountTable {
            lin_lo: 0,
            lin_hi: 0,
            quad_lo: 0,
            quad_hi: 0,
            data: vec![0],
        }]);
    }
    // Counts can reach |X|^s; keep u64 arithmetic overflow-free.
    let count_bits = (values.len() as f64).log2() * order.len() as f64;
    if count_bits > 62.0 {
        return Err(RepresentError::CapacityExceeded {
            what: "DP count bits",
            got: count_bits as u128,
            cap: 62,
        });
    }

    let mut tables = Vec::with_capacity(order.len() + 1);
    tables.push(SignedCountTable {
        lin_lo: 0,
        lin_hi: 0,
        quad_lo: 0,
        quad_hi: 0,
        data: vec![1],
    });

    let (mut lin_lo, mut lin_hi, mut quad_lo, mut quad_hi) = (0i64, 0i64, 0i64, 0i64);
    for &vi in order {
        let lambda = lambdas[vi];
        let ((llo, lhi), (qlo, qhi)) = contribution_bounds(lambda, values);
        lin_lo += llo;
        lin_hi += lhi;
        quad_lo += qlo;
        quad_hi += qhi;
        let lspan = (lin_hi - lin_lo + 1) as u128;
        let qspan = (quad_hi - quad_lo + 1) as u128;
        if lspan * qspan > DP_CELL_CAP {
            return Err(RepresentError::CapacityExceeded {
                what: "DP lattice cells",
                got: lspan * qspan,
                cap: DP_CELL_CAP,
            });
        }
        let src = tables.last().unwrap();
        let qspan_dst = qspan as usize;
        let mut data = vec![0u64; (lspan as usize) * qspan_dst];
        // Gather form: each destination row is filled independently, so the
        // parallel fill is deterministic for any worker count.
        data.par_chunks_mut(qspan_dst)
            .enumerate()
            .for_each(|(row, dst)| {
                let dst_lin = lin_lo + row as i64;
                let src_qspan = src.qspan();
                for &x in values {
                    let src_lin = dst_lin - lambda * x;
                    if src_lin < src.lin_lo || src_lin > src.lin_hi {
                        continue;
                    }
                    let quad_off = lambda * x * x;
                    let src_row = (src_lin - src.lin_lo) as usize * src_qspan;
                    let src_slice = &src.data[src_row..src_row + src_qspan];
                    let base = src.quad_lo + quad_off - quad_lo;
                    debug_assert!(base >= 0 && base as usize + src_slice.len() <= dst.len());
                    let dst_slice = &mut dst[base as usize..base as usize + src_slice.len()];
                    for (d, s) in dst_slice.iter_mut().zip(src_slice) {
                        *d += s;
                    }
                }
            });
        tables.push(SignedCountTable {
            lin_lo,
            lin_hi,
            quad_lo,
            quad_hi,
            data,
        });
    }
    Ok(tables)
}

/// Exact `Z(N)` (or `Z_A(N)`): the number of s-tuples from the window that
/// satisfy both equations.
pub fn count_solutions(
    sys: &DiagonalSystem,
    n: u64,
    a: Option<&SubsetWindow>,
) -> Result<u128, RepresentError> {
    count_solutions_capped(sys, n, a, DEFAULT_DP_CAP)
}

pub fn count_solutions_capped(
    sys: &DiagonalSystem,
    n: u64,
    a: Option<&SubsetWindow>,
    cap: u64,
) -> Result<u128, RepresentError> {
    let (tables, _, _) = dp_tables(sys, n, a, cap)?;
    Ok(tables.last().unwrap().at_origin() as u128)
}

/// The final DP table, exposed for inspection.
pub fn count_table(
    sys: &DiagonalSystem,
    n: u64,
    a: Option<&SubsetWindow>,
) -> Result<SignedCountTable, RepresentError> {
    let (mut tables, _, _) = dp_tables(sys, n, a, DEFAULT_DP_CAP)?;
    Ok(tables.pop().unwrap())
}

/// Visit solutions one by one (lexicographically in the internal variable
/// order) by walking the DP tables backwards. The visitor sees tuples in
/// original coordinate order and can stop early.
pub fn for_each_solution(
    sys: &DiagonalSystem,
    n: u64,
    a: Option<&SubsetWindow>,
    cap: u64,
    mut visit: impl FnMut(&[i64]) -> ControlFlow<()>,
) -> Result<(), RepresentError> {
    let (tables, order, values) = dp_tables(sys, n, a, cap)?;
    if tables.last().unwrap().at_origin() == 0 {
        return Ok(());
    }

    fn walk(
        lambdas: &[i64],
        tables: &[SignedCountTable],
        order: &[usize],
        values: &[i64],
        depth: usize,
        lin: i64,
        quad: i64,
        x: &mut [i64],
        visit: &mut impl FnMut(&[i64]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if depth == 0 {
            debug_assert!(lin == 0 && quad == 0);
            return visit(x);
        }
        let vi = order[depth - 1];
        let lambda = lambdas[vi];
        for &v in values {
            let l = lin - lambda * v;
            let q = quad - lambda * v * v;
            if tables[depth - 1].get(l, q) > 0 {
                x[vi] = v;
                walk(lambdas, tables, order, values, depth - 1, l, q, x, visit)?;
            }
        }
        ControlFlow::Continue(())
    }

    let mut x = vec![0i64; order.len()];
    let _ = walk(
        sys.lambdas(),
        &tables,
        &order,
        &values,
        order.len(),
        0,
        0,
        &mut x,
        &mut visit,
    );
    Ok(())
}

/// First solution with pairwise-distinct coordinates, if any.
pub fn find_nontrivial_solution(
    sys: &DiagonalSystem,
    n: u64,
    a: Option<&SubsetWindow>,
    cap: u64,
) -> Result<Option<Vec<i64>>, RepresentError> {
    let mut found = None;
    for_each_solution(sys, n, a, cap, |x| {
        if !crate::systems::is_trivial(x) {
            found = Some(x.to_vec());
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(found)
}

// ---------------------------------------------------------------------------
// Nontrivial counting by Möbius inversion over coincidence patterns
// ---------------------------------------------------------------------------

fn factorial(k: usize) -> i128 {
    (1..=k as i128).product::<i128>().max(1)
}

/// Enumerate set partitions of `{0..s-1}` as restricted-growth strings.
fn for_each_partition(s: usize, mut f: impl FnMut(&[usize], usize)) {
    fn rec(assign: &mut Vec<usize>, i: usize, blocks: usize, f: &mut impl FnMut(&[usize], usize)) {
        let s = assign.len();
        if i == s {
            f(assign, blocks);
            return;
        }
        for b in 0..=blocks {
            assign[i] = b;
            rec(assign, i + 1, blocks.max(b + 1), f);
        }
    }
    let mut assign = vec![0usize; s];
    if s == 0 {
        return;
    }
    rec(&mut assign, 1, 1, &mut f);
}

/// Exact count of solutions with all coordinates pairwise distinct, by
/// Möbius-weighted inclusion-exclusion over coordinate-coincidence patterns.
/// Each pattern reduces to a smaller DP with merged coefficients; identical
/// merged systems are evaluated once. Blocks whose coefficients cancel leave
/// a free variable and contribute a factor |X|.
pub fn count_nontrivial(
    sys: &DiagonalSystem,
    n: u64,
    a: Option<&SubsetWindow>,
) -> Result<u128, RepresentError> {
    count_nontrivial_capped(sys, n, a, DEFAULT_NONTRIVIAL_CAP)
}

pub fn count_nontrivial_capped(
    sys: &DiagonalSystem,
    n: u64,
    a: Option<&SubsetWindow>,
    cap: u64,
) -> Result<u128, RepresentError> {
    if n > cap {
        return Err(RepresentError::CapacityExceeded {
            what: "nontrivial count N",
            got: n as u128,
            cap: cap as u128,
        });
    }
    let s = sys.s();
    let values = variable_values(n, a);
    if values.is_empty() {
        return Ok(0);
    }

    let mut grouped: HashMap<(Vec<i64>, usize), i128> = HashMap::new();
    for_each_partition(s, |assign, blocks| {
        let mut merged = vec![0i64; blocks];
        let mut sizes = vec![0usize; blocks];
        for (i, &b) in assign.iter().enumerate() {
            merged[b] += sys.lambdas()[i];
            sizes[b] += 1;
        }
        let mut mobius: i128 = 1;
        for &sz in &sizes {
            let f = factorial(sz - 1);
            mobius *= if sz % 2 == 0 { -f } else { f };
        }
        let mut nonzero: Vec<i64> = merged.iter().copied().filter(|&l| l != 0).collect();
        let zeros = blocks - nonzero.len();
        nonzero.sort_unstable();
        *grouped.entry((nonzero, zeros)).or_insert(0) += mobius;
    });

    let jobs: Vec<((Vec<i64>, usize), i128)> = {
        let mut v: Vec<_> = grouped.into_iter().collect();
        v.sort();
        v
    };
    let free_factor = values.len() as i128;
    let terms: Vec<Result<i128, RepresentError>> = jobs
        .par_iter()
        .map(|((nonzero, zeros), coeff)| {
            let z = if nonzero.is_empty() {
                1i128
            } else {
                let order: Vec<usize> = (0..nonzero.len()).collect();
                let tables = dp_tables_in_order(nonzero, &values, &order)?;
                tables.last().unwrap().at_origin() as i128
            };
            let factor = free_factor.pow(*zeros as u32);
            Ok(coeff * z * factor)
        })
        .collect();
    let mut total: i128 = 0;
    for t in terms {
        total += t?;
    }
    debug_assert!(total >= 0, "inclusion-exclusion must be nonnegative");
    Ok(total.max(0) as u128)
}

/// Brute-force enumeration over all |X|^s tuples; the independent oracle for
/// small windows. Returns `(total, nontrivial)`.
pub fn brute_force_counts(
    sys: &DiagonalSystem,
    n: u64,
    a: Option<&SubsetWindow>,
) -> Result<(u128, u128), RepresentError> {
    let values = variable_values(n, a);
    let s = sys.s();
    let size = (values.len() as u128)
        .checked_pow(s as u32)
        .unwrap_or(u128::MAX);
    if size > 200_000_000 {
        return Err(RepresentError::CapacityExceeded {
            what: "brute force tuples",
            got: size,
            cap: 200_000_000,
        });
    }
    if values.is_empty() {
        return Ok((0, 0));
    }
    let mut x = vec![values[0]; s];
    let mut idx = vec![0usize; s];
    let mut total = 0u128;
    let mut nontrivial = 0u128;
    loop {
        if sys.is_solution(&x).unwrap() {
            total += 1;
            if !crate::systems::is_trivial(&x) {
                nontrivial += 1;
            }
        }
        let mut d = s;
        loop {
            if d == 0 {
                return Ok((total, nontrivial));
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < values.len() {
                x[d] = values[idx[d]];
                break;
            }
            idx[d] = 0;
            x[d] = values[0];
        }
    }
}
