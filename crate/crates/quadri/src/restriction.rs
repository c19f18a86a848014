//! Torus-side numerics: L^p moments of weighted quadratic exponential sums
//! on Nyquist-oversampled grids, the dyadic major-arc decomposition of the
//! three-fold representation function, the analytic factor
//! `∫ψ(β)v(β)³e(-β·m)dβ`, the general weighted-sum inequality check, and the
//! one-dimensional rational-phase moment bound.

use crate::expsums::{unit_quad_fast, GaussCache, RationalPoint};
use crate::phase::e;
use crate::represent::{RepresentError, RepresentationTable};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RestrictionError {
    #[error("grid self-check failed: oversampled estimates differ by {rel_err} (> {allowed})")]
    GridTooCoarse { rel_err: f64, allowed: f64 },
    #[error("decomposition does not sum to the weight: max deviation {dev}")]
    DecompositionMismatch { dev: f64 },
    #[error("capacity exceeded: {what} = {got}, cap {cap}")]
    CapacityExceeded {
        what: &'static str,
        got: u128,
        cap: u128,
    },
    #[error(transparent)]
    Represent(#[from] RepresentError),
}

// ---------------------------------------------------------------------------
// FFT plumbing
// ---------------------------------------------------------------------------

/// In-place 2-D FFT of a row-major `rows × cols` array (row index is the
/// slow axis). `inverse = true` uses the `e^{+2πi}` convention, matching the
/// evaluation of an exponential sum at grid frequencies.
fn fft2(data: &mut Vec<Complex64>, rows: usize, cols: usize, inverse: bool) {
    assert_eq!(data.len(), rows * cols);
    let mut planner = FftPlanner::new();
    let dir = |len: usize, planner: &mut FftPlanner<f64>| {
        if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        }
    };
    let row_fft = dir(cols, &mut planner);
    let mut scratch = vec![Complex64::new(0.0, 0.0); row_fft.get_inplace_scratch_len()];
    for row in data.chunks_mut(cols) {
        row_fft.process_with_scratch(row, &mut scratch);
    }
    // Columns: transpose, FFT rows, transpose back.
    let mut t = vec![Complex64::new(0.0, 0.0); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = data[r * cols + c];
        }
    }
    let col_fft = dir(rows, &mut planner);
    let mut scratch = vec![Complex64::new(0.0, 0.0); col_fft.get_inplace_scratch_len()];
    for row in t.chunks_mut(rows) {
        col_fft.process_with_scratch(row, &mut scratch);
    }
    for c in 0..cols {
        for r in 0..rows {
            data[r * cols + c] = t[c * rows + r];
        }
    }
}

// ---------------------------------------------------------------------------
// Moment grids
// ---------------------------------------------------------------------------

/// Values of `V_g` on the uniform grid `(j₁/G₁, j₂/G₂)` with
/// `G₁ = c₁·3N`, `G₂ = c₂·3N²`, obtained from one zero-padded 2-D transform
/// of the weight sequence placed at the lattice sites `(n, n²)`.
pub struct MomentGrid {
    pub n: u64,
    pub g1: usize,
    pub g2: usize,
    /// Row-major `[j₂][j₁]`.
    pub values: Vec<Complex64>,
}

pub fn build_moment_grid(g: &[Complex64], n: u64, c1: usize, c2: usize) -> MomentGrid {
    assert_eq!(g.len(), n as usize);
    assert!(c1 >= 1 && c2 >= 1);
    let g1 = c1 * 3 * n as usize;
    let g2 = c2 * 3 * (n * n) as usize;
    let mut values = vec![Complex64::new(0.0, 0.0); g1 * g2];
    for (i, w) in g.iter().enumerate() {
        let n0 = i + 1;
        let col = n0 % g1;
        let row = (n0 * n0) % g2;
        values[row * g1 + col] += w;
    }
    fft2(&mut values, g2, g1, true);
    MomentGrid { n, g1, g2, values }
}

impl MomentGrid {
    /// Riemann estimate of `∫|V_g|^p` over the full grid.
    pub fn mean_abs_pow(&self, p: f64) -> f64 {
        mean_abs_pow_strided(&self.values, self.g1, self.g2, p, 1, 1)
    }

    /// The same估 on the stride-2 subgrid, which is exactly the grid at
    /// half the oversampling factors.
    pub fn mean_abs_pow_coarse(&self, p: f64) -> f64 {
        mean_abs_pow_strided(&self.values, self.g1, self.g2, p, 2, 2)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.norm_sqr())
            .fold(0.0f64, f64::max)
            .sqrt()
    }

    pub fn mean_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / (self.g1 * self.g2) as f64
    }
}

fn mean_abs_pow_strided(
    values: &[Complex64],
    g1: usize,
    g2: usize,
    p: f64,
    s1: usize,
    s2: usize,
) -> f64 {
    let rows: Vec<f64> = (0..g2 / s2)
        .into_par_iter()
        .map(|r| {
            let row = &values[(r * s2) * g1..(r * s2 + 1) * g1];
            let mut acc = 0.0;
            let mut c = 0;
            while c < g1 {
                acc += row[c].norm_sqr().powf(p / 2.0);
                c += s1;
            }
            acc
        })
        .collect();
    rows.iter().sum::<f64>() / ((g1 / s1) * (g2 / s2)) as f64
}

#[derive(Debug, Clone)]
pub struct LpMoment {
    pub value: f64,
    pub self_err: f64,
    pub g1: usize,
    pub g2: usize,
}

/// `∫_{T²}|V_g(α)|^p dα` by Nyquist-oversampled Riemann sums with a
/// self-convergence certificate: the estimate at oversampling `(c₁,c₂)` must
/// agree with `(2c₁,2c₂)` within 2%.
pub fn lp_moment(
    g: &[Complex64],
    n: u64,
    p: f64,
    c1: usize,
    c2: usize,
) -> Result<LpMoment, RestrictionError> {
    let cells = (2 * c1 * 3 * n as usize) as u128 * (2 * c2 * 3 * (n * n) as usize) as u128;
    if cells > 40_000_000 {
        return Err(RestrictionError::CapacityExceeded {
            what: "moment grid cells",
            got: cells,
            cap: 40_000_000,
        });
    }
    let grid = build_moment_grid(g, n, 2 * c1, 2 * c2);
    let fine = grid.mean_abs_pow(p);
    let coarse = grid.mean_abs_pow_coarse(p);
    let rel_err = (fine - coarse).abs() / fine.abs().max(1e-300);
    if rel_err > 0.02 {
        return Err(RestrictionError::GridTooCoarse {
            rel_err,
            allowed: 0.02,
        });
    }
    Ok(LpMoment {
        value: fine,
        self_err: rel_err,
        g1: grid.g1,
        g2: grid.g2,
    })
}

/// Exact lattice-count oracle for the p = 8 moment:
/// `∫|V_g|⁸ = Σ_m |r₄(m)|²` with `r₄` the 4-fold weighted representation
/// function, built by convolving the 2-fold table with itself.
pub fn moment8_exact(g: &[Complex64], n: u64) -> f64 {
    let mut pairs: HashMap<(i64, i64), Complex64> = HashMap::new();
    let ni = n as i64;
    for x1 in 1..=ni {
        for x2 in 1..=ni {
            let w = g[(x1 - 1) as usize] * g[(x2 - 1) as usize];
            *pairs
                .entry((x1 + x2, x1 * x1 + x2 * x2))
                .or_insert(Complex64::new(0.0, 0.0)) += w;
        }
    }
    let entries: Vec<((i64, i64), Complex64)> = pairs.into_iter().collect();
    let mut four: HashMap<(i64, i64), Complex64> = HashMap::new();
    for (ka, va) in &entries {
        for (kb, vb) in &entries {
            *four
                .entry((ka.0 + kb.0, ka.1 + kb.1))
                .or_insert(Complex64::new(0.0, 0.0)) += va * vb;
        }
    }
    four.values().map(|v| v.norm_sqr()).sum()
}

// ---------------------------------------------------------------------------
// Analytic factor
// ---------------------------------------------------------------------------

const GL7_NODES: [f64; 7] = [
    -0.9491079123427585,
    -0.7415311855993945,
    -0.4058451513773972,
    0.0,
    0.4058451513773972,
    0.7415311855993945,
    0.9491079123427585,
];
const GL7_WEIGHTS: [f64; 7] = [
    0.1294849661688697,
    0.2797053914892766,
    0.3818300505051189,
    0.4179591836734694,
    0.3818300505051189,
    0.2797053914892766,
    0.1294849661688697,
];

/// Tent cutoff in unscaled (`b = β·Nⁱ`) coordinates: no mod-1 reduction.
fn psi_raw(b: f64, p: f64) -> f64 {
    let tent = |x: f64| (1.0 - x.abs()).max(0.0);
    2.0 * tent(b / (2.0 * p)) - tent(b / p)
}

fn gl_axis(range_lo: f64, range_hi: f64, cycles: f64, density: f64) -> (Vec<f64>, Vec<f64>) {
    let panels = ((cycles * density).ceil() as usize).max(4);
    let h = (range_hi - range_lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * 7);
    let mut weights = Vec::with_capacity(panels * 7);
    for p in 0..panels {
        let mid = range_lo + (p as f64 + 0.5) * h;
        for (x, w) in GL7_NODES.iter().zip(GL7_WEIGHTS) {
            nodes.push(mid + 0.5 * h * x);
            weights.push(w * 0.5 * h);
        }
    }
    (nodes, weights)
}

/// `∫ ψ(β) v(β)³ e(-β·m) dβ` over the support of `ψ`, for a batch of `m`,
/// by shared oscillation-matched panel quadrature in the rescaled variables
/// `b = (β₁N, β₂N²)`, where the integrand is N-free. `density` is the panel
/// count per oscillation cycle (2 is the working default, 4 the oracle).
pub fn analytic_factor_batch(
    ms: &[(i64, i64)],
    n: u64,
    q: u64,
    density: f64,
) -> Vec<Complex64> {
    let nf = n as f64;
    let qf = q as f64;
    let mt: Vec<(f64, f64)> = ms
        .iter()
        .map(|&(m1, m2)| (m1 as f64 / nf, m2 as f64 / (nf * nf)))
        .collect();
    let max_m1 = mt.iter().map(|m| m.0.abs()).fold(0.0f64, f64::max);
    let max_m2 = mt.iter().map(|m| m.1.abs()).fold(0.0f64, f64::max);
    // Frequencies: e(-b·m̃) contributes |m̃|, v₁³ at most 3 (t ≤ 1) in b₁ and
    // 3 (t² ≤ 1) in b₂, per unit of b.
    let cyc1 = 4.0 * qf * (max_m1 + 3.0);
    let cyc2 = 4.0 * qf * qf * (max_m2 + 3.0);
    let (b1, w1) = gl_axis(-2.0 * qf, 2.0 * qf, cyc1, density);
    let (b2, w2) = gl_axis(-2.0 * qf * qf, 2.0 * qf * qf, cyc2, density);

    // Per-m phase vectors along the inner (b₂) axis.
    let ph2: Vec<Vec<Complex64>> = mt
        .par_iter()
        .map(|&(_, m2)| {
            b2.iter()
                .map(|&b| e((-b * m2).rem_euclid(1.0)))
                .collect()
        })
        .collect();

    let psi2: Vec<f64> = b2.iter().map(|&b| psi_raw(b, qf * qf)).collect();

    let row_results: Vec<Vec<Complex64>> = (0..b1.len())
        .into_par_iter()
        .map(|i| {
            let bb1 = b1[i];
            let p1 = psi_raw(bb1, qf) * w1[i];
            let mut out = vec![Complex64::new(0.0, 0.0); mt.len()];
            if p1 == 0.0 {
                return out;
            }
            // F row: w₂ ψ v₁³ along b₂.
            let mut row = vec![Complex64::new(0.0, 0.0); b2.len()];
            for (j, slot) in row.iter_mut().enumerate() {
                if psi2[j] == 0.0 {
                    continue;
                }
                let v = unit_quad_fast(bb1, b2[j]);
                *slot = v * v * v * (psi2[j] * w2[j] * p1);
            }
            for (mi, &(m1, _)) in mt.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, r) in row.iter().enumerate() {
                    if r.re != 0.0 || r.im != 0.0 {
                        acc += r * ph2[mi][j];
                    }
                }
                out[mi] = acc * e((-bb1 * m1).rem_euclid(1.0));
            }
            out
        })
        .collect();

    let mut acc = vec![Complex64::new(0.0, 0.0); mt.len()];
    for row in row_results {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    acc
}

/// Single-point analytic factor at the default working density.
pub fn analytic_factor(m1: i64, m2: i64, n: u64, q: u64) -> Complex64 {
    analytic_factor_batch(&[(m1, m2)], n, q, 2.0)[0]
}

// ---------------------------------------------------------------------------
// Lattice-wide tables and the dyadic decomposition
// ---------------------------------------------------------------------------

/// Dense complex table over the full `m`-lattice `1 ≤ m₁ ≤ 3N`,
/// `1 ≤ m₂ ≤ 3N²`.
pub struct Lattice {
    pub n: u64,
    pub m2_span: usize,
    pub values: Vec<Complex64>,
}

impl Lattice {
    pub fn zeros(n: u64) -> Self {
        let m2_span = 3 * (n * n) as usize;
        Lattice {
            n,
            m2_span,
            values: vec![Complex64::new(0.0, 0.0); 3 * n as usize * m2_span],
        }
    }

    pub fn get(&self, m1: i64, m2: i64) -> Complex64 {
        let m2_span = self.m2_span as i64;
        if m1 < 1 || m1 > 3 * self.n as i64 || m2 < 1 || m2 > m2_span {
            return Complex64::new(0.0, 0.0);
        }
        self.values[((m1 - 1) * m2_span + (m2 - 1)) as usize]
    }

    pub fn sum_abs_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `Σ_m |value(m)|^{2k}`.
    pub fn moment2k(&self, k: u32) -> f64 {
        self.values
            .iter()
            .map(|v| v.norm_sqr().powi(k as i32))
            .sum()
    }
}

/// Analytic factor on the whole lattice through grid sampling of `ψ v³` and
/// one forward transform; aliasing error is at the percent level and is
/// spot-checked against the panel quadrature.
pub fn analytic_lattice(n: u64, q: u64) -> Result<Lattice, RestrictionError> {
    let (c1, c2) = (2usize, 2usize);
    let g1 = c1 * 3 * n as usize;
    let g2 = c2 * 3 * (n * n) as usize;
    if (g1 as u128) * (g2 as u128) > 40_000_000 {
        return Err(RestrictionError::CapacityExceeded {
            what: "analytic grid cells",
            got: (g1 as u128) * (g2 as u128),
            cap: 40_000_000,
        });
    }
    let nf = n as f64;
    let qf = q as f64;
    let mut data = vec![Complex64::new(0.0, 0.0); g1 * g2];
    let j1_rad = ((2.0 * qf / nf) * g1 as f64).ceil() as i64;
    let j2_rad = ((2.0 * qf * qf / (nf * nf)) * g2 as f64).ceil() as i64;
    for j2 in -j2_rad..=j2_rad {
        let beta2 = j2 as f64 / g2 as f64;
        let p2 = psi_raw(beta2 * nf * nf, qf * qf);
        if p2 == 0.0 {
            continue;
        }
        let row = j2.rem_euclid(g2 as i64) as usize;
        for j1 in -j1_rad..=j1_rad {
            let beta1 = j1 as f64 / g1 as f64;
            let p1 = psi_raw(beta1 * nf, qf);
            if p1 == 0.0 {
                continue;
            }
            let col = j1.rem_euclid(g1 as i64) as usize;
            let v = unit_quad_fast(beta1 * nf, beta2 * nf * nf);
            data[row * g1 + col] = v * v * v * (p1 * p2);
        }
    }
    fft2(&mut data, g2, g1, false);
    // v_N³ = N³ v₁³ and the Riemann cell has volume 1/(G₁G₂).
    let norm = nf * nf * nf / (g1 as f64 * g2 as f64);
    let mut out = Lattice::zeros(n);
    let m2_span = out.m2_span;
    for m1 in 1..=3 * n as usize {
        for m2 in 1..=m2_span {
            out.values[(m1 - 1) * m2_span + (m2 - 1)] =
                data[(m2 % g2) * g1 + (m1 % g1)] * norm;
        }
    }
    Ok(out)
}

/// One dyadic piece `R_Y` of the decomposition (or the remainder `R'`).
pub struct DecompositionPiece {
    pub y: u64,
    pub lattice: Lattice,
    pub remainder: bool,
}

pub struct Decomposition {
    pub n: u64,
    pub q: u64,
    pub d: u32,
    pub pieces: Vec<DecompositionPiece>,
    pub remainder: DecompositionPiece,
    pub analytic: Lattice,
}

/// Arithmetic factor table for one modulus:
/// `T_q[u][v] = q⁻³ Σ_{(a;q)=1} V(q,a)³ e_q(-(a₁u + a₂v))`.
fn arith_table(q: usize, cache: &GaussCache) -> Vec<Complex64> {
    let table = cache.table(q);
    let roots = crate::expsums::unit_roots(q);
    let qi = q as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); q * q];
    for a1 in 1..=qi {
        for a2 in 1..=qi {
            if !RationalPoint::new(a1, a2, qi).is_primitive() {
                continue;
            }
            let v3 = table.get(a1, a2).powi(3);
            for u in 0..qi {
                let base = (a1 * u).rem_euclid(qi);
                for v in 0..qi {
                    let expo = (base + a2 * v).rem_euclid(qi) as usize;
                    // e_q(-(a₁u + a₂v)) = conj(e_q(a₁u + a₂v))
                    out[(u * qi + v) as usize] += v3 * roots[expo].conj();
                }
            }
        }
    }
    let norm = 1.0 / (q as f64).powi(3);
    for slot in &mut out {
        *slot *= norm;
    }
    out
}

/// Build the dyadic decomposition `R = Σ_{Y∈J} R_Y + R'` at level `Q`, with
/// `J = {1, 2, 4, …, 2^D}` and `D = ⌊log₂Q⌋ + 1`.
pub fn build_decomposition(
    n: u64,
    q: u64,
    cache: &GaussCache,
) -> Result<Decomposition, RestrictionError> {
    if q > 32 {
        return Err(RestrictionError::CapacityExceeded {
            what: "decomposition Q",
            got: q as u128,
            cap: 32,
        });
    }
    let analytic = analytic_lattice(n, q)?;
    let d = (q as f64).log2().floor() as u32 + 1;
    let mut pieces = Vec::new();
    let exact = RepresentationTable::build(n)?;
    let mut sum = Lattice::zeros(n);
    for e in 0..=d {
        let y = 1u64 << e;
        let mut lat = Lattice::zeros(n);
        for qq in y..2 * y {
            let t = arith_table(qq as usize, cache);
            let qi = qq as usize;
            let m2_span = lat.m2_span;
            lat.values
                .par_chunks_mut(m2_span)
                .enumerate()
                .for_each(|(row, out)| {
                    let m1 = row as i64 + 1;
                    let u = (m1 as usize) % qi;
                    let trow = &t[u * qi..(u + 1) * qi];
                    for (idx, slot) in out.iter_mut().enumerate() {
                        let m2 = idx + 1;
                        *slot += trow[m2 % qi];
                    }
                });
        }
        for (slot, a) in lat.values.iter_mut().zip(&analytic.values) {
            *slot *= a;
        }
        for (s, v) in sum.values.iter_mut().zip(&lat.values) {
            *s += v;
        }
        pieces.push(DecompositionPiece {
            y,
            lattice: lat,
            remainder: false,
        });
    }
    // Remainder: exact R minus the dyadic pieces.
    let mut rem = Lattice::zeros(n);
    let m2_span = rem.m2_span;
    for (m1, lo, row) in exact.rows() {
        for (i, &c) in row.iter().enumerate() {
            let m2 = lo + i as i64;
            if m2 >= 1 && m2 <= m2_span as i64 {
                rem.values[((m1 - 1) * m2_span as i64 + (m2 - 1)) as usize] =
                    Complex64::new(c as f64, 0.0);
            }
        }
    }
    for (r, s) in rem.values.iter_mut().zip(&sum.values) {
        *r -= s;
    }
    Ok(Decomposition {
        n,
        q,
        d,
        pieces,
        remainder: DecompositionPiece {
            y: 0,
            lattice: rem,
            remainder: true,
        },
        analytic,
    })
}

/// Grid statistics of the exponential sum `W(α) = Σ_m table(m) e(α·m)`.
#[derive(Debug, Clone, Copy)]
pub struct WPieceStats {
    pub sup: f64,
    pub l2_sq: f64,
}

/// Evaluate `W` for a lattice table on the standard oversampled grid and
/// return its grid supremum and grid L² mass `∫|W|²`.
pub fn w_piece_stats(lattice: &Lattice) -> Result<WPieceStats, RestrictionError> {
    let n = lattice.n;
    let g1 = 2 * 3 * n as usize;
    let g2 = 2 * 3 * (n * n) as usize;
    if (g1 as u128) * (g2 as u128) > 40_000_000 {
        return Err(RestrictionError::CapacityExceeded {
            what: "W grid cells",
            got: (g1 as u128) * (g2 as u128),
            cap: 40_000_000,
        });
    }
    let mut data = vec![Complex64::new(0.0, 0.0); g1 * g2];
    let m2_span = lattice.m2_span;
    for m1 in 1..=3 * n as usize {
        for m2 in 1..=m2_span {
            let v = lattice.values[(m1 - 1) * m2_span + (m2 - 1)];
            if v.re != 0.0 || v.im != 0.0 {
                data[(m2 % g2) * g1 + (m1 % g1)] += v;
            }
        }
    }
    fft2(&mut data, g2, g1, true);
    let sup = data
        .iter()
        .map(|v| v.norm_sqr())
        .fold(0.0f64, f64::max)
        .sqrt();
    let l2_sq = data.iter().map(|v| v.norm_sqr()).sum::<f64>() / (g1 * g2) as f64;
    Ok(WPieceStats { sup, l2_sq })
}

/// Both sides of the two-dimensional-to-one-dimensional transform identity
/// `Σ_{(a;q)=1} V(q,a)³ e_q(-a·m) = q Σ_{(a;q)=1} G_{m₁}(q,a) e_q(-a m₂)`,
/// each by direct summation.
pub fn transform_identity_sides(
    q: i64,
    m1: i64,
    m2: i64,
    cache: &GaussCache,
) -> (Complex64, Complex64) {
    let table = cache.table(q as usize);
    let roots = crate::expsums::unit_roots(q as usize);
    let mut lhs = Complex64::new(0.0, 0.0);
    for a1 in 1..=q {
        for a2 in 1..=q {
            if !RationalPoint::new(a1, a2, q).is_primitive() {
                continue;
            }
            let expo = ((a1 as i128 * m1 as i128 + a2 as i128 * m2 as i128)
                .rem_euclid(q as i128)) as usize;
            lhs += table.get(a1, a2).powi(3) * roots[expo].conj();
        }
    }
    let mut rhs = Complex64::new(0.0, 0.0);
    for a in 1..=q {
        if num_integer::gcd(a, q) != 1 {
            continue;
        }
        let expo = ((a as i128 * m2 as i128).rem_euclid(q as i128)) as usize;
        rhs += crate::expsums::gauss_sum_g(q, a, m1) * roots[expo].conj();
    }
    (lhs, rhs * q as f64)
}

// ---------------------------------------------------------------------------
// General weighted-sum inequality at toy scale
// ---------------------------------------------------------------------------

/// A small d-dimensional lattice of real weights (`d ≤ 2`; one-dimensional
/// lattices have `dims.1 = 1`).
#[derive(Debug, Clone)]
pub struct ToyLattice {
    pub dims: (usize, usize),
    pub vals: Vec<f64>,
}

impl ToyLattice {
    pub fn new(dims: (usize, usize), vals: Vec<f64>) -> Self {
        assert_eq!(vals.len(), dims.0 * dims.1);
        ToyLattice { dims, vals }
    }

    fn norm_lr(&self, r: f64) -> f64 {
        self.vals
            .iter()
            .map(|v| v.abs().powf(r))
            .sum::<f64>()
            .powf(1.0 / r)
    }
}

/// `‖W_h‖_p` for the weighted exponential sum `W_h(α) = Σ_n h(n) e(α·n)` by
/// dense grid quadrature at `oversample`× the lattice size per axis.
fn toy_w_norm(dims: (usize, usize), h: &[Complex64], p: f64, oversample: usize) -> f64 {
    let g1 = (dims.0 * oversample).next_power_of_two();
    let g2 = if dims.1 == 1 {
        1
    } else {
        (dims.1 * oversample).next_power_of_two()
    };
    let mut data = vec![Complex64::new(0.0, 0.0); g1 * g2];
    for i in 0..dims.0 {
        for j in 0..dims.1 {
            let v = h[i * dims.1 + j];
            if v.re != 0.0 || v.im != 0.0 {
                // lattice point n = (i+1, j+1)
                data[((j + 1) % g2) * g1 + (i + 1) % g1] += v;
            }
        }
    }
    fft2(&mut data, g2, g1, true);
    let mean = data
        .iter()
        .map(|v| v.norm_sqr().powf(p / 2.0))
        .sum::<f64>()
        / (g1 * g2) as f64;
    mean.powf(1.0 / p)
}

/// Evaluate both sides of the weighted restriction inequality
/// `‖W_f‖_p ≤ (Σ|f|²ω)^{1/2} (Σ_j ‖W_j‖_p^{(p-2)/p} ‖ω_j‖_{2p/(p-2)}^{2/p})^{1/2}`
/// at toy scale. The decomposition must sum to `ω` pointwise.
pub fn theorem4_inequality_check(
    omega: &ToyLattice,
    f: &[Complex64],
    pieces: &[ToyLattice],
    p: f64,
    oversample: usize,
) -> Result<(f64, f64), RestrictionError> {
    assert!(p > 2.0);
    assert_eq!(f.len(), omega.vals.len());
    let mut dev = 0.0f64;
    for idx in 0..omega.vals.len() {
        let s: f64 = pieces.iter().map(|pc| pc.vals[idx]).sum();
        dev = dev.max((s - omega.vals[idx]).abs());
    }
    if dev > 1e-10 {
        return Err(RestrictionError::DecompositionMismatch { dev });
    }

    let dims = omega.dims;
    let h: Vec<Complex64> = f
        .iter()
        .zip(&omega.vals)
        .map(|(fv, &w)| fv * w)
        .collect();
    let lhs = toy_w_norm(dims, &h, p, oversample);

    let weighted_f_l2: f64 = f
        .iter()
        .zip(&omega.vals)
        .map(|(fv, &w)| fv.norm_sqr() * w)
        .sum();
    let r = 2.0 * p / (p - 2.0);
    let mut piece_sum = 0.0;
    for pc in pieces {
        let wj: Vec<Complex64> = pc.vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let w_norm = toy_w_norm(dims, &wj, p, oversample);
        piece_sum += w_norm.powf((p - 2.0) / p) * pc.norm_lr(r).powf(2.0 / p);
    }
    let rhs = weighted_f_l2.sqrt() * piece_sum.sqrt();
    Ok((lhs, rhs))
}

// ---------------------------------------------------------------------------
// One-dimensional rational-phase moment bound
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BetaMoment {
    pub value: f64,
    /// The lemma hypothesis `X^{4k} ≤ M`.
    pub hypothesis_ok: bool,
}

/// `Σ_{m ≤ M} |β(m)|^{2k}` with `β(m) = Σ_{q ≤ X} Σ_{a ≤ q} g(a,q) e_q(-am)`.
/// Computed exactly-to-float from per-modulus residue tables; the hypothesis
/// violation is reported, not fatal.
pub fn beta_moment_check(
    x: u64,
    m_max: u64,
    k: u32,
    g: impl Fn(u64, u64) -> Complex64 + Sync,
) -> Result<BetaMoment, RestrictionError> {
    if m_max > 10_000_000 {
        return Err(RestrictionError::CapacityExceeded {
            what: "beta moment M",
            got: m_max as u128,
            cap: 10_000_000,
        });
    }
    let tables: Vec<Vec<Complex64>> = (1..=x)
        .map(|q| {
            let roots = crate::expsums::unit_roots(q as usize);
            (0..q)
                .map(|r| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for a in 1..=q {
                        acc += g(a, q) * roots[((a * r) % q) as usize].conj();
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let hypothesis_ok = (x as u128)
        .checked_pow(4 * k)
        .map(|v| v <= m_max as u128)
        .unwrap_or(false);
    const CHUNK: u64 = 65536;
    let chunks = m_max.div_ceil(CHUNK);
    let parts: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK + 1;
            let hi = ((c + 1) * CHUNK).min(m_max);
            let mut acc = 0.0;
            for m in lo..=hi {
                let mut beta = Complex64::new(0.0, 0.0);
                for (qi, t) in tables.iter().enumerate() {
                    beta += t[(m % (qi as u64 + 1)) as usize];
                }
                acc += beta.norm_sqr().powi(k as i32);
            }
            acc
        })
        .collect();
    Ok(BetaMoment {
        value: parts.iter().sum(),
        hypothesis_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expsums::{weighted_quad_sum, FrequencyPoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_weights(n: u64) -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); n as usize]
    }

    fn random_pm1(n: u64, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0))
            .collect()
    }

    #[test]
    fn grid_matches_direct_evaluation() {
        let n = 6u64;
        let g = random_pm1(n, 3);
        let grid = build_moment_grid(&g, n, 1, 1);
        for &(j1, j2) in &[(0usize, 0usize), (1, 5), (7, 90), (17, 107)] {
            let alpha = FrequencyPoint::new(
                j1 as f64 / grid.g1 as f64,
                j2 as f64 / grid.g2 as f64,
            );
            let direct = weighted_quad_sum(&g, alpha).unwrap();
            let from_grid = grid.values[j2 * grid.g1 + j1];
            assert!(
                (direct - from_grid).norm() < 1e-8,
                "j=({j1},{j2}): {from_grid} vs {direct}"
            );
        }
    }

    #[test]
    fn grid_parseval() {
        let n = 16u64;
        let g = random_pm1(n, 11);
        let grid = build_moment_grid(&g, n, 1, 1);
        let mean_sq = grid.mean_sq();
        let exact: f64 = g.iter().map(|v| v.norm_sqr()).sum();
        assert!(
            (mean_sq - exact).abs() <= 1e-8 * exact,
            "{mean_sq} vs {exact}"
        );
    }

    #[test]
    fn lp_moment_p8_matches_exact_oracle() {
        let n = 16u64;
        let g = unit_weights(n);
        let exact = moment8_exact(&g, n);
        let grid = lp_moment(&g, n, 8.0, 1, 1).unwrap();
        assert!(
            (grid.value - exact).abs() <= 0.01 * exact,
            "{} vs {exact}",
            grid.value
        );
        // zero weights -> zero moment
        let z = vec![Complex64::new(0.0, 0.0); n as usize];
        assert_eq!(lp_moment(&z, n, 8.0, 1, 1).unwrap().value, 0.0);
    }

    #[test]
    fn analytic_factor_self_convergence() {
        let n = 32u64;
        let q = 4u64;
        let ms = [(48i64, 1536i64), (10, 40), (96, 3070), (140, 6000)];
        let base = analytic_factor_batch(&ms, n, q, 2.0);
        let fine = analytic_factor_batch(&ms, n, q, 4.0);
        for (b, f) in base.iter().zip(&fine) {
            assert!((b - f).norm() < 1e-6, "{b} vs {f}");
        }
    }

    #[test]
    fn analytic_factor_decays_far_outside() {
        let n = 32u64;
        let q = 4u64;
        let inside = analytic_factor(48, 1536, n, q).norm();
        let outside = analytic_factor(100 * n as i64, 1536, n, q).norm();
        assert!(outside < 1e-3 * inside.max(1e-3), "{outside} vs {inside}");
    }

    #[test]
    fn analytic_lattice_spot_check() {
        let n = 16u64;
        let q = 2u64;
        let lat = analytic_lattice(n, q).unwrap();
        let ms = [(5i64, 11i64), (24, 200), (40, 600), (13, 70)];
        let quad = analytic_factor_batch(&ms, n, q, 3.0);
        let scale = lat
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max);
        for (&(m1, m2), qv) in ms.iter().zip(&quad) {
            let fv = lat.get(m1, m2);
            assert!(
                (fv - qv).norm() <= 0.01 * scale,
                "m=({m1},{m2}): fft {fv} vs quad {qv} (scale {scale})"
            );
        }
    }

    #[test]
    fn transform_identity_small() {
        let cache = GaussCache::default();
        for q in 1..=12i64 {
            for &m in &[(1i64, 1i64), (5, 17), (10, 99)] {
                let (lhs, rhs) = transform_identity_sides(q, m.0, m.1, &cache);
                assert!(
                    (lhs - rhs).norm() <= 1e-6 * (1.0 + lhs.norm()),
                    "q={q} m={m:?}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn decomposition_reconstructs_r() {
        let n = 12u64;
        let cache = GaussCache::default();
        let dec = build_decomposition(n, 2, &cache).unwrap();
        let exact = RepresentationTable::build(n).unwrap();
        // R' + Σ R_Y = R entry-wise by construction; re-sum as a guard.
        let mut max_dev = 0.0f64;
        for m1 in 1..=(3 * n as i64) {
            for m2 in 1..=(3 * (n * n) as i64) {
                let mut acc = dec.remainder.lattice.get(m1, m2);
                for p in &dec.pieces {
                    acc += p.lattice.get(m1, m2);
                }
                max_dev = max_dev.max((acc.re - exact.get(m1, m2) as f64).abs());
                max_dev = max_dev.max(acc.im.abs());
            }
        }
        assert!(max_dev < 1e-6, "reconstruction deviation {max_dev}");
    }

    #[test]
    fn r1_piece_is_analytic_factor() {
        // At Y = 1 the only modulus is q = 1 whose arithmetic factor is 1.
        let n = 8u64;
        let cache = GaussCache::default();
        let dec = build_decomposition(n, 1, &cache).unwrap();
        let p1 = &dec.pieces[0];
        assert_eq!(p1.y, 1);
        for m1 in [3i64, 7, 20] {
            for m2 in [5i64, 50, 150] {
                let a = dec.analytic.get(m1, m2);
                let r = p1.lattice.get(m1, m2);
                assert!((a - r).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn w_stats_match_lattice_mass() {
        let n = 8u64;
        let cache = GaussCache::default();
        let dec = build_decomposition(n, 2, &cache).unwrap();
        for piece in &dec.pieces {
            let stats = w_piece_stats(&piece.lattice).unwrap();
            let direct = piece.lattice.sum_abs_sq();
            assert!(
                (stats.l2_sq - direct).abs() <= 1e-6 * direct.max(1e-12),
                "Y={}: {} vs {}",
                piece.y,
                stats.l2_sq,
                direct
            );
            // W_Y(0) = Σ_m R_Y(m).
            let at_zero: Complex64 = piece.lattice.values.iter().sum();
            assert!(stats.sup + 1e-9 >= at_zero.norm());
        }
    }

    #[test]
    fn theorem4_trivial_and_random() {
        // f ≡ 0: lhs = 0 ≤ rhs.
        let omega = ToyLattice::new((16, 1), vec![1.0; 16]);
        let f = vec![Complex64::new(0.0, 0.0); 16];
        let pieces = vec![omega.clone()];
        let (lhs, rhs) = theorem4_inequality_check(&omega, &f, &pieces, 4.0, 4).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-6) && lhs == 0.0);

        // Single-piece decomposition, random f, d = 1, N = 16, p = 4.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f: Vec<Complex64> = (0..16)
            .map(|_| Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0))
            .collect();
        let (lhs, rhs) = theorem4_inequality_check(&omega, &f, &pieces, 4.0, 4).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-6), "lhs {lhs} rhs {rhs}");

        // Mismatching decomposition is rejected.
        let bad = vec![ToyLattice::new((16, 1), vec![0.5; 16])];
        assert!(matches!(
            theorem4_inequality_check(&omega, &f, &bad, 4.0, 4),
            Err(RestrictionError::DecompositionMismatch { .. })
        ));
    }

    #[test]
    fn theorem4_on_representation_weights() {
        // ω = R at N = 8 with its dyadic decomposition, p = 3.
        let n = 8u64;
        let cache = GaussCache::default();
        let dec = build_decomposition(n, 2, &cache).unwrap();
        let exact = RepresentationTable::build(n).unwrap();
        let dims = (3 * n as usize, 3 * (n * n) as usize);
        let mut omega = vec![0.0; dims.0 * dims.1];
        for m1 in 1..=dims.0 as i64 {
            for m2 in 1..=dims.1 as i64 {
                omega[(m1 as usize - 1) * dims.1 + (m2 as usize - 1)] =
                    exact.get(m1, m2) as f64;
            }
        }
        let omega = ToyLattice::new(dims, omega);
        let mut pieces: Vec<ToyLattice> = dec
            .pieces
            .iter()
            .map(|p| {
                ToyLattice::new(
                    dims,
                    p.lattice.values.iter().map(|v| v.re).collect(),
                )
            })
            .collect();
        pieces.push(ToyLattice::new(
            dims,
            dec.remainder.lattice.values.iter().map(|v| v.re).collect(),
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let f: Vec<Complex64> = (0..omega.vals.len())
            .map(|_| Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0))
            .collect();
        let (lhs, rhs) = theorem4_inequality_check(&omega, &f, &pieces, 3.0, 2).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-6), "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn beta_moment_closed_forms() {
        // X = 1: β(m) = g(1,1) constant.
        let g = |_a: u64, _q: u64| Complex64::new(0.3, -0.4);
        let out = beta_moment_check(1, 50, 2, g).unwrap();
        let expect = 50.0 * 0.5f64.powi(4);
        assert!((out.value - expect).abs() < 1e-9 * expect);
        assert!(out.hypothesis_ok);

        // g(a,q) = 1/q, X = 3, k = 1: Σ_{m≤100} τ_X(m)² with
        // τ_X(m) = #{q ≤ 3 : q | m}.
        let g = |_a: u64, q: u64| Complex64::new(1.0 / q as f64, 0.0);
        let out = beta_moment_check(3, 100, 1, g).unwrap();
        let mut expect = 0.0;
        for m in 1..=100u64 {
            let tau = (1..=3u64).filter(|q| m % q == 0).count() as f64;
            expect += tau * tau;
        }
        assert!(
            (out.value - expect).abs() < 1e-6 * expect,
            "{} vs {expect}",
            out.value
        );
        assert!(out.hypothesis_ok); // 3^4 = 81 ≤ 100
    }

    #[test]
    fn lp_moment_scaling_smoke() {
        // p = 7 on random ±1 weights at two sizes: finite-scale ratio check.
        let mut ratios = Vec::new();
        for &n in &[12u64, 16] {
            let g = random_pm1(n, 99);
            let m = lp_moment(&g, n, 7.0, 1, 1).unwrap();
            ratios.push(m.value / (n as f64).powi(4));
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 6.0, "ratios {ratios:?}");
    }
}
