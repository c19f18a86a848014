//! Core domain types: coefficient systems, subset windows, progressions, and
//! the exact solution predicates everything else is built on.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SystemError {
    #[error("coefficient at position {index} is zero")]
    ZeroCoefficient { index: usize },
    #[error("coefficients sum to {sum}, not zero")]
    SumNotZero { sum: i64 },
    #[error("strict systems need at least 7 variables, got {s}")]
    TooFewVariables { s: usize },
    #[error("strict systems need two positive and two negative coefficients (found {positive} positive, {negative} negative)")]
    SignConditionViolated { positive: usize, negative: usize },
    #[error("variable vector has length {got}, system has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("progression (start {start}, step {step}, length {length}) leaves {{1..{n_max}}}")]
    ProgressionOutOfRange {
        start: i64,
        step: i64,
        length: u64,
        n_max: u64,
    },
    #[error("empty coefficient list")]
    Empty,
}

/// A diagonal translation-invariant quadratic system, given by its nonzero
/// integer coefficients. With `strict = true` the three structural
/// conditions are enforced: the coefficients sum to zero, there are at least
/// seven of them, and each sign appears at least twice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalSystem {
    lambdas: Vec<i64>,
    strict: bool,
}

impl DiagonalSystem {
    pub fn new(lambdas: Vec<i64>, strict: bool) -> Result<Self, SystemError> {
        if lambdas.is_empty() {
            return Err(SystemError::Empty);
        }
        for (index, &l) in lambdas.iter().enumerate() {
            if l == 0 {
                return Err(SystemError::ZeroCoefficient { index });
            }
        }
        if strict {
            if lambdas.len() < 7 {
                return Err(SystemError::TooFewVariables { s: lambdas.len() });
            }
            let sum: i64 = lambdas.iter().sum();
            if sum != 0 {
                return Err(SystemError::SumNotZero { sum });
            }
            let positive = lambdas.iter().filter(|&&l| l > 0).count();
            let negative = lambdas.len() - positive;
            if positive < 2 || negative < 2 {
                return Err(SystemError::SignConditionViolated { positive, negative });
            }
        }
        Ok(DiagonalSystem { lambdas, strict })
    }

    /// The `(1,1,1,1,-1,-1,-2)` system used throughout the examples and tests.
    pub fn reference() -> Self {
        DiagonalSystem::new(vec![1, 1, 1, 1, -1, -1, -2], true).unwrap()
    }

    pub fn lambdas(&self) -> &[i64] {
        &self.lambdas
    }

    pub fn s(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn max_abs_lambda(&self) -> i64 {
        self.lambdas.iter().map(|l| l.abs()).max().unwrap()
    }

    pub fn sum_abs_lambda(&self) -> i64 {
        self.lambdas.iter().map(|l| l.abs()).sum()
    }

    /// Exact predicate: does `x` solve both equations?
    ///
    /// Both forms are accumulated in 128-bit arithmetic so the check never
    /// wraps for `|x| ≤ 10⁶`, `|λ| ≤ 10³`.
    pub fn is_solution(&self, x: &[i64]) -> Result<bool, SystemError> {
        if x.len() != self.lambdas.len() {
            return Err(SystemError::LengthMismatch {
                expected: self.lambdas.len(),
                got: x.len(),
            });
        }
        let mut lin: i128 = 0;
        let mut quad: i128 = 0;
        for (&l, &xi) in self.lambdas.iter().zip(x) {
            let l = l as i128;
            let xi = xi as i128;
            lin += l * xi;
            quad += l * xi * xi;
        }
        Ok(lin == 0 && quad == 0)
    }

    /// Parse a comma-separated coefficient literal like `"1,1,1,1,-1,-1,-2"`.
    pub fn parse(literal: &str, strict: bool) -> Result<Self, String> {
        let lambdas: Result<Vec<i64>, _> = literal
            .split(',')
            .map(|t| t.trim().parse::<i64>())
            .collect();
        let lambdas = lambdas.map_err(|e| format!("bad coefficient list {literal:?}: {e}"))?;
        DiagonalSystem::new(lambdas, strict).map_err(|e| e.to_string())
    }
}

/// True iff two coordinates coincide (the solution is "trivial").
pub fn is_trivial(x: &[i64]) -> bool {
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if x[i] == x[j] {
                return true;
            }
        }
    }
    false
}

/// A subset `A ⊂ {1..N}` with packed-bitset membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetWindow {
    n_max: u64,
    bits: Vec<u64>,
    count: u64,
}

impl SubsetWindow {
    pub fn empty(n_max: u64) -> Self {
        let words = ((n_max + 63) / 64) as usize;
        SubsetWindow {
            n_max,
            bits: vec![0; words.max(1)],
            count: 0,
        }
    }

    pub fn full(n_max: u64) -> Self {
        let mut w = SubsetWindow::empty(n_max);
        for n in 1..=n_max {
            w.insert(n);
        }
        w
    }

    pub fn from_members(n_max: u64, members: impl IntoIterator<Item = u64>) -> Self {
        let mut w = SubsetWindow::empty(n_max);
        for n in members {
            assert!(n >= 1 && n <= n_max, "member {n} outside 1..={n_max}");
            w.insert(n);
        }
        w
    }

    pub fn from_fn(n_max: u64, mut pred: impl FnMut(u64) -> bool) -> Self {
        let mut w = SubsetWindow::empty(n_max);
        for n in 1..=n_max {
            if pred(n) {
                w.insert(n);
            }
        }
        w
    }

    fn insert(&mut self, n: u64) {
        let idx = (n - 1) as usize;
        let (word, bit) = (idx / 64, idx % 64);
        if self.bits[word] & (1 << bit) == 0 {
            self.bits[word] |= 1 << bit;
            self.count += 1;
        }
    }

    pub fn contains(&self, n: u64) -> bool {
        if n < 1 || n > self.n_max {
            return false;
        }
        let idx = (n - 1) as usize;
        self.bits[idx / 64] & (1 << (idx % 64)) != 0
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    /// |A|, by stored popcount.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Density |A|/N as a float; the exact rational is `(count, n_max)`.
    pub fn density(&self) -> f64 {
        if self.n_max == 0 {
            0.0
        } else {
            self.count as f64 / self.n_max as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (1..=self.n_max).filter(move |&n| self.contains(n))
    }
}

/// An arithmetic progression `{start + k·step : 0 ≤ k < length}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progression {
    pub start: i64,
    pub step: i64,
    pub length: u64,
}

impl Progression {
    pub fn new(start: i64, step: i64, length: u64) -> Self {
        assert!(step > 0, "progression step must be positive");
        assert!(length > 0, "progression length must be positive");
        Progression {
            start,
            step,
            length,
        }
    }

    pub fn element(&self, k: u64) -> i64 {
        debug_assert!(k < self.length);
        self.start + self.step * k as i64
    }

    pub fn last(&self) -> i64 {
        self.element(self.length - 1)
    }

    pub fn elements(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.length).map(move |k| self.element(k))
    }

    pub fn fits_in(&self, n_max: u64) -> bool {
        self.start >= 1 && self.last() >= 1 && (self.last() as u64) <= n_max
    }
}

/// Pull `A` back along `P`: the returned window has size `|P|` and member
/// `k+1` exactly when the k-th element of `P` lies in `A`. Restriction to a
/// progression then rescaling is the move that keeps the system invariant.
pub fn restrict_and_rescale(
    a: &SubsetWindow,
    p: &Progression,
) -> Result<SubsetWindow, SystemError> {
    if !p.fits_in(a.n_max()) {
        return Err(SystemError::ProgressionOutOfRange {
            start: p.start,
            step: p.step,
            length: p.length,
            n_max: a.n_max(),
        });
    }
    let mut w = SubsetWindow::empty(p.length);
    for k in 0..p.length {
        if a.contains(p.element(k) as u64) {
            w.insert(k + 1);
        }
    }
    Ok(w)
}
