//! Timestamp matching policies on a busy period.
//!
//! A matching pairs the `i`-th arrival of a busy period with departure
//! `perm[i]`. It is valid when every implied duration `D[perm[i]] - Y[i]`
//! lies in the support of the duration law. The valid matchings are the
//! perfect matchings of the biadjacency matrix, so their number is its
//! permanent.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::queue_sim::BusyPeriod;
use crate::stochastics::{DistributionError, DistributionSpec, Support};

/// Default size limit for the exponential-time routines.
pub const DEFAULT_CAP: usize = 20;

/// Largest matrix the bitset representation holds.
pub const MAX_DIMENSION: usize = 64;

/// Largest size for which Ryser's products cannot overflow an `i128`.
const RYSER_LIMIT: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchingError {
    #[error("matching has {got} entries but the busy period has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("busy period of size {size} exceeds the cap of {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("not a permutation: {0:?}")]
    NotAPermutation(Vec<usize>),
    #[error("no valid matching exists")]
    NoValidMatching,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// A permutation over the transactions of one busy period.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching(Vec<usize>);

impl Matching {
    pub fn new(perm: Vec<usize>) -> Result<Self, MatchingError> {
        let mut seen = vec![false; perm.len()];
        for &j in &perm {
            if j >= perm.len() || std::mem::replace(&mut seen[j], true) {
                return Err(MatchingError::NotAPermutation(perm));
            }
        }
        Ok(Self(perm))
    }

    pub fn identity(b: usize) -> Self {
        Self((0..b).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }
}

impl fmt::Display for Matching {
    /// 1-based, e.g. `(2,1)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|j| (j + 1).to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Square 0/1 matrix stored as one bitset per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiadjacencyMatrix {
    size: usize,
    rows: Vec<u64>,
}

impl BiadjacencyMatrix {
    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(
            size <= MAX_DIMENSION,
            "biadjacency matrices hold at most {MAX_DIMENSION} rows"
        );
        let rows = (0..size)
            .map(|i| (0..size).fold(0u64, |acc, j| if f(i, j) { acc | 1 << j } else { acc }))
            .collect();
        Self { size, rows }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        Self::from_fn(rows.len(), |i, j| rows[i][j] != 0)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i] >> j & 1 == 1
    }

    pub fn row_bits(&self, i: usize) -> u64 {
        self.rows[i]
    }

    pub fn ones(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones() as usize).sum()
    }

    /// Removes pairs forced by a row or column with a single entry.
    /// Returns `None` when some row or column is empty (no perfect matching).
    /// The permanent of the result equals the permanent of `self`.
    pub fn reduce_forced(&self) -> Option<Self> {
        let mut live_rows: Vec<usize> = (0..self.size).collect();
        let mut live_cols: u64 = if self.size == 64 {
            u64::MAX
        } else {
            (1u64 << self.size) - 1
        };
        loop {
            let mut changed = false;
            let mut k = 0;
            while k < live_rows.len() {
                let bits = self.rows[live_rows[k]] & live_cols;
                match bits.count_ones() {
                    0 => return None,
                    1 => {
                        live_cols &= !bits;
                        live_rows.swap_remove(k);
                        changed = true;
                    }
                    _ => k += 1,
                }
            }
            let mut cols = live_cols;
            while cols != 0 {
                let j = cols.trailing_zeros() as usize;
                cols &= cols - 1;
                let holders: Vec<usize> = live_rows
                    .iter()
                    .copied()
                    .filter(|&i| self.rows[i] >> j & 1 == 1)
                    .collect();
                match holders.len() {
                    0 => return None,
                    1 => {
                        live_cols &= !(1u64 << j);
                        live_rows.retain(|&i| i != holders[0]);
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                break;
            }
        }
        live_rows.sort_unstable();
        let cols: Vec<usize> = (0..self.size)
            .filter(|&j| live_cols >> j & 1 == 1)
            .collect();
        Some(Self::from_fn(live_rows.len(), |i, j| {
            self.get(live_rows[i], cols[j])
        }))
    }
}

impl fmt::Display for BiadjacencyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.size {
            let line: String = (0..self.size)
                .map(|j| if self.get(i, j) { '1' } else { '0' })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

fn check_len(bp: &BusyPeriod, m: &Matching) -> Result<(), MatchingError> {
    if m.len() != bp.size() {
        return Err(MatchingError::DimensionMismatch {
            expected: bp.size(),
            got: m.len(),
        });
    }
    Ok(())
}

/// Whether every duration implied by `m` lies in `support` (widened by `eps`).
pub fn is_valid(
    bp: &BusyPeriod,
    m: &Matching,
    support: Support,
    eps: f64,
) -> Result<bool, MatchingError> {
    check_len(bp, m)?;
    Ok(m.as_slice()
        .iter()
        .enumerate()
        .all(|(i, &j)| support.contains(bp.departures[j] - bp.arrivals[i], eps)))
}

/// `A[i][j] = 1` iff departure `j` is a feasible exit for arrival `i`.
pub fn biadjacency(
    bp: &BusyPeriod,
    support: Support,
    eps: f64,
) -> Result<BiadjacencyMatrix, MatchingError> {
    if bp.size() > MAX_DIMENSION {
        return Err(MatchingError::TooLarge {
            size: bp.size(),
            cap: MAX_DIMENSION,
        });
    }
    Ok(BiadjacencyMatrix::from_fn(bp.size(), |i, j| {
        support.contains(bp.departures[j] - bp.arrivals[i], eps)
    }))
}

/// Number of perfect matchings, by Ryser's inclusion–exclusion formula
/// walked in Gray-code order.
pub fn permanent(a: &BiadjacencyMatrix, cap: usize) -> Result<u128, MatchingError> {
    let n = a.size();
    let cap = cap.min(RYSER_LIMIT);
    if n > cap {
        return Err(MatchingError::TooLarge { size: n, cap });
    }
    if n == 0 {
        return Ok(1);
    }
    let mut row_sums = vec![0i64; n];
    let mut total: i128 = 0;
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let j = k.trailing_zeros();
        gray ^= 1 << j;
        let delta = if gray >> j & 1 == 1 { 1 } else { -1 };
        for (i, s) in row_sums.iter_mut().enumerate() {
            if a.rows[i] >> j & 1 == 1 {
                *s += delta;
            }
        }
        let mut prod: i128 = 1;
        for &s in &row_sums {
            if s == 0 {
                prod = 0;
                break;
            }
            prod *= s as i128;
        }
        if gray.count_ones() % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    if n % 2 == 1 {
        total = -total;
    }
    Ok(total as u128)
}

/// Permanent after stripping forced pairs; the cap applies to what is left.
pub fn count_valid_matchings(a: &BiadjacencyMatrix, cap: usize) -> Result<u128, MatchingError> {
    match a.reduce_forced() {
        None => Ok(0),
        Some(rest) => permanent(&rest, cap),
    }
}

/// Lists every perfect matching in lexicographic order.
pub fn enumerate_matchings(
    a: &BiadjacencyMatrix,
    cap: usize,
) -> Result<Vec<Matching>, MatchingError> {
    let n = a.size();
    if n > cap {
        return Err(MatchingError::TooLarge { size: n, cap });
    }
    fn walk(
        a: &BiadjacencyMatrix,
        row: usize,
        used: u64,
        cur: &mut Vec<usize>,
        out: &mut Vec<Matching>,
    ) {
        if row == a.size() {
            out.push(Matching(cur.clone()));
            return;
        }
        let mut free = a.rows[row] & !used;
        while free != 0 {
            let j = free.trailing_zeros() as usize;
            free &= free - 1;
            cur.push(j);
            walk(a, row + 1, used | 1 << j, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    walk(a, 0, 0, &mut Vec::with_capacity(n), &mut out);
    Ok(out)
}

/// In-order matching: the `i`-th arrival leaves `i`-th.
pub fn fifo_match(bp: &BusyPeriod) -> Matching {
    Matching::identity(bp.size())
}

/// Number of ways to complete a partial matching, indexed by the set of
/// used columns; rows are filled in order.
fn completion_counts(a: &BiadjacencyMatrix) -> Vec<u64> {
    let n = a.size();
    let full = (1usize << n) - 1;
    let mut ways = vec![0u64; 1 << n];
    ways[full] = 1;
    for mask in (0..full).rev() {
        let row = mask.count_ones() as usize;
        let mut free = a.rows[row] & !(mask as u64);
        let mut total = 0u64;
        while free != 0 {
            let j = free.trailing_zeros() as usize;
            free &= free - 1;
            total += ways[mask | 1 << j];
        }
        ways[mask] = total;
    }
    ways
}

/// Draws a matching uniformly from the valid ones.
///
/// Rather than listing all valid matchings, the first row's column is drawn
/// with probability proportional to its number of completions, then the
/// second, and so on; this yields the same uniform law.
pub fn random_match<R: Rng + ?Sized>(
    bp: &BusyPeriod,
    support: Support,
    eps: f64,
    rng: &mut R,
    cap: usize,
) -> Result<Matching, MatchingError> {
    if bp.size() > cap {
        return Err(MatchingError::TooLarge {
            size: bp.size(),
            cap,
        });
    }
    let a = biadjacency(bp, support, eps)?;
    sample_uniform_matching(&a, rng)
}

/// Uniform perfect matching of `a`.
pub fn sample_uniform_matching<R: Rng + ?Sized>(
    a: &BiadjacencyMatrix,
    rng: &mut R,
) -> Result<Matching, MatchingError> {
    let n = a.size();
    let ways = completion_counts(a);
    if ways[0] == 0 {
        return Err(MatchingError::NoValidMatching);
    }
    let mut mask = 0usize;
    let mut perm = Vec::with_capacity(n);
    for row in 0..n {
        let mut pick = rng.gen_range(0..ways[mask]);
        let mut free = a.rows[row] & !(mask as u64);
        loop {
            let j = free.trailing_zeros() as usize;
            free &= free - 1;
            let w = ways[mask | 1 << j];
            if pick < w {
                perm.push(j);
                mask |= 1 << j;
                break;
            }
            pick -= w;
        }
    }
    Ok(Matching(perm))
}

/// Sum of log-densities of the durations implied by `m`.
pub fn log_likelihood(
    bp: &BusyPeriod,
    m: &Matching,
    service: &DistributionSpec,
) -> Result<f64, MatchingError> {
    check_len(bp, m)?;
    m.as_slice()
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            service
                .ln_pdf(bp.departures[j] - bp.arrivals[i])
                .map_err(Into::into)
        })
        .sum()
}

/// Maximum-likelihood matching over the valid permutations, ties resolved to
/// the lexicographically smallest permutation.
pub fn ml_match(
    bp: &BusyPeriod,
    service: &DistributionSpec,
    eps: f64,
    cap: usize,
) -> Result<Matching, MatchingError> {
    let n = bp.size();
    if n > cap.min(MAX_DIMENSION) {
        return Err(MatchingError::TooLarge { size: n, cap });
    }
    if !service.has_density() {
        return Err(DistributionError::DensityUndefined(service.kind()).into());
    }
    if n == 1 {
        return Ok(Matching::identity(1));
    }
    let support = service.support();
    // weight of pairing arrival i with departure j; -inf when infeasible
    let mut weight = vec![f64::NEG_INFINITY; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = bp.departures[j] - bp.arrivals[i];
            if support.contains(d, eps) {
                let clamped = d.clamp(support.lower, support.upper);
                weight[i * n + j] = service.ln_pdf(clamped)?;
            }
        }
    }
    let full = (1usize << n) - 1;
    let mut best = vec![f64::NEG_INFINITY; 1 << n];
    best[full] = 0.0;
    for mask in (0..full).rev() {
        let row = mask.count_ones() as usize;
        let mut acc = f64::NEG_INFINITY;
        for j in 0..n {
            if mask >> j & 1 == 0 {
                acc = acc.max(weight[row * n + j] + best[mask | 1 << j]);
            }
        }
        best[mask] = acc;
    }
    let optimum = best[0];
    if optimum == f64::NEG_INFINITY {
        // every valid matching has zero likelihood somewhere; keep the in-order one
        return Ok(Matching::identity(n));
    }
    let tol = 1e-9 * (1.0 + optimum.abs());
    let mut mask = 0usize;
    let mut perm = Vec::with_capacity(n);
    let mut remaining = optimum;
    for row in 0..n {
        let j = (0..n)
            .find(|&j| {
                mask >> j & 1 == 0 && weight[row * n + j] + best[mask | 1 << j] >= remaining - tol
            })
            .expect("optimum is attained");
        remaining -= weight[row * n + j];
        perm.push(j);
        mask |= 1 << j;
    }
    Ok(Matching(perm))
}
