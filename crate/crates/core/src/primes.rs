//! Prime generation and factorization.
//!
//! Primes come from an odd-only segmented sieve of Eratosthenes, so limits in
//! the 10^8 range run in a few megabytes of working memory. A smallest prime
//! factor table is built by a linear sieve when the limit is below a
//! configurable cutoff; above it, factorization falls back to trial division.

use std::io::{Read, Write};
use std::ops::ControlFlow;

use crate::error::{invalid, Error, Result};

/// Default number of odd integers covered by one sieve segment.
pub const DEFAULT_SEGMENT_LEN: usize = 1 << 22;
/// Default ceiling for building a smallest-prime-factor table.
pub const DEFAULT_SPF_CUTOFF: u64 = 1 << 31;
/// Largest sieving limit accepted.
pub const MAX_LIMIT: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SieveOptions {
    pub segment_len: usize,
    /// Limits above this produce primes only.
    pub spf_cutoff: u64,
}

impl Default for SieveOptions {
    fn default() -> Self {
        Self {
            segment_len: DEFAULT_SEGMENT_LEN,
            spf_cutoff: DEFAULT_SPF_CUTOFF,
        }
    }
}

/// All primes up to an inclusive limit, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
}

/// Smallest prime factor of every integer in `[2, limit]`.
#[derive(Debug, Clone)]
pub struct SpfTable {
    limit: u64,
    spf: Vec<u32>,
}

/// Outcome of checking `pi(x) < 2x / log x` at every prime up to a limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevReport {
    /// Maximum over primes `x` of `pi(x) log x / (2x)`.
    pub max_ratio: f64,
    /// Prime at which the maximum is attained.
    pub argmax: u64,
    pub holds: bool,
}

/// Primes up to `n` by a plain sieve; used for sieving primes and small inputs.
pub fn small_primes(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

pub(crate) fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Streams every prime `p <= limit` in ascending order to `visit`, stopping
/// early when it returns `ControlFlow::Break`.
pub fn for_each_prime<F>(limit: u64, segment_len: usize, mut visit: F) -> Result<()>
where
    F: FnMut(u64) -> ControlFlow<()>,
{
    if limit > MAX_LIMIT {
        return Err(Error::Resource(format!("sieve limit {limit} exceeds 2^40")));
    }
    if segment_len == 0 {
        return Err(invalid("segment length must be positive"));
    }
    if limit < 2 {
        return Ok(());
    }
    if visit(2).is_break() {
        return Ok(());
    }
    let base: Vec<u64> = small_primes(isqrt(limit)).into_iter().skip(1).collect();
    let mut marks = vec![false; segment_len];
    // Segment k covers the odd numbers lo, lo + 2, ..., lo + 2 (len - 1).
    let mut lo = 3u64;
    while lo <= limit {
        let span = (((limit - lo) / 2 + 1) as usize).min(segment_len);
        let hi = lo + 2 * (span as u64 - 1);
        marks[..span].fill(false);
        for &p in &base {
            let sq = p * p;
            if sq > hi {
                break;
            }
            let mut start = if sq >= lo { sq } else { lo.div_ceil(p) * p };
            if start % 2 == 0 {
                start += p;
            }
            let mut idx = ((start - lo) / 2) as usize;
            let step = p as usize;
            while idx < span {
                marks[idx] = true;
                idx += step;
            }
        }
        for (i, &m) in marks[..span].iter().enumerate() {
            if !m && visit(lo + 2 * i as u64).is_break() {
                return Ok(());
            }
        }
        lo = hi + 2;
    }
    Ok(())
}

/// Upper bound for the n-th prime (Rosser's bound for n >= 6).
pub fn nth_prime_upper_bound(n: u64) -> u64 {
    if n < 6 {
        return 13;
    }
    let x = n as f64;
    (x * (x.ln() + x.ln().ln())).ceil() as u64 + 1
}

/// The first `n` primes.
pub fn first_primes(n: usize) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    out.try_reserve_exact(n)
        .map_err(|_| Error::Resource(format!("cannot allocate {n} primes")))?;
    if n == 0 {
        return Ok(out);
    }
    for_each_prime(nth_prime_upper_bound(n as u64), DEFAULT_SEGMENT_LEN, |p| {
        out.push(p);
        if out.len() == n {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(out)
}

/// Builds the prime table and, when `limit` is under the cutoff, the
/// smallest-prime-factor table.
pub fn sieve_tables(limit: u64) -> Result<(PrimeTable, Option<SpfTable>)> {
    sieve_tables_with(limit, SieveOptions::default())
}

pub fn sieve_tables_with(
    limit: u64,
    opts: SieveOptions,
) -> Result<(PrimeTable, Option<SpfTable>)> {
    if limit < 2 {
        return Err(invalid(format!("sieve limit must be >= 2, got {limit}")));
    }
    if limit <= opts.spf_cutoff {
        let spf = SpfTable::build(limit)?;
        let primes = spf.primes();
        Ok((PrimeTable { limit, primes }, Some(spf)))
    } else {
        Ok((PrimeTable::new_with(limit, opts.segment_len)?, None))
    }
}

impl PrimeTable {
    /// Primes up to `limit` by the segmented sieve.
    pub fn new(limit: u64) -> Result<Self> {
        Self::new_with(limit, DEFAULT_SEGMENT_LEN)
    }

    pub fn new_with(limit: u64, segment_len: usize) -> Result<Self> {
        if limit < 2 {
            return Err(invalid(format!("sieve limit must be >= 2, got {limit}")));
        }
        let mut primes = Vec::new();
        let estimate = (1.3 * limit as f64 / (limit as f64).ln()) as usize + 16;
        primes
            .try_reserve(estimate)
            .map_err(|_| Error::Resource(format!("cannot allocate primes up to {limit}")))?;
        for_each_prime(limit, segment_len, |p| {
            primes.push(p);
            ControlFlow::Continue(())
        })?;
        Ok(Self { limit, primes })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// `pi(limit)`.
    pub fn count(&self) -> usize {
        self.primes.len()
    }

    /// Primes not exceeding `x`.
    pub fn up_to(&self, x: u64) -> &[u64] {
        &self.primes[..self.primes.partition_point(|&p| p <= x)]
    }

    /// `pi(x)` for real `x <= limit`.
    pub fn prime_count(&self, x: f64) -> Result<usize> {
        if x.is_nan() || x > self.limit as f64 {
            return Err(Error::OutOfRange(format!(
                "x = {x} exceeds table limit {}",
                self.limit
            )));
        }
        if x < 2.0 {
            return Ok(0);
        }
        Ok(self.up_to(x.floor() as u64).len())
    }

    /// Checks `pi(x) < 2x / log x` at every prime; between consecutive primes
    /// the right side grows while `pi` is constant, so primes are the only
    /// points that need checking.
    pub fn chebyshev_check(&self) -> ChebyshevReport {
        let mut report = ChebyshevReport {
            max_ratio: 0.0,
            argmax: 2,
            holds: true,
        };
        for (i, &p) in self.primes.iter().enumerate() {
            let count = (i + 1) as f64;
            let x = p as f64;
            let ratio = count * x.ln() / (2.0 * x);
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.argmax = p;
            }
            if count >= 2.0 * x / x.ln() {
                report.holds = false;
            }
        }
        report
    }

    /// Writes the binary cache: header then little-endian u64 gaps.
    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.limit.to_le_bytes())?;
        w.write_all(&(self.primes.len() as u64).to_le_bytes())?;
        let mut prev = 0u64;
        for &p in &self.primes {
            w.write_all(&(p - prev).to_le_bytes())?;
            prev = p;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != CACHE_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let limit = u64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8);
        let mut primes = Vec::new();
        primes
            .try_reserve_exact(count as usize)
            .map_err(|_| Error::Resource(format!("cannot allocate {count} cached primes")))?;
        let mut prev = 0u64;
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            let gap = u64::from_le_bytes(b8);
            prev = prev
                .checked_add(gap)
                .ok_or_else(|| Error::Format("gap overflow".into()))?;
            primes.push(prev);
        }
        if primes.last().is_some_and(|&p| p > limit) || primes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("primes not ascending within limit".into()));
        }
        Ok(Self { limit, primes })
    }
}

pub const CACHE_MAGIC: &[u8; 8] = b"RMFPRIME";
pub const CACHE_VERSION: u32 = 1;

impl SpfTable {
    /// Linear sieve; every composite is crossed out exactly once by its
    /// smallest prime factor.
    pub fn build(limit: u64) -> Result<Self> {
        if limit < 2 {
            return Err(invalid(format!("spf limit must be >= 2, got {limit}")));
        }
        if limit > u32::MAX as u64 {
            return Err(Error::Resource(format!("spf table limit {limit} exceeds u32 range")));
        }
        let n = limit as usize;
        let mut spf: Vec<u32> = Vec::new();
        spf.try_reserve_exact(n + 1)
            .map_err(|_| Error::Resource(format!("cannot allocate spf table up to {limit}")))?;
        spf.resize(n + 1, 0);
        let mut primes: Vec<u32> = Vec::new();
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let m = i * p as usize;
                if p > si || m > n {
                    break;
                }
                spf[m] = p;
            }
        }
        Ok(Self { limit, spf })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// Smallest prime factor of `n`, for `2 <= n <= limit`.
    pub fn spf(&self, n: u64) -> Option<u64> {
        if n < 2 || n > self.limit {
            None
        } else {
            Some(self.spf[n as usize] as u64)
        }
    }

    fn primes(&self) -> Vec<u64> {
        (2..=self.limit)
            .filter(|&n| self.spf[n as usize] as u64 == n)
            .collect()
    }
}

/// Factorization through the spf table when it covers `n`, otherwise by
/// trial division over sieved primes.
#[derive(Debug, Clone)]
pub struct Factorizer {
    primes: PrimeTable,
    spf: Option<SpfTable>,
}

impl Factorizer {
    pub fn new(limit: u64) -> Result<Self> {
        Self::with_options(limit, SieveOptions::default())
    }

    pub fn with_options(limit: u64, opts: SieveOptions) -> Result<Self> {
        let (primes, spf) = sieve_tables_with(limit, opts)?;
        Ok(Self { primes, spf })
    }

    pub fn from_tables(primes: PrimeTable, spf: Option<SpfTable>) -> Self {
        Self { primes, spf }
    }

    pub fn primes(&self) -> &PrimeTable {
        &self.primes
    }

    pub fn spf(&self) -> Option<&SpfTable> {
        self.spf.as_ref()
    }

    /// Prime factorization as `(prime, exponent)` pairs, ascending. Every
    /// prime factor must lie within the table.
    pub fn factor(&self, n: u64) -> Result<Vec<(u64, u32)>> {
        if n == 0 {
            return Err(invalid("cannot factor 0"));
        }
        let mut out: Vec<(u64, u32)> = Vec::new();
        let mut push = |p: u64| match out.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => out.push((p, 1)),
        };
        let mut m = n;
        if let Some(spf) = self.spf.as_ref().filter(|t| n <= t.limit) {
            while m > 1 {
                let p = spf.spf[m as usize] as u64;
                push(p);
                m /= p;
            }
            return Ok(out);
        }
        for &p in self.primes.primes() {
            if p * p > m {
                break;
            }
            while m.is_multiple_of(p) {
                push(p);
                m /= p;
            }
        }
        if m > 1 {
            if m > self.primes.limit {
                return Err(Error::OutOfRange(format!(
                    "{n} has a prime factor {m} above the table limit {}",
                    self.primes.limit
                )));
            }
            push(m);
        }
        Ok(out)
    }
}
