//! Rademacher random multiplicative functions.
//!
//! Signs on primes are a pure function of `(seed, p)`; every other quantity is
//! derived from them deterministically.

use std::io::Write;
use std::ops::ControlFlow;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, invalid, Error, Result};
use crate::keyed::keyed_hash;
use crate::prime_series::{variance_sum, CertifiedValue};
use crate::primes::{for_each_prime, isqrt, small_primes, PrimeTable, DEFAULT_SEGMENT_LEN};
use crate::summation::NeumaierSum;

/// Traces up to this length keep every value.
pub const FULL_TRACE_LIMIT: u64 = 10_000_000;
/// Spacing of stored values for longer traces.
pub const CHECKPOINT_STRIDE: u64 = 1 << 16;
/// Largest `x` the streaming sieve accepts.
pub const MAX_STREAM: u64 = 1 << 40;

const STREAM_SEGMENT: usize = 1 << 15;
const SCAN_BLOCK: usize = 64;

#[derive(Clone, Debug)]
enum SignSource {
    Keyed,
    Constant(i8),
    Table(Arc<Vec<i8>>),
}

/// Signs `f(p) = +-1` for primes `p <= prime_limit`.
#[derive(Clone, Debug)]
pub struct SignAssignment {
    seed: u64,
    prime_limit: u64,
    source: SignSource,
}

/// Keyed random signs: `sign(p)` is the parity of a hash of `(seed, p)`.
pub fn sample_signs(seed: u64, prime_limit: u64) -> Result<SignAssignment> {
    check_limit(prime_limit)?;
    Ok(SignAssignment { seed, prime_limit, source: SignSource::Keyed })
}

fn check_limit(prime_limit: u64) -> Result<()> {
    if prime_limit < 2 {
        return Err(invalid(format!("prime_limit must be >= 2, got {prime_limit}")));
    }
    Ok(())
}

impl SignAssignment {
    /// Every prime gets the same sign.
    pub fn constant(prime_limit: u64, sign: i8) -> Result<Self> {
        check_limit(prime_limit)?;
        if sign != 1 && sign != -1 {
            return Err(invalid(format!("sign must be +1 or -1, got {sign}")));
        }
        Ok(Self { seed: 0, prime_limit, source: SignSource::Constant(sign) })
    }

    /// Signs given by `rule(p)`, tabulated for every `p <= prime_limit`.
    pub fn from_fn<F: Fn(u64) -> i8>(prime_limit: u64, rule: F) -> Result<Self> {
        check_limit(prime_limit)?;
        if prime_limit > 1 << 28 {
            return Err(Error::Resource(format!("explicit sign table up to {prime_limit} is too large")));
        }
        let mut table = vec![0i8; prime_limit as usize + 1];
        for p in small_primes(prime_limit) {
            let s = rule(p);
            if s != 1 && s != -1 {
                return Err(invalid(format!("sign for {p} must be +1 or -1, got {s}")));
            }
            table[p as usize] = s;
        }
        Ok(Self { seed: 0, prime_limit, source: SignSource::Table(Arc::new(table)) })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn prime_limit(&self) -> u64 {
        self.prime_limit
    }

    /// Sign of the prime `p`. The caller guarantees `p` is prime and `p <= prime_limit`.
    #[inline]
    pub fn sign(&self, p: u64) -> i8 {
        match &self.source {
            SignSource::Keyed => {
                if keyed_hash(self.seed, p) & 1 == 1 {
                    1
                } else {
                    -1
                }
            }
            SignSource::Constant(s) => *s,
            SignSource::Table(t) => t[p as usize],
        }
    }

    pub fn try_sign(&self, p: u64) -> Result<i8> {
        if p > self.prime_limit {
            return Err(Error::OutOfRange(format!("prime {p} exceeds prime_limit {}", self.prime_limit)));
        }
        Ok(self.sign(p))
    }

    /// Signs of the given primes, in order.
    pub fn signs_for(&self, primes: &[u64]) -> Result<Vec<i8>> {
        if let Some(&p) = primes.last() {
            self.try_sign(p)?;
        }
        Ok(primes.iter().map(|&p| self.sign(p)).collect())
    }
}

/// `f(n)` by trial division.
pub fn f_value(signs: &SignAssignment, n: u64) -> Result<i8> {
    if n == 0 {
        return Err(invalid("f is defined for n >= 1"));
    }
    let mut m = n;
    let mut value = 1i8;
    let mut d = 2u64;
    while d * d <= m {
        if m.is_multiple_of(d) {
            m /= d;
            if m.is_multiple_of(d) {
                return Ok(0);
            }
            value *= signs.try_sign(d)?;
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m > 1 {
        value *= signs.try_sign(m)?;
    }
    Ok(value)
}

/// Streams `f(1), ..., f(x_max)` in order through a segmented multiplicative sieve.
pub fn for_each_f<F: FnMut(u64, i8)>(signs: &SignAssignment, x_max: u64, mut visit: F) -> Result<()> {
    if x_max > MAX_STREAM {
        return Err(Error::Resource(format!("x_max {x_max} exceeds 2^40")));
    }
    if x_max > signs.prime_limit {
        return Err(Error::OutOfRange(format!(
            "x_max {x_max} exceeds prime_limit {}; large prime factors would have no sign",
            signs.prime_limit
        )));
    }
    let root = isqrt(x_max);
    let sieving: Vec<(u64, i8)> = small_primes(root).into_iter().map(|p| (p, signs.sign(p))).collect();
    let mut val = vec![0i8; STREAM_SEGMENT];
    let mut prod = vec![0u64; STREAM_SEGMENT];
    let mut lo = 1u64;
    while lo <= x_max {
        let hi = x_max.min(lo + STREAM_SEGMENT as u64 - 1);
        let len = (hi - lo + 1) as usize;
        val[..len].fill(1);
        prod[..len].fill(1);
        for &(p, s) in &sieving {
            if p * p > hi {
                break;
            }
            let mut m = lo.div_ceil(p) * p;
            while m <= hi {
                let i = (m - lo) as usize;
                val[i] *= s;
                prod[i] *= p;
                m += p;
            }
            let p2 = p * p;
            let mut m = lo.div_ceil(p2) * p2;
            while m <= hi {
                val[(m - lo) as usize] = 0;
                m += p2;
            }
        }
        for i in 0..len {
            let n = lo + i as u64;
            let mut v = val[i];
            if v != 0 && prod[i] != n {
                v *= signs.sign(n / prod[i]);
            }
            visit(n, v);
        }
        lo = hi + 1;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
enum TraceValues {
    Full(Vec<i64>),
    Checkpoints { values: Vec<i64>, final_value: i64 },
}

/// `M_f(n)` for `n = 1..=x_max` together with its sign changes.
///
/// A change point is an `n` where `M_f(n)` is nonzero with the opposite sign
/// to the last nonzero value before it; zeros in between never count.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialSumTrace {
    x_max: u64,
    values: TraceValues,
    change_points: Vec<u64>,
    first_sign: i8,
}

#[derive(Default)]
struct ChangeTracker {
    last: i8,
    first: i8,
    points: Vec<u64>,
}

impl ChangeTracker {
    #[inline]
    fn push(&mut self, n: u64, m: i64) {
        let s = m.signum() as i8;
        if s == 0 {
            return;
        }
        if self.last == 0 {
            self.first = s;
        } else if s != self.last {
            self.points.push(n);
        }
        self.last = s;
    }
}

impl PartialSumTrace {
    /// Trace from explicit values `M(1), M(2), ...`.
    pub fn from_values(values: Vec<i64>) -> Self {
        let mut tracker = ChangeTracker::default();
        for (i, &m) in values.iter().enumerate() {
            tracker.push(i as u64 + 1, m);
        }
        Self {
            x_max: values.len() as u64,
            values: TraceValues::Full(values),
            change_points: tracker.points,
            first_sign: tracker.first,
        }
    }

    pub fn x_max(&self) -> u64 {
        self.x_max
    }

    /// All values, when the trace is short enough to keep them.
    pub fn values(&self) -> Option<&[i64]> {
        match &self.values {
            TraceValues::Full(v) => Some(v),
            TraceValues::Checkpoints { .. } => None,
        }
    }

    /// `M(n)` if stored: any `n` for full traces, multiples of
    /// [`CHECKPOINT_STRIDE`] and `x_max` otherwise.
    pub fn value_at(&self, n: u64) -> Option<i64> {
        if n == 0 || n > self.x_max {
            return None;
        }
        match &self.values {
            TraceValues::Full(v) => Some(v[n as usize - 1]),
            TraceValues::Checkpoints { values, final_value } => {
                if n == self.x_max {
                    Some(*final_value)
                } else if n.is_multiple_of(CHECKPOINT_STRIDE) {
                    Some(values[(n / CHECKPOINT_STRIDE) as usize - 1])
                } else {
                    None
                }
            }
        }
    }

    pub fn final_value(&self) -> i64 {
        match &self.values {
            TraceValues::Full(v) => v.last().copied().unwrap_or(0),
            TraceValues::Checkpoints { final_value, .. } => *final_value,
        }
    }

    pub fn change_points(&self) -> &[u64] {
        &self.change_points
    }

    /// `(n, sign_before, sign_after)` for every change point.
    pub fn changes(&self) -> impl Iterator<Item = (u64, i8, i8)> + '_ {
        self.change_points.iter().enumerate().map(move |(i, &n)| {
            let before = if i % 2 == 0 { self.first_sign } else { -self.first_sign };
            (n, before, -before)
        })
    }

    /// Stored `(n, M(n))` pairs in ascending order.
    pub fn stored(&self) -> Vec<(u64, i64)> {
        match &self.values {
            TraceValues::Full(v) => v.iter().enumerate().map(|(i, &m)| (i as u64 + 1, m)).collect(),
            TraceValues::Checkpoints { values, final_value } => {
                let mut out: Vec<(u64, i64)> = values
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| ((i as u64 + 1) * CHECKPOINT_STRIDE, m))
                    .collect();
                if out.last().map(|&(n, _)| n) != Some(self.x_max) {
                    out.push((self.x_max, *final_value));
                }
                out
            }
        }
    }
}

/// Exact `M_f(n)` for every `n <= x_max`; requires `x_max <= prime_limit`.
pub fn partial_sum_trace(signs: &SignAssignment, x_max: u64) -> Result<PartialSumTrace> {
    if x_max == 0 {
        return Err(invalid("x_max must be >= 1"));
    }
    let full = x_max <= FULL_TRACE_LIMIT;
    let mut stored = Vec::with_capacity(if full { x_max as usize } else { (x_max / CHECKPOINT_STRIDE) as usize });
    let mut tracker = ChangeTracker::default();
    let mut m = 0i64;
    for_each_f(signs, x_max, |n, f| {
        m += f as i64;
        tracker.push(n, m);
        if full || n % CHECKPOINT_STRIDE == 0 {
            stored.push(m);
        }
    })?;
    let values = if full {
        TraceValues::Full(stored)
    } else {
        TraceValues::Checkpoints { values: stored, final_value: m }
    };
    Ok(PartialSumTrace { x_max, values, change_points: tracker.points, first_sign: tracker.first })
}

/// `V_f(x)`: number of change points `<= x`.
pub fn count_sign_changes(trace: &PartialSumTrace, x: u64) -> Result<usize> {
    if x > trace.x_max {
        return Err(Error::OutOfRange(format!("x = {x} exceeds trace length {}", trace.x_max)));
    }
    Ok(trace.change_points.partition_point(|&c| c <= x))
}

/// Writes stored trace values with columns `n, M`.
pub fn write_trace_csv<W: Write>(trace: &PartialSumTrace, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["n", "M"])?;
    for (n, m) in trace.stored() {
        out.write_record([n.to_string(), m.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes change points with columns `index, sign_before, sign_after`.
pub fn write_change_points_csv<W: Write>(trace: &PartialSumTrace, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["index", "sign_before", "sign_after"])?;
    for (n, before, after) in trace.changes() {
        out.write_record([n.to_string(), before.to_string(), after.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomPrimeSum {
    pub sigma: f64,
    pub limit: u64,
    pub value: f64,
    /// Square root of the certified upper bound on `sum_{p > limit} p^(-2 sigma)`.
    pub tail_std: f64,
    /// `value / sqrt(E[P(sigma)^2])`.
    pub normalized: f64,
}

/// Precomputed `p^-sigma` for `p <= limit`, reusable across sign assignments.
#[derive(Debug, Clone)]
pub struct PrimeSumWeights {
    sigma: f64,
    limit: u64,
    primes: Vec<u64>,
    weights: Vec<f64>,
    truncated_variance: f64,
    variance: CertifiedValue,
}

impl PrimeSumWeights {
    pub fn new(table: &PrimeTable, sigma: f64, limit: u64) -> Result<Self> {
        let variance = variance_sum(sigma)?;
        if limit > table.limit() {
            return Err(Error::OutOfRange(format!("limit {limit} exceeds table limit {}", table.limit())));
        }
        let primes = table.up_to(limit).to_vec();
        let weights: Vec<f64> = primes.iter().map(|&p| (p as f64).powf(-sigma)).collect();
        let truncated_variance = weights.iter().map(|w| w * w).sum::<NeumaierSum>().value();
        Ok(Self { sigma, limit, primes, weights, truncated_variance, variance })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_{p <= limit} p^(-2 sigma)`.
    pub fn truncated_variance(&self) -> f64 {
        self.truncated_variance
    }

    pub fn variance(&self) -> CertifiedValue {
        self.variance
    }

    pub fn tail_std(&self) -> f64 {
        (self.variance.upper - self.truncated_variance).max(0.0).sqrt()
    }

    pub fn evaluate(&self, signs: &SignAssignment) -> Result<RandomPrimeSum> {
        if self.limit > signs.prime_limit() {
            return Err(Error::OutOfRange(format!(
                "limit {} exceeds prime_limit {}",
                self.limit,
                signs.prime_limit()
            )));
        }
        Ok(self.finish(self.weighted(|i| signs.sign(self.primes[i]))))
    }

    /// Same as [`evaluate`](Self::evaluate) with signs already looked up for [`primes`](Self::primes).
    pub fn evaluate_signs(&self, signs: &[i8]) -> RandomPrimeSum {
        assert_eq!(signs.len(), self.primes.len());
        self.finish(self.weighted(|i| signs[i]))
    }

    fn weighted<S: Fn(usize) -> i8>(&self, sign: S) -> f64 {
        let mut acc = NeumaierSum::new();
        for (i, &w) in self.weights.iter().enumerate() {
            acc += if sign(i) > 0 { w } else { -w };
        }
        acc.value()
    }

    fn finish(&self, value: f64) -> RandomPrimeSum {
        RandomPrimeSum {
            sigma: self.sigma,
            limit: self.limit,
            value,
            tail_std: self.tail_std(),
            normalized: value / self.variance.estimate.sqrt(),
        }
    }
}

/// `P(sigma)` truncated to primes `p <= limit`.
pub fn random_prime_sum(signs: &SignAssignment, sigma: f64, limit: u64) -> Result<RandomPrimeSum> {
    if !(sigma > 0.5) {
        return Err(Error::Divergent(format!("P(sigma) diverges for sigma = {sigma} <= 1/2")));
    }
    if limit > signs.prime_limit() {
        return Err(Error::OutOfRange(format!("limit {limit} exceeds prime_limit {}", signs.prime_limit())));
    }
    let table = PrimeTable::new(limit.max(2))?;
    PrimeSumWeights::new(&table, sigma, limit)?.evaluate(signs)
}

/// Truncated Dirichlet series `sum_{n <= limit} f(n) n^-s` and Euler product
/// `prod_{p <= limit} (1 + f(p) p^-s)`.
pub fn series_and_product(signs: &SignAssignment, s: Complex64, limit: u64) -> Result<(Complex64, Complex64)> {
    if !(s.re > 0.5) {
        return Err(domain(format!("series_and_product requires Re(s) > 1/2, got {s}")));
    }
    if limit == 0 {
        return Err(invalid("limit must be >= 1"));
    }
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for_each_f(signs, limit, |n, f| {
        if f != 0 {
            let term = (-s * (n as f64).ln()).exp() * f as f64;
            re += term.re;
            im += term.im;
        }
    })?;
    let mut product = Complex64::new(1.0, 0.0);
    if limit >= 2 {
        for_each_prime(limit, DEFAULT_SEGMENT_LEN, |p| {
            let term = (-s * (p as f64).ln()).exp() * signs.sign(p) as f64;
            product *= 1.0 + term;
            ControlFlow::Continue(())
        })?;
    }
    Ok((Complex64::new(re.value(), im.value()), product))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbelResidual {
    /// `|sum f(n) n^-sigma - M(X) X^-sigma - sigma int_1^X M(u) u^(-1-sigma) du|`.
    pub residual: f64,
    /// `sum_{n <= X} |f(n)| n^-sigma`.
    pub scale: f64,
    pub relative: f64,
}

/// `n^-sigma - (n+1)^-sigma` without cancellation.
#[inline]
fn power_step(pw: f64, sigma: f64, n: f64) -> f64 {
    -pw * (-sigma * (1.0 / n).ln_1p()).exp_m1()
}

/// Residual of the partial summation identity at finite `X`. The integral is
/// exact because `M_f` is constant on each `[n, n + 1)`.
pub fn abel_identity_residual(signs: &SignAssignment, sigma: f64, x: u64) -> Result<AbelResidual> {
    if !(sigma > 0.0) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    if x == 0 {
        return Err(invalid("X must be >= 1"));
    }
    let mut series = NeumaierSum::new();
    let mut scale = NeumaierSum::new();
    let mut integral = NeumaierSum::new();
    let mut m = 0i64;
    let mut last_pw = 1.0;
    for_each_f(signs, x, |n, f| {
        let nf = n as f64;
        let pw = nf.powf(-sigma);
        m += f as i64;
        if f != 0 {
            series += f as f64 * pw;
            scale += pw;
        }
        if n < x {
            integral += m as f64 * power_step(pw, sigma, nf);
        }
        last_pw = pw;
    })?;
    let mut total = series;
    total += -(m as f64) * last_pw;
    total += -integral.value();
    let residual = total.value().abs();
    let scale = scale.value();
    Ok(AbelResidual { residual, scale, relative: residual / scale })
}

/// `int_1^X |M_f(u)| u^(-1-sigma) du`, evaluated exactly piecewise.
pub fn abs_mellin(signs: &SignAssignment, sigma: f64, x: u64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    if x == 0 {
        return Err(invalid("X must be >= 1"));
    }
    let mut acc = NeumaierSum::new();
    let mut m = 0i64;
    for_each_f(signs, x, |n, f| {
        m += f as i64;
        if n < x && m != 0 {
            let nf = n as f64;
            acc += m.unsigned_abs() as f64 * power_step(nf.powf(-sigma), sigma, nf);
        }
    })?;
    Ok(acc.value() / sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupScan {
    pub n_grid: usize,
    /// Grid maximum of `sum_p f(p) cos(t log p) p^-sigma`.
    pub sup_cos: f64,
    pub argmax_t: f64,
    /// Grid maximum of `|prod_p (1 + f(p) p^(-sigma - i t))|`.
    pub sup_abs_f: f64,
    pub argmax_abs_f_t: f64,
}

/// Scans `t = 1, 1 + step, ..., <= t_max`. Grid maxima are lower bounds for
/// the suprema over `[1, t_max]`.
pub fn sup_scan(signs: &SignAssignment, sigma: f64, t_max: f64, grid_step: f64, limit: u64) -> Result<SupScan> {
    if !(sigma > 0.5) {
        return Err(domain(format!("sup_scan requires sigma > 1/2, got {sigma}")));
    }
    if !(t_max >= 1.0) || !t_max.is_finite() {
        return Err(invalid(format!("t_max must be >= 1, got {t_max}")));
    }
    if !(grid_step > 0.0) {
        return Err(invalid(format!("grid_step must be positive, got {grid_step}")));
    }
    if limit < 2 || limit > signs.prime_limit() {
        return Err(Error::OutOfRange(format!("limit {limit} must lie in [2, {}]", signs.prime_limit())));
    }
    let n_grid = ((t_max - 1.0) / grid_step * (1.0 + 1e-12)).floor() as usize + 1;
    if n_grid > 1 << 28 {
        return Err(Error::Resource(format!("{n_grid} grid points")));
    }
    let mut terms: Vec<(f64, f64)> = Vec::new();
    for_each_prime(limit, DEFAULT_SEGMENT_LEN, |p| {
        let lp = (p as f64).ln();
        terms.push((lp, signs.sign(p) as f64 * (-sigma * lp).exp()));
        ControlFlow::Continue(())
    })?;

    let n_blocks = n_grid.div_ceil(SCAN_BLOCK);
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * SCAN_BLOCK;
            let len = SCAN_BLOCK.min(n_grid - start);
            let t0 = 1.0 + start as f64 * grid_step;
            let mut cos_sum = vec![0.0; len];
            let mut log_abs = vec![0.0; len];
            for &(lp, a) in &terms {
                let (mut s, mut c) = (t0 * lp).sin_cos();
                let (sd, cd) = (grid_step * lp).sin_cos();
                let a2 = a * a;
                for j in 0..len {
                    cos_sum[j] += a * c;
                    log_abs[j] += (2.0 * a * c + a2).ln_1p();
                    let c_next = c * cd - s * sd;
                    s = s * cd + c * sd;
                    c = c_next;
                }
            }
            (cos_sum, log_abs)
        })
        .collect();

    let mut best_cos = (f64::NEG_INFINITY, 0usize);
    let mut best_abs = (f64::NEG_INFINITY, 0usize);
    let mut idx = 0usize;
    for (cos_sum, log_abs) in &blocks {
        for (c, l) in cos_sum.iter().zip(log_abs) {
            if *c > best_cos.0 {
                best_cos = (*c, idx);
            }
            if *l > best_abs.0 {
                best_abs = (*l, idx);
            }
            idx += 1;
        }
    }
    let t_of = |j: usize| 1.0 + j as f64 * grid_step;
    Ok(SupScan {
        n_grid,
        sup_cos: best_cos.0,
        argmax_t: t_of(best_cos.1),
        sup_abs_f: (0.5 * best_abs.0).exp(),
        argmax_abs_f_t: t_of(best_abs.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn explicit(pairs: &[(u64, i8)], limit: u64) -> SignAssignment {
        let pairs = pairs.to_vec();
        SignAssignment::from_fn(limit, move |p| pairs.iter().find(|q| q.0 == p).map_or(1, |q| q.1)).unwrap()
    }

    fn brute_changes(values: &[i64]) -> usize {
        let nonzero: Vec<i64> = values.iter().copied().filter(|&v| v != 0).collect();
        nonzero.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
    }

    #[test]
    fn keyed_signs_are_deterministic() {
        let a = sample_signs(7, 100_000).unwrap();
        let b = sample_signs(7, 100_000).unwrap();
        let primes = small_primes(100_000);
        assert_eq!(a.signs_for(&primes).unwrap(), b.signs_for(&primes).unwrap());
        let two = sample_signs(3, 2).unwrap();
        assert!(two.sign(2) == 1 || two.sign(2) == -1);
        assert!(sample_signs(0, 1).is_err());
    }

    #[test]
    fn neighbouring_seeds_differ_substantially() {
        let primes = small_primes(100_000);
        for seed in 0..10 {
            let a = sample_signs(seed, 100_000).unwrap().signs_for(&primes).unwrap();
            let b = sample_signs(seed + 1, 100_000).unwrap().signs_for(&primes).unwrap();
            let differ = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            assert!(differ as f64 >= 0.4 * primes.len() as f64, "seed {seed}");
        }
    }

    #[test]
    fn sign_mean_is_near_zero() {
        let primes = small_primes(1_000_000);
        let bound = 5.0 / (primes.len() as f64).sqrt();
        for seed in 0..5 {
            let s = sample_signs(seed, 1_000_000).unwrap().signs_for(&primes).unwrap();
            let mean = s.iter().map(|&x| x as f64).sum::<f64>() / s.len() as f64;
            assert!(mean.abs() < bound, "seed {seed}: {mean}");
        }
    }

    #[test]
    fn f_value_examples() {
        let s = explicit(&[(2, 1), (3, -1)], 100);
        assert_eq!(f_value(&s, 6).unwrap(), -1);
        assert_eq!(f_value(&s, 4).unwrap(), 0);
        assert_eq!(f_value(&s, 12).unwrap(), 0);
        assert_eq!(f_value(&s, 1).unwrap(), 1);
        assert!(matches!(f_value(&s, 101), Err(Error::OutOfRange(_))));
        assert!(matches!(f_value(&s, 2 * 103), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn trace_examples() {
        let s = explicit(&[(2, 1), (3, -1), (5, -1)], 100);
        let t = partial_sum_trace(&s, 6).unwrap();
        assert_eq!(t.values().unwrap(), &[1, 2, 1, 1, 0, -1]);
        let plus = SignAssignment::constant(10, 1).unwrap();
        assert_eq!(partial_sum_trace(&plus, 4).unwrap().final_value(), 3);
        let synthetic = PartialSumTrace::from_values(vec![1, 2, 1, 0, -1, 1]);
        assert_eq!(synthetic.change_points(), &[5, 6]);
        let changes: Vec<_> = synthetic.changes().collect();
        assert_eq!(changes, vec![(5, 1, -1), (6, -1, 1)]);
    }

    #[test]
    fn count_examples() {
        let t = PartialSumTrace::from_values(vec![1, 0, 2, 0, 0]);
        assert_eq!(count_sign_changes(&t, 5).unwrap(), 0);
        let t = PartialSumTrace::from_values(vec![1, -1, 1]);
        assert_eq!(count_sign_changes(&t, 3).unwrap(), 2);
        assert_eq!(count_sign_changes(&t, 2).unwrap(), 1);
        assert!(matches!(count_sign_changes(&t, 4), Err(Error::OutOfRange(_))));
        // A trailing run of zeros leaves the pending change uncounted.
        let t = PartialSumTrace::from_values(vec![1, 0, 0]);
        assert_eq!(count_sign_changes(&t, 3).unwrap(), 0);
    }

    #[test]
    fn trace_requires_signs_for_every_prime_factor() {
        let s = sample_signs(1, 1000).unwrap();
        assert!(matches!(partial_sum_trace(&s, 1001), Err(Error::OutOfRange(_))));
        let s = sample_signs(1, u64::MAX).unwrap();
        assert!(matches!(partial_sum_trace(&s, (1 << 40) + 1), Err(Error::Resource(_))));
    }

    #[test]
    fn seed_zero_regression() {
        let s = sample_signs(0, 1_000_000).unwrap();
        let t = partial_sum_trace(&s, 1_000_000).unwrap();
        let v = count_sign_changes(&t, 1_000_000).unwrap();
        assert_eq!(v, 588);
    }

    #[test]
    fn squarefree_support_matches_moebius_oracle() {
        // mu^2 by marking multiples of squares.
        let n = 100_000u64;
        let mut squarefree = vec![true; n as usize + 1];
        let mut d = 2u64;
        while d * d <= n {
            let mut m = d * d;
            while m <= n {
                squarefree[m as usize] = false;
                m += d * d;
            }
            d += 1;
        }
        let s = sample_signs(11, n).unwrap();
        for_each_f(&s, n, |k, f| {
            assert_eq!(f != 0, squarefree[k as usize], "n = {k}");
        })
        .unwrap();
    }

    #[test]
    fn streamed_values_match_trial_division() {
        let s = sample_signs(5, 200_000).unwrap();
        let mut ok = true;
        for_each_f(&s, 200_000, |n, f| {
            if n % 7 == 3 || n > 199_000 {
                ok &= f == f_value(&s, n).unwrap();
            }
        })
        .unwrap();
        assert!(ok);
    }

    #[test]
    fn checkpointed_trace_agrees_with_stream() {
        let x = FULL_TRACE_LIMIT + 100_000;
        let s = sample_signs(2, x).unwrap();
        let t = partial_sum_trace(&s, x).unwrap();
        assert!(t.values().is_none());
        let mut m = 0i64;
        let mut tracker = ChangeTracker::default();
        for_each_f(&s, x, |n, f| {
            m += f as i64;
            tracker.push(n, m);
            if n % CHECKPOINT_STRIDE == 0 {
                assert_eq!(t.value_at(n), Some(m));
            }
        })
        .unwrap();
        assert_eq!(t.final_value(), m);
        assert_eq!(t.change_points(), &tracker.points[..]);
        assert_eq!(t.value_at(CHECKPOINT_STRIDE + 1), None);
    }

    #[test]
    fn random_prime_sum_examples() {
        let plus = SignAssignment::constant(10, 1).unwrap();
        let minus = SignAssignment::constant(10, -1).unwrap();
        let a = random_prime_sum(&plus, 1.0, 10).unwrap();
        let b = random_prime_sum(&minus, 1.0, 10).unwrap();
        let expected = 0.5 + 1.0 / 3.0 + 0.2 + 1.0 / 7.0;
        assert!((a.value - expected).abs() < 1e-15);
        assert!((a.value - 1.17619).abs() < 1e-5);
        assert_eq!(b.value, -a.value);
        assert!(matches!(random_prime_sum(&plus, 0.5, 10), Err(Error::Divergent(_))));
        // sum_{p > 10} p^-2 = P(2) - (1/4 + 1/9 + 1/25 + 1/49)
        let tail = 0.452_247_420_041_065_5 - (0.25 + 1.0 / 9.0 + 0.04 + 1.0 / 49.0);
        assert!((a.tail_std * a.tail_std - tail).abs() < 1e-9);
        assert!((a.normalized - a.value / 0.452_247_420_041_065_5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normalized_prime_sum_is_rarely_large() {
        let table = PrimeTable::new(1_000_000).unwrap();
        let w = PrimeSumWeights::new(&table, 0.6, 1_000_000).unwrap();
        let large = (0..1000)
            .filter(|&seed| {
                let s = sample_signs(seed, 1_000_000).unwrap();
                w.evaluate(&s).unwrap().normalized.abs() >= 6.0
            })
            .count();
        assert!(large <= 10);
    }

    #[test]
    fn series_and_product_examples() {
        let s = sample_signs(3, 10_000).unwrap();
        let (series, product) = series_and_product(&s, Complex64::new(2.0, 0.0), 1).unwrap();
        assert_eq!(series, Complex64::new(1.0, 0.0));
        assert_eq!(product, Complex64::new(1.0, 0.0));

        let (series, product) = series_and_product(&s, Complex64::new(2.0, 0.0), 10_000).unwrap();
        let crude_tail = 10.0 / 10_000.0;
        assert!((series - product).norm() <= crude_tail);
        assert!(series.im.abs() < 1e-15);

        let plus = SignAssignment::constant(1000, 1).unwrap();
        let (series, _) = series_and_product(&plus, Complex64::new(2.0, 0.0), 1000).unwrap();
        let mut oracle = 0.0;
        for n in 1..=1000u64 {
            let squarefree = (2..=31u64).all(|d| n % (d * d) != 0);
            if squarefree {
                oracle += 1.0 / (n * n) as f64;
            }
        }
        assert!((series.re - oracle).abs() < 1e-14);
        assert!(series_and_product(&plus, Complex64::new(0.5, 1.0), 10).is_err());
    }

    #[test]
    fn abel_identity_examples() {
        let s = sample_signs(9, 10_000).unwrap();
        let r = abel_identity_residual(&s, 1.5, 1).unwrap();
        assert_eq!(r.residual, 0.0);
        let r = abel_identity_residual(&s, 1.5, 10_000).unwrap();
        assert!(r.relative <= 1e-9, "{r:?}");
        let s = sample_signs(9, 1_000_000).unwrap();
        let r = abel_identity_residual(&s, 0.6, 1_000_000).unwrap();
        assert!(r.relative <= 1e-8, "{r:?}");
    }

    #[test]
    fn abs_mellin_examples() {
        let s = sample_signs(4, 1_000_000).unwrap();
        assert_eq!(abs_mellin(&s, 0.7, 1).unwrap(), 0.0);
        // M(1) = 1, so over [1, 2) the integral is (1 - 2^-sigma) / sigma.
        let v = abs_mellin(&s, 0.7, 2).unwrap();
        assert!((v - (1.0 - 2f64.powf(-0.7)) / 0.7).abs() < 1e-15);
        let a = abs_mellin(&s, 0.7, 1_000_000).unwrap();
        let b = abs_mellin(&s, 0.6, 1_000_000).unwrap();
        let c = abs_mellin(&s, 0.55, 1_000_000).unwrap();
        assert!(a < b && b < c);
    }

    #[test]
    fn sup_scan_examples() {
        let s = sample_signs(1, 10_000).unwrap();
        let one = sup_scan(&s, 0.6, 1.0, 0.01, 10_000).unwrap();
        assert_eq!(one.n_grid, 1);
        assert_eq!(one.argmax_t, 1.0);
        let direct: f64 = small_primes(10_000)
            .iter()
            .map(|&p| s.sign(p) as f64 * (1.0 * (p as f64).ln()).cos() * (p as f64).powf(-0.6))
            .sum();
        assert!((one.sup_cos - direct).abs() < 1e-9);

        let wide = sup_scan(&s, 0.6, 5.0, 0.01, 10_000).unwrap();
        assert_eq!(wide.n_grid, 401);
        assert!(wide.sup_cos >= one.sup_cos);
        // Grid maximum agrees with direct evaluation at the reported argmax.
        let t = wide.argmax_abs_f_t;
        let direct_abs: f64 = small_primes(10_000)
            .iter()
            .map(|&p| {
                let z = Complex64::new(-0.6, -t) * (p as f64).ln();
                (1.0 + s.sign(p) as f64 * z.exp()).norm().ln()
            })
            .sum::<f64>()
            .exp();
        assert!(((wide.sup_abs_f - direct_abs) / direct_abs).abs() < 1e-9);
    }

    #[test]
    fn sup_scan_is_independent_of_thread_count() {
        let s = sample_signs(8, 20_000).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = pool.install(|| sup_scan(&s, 0.7, 4.0, 0.005, 20_000).unwrap());
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| sup_scan(&s, 0.7, 4.0, 0.005, 20_000).unwrap());
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn multiplicative_on_coprime_pairs(seed in any::<u64>(), m in 1u64..3000, n in 1u64..3000) {
            let s = sample_signs(seed, 10_000_000).unwrap();
            let g = { let (mut a, mut b) = (m, n); while b != 0 { (a, b) = (b, a % b); } a };
            prop_assume!(g == 1);
            prop_assert_eq!(f_value(&s, m * n).unwrap(), f_value(&s, m).unwrap() * f_value(&s, n).unwrap());
        }

        #[test]
        fn trace_invariants(seed in any::<u64>(), x in 1u64..10_000) {
            let s = sample_signs(seed, 10_000).unwrap();
            let t = partial_sum_trace(&s, x).unwrap();
            let v = t.values().unwrap();
            prop_assert_eq!(v[0], 1);
            let mut prev = 0;
            for (n, &m) in (1u64..).zip(v) {
                prop_assert_eq!(m - prev, f_value(&s, n).unwrap() as i64);
                prev = m;
            }
            prop_assert_eq!(count_sign_changes(&t, x).unwrap(), brute_changes(v));
        }

        #[test]
        fn synthetic_counts_match_brute_force(values in prop::collection::vec(-3i64..=3, 1..200)) {
            let t = PartialSumTrace::from_values(values.clone());
            prop_assert_eq!(count_sign_changes(&t, values.len() as u64).unwrap(), brute_changes(&values));
        }
    }
}
