//! Dyadic grids and the chaining bound for oscillations.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::prime_series::LOG_WEIGHT_CONSTANT;
use crate::primes::PrimeTable;
use crate::rmf::{csv_writer, PrimeSumWeights, SignAssignment};
use crate::sequences::{step_sigma_ell, StepParams};

pub const MAX_GRID_DEPTH: u32 = 30;
/// Tail sums stop once terms drop below this fraction of the running total.
const TAIL_REL: f64 = 1e-15;
/// Primes advanced together in the oscillation kernel.
const LANES: usize = 8;
/// Geometric recurrences restart from an exact power this often.
const RESYNC: usize = 256;

/// Points `a + (n / 2^r)(b - a)` for `n = 0..=2^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicGrid {
    a: f64,
    b: f64,
    r: u32,
}

pub fn dyadic_grid(a: f64, b: f64, r: u32) -> Result<DyadicGrid> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(invalid(format!("grid needs finite a < b, got [{a}, {b}]")));
    }
    if r > MAX_GRID_DEPTH {
        return Err(invalid(format!("grid depth must be at most {MAX_GRID_DEPTH}, got {r}")));
    }
    Ok(DyadicGrid { a, b, r })
}

impl DyadicGrid {
    pub fn depth(&self) -> u32 {
        self.r
    }

    pub fn len(&self) -> usize {
        (1usize << self.r) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `tau_r(n)`. The ratio `n / 2^r` is exact, so `tau_{r+1}(2n) == tau_r(n)`
    /// bit for bit and both endpoints are reproduced exactly.
    pub fn point(&self, n: u64) -> f64 {
        assert!(n <= 1u64 << self.r);
        let frac = n as f64 / (1u64 << self.r) as f64;
        self.a * (1.0 - frac) + self.b * frac
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=(1u64 << self.r)).map(|n| self.point(n)).collect()
    }
}

/// The `R` with `(b - a)/2^(R+1) < |s - t| <= (b - a)/2^R`.
pub fn chaining_r(a: f64, b: f64, s: f64, t: f64) -> Result<i32> {
    let d = (s - t).abs();
    if d == 0.0 {
        return Err(invalid("chaining level is undefined for s = t"));
    }
    let w = b - a;
    if !(w > 0.0) || !(s >= a && s <= b && t >= a && t <= b) {
        return Err(invalid(format!("points {s}, {t} must lie in [{a}, {b}]")));
    }
    let scaled = |r: i32| w * 2f64.powi(-r);
    let mut r = (w / d).log2().floor() as i32;
    while scaled(r) < d {
        r -= 1;
    }
    while scaled(r + 1) >= d {
        r += 1;
    }
    Ok(r)
}

/// Per-level increments `lambda_r`, `r >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LambdaSchedule {
    /// `lambda_r^2 = 2 c1 r / 4^r`.
    SqrtDecay { c1: f64 },
    /// `lambda_r = scale * ratio^r`.
    Geometric { scale: f64, ratio: f64 },
    /// Given levels `1..=len`, halving beyond the last.
    Observed(Vec<f64>),
}

impl LambdaSchedule {
    pub fn lambda(&self, r: u32) -> f64 {
        assert!(r >= 1);
        match self {
            Self::SqrtDecay { c1 } => (2.0 * c1 * r as f64).sqrt() * 2f64.powi(-(r as i32)),
            Self::Geometric { scale, ratio } => scale * ratio.powi(r as i32),
            Self::Observed(levels) => {
                let n = levels.len() as u32;
                if r <= n {
                    levels[r as usize - 1]
                } else {
                    levels.last().copied().unwrap_or(0.0) * 2f64.powi(-((r - n) as i32))
                }
            }
        }
    }

    /// `sum_{r > big_r} lambda_r`.
    pub fn tail(&self, big_r: i32) -> f64 {
        let start = (big_r + 1).max(1) as u32;
        match self {
            Self::SqrtDecay { .. } => {
                let mut total = 0.0;
                let mut r = start;
                loop {
                    let term = self.lambda(r);
                    total += term;
                    if term <= TAIL_REL * total || r > 4000 {
                        return total;
                    }
                    r += 1;
                }
            }
            Self::Geometric { scale, ratio } => scale * ratio.powi(start as i32) / (1.0 - ratio),
            Self::Observed(levels) => {
                let n = levels.len() as u32;
                let last = levels.last().copied().unwrap_or(0.0);
                if start > n {
                    // sum_{r >= start} last 2^(n - r)
                    last * 2f64.powi(n as i32 + 1 - start as i32)
                } else {
                    levels[start as usize - 1..].iter().sum::<f64>() + last
                }
            }
        }
    }

    /// `2 sum_{r >= 1} lambda_r`.
    pub fn chaining_constant(&self) -> f64 {
        2.0 * self.tail(0)
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::SqrtDecay { c1 } => *c1 > 0.0 && c1.is_finite(),
            Self::Geometric { scale, ratio } => *scale >= 0.0 && *ratio > 0.0 && *ratio < 1.0,
            Self::Observed(levels) => levels.iter().all(|l| *l >= 0.0 && l.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid lambda schedule {self:?}")))
        }
    }
}

/// `2 sum_{r > R} lambda_r`, zero when `s = t`.
pub fn chaining_bound(sched: &LambdaSchedule, a: f64, b: f64, s: f64, t: f64) -> Result<f64> {
    sched.validate()?;
    if s == t {
        return Ok(0.0);
    }
    Ok(2.0 * sched.tail(chaining_r(a, b, s, t)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainingReport {
    pub hypothesis_holds: bool,
    pub conclusion_holds: bool,
    /// First level whose increments exceed `lambda_r`.
    pub first_hypothesis_violation: Option<u32>,
    /// Largest `|f(s) - f(t)| / bound` over grid pairs.
    pub max_ratio: f64,
    pub pairs_checked: u64,
}

/// Largest adjacent increment of `samples` at each level `1..=r_max`, where
/// `samples` holds `f` on the finest grid of depth `r_max`.
pub fn observed_levels(samples: &[f64]) -> Result<Vec<f64>> {
    let r_max = depth_of(samples)?;
    Ok((1..=r_max)
        .map(|r| {
            let stride = 1usize << (r_max - r);
            samples
                .iter()
                .step_by(stride)
                .zip(samples.iter().step_by(stride).skip(1))
                .map(|(x, y)| (y - x).abs())
                .fold(0.0, f64::max)
        })
        .collect())
}

fn depth_of(samples: &[f64]) -> Result<u32> {
    let n = samples.len().wrapping_sub(1);
    if samples.len() < 2 || !n.is_power_of_two() {
        return Err(invalid(format!("expected 2^r + 1 samples, got {}", samples.len())));
    }
    Ok(n.trailing_zeros())
}

/// Checks the per-level hypothesis and the pairwise conclusion for `f`
/// sampled on the finest grid of `[a, b]`.
pub fn verify_chaining(samples: &[f64], sched: &LambdaSchedule) -> Result<ChainingReport> {
    sched.validate()?;
    let r_max = depth_of(samples)?;
    let levels = observed_levels(samples)?;
    let first_hypothesis_violation =
        (1..=r_max).find(|&r| levels[r as usize - 1] > sched.lambda(r));
    // Pairs at index gap g sit at level R = r_max - ceil(log2 g).
    let bounds: Vec<f64> = (0..=r_max as i32).map(|r| 2.0 * sched.tail(r)).collect();
    let n = samples.len();
    let (max_ratio, conclusion_holds) = (1..n)
        .into_par_iter()
        .map(|g| {
            let big_r = r_max as i32 - (usize::BITS - (g - 1).leading_zeros()) as i32;
            let bound = bounds[big_r as usize];
            let worst = samples.windows(g + 1).map(|w| (w[g] - w[0]).abs()).fold(0.0, f64::max);
            let ratio = if worst == 0.0 { 0.0 } else { worst / bound };
            (ratio, worst <= bound)
        })
        .reduce(|| (0.0, true), |x, y| (x.0.max(y.0), x.1 && y.1));
    Ok(ChainingReport {
        hypothesis_holds: first_hypothesis_violation.is_none(),
        conclusion_holds,
        first_hypothesis_violation,
        max_ratio,
        pairs_checked: (n * (n - 1) / 2) as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationResult {
    pub ell: u64,
    pub sigma_ell: f64,
    pub sigma_prev: f64,
    /// Grid maximum of `|P(sigma) - P(sigma_ell)|` over `[sigma_ell, sigma_{ell-1}]`.
    pub max_osc: f64,
    /// Chaining constant for `lambda_r^2 = 8 r / 4^r`.
    pub paper_c: f64,
    /// First level whose adjacent increments reach `lambda_r`.
    pub first_violation_r: Option<u32>,
    /// Least `u` such that no level `r` in `u..=r_max` has an increment `>= lambda_r`.
    pub u_ell: u32,
    /// Standard deviation of the omitted primes at `sigma_ell`.
    pub truncation_std: f64,
}

/// Precomputed prime data shared across seeds for one `(ell, limit)`.
#[derive(Debug, Clone)]
pub struct OscillationSetup {
    ell: u64,
    sigma_ell: f64,
    sigma_prev: f64,
    r_max: u32,
    primes: Vec<u64>,
    base: Vec<f64>,
    ratio: Vec<f64>,
    truncation_std: f64,
}

impl OscillationSetup {
    pub fn new(table: &PrimeTable, ell: u64, step: &StepParams, r_max: u32, limit: u64) -> Result<Self> {
        if ell < 2 {
            return Err(invalid(format!("ell must be >= 2, got {ell}")));
        }
        if r_max > 20 {
            return Err(Error::Resource(format!("r_max {r_max} exceeds 20")));
        }
        let sigma_ell = step_sigma_ell(ell, step)?.value;
        let sigma_prev = step_sigma_ell(ell - 1, step)?.value;
        let weights = PrimeSumWeights::new(table, sigma_ell, limit)?;
        let h = (sigma_prev - sigma_ell) / (1u64 << r_max) as f64;
        let primes = weights.primes().to_vec();
        let ratio = primes.iter().map(|&p| (-h * (p as f64).ln()).exp()).collect();
        Ok(Self {
            ell,
            sigma_ell,
            sigma_prev,
            r_max,
            primes,
            base: weights.weights().to_vec(),
            ratio,
            truncation_std: weights.tail_std(),
        })
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn run(&self, signs: &SignAssignment) -> Result<OscillationResult> {
        if let Some(&p) = self.primes.last() {
            signs.try_sign(p)?;
        }
        let s: Vec<i8> = self.primes.iter().map(|&p| signs.sign(p)).collect();
        Ok(self.run_signs(&s))
    }

    /// Same as [`run`](Self::run) with signs already looked up for [`primes`](Self::primes).
    pub fn run_signs(&self, signs: &[i8]) -> OscillationResult {
        assert_eq!(signs.len(), self.primes.len());
        let n = (1usize << self.r_max) + 1;
        // diff[j] = P(sigma_j) - P(sigma_ell) = sum_p f(p) p^-sigma_ell (p^(-j h) - 1)
        let mut diff = vec![0.0; n];
        let m = self.primes.len();
        let mut i = 0;
        while i < m {
            let lanes = LANES.min(m - i);
            let mut w = [0.0f64; LANES];
            let mut q = [1.0f64; LANES];
            let mut pw = [1.0f64; LANES];
            for k in 0..lanes {
                w[k] = signs[i + k] as f64 * self.base[i + k];
                q[k] = self.ratio[i + k];
            }
            for (j, d) in diff.iter_mut().enumerate() {
                if j % RESYNC == 0 && j > 0 {
                    for k in 0..lanes {
                        pw[k] = q[k].powi(j as i32);
                    }
                }
                let mut acc = 0.0;
                for k in 0..LANES {
                    acc += w[k] * (pw[k] - 1.0);
                    pw[k] *= q[k];
                }
                *d += acc;
            }
            i += lanes;
        }
        let max_osc = diff.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        let paper = LambdaSchedule::SqrtDecay { c1: LOG_WEIGHT_CONSTANT };
        let levels = observed_levels(&diff).expect("grid has 2^r + 1 points");
        let violations: Vec<u32> = (1..=self.r_max).filter(|&r| levels[r as usize - 1] >= paper.lambda(r)).collect();
        let first_violation_r = violations.first().copied();
        let u_ell = violations.last().map_or(1, |r| r + 1);
        OscillationResult {
            ell: self.ell,
            sigma_ell: self.sigma_ell,
            sigma_prev: self.sigma_prev,
            max_osc,
            paper_c: paper.chaining_constant(),
            first_violation_r,
            u_ell,
            truncation_std: self.truncation_std,
        }
    }
}

/// `max |P(sigma) - P(sigma_ell)|` over the depth-`r_max` grid of
/// `[sigma_ell, sigma_{ell-1}]`, with `P` truncated to primes `<= limit`.
pub fn oscillation_experiment(
    signs: &SignAssignment,
    ell: u64,
    step: &StepParams,
    r_max: u32,
    limit: u64,
) -> Result<OscillationResult> {
    let table = PrimeTable::new(limit.max(2))?;
    OscillationSetup::new(&table, ell, step, r_max, limit)?.run(signs)
}

/// Columns `ell, sigma_ell, max_osc, paper_C, first_violation_r`, plus the
/// seed and diagnostics.
pub fn write_oscillation_csv<W: Write>(rows: &[(u64, OscillationResult)], w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "ell",
        "sigma_ell",
        "max_osc",
        "paper_C",
        "first_violation_r",
        "seed",
        "u_ell",
        "truncation_std",
    ])?;
    for (seed, r) in rows {
        out.write_record([
            r.ell.to_string(),
            r.sigma_ell.to_string(),
            r.max_osc.to_string(),
            r.paper_c.to_string(),
            r.first_violation_r.map_or_else(String::new, |v| v.to_string()),
            seed.to_string(),
            r.u_ell.to_string(),
            r.truncation_std.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
