//! Tail bounds for signed prime sums and the Monte Carlo experiments that
//! check them.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::keyed::{derive_seed, keyed_hash};
use crate::prime_series::{variance_sum, CertifiedValue};
use crate::primes::PrimeTable;
use crate::rmf::{csv_writer, PrimeSumWeights};
use crate::sequences::{step_sigma_ell, StepParams};

/// Trials are split into chunks of this size so counts never depend on the
/// thread count.
const TRIAL_CHUNK: u64 = 256;

/// `exp(-lambda^2 / (2 sum_sq))`: one-sided bound on `P(sum a_p f(p) >= lambda)`.
pub fn hoeffding_bound(sum_sq_coeffs: f64, lambda: f64) -> Result<f64> {
    if !(sum_sq_coeffs > 0.0) {
        return Err(invalid(format!("sum of squared coefficients must be positive, got {sum_sq_coeffs}")));
    }
    if !(lambda >= 0.0) {
        return Err(invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    Ok((-lambda * lambda / (2.0 * sum_sq_coeffs)).exp())
}

/// Bound on `P(|sum a_p f(p)| >= lambda)`, capped at 1.
pub fn hoeffding_bound_two_sided(sum_sq_coeffs: f64, lambda: f64) -> Result<f64> {
    Ok((2.0 * hoeffding_bound(sum_sq_coeffs, lambda)?).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSpec {
    pub sigma: f64,
    pub prime_limit: u64,
    /// Threshold for the prime sum normalized by its truncated standard deviation.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailExperiment {
    pub trials: u64,
    pub threshold: f64,
    /// Frequency of `normalized >= threshold`.
    pub empirical_freq: f64,
    pub std_err: f64,
    /// Hoeffding bound for the same event; 1 for negative thresholds.
    pub bound: f64,
    /// Frequency of `normalized <= -threshold`.
    pub lower_freq: f64,
}

fn std_err(freq: f64, trials: u64) -> f64 {
    (freq * (1.0 - freq) / trials as f64).sqrt()
}

/// Counts, over `trials` independent sign draws, how often each of `events`
/// holds. Trial `i` uses the seed `derive_seed(base_seed, i)`.
fn count_events<F>(trials: u64, base_seed: u64, n_events: usize, primes: &[u64], events: F) -> Vec<u64>
where
    F: Fn(&[i8], &mut [u64]) + Sync,
{
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; n_events];
            let mut signs = vec![0i8; primes.len()];
            for i in c * TRIAL_CHUNK..trials.min((c + 1) * TRIAL_CHUNK) {
                let seed = derive_seed(base_seed, i);
                for (s, &p) in signs.iter_mut().zip(primes) {
                    *s = if keyed_hash(seed, p) & 1 == 1 { 1 } else { -1 };
                }
                events(&signs, &mut counts);
            }
            counts
        })
        .reduce(
            || vec![0u64; n_events],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// Empirical frequency of `{P(sigma) / sqrt(E_trunc) >= threshold}` for the
/// prime sum truncated at `prime_limit`, with `E_trunc = sum_{p <= prime_limit} p^(-2 sigma)`.
///
/// Per-trial signs match `sample_signs(derive_seed(base_seed, i), _)`.
pub fn mc_tail(spec: &TailSpec, trials: u64, base_seed: u64) -> Result<TailExperiment> {
    if trials < 100 {
        return Err(invalid(format!("at least 100 trials are required, got {trials}")));
    }
    if !(spec.sigma > 0.5) {
        return Err(Error::Divergent(format!("sigma = {} <= 1/2", spec.sigma)));
    }
    let table = PrimeTable::new(spec.prime_limit)?;
    let weights = PrimeSumWeights::new(&table, spec.sigma, spec.prime_limit)?;
    let e = weights.truncated_variance();
    let cut = spec.threshold * e.sqrt();
    let counts = count_events(trials, base_seed, 2, weights.primes(), |signs, counts| {
        let v = weights.evaluate_signs(signs).value;
        counts[0] += (v >= cut) as u64;
        counts[1] += (v <= -cut) as u64;
    });
    let freq = counts[0] as f64 / trials as f64;
    let bound = if spec.threshold >= 0.0 { hoeffding_bound(e, cut)? } else { 1.0 };
    Ok(TailExperiment {
        trials,
        threshold: spec.threshold,
        empirical_freq: freq,
        std_err: std_err(freq, trials),
        bound,
        lower_freq: counts[1] as f64 / trials as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BcSeries {
    /// Terms `exp(-(1 + gamma) ell^((1 - delta) epsilon))`, `delta = epsilon / 2`.
    Step2 { gamma: f64, epsilon: f64 },
    /// Terms `q^r` with `q = 2 exp(-ell^(2 delta))`, summed over `r >= 1`.
    Bigterm { ell: u64, delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BcPartial {
    pub terms: u64,
    pub partial_sum: f64,
    /// Upper bound on the omitted terms.
    pub tail_estimate: f64,
    /// Common ratio `q` of the bigterm series.
    pub ratio: Option<f64>,
    /// `2 (partial_sum + tail_estimate)`, the full probability bound.
    pub scaled_sum: Option<f64>,
    /// `16 exp(-ell^(2 delta))`.
    pub closed_bound: Option<f64>,
    /// `log(closed_bound) - log(scaled_sum)`, finite even when both underflow.
    pub log_margin: Option<f64>,
    pub closed_bound_holds: Option<bool>,
    pub ratio_below_three_quarters: Option<bool>,
}

/// Upper bound on `Gamma(a, y)`.
fn upper_gamma_bound(a: f64, y: f64) -> f64 {
    let lead = ((a - 1.0) * y.ln() - y).exp();
    if a <= 1.0 {
        lead
    } else if y > a - 1.0 {
        lead / (1.0 - (a - 1.0) / y)
    } else {
        f64::INFINITY
    }
}

pub fn borel_cantelli_partial(series: BcSeries, terms: u64) -> Result<BcPartial> {
    if terms == 0 {
        return Err(invalid("terms must be >= 1"));
    }
    match series {
        BcSeries::Step2 { gamma, epsilon } => {
            if !(gamma > 0.0) {
                return Err(invalid(format!("gamma must be positive, got {gamma}")));
            }
            let step = StepParams::new(epsilon)?;
            let a = 1.0 + gamma;
            let s = (1.0 - step.delta) * epsilon;
            let partial: f64 = (1..=terms).map(|l| (-a * (l as f64).powf(s)).exp()).sum();
            // sum_{l > n} exp(-a l^s) <= int_n^inf exp(-a x^s) dx
            //   = (1/s) a^(-1/s) Gamma(1/s, a n^s)
            let y = a * (terms as f64).powf(s);
            let tail = a.powf(-1.0 / s) / s * upper_gamma_bound(1.0 / s, y);
            Ok(BcPartial {
                terms,
                partial_sum: partial,
                tail_estimate: tail,
                ratio: None,
                scaled_sum: None,
                closed_bound: None,
                log_margin: None,
                closed_bound_holds: None,
                ratio_below_three_quarters: None,
            })
        }
        BcSeries::Bigterm { ell, delta } => {
            if ell == 0 {
                return Err(invalid("ell must be >= 1"));
            }
            if !(delta > 0.0 && delta < 1.0) {
                return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
            }
            let big_l = (ell as f64).powf(2.0 * delta);
            let log_q = std::f64::consts::LN_2 - big_l;
            let q = log_q.exp();
            // sum_{r=1}^n q^r = q (1 - q^n) / (1 - q), tail q^(n+1) / (1 - q)
            let qn = (terms as f64 * log_q).exp();
            let partial = q * -(terms as f64 * log_q).exp_m1() / (1.0 - q);
            let tail = q * qn / (1.0 - q);
            let closed = 16.0 * (-big_l).exp();
            // log(2 (partial + tail)) = log 2 + log q - log(1 - q)
            let log_scaled = std::f64::consts::LN_2 + log_q - (-q).ln_1p();
            let log_margin = (16f64.ln() - big_l) - log_scaled;
            Ok(BcPartial {
                terms,
                partial_sum: partial,
                tail_estimate: tail,
                ratio: Some(q),
                scaled_sum: Some(2.0 * (partial + tail)),
                closed_bound: Some(closed),
                log_margin: Some(log_margin),
                closed_bound_holds: Some(log_margin >= 0.0),
                ratio_below_three_quarters: Some(log_q < 0.75f64.ln()),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeSeries {
    pub sigma: f64,
    pub converges: bool,
    /// `sum_p p^(-2 sigma)` when finite.
    pub variance: Option<CertifiedValue>,
}

/// Almost-sure convergence of `sum_p f(p) p^-sigma`. The terms are bounded,
/// so the criterion reduces to finiteness of the variance series.
pub fn three_series_check(sigma: f64) -> Result<ThreeSeries> {
    if !(sigma > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    let variance = match variance_sum(sigma) {
        Ok(v) => Some(v),
        Err(Error::Divergent(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ThreeSeries { sigma, converges: variance.is_some(), variance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Step2Row {
    pub ell: u64,
    pub sigma: f64,
    /// `sum_{p <= prime_limit} p^(-2 sigma)`.
    pub e_trunc: f64,
    /// `sqrt(2 (1 + gamma) E_trunc^epsilon)`.
    pub threshold: f64,
    pub emp_freq: f64,
    pub std_err: f64,
    pub hoeffding_bound: f64,
    /// `exp(-(1 + gamma) ell^((1 - delta) epsilon))`.
    pub asymptotic_surrogate: f64,
    /// Certified `sum_{p > prime_limit} p^(-2 sigma)` upper bound.
    pub truncation_deficit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Step2Config {
    pub step: StepParams,
    pub gamma: f64,
    pub ell_min: u64,
    pub ell_max: u64,
    pub trials: u64,
    pub prime_limit: u64,
    pub base_seed: u64,
}

impl Default for Step2Config {
    fn default() -> Self {
        Self {
            step: StepParams { epsilon: 1.0, delta: 0.5 },
            gamma: 1.0,
            ell_min: 1,
            ell_max: 8,
            trials: 10_000,
            prime_limit: 100_000,
            base_seed: 0,
        }
    }
}

/// One row per `ell`: how often `P(sigma_ell) / sqrt(E)` reaches
/// `sqrt(2 (1 + gamma) E^epsilon)`. Each trial draws its signs once and uses
/// them for every row.
pub fn step2_experiment(cfg: &Step2Config) -> Result<Vec<Step2Row>> {
    if cfg.trials == 0 {
        return Err(invalid("trials must be >= 1"));
    }
    if !(cfg.gamma > 0.0) {
        return Err(invalid(format!("gamma must be positive, got {}", cfg.gamma)));
    }
    let step = StepParams::new(cfg.step.epsilon)?;
    if (step.delta - cfg.step.delta).abs() > 1e-12 {
        return Err(invalid("delta must equal epsilon / 2"));
    }
    if cfg.ell_min == 0 || cfg.ell_min > cfg.ell_max {
        return Err(invalid(format!("invalid ell range {}..={}", cfg.ell_min, cfg.ell_max)));
    }
    let table = PrimeTable::new(cfg.prime_limit)?;
    let ells: Vec<u64> = (cfg.ell_min..=cfg.ell_max).collect();
    let mut weights = Vec::with_capacity(ells.len());
    let mut rows = Vec::with_capacity(ells.len());
    for &ell in &ells {
        let sigma = step_sigma_ell(ell, &step)?.value;
        let w = PrimeSumWeights::new(&table, sigma, cfg.prime_limit)?;
        let e = w.truncated_variance();
        let threshold = (2.0 * (1.0 + cfg.gamma) * e.powf(step.epsilon)).sqrt();
        rows.push(Step2Row {
            ell,
            sigma,
            e_trunc: e,
            threshold,
            emp_freq: 0.0,
            std_err: 0.0,
            hoeffding_bound: hoeffding_bound(e, threshold * e.sqrt())?,
            asymptotic_surrogate: (-(1.0 + cfg.gamma) * (ell as f64).powf((1.0 - step.delta) * step.epsilon)).exp(),
            truncation_deficit: w.tail_std().powi(2),
        });
        weights.push(w);
    }
    let cuts: Vec<f64> = rows.iter().map(|r| r.threshold * r.e_trunc.sqrt()).collect();
    let counts = count_events(cfg.trials, cfg.base_seed, ells.len(), table.primes(), |signs, counts| {
        for (k, w) in weights.iter().enumerate() {
            counts[k] += (w.evaluate_signs(signs).value >= cuts[k]) as u64;
        }
    });
    for (row, c) in rows.iter_mut().zip(counts) {
        row.emp_freq = c as f64 / cfg.trials as f64;
        row.std_err = std_err(row.emp_freq, cfg.trials);
    }
    Ok(rows)
}

/// Columns `ell, sigma, E_trunc, threshold, emp_freq, std_err, hoeffding_bound,
/// asymptotic_surrogate`, then the truncation deficit.
pub fn write_step2_csv<W: Write>(rows: &[Step2Row], w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "ell",
        "sigma",
        "E_trunc",
        "threshold",
        "emp_freq",
        "std_err",
        "hoeffding_bound",
        "asymptotic_surrogate",
        "truncation_deficit",
    ])?;
    for r in rows {
        out.write_record([
            r.ell.to_string(),
            r.sigma.to_string(),
            r.e_trunc.to_string(),
            r.threshold.to_string(),
            r.emp_freq.to_string(),
            r.std_err.to_string(),
            r.hoeffding_bound.to_string(),
            r.asymptotic_surrogate.to_string(),
            r.truncation_deficit.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
