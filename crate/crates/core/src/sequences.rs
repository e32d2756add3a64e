//! Parameter sequences whose magnitudes are triple exponentials, stored as
//! iterated logarithms.

use std::cmp::Ordering;
use std::io::Write;

use serde::Serialize;

use crate::error::{domain, invalid, Result};
use crate::rmf::csv_writer;

/// Deepest supported iterated logarithm.
pub const MAX_DEPTH: u8 = 3;
/// `exp` overflows beyond this.
const EXP_MAX: f64 = 709.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremParams {
    pub c: f64,
    pub a0: f64,
    pub a1: f64,
}

impl TheoremParams {
    pub fn new(c: f64, a0: f64, a1: f64) -> Result<Self> {
        if !(c > 2.0) {
            return Err(invalid(format!("c must exceed 2, got {c}")));
        }
        if !(a0 > 0.0 && a0 < 1.0 / 6.0) {
            return Err(invalid(format!("A0 must lie in (0, 1/6), got {a0}")));
        }
        if !(a1 > 1.0) || !a1.is_finite() {
            return Err(invalid(format!("A1 must exceed 1, got {a1}")));
        }
        Ok(Self { c, a0, a1 })
    }
}

impl Default for TheoremParams {
    fn default() -> Self {
        Self { c: 3.0, a0: 0.1, a1: 1.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl StepParams {
    /// `delta = epsilon / 2` with `0 < epsilon < 2`.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 2.0) {
            return Err(invalid(format!("epsilon must lie in (0, 2), got {epsilon}")));
        }
        Ok(Self { epsilon, delta: epsilon / 2.0 })
    }

    pub fn from_delta(delta: f64) -> Result<Self> {
        Self::new(2.0 * delta)
    }
}

/// A positive magnitude `x` stored as `log^(depth)(x)`.
///
/// Depth 0 holds any real; depth 2 requires a positive mantissa. Values of
/// different depth compare by taking further logarithms of the shallower one;
/// a value whose logarithm chain leaves the positive reals is the smaller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NestedLogReal {
    depth: u8,
    mantissa: f64,
}

impl NestedLogReal {
    pub fn new(depth: u8, mantissa: f64) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(invalid(format!("depth must be at most {MAX_DEPTH}, got {depth}")));
        }
        if !mantissa.is_finite() {
            return Err(invalid(format!("mantissa must be finite, got {mantissa}")));
        }
        if depth == 2 && mantissa <= 0.0 {
            return Err(invalid(format!("depth-2 mantissa must be positive, got {mantissa}")));
        }
        Ok(Self { depth, mantissa })
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        Self::new(0, x)
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    /// `log^(target)(x)`, or `None` when some intermediate logarithm is not
    /// positive. Lowering the depth may overflow to infinity.
    pub fn at_depth(&self, target: u8) -> Option<f64> {
        let mut m = self.mantissa;
        let mut d = self.depth;
        while d < target {
            if m <= 0.0 {
                return None;
            }
            m = m.ln();
            d += 1;
        }
        while d > target {
            m = m.exp();
            d -= 1;
        }
        Some(m)
    }

    pub fn to_f64(&self) -> f64 {
        self.at_depth(0).expect("lowering never fails")
    }

    /// `log log x`, possibly infinite.
    pub fn loglog(&self) -> Option<f64> {
        self.at_depth(2)
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        let mut t = self.depth.max(other.depth);
        loop {
            match (self.at_depth(t), other.at_depth(t)) {
                (Some(a), Some(b)) => return a.total_cmp(&b),
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (None, None) => t -= 1,
            }
        }
    }
}

impl PartialOrd for NestedLogReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaK {
    pub k: u64,
    /// `k^c`.
    pub k_pow_c: f64,
    pub value: f64,
    /// `sigma_k - 1/2 = exp(-exp(k^c))`.
    pub gap: f64,
    /// `log(1/(sigma_k - 1/2)) = exp(k^c)`; infinite once `k^c > 709`.
    pub log_inv_gap: f64,
    /// Set when `value` rounds to exactly 1/2; `gap` and `log_inv_gap` stay
    /// meaningful until they under- or overflow themselves.
    pub underflow: bool,
}

/// `sigma_k = 1/2 + exp(-exp(k^c))`.
pub fn sigma_k(k: u64, params: &TheoremParams) -> Result<SigmaK> {
    if k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    let k_pow_c = (k as f64).powf(params.c);
    let log_inv_gap = k_pow_c.exp();
    let gap = (-log_inv_gap).exp();
    let value = 0.5 + gap;
    Ok(SigmaK { k, k_pow_c, value, gap, log_inv_gap, underflow: value == 0.5 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalEndpoints {
    pub y: NestedLogReal,
    pub x: NestedLogReal,
}

/// `(y_k, X_k)` with `log log X_k = 2 exp(k^c)` and
/// `log log y_k = A0 exp(k^c) - A1 k^c`.
pub fn interval_endpoints(k: u64, params: &TheoremParams) -> Result<IntervalEndpoints> {
    if k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    let kc = (k as f64).powf(params.c);
    if kc > EXP_MAX - 1.0 {
        let x = NestedLogReal::new(3, std::f64::consts::LN_2 + kc)?;
        let rel = -params.a1 * kc * (-kc).exp() / params.a0;
        let y = NestedLogReal::new(3, kc + params.a0.ln() + rel.ln_1p())?;
        return Ok(IntervalEndpoints { y, x });
    }
    let e = kc.exp();
    let x = NestedLogReal::new(2, 2.0 * e)?;
    let loglog_y = params.a0 * e - params.a1 * kc;
    let y = if loglog_y > 0.0 {
        NestedLogReal::new(2, loglog_y)?
    } else {
        NestedLogReal::new(1, loglog_y.exp())?
    };
    Ok(IntervalEndpoints { y, x })
}

/// `X_k < y_{k+1}`.
pub fn intervals_disjoint(k: u64, params: &TheoremParams) -> Result<bool> {
    let here = interval_endpoints(k, params)?;
    let next = interval_endpoints(k + 1, params)?;
    Ok(here.x.total_cmp(&next.y) == Ordering::Less)
}

/// `(log(7 log log x))^(1/c) - C`.
pub fn corollary_lower_bound(x: &NestedLogReal, c: f64, big_c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(invalid(format!("c must be positive, got {c}")));
    }
    // log log log x, taken from the deepest representation available.
    let logloglog = match x.at_depth(3) {
        Some(v) => v,
        None => return Err(domain("log log x must be positive")),
    };
    let inner = 7f64.ln() + logloglog;
    if inner < 0.0 {
        return Err(domain(format!("log(7 log log x) = {inner} is negative")));
    }
    Ok(inner.powf(1.0 / c) - big_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaEll {
    pub ell: u64,
    pub value: f64,
    /// `log(1/(2 sigma_ell - 1)) = ell^(1 - delta)`.
    pub log_inv_gap: f64,
}

/// `sigma_ell = 1/2 + 1/(2 exp(ell^(1 - delta)))`.
pub fn step_sigma_ell(ell: u64, step: &StepParams) -> Result<SigmaEll> {
    if ell == 0 {
        return Err(invalid("ell must be >= 1"));
    }
    let a = (ell as f64).powf(1.0 - step.delta);
    Ok(SigmaEll { ell, value: 0.5 + 0.5 * (-a).exp(), log_inv_gap: a })
}

/// `(sigma_{ell-1} - sigma_ell) ell^delta / (2 sigma_ell - 1)`; the
/// inequality holds where this is at most 1.
pub fn subtraction_ratio(ell: u64, step: &StepParams) -> f64 {
    assert!(ell >= 2);
    let l = ell as f64;
    let e = 1.0 - step.delta;
    // ell^e - (ell-1)^e = -ell^e expm1(e log(1 - 1/ell))
    let diff = -l.powf(e) * (e * (-1.0 / l).ln_1p()).exp_m1();
    0.5 * diff.exp_m1() * l.powf(step.delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubtractionScan {
    /// Smallest `ell_1` with the inequality holding on `[ell_1, ell_max]`.
    pub ell1: Option<u64>,
    pub ell_max: u64,
    pub holds_at_max: bool,
    pub max_ratio: f64,
}

pub fn subtraction_bound_scan(step: &StepParams, ell_max: u64) -> Result<SubtractionScan> {
    if ell_max < 2 {
        return Err(invalid(format!("ell_max must be >= 2, got {ell_max}")));
    }
    let mut last_fail = None;
    let mut max_ratio = f64::NEG_INFINITY;
    for ell in 2..=ell_max {
        let r = subtraction_ratio(ell, step);
        max_ratio = max_ratio.max(r);
        if !(r <= 1.0) {
            last_fail = Some(ell);
        }
    }
    let holds_at_max = last_fail != Some(ell_max);
    let ell1 = match last_fail {
        None => Some(2),
        Some(l) if l < ell_max => Some(l + 1),
        Some(_) => None,
    };
    Ok(SubtractionScan { ell1, ell_max, holds_at_max, max_ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarperBound {
    /// `C0 lambda - C1 log lambda + C2` with `lambda = log(1/(sigma - 1/2))`.
    pub l: f64,
    /// `2 lambda^2`.
    pub t: f64,
    /// `lambda^2`, the shorter horizon.
    pub t_short: f64,
}

pub fn harper_lower_bound(sigma: f64, c0: f64, c1: f64, c2: f64) -> Result<HarperBound> {
    if !(sigma > 0.5) {
        return Err(invalid(format!("sigma must exceed 1/2, got {sigma}")));
    }
    harper_lower_bound_from_log((1.0 / (sigma - 0.5)).ln(), c0, c1, c2)
}

/// Same as [`harper_lower_bound`] given `lambda = log(1/(sigma - 1/2))` directly.
pub fn harper_lower_bound_from_log(lambda: f64, c0: f64, c1: f64, c2: f64) -> Result<HarperBound> {
    if !(c0 > 0.0 && c0 < 0.5) {
        return Err(invalid(format!("C0 must lie in (0, 1/2), got {c0}")));
    }
    if !(c1 > 1.0) {
        return Err(invalid(format!("C1 must exceed 1, got {c1}")));
    }
    if !(c2 > -1.765 && c2 < -1.419) {
        return Err(invalid(format!("C2 must lie in (-1.765, -1.419), got {c2}")));
    }
    if !(lambda > 0.0) {
        return Err(invalid(format!("log(1/(sigma - 1/2)) must be positive, got {lambda}")));
    }
    Ok(HarperBound {
        l: c0 * lambda - c1 * lambda.ln() + c2,
        t: 2.0 * lambda * lambda,
        t_short: lambda * lambda,
    })
}

/// One row per `k` with columns `k, sigma_k, loglog_y_k, loglog_X_k, disjoint`
/// plus the triple logarithms, which stay finite when the double ones overflow.
pub fn write_sequence_csv<W: Write>(params: &TheoremParams, k_max: u64, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["k", "sigma_k", "loglog_y_k", "loglog_X_k", "disjoint", "logloglog_y_k", "logloglog_X_k"])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for k in 1..=k_max {
        let s = sigma_k(k, params)?;
        let e = interval_endpoints(k, params)?;
        out.write_record([
            k.to_string(),
            s.value.to_string(),
            opt(e.y.loglog()),
            opt(e.x.loglog()),
            intervals_disjoint(k, params)?.to_string(),
            opt(e.y.at_depth(3)),
            opt(e.x.at_depth(3)),
        ])?;
    }
    out.flush()?;
    Ok(())
}
