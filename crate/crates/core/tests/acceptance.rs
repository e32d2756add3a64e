//! End-to-end acceptance checks. Prints one line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;
use rmflab::chaining::{observed_levels, verify_chaining, LambdaSchedule, OscillationSetup};
use rmflab::concentration::{borel_cantelli_partial, step2_experiment, BcSeries, Step2Config};
use rmflab::keyed::{keyed_hash, unit_f64};
use rmflab::prime_series::{euler_tail_constant, log_weighted_sum, zetaasym_ratio};
use rmflab::primes::PrimeTable;
use rmflab::rmf::{abel_identity_residual, count_sign_changes, partial_sum_trace, sample_signs, PrimeSumWeights};
use rmflab::sequences::{interval_endpoints, intervals_disjoint, subtraction_bound_scan, StepParams, TheoremParams};
use rmflab::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn euler_constant() -> Result<Outcome> {
    let start = Instant::now();
    let c = euler_tail_constant(9_000_000)?;
    let secs = start.elapsed().as_secs_f64();
    let upper = c.value.upper;
    outcome(
        upper > 2.10 && upper <= 2.1121 && secs < 60.0,
        format!("upper = {upper:.10}, last prime {}, {secs:.1}s", c.last_prime),
    )
}

fn log_weighted(table: &PrimeTable) -> Result<Outcome> {
    let mut worst = (f64::INFINITY, 0.0);
    let mut all = true;
    for i in 51..=100 {
        let sigma = i as f64 / 100.0;
        let r = log_weighted_sum(sigma, table)?;
        all &= r.holds;
        let slack = r.bound_rhs - r.value.upper;
        if slack / r.bound_rhs < worst.0 {
            worst = (slack / r.bound_rhs, sigma);
        }
    }
    outcome(all, format!("50 sigmas, tightest relative slack {:.4} at sigma = {}", worst.0, worst.1))
}

fn zetaasym() -> Result<Outcome> {
    let start = Instant::now();
    let mut devs = Vec::new();
    for x in [1.5, 1.1, 1.01, 1.001] {
        devs.push((zetaasym_ratio(x)?.ratio_sum - 1.0).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    outcome(
        decreasing && devs[3] <= 0.1 && secs < 5.0,
        format!("|ratio - 1| = {devs:.4?}, {secs:.2}s"),
    )
}

fn chebyshev(table: &PrimeTable) -> Outcome {
    let r = table.chebyshev_check();
    Outcome {
        pass: r.holds && table.limit() >= 10_000_000,
        detail: format!("max pi(x) log x / 2x = {:.4} at x = {}", r.max_ratio, r.argmax),
    }
}

fn abel() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let signs = sample_signs(seed, 1_000_000)?;
        for sigma in [0.6, 1.5] {
            for x in [10_000, 1_000_000] {
                worst = worst.max(abel_identity_residual(&signs, sigma, x)?.relative);
            }
        }
    }
    outcome(worst <= 1e-8, format!("worst relative residual {worst:.2e} over 80 runs"))
}

fn variance_match(table: &PrimeTable) -> Result<Outcome> {
    let mut pass = true;
    let mut detail = Vec::new();
    for sigma in [0.6, 0.75, 1.0] {
        let w = PrimeSumWeights::new(table, sigma, 1_000_000)?;
        let values: Vec<f64> = (0..2000u64)
            .into_par_iter()
            .map(|seed| w.evaluate(&sample_signs(seed, 1_000_000).unwrap()).unwrap().value)
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let c2: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
        let var = c2.iter().sum::<f64>() / (n - 1.0);
        let m4 = c2.iter().map(|d| d * d).sum::<f64>() / n;
        let se = ((m4 - var * var) / n).sqrt();
        let target = w.truncated_variance();
        let z = (var - target) / se;
        pass &= z.abs() <= 5.0;
        detail.push(format!("sigma {sigma}: z = {z:+.2}"));
    }
    outcome(pass, detail.join(", "))
}

fn hoeffding() -> Result<Outcome> {
    let rows = step2_experiment(&Step2Config::default())?;
    let mut pass = true;
    let mut margin = f64::INFINITY;
    for r in &rows {
        let slack = r.hoeffding_bound + 3.0 * r.std_err - r.emp_freq;
        pass &= slack >= 0.0;
        margin = margin.min(slack);
    }
    outcome(pass, format!("{} rows x 10^4 trials, smallest slack {margin:.4}", rows.len()))
}

fn piecewise_linear(seed: u64, r_max: u32) -> Vec<f64> {
    let knots = 2 + (keyed_hash(seed, 0) % 16) as usize;
    let mut xs: Vec<f64> = (0..knots).map(|i| unit_f64(keyed_hash(seed, 1 + i as u64))).collect();
    xs.extend([0.0, 1.0]);
    xs.sort_by(f64::total_cmp);
    let ys: Vec<f64> = (0..xs.len()).map(|i| 20.0 * unit_f64(keyed_hash(seed, 1000 + i as u64)) - 10.0).collect();
    let n = 1usize << r_max;
    (0..=n)
        .map(|j| {
            let t = j as f64 / n as f64;
            let k = xs.partition_point(|&x| x <= t).clamp(1, xs.len() - 1);
            let (x0, x1) = (xs[k - 1], xs[k]);
            if x1 == x0 {
                ys[k]
            } else {
                ys[k - 1] + (ys[k] - ys[k - 1]) * (t - x0) / (x1 - x0)
            }
        })
        .collect()
}

fn dyadic_suite() -> Result<Outcome> {
    let mut violations = 0;
    let mut pairs = 0;
    let mut worst = 0.0f64;
    for seed in 0..1000u64 {
        let samples = piecewise_linear(seed, 8);
        let rep = verify_chaining(&samples, &LambdaSchedule::Observed(observed_levels(&samples)?))?;
        if !(rep.hypothesis_holds && rep.conclusion_holds) {
            violations += 1;
        }
        pairs += rep.pairs_checked;
        worst = worst.max(rep.max_ratio);
    }
    outcome(
        violations == 0,
        format!("1000 functions, {pairs} pairs, {violations} violations, max |f(s)-f(t)|/bound = {worst:.4}"),
    )
}

fn borel_cantelli() -> Result<Outcome> {
    let step2 = BcSeries::Step2 { gamma: 1.0, epsilon: 1.0 };
    let a = borel_cantelli_partial(step2, 400)?;
    let b = borel_cantelli_partial(step2, 800)?;
    let cauchy = (b.partial_sum - a.partial_sum).abs();
    let mut big_ok = true;
    for delta in [0.25, 0.5, 0.9] {
        for ell in 1..=100 {
            let r = borel_cantelli_partial(BcSeries::Bigterm { ell, delta }, 200)?;
            big_ok &= r.closed_bound_holds == Some(true) && r.ratio_below_three_quarters == Some(true);
        }
    }
    outcome(
        cauchy <= 1e-10 && a.tail_estimate <= 1e-10 && big_ok,
        format!("step2 |S800 - S400| = {cauchy:.1e}, tail {:.1e}; bigterm bound holds: {big_ok}", a.tail_estimate),
    )
}

fn subtraction() -> Result<Outcome> {
    let mut pass = true;
    let mut found = Vec::new();
    for delta in [0.25, 0.5, 0.75] {
        let scan = subtraction_bound_scan(&StepParams::from_delta(delta)?, 100_000)?;
        pass &= matches!(scan.ell1, Some(l) if l <= 100) && scan.holds_at_max;
        found.push(scan.ell1);
    }
    outcome(pass, format!("ell_1 = {found:?}"))
}

fn intervals() -> Result<Outcome> {
    let p = TheoremParams::default();
    let mut disjoint = true;
    let mut worst = 0.0f64;
    for k in 1..=20u64 {
        disjoint &= intervals_disjoint(k, &p)?;
        let kc = (k as f64).powf(p.c);
        let x = interval_endpoints(k, &p)?.x;
        let err = match x.depth() {
            2 => (x.mantissa() / (2.0 * kc.exp()) - 1.0).abs(),
            _ => (x.mantissa() / (std::f64::consts::LN_2 + kc) - 1.0).abs(),
        };
        worst = worst.max(err);
    }
    outcome(disjoint && worst <= 1e-12, format!("k = 1..20 disjoint: {disjoint}, loglog X_k rel err {worst:.1e}"))
}

fn oscillation(table: &PrimeTable) -> Result<Outcome> {
    let step = StepParams::from_delta(0.5)?;
    let mut hard = true;
    let mut soft_failures = 0;
    let mut worst = 0.0f64;
    let mut paper_c = 0.0;
    for ell in [3, 4, 5] {
        let setup = OscillationSetup::new(table, ell, &step, 12, 1_000_000)?;
        for seed in 0..20u64 {
            let r = setup.run(&sample_signs(seed, 1_000_000)?)?;
            paper_c = r.paper_c;
            hard &= r.max_osc <= 2.0 * r.paper_c;
            if r.max_osc > r.paper_c + r.truncation_std {
                soft_failures += 1;
            }
            worst = worst.max(r.max_osc);
        }
    }
    outcome(
        hard,
        format!("60 runs, max_osc <= {worst:.3} vs C = {paper_c:.3}; {soft_failures} exceed C + truncation std"),
    )
}

fn sign_changes() -> Result<Outcome> {
    let mut counts: Vec<usize> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let signs = sample_signs(seed, 1_000_000).unwrap();
            let trace = partial_sum_trace(&signs, 1_000_000).unwrap();
            count_sign_changes(&trace, 1_000_000).unwrap()
        })
        .collect();
    counts.sort_unstable();
    let median = (counts[49] + counts[50]) as f64 / 2.0;
    let with_change = counts.iter().filter(|&&v| v >= 1).count();
    outcome(
        median >= 3.0 && with_change >= 95,
        format!("median V_f(10^6) = {median}, {with_change}/100 seeds with a change, min {} max {}", counts[0], counts[99]),
    )
}

fn report(id: u32, name: &str, result: Result<Outcome>, failures: &mut u32) {
    match result {
        Ok(o) => {
            println!("[{}] {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            if !o.pass {
                *failures += 1;
            }
        }
        Err(e) => {
            println!("[FAIL] {id:>2} {name}: error: {e}");
            *failures += 1;
        }
    }
}

fn main() -> ExitCode {
    let mut failures = 0;
    let table = PrimeTable::new(10_000_000).expect("sieve to 10^7");
    report(1, "Euler tail constant over 9e6 primes", euler_constant(), &mut failures);
    report(2, "log-weighted prime sum bound", log_weighted(&table), &mut failures);
    report(3, "prime zeta asymptotic trend", zetaasym(), &mut failures);
    report(4, "Chebyshev bound to 1e7", Ok(chebyshev(&table)), &mut failures);
    report(5, "Abel summation identity", abel(), &mut failures);
    report(6, "random prime sum variance", variance_match(&table), &mut failures);
    report(7, "Hoeffding validity", hoeffding(), &mut failures);
    report(8, "dyadic chaining property suite", dyadic_suite(), &mut failures);
    report(9, "Borel-Cantelli series", borel_cantelli(), &mut failures);
    report(10, "subtraction bound scan", subtraction(), &mut failures);
    report(11, "sequence intervals", intervals(), &mut failures);
    report(12, "chaining oscillation", oscillation(&table), &mut failures);
    report(13, "sign changes at 1e6", sign_changes(), &mut failures);
    println!("acceptance: {} of 13 criteria passed", 13 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
