//! One runner per subcommand. Runners only compute; persistence is separate.

use rayon::prelude::*;
use rmflab::chaining::OscillationSetup;
use rmflab::concentration::{
    borel_cantelli_partial, step2_experiment, three_series_check, write_step2_csv, BcSeries, Step2Config,
};
use rmflab::prime_series::{
    euler_tail_constant, log_weighted_sum, prime_zeta, prime_zeta_direct, write_log_weighted_csv,
    zetaasym_ratio, PrimeZetaMethod,
};
use rmflab::primes::PrimeTable;
use rmflab::rmf::{
    abel_identity_residual, count_sign_changes, partial_sum_trace, sample_signs, sup_scan,
    write_change_points_csv,
};
use rmflab::sequences::{
    corollary_lower_bound, harper_lower_bound, harper_lower_bound_from_log, interval_endpoints,
    sigma_k, step_sigma_ell, subtraction_bound_scan, write_sequence_csv, NestedLogReal, StepParams,
    TheoremParams,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig, Suite};
use crate::error::CliError;
use crate::store::{Artifact, RunOutput};

type Run = Result<RunOutput, CliError>;

pub fn run(cfg: &ExperimentConfig) -> Run {
    match cfg.command {
        Command::Verify => verify(cfg),
        Command::Simulate => simulate(cfg),
        Command::Signchanges => signchanges(cfg),
        Command::PrimeSums => prime_sums(cfg),
        Command::SupScan => sup_scan_cmd(cfg),
        Command::Chaining => chaining(cfg),
        Command::Concentration => concentration(cfg),
        Command::Sequences => sequences(cfg),
    }
}

/// CSV with LF line endings built from string rows.
struct Table {
    out: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        out.write_record(header).expect("in-memory write");
        Self { out }
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        self.out.write_record(fields.into_iter().collect::<Vec<_>>()).expect("in-memory write");
    }

    fn finish(self, name: &str) -> Artifact {
        Artifact { name: name.into(), bytes: self.out.into_inner().expect("in-memory flush") }
    }
}

fn csv_artifact<F>(name: &str, write: F) -> Result<Artifact, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> rmflab::Result<()>,
{
    let mut bytes = Vec::new();
    write(&mut bytes)?;
    Ok(Artifact { name: name.into(), bytes })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    value: f64,
    detail: String,
}

fn verify(cfg: &ExperimentConfig) -> Run {
    let suite = cfg.suite.unwrap_or(Suite::All);
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();
    if matches!(suite, Suite::Constants | Suite::All) {
        let euler = euler_tail_constant(cfg.euler_primes as usize)?;
        checks.push(Check {
            name: "euler_tail_constant",
            passed: euler.value.upper > 2.10 && euler.value.upper <= 2.1121,
            value: euler.value.upper,
            detail: format!("{} primes, last {}", euler.n_primes, euler.last_prime),
        });

        let table = PrimeTable::new(cfg.prime_limit)?;
        let rows = cfg
            .sigma
            .iter()
            .map(|&s| log_weighted_sum(s, &table))
            .collect::<rmflab::Result<Vec<_>>>()?;
        let failing = rows.iter().filter(|r| !r.holds).count();
        checks.push(Check {
            name: "log_weighted_sum_bound",
            passed: failing == 0,
            value: failing as f64,
            detail: format!("{} of {} sigma values fail, primes <= {}", failing, rows.len(), cfg.prime_limit),
        });
        artifacts.push(csv_artifact("log_weighted_grid.csv", |w| write_log_weighted_csv(&rows, w))?);

        let mut zt = Table::new(&["x", "ratio_sum", "ratio_logzeta"]);
        let mut devs = Vec::new();
        for &x in &cfg.zeta_x {
            let r = zetaasym_ratio(x)?;
            devs.push((r.ratio_sum - 1.0).abs());
            zt.row([x.to_string(), r.ratio_sum.to_string(), r.ratio_logzeta.to_string()]);
        }
        artifacts.push(zt.finish("zetaasym.csv"));
        let last = devs.last().copied().unwrap_or(f64::INFINITY);
        checks.push(Check {
            name: "zetaasym_trend",
            passed: devs.windows(2).all(|w| w[1] < w[0]) && last <= 0.1,
            value: last,
            detail: format!("|ratio_sum - 1| along zeta_x: {devs:?}"),
        });

        let cheb = table.chebyshev_check();
        checks.push(Check {
            name: "chebyshev",
            passed: cheb.holds,
            value: cheb.max_ratio,
            detail: format!("max at x = {}, primes <= {}", cheb.argmax, cfg.prime_limit),
        });
    }
    if matches!(suite, Suite::Identities | Suite::All) {
        let x = cfg.x_max;
        let worst = (cfg.seed..cfg.seed + cfg.num_seeds)
            .into_par_iter()
            .map(|seed| -> rmflab::Result<f64> {
                let signs = sample_signs(seed, x.max(2))?;
                let mut w = 0.0f64;
                for sigma in [0.6, 1.5] {
                    w = w.max(abel_identity_residual(&signs, sigma, x)?.relative);
                }
                Ok(w)
            })
            .collect::<rmflab::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        checks.push(Check {
            name: "abel_identity",
            passed: worst <= 1e-8,
            value: worst,
            detail: format!("{} seeds, X = {x}, sigma in {{0.6, 1.5}}", cfg.num_seeds),
        });
    }
    let mut ct = Table::new(&["check", "passed", "value", "detail"]);
    for c in &checks {
        ct.row([c.name.to_string(), c.passed.to_string(), c.value.to_string(), c.detail.clone()]);
    }
    artifacts.push(ct.finish("checks.csv"));
    let passed = checks.iter().all(|c| c.passed);
    Ok(RunOutput { artifacts, summary: json!({ "checks": checks }), passed: Some(passed) })
}

fn decades(x_max: u64) -> Vec<u64> {
    let mut xs: Vec<u64> = std::iter::successors(Some(10u64), |x| x.checked_mul(10)).take_while(|&x| x < x_max).collect();
    xs.push(x_max);
    xs
}

fn simulate(cfg: &ExperimentConfig) -> Run {
    let signs = sample_signs(cfg.seed, cfg.prime_limit.max(2))?;
    let trace = partial_sum_trace(&signs, cfg.x_max)?;

    let mut vt = Table::new(&["x", "V_f", "corollary_bound"]);
    for x in decades(cfg.x_max) {
        let bound = corollary_lower_bound(&NestedLogReal::from_f64(x as f64)?, cfg.c, cfg.corollary_c).ok();
        vt.row([x.to_string(), count_sign_changes(&trace, x)?.to_string(), opt(bound)]);
    }

    let stride = (cfg.x_max / 1000).max(1);
    let mut tt = Table::new(&["n", "M"]);
    let mut max_abs = 0i64;
    for (n, m) in trace.stored() {
        max_abs = max_abs.max(m.abs());
        if n % stride == 0 || n == cfg.x_max {
            tt.row([n.to_string(), m.to_string()]);
        }
    }
    let v = count_sign_changes(&trace, cfg.x_max)?;
    let summary = json!({
        "seed": cfg.seed,
        "x_max": cfg.x_max,
        "final_M": trace.final_value(),
        "max_abs_M_stored": max_abs,
        "sign_changes": v,
        "first_change_point": trace.change_points().first(),
        "last_change_point": trace.change_points().last(),
    });
    Ok(RunOutput {
        artifacts: vec![
            vt.finish("sign_changes.csv"),
            tt.finish("trace.csv"),
            csv_artifact("change_points.csv", |w| write_change_points_csv(&trace, w))?,
        ],
        summary,
        passed: None,
    })
}

fn quantile(sorted: &[usize], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] as f64 + (sorted[hi] as f64 - sorted[lo] as f64) * (pos - lo as f64)
}

fn signchanges(cfg: &ExperimentConfig) -> Run {
    let x = cfg.x_max;
    let limit = cfg.prime_limit.max(2);
    let counts = (cfg.seed..cfg.seed + cfg.num_seeds)
        .into_par_iter()
        .map(|seed| -> rmflab::Result<(u64, usize, i64)> {
            let trace = partial_sum_trace(&sample_signs(seed, limit)?, x)?;
            Ok((seed, count_sign_changes(&trace, x)?, trace.final_value()))
        })
        .collect::<rmflab::Result<Vec<_>>>()?;
    let mut t = Table::new(&["seed", "V_f", "final_M"]);
    for (seed, v, m) in &counts {
        t.row([seed.to_string(), v.to_string(), m.to_string()]);
    }
    let mut sorted: Vec<usize> = counts.iter().map(|c| c.1).collect();
    sorted.sort_unstable();
    let summary = json!({
        "x_max": x,
        "seeds": cfg.num_seeds,
        "min": sorted[0],
        "q1": quantile(&sorted, 0.25),
        "median": quantile(&sorted, 0.5),
        "q3": quantile(&sorted, 0.75),
        "max": sorted[sorted.len() - 1],
        "seeds_with_change": sorted.iter().filter(|&&v| v >= 1).count(),
    });
    Ok(RunOutput { artifacts: vec![t.finish("sign_change_sweep.csv")], summary, passed: None })
}

fn prime_sums(cfg: &ExperimentConfig) -> Run {
    let table = PrimeTable::new(cfg.prime_limit)?;
    let mut weighted = Vec::new();
    let mut pz = Table::new(&[
        "s",
        "accelerated",
        "accelerated_lower",
        "accelerated_upper",
        "direct",
        "direct_lower",
        "direct_upper",
        "intersect",
    ]);
    let mut consistent = true;
    for &sigma in &cfg.sigma {
        if sigma > 0.5 && sigma <= 1.0 {
            weighted.push(log_weighted_sum(sigma, &table)?);
        }
        let s = 2.0 * sigma;
        if s > 1.0 {
            let a = prime_zeta(s, PrimeZetaMethod::Accelerated)?;
            let d = prime_zeta_direct(s, &table)?;
            consistent &= a.intersects(&d);
            pz.row([
                s.to_string(),
                a.estimate.to_string(),
                a.lower.to_string(),
                a.upper.to_string(),
                d.estimate.to_string(),
                d.lower.to_string(),
                d.upper.to_string(),
                a.intersects(&d).to_string(),
            ]);
        }
    }
    let mut zt = Table::new(&["x", "ratio_sum", "ratio_logzeta"]);
    for &x in &cfg.zeta_x {
        let r = zetaasym_ratio(x)?;
        zt.row([x.to_string(), r.ratio_sum.to_string(), r.ratio_logzeta.to_string()]);
    }
    let holds = weighted.iter().all(|r| r.holds);
    let summary = json!({
        "prime_limit": cfg.prime_limit,
        "log_weighted_holds": holds,
        "log_weighted_rows": weighted.len(),
        "prime_zeta_methods_agree": consistent,
    });
    Ok(RunOutput {
        artifacts: vec![
            csv_artifact("log_weighted_grid.csv", |w| write_log_weighted_csv(&weighted, w))?,
            pz.finish("prime_zeta.csv"),
            zt.finish("zetaasym.csv"),
        ],
        summary,
        passed: Some(holds && consistent),
    })
}

fn sup_scan_cmd(cfg: &ExperimentConfig) -> Run {
    let mut t = Table::new(&[
        "sigma",
        "seed",
        "t_max",
        "n_grid",
        "sup_cos",
        "argmax_t",
        "sup_abs_F",
        "log_sup_abs_F",
        "harper_L",
        "harper_T",
        "harper_T_short",
        "cos_threshold",
        "exceeds_threshold",
    ]);
    let mut per_sigma = Vec::new();
    for &sigma in &cfg.sigma {
        let harper = harper_lower_bound(sigma, cfg.c0, cfg.c1, cfg.c2)?;
        let t_max = cfg.t_max.unwrap_or(harper.t).max(1.0);
        let lambda = (1.0 / (sigma - 0.5)).ln();
        let threshold = (lambda > 1.0).then(|| lambda - 2.0 * lambda.ln());
        let scans = (cfg.seed..cfg.seed + cfg.num_seeds)
            .map(|seed| -> rmflab::Result<_> {
                let signs = sample_signs(seed, cfg.prime_limit.max(2))?;
                Ok((seed, sup_scan(&signs, sigma, t_max, cfg.grid_step, cfg.prime_limit)?))
            })
            .collect::<rmflab::Result<Vec<_>>>()?;
        let mut exceed = 0;
        for (seed, s) in &scans {
            let ex = threshold.map(|th| s.sup_cos > th);
            if ex == Some(true) {
                exceed += 1;
            }
            t.row([
                sigma.to_string(),
                seed.to_string(),
                t_max.to_string(),
                s.n_grid.to_string(),
                s.sup_cos.to_string(),
                s.argmax_t.to_string(),
                s.sup_abs_f.to_string(),
                s.sup_abs_f.ln().to_string(),
                harper.l.to_string(),
                harper.t.to_string(),
                harper.t_short.to_string(),
                opt(threshold),
                opt(ex),
            ]);
        }
        per_sigma.push(json!({
            "sigma": sigma,
            "t_max": t_max,
            "fraction_exceeding_threshold": exceed as f64 / scans.len() as f64,
            "harper_L": harper.l,
        }));
    }
    Ok(RunOutput { artifacts: vec![t.finish("sup_scan.csv")], summary: json!({ "sigma": per_sigma }), passed: None })
}

fn chaining(cfg: &ExperimentConfig) -> Run {
    let step = StepParams::new(cfg.epsilon)?;
    let table = PrimeTable::new(cfg.prime_limit.max(2))?;
    let mut rows = Vec::new();
    for &ell in &cfg.ells {
        let setup = OscillationSetup::new(&table, ell, &step, cfg.r_max, cfg.prime_limit)?;
        let results = (cfg.seed..cfg.seed + cfg.num_seeds)
            .into_par_iter()
            .map(|seed| -> rmflab::Result<_> { Ok((seed, setup.run(&sample_signs(seed, cfg.prime_limit.max(2))?)?)) })
            .collect::<rmflab::Result<Vec<_>>>()?;
        rows.extend(results);
    }
    let paper_c = rows.first().map_or(0.0, |r| r.1.paper_c);
    let hard = rows.iter().all(|(_, r)| r.max_osc <= 2.0 * r.paper_c);
    let soft = rows.iter().filter(|(_, r)| r.max_osc > r.paper_c + r.truncation_std).count();
    let max_osc = rows.iter().map(|(_, r)| r.max_osc).fold(0.0, f64::max);
    let summary = json!({
        "paper_C": paper_c,
        "runs": rows.len(),
        "max_osc": max_osc,
        "within_twice_C": hard,
        "exceeding_C_plus_truncation_std": soft,
    });
    let csv = csv_artifact("oscillation.csv", |w| rmflab::chaining::write_oscillation_csv(&rows, w))?;
    Ok(RunOutput { artifacts: vec![csv], summary, passed: Some(hard) })
}

fn concentration(cfg: &ExperimentConfig) -> Run {
    let step = StepParams::new(cfg.epsilon)?;
    let ell_min = *cfg.ells.iter().min().expect("validated non-empty");
    let ell_max = *cfg.ells.iter().max().expect("validated non-empty");
    let rows = step2_experiment(&Step2Config {
        step,
        gamma: cfg.gamma,
        ell_min,
        ell_max,
        trials: cfg.trials,
        prime_limit: cfg.prime_limit,
        base_seed: cfg.seed,
    })?;
    let hoeffding_ok = rows.iter().all(|r| r.emp_freq <= r.hoeffding_bound + 3.0 * r.std_err);

    let s400 = borel_cantelli_partial(BcSeries::Step2 { gamma: cfg.gamma, epsilon: cfg.epsilon }, 400)?;
    let s800 = borel_cantelli_partial(BcSeries::Step2 { gamma: cfg.gamma, epsilon: cfg.epsilon }, 800)?;
    let mut bt = Table::new(&["ell", "delta", "ratio", "partial_sum", "scaled_sum", "closed_bound", "holds"]);
    let mut bigterm_ok = true;
    for ell in 1..=100 {
        let r = borel_cantelli_partial(BcSeries::Bigterm { ell, delta: step.delta }, 200)?;
        bigterm_ok &= r.closed_bound_holds == Some(true);
        bt.row([
            ell.to_string(),
            step.delta.to_string(),
            opt(r.ratio),
            r.partial_sum.to_string(),
            opt(r.scaled_sum),
            opt(r.closed_bound),
            opt(r.closed_bound_holds),
        ]);
    }

    let mut ts = Table::new(&["sigma", "converges", "variance", "variance_lower", "variance_upper"]);
    for &sigma in &cfg.sigma {
        let r = three_series_check(sigma)?;
        ts.row([
            sigma.to_string(),
            r.converges.to_string(),
            opt(r.variance.map(|v| v.estimate)),
            opt(r.variance.map(|v| v.lower)),
            opt(r.variance.map(|v| v.upper)),
        ]);
    }
    let summary = json!({
        "hoeffding_valid": hoeffding_ok,
        "step2_partial_400": s400.partial_sum,
        "step2_cauchy_gap": (s800.partial_sum - s400.partial_sum).abs(),
        "step2_tail_400": s400.tail_estimate,
        "bigterm_bound_holds": bigterm_ok,
    });
    Ok(RunOutput {
        artifacts: vec![
            csv_artifact("step2.csv", |w| write_step2_csv(&rows, w))?,
            bt.finish("bigterm.csv"),
            ts.finish("three_series.csv"),
        ],
        summary,
        passed: Some(hoeffding_ok && bigterm_ok),
    })
}

fn sequences(cfg: &ExperimentConfig) -> Run {
    let params = TheoremParams::new(cfg.c, cfg.a0, cfg.a1).map_err(CliError::from)?;
    let seq = csv_artifact("sequences.csv", |w| write_sequence_csv(&params, cfg.k_max, w))?;
    let mut disjoint = true;
    let mut kt = Table::new(&[
        "k",
        "k_pow_c",
        "sigma_k",
        "underflow",
        "log_inv_gap",
        "harper_L",
        "harper_T",
        "corollary_bound_at_X_k",
    ]);
    for k in 1..=cfg.k_max {
        disjoint &= rmflab::sequences::intervals_disjoint(k, &params)?;
        let s = sigma_k(k, &params)?;
        let harper = if s.log_inv_gap.is_finite() {
            Some(harper_lower_bound_from_log(s.log_inv_gap, cfg.c0, cfg.c1, cfg.c2)?)
        } else {
            None
        };
        let x = interval_endpoints(k, &params)?.x;
        let cor = corollary_lower_bound(&x, cfg.c, cfg.corollary_c)?;
        kt.row([
            k.to_string(),
            s.k_pow_c.to_string(),
            s.value.to_string(),
            s.underflow.to_string(),
            s.log_inv_gap.to_string(),
            opt(harper.map(|h| h.l)),
            opt(harper.map(|h| h.t)),
            cor.to_string(),
        ]);
    }
    let step = StepParams::new(cfg.epsilon)?;
    let mut st = Table::new(&["ell", "sigma_ell", "log_inv_gap"]);
    for &ell in &cfg.ells {
        let s = step_sigma_ell(ell, &step)?;
        st.row([ell.to_string(), s.value.to_string(), s.log_inv_gap.to_string()]);
    }
    let scan = subtraction_bound_scan(&step, cfg.subtraction_ell_max)?;
    let summary: Value = json!({
        "intervals_disjoint": disjoint,
        "k_max": cfg.k_max,
        "subtraction_ell1": scan.ell1,
        "subtraction_holds_at_max": scan.holds_at_max,
        "subtraction_max_ratio": scan.max_ratio,
    });
    Ok(RunOutput {
        artifacts: vec![seq, kt.finish("sigma_k.csv"), st.finish("sigma_ell.csv")],
        summary,
        passed: Some(disjoint && scan.ell1.is_some()),
    })
}
