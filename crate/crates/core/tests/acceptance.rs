//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Seeds and tolerances are pinned here.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use lbblab::diagnostics::{linear_fit, mean_var};
use lbblab::harness::{run_experiment, to_csv, with_threads, ExperimentConfig};
use lbblab::lbb::{
    bootstrap_mean_exact, bootstrap_variance_exact, lbb_resample, LbbPlan, ShiftTable,
};
use lbblab::oracle::{enumerate_bootstrap_law, limiting_variance_mc, McSettings};
use lbblab::process::{
    simulate_companion, simulate_truncated_companion, simulate_tvar1, InnovationLaw,
    InnovationStream, ProcessSpec, Scaling, SinArParams, SmileMaParams, DEFAULT_TRUNC_TOL,
};
use lbblab::rng::StreamKey;
use lbblab::stats::{weighted_statistic, Functional, WeightScheme};

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rv_coverage(t_len: usize, block_len: usize, half_window: usize) -> f64 {
    let config = ExperimentConfig {
        t_list: vec![t_len],
        l_list: vec![block_len],
        td_list: vec![half_window],
        n_replications: 200,
        b_resamples: 200,
        master_seed: SEED,
        ..ExperimentConfig::rv_default()
    };
    let report = run_experiment(&config).expect("rv coverage run");
    assert!(report.failures.is_empty() && report.skipped.is_empty());
    report.rows[0].coverage
}

fn criterion_1() -> Outcome {
    let c1000 = rv_coverage(1000, 3, 50);
    let c2000 = rv_coverage(2000, 4, 100);
    let ok = |c: f64| (0.84..=0.96).contains(&c);
    outcome(
        ok(c1000) && ok(c2000),
        format!("coverage T=1000,L=3,TD=50: {c1000:.3}; T=2000,L=4,TD=100: {c2000:.3}; band [0.84, 0.96]"),
    )
}

fn criterion_2() -> Outcome {
    let config = ExperimentConfig {
        n_replications: 200,
        b_resamples: 200,
        master_seed: SEED,
        ..ExperimentConfig::ecf_default()
    };
    let report = run_experiment(&config).expect("ecf coverage run");
    let rho_2000 = report.td_trend(2000, 25).unwrap_or(f64::NAN);
    let rho_5000 = report.td_trend(5000, 25).unwrap_or(f64::NAN);
    let grid: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{}/{}:{:.3}", r.t_len, r.half_window, r.coverage))
        .collect();
    let top = report.row(5000, 25, 400).map(|r| r.coverage).unwrap_or(0.0);
    outcome(
        rho_2000 > 0.0 && rho_5000 > 0.0 && top > 0.85,
        format!(
            "spearman T=2000: {rho_2000:.2}, T=5000: {rho_5000:.2}; coverage(T=5000, TD=400) = {top:.3} > 0.85; grid {}",
            grid.join(" ")
        ),
    )
}

fn criterion_3() -> Outcome {
    let path = SmileMaParams::default()
        .simulate(8, SEED, Scaling::Unit)
        .unwrap();
    let plan = LbbPlan::new(8, 2, 1).unwrap();
    let w = WeightScheme::unit(8).unwrap();
    let law = enumerate_bootstrap_law(&path, &plan, &w, &Functional::Square).unwrap();
    let exact = bootstrap_variance_exact(&path, &plan, &w, &Functional::Square).unwrap();
    let table = ShiftTable::new(&path, &plan, &w, &[Functional::Square]).unwrap();
    let samples: Vec<f64> = table
        .distribution(10_000, StreamKey::new(SEED))
        .into_iter()
        .map(|v| v[0])
        .collect();
    let tv = law.tv_distance(&samples, 1e-9);
    let gap = (law.variance() - exact).abs();
    outcome(
        law.len() == 81 && law.mean().abs() < 1e-10 && gap < 1e-10 && tv < 0.05,
        format!(
            "outcomes {}, mean {:.1e}, |Var_enum - Var_exact| {gap:.1e}, TV(B=1e4) {tv:.4}",
            law.len(),
            law.mean()
        ),
    )
}

fn criterion_4() -> Outcome {
    let t_len = 500;
    let path = SmileMaParams::default()
        .simulate(t_len, SEED, Scaling::InvSqrtT)
        .unwrap();
    let plan = LbbPlan::new(t_len, 3, 25).unwrap();
    let w = WeightScheme::unit(t_len).unwrap();
    let f = Functional::Square;
    let mean_exact = bootstrap_mean_exact(&path, &plan, &w, &f).unwrap();
    let var_exact = bootstrap_variance_exact(&path, &plan, &w, &f).unwrap();
    // full resamples, independent of the shift table
    let n = 100_000;
    let key = StreamKey::new(SEED).derive(4);
    let stats: Vec<f64> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|b| {
                let star = lbb_resample(&path, &plan, key.derive(b as u64)).unwrap();
                weighted_statistic(&star, &w, &f).unwrap() - mean_exact
            })
            .collect()
    };
    let (m, v) = mean_var(&stats);
    let se_mean = (v / n as f64).sqrt();
    let m4 = stats.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
    let se_var = ((m4 - v * v) / n as f64).sqrt();
    let z_mean = m / se_mean;
    let z_var = (v - var_exact) / se_var;
    outcome(
        z_mean.abs() < 3.0 && z_var.abs() < 3.0,
        format!("centred mean {m:.3e} ({z_mean:+.2} SE), variance {v:.4e} vs exact {var_exact:.4e} ({z_var:+.2} SE)"),
    )
}

fn criterion_5() -> Outcome {
    let params = SmileMaParams::default();
    let spec = params.spec().unwrap();
    let mut errors = Vec::new();
    let mut parts = Vec::new();
    for (i, &t_len) in [500usize, 1000, 2000].iter().enumerate() {
        let block_len = (t_len as f64).cbrt().ceil() as usize;
        let half_window = (t_len as f64).sqrt().ceil() as usize;
        let plan = LbbPlan::new(t_len, block_len, half_window).unwrap();
        let w = WeightScheme::global_root(t_len).unwrap();
        let n_paths = 40;
        let var_star: f64 = (0..n_paths)
            .map(|p| {
                let path = params
                    .simulate(
                        t_len,
                        StreamKey::new(SEED)
                            .derive(5)
                            .derive(t_len as u64)
                            .derive(p)
                            .as_seed(),
                        Scaling::Unit,
                    )
                    .unwrap();
                bootstrap_variance_exact(&path, &plan, &w, &Functional::Square).unwrap()
            })
            .sum::<f64>()
            / n_paths as f64;
        let v = limiting_variance_mc(
            &spec,
            &w,
            &Functional::Square,
            &Functional::Square,
            McSettings::new(4, 2000, SEED + i as u64),
        )
        .unwrap()
        .value;
        let err = (var_star - v).abs() / v;
        errors.push(err);
        parts.push(format!("T={t_len} (L={block_len}, TD={half_window}): Var*={var_star:.4e} V={v:.4e} rel.err={err:.4}"));
    }
    let decreasing = errors.windows(2).all(|p| p[1] < p[0]);
    outcome(decreasing && errors[2] < 0.25, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let params = SinArParams::default();
    let spec = params.spec().unwrap();
    let u = 0.4;
    let n = 200_000;
    let companion = simulate_companion(&spec, u, n, DEFAULT_TRUNC_TOL, SEED).unwrap();
    let c = companion.scalars().unwrap();
    let ms: Vec<usize> = (1..=12).collect();
    let mut logs = Vec::new();
    for &m in &ms {
        let trunc = simulate_truncated_companion(&spec, u, m, n, SEED).unwrap();
        let e = c
            .iter()
            .zip(trunc.scalars().unwrap())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n as f64;
        logs.push(e.ln());
    }
    let x: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let fit = linear_fit(&x, &logs);
    let target = params.a(u).abs().ln();
    let rel = (fit.slope - target).abs() / target.abs();
    outcome(
        fit.r_squared > 0.99 && rel < 0.2,
        format!(
            "slope {:.4} vs log|a(u)| {target:.4} (rel. {rel:.3}), R^2 {:.5}",
            fit.slope, fit.r_squared
        ),
    )
}

fn criterion_7() -> Outcome {
    // smooth tvAR(1) in its MA(infinity) form: A_{t,T}(j) = prod_k a((t-k)/T) differs from a(t/T)^j
    let a_fn = Arc::new(|u: f64| 0.6 * (2.0 * std::f64::consts::PI * u).sin());
    let law = InnovationLaw::gaussian(0.0, 1.0).unwrap();
    let spec = ProcessSpec::tv_ar1("smooth_ar", 1, None, a_fn.clone(), law).unwrap();
    let lags = 120usize;
    let reps = 20u64;
    let mut scaled = Vec::new();
    for &t_len in &[256usize, 512, 1024] {
        let mut total = 0.0;
        for r in 0..reps {
            let seed = StreamKey::new(SEED)
                .derive(7)
                .derive(t_len as u64)
                .derive(r)
                .as_seed();
            let x = simulate_tvar1(&spec, t_len, seed).unwrap();
            let eps = InnovationStream::new(seed, law, 1).fill(1 - lags as i64, t_len + lags);
            let mut sum = 0.0;
            for t in 1..=t_len {
                let a = a_fn(t as f64 / t_len as f64);
                // eps_{t-j} sits at offset t - j - (1 - lags) = t + lags - 1 - j
                let companion: f64 = (0..lags)
                    .map(|j| a.powi(j as i32) * eps[t + lags - 1 - j])
                    .sum();
                sum += (x.at(t - 1)[0] - companion).abs();
            }
            total += sum / t_len as f64;
        }
        scaled.push(t_len as f64 * total / reps as f64);
    }
    let ratios: Vec<f64> = scaled.windows(2).map(|p| p[1] / p[0]).collect();
    outcome(
        ratios.iter().all(|r| (0.4..=2.5).contains(r)),
        format!(
            "T*mean|X - X~| = {:.4}, {:.4}, {:.4}; ratios {:.3}, {:.3}",
            scaled[0], scaled[1], scaled[2], ratios[0], ratios[1]
        ),
    )
}

fn criterion_8() -> Outcome {
    let law = InnovationLaw::alpha_stable(1.5, 0.0, 0.5, 0.0).unwrap();
    let draws = InnovationStream::new(SEED, law, 1).fill(0, 1_000_000);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for s in [1.0f64, 2.0, 6.0] {
        let re = draws.iter().map(|x| (s * x).cos()).sum::<f64>() / draws.len() as f64;
        let im = draws.iter().map(|x| (s * x).sin()).sum::<f64>() / draws.len() as f64;
        let cf = (-(0.5f64.powf(1.5)) * s.powf(1.5)).exp();
        let gap = (re - cf).hypot(im);
        worst = worst.max(gap);
        parts.push(format!("s={s}: {gap:.2e}"));
    }
    outcome(worst < 0.01, format!("|ECF - CF| {}", parts.join(", ")))
}

fn criterion_9() -> Outcome {
    let rv = ExperimentConfig {
        t_list: vec![400, 800],
        l_list: vec![2, 4],
        td_list: vec![20, 40],
        n_replications: 40,
        b_resamples: 100,
        master_seed: SEED,
        ..ExperimentConfig::rv_default()
    };
    let ecf = ExperimentConfig {
        t_list: vec![1000],
        td_list: vec![50, 100],
        n_replications: 40,
        b_resamples: 100,
        master_seed: SEED,
        ..ExperimentConfig::ecf_default()
    };
    let mut same = true;
    let mut bytes = 0;
    for config in [rv, ecf] {
        let one = to_csv(
            &with_threads(Some(1), || run_experiment(&config))
                .unwrap()
                .unwrap(),
        );
        let eight = to_csv(
            &with_threads(Some(8), || run_experiment(&config))
                .unwrap()
                .unwrap(),
        );
        same &= one == eight;
        bytes += one.len();
    }
    outcome(same, format!("1 vs 8 threads, {bytes} CSV bytes compared"))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("realized-volatility coverage", criterion_1),
        ("local ECF coverage trend", criterion_2),
        ("exact bootstrap law", criterion_3),
        ("bootstrap moments", criterion_4),
        ("bootstrap variance convergence", criterion_5),
        ("truncation decay", criterion_6),
        ("closeness to the companion", criterion_7),
        ("stable sampler", criterion_8),
        ("determinism across threads", criterion_9),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        println!(
            "criterion {n} {}: {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
