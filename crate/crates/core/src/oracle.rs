//! Independent reference computations: exhaustive enumeration of the block
//! bootstrap law, a Monte Carlo estimate of the limiting variance and the
//! finite-`T` realized-volatility target.
//!
//! Nothing here reuses the resampling code in [`crate::lbb`]; the
//! enumeration re-derives the shift rule from scratch so the two can be
//! cross-checked.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lbb::LbbPlan;
use crate::process::{simulate_companion, Path, ProcessSpec, DEFAULT_TRUNC_TOL};
use crate::rng::StreamKey;
use crate::stats::{Functional, WeightScheme};

/// Maximum number of shift tuples [`enumerate_bootstrap_law`] will visit.
pub const ENUMERATION_GUARD: u64 = 1_000_000;

/// Discrete law of the centred bootstrap statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactBootstrapLaw {
    /// `(probability, centred statistic)` per shift tuple.
    pub outcomes: Vec<(f64, f64)>,
}

impl ExactBootstrapLaw {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|(p, _)| p).sum()
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|(p, v)| p * v).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.outcomes.iter().map(|(p, v)| p * (v - m).powi(2)).sum()
    }

    /// Total-variation distance between this law and the empirical law of
    /// `samples`, grouping values that agree to within `resolution`.
    pub fn tv_distance(&self, samples: &[f64], resolution: f64) -> f64 {
        let key = |v: f64| (v / resolution).round() as i64;
        let mut diff: BTreeMap<i64, f64> = BTreeMap::new();
        for &(p, v) in &self.outcomes {
            *diff.entry(key(v)).or_default() += p;
        }
        let w = 1.0 / samples.len() as f64;
        for &v in samples {
            *diff.entry(key(v)).or_default() -= w;
        }
        0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
    }
}

/// Visit every shift tuple `(k_0, ..., k_{n-1})` in `[-TD, TD]^n` and record
/// the centred statistic `sum_t w_t f(X*_t) - E* sum_t w_t f(X*_t)`.
pub fn enumerate_bootstrap_law(
    path: &Path,
    plan: &LbbPlan,
    weights: &WeightScheme,
    f: &Functional,
) -> Result<ExactBootstrapLaw> {
    let t_len = path.len();
    if t_len != plan.t_len() || weights.len() != t_len {
        return Err(Error::ShapeMismatch(
            "path, plan and weights disagree on T".into(),
        ));
    }
    let l = plan.block_len();
    let td = plan.half_window() as i64;
    let n_blocks = t_len / l;
    let base = (2 * td + 1) as u64;
    let outcomes_f = (base as f64).powi(n_blocks as i32);
    if outcomes_f > ENUMERATION_GUARD as f64 {
        return Err(Error::EnumerationTooLarge {
            outcomes: outcomes_f,
            limit: ENUMERATION_GUARD,
        });
    }
    let count = base.pow(n_blocks as u32);
    let w = weights.weights();

    // 1-based indexing throughout, mirroring the textbook description
    let x = |t: i64| path.at((t - 1) as usize);
    let in_range = |t: i64| t >= 1 && t <= t_len as i64;

    let mut stats = Vec::with_capacity(count as usize);
    let mut digits = vec![0i64; n_blocks];
    for code in 0..count {
        let mut c = code;
        for d in digits.iter_mut() {
            *d = (c % base) as i64 - td;
            c /= base;
        }
        // source index for every position; tail keeps its own index
        let mut source: Vec<i64> = (1..=t_len as i64).collect();
        for (i, &k) in digits.iter().enumerate() {
            let first = 1 + (i * l) as i64;
            let last = first + l as i64 - 1;
            let k = if in_range(first + k) && in_range(last + k) {
                k
            } else {
                -k
            };
            for j in 0..l as i64 {
                source[(first + j - 1) as usize] = first + j + k;
            }
        }
        let stat: f64 = (1..=t_len)
            .map(|t| w[t - 1] * f.eval(x(source[t - 1])))
            .sum();
        stats.push(stat);
    }
    let p = 1.0 / count as f64;
    let mean = stats.iter().sum::<f64>() * p;
    Ok(ExactBootstrapLaw {
        outcomes: stats.into_iter().map(|s| (p, s - mean)).collect(),
    })
}

/// Monte Carlo estimate of the limiting variance together with its lag profile.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitingVariance {
    pub value: f64,
    /// `(h, sum_t w_t w_{t+h} Cov(f1(X~_0(t/T)), f2(X~_h(t/T))))` for `h = -H..=H`.
    pub lag_contributions: Vec<(i64, f64)>,
    /// `|contribution(H) + contribution(-H)| / |value|`.
    pub tail_ratio: f64,
    /// True when the outermost lags carry more than 10% of the total.
    pub truncation_warning: bool,
}

/// Monte Carlo settings for [`limiting_variance_mc`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    /// Lag truncation `H`.
    pub max_lag: usize,
    /// Replications per rescaled time.
    pub n_paths: usize,
    pub trunc_tol: f64,
    pub seed: u64,
}

impl McSettings {
    pub fn new(max_lag: usize, n_paths: usize, seed: u64) -> Self {
        McSettings {
            max_lag,
            n_paths,
            trunc_tol: DEFAULT_TRUNC_TOL,
            seed,
        }
    }
}

/// `V(s1, s2) ~ sum_{|h| <= H} sum_t w_t w_{t+h} Cov(f1(X~_0(t/T)), f2(X~_h(t/T)))`
/// at the sample size `T = weights.len()`.
///
/// For each `t` with `w_t > 0` one companion path at `u = t/T` of length
/// `n_paths + 2H` is simulated (independent stream per `t`); replication `r`
/// is its window starting at `r`, sliced at every lag. Weights are extended
/// past the ends by their boundary values.
pub fn limiting_variance_mc(
    spec: &ProcessSpec,
    weights: &WeightScheme,
    f1: &Functional,
    f2: &Functional,
    settings: McSettings,
) -> Result<LimitingVariance> {
    let McSettings {
        max_lag,
        n_paths,
        trunc_tol,
        seed,
    } = settings;
    if max_lag < 1 {
        return Err(Error::param("lag truncation H must be >= 1"));
    }
    if n_paths < 100 {
        return Err(Error::param("at least 100 replications are required"));
    }
    let t_len = weights.len();
    let w = weights.weights();
    let h_max = max_lag as i64;
    let n_lags = 2 * max_lag + 1;
    let key = StreamKey::new(seed);
    let support: Vec<usize> = (0..t_len).filter(|&t| w[t] > 0.0).collect();

    let per_t: Vec<Vec<f64>> = support
        .par_iter()
        .map(|&t| -> Result<Vec<f64>> {
            let u = (t + 1) as f64 / t_len as f64;
            let comp = simulate_companion(
                spec,
                u,
                n_paths + 2 * max_lag,
                trunc_tol,
                key.derive(t as u64).as_seed(),
            )?;
            let a = f1.values(&comp)?;
            let b = f2.values(&comp)?;
            let centre = max_lag;
            let mean_a = a[centre..centre + n_paths].iter().sum::<f64>() / n_paths as f64;
            let mut out = Vec::with_capacity(n_lags);
            for h in -h_max..=h_max {
                let off = (centre as i64 + h) as usize;
                let mean_b = b[off..off + n_paths].iter().sum::<f64>() / n_paths as f64;
                let cross: f64 = (0..n_paths)
                    .map(|r| a[centre + r] * b[off + r])
                    .sum::<f64>()
                    / n_paths as f64;
                let weight_pair = w[t] * w[(t as i64 + h).clamp(0, t_len as i64 - 1) as usize];
                out.push(weight_pair * (cross - mean_a * mean_b));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut contributions = vec![0.0; n_lags];
    for row in &per_t {
        for (c, v) in contributions.iter_mut().zip(row) {
            *c += v;
        }
    }
    let value: f64 = contributions.iter().sum();
    let tail = (contributions[0] + contributions[n_lags - 1]).abs();
    let tail_ratio = if value == 0.0 {
        0.0
    } else {
        tail / value.abs()
    };
    let truncation_warning = tail_ratio > 0.1;
    if truncation_warning {
        log::warn!(
            "lag-{max_lag} covariance carries {:.1}% of V; increase H",
            100.0 * tail_ratio
        );
    }
    Ok(LimitingVariance {
        value,
        lag_contributions: (-h_max..=h_max).zip(contributions).collect(),
        tail_ratio,
        truncation_warning,
    })
}

/// Exact finite-`T` mean of realized volatility for `X_{t,T} = T^{-1/2} sigma(t/T) eps_t`:
/// `sum_t T^{-1} sigma(t/T)^2 Var(eps)`.
pub fn integrated_target_rv(
    sigma_fn: &dyn Fn(f64) -> f64,
    innovation_variance: f64,
    t_len: usize,
) -> Result<f64> {
    if t_len < 1 {
        return Err(Error::param("T must be >= 1"));
    }
    let t = t_len as f64;
    Ok((1..=t_len)
        .map(|i| sigma_fn(i as f64 / t).powi(2))
        .sum::<f64>()
        * innovation_variance
        / t)
}
