//! Time-varying linear processes, tvAR(1) recursions and their companion
//! (frozen-time) processes.
//!
//! Every simulator draws its innovations from an [`InnovationStream`], which
//! maps an integer time index `k` (negative indices included) to a fixed draw
//! `eps_k` determined by the seed alone. Simulating the process, the companion
//! at some rescaled time `u`, or a truncated companion with the same seed
//! therefore uses the very same innovations.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::rng::{open_unit, StreamKey};

/// Default tolerance for truncating infinite moving-average sums.
pub const DEFAULT_TRUNC_TOL: f64 = 1e-12;

/// Minimum number of discarded steps when simulating a stationary AR(1).
pub const AR_BURN_IN_FLOOR: usize = 1000;

const TVAR1_GRID: usize = 1000;
const DECAY_GRID: usize = 100;
const DECAY_CHECK_MAX_LAG: usize = 200;

/// Marginal law of the i.i.d. innovations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnovationLaw {
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// Stable law in the S1 parameterisation: for `beta = 0` the
    /// characteristic function is `exp(i mu s - gamma^alpha |s|^alpha)`.
    AlphaStable {
        alpha: f64,
        beta: f64,
        gamma: f64,
        mu: f64,
    },
}

impl InnovationLaw {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        let law = InnovationLaw::Gaussian { mean, variance };
        law.validate()?;
        Ok(law)
    }

    pub fn alpha_stable(alpha: f64, beta: f64, gamma: f64, mu: f64) -> Result<Self> {
        let law = InnovationLaw::AlphaStable {
            alpha,
            beta,
            gamma,
            mu,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationLaw::Gaussian { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
                    return Err(Error::param(format!(
                        "gaussian innovations need finite mean and variance >= 0, got ({mean}, {variance})"
                    )));
                }
            }
            InnovationLaw::AlphaStable {
                alpha,
                beta,
                gamma,
                mu,
            } => {
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(Error::param(format!(
                        "stable alpha must lie in (0, 2], got {alpha}"
                    )));
                }
                if !(-1.0..=1.0).contains(&beta) {
                    return Err(Error::param(format!(
                        "stable beta must lie in [-1, 1], got {beta}"
                    )));
                }
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::param(format!(
                        "stable gamma must be > 0, got {gamma}"
                    )));
                }
                if !mu.is_finite() {
                    return Err(Error::param("stable mu must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Variance of one innovation, when finite.
    pub fn variance(&self) -> Option<f64> {
        match *self {
            InnovationLaw::Gaussian { variance, .. } => Some(variance),
            InnovationLaw::AlphaStable {
                alpha: 2.0, gamma, ..
            } => Some(2.0 * gamma * gamma),
            InnovationLaw::AlphaStable { .. } => None,
        }
    }

    /// One draw from two independent uniforms on (0, 1).
    ///
    /// Gaussian: Box-Muller (cosine branch). Stable: Chambers-Mallows-Stuck.
    pub fn transform(&self, u1: f64, u2: f64) -> f64 {
        match *self {
            InnovationLaw::Gaussian { mean, variance } => {
                let z = (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
                mean + variance.sqrt() * z
            }
            InnovationLaw::AlphaStable {
                alpha,
                beta,
                gamma,
                mu,
            } => {
                let v = PI * (u1 - 0.5);
                let w = -u2.ln();
                if alpha == 1.0 {
                    let half_pi = 0.5 * PI;
                    let z = (2.0 / PI)
                        * ((half_pi + beta * v) * v.tan()
                            - beta * ((half_pi * w * v.cos()) / (half_pi + beta * v)).ln());
                    gamma * z + (2.0 / PI) * beta * gamma * gamma.ln() + mu
                } else {
                    let tan_term = beta * (PI * alpha / 2.0).tan();
                    let shift = tan_term.atan() / alpha;
                    let scale = (1.0 + tan_term * tan_term).powf(1.0 / (2.0 * alpha));
                    let z = scale * (alpha * (v + shift)).sin() / v.cos().powf(1.0 / alpha)
                        * ((v - alpha * (v + shift)).cos() / w).powf((1.0 - alpha) / alpha);
                    gamma * z + mu
                }
            }
        }
    }

    /// One draw; consumes exactly two 64-bit words from `rng`.
    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let a = rng.next_u64();
        let b = rng.next_u64();
        self.transform(open_unit(a), open_unit(b))
    }

    /// A vector of `dim` independent draws.
    pub fn sample_innovation(&self, rng: &mut dyn RngCore, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.sample(rng)).collect()
    }
}

/// Index-addressed innovation sequence `eps_k`, `k` in a wide symmetric range around 0.
#[derive(Debug, Clone, Copy)]
pub struct InnovationStream {
    key: StreamKey,
    law: InnovationLaw,
    dim: usize,
}

const INDEX_OFFSET: i128 = 1 << 62;
const WORDS_PER_DRAW: u128 = 4;

impl InnovationStream {
    pub fn new(seed: u64, law: InnovationLaw, dim: usize) -> Self {
        Self {
            key: StreamKey::new(seed),
            law,
            dim,
        }
    }

    /// `eps_first, ..., eps_{first + count - 1}`, flattened (`count * dim` values).
    pub fn fill(&self, first: i64, count: usize) -> Vec<f64> {
        let start = (first as i128 + INDEX_OFFSET) as u128 * self.dim as u128 * WORDS_PER_DRAW;
        let mut rng = self.key.rng_at(start);
        let mut out = Vec::with_capacity(count * self.dim);
        for _ in 0..count * self.dim {
            out.push(self.law.sample(&mut rng));
        }
        out
    }
}

pub type MeanFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
/// Writes the `d x d` coefficient matrix `A(u, j)` (row-major) into the buffer.
pub type CoefFn = Arc<dyn Fn(f64, i64, &mut [f64]) + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Geometric envelope `|A(u, j)|_1 <= b * theta^|j|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBound {
    pub b: f64,
    pub theta: f64,
}

#[derive(Clone)]
pub enum Model {
    TvMa {
        coef_fn: CoefFn,
        decay_bound: Option<DecayBound>,
        finite_support: Option<usize>,
    },
    TvAr1 {
        a_fn: ScalarFn,
    },
}

/// Declarative description of a locally stationary process.
#[derive(Clone)]
pub struct ProcessSpec {
    id: String,
    dimension: usize,
    mean_fn: Option<MeanFn>,
    model: Model,
    innovations: InnovationLaw,
}

impl fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let model = match &self.model {
            Model::TvMa {
                decay_bound,
                finite_support,
                ..
            } => format!(
                "TvMa {{ decay_bound: {decay_bound:?}, finite_support: {finite_support:?} }}"
            ),
            Model::TvAr1 { .. } => "TvAr1".to_string(),
        };
        f.debug_struct("ProcessSpec")
            .field("id", &self.id)
            .field("dimension", &self.dimension)
            .field("model", &model)
            .field("innovations", &self.innovations)
            .finish()
    }
}

fn l1_norm(m: &[f64]) -> f64 {
    m.iter().map(|x| x.abs()).sum()
}

impl ProcessSpec {
    /// Time-varying (two-sided) moving average. At least one of `decay_bound`
    /// and `finite_support` must be given; a given decay bound is spot-checked
    /// on a grid of `(u, j)`.
    pub fn tv_ma(
        id: impl Into<String>,
        dimension: usize,
        mean_fn: Option<MeanFn>,
        coef_fn: CoefFn,
        decay_bound: Option<DecayBound>,
        finite_support: Option<usize>,
        innovations: InnovationLaw,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::param("dimension must be >= 1"));
        }
        innovations.validate()?;
        if decay_bound.is_none() && finite_support.is_none() {
            return Err(Error::param(
                "moving-average coefficients need a decay bound or a finite support",
            ));
        }
        let spec = ProcessSpec {
            id: id.into(),
            dimension,
            mean_fn,
            model: Model::TvMa {
                coef_fn: coef_fn.clone(),
                decay_bound,
                finite_support,
            },
            innovations,
        };
        if let Some(db) = decay_bound {
            if !(db.theta > 0.0 && db.theta < 1.0) || !(db.b > 0.0 && db.b.is_finite()) {
                return Err(Error::param(format!(
                    "decay bound needs b > 0 and theta in (0, 1), got {db:?}"
                )));
            }
            let max_lag = spec.ma_order(DEFAULT_TRUNC_TOL)?.min(DECAY_CHECK_MAX_LAG) as i64;
            let mut buf = vec![0.0; dimension * dimension];
            for i in 0..=DECAY_GRID {
                let u = i as f64 / DECAY_GRID as f64;
                for j in -max_lag..=max_lag {
                    coef_fn(u, j, &mut buf);
                    let bound = db.b * db.theta.powi(j.unsigned_abs() as i32);
                    if l1_norm(&buf) > bound * (1.0 + 1e-9) {
                        return Err(Error::param(format!(
                            "coefficient |A({u}, {j})|_1 = {} exceeds decay bound {bound}",
                            l1_norm(&buf)
                        )));
                    }
                }
            }
        }
        Ok(spec)
    }

    /// Time-varying AR(1): `X_t = a(t/T) X_{t-1} + eps_t` (plus the mean function).
    pub fn tv_ar1(
        id: impl Into<String>,
        dimension: usize,
        mean_fn: Option<MeanFn>,
        a_fn: ScalarFn,
        innovations: InnovationLaw,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::param("dimension must be >= 1"));
        }
        innovations.validate()?;
        let sup = sup_abs_on_grid(&*a_fn);
        if !(sup < 1.0) {
            return Err(Error::param(format!(
                "tvAR(1) coefficient must satisfy sup |a(u)| < 1, found {sup}"
            )));
        }
        Ok(ProcessSpec {
            id: id.into(),
            dimension,
            mean_fn,
            model: Model::TvAr1 { a_fn },
            innovations,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn innovations(&self) -> InnovationLaw {
        self.innovations
    }

    pub fn mean(&self, u: f64) -> Vec<f64> {
        match &self.mean_fn {
            Some(f) => f(u),
            None => vec![0.0; self.dimension],
        }
    }

    /// Number of lags `M*` kept on each side of a moving-average sum: the
    /// finite support when given, otherwise the smallest `M` whose geometric
    /// tail `B theta^M / (1 - theta)` is below `trunc_tol`. For a tvAR(1) the
    /// same rule is applied to `sup |a|`.
    pub fn ma_order(&self, trunc_tol: f64) -> Result<usize> {
        if !(trunc_tol > 0.0) {
            return Err(Error::param(format!(
                "trunc_tol must be > 0, got {trunc_tol}"
            )));
        }
        match &self.model {
            Model::TvMa {
                finite_support: Some(m),
                ..
            } => Ok(*m),
            Model::TvMa {
                decay_bound: Some(db),
                ..
            } => Ok(geometric_order(db.b, db.theta, trunc_tol)),
            Model::TvMa { .. } => Err(Error::param(
                "moving-average coefficients need a decay bound or a finite support",
            )),
            Model::TvAr1 { a_fn } => {
                let sup = sup_abs_on_grid(&**a_fn);
                Ok(if sup == 0.0 {
                    0
                } else {
                    geometric_order(1.0, sup, trunc_tol)
                })
            }
        }
    }

    /// Coefficients `A(u, j)` for `j = -m..=m`, each a row-major `d x d` block.
    /// For a tvAR(1) this is its MA(infinity) form `A(u, j) = a(u)^j I` for `j >= 0`.
    pub fn ma_coefficients(&self, u: f64, m: usize) -> Vec<f64> {
        let d = self.dimension;
        let width = 2 * m + 1;
        let mut out = vec![0.0; width * d * d];
        match &self.model {
            Model::TvMa { coef_fn, .. } => {
                for (idx, block) in out.chunks_exact_mut(d * d).enumerate() {
                    coef_fn(u, idx as i64 - m as i64, block);
                }
            }
            Model::TvAr1 { a_fn } => {
                let a = a_fn(u);
                for j in 0..=m {
                    let block = &mut out[(m + j) * d * d..(m + j + 1) * d * d];
                    let pow = a.powi(j as i32);
                    for p in 0..d {
                        block[p * d + p] = pow;
                    }
                }
            }
        }
        out
    }
}

fn sup_abs_on_grid(f: &dyn Fn(f64) -> f64) -> f64 {
    (0..TVAR1_GRID)
        .map(|i| f(i as f64 / (TVAR1_GRID - 1) as f64).abs())
        .fold(0.0, f64::max)
}

fn geometric_order(b: f64, theta: f64, tol: f64) -> usize {
    let mut m = 0usize;
    let mut tail = b / (1.0 - theta);
    while tail >= tol {
        m += 1;
        tail *= theta;
    }
    m
}

/// A realisation `X_{1,T}, ..., X_{T,T}` (stored 0-based, row-major by time).
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    values: Vec<f64>,
    dim: usize,
    spec_id: String,
    seed: u64,
}

impl Path {
    pub fn new(
        values: Vec<f64>,
        dim: usize,
        spec_id: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 || values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch(format!(
                "path of {} values cannot have dimension {dim} and length >= 1",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::param(format!(
                "path value at {} is not finite",
                pos / dim + 1
            )));
        }
        Ok(Path {
            values,
            dim,
            spec_id: spec_id.into(),
            seed,
        })
    }

    /// One-dimensional path with no provenance.
    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Path::new(values, 1, "data", 0)
    }

    /// Sample size `T`.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec_id(&self) -> &str {
        &self.spec_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Observation at 0-based time `t` (i.e. `X_{t+1,T}`).
    pub fn at(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The raw series when `d = 1`.
    pub fn scalars(&self) -> Option<&[f64]> {
        (self.dim == 1).then_some(self.values.as_slice())
    }

    pub fn scaled(&self, factor: f64) -> Path {
        Path {
            values: self.values.iter().map(|x| x * factor).collect(),
            dim: self.dim,
            spec_id: self.spec_id.clone(),
            seed: self.seed,
        }
    }
}

/// `acc += sum_j A_j eps_{t - j}` over `j = -m..=m` for coefficient blocks laid
/// out as in [`ProcessSpec::ma_coefficients`]. `eps` holds `eps_{t-m}..=eps_{t+m}`.
fn ma_sum(coefs: &[f64], eps_window: &[f64], m: usize, d: usize, acc: &mut [f64]) {
    for idx in 0..=2 * m {
        let a = &coefs[idx * d * d..(idx + 1) * d * d];
        // lag j = idx - m reads eps_{t-j}, which sits at window position 2m - idx
        let e = &eps_window[(2 * m - idx) * d..(2 * m - idx + 1) * d];
        if d == 1 {
            acc[0] += a[0] * e[0];
        } else {
            for p in 0..d {
                let row = &a[p * d..(p + 1) * d];
                acc[p] += row.iter().zip(e).map(|(x, y)| x * y).sum::<f64>();
            }
        }
    }
}

/// Simulate `X_{t,T} = mu(t/T) + sum_{|j| <= M*} A(t/T, j) eps_{t-j}`, `t = 1..=T`.
pub fn simulate_tvma(spec: &ProcessSpec, t_len: usize, trunc_tol: f64, seed: u64) -> Result<Path> {
    if t_len < 1 {
        return Err(Error::param("sample size T must be >= 1"));
    }
    if !matches!(spec.model, Model::TvMa { .. }) {
        return Err(Error::param("simulate_tvma needs a moving-average spec"));
    }
    let m = spec.ma_order(trunc_tol)?;
    let d = spec.dimension;
    let stream = InnovationStream::new(seed, spec.innovations, d);
    let eps = stream.fill(1 - m as i64, t_len + 2 * m);
    let mut values = Vec::with_capacity(t_len * d);
    let mut acc = vec![0.0; d];
    for t in 1..=t_len {
        let u = t as f64 / t_len as f64;
        let coefs = spec.ma_coefficients(u, m);
        acc.iter_mut().for_each(|x| *x = 0.0);
        // window eps_{t-m}..=eps_{t+m} starts at offset (t - m) - (1 - m) = t - 1
        ma_sum(&coefs, &eps[(t - 1) * d..(t + 2 * m) * d], m, d, &mut acc);
        let mu = spec.mean(u);
        values.extend(mu.iter().zip(&acc).map(|(a, b)| a + b));
    }
    Path::new(values, d, spec.id.clone(), seed)
}

/// Simulate the tvAR(1) recursion
/// `X_1 = a(1/T) eps_0 + eps_1`, `X_t = a(t/T) X_{t-1} + eps_t` for `t >= 2`,
/// with the mean function added on top.
pub fn simulate_tvar1(spec: &ProcessSpec, t_len: usize, seed: u64) -> Result<Path> {
    if t_len < 1 {
        return Err(Error::param("sample size T must be >= 1"));
    }
    let Model::TvAr1 { a_fn } = &spec.model else {
        return Err(Error::param("simulate_tvar1 needs a tvAR(1) spec"));
    };
    let d = spec.dimension;
    let stream = InnovationStream::new(seed, spec.innovations, d);
    let eps = stream.fill(0, t_len + 1);
    let mut state = eps[..d].to_vec();
    let mut values = Vec::with_capacity(t_len * d);
    for t in 1..=t_len {
        let u = t as f64 / t_len as f64;
        let a = a_fn(u);
        for p in 0..d {
            state[p] = a * state[p] + eps[t * d + p];
        }
        let mu = spec.mean(u);
        values.extend(mu.iter().zip(&state).map(|(a, b)| a + b));
    }
    Path::new(values, d, spec.id.clone(), seed)
}

/// Stationary companion path `X~_t(u)`, `t = 1..=n`.
///
/// Moving averages are truncated at the same `M*` as [`simulate_tvma`]; a
/// tvAR(1) is run as an AR(1) with constant coefficient `a(u)` after
/// `max(1000, ceil(ln(tol) / ln|a(u)|))` burn-in steps.
pub fn simulate_companion(
    spec: &ProcessSpec,
    u: f64,
    n: usize,
    trunc_tol: f64,
    seed: u64,
) -> Result<Path> {
    check_u(u)?;
    if n < 1 {
        return Err(Error::param("companion length must be >= 1"));
    }
    if !(trunc_tol > 0.0) {
        return Err(Error::param(format!(
            "trunc_tol must be > 0, got {trunc_tol}"
        )));
    }
    let d = spec.dimension;
    let stream = InnovationStream::new(seed, spec.innovations, d);
    let mu = spec.mean(u);
    let mut values = Vec::with_capacity(n * d);
    match &spec.model {
        Model::TvMa { .. } => {
            let m = spec.ma_order(trunc_tol)?;
            let coefs = spec.ma_coefficients(u, m);
            let eps = stream.fill(1 - m as i64, n + 2 * m);
            let mut acc = vec![0.0; d];
            for t in 1..=n {
                acc.iter_mut().for_each(|x| *x = 0.0);
                ma_sum(&coefs, &eps[(t - 1) * d..(t + 2 * m) * d], m, d, &mut acc);
                values.extend(mu.iter().zip(&acc).map(|(a, b)| a + b));
            }
        }
        Model::TvAr1 { a_fn } => {
            let a = a_fn(u);
            let burn = ar_burn_in(a, trunc_tol);
            let eps = stream.fill(1 - burn as i64, n + burn);
            let mut state = vec![0.0; d];
            for (step, e) in eps.chunks_exact(d).enumerate() {
                for p in 0..d {
                    state[p] = a * state[p] + e[p];
                }
                if step >= burn {
                    values.extend(mu.iter().zip(&state).map(|(a, b)| a + b));
                }
            }
        }
    }
    Path::new(values, d, format!("{}@u={u}", spec.id), seed)
}

/// Burn-in length for a stationary AR(1) with coefficient `a`.
pub fn ar_burn_in(a: f64, trunc_tol: f64) -> usize {
    let a = a.abs();
    if a == 0.0 {
        return AR_BURN_IN_FLOOR;
    }
    let steps = (trunc_tol.ln() / a.ln()).ceil();
    (steps.max(0.0) as usize).max(AR_BURN_IN_FLOOR)
}

/// Truncated companion `X~_t^{(M)}(u) = mu(u) + sum_{|j| < M} A(u, j) eps_{t-j}`,
/// sharing its innovations with [`simulate_companion`] under the same seed.
/// For moving averages the lag range is additionally capped at `M*` (default
/// tolerance), so `M > M* + 1` reproduces the companion exactly.
pub fn simulate_truncated_companion(
    spec: &ProcessSpec,
    u: f64,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<Path> {
    check_u(u)?;
    if m < 1 {
        return Err(Error::param("truncation parameter M must be >= 1"));
    }
    if n < 1 {
        return Err(Error::param("companion length must be >= 1"));
    }
    let lag = match spec.model {
        Model::TvMa { .. } => (m - 1).min(spec.ma_order(DEFAULT_TRUNC_TOL)?),
        Model::TvAr1 { .. } => m - 1,
    };
    let d = spec.dimension;
    let coefs = spec.ma_coefficients(u, lag);
    let stream = InnovationStream::new(seed, spec.innovations, d);
    let eps = stream.fill(1 - lag as i64, n + 2 * lag);
    let mu = spec.mean(u);
    let mut values = Vec::with_capacity(n * d);
    let mut acc = vec![0.0; d];
    for t in 1..=n {
        acc.iter_mut().for_each(|x| *x = 0.0);
        ma_sum(
            &coefs,
            &eps[(t - 1) * d..(t + 2 * lag) * d],
            lag,
            d,
            &mut acc,
        );
        values.extend(mu.iter().zip(&acc).map(|(a, b)| a + b));
    }
    Path::new(values, d, format!("{}@u={u},M={m}", spec.id), seed)
}

/// Simulate any spec with its natural simulator.
pub fn simulate(spec: &ProcessSpec, t_len: usize, trunc_tol: f64, seed: u64) -> Result<Path> {
    match spec.model {
        Model::TvMa { .. } => simulate_tvma(spec, t_len, trunc_tol, seed),
        Model::TvAr1 { .. } => simulate_tvar1(spec, t_len, seed),
    }
}

fn check_u(u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::param(format!(
            "rescaled time u must lie in [0, 1], got {u}"
        )));
    }
    Ok(())
}

/// Whether a simulated path is divided by `sqrt(T)` (intraday-return scaling).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    Unit,
    InvSqrtT,
}

/// Volatility smile `sigma(u) = curvature (u - center)^2 + floor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSmile {
    pub curvature: f64,
    pub center: f64,
    pub floor: f64,
}

impl Default for SigmaSmile {
    fn default() -> Self {
        SigmaSmile {
            curvature: 0.32,
            center: 0.5,
            floor: 0.04,
        }
    }
}

impl SigmaSmile {
    pub fn eval(&self, u: f64) -> f64 {
        self.curvature * (u - self.center).powi(2) + self.floor
    }
}

/// Returns model `X_{t,T} = sigma(t/T) eps_t` with MA(1) noise
/// `eps_t = ma_coef * eta_{t-1} + eta_t`, `eta ~ N(0, eta_variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmileMaParams {
    pub sigma: SigmaSmile,
    pub ma_coef: f64,
    pub eta_variance: f64,
}

impl Default for SmileMaParams {
    fn default() -> Self {
        SmileMaParams {
            sigma: SigmaSmile::default(),
            ma_coef: 0.5,
            eta_variance: 0.8,
        }
    }
}

impl SmileMaParams {
    /// `Var(eps_t) = (1 + ma_coef^2) eta_variance`.
    pub fn noise_variance(&self) -> f64 {
        (1.0 + self.ma_coef * self.ma_coef) * self.eta_variance
    }

    pub fn spec(&self) -> Result<ProcessSpec> {
        let sigma = self.sigma;
        let ma = self.ma_coef;
        let coef: CoefFn = Arc::new(move |u, j, out: &mut [f64]| {
            out[0] = match j {
                0 => sigma.eval(u),
                1 => ma * sigma.eval(u),
                _ => 0.0,
            };
        });
        ProcessSpec::tv_ma(
            "sigma_smile",
            1,
            None,
            coef,
            None,
            Some(1),
            InnovationLaw::gaussian(0.0, self.eta_variance)?,
        )
    }

    pub fn simulate(&self, t_len: usize, seed: u64, scaling: Scaling) -> Result<Path> {
        let path = simulate_tvma(&self.spec()?, t_len, DEFAULT_TRUNC_TOL, seed)?;
        Ok(match scaling {
            Scaling::Unit => path,
            Scaling::InvSqrtT => path.scaled(1.0 / (t_len as f64).sqrt()),
        })
    }
}

/// tvAR(1) with `a(u) = amplitude * sin(2 pi u)` and stable innovations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinArParams {
    pub amplitude: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
}

impl Default for SinArParams {
    fn default() -> Self {
        SinArParams {
            amplitude: 0.9,
            alpha: 1.5,
            beta: 0.0,
            gamma: 0.5,
            mu: 0.0,
        }
    }
}

impl SinArParams {
    pub fn a(&self, u: f64) -> f64 {
        self.amplitude * (2.0 * PI * u).sin()
    }

    pub fn a_fn(&self) -> ScalarFn {
        let amp = self.amplitude;
        Arc::new(move |u| amp * (2.0 * PI * u).sin())
    }

    pub fn spec(&self) -> Result<ProcessSpec> {
        ProcessSpec::tv_ar1(
            "sin_ar",
            1,
            None,
            self.a_fn(),
            InnovationLaw::alpha_stable(self.alpha, self.beta, self.gamma, self.mu)?,
        )
    }
}

/// Build a spec from a registry name and numeric parameters.
///
/// Names: `sigma_smile` (keys `sigma_curvature`, `sigma_center`, `sigma_floor`,
/// `ma_coef`, `eta_variance`), `iid_gaussian` (`variance`) and `sin_ar`
/// (`ar_amplitude`, `alpha`, `beta`, `gamma`, `mu`). Missing keys take the
/// defaults; unknown keys are rejected.
pub fn spec_from_registry(name: &str, params: &BTreeMap<String, f64>) -> Result<ProcessSpec> {
    let check = |allowed: &[&str]| -> Result<()> {
        for key in params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::param(format!(
                    "unknown parameter `{key}` for process `{name}`"
                )));
            }
        }
        Ok(())
    };
    let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
    match name {
        "sigma_smile" => {
            check(&[
                "sigma_curvature",
                "sigma_center",
                "sigma_floor",
                "ma_coef",
                "eta_variance",
            ])?;
            smile_params(params).spec()
        }
        "iid_gaussian" => {
            check(&["variance"])?;
            iid_gaussian_params(get("variance", 1.0)).spec()
        }
        "sin_ar" => {
            check(&["ar_amplitude", "alpha", "beta", "gamma", "mu"])?;
            sin_ar_params(params).spec()
        }
        other => Err(Error::param(format!("unknown process `{other}`"))),
    }
}

pub(crate) fn smile_params(params: &BTreeMap<String, f64>) -> SmileMaParams {
    let d = SmileMaParams::default();
    let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
    SmileMaParams {
        sigma: SigmaSmile {
            curvature: get("sigma_curvature", d.sigma.curvature),
            center: get("sigma_center", d.sigma.center),
            floor: get("sigma_floor", d.sigma.floor),
        },
        ma_coef: get("ma_coef", d.ma_coef),
        eta_variance: get("eta_variance", d.eta_variance),
    }
}

/// i.i.d. `N(0, variance)` as a degenerate smile model (flat sigma, no MA term).
pub fn iid_gaussian_params(variance: f64) -> SmileMaParams {
    SmileMaParams {
        sigma: SigmaSmile {
            curvature: 0.0,
            center: 0.5,
            floor: 1.0,
        },
        ma_coef: 0.0,
        eta_variance: variance,
    }
}

pub(crate) fn sin_ar_params(params: &BTreeMap<String, f64>) -> SinArParams {
    let d = SinArParams::default();
    let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
    SinArParams {
        amplitude: get("ar_amplitude", d.amplitude),
        alpha: get("alpha", d.alpha),
        beta: get("beta", d.beta),
        gamma: get("gamma", d.gamma),
        mu: get("mu", d.mu),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ma1_spec(finite: usize) -> ProcessSpec {
        let coef: CoefFn = Arc::new(|u, j, out: &mut [f64]| {
            out[0] = match j {
                0 => 1.0 + u,
                1 => 0.5 * (1.0 + u),
                _ => 0.0,
            };
        });
        ProcessSpec::tv_ma(
            "ma1",
            1,
            None,
            coef,
            None,
            Some(finite),
            InnovationLaw::gaussian(0.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn law_validation() {
        assert!(InnovationLaw::gaussian(0.0, -1.0).is_err());
        assert!(InnovationLaw::gaussian(0.0, 0.0).is_ok());
        assert!(InnovationLaw::alpha_stable(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(InnovationLaw::alpha_stable(2.1, 0.0, 1.0, 0.0).is_err());
        assert!(InnovationLaw::alpha_stable(1.5, 1.5, 1.0, 0.0).is_err());
        assert!(InnovationLaw::alpha_stable(1.5, 0.0, 0.0, 0.0).is_err());
        assert!(InnovationLaw::alpha_stable(2.0, -1.0, 0.3, 1.0).is_ok());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let law = InnovationLaw::alpha_stable(1.5, 0.3, 0.5, 0.1).unwrap();
        let a = InnovationStream::new(11, law, 1).fill(-5, 20);
        let b = InnovationStream::new(11, law, 1).fill(-5, 20);
        assert_eq!(a, b);
        // overlapping windows agree on the shared indices
        let c = InnovationStream::new(11, law, 1).fill(0, 5);
        assert_eq!(&a[5..10], &c[..]);
    }

    #[test]
    fn gaussian_variance_matches() {
        let law = InnovationLaw::gaussian(0.0, 0.8).unwrap();
        let draws = InnovationStream::new(3, law, 1).fill(0, 1_000_000);
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 0.8).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn cauchy_case_is_finite_and_symmetric() {
        let law = InnovationLaw::alpha_stable(1.0, 0.0, 1.0, 0.0).unwrap();
        let draws = InnovationStream::new(5, law, 1).fill(0, 200_000);
        assert!(draws.iter().all(|x| x.is_finite()));
        let median = {
            let mut v = draws.clone();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        assert!(median.abs() < 0.02);
        // P(|X| <= 1) = 1/2 for standard Cauchy
        let inside = draws.iter().filter(|x| x.abs() <= 1.0).count() as f64 / draws.len() as f64;
        assert!((inside - 0.5).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_specs() {
        let coef: CoefFn = Arc::new(|_, _, out: &mut [f64]| out[0] = 1.0);
        let law = InnovationLaw::gaussian(0.0, 1.0).unwrap();
        assert!(ProcessSpec::tv_ma("x", 1, None, coef.clone(), None, None, law).is_err());
        // constant 1 at every lag violates any geometric bound
        let bound = DecayBound { b: 1.0, theta: 0.5 };
        assert!(ProcessSpec::tv_ma("x", 1, None, coef, Some(bound), None, law).is_err());
        let a: ScalarFn = Arc::new(|u| 2.0 * u);
        assert!(ProcessSpec::tv_ar1("x", 1, None, a, law).is_err());
        let spec = ma1_spec(1);
        assert!(simulate_tvma(&spec, 0, 1e-12, 1).is_err());
        assert!(simulate_truncated_companion(&spec, 0.5, 0, 5, 1).is_err());
        assert!(simulate_companion(&spec, 1.5, 5, 1e-12, 1).is_err());
    }

    #[test]
    fn geometric_order_is_smallest() {
        let m = geometric_order(2.0, 0.5, 1e-6);
        assert!(2.0 * 0.5f64.powi(m as i32) / 0.5 < 1e-6);
        assert!(2.0 * 0.5f64.powi(m as i32 - 1) / 0.5 >= 1e-6);
    }

    #[test]
    fn degenerate_ma_is_constant_mean() {
        let coef: CoefFn = Arc::new(|_, _, out: &mut [f64]| out[0] = 0.0);
        let mean: MeanFn = Arc::new(|_| vec![2.5]);
        let spec = ProcessSpec::tv_ma(
            "c",
            1,
            Some(mean),
            coef,
            None,
            Some(3),
            InnovationLaw::gaussian(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let path = simulate_tvma(&spec, 50, 1e-12, 9).unwrap();
        assert!(path.values().iter().all(|&x| x == 2.5));
    }

    #[test]
    fn finite_support_matches_hand_convolution() {
        let spec = ma1_spec(1);
        let seed = 42;
        let path = simulate_tvma(&spec, 4, 1e-12, seed).unwrap();
        let eps = InnovationStream::new(seed, spec.innovations(), 1).fill(0, 6); // eps_0..eps_5
        for t in 1..=4usize {
            let u = t as f64 / 4.0;
            // lags -1, 0, 1 in that order, the -1 coefficient being zero
            let mut expected = 0.0;
            expected += 0.0 * eps[t + 1];
            expected += (1.0 + u) * eps[t];
            expected += 0.5 * (1.0 + u) * eps[t - 1];
            assert_eq!(path.at(t - 1)[0], expected, "t = {t}");
        }
    }

    #[test]
    fn tvar1_with_zero_coefficient_is_innovations() {
        let a: ScalarFn = Arc::new(|_| 0.0);
        let spec = ProcessSpec::tv_ar1("z", 1, None, a, InnovationLaw::gaussian(0.0, 1.0).unwrap())
            .unwrap();
        let path = simulate_tvar1(&spec, 100, 77).unwrap();
        let eps = InnovationStream::new(77, spec.innovations(), 1).fill(1, 100);
        assert_eq!(path.values(), &eps[..]);
    }

    #[test]
    fn tvar1_first_step_uses_eps0() {
        let params = SinArParams::default();
        let spec = params.spec().unwrap();
        let path = simulate_tvar1(&spec, 2000, 5).unwrap();
        let eps = InnovationStream::new(5, spec.innovations(), 1).fill(0, 3);
        let a1 = params.a(1.0 / 2000.0);
        assert_eq!(path.at(0)[0], a1 * eps[0] + eps[1]);
        let a2 = params.a(2.0 / 2000.0);
        assert_eq!(path.at(1)[0], a2 * path.at(0)[0] + eps[2]);
    }

    #[test]
    fn ar1_lag_one_autocorrelation() {
        let a: ScalarFn = Arc::new(|_| 0.5);
        let spec =
            ProcessSpec::tv_ar1("ar", 1, None, a, InnovationLaw::gaussian(0.0, 1.0).unwrap())
                .unwrap();
        let path = simulate_tvar1(&spec, 100_000, 8).unwrap();
        let x = path.scalars().unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let c1: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        assert!((c1 / c0 - 0.5).abs() < 0.01, "rho1 = {}", c1 / c0);
    }

    #[test]
    fn companion_of_time_invariant_spec_ignores_u() {
        let coef: CoefFn = Arc::new(|_, j, out: &mut [f64]| {
            out[0] = if j == 0 {
                1.0
            } else if j == 1 {
                0.3
            } else {
                0.0
            }
        });
        let spec = ProcessSpec::tv_ma(
            "s",
            1,
            None,
            coef,
            None,
            Some(1),
            InnovationLaw::gaussian(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let a = simulate_companion(&spec, 0.1, 30, 1e-12, 4).unwrap();
        let b = simulate_companion(&spec, 0.9, 30, 1e-12, 4).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn truncation_beyond_support_is_companion() {
        let spec = ma1_spec(1);
        let full = simulate_companion(&spec, 0.3, 40, DEFAULT_TRUNC_TOL, 12).unwrap();
        let trunc = simulate_truncated_companion(&spec, 0.3, 5, 40, 12).unwrap();
        assert_eq!(full.values(), trunc.values());
    }

    #[test]
    fn truncation_one_keeps_lag_zero() {
        let spec = ma1_spec(1);
        let trunc = simulate_truncated_companion(&spec, 0.25, 1, 10, 3).unwrap();
        let eps = InnovationStream::new(3, spec.innovations(), 1).fill(1, 10);
        for (t, e) in eps.iter().enumerate() {
            assert_eq!(trunc.at(t)[0], 1.25 * e);
        }
    }

    #[test]
    fn process_and_companion_coincide_for_frozen_coefficients() {
        // with A_{t,T}(j) = A(t/T, j) the companion at u = t/T reproduces X_{t,T}
        let spec = ma1_spec(1);
        let t_len = 64;
        let path = simulate_tvma(&spec, t_len, 1e-12, 21).unwrap();
        for t in [1usize, 17, 64] {
            let comp = simulate_companion(&spec, t as f64 / t_len as f64, t, 1e-12, 21).unwrap();
            assert!((comp.at(t - 1)[0] - path.at(t - 1)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn multivariate_ma_uses_matrix_product() {
        let coef: CoefFn = Arc::new(|_, j, out: &mut [f64]| {
            out.iter_mut().for_each(|x| *x = 0.0);
            if j == 0 {
                out.copy_from_slice(&[1.0, 2.0, 0.0, 1.0]);
            }
        });
        let spec = ProcessSpec::tv_ma(
            "m2",
            2,
            None,
            coef,
            None,
            Some(0),
            InnovationLaw::gaussian(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let path = simulate_tvma(&spec, 3, 1e-12, 6).unwrap();
        let eps = InnovationStream::new(6, spec.innovations(), 2).fill(1, 3);
        for t in 0..3 {
            let e = &eps[2 * t..2 * t + 2];
            assert_eq!(path.at(t), &[e[0] + 2.0 * e[1], e[1]]);
        }
    }

    #[test]
    fn path_rejects_non_finite() {
        assert!(Path::from_scalars(vec![1.0, f64::NAN]).is_err());
        assert!(Path::from_scalars(vec![]).is_err());
        assert!(Path::new(vec![1.0, 2.0, 3.0], 2, "x", 0).is_err());
    }

    #[test]
    fn registry_names() {
        let mut params = BTreeMap::new();
        assert!(spec_from_registry("sigma_smile", &params).is_ok());
        assert!(spec_from_registry("sin_ar", &params).is_ok());
        assert!(spec_from_registry("nope", &params).is_err());
        params.insert("bogus".to_string(), 1.0);
        assert!(spec_from_registry("sin_ar", &params).is_err());
    }
}
