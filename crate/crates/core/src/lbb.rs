//! Local block bootstrap.
//!
//! The series is cut into `floor(T / L)` blocks of length `L`. Block `i` is
//! replaced by the stretch shifted by `k_i ~ Uniform{-TD, ..., TD}`; when the
//! shifted block would leave `[1, T]` the shift `-k_i` is used instead.
//! Positions after the last full block keep their original values.
//!
//! Since blocks are independent given the data, exact bootstrap moments are
//! sums over blocks of moments over the `2 TD + 1` equiprobable shifts. The
//! [`ShiftTable`] precomputes every block contribution once, after which
//! each bootstrap draw costs one table lookup per block.

use std::ops::Range;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::process::Path;
use crate::rng::{below, StreamKey};
use crate::stats::{check_lengths, Functional, WeightScheme};

/// Validated bootstrap configuration for a series of length `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LbbPlan {
    t_len: usize,
    block_len: usize,
    half_window: usize,
    n_blocks: usize,
}

/// Indices (1-based) whose blocks may have their shift sign flipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndpointSets {
    /// `1..=TD`
    pub ep1: Range<usize>,
    /// `T - TD + 1..=T`
    pub ep2: Range<usize>,
}

impl EndpointSets {
    pub fn contains(&self, t: usize) -> bool {
        self.ep1.contains(&t) || self.ep2.contains(&t)
    }

    pub fn is_disjoint(&self) -> bool {
        self.ep1.end <= self.ep2.start
    }
}

impl LbbPlan {
    /// Plan with blocklength `L` and half window `TD` (both in index units).
    ///
    /// Fails when some block can leave `[1, T]` under both `+k` and `-k`.
    pub fn new(t_len: usize, block_len: usize, half_window: usize) -> Result<Self> {
        if block_len < 1 || block_len > t_len {
            return Err(Error::InvalidPlan(format!(
                "blocklength L = {block_len} must satisfy 1 <= L <= T = {t_len}"
            )));
        }
        if half_window < 1 || half_window >= t_len {
            return Err(Error::InvalidPlan(format!(
                "half window TD = {half_window} must satisfy 1 <= TD < T = {t_len}"
            )));
        }
        let plan = LbbPlan {
            t_len,
            block_len,
            half_window,
            n_blocks: t_len / block_len,
        };
        // validity is monotone in |k|, so checking |k| = TD covers every shift
        for i in 0..plan.n_blocks {
            let k = half_window as i64;
            if !plan.shift_in_range(i, k) && !plan.shift_in_range(i, -k) {
                return Err(Error::InvalidPlan(format!(
                    "block {i} (positions {}..={}) leaves [1, {t_len}] for both +{k} and -{k}",
                    i * block_len + 1,
                    (i + 1) * block_len
                )));
            }
        }
        Ok(plan)
    }

    /// Plan from a window fraction `D_T`; `T D_T` is rounded to the nearest integer.
    pub fn from_fraction(t_len: usize, block_len: usize, window: f64) -> Result<Self> {
        if !(window > 0.0 && window < 1.0) {
            return Err(Error::InvalidPlan(format!(
                "window D_T must lie in (0, 1), got {window}"
            )));
        }
        let exact = t_len as f64 * window;
        let rounded = exact.round();
        if (exact - rounded).abs() > 1e-9 {
            log::warn!("T * D_T = {exact} is not an integer, using {rounded}");
        }
        Self::new(t_len, block_len, rounded as usize)
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn half_window(&self) -> usize {
        self.half_window
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Number of equiprobable shifts, `2 TD + 1`.
    pub fn n_shifts(&self) -> usize {
        2 * self.half_window + 1
    }

    /// 1-based first index of every block: `1 + i L`.
    pub fn block_starts(&self) -> Vec<usize> {
        (0..self.n_blocks).map(|i| 1 + i * self.block_len).collect()
    }

    /// 0-based positions after the last full block; copied unchanged.
    pub fn tail(&self) -> Range<usize> {
        self.n_blocks * self.block_len..self.t_len
    }

    pub fn endpoints(&self) -> EndpointSets {
        EndpointSets {
            ep1: 1..self.half_window + 1,
            ep2: self.t_len - self.half_window + 1..self.t_len + 1,
        }
    }

    fn shift_in_range(&self, block: usize, k: i64) -> bool {
        let start = (block * self.block_len) as i64 + k;
        start >= 0 && start + self.block_len as i64 <= self.t_len as i64
    }

    /// Shift actually applied to `block` when `k` is drawn.
    pub fn effective_shift(&self, block: usize, k: i64) -> i64 {
        if self.shift_in_range(block, k) {
            k
        } else {
            -k
        }
    }

    /// Map one raw 64-bit word to a shift in `[-TD, TD]`.
    pub fn shift_from_word(&self, word: u64) -> i64 {
        below(word, self.n_shifts() as u64) as i64 - self.half_window as i64
    }

    /// Shifts for blocks `blocks` from a counter-based stream: block `i` reads
    /// the `i`-th 64-bit word of `key`, so any sub-range reproduces the same draws.
    pub fn draw_shifts(&self, key: StreamKey, blocks: Range<usize>) -> Vec<i64> {
        let mut rng = key.rng_at(2 * blocks.start as u128);
        blocks
            .map(|_| self.shift_from_word(rng.next_u64()))
            .collect()
    }
}

/// Resample with given raw shifts `k_0, ..., k_{n_blocks - 1}` (reflection
/// applied here). Useful with forced shifts; see [`lbb_resample`].
pub fn resample_with_shifts(path: &Path, plan: &LbbPlan, shifts: &[i64]) -> Result<Path> {
    if path.len() != plan.t_len {
        return Err(Error::ShapeMismatch(format!(
            "plan built for T = {} but path has T = {}",
            plan.t_len,
            path.len()
        )));
    }
    if shifts.len() != plan.n_blocks {
        return Err(Error::ShapeMismatch(format!(
            "expected {} shifts, got {}",
            plan.n_blocks,
            shifts.len()
        )));
    }
    if let Some(k) = shifts
        .iter()
        .find(|k| k.unsigned_abs() as usize > plan.half_window)
    {
        return Err(Error::param(format!("shift {k} outside [-TD, TD]")));
    }
    let d = path.dim();
    let src = path.values();
    let mut out = Vec::with_capacity(src.len());
    for (i, &k) in shifts.iter().enumerate() {
        let start = (i * plan.block_len) as i64 + plan.effective_shift(i, k);
        let start = start as usize;
        out.extend_from_slice(&src[start * d..(start + plan.block_len) * d]);
    }
    let tail = plan.tail();
    out.extend_from_slice(&src[tail.start * d..tail.end * d]);
    Path::new(out, d, path.spec_id(), path.seed())
}

/// One bootstrap series `X*_{1,T}, ..., X*_{T,T}` with shifts drawn from `key`.
pub fn lbb_resample(path: &Path, plan: &LbbPlan, key: StreamKey) -> Result<Path> {
    let shifts = plan.draw_shifts(key, 0..plan.n_blocks);
    resample_with_shifts(path, plan, &shifts)
}

/// Per-block contributions `sum_{t in block} w_t f_j(X*_t)` for every block
/// carrying weight, every shift and every functional `f_j`.
#[derive(Debug, Clone)]
pub struct ShiftTable {
    plan: LbbPlan,
    n_func: usize,
    /// indices of blocks containing a positive weight, ascending
    blocks: Vec<usize>,
    /// `[block][raw shift k + TD][j]`
    values: Vec<f64>,
    /// `[block][j]`, mean over shifts
    means: Vec<f64>,
    /// `sum` over the tail of `w_t f_j(X_t)`
    tail: Vec<f64>,
}

impl ShiftTable {
    pub fn new(
        path: &Path,
        plan: &LbbPlan,
        weights: &WeightScheme,
        fs: &[Functional],
    ) -> Result<Self> {
        check_lengths(path, weights)?;
        if path.len() != plan.t_len {
            return Err(Error::ShapeMismatch(format!(
                "plan built for T = {} but path has T = {}",
                plan.t_len,
                path.len()
            )));
        }
        if fs.is_empty() {
            return Err(Error::param("at least one functional is required"));
        }
        let n_func = fs.len();
        let w = weights.weights();
        let support = weights.support();
        let l = plan.block_len;

        // f-values are only needed where some block with weight can read
        let reach = plan.half_window + l;
        let lo = support.start.saturating_sub(reach);
        let hi = (support.end + reach).min(plan.t_len);
        let mut fvals = vec![0.0; (hi - lo) * n_func];
        for t in lo..hi {
            for (j, f) in fs.iter().enumerate() {
                fvals[(t - lo) * n_func + j] = f.eval(path.at(t));
            }
        }
        let fval = |t: usize, j: usize| fvals[(t - lo) * n_func + j];

        let blocks: Vec<usize> = if support.is_empty() {
            Vec::new()
        } else {
            let first = support.start / l;
            let last = ((support.end - 1) / l).min(plan.n_blocks.saturating_sub(1));
            (first..=last)
                .filter(|&i| i < plan.n_blocks && w[i * l..(i + 1) * l].iter().any(|&x| x > 0.0))
                .collect()
        };

        let n_shifts = plan.n_shifts();
        let mut values = vec![0.0; blocks.len() * n_shifts * n_func];
        let mut means = vec![0.0; blocks.len() * n_func];
        for (bi, &i) in blocks.iter().enumerate() {
            let start = i * l;
            for (ki, k) in (-(plan.half_window as i64)..=plan.half_window as i64).enumerate() {
                let src = (start as i64 + plan.effective_shift(i, k)) as usize;
                let cell =
                    &mut values[(bi * n_shifts + ki) * n_func..(bi * n_shifts + ki + 1) * n_func];
                for p in 0..l {
                    let wt = w[start + p];
                    if wt != 0.0 {
                        for (j, c) in cell.iter_mut().enumerate() {
                            *c += wt * fval(src + p, j);
                        }
                    }
                }
            }
            for j in 0..n_func {
                let sum: f64 = (0..n_shifts)
                    .map(|ki| values[(bi * n_shifts + ki) * n_func + j])
                    .sum();
                means[bi * n_func + j] = sum / n_shifts as f64;
            }
        }

        let mut tail = vec![0.0; n_func];
        for t in plan.tail() {
            if w[t] != 0.0 {
                for (j, c) in tail.iter_mut().enumerate() {
                    *c += w[t] * fval(t, j);
                }
            }
        }

        Ok(ShiftTable {
            plan: *plan,
            n_func,
            blocks,
            values,
            means,
            tail,
        })
    }

    pub fn n_functionals(&self) -> usize {
        self.n_func
    }

    /// Blocks that carry weight.
    pub fn active_blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// `E* sum_t w_t f_j(X*_t)` for each functional.
    pub fn exact_mean(&self) -> Vec<f64> {
        let mut out = self.tail.clone();
        for bi in 0..self.blocks.len() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.means[bi * self.n_func + j];
            }
        }
        out
    }

    /// Exact bootstrap covariance matrix (row-major `J x J`) of the statistic vector.
    pub fn exact_covariance(&self) -> Vec<f64> {
        let n = self.n_func;
        let n_shifts = self.plan.n_shifts();
        let mut cov = vec![0.0; n * n];
        for bi in 0..self.blocks.len() {
            let mean = &self.means[bi * n..(bi + 1) * n];
            let mut block_cov = vec![0.0; n * n];
            for ki in 0..n_shifts {
                let v = &self.values[(bi * n_shifts + ki) * n..(bi * n_shifts + ki + 1) * n];
                for a in 0..n {
                    for b in 0..n {
                        block_cov[a * n + b] += (v[a] - mean[a]) * (v[b] - mean[b]);
                    }
                }
            }
            for (c, bc) in cov.iter_mut().zip(&block_cov) {
                *c += bc / n_shifts as f64;
            }
        }
        cov
    }

    /// Exact bootstrap variance of each component.
    pub fn exact_variance(&self) -> Vec<f64> {
        let cov = self.exact_covariance();
        (0..self.n_func).map(|j| cov[j * self.n_func + j]).collect()
    }

    /// Centred statistic `sum_t w_t (f_j(X*_t) - E* f_j(X*_t))` for given raw
    /// shifts of the active blocks (in the order of [`Self::active_blocks`]).
    pub fn centred_for_shifts(&self, shifts: &[i64]) -> Vec<f64> {
        let n = self.n_func;
        let n_shifts = self.plan.n_shifts();
        let td = self.plan.half_window as i64;
        let mut out = vec![0.0; n];
        for (bi, &k) in shifts.iter().enumerate() {
            let ki = (k + td) as usize;
            let v = &self.values[(bi * n_shifts + ki) * n..(bi * n_shifts + ki + 1) * n];
            let mean = &self.means[bi * n..(bi + 1) * n];
            for j in 0..n {
                out[j] += v[j] - mean[j];
            }
        }
        out
    }

    /// One centred bootstrap draw using shifts from `key`.
    pub fn draw(&self, key: StreamKey) -> Vec<f64> {
        let (Some(&first), Some(&last)) = (self.blocks.first(), self.blocks.last()) else {
            return vec![0.0; self.n_func];
        };
        let all = self.plan.draw_shifts(key, first..last + 1);
        let shifts: Vec<i64> = self.blocks.iter().map(|&i| all[i - first]).collect();
        self.centred_for_shifts(&shifts)
    }

    /// `b` draws; draw `b` uses the stream `key.derive(b)`.
    pub fn distribution(&self, n_draws: usize, key: StreamKey) -> Vec<Vec<f64>> {
        (0..n_draws)
            .map(|b| self.draw(key.derive(b as u64)))
            .collect()
    }
}

/// `E* [sum_t w_t f(s, X*_t)]`, computed exactly.
pub fn bootstrap_mean_exact(
    path: &Path,
    plan: &LbbPlan,
    weights: &WeightScheme,
    f: &Functional,
) -> Result<f64> {
    let table = ShiftTable::new(path, plan, weights, std::slice::from_ref(f))?;
    Ok(table.exact_mean()[0])
}

/// `Var* [sum_t w_t f(s, X*_t)]`, computed exactly block by block.
pub fn bootstrap_variance_exact(
    path: &Path,
    plan: &LbbPlan,
    weights: &WeightScheme,
    f: &Functional,
) -> Result<f64> {
    let table = ShiftTable::new(path, plan, weights, std::slice::from_ref(f))?;
    Ok(table.exact_variance()[0].max(0.0))
}

/// `n_draws` independent draws of the centred bootstrap statistic.
pub fn bootstrap_distribution(
    path: &Path,
    plan: &LbbPlan,
    weights: &WeightScheme,
    f: &Functional,
    n_draws: usize,
    key: StreamKey,
) -> Result<Vec<f64>> {
    if n_draws < 1 {
        return Err(Error::param("number of bootstrap draws must be >= 1"));
    }
    let table = ShiftTable::new(path, plan, weights, std::slice::from_ref(f))?;
    Ok(table
        .distribution(n_draws, key)
        .into_iter()
        .map(|v| v[0])
        .collect())
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`; "type 7").
pub fn quantile_type7(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::param("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!(
            "quantile level must lie in [0, 1], got {p}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Symmetric interval `estimate -/+ q`, `q` the `level`-quantile of `|samples|`.
pub fn symmetric_ci(estimate: f64, samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let abs: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    let q = quantile_type7(&abs, level)?;
    Ok((estimate - q, estimate + q))
}

/// One rate relation with its observed ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCheck {
    pub name: &'static str,
    pub value: f64,
    pub pass: bool,
}

/// Finite-`T` audit of the blocklength / window / weight-count relations.
/// Asymptotic conditions cannot fail at one `T`; failing checks are warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub t_len: usize,
    pub block_len: usize,
    pub half_window: usize,
    pub d_t: usize,
    pub delta: f64,
    pub checks: Vec<RateCheck>,
}

impl RateReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Ratios: `L` itself (should grow; warns at `L = 1`),
/// `L / d_T^{delta / (2 (1 + delta))}` (should be small),
/// `d_T^{2 delta / (2 + delta)} / TD` and `TD / d_T^{1 / (2 + delta)}` (should stay bounded).
/// Each ratio passes when it is at most 1.
pub fn validate_rates(
    t_len: usize,
    block_len: usize,
    half_window: usize,
    d_t: usize,
    delta: f64,
) -> RateReport {
    let d = d_t as f64;
    let l = block_len as f64;
    let td = half_window as f64;
    let r_block = l / d.powf(delta / (2.0 * (1.0 + delta)));
    let r_window_lower = d.powf(2.0 * delta / (2.0 + delta)) / td;
    let r_window_upper = td / d.powf(1.0 / (2.0 + delta));
    let checks = vec![
        RateCheck {
            name: "L_T growing",
            value: l,
            pass: block_len >= 2,
        },
        RateCheck {
            name: "L_T / d_T^(delta/(2(1+delta)))",
            value: r_block,
            pass: r_block <= 1.0,
        },
        RateCheck {
            name: "d_T^(2delta/(2+delta)) / TD_T",
            value: r_window_lower,
            pass: r_window_lower <= 1.0,
        },
        RateCheck {
            name: "TD_T / d_T^(1/(2+delta))",
            value: r_window_upper,
            pass: r_window_upper <= 1.0,
        },
    ];
    for c in checks.iter().filter(|c| !c.pass) {
        log::warn!(
            "rate check `{}` = {:.4} outside its finite-T band",
            c.name,
            c.value
        );
    }
    RateReport {
        t_len,
        block_len,
        half_window,
        d_t,
        delta,
        checks,
    }
}
