//! Monte Carlo coverage experiments.
//!
//! Replication `r` of sample size `T` simulates its path from the stream
//! `derive(master_seed, "path", T, r)`; the bootstrap of cell `(T, L, TD)`
//! draws from `derive(master_seed, "boot", T, L, TD, r)`. All cells with the
//! same `T` therefore see the same simulated paths, adding or removing cells
//! never changes another cell's numbers, and results do not depend on how
//! replications are scheduled across threads.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;

use crate::diagnostics::spearman;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, ExperimentKind};
use crate::lbb::{quantile_type7, symmetric_ci, LbbPlan, ShiftTable};
use crate::oracle::integrated_target_rv;
use crate::process::{
    iid_gaussian_params, simulate_tvar1, sin_ar_params, smile_params, Path, Scaling, SinArParams,
    SmileMaParams,
};
use crate::rng::StreamKey;
use crate::stats::{
    kernel_weights, local_ecf, realized_volatility, true_cf_tvar1, Functional, WeightScheme,
};

const PATH_TAG: u64 = 0x7061_7468;
const BOOT_TAG: u64 = 0x626f_6f74;

/// One `(T, L, TD)` combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub t_len: usize,
    pub block_len: usize,
    pub half_window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub t_len: usize,
    pub block_len: usize,
    pub half_window: usize,
    pub hits: usize,
    pub n: usize,
    pub coverage: f64,
    pub mc_stderr: f64,
    pub mean_ci_width: f64,
    pub wall_seconds: f64,
}

impl CoverageRow {
    /// Row from a hit count; `width_sum` is the summed interval width.
    pub fn from_hits(cell: Cell, hits: usize, n: usize, width_sum: f64, seconds: f64) -> Self {
        let coverage = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        CoverageRow {
            t_len: cell.t_len,
            block_len: cell.block_len,
            half_window: cell.half_window,
            hits,
            n,
            coverage,
            mc_stderr: if n == 0 {
                0.0
            } else {
                (coverage * (1.0 - coverage) / n as f64).sqrt()
            },
            mean_ci_width: if n == 0 { 0.0 } else { width_sum / n as f64 },
            wall_seconds: seconds,
        }
    }
}

/// A cell whose plan could not be built.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCell {
    pub cell: Cell,
    pub reason: String,
}

/// A replication that panicked; `path_seed` and `bootstrap_key` replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedReplication {
    pub cell: Cell,
    pub replication: usize,
    pub path_seed: u64,
    pub bootstrap_key: StreamKey,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub skipped: Vec<SkippedCell>,
    pub failures: Vec<FailedReplication>,
}

impl CoverageReport {
    /// Spearman correlation between `TD` and coverage over the rows with the given `T` and `L`.
    pub fn td_trend(&self, t_len: usize, block_len: usize) -> Option<f64> {
        let rows: Vec<&CoverageRow> = self
            .rows
            .iter()
            .filter(|r| r.t_len == t_len && r.block_len == block_len)
            .collect();
        if rows.len() < 2 {
            return None;
        }
        let td: Vec<f64> = rows.iter().map(|r| r.half_window as f64).collect();
        let cov: Vec<f64> = rows.iter().map(|r| r.coverage).collect();
        Some(spearman(&td, &cov))
    }

    pub fn row(&self, t_len: usize, block_len: usize, half_window: usize) -> Option<&CoverageRow> {
        self.rows
            .iter()
            .find(|r| r.t_len == t_len && r.block_len == block_len && r.half_window == half_window)
    }
}

pub fn path_seed(master_seed: u64, t_len: usize, replication: usize) -> u64 {
    StreamKey::new(master_seed)
        .derive(PATH_TAG)
        .derive(t_len as u64)
        .derive(replication as u64)
        .as_seed()
}

pub fn bootstrap_key(master_seed: u64, cell: Cell, replication: usize) -> StreamKey {
    StreamKey::new(master_seed)
        .derive(BOOT_TAG)
        .derive(cell.t_len as u64)
        .derive(cell.block_len as u64)
        .derive(cell.half_window as u64)
        .derive(replication as u64)
}

/// Result of one replication in one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationOutcome {
    pub hit: bool,
    pub width: f64,
}

/// Statistic-specific part of an experiment: what to simulate and how to
/// score one bootstrap interval.
trait CoverageModel: Sync {
    fn simulate(&self, t_len: usize, seed: u64) -> Result<Path>;
    /// Per-`T` state shared by all cells and replications (targets, weights).
    fn prepare(&self, t_len: usize) -> Result<Prepared>;
    fn score(
        &self,
        prepared: &Prepared,
        path: &Path,
        plan: &LbbPlan,
        n_draws: usize,
        key: StreamKey,
    ) -> Result<ReplicationOutcome>;
}

struct Prepared {
    weights: WeightScheme,
    target: f64,
    /// `(b_T T)^{1/2}` for the ECF pivot, 1 otherwise
    root_scale: f64,
}

struct RvModel {
    params: SmileMaParams,
    level: f64,
}

impl CoverageModel for RvModel {
    fn simulate(&self, t_len: usize, seed: u64) -> Result<Path> {
        self.params.simulate(t_len, seed, Scaling::InvSqrtT)
    }

    fn prepare(&self, t_len: usize) -> Result<Prepared> {
        let sigma = self.params.sigma;
        Ok(Prepared {
            weights: WeightScheme::unit(t_len)?,
            target: integrated_target_rv(&|u| sigma.eval(u), self.params.noise_variance(), t_len)?,
            root_scale: 1.0,
        })
    }

    fn score(
        &self,
        prepared: &Prepared,
        path: &Path,
        plan: &LbbPlan,
        n_draws: usize,
        key: StreamKey,
    ) -> Result<ReplicationOutcome> {
        let rv = realized_volatility(path)?;
        let table = ShiftTable::new(path, plan, &prepared.weights, &[Functional::Square])?;
        let draws: Vec<f64> = table
            .distribution(n_draws, key)
            .into_iter()
            .map(|v| v[0])
            .collect();
        let (lo, hi) = symmetric_ci(rv, &draws, self.level)?;
        Ok(ReplicationOutcome {
            hit: lo <= prepared.target && prepared.target <= hi,
            width: hi - lo,
        })
    }
}

struct EcfModel {
    params: SinArParams,
    u: f64,
    s: f64,
    bandwidth_exponent: f64,
    kernel: crate::stats::Kernel,
    level: f64,
}

impl CoverageModel for EcfModel {
    fn simulate(&self, t_len: usize, seed: u64) -> Result<Path> {
        simulate_tvar1(&self.params.spec()?, t_len, seed)
    }

    fn prepare(&self, t_len: usize) -> Result<Prepared> {
        let bandwidth = (t_len as f64).powf(-self.bandwidth_exponent);
        let weights = kernel_weights(self.u, bandwidth, t_len, self.kernel)?;
        let a = self.params;
        let target = true_cf_tvar1(self.u, self.s, &|u| a.a(u), a.gamma, a.alpha)?;
        Ok(Prepared {
            weights,
            target,
            root_scale: (bandwidth * t_len as f64).sqrt(),
        })
    }

    fn score(
        &self,
        prepared: &Prepared,
        path: &Path,
        plan: &LbbPlan,
        n_draws: usize,
        key: StreamKey,
    ) -> Result<ReplicationOutcome> {
        let ecf = local_ecf(path, &prepared.weights, &[self.s])?;
        let pivot = prepared.root_scale * (ecf - prepared.target).norm();
        // weights (b_T T)^{-1/2} K already put the draws on the pivot's scale
        let fs = [Functional::Cos(vec![self.s]), Functional::Sin(vec![self.s])];
        let table = ShiftTable::new(path, plan, &prepared.weights, &fs)?;
        let moduli: Vec<f64> = table
            .distribution(n_draws, key)
            .into_iter()
            .map(|v| v[0].hypot(v[1]))
            .collect();
        let q = quantile_type7(&moduli, self.level)?;
        Ok(ReplicationOutcome {
            hit: pivot <= q,
            width: 2.0 * q / prepared.root_scale,
        })
    }
}

fn rv_model(config: &ExperimentConfig) -> Result<RvModel> {
    let params = match config.process.as_str() {
        "sigma_smile" => smile_params(&config.process_params),
        "iid_gaussian" => iid_gaussian_params(
            config
                .process_params
                .get("variance")
                .copied()
                .unwrap_or(1.0),
        ),
        other => {
            return Err(Error::ConfigKey(format!(
                "rv_coverage needs process sigma_smile or iid_gaussian, got `{other}`"
            )))
        }
    };
    params.spec()?;
    Ok(RvModel {
        params,
        level: config.level,
    })
}

fn ecf_model(config: &ExperimentConfig) -> Result<EcfModel> {
    if config.process != "sin_ar" {
        return Err(Error::ConfigKey(format!(
            "ecf_coverage needs process sin_ar, got `{}`",
            config.process
        )));
    }
    let params = sin_ar_params(&config.process_params);
    if params.beta != 0.0 || params.mu != 0.0 {
        return Err(Error::ConfigKey(
            "ecf_coverage needs symmetric, centred innovations (beta = 0, mu = 0)".into(),
        ));
    }
    params.spec()?;
    Ok(EcfModel {
        params,
        u: config.u,
        s: config.s,
        bandwidth_exponent: config.bandwidth_exponent,
        kernel: config.kernel,
        level: config.level,
    })
}

/// Realized-volatility coverage per `(T, L, TD)` cell.
pub fn run_rv_coverage(config: &ExperimentConfig) -> Result<CoverageReport> {
    if config.experiment != ExperimentKind::RvCoverage {
        return Err(Error::ConfigKey(
            "run_rv_coverage needs experiment = rv_coverage".into(),
        ));
    }
    run_coverage(config, &rv_model(config)?)
}

/// Local-ECF pivot coverage per `(T, L, TD)` cell.
pub fn run_ecf_coverage(config: &ExperimentConfig) -> Result<CoverageReport> {
    if config.experiment != ExperimentKind::EcfCoverage {
        return Err(Error::ConfigKey(
            "run_ecf_coverage needs experiment = ecf_coverage".into(),
        ));
    }
    run_coverage(config, &ecf_model(config)?)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<CoverageReport> {
    match config.experiment {
        ExperimentKind::RvCoverage => run_rv_coverage(config),
        ExperimentKind::EcfCoverage => run_ecf_coverage(config),
    }
}

/// Run `f` on a dedicated pool of `threads` workers (`None`: rayon's default).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::param(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

enum Slot {
    Done(ReplicationOutcome, f64),
    Failed(String),
}

fn run_coverage(config: &ExperimentConfig, model: &dyn CoverageModel) -> Result<CoverageReport> {
    let mut report = CoverageReport::default();
    for &t_len in &config.t_list {
        let mut cells = Vec::new();
        for &block_len in &config.l_list {
            for &half_window in &config.td_list {
                let cell = Cell {
                    t_len,
                    block_len,
                    half_window,
                };
                match LbbPlan::new(t_len, block_len, half_window) {
                    Ok(plan) => cells.push((cell, plan)),
                    Err(e) => {
                        log::warn!("skipping cell {cell:?}: {e}");
                        report.skipped.push(SkippedCell {
                            cell,
                            reason: e.to_string(),
                        });
                    }
                }
            }
        }
        if cells.is_empty() {
            continue;
        }
        let prepared = model.prepare(t_len)?;

        // slots[r][c] for replication r and cell c
        let slots: Vec<Vec<Slot>> = (0..config.n_replications)
            .into_par_iter()
            .map(|r| {
                let seed = path_seed(config.master_seed, t_len, r);
                let path = catch_unwind(AssertUnwindSafe(|| model.simulate(t_len, seed)));
                let path = match path {
                    Ok(Ok(p)) => p,
                    Ok(Err(e)) => {
                        return cells.iter().map(|_| Slot::Failed(e.to_string())).collect()
                    }
                    Err(p) => {
                        let msg = panic_message(p);
                        return cells.iter().map(|_| Slot::Failed(msg.clone())).collect();
                    }
                };
                cells
                    .iter()
                    .map(|(cell, plan)| {
                        let key = bootstrap_key(config.master_seed, *cell, r);
                        let start = Instant::now();
                        let res = catch_unwind(AssertUnwindSafe(|| {
                            model.score(&prepared, &path, plan, config.b_resamples, key)
                        }));
                        let secs = start.elapsed().as_secs_f64();
                        match res {
                            Ok(Ok(o)) => Slot::Done(o, secs),
                            Ok(Err(e)) => Slot::Failed(e.to_string()),
                            Err(p) => Slot::Failed(panic_message(p)),
                        }
                    })
                    .collect()
            })
            .collect();

        for (c, (cell, _)) in cells.iter().enumerate() {
            let mut hits = 0;
            let mut n = 0;
            let mut width = 0.0;
            let mut seconds = 0.0;
            for (r, row) in slots.iter().enumerate() {
                match &row[c] {
                    Slot::Done(o, secs) => {
                        n += 1;
                        hits += o.hit as usize;
                        width += o.width;
                        seconds += secs;
                    }
                    Slot::Failed(message) => report.failures.push(FailedReplication {
                        cell: *cell,
                        replication: r,
                        path_seed: path_seed(config.master_seed, t_len, r),
                        bootstrap_key: bootstrap_key(config.master_seed, *cell, r),
                        message: message.clone(),
                    }),
                }
            }
            let seconds = if config.record_timing { seconds } else { 0.0 };
            report
                .rows
                .push(CoverageRow::from_hits(*cell, hits, n, width, seconds));
        }
    }
    Ok(report)
}
