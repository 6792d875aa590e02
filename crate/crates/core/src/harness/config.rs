//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Every key must be known; duplicates are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::stats::Kernel;

/// Parsed `key = value` lines in file order, with their line numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: Vec<(usize, String, String)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            if let Some((prev, ..)) = entries.iter().find(|(_, k, _)| k == key) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("duplicate key `{key}` (first set on line {prev})"),
                });
            }
            entries.push((line_no, key.to_string(), value.trim().to_string()));
        }
        Ok(KvFile { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(_, _, v)| v.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(l, ..)| *l)
            .unwrap_or(0)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(_, k, _)| k.as_str())
    }

    /// Error on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        for (line, key, _) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config {
                    line: *line,
                    message: format!("unknown key `{key}`"),
                });
            }
        }
        Ok(())
    }

    fn bad(&self, key: &str, what: &str) -> Error {
        Error::Config {
            line: self.line_of(key),
            message: format!("`{key}`: {what}"),
        }
    }

    pub fn parse_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.bad(key, &format!("expected a finite number, got `{v}`")))
            })
            .transpose()
    }

    pub fn parse_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>().map_err(|_| {
                    self.bad(key, &format!("expected a non-negative integer, got `{v}`"))
                })
            })
            .transpose()
    }

    pub fn parse_usize(&self, key: &str) -> Result<Option<usize>> {
        Ok(self.parse_u64(key)?.map(|v| v as usize))
    }

    pub fn parse_bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(self.bad(key, &format!("expected true/false, got `{other}`"))),
            })
            .transpose()
    }

    pub fn parse_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.get(key)
            .map(|v| {
                let items: std::result::Result<Vec<usize>, _> =
                    v.split(',').map(|s| s.trim().parse::<usize>()).collect();
                match items {
                    Ok(list) if !list.is_empty() => Ok(list),
                    _ => Err(self.bad(
                        key,
                        &format!("expected a comma-separated integer list, got `{v}`"),
                    )),
                }
            })
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Coverage of symmetric intervals for realized volatility.
    RvCoverage,
    /// Coverage of the local-ECF pivot.
    EcfCoverage,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::RvCoverage => "rv_coverage",
            ExperimentKind::EcfCoverage => "ecf_coverage",
        }
    }
}

/// Process-parameter keys forwarded to the process registry.
pub const PROCESS_PARAM_KEYS: &[&str] = &[
    "sigma_curvature",
    "sigma_center",
    "sigma_floor",
    "ma_coef",
    "eta_variance",
    "variance",
    "ar_amplitude",
    "alpha",
    "beta",
    "gamma",
    "mu",
];

const EXPERIMENT_KEYS: &[&str] = &[
    "experiment",
    "process",
    "T_list",
    "L_list",
    "TD_list",
    "level",
    "N",
    "B",
    "master_seed",
    "output_dir",
    "emit_plots",
    "record_timing",
    "u",
    "s",
    "bandwidth_exponent",
    "kernel",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub process: String,
    pub process_params: BTreeMap<String, f64>,
    pub t_list: Vec<usize>,
    pub l_list: Vec<usize>,
    pub td_list: Vec<usize>,
    pub level: f64,
    pub n_replications: usize,
    pub b_resamples: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
    /// Write measured wall times into the CSV (otherwise 0, keeping output byte-stable).
    pub record_timing: bool,
    /// Local ECF settings: rescaled time, frequency, `b_T = T^{-bandwidth_exponent}`, kernel.
    pub u: f64,
    pub s: f64,
    pub bandwidth_exponent: f64,
    pub kernel: Kernel,
}

impl ExperimentConfig {
    /// Defaults for realized-volatility coverage: smile model, `T = 1000`,
    /// `L in {2,3,4,6,8}`, `TD in {25,50,100,200}`, 90% intervals.
    pub fn rv_default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::RvCoverage,
            process: "sigma_smile".into(),
            process_params: BTreeMap::new(),
            t_list: vec![1000],
            l_list: vec![2, 3, 4, 6, 8],
            td_list: vec![25, 50, 100, 200],
            level: 0.9,
            n_replications: 200,
            b_resamples: 200,
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            emit_plots: true,
            record_timing: false,
            u: 0.4,
            s: 6.0,
            bandwidth_exponent: 0.4,
            kernel: Kernel::Epanechnikov,
        }
    }

    /// Defaults for local-ECF coverage: stable tvAR(1), `T in {2000, 5000}`,
    /// `L = 25`, `TD in {50,100,200,400}`, `u = 0.4`, `s = 6`, 95% level.
    pub fn ecf_default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::EcfCoverage,
            process: "sin_ar".into(),
            t_list: vec![2000, 5000],
            l_list: vec![25],
            td_list: vec![50, 100, 200, 400],
            level: 0.95,
            ..Self::rv_default()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = KvFile::parse(text)?;
        let allowed: Vec<&str> = EXPERIMENT_KEYS
            .iter()
            .chain(PROCESS_PARAM_KEYS)
            .copied()
            .collect();
        kv.reject_unknown(&allowed)?;
        let mut cfg = match kv.get("experiment") {
            Some("rv_coverage") => Self::rv_default(),
            Some("ecf_coverage") => Self::ecf_default(),
            Some(other) => {
                return Err(Error::Config {
                    line: kv.line_of("experiment"),
                    message: format!("unknown experiment `{other}` (rv_coverage | ecf_coverage)"),
                })
            }
            None => return Err(Error::ConfigKey("missing required key `experiment`".into())),
        };
        if let Some(p) = kv.get("process") {
            cfg.process = p.to_string();
        }
        for key in PROCESS_PARAM_KEYS {
            if let Some(v) = kv.parse_f64(key)? {
                cfg.process_params.insert(key.to_string(), v);
            }
        }
        if let Some(v) = kv.parse_usize_list("T_list")? {
            cfg.t_list = v;
        }
        if let Some(v) = kv.parse_usize_list("L_list")? {
            cfg.l_list = v;
        }
        if let Some(v) = kv.parse_usize_list("TD_list")? {
            cfg.td_list = v;
        }
        if let Some(v) = kv.parse_f64("level")? {
            cfg.level = v;
        }
        if let Some(v) = kv.parse_usize("N")? {
            cfg.n_replications = v;
        }
        if let Some(v) = kv.parse_usize("B")? {
            cfg.b_resamples = v;
        }
        if let Some(v) = kv.parse_u64("master_seed")? {
            cfg.master_seed = v;
        }
        if let Some(v) = kv.get("output_dir") {
            cfg.output_dir = PathBuf::from(v);
        }
        if let Some(v) = kv.parse_bool("emit_plots")? {
            cfg.emit_plots = v;
        }
        if let Some(v) = kv.parse_bool("record_timing")? {
            cfg.record_timing = v;
        }
        if let Some(v) = kv.parse_f64("u")? {
            cfg.u = v;
        }
        if let Some(v) = kv.parse_f64("s")? {
            cfg.s = v;
        }
        if let Some(v) = kv.parse_f64("bandwidth_exponent")? {
            cfg.bandwidth_exponent = v;
        }
        if let Some(v) = kv.get("kernel") {
            cfg.kernel = Kernel::from_name(v).map_err(|e| Error::Config {
                line: kv.line_of("kernel"),
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_replications < 1 {
            return Err(Error::ConfigKey("N must be >= 1".into()));
        }
        if self.b_resamples < 1 {
            return Err(Error::ConfigKey("B must be >= 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::ConfigKey(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.t_list.is_empty() || self.l_list.is_empty() || self.td_list.is_empty() {
            return Err(Error::ConfigKey(
                "T_list, L_list and TD_list must be non-empty".into(),
            ));
        }
        if self.t_list.contains(&0) {
            return Err(Error::ConfigKey("T values must be >= 1".into()));
        }
        if self.experiment == ExperimentKind::EcfCoverage && !(self.bandwidth_exponent > 0.0) {
            return Err(Error::ConfigKey("bandwidth_exponent must be > 0".into()));
        }
        // registry lookup validates the process name and its parameters
        crate::process::spec_from_registry(&self.process, &self.process_params)?;
        Ok(())
    }

    /// Canonical `key = value` rendering (round-trips through [`Self::parse`]).
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = String::new();
        let _ = writeln!(out, "experiment = {}", self.experiment.name());
        let _ = writeln!(out, "process = {}", self.process);
        for (k, v) in &self.process_params {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "T_list = {}", list(&self.t_list));
        let _ = writeln!(out, "L_list = {}", list(&self.l_list));
        let _ = writeln!(out, "TD_list = {}", list(&self.td_list));
        let _ = writeln!(out, "level = {}", self.level);
        let _ = writeln!(out, "N = {}", self.n_replications);
        let _ = writeln!(out, "B = {}", self.b_resamples);
        let _ = writeln!(out, "master_seed = {}", self.master_seed);
        let _ = writeln!(out, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(out, "emit_plots = {}", self.emit_plots);
        let _ = writeln!(out, "record_timing = {}", self.record_timing);
        let _ = writeln!(out, "u = {}", self.u);
        let _ = writeln!(out, "s = {}", self.s);
        let _ = writeln!(out, "bandwidth_exponent = {}", self.bandwidth_exponent);
        let _ = writeln!(out, "kernel = {}", self.kernel.name());
        out
    }
}
