//! Local block bootstrap for locally stationary time series.
//!
//! The crate simulates time-varying moving-average and AR(1) processes with
//! Gaussian or alpha-stable innovations, computes weighted statistics such as
//! realized volatility and the local empirical characteristic function,
//! resamples them with the local block bootstrap and runs coverage
//! experiments over grids of block lengths and shift windows.
//!
//! ```
//! use lbblab::{LbbPlan, ShiftTable, Functional, WeightScheme, SmileMaParams, Scaling};
//!
//! let path = SmileMaParams::default().simulate(400, 7, Scaling::InvSqrtT).unwrap();
//! let plan = LbbPlan::new(400, 3, 20).unwrap();
//! let weights = WeightScheme::unit(400).unwrap();
//! let table = ShiftTable::new(&path, &plan, &weights, &[Functional::Square]).unwrap();
//! assert!(table.exact_variance()[0] > 0.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod lbb;
pub mod oracle;
pub mod process;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use lbb::{
    bootstrap_distribution, bootstrap_mean_exact, bootstrap_variance_exact, lbb_resample,
    quantile_type7, symmetric_ci, validate_rates, LbbPlan, RateReport, ShiftTable,
};
pub use oracle::{
    enumerate_bootstrap_law, limiting_variance_mc, ExactBootstrapLaw, LimitingVariance, McSettings,
};
pub use process::{
    simulate, simulate_companion, simulate_truncated_companion, simulate_tvar1, simulate_tvma,
    InnovationLaw, Path, ProcessSpec, Scaling, SigmaSmile, SinArParams, SmileMaParams,
};
pub use rng::StreamKey;
pub use stats::{kernel_weights, local_ecf, realized_volatility, Functional, Kernel, WeightScheme};
