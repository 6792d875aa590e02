use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lbblab::harness::{
    emit_outputs, run_experiment, summary, with_threads, ExperimentConfig, ExperimentKind,
};
use lbblab::lbb::{
    bootstrap_variance_exact, quantile_type7, symmetric_ci, validate_rates, LbbPlan, ShiftTable,
};
use lbblab::oracle::{enumerate_bootstrap_law, limiting_variance_mc, McSettings};
use lbblab::process::{
    iid_gaussian_params, spec_from_registry, InnovationLaw, Path, DEFAULT_TRUNC_TOL,
};
use lbblab::rng::StreamKey;
use lbblab::stats::{
    kernel_weights, local_ecf, realized_volatility, Functional, Kernel, WeightScheme,
};
use lbblab::{simulate, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lbblab",
    version,
    about = "Local block bootstrap for locally stationary time series"
)]
struct Cli {
    /// Experiment or parameter file (flat key = value)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long, global = true, env = "LBBLAB_THREADS")]
    threads: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path and write it as CSV (`t,x`)
    Simulate(SimulateArgs),
    /// One bootstrap interval for a path file
    Bootstrap(BootstrapArgs),
    /// Run a coverage experiment
    Coverage(CoverageArgs),
    /// Run the built-in reference checks
    Oracle(OracleArgs),
    /// Audit blocklength and window rates
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Registry name: sigma_smile, iid_gaussian or sin_ar
    #[arg(long, default_value = "sigma_smile")]
    process: String,
    /// Process parameter, repeatable (e.g. `--param eta_variance=0.8`)
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[arg(short = 'T', long = "len", default_value_t = 1000)]
    t_len: usize,
    /// Divide the path by sqrt(T)
    #[arg(long)]
    scale_root_t: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Statistic {
    Rv,
    Ecf,
}

#[derive(Args)]
struct BootstrapArgs {
    /// CSV written by `simulate`
    #[arg(long)]
    path: PathBuf,
    #[arg(short = 'L', long = "block-len")]
    block_len: usize,
    #[arg(long = "td")]
    half_window: usize,
    #[arg(long, default_value_t = 0.9)]
    level: f64,
    #[arg(short = 'B', long = "resamples", default_value_t = 200)]
    resamples: usize,
    #[arg(long, value_enum, default_value_t = Statistic::Rv)]
    statistic: Statistic,
    #[arg(long, default_value_t = 0.4)]
    u: f64,
    #[arg(long, default_value_t = 6.0)]
    s: f64,
    #[arg(long, default_value_t = 0.4)]
    bandwidth_exponent: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Rv,
    Ecf,
}

#[derive(Args)]
struct CoverageArgs {
    /// Built-in defaults used when no --config is given
    #[arg(long, value_enum, default_value_t = Preset::Rv)]
    preset: Preset,
}

#[derive(Args)]
struct OracleArgs {
    /// Stable draws for the characteristic-function check
    #[arg(long, default_value_t = 200_000)]
    draws: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(short = 'T', long = "len")]
    t_len: Option<usize>,
    #[arg(short = 'L', long = "block-len")]
    block_len: Option<usize>,
    #[arg(long = "td")]
    half_window: Option<usize>,
    /// Moment exponent delta in the rate conditions
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config = err
                .downcast_ref::<Error>()
                .is_some_and(Error::is_config_error);
            ExitCode::from(if config { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(cli, args),
        Command::Bootstrap(args) => cmd_bootstrap(cli, args),
        Command::Coverage(args) => cmd_coverage(cli, args),
        Command::Oracle(args) => cmd_oracle(cli, args),
        Command::Validate(args) => cmd_validate(cli, args),
    }
}

fn load_config(path: &FsPath) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::ConfigKey(format!("cannot read {}: {e}", path.display())))?;
    let cfg = ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
    Ok(cfg)
}

fn write_path_csv(path: &Path) -> String {
    let d = path.dim();
    let mut out = String::from("t");
    if d == 1 {
        out.push_str(",x");
    } else {
        for p in 1..=d {
            let _ = write!(out, ",x{p}");
        }
    }
    out.push('\n');
    for t in 0..path.len() {
        let _ = write!(out, "{}", t + 1);
        for v in path.at(t) {
            let _ = write!(out, ",{v:e}");
        }
        out.push('\n');
    }
    out
}

fn read_path_csv(file: &FsPath) -> anyhow::Result<Path> {
    let text =
        fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty path file")?;
    let dim = header.split(',').count() - 1;
    if dim == 0 {
        bail!(
            "{}: header needs a time column and at least one value column",
            file.display()
        );
    }
    let mut values = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            bail!("{}:{}: expected {} fields", file.display(), i + 2, dim + 1);
        }
        for f in &fields[1..] {
            values.push(
                f.trim()
                    .parse::<f64>()
                    .with_context(|| format!("{}:{}: bad number `{f}`", file.display(), i + 2))?,
            );
        }
    }
    Ok(Path::new(values, dim, file.display().to_string(), 0)?)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> anyhow::Result<()> {
    let params: BTreeMap<String, f64> = args.params.iter().cloned().collect();
    let spec = spec_from_registry(&args.process, &params)?;
    let seed = cli.seed.unwrap_or(1);
    let mut path = simulate(&spec, args.t_len, DEFAULT_TRUNC_TOL, seed)?;
    if args.scale_root_t {
        path = path.scaled(1.0 / (args.t_len as f64).sqrt());
    }
    let csv = write_path_csv(&path);
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let file = dir.join("path.csv");
            fs::write(&file, csv).with_context(|| format!("cannot write {}", file.display()))?;
            println!("process={}", args.process);
            println!("T={}", args.t_len);
            println!("seed={seed}");
            println!("written={}", file.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_bootstrap(cli: &Cli, args: &BootstrapArgs) -> anyhow::Result<()> {
    let path = read_path_csv(&args.path)?;
    let t_len = path.len();
    let plan = LbbPlan::new(t_len, args.block_len, args.half_window)?;
    let key = StreamKey::new(cli.seed.unwrap_or(1));
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(
            Error::ConfigKey(format!("level must lie in (0, 1), got {}", args.level)).into(),
        );
    }
    println!("T={t_len}");
    println!("L={}", args.block_len);
    println!("TD={}", args.half_window);
    println!("B={}", args.resamples);
    println!("level={}", args.level);
    match args.statistic {
        Statistic::Rv => {
            let weights = WeightScheme::unit(t_len)?;
            let rv = realized_volatility(&path)?;
            let table = ShiftTable::new(&path, &plan, &weights, &[Functional::Square])?;
            let draws: Vec<f64> = table
                .distribution(args.resamples, key)
                .into_iter()
                .map(|v| v[0])
                .collect();
            let (lo, hi) = symmetric_ci(rv, &draws, args.level)?;
            println!("statistic=rv");
            println!("estimate={rv}");
            println!("ci_lower={lo}");
            println!("ci_upper={hi}");
            println!("bootstrap_sd_exact={}", table.exact_variance()[0].sqrt());
        }
        Statistic::Ecf => {
            let bandwidth = (t_len as f64).powf(-args.bandwidth_exponent);
            let weights = kernel_weights(args.u, bandwidth, t_len, Kernel::Epanechnikov)?;
            if path.dim() != 1 {
                bail!("ecf bootstrap needs a univariate path");
            }
            let ecf = local_ecf(&path, &weights, &[args.s])?;
            let fs = [Functional::Cos(vec![args.s]), Functional::Sin(vec![args.s])];
            let table = ShiftTable::new(&path, &plan, &weights, &fs)?;
            let moduli: Vec<f64> = table
                .distribution(args.resamples, key)
                .into_iter()
                .map(|v| v[0].hypot(v[1]))
                .collect();
            let q = quantile_type7(&moduli, args.level)?;
            let radius = q / (bandwidth * t_len as f64).sqrt();
            println!("statistic=ecf");
            println!("u={}", args.u);
            println!("s={}", args.s);
            println!("ecf_re={}", ecf.re);
            println!("ecf_im={}", ecf.im);
            println!("pivot_quantile={q}");
            println!("ci_radius={radius}");
        }
    }
    Ok(())
}

fn cmd_coverage(cli: &Cli, args: &CoverageArgs) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(file) => load_config(file)?,
        None => match args.preset {
            Preset::Rv => ExperimentConfig::rv_default(),
            Preset::Ecf => ExperimentConfig::ecf_default(),
        },
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    let report = with_threads(cli.threads, || run_experiment(&config))??;
    let written = emit_outputs(&report, &config, &config.output_dir)?;
    print!("{}", summary(&report, &config));
    for row in &report.rows {
        println!(
            "coverage[T={},L={},TD={}]={} stderr={:.4}",
            row.t_len, row.block_len, row.half_window, row.coverage, row.mc_stderr
        );
    }
    for file in written {
        println!("written={}", file.display());
    }
    if !report.failures.is_empty() {
        bail!(
            "{} replication(s) failed; see summary.txt",
            report.failures.len()
        );
    }
    Ok(())
}

fn cmd_oracle(cli: &Cli, args: &OracleArgs) -> anyhow::Result<()> {
    let seed = cli.seed.unwrap_or(1);
    let mut ok = true;
    let mut check = |name: &str, value: f64, pass: bool| {
        println!("{name}={value:.6e} {}", if pass { "pass" } else { "FAIL" });
        ok &= pass;
    };

    // exhaustive law on a tiny instance against the closed-form variance
    let tiny = Path::from_scalars(vec![0.3, -1.1, 0.8, 2.0, -0.4, 0.1, 1.5, -0.9])?;
    let plan = LbbPlan::new(8, 2, 1)?;
    let unit = WeightScheme::unit(8)?;
    let law = enumerate_bootstrap_law(&tiny, &plan, &unit, &Functional::Square)?;
    let exact = bootstrap_variance_exact(&tiny, &plan, &unit, &Functional::Square)?;
    check("enumeration_outcomes", law.len() as f64, law.len() == 81);
    check("enumeration_mean", law.mean(), law.mean().abs() < 1e-10);
    check(
        "enumeration_variance_gap",
        (law.variance() - exact).abs(),
        (law.variance() - exact).abs() < 1e-10,
    );

    // stable sampler against its characteristic function
    let stable = InnovationLaw::alpha_stable(1.5, 0.0, 0.5, 0.0)?;
    let mut rng = StreamKey::new(seed).rng_at(0);
    let draws: Vec<f64> = (0..args.draws).map(|_| stable.sample(&mut rng)).collect();
    for s in [1.0, 2.0, 6.0] {
        let ecf = draws.iter().map(|x| (s * x).cos()).sum::<f64>() / draws.len() as f64;
        let cf = (-(0.5f64).powf(1.5) * f64::powf(s, 1.5)).exp();
        let tol = 4.0 / (draws.len() as f64).sqrt();
        check(
            &format!("stable_cf_gap[s={s}]"),
            (ecf - cf).abs(),
            (ecf - cf).abs() < tol,
        );
    }

    // limiting variance of T^{-1/2} sum X_t^2 for iid N(0,1) is Var(Z^2) = 2
    let spec = iid_gaussian_params(1.0).spec()?;
    let w = WeightScheme::global_root(200)?;
    let lv = with_threads(cli.threads, || {
        limiting_variance_mc(
            &spec,
            &w,
            &Functional::Square,
            &Functional::Square,
            McSettings::new(2, 4000, seed),
        )
    })??;
    check(
        "limiting_variance_iid",
        lv.value,
        (lv.value - 2.0).abs() < 0.15,
    );

    if !ok {
        bail!("one or more oracle checks failed");
    }
    Ok(())
}

fn cmd_validate(cli: &Cli, args: &ValidateArgs) -> anyhow::Result<()> {
    let mut cells = Vec::new();
    if let Some(file) = &cli.config {
        let config = load_config(file)?;
        for &t in &config.t_list {
            let d_t = match config.experiment {
                ExperimentKind::RvCoverage => t,
                ExperimentKind::EcfCoverage => {
                    let b = (t as f64).powf(-config.bandwidth_exponent);
                    kernel_weights(config.u, b, t, config.kernel)?.d_t()
                }
            };
            for &l in &config.l_list {
                for &td in &config.td_list {
                    cells.push((t, l, td, d_t));
                }
            }
        }
    } else {
        match (args.t_len, args.block_len, args.half_window) {
            (Some(t), Some(l), Some(td)) => cells.push((t, l, td, t)),
            _ => {
                return Err(Error::ConfigKey(
                    "validate needs --config or all of -T, -L and --td".into(),
                )
                .into())
            }
        }
    }
    for (t, l, td, d_t) in cells {
        let tag = format!("T={t},L={l},TD={td}");
        match LbbPlan::new(t, l, td) {
            Ok(_) => println!("plan[{tag}]=ok"),
            Err(e) => println!("plan[{tag}]=invalid ({e})"),
        }
        let report = validate_rates(t, l, td, d_t, args.delta);
        println!("d_T[{tag}]={d_t}");
        for c in &report.checks {
            println!(
                "rate[{tag}][{}]={:.4} {}",
                c.name,
                c.value,
                if c.pass { "ok" } else { "warn" }
            );
        }
    }
    Ok(())
}
