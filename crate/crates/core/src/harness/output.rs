//! CSV, SVG and summary emission for coverage reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::CoverageReport;

pub const CSV_HEADER: &str = "T,L,TD,coverage,stderr,width,seconds";

/// `%.{digits}g`-style formatting: `digits` significant digits, trailing
/// zeros removed, exponent notation outside `1e-4 <= |x| < 10^digits`.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    // round first, then read the exponent of the rounded value
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn to_csv(report: &CoverageReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t_len,
            r.block_len,
            r.half_window,
            fmt_sig(r.coverage, 6),
            fmt_sig(r.mc_stderr, 6),
            fmt_sig(r.mean_ci_width, 6),
            fmt_sig(r.wall_seconds, 6)
        );
    }
    out
}

/// One parsed CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t_len: usize,
    pub block_len: usize,
    pub half_window: usize,
    pub coverage: f64,
    pub stderr: f64,
    pub width: f64,
    pub seconds: f64,
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`, got {other:?}"),
            })
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Config {
                line: i + 2,
                message: format!("malformed row `{line}`"),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad());
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(CsvRow {
                t_len: int(f[0])?,
                block_len: int(f[1])?,
                half_window: int(f[2])?,
                coverage: num(f[3])?,
                stderr: num(f[4])?,
                width: num(f[5])?,
                seconds: num(f[6])?,
            })
        })
        .collect()
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// Static SVG: coverage against `TD`, one series per `(T, L)`, with the nominal level dashed.
pub fn render_svg(report: &CoverageReport, level: f64) -> String {
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 170.0, 20.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let tds: Vec<f64> = report.rows.iter().map(|r| r.half_window as f64).collect();
    let (x_min, x_max) = match (
        tds.iter().copied().reduce(f64::min),
        tds.iter().copied().reduce(f64::max),
    ) {
        (Some(a), Some(b)) if b > a => (a, b),
        (Some(a), _) => (a - 1.0, a + 1.0),
        _ => (0.0, 1.0),
    };
    let y_lo = report
        .rows
        .iter()
        .map(|r| r.coverage)
        .fold(level, f64::min)
        .min(level - 0.1)
        .max(0.0);
    let y_hi = 1.0;
    let sx = |x: f64| left + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| top + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    // axes
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        top + plot_h
    );
    let mut ticks: Vec<f64> = tds.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in ticks {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(x),
            top + plot_h + 16.0,
            x
        );
    }
    for i in 0..=4 {
        let y = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.2}</text>"#,
            left - 6.0,
            sy(y) + 4.0,
            y
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">half window TD</text>"#,
        left + plot_w / 2.0,
        height - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">coverage</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#777" stroke-dasharray="6,4"/>"##,
        left + plot_w,
        y = sy(level)
    );

    let mut series: Vec<(usize, usize)> =
        report.rows.iter().map(|r| (r.t_len, r.block_len)).collect();
    series.dedup();
    series.sort();
    series.dedup();
    for (idx, (t_len, block_len)) in series.iter().enumerate() {
        let colour = PALETTE[idx % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = report
            .rows
            .iter()
            .filter(|r| r.t_len == *t_len && r.block_len == *block_len)
            .map(|r| (r.half_window as f64, r.coverage))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let poly: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.1},{:.1}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            poly.join(" ")
        );
        for (x, y) in &pts {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{colour}"/>"#,
                sx(*x),
                sy(*y)
            );
        }
        let ly = top + 14.0 + 18.0 * idx as f64;
        let lx = left + plot_w + 16.0;
        let _ = writeln!(
            svg,
            r#"<circle cx="{lx:.1}" cy="{:.1}" r="4" fill="{colour}"/><text x="{:.1}" y="{ly:.1}">T={t_len}, L={block_len}</text>"#,
            ly - 4.0,
            lx + 10.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Human-readable key=value summary: skipped cells, failed replications and trends.
pub fn summary(report: &CoverageReport, config: &ExperimentConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "experiment={}", config.experiment.name());
    let _ = writeln!(out, "process={}", config.process);
    let _ = writeln!(out, "level={}", config.level);
    let _ = writeln!(out, "N={}", config.n_replications);
    let _ = writeln!(out, "B={}", config.b_resamples);
    let _ = writeln!(out, "master_seed={}", config.master_seed);
    let list = |v: &[usize]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let _ = writeln!(
        out,
        "grid=T:{} L:{} TD:{} (chosen grid, not read from any reference figure)",
        list(&config.t_list),
        list(&config.l_list),
        list(&config.td_list)
    );
    let mut series: Vec<(usize, usize)> =
        report.rows.iter().map(|r| (r.t_len, r.block_len)).collect();
    series.sort();
    series.dedup();
    for (t, l) in series {
        if let Some(rho) = report.td_trend(t, l) {
            let _ = writeln!(out, "spearman_td_coverage[T={t},L={l}]={}", fmt_sig(rho, 6));
        }
    }
    for s in &report.skipped {
        let _ = writeln!(
            out,
            "skipped[T={},L={},TD={}]={}",
            s.cell.t_len, s.cell.block_len, s.cell.half_window, s.reason
        );
    }
    for f in &report.failures {
        let _ = writeln!(
            out,
            "failed[T={},L={},TD={},r={}]=path_seed:{} boot_seed:{} boot_stream:{} {}",
            f.cell.t_len,
            f.cell.block_len,
            f.cell.half_window,
            f.replication,
            f.path_seed,
            f.bootstrap_key.seed(),
            f.bootstrap_key.stream(),
            f.message
        );
    }
    out
}

fn write_file(path: &FsPath, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write `coverage.csv`, `summary.txt` and (optionally) `coverage.svg` into `dir`.
pub fn emit_outputs(
    report: &CoverageReport,
    config: &ExperimentConfig,
    dir: &FsPath,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let csv = dir.join("coverage.csv");
    write_file(&csv, &to_csv(report))?;
    written.push(csv);
    let txt = dir.join("summary.txt");
    write_file(&txt, &summary(report, config))?;
    written.push(txt);
    if config.emit_plots {
        let svg = dir.join("coverage.svg");
        write_file(&svg, &render_svg(report, config.level))?;
        written.push(svg);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::CoverageRow;

    fn row(td: usize, coverage: f64) -> CoverageRow {
        CoverageRow {
            t_len: 1000,
            block_len: 3,
            half_window: td,
            hits: 0,
            n: 200,
            coverage,
            mc_stderr: (coverage * (1.0 - coverage) / 200.0).sqrt(),
            mean_ci_width: 0.00123456789,
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0, 6), "0");
        assert_eq!(fmt_sig(0.9, 6), "0.9");
        assert_eq!(fmt_sig(0.885, 6), "0.885");
        assert_eq!(fmt_sig(1.0 / 3.0, 6), "0.333333");
        assert_eq!(fmt_sig(0.00123456789, 6), "0.00123457");
        assert_eq!(fmt_sig(123456789.0, 6), "1.23457e+08");
        assert_eq!(fmt_sig(0.0000123, 6), "1.23e-05");
        assert_eq!(fmt_sig(999999.5, 6), "1e+06");
        assert_eq!(fmt_sig(-2.5, 6), "-2.5");
    }

    #[test]
    fn empty_report_is_header_only() {
        let csv = to_csv(&CoverageReport::default());
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&csv).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let report = CoverageReport {
            rows: vec![row(25, 0.885), row(50, 1.0 / 3.0)],
            ..Default::default()
        };
        let csv = to_csv(&report);
        assert_eq!(csv.lines().count(), 3);
        assert!(!csv.contains('\r'));
        let back = parse_csv(&csv).unwrap();
        for (a, b) in report.rows.iter().zip(&back) {
            assert_eq!(
                (a.t_len, a.block_len, a.half_window),
                (b.t_len, b.block_len, b.half_window)
            );
            for (x, y) in [
                (a.coverage, b.coverage),
                (a.mc_stderr, b.stderr),
                (a.mean_ci_width, b.width),
            ] {
                assert!((x - y).abs() <= 5e-6 * x.abs(), "{x} vs {y}");
            }
        }
        assert!(parse_csv("a,b\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let report = CoverageReport {
            rows: vec![row(25, 0.88), row(50, 0.9)],
            ..Default::default()
        };
        let svg = render_svg(&report, 0.9);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("T=1000, L=3"));
    }
}
