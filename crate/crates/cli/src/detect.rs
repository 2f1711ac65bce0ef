// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `detect` subcommand.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use corrshift::bootstrap::select_ar_order;
use corrshift::detector::{detect_recursive_pooled, format_p_value};
use corrshift::panel::{durbin_watson, log_returns};
use corrshift::{standardize, BootstrapMode, DetectorConfig, DistanceMetricKind, SeriesPanel};

use crate::csvio::{load_csv, write_atomic, LoadOptions};
use crate::report::{boot_maxima_csv, profile_csv, JsonReport, RunManifest};
use crate::CliError;

/// Largest order tried by `--ar-order auto`.
pub const AUTO_AR_MAX: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BootstrapKind {
    Iid,
    Sieve,
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// Input CSV files; several files are pooled and must share a shape.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "frobenius", value_parser = parse_metric)]
    pub metric: DistanceMetricKind,
    #[arg(long, value_enum, default_value = "iid")]
    pub bootstrap: BootstrapKind,
    /// AR order of the sieve bootstrap: a number or `auto`.
    #[arg(long, default_value = "auto")]
    pub ar_order: String,
    /// Boundary buffer; defaults to n (n+1 for the likelihood ratio).
    #[arg(long)]
    pub delta: Option<usize>,
    #[arg(long = "B", default_value_t = corrshift::detector::DEFAULT_B)]
    pub b_count: usize,
    #[arg(long, default_value_t = corrshift::detector::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Treat the inputs as prices and analyse their log returns.
    #[arg(long)]
    pub log_returns: bool,
    /// Input rows are nodes rather than time points.
    #[arg(long)]
    pub transpose: bool,
    /// Column holding time labels (node labels with --transpose).
    #[arg(long)]
    pub time_col: Option<String>,
    #[arg(long, default_value_t = corrshift::detector::DEFAULT_MAX_DEPTH)]
    pub max_depth: usize,
    #[arg(long, default_value = "corrshift-out")]
    pub out: PathBuf,
    /// Store the wall time in the manifest (makes reports non-reproducible).
    #[arg(long)]
    pub record_timing: bool,
    #[arg(long)]
    pub quiet: bool,
}

pub fn parse_metric(s: &str) -> Result<DistanceMetricKind, String> {
    s.parse().map_err(|_| format!("unknown metric {s:?}; expected frobenius, max or lr"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectOutcome {
    pub report: JsonReport,
    pub exit_code: i32,
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn resolve_mode(args: &DetectArgs, panels: &[SeriesPanel]) -> Result<BootstrapMode, CliError> {
    match args.bootstrap {
        BootstrapKind::Iid => Ok(BootstrapMode::Iid),
        BootstrapKind::Sieve if args.ar_order == "auto" => {
            let s_max = AUTO_AR_MAX.min(panels[0].n_times() / 4);
            let mut order = 0;
            for p in panels {
                order = order.max(select_ar_order(p, s_max).map_err(data_err)?);
            }
            Ok(BootstrapMode::Sieve(order))
        }
        BootstrapKind::Sieve => args
            .ar_order
            .parse()
            .map(BootstrapMode::Sieve)
            .map_err(|_| CliError::Usage(format!("--ar-order expects a number or auto, got {:?}", args.ar_order))),
    }
}

pub fn run_detect(args: &DetectArgs) -> Result<DetectOutcome, CliError> {
    let started = Instant::now();
    let options = LoadOptions {
        transpose: args.transpose,
        time_col: args.time_col.clone(),
    };
    let mut manifest = RunManifest::new("detect", args.seed);
    let mut panels = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let mut panel = load_csv(path, &options).map_err(data_err)?;
        if args.log_returns {
            panel = log_returns(&panel).map_err(data_err)?;
        }
        panels.push(standardize(&panel).map_err(data_err)?);
        manifest.inputs.push(path.display().to_string());
    }
    if args.log_returns {
        manifest.transforms.push("log-returns".into());
    }
    manifest.transforms.push("standardize".into());

    let n = panels[0].n_nodes();
    let default_delta = match args.metric {
        DistanceMetricKind::LikelihoodRatio => n + 1,
        _ => n,
    };
    let mode = resolve_mode(args, &panels)?;
    let config = DetectorConfig {
        max_depth: args.max_depth,
        ..DetectorConfig::for_nodes(n)
            .with_metric(args.metric)
            .with_delta(args.delta.unwrap_or(default_delta))
            .with_b(args.b_count)
            .with_alpha(args.alpha)
            .with_mode(mode)
            .with_seed(args.seed)
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    if mode == BootstrapMode::Iid {
        for (path, p) in args.inputs.iter().zip(&panels) {
            if let Ok(dw) = durbin_watson(p, args.alpha) {
                if dw.any_significant {
                    let flagged = dw.per_node_p.iter().filter(|&&p| p < dw.alpha_used / n as f64).count();
                    manifest.advisories.push(format!(
                        "{}: {flagged} of {n} series show significant lag-1 autocorrelation; \
                         the iid bootstrap may give false positives, consider --bootstrap sieve",
                        path.display()
                    ));
                }
            }
        }
    }

    let (report, root) = detect_recursive_pooled(&panels, &config).map_err(data_err)?;
    manifest.config = Some(config);
    if args.record_timing {
        manifest.wall_time_secs = Some(started.elapsed().as_secs_f64());
    }
    let json = JsonReport::new(&report, manifest);

    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    let write = |name: &str, body: &str| {
        write_atomic(&args.out, name, body.as_bytes())
            .map_err(|e| CliError::Data(format!("{}: {e}", args.out.join(name).display())))
    };
    write("report.json", &json.to_json())?;
    write("profile.csv", &profile_csv(&root))?;
    write("boot_maxima.csv", &boot_maxima_csv(&root))?;

    for advisory in &json.manifest.advisories {
        eprintln!("warning: {advisory}");
    }
    if !args.quiet {
        print!("{}", summary(&json));
    }
    let exit_code = if json.points.is_empty() { 3 } else { 0 };
    Ok(DetectOutcome { report: json, exit_code })
}

/// Plain-text summary, one line per change point.
pub fn summary(report: &JsonReport) -> String {
    let b = report.config.b_count;
    let mut out = format!(
        "n={} T={} metric={} B={} tests={}\n",
        report.n, report.len, report.config.metric, b, report.total_tests
    );
    if report.points.is_empty() {
        out.push_str("no significant change point\n");
    }
    for p in &report.points {
        out.push_str(&format!(
            "change point k={} z={:.3} p {} segment=[{},{}] depth={}\n",
            p.k,
            p.z,
            display_p(p.p_value, b),
            p.segment[0],
            p.segment[1],
            p.depth
        ));
    }
    for a in &report.aborted {
        out.push_str(&format!("aborted segment=[{},{}]: {}\n", a.segment.0, a.segment.1, a.reason));
    }
    out
}

/// `"< 0.002"` for a zero count, `"= 0.014"` otherwise.
pub fn display_p(p: f64, b_count: usize) -> String {
    let s = format_p_value(p, b_count);
    if s.starts_with('<') {
        s
    } else {
        format!("= {s}")
    }
}
