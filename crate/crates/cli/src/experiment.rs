// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `experiment` subcommand: CSV tables behind the simulation figures.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use corrshift::simlab::{
    experiment_delta, multiple_cp_experiment, norm_comparison_experiment, power_experiment, MultipleCpSettings,
    BIN_WIDTH, CALIBRATION_REPS, DEFAULT_C, DEFAULT_RHO, DESK_B, DESK_REPS, FULL_REPS,
};
use corrshift::theory::{curve_to_csv, monte_carlo_curve};
use corrshift::{CovMatrix, DetectorConfig, DistanceMetricKind};

use crate::csvio::write_atomic;
use crate::detect::parse_metric;
use crate::report::RunManifest;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Null expectation of the Frobenius profile against Monte Carlo.
    Fig1,
    /// Power and detection offsets with T = n(n-1) + C.
    Fig2,
    /// Metric comparison at a calibrated correlation.
    Fig3,
    /// Multiple change points by binary segmentation.
    Fig4,
}

impl Figure {
    fn name(self) -> &'static str {
        match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    /// Node counts (comma separated); fig1, fig3 and fig4 use the first.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long = "T")]
    pub len: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long = "B")]
    pub b_count: Option<usize>,
    #[arg(long = "C", default_value_t = DEFAULT_C)]
    pub c: usize,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Altered block sizes for fig3 (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub blocks: Vec<usize>,
    #[arg(long, default_value = "frobenius", value_parser = parse_metric)]
    pub metric: DistanceMetricKind,
    #[arg(long, default_value_t = corrshift::detector::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Full-scale replication counts instead of desk-scale ones.
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value = "corrshift-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub record_timing: bool,
}

impl ExperimentArgs {
    fn reps(&self, desk: usize) -> usize {
        self.reps.unwrap_or(if self.full { FULL_REPS } else { desk })
    }

    fn template(&self, n: usize) -> DetectorConfig {
        let b = self.b_count.unwrap_or(if self.full { corrshift::detector::DEFAULT_B } else { DESK_B });
        DetectorConfig::for_nodes(n)
            .with_metric(self.metric)
            .with_b(b)
            .with_alpha(self.alpha)
            .with_seed(self.seed)
    }

    fn first_n(&self, default: usize) -> usize {
        self.n.first().copied().unwrap_or(default)
    }
}

/// Runs one harness, writes `<fig>.csv` and `<fig>.manifest.json`, and
/// returns the CSV body.
pub fn run_experiment(args: &ExperimentArgs) -> Result<String, CliError> {
    let started = Instant::now();
    let data = |e: corrshift::Error| CliError::Data(e.to_string());
    let mut manifest = RunManifest::new(&format!("experiment {}", args.figure.name()), args.seed);
    let csv = match args.figure {
        Figure::Fig1 => {
            let n = args.first_n(20);
            let len = args.len.unwrap_or(200);
            let reps = args.reps.unwrap_or(FULL_REPS);
            manifest.transforms.push(format!("sigma=I{n} T={len} reps={reps} raw"));
            curve_to_csv(&monte_carlo_curve(&CovMatrix::identity(n), len, reps, args.seed).map_err(data)?)
        }
        Figure::Fig2 => {
            let n_list = if args.n.is_empty() { vec![4, 8, 12] } else { args.n.clone() };
            let reps = args.reps(DESK_REPS);
            let rho = args.rho.unwrap_or(DEFAULT_RHO);
            let template = args.template(n_list[0]);
            template.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let results = power_experiment(&n_list, args.c, rho, reps, &template).map_err(data)?;
            manifest.transforms.push(format!("C={} rho={rho} reps={reps}", args.c));
            manifest.config = Some(template);
            let mut out = String::from("n,T,offset,probability,power\n");
            for r in &results {
                let at = r.true_change_points[0] as i64;
                let delta = experiment_delta(args.metric, r.n) as i64;
                for k in 1 + delta..=r.len as i64 - delta {
                    let p = r
                        .detection_histogram
                        .iter()
                        .find(|(off, _)| *off == k - at)
                        .map_or(0.0, |(_, p)| *p);
                    out.push_str(&format!("{},{},{},{},{}\n", r.n, r.len, k - at, p, r.power));
                }
            }
            out
        }
        Figure::Fig3 => {
            let n = args.first_n(20);
            let len = args.len.unwrap_or(400);
            let blocks = if args.blocks.is_empty() {
                [2, 4, 8, 12, 16, 20].into_iter().filter(|&b| b <= n).collect()
            } else {
                args.blocks.clone()
            };
            let reps = args.reps(CALIBRATION_REPS);
            let template = args.template(n);
            template.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let rows = norm_comparison_experiment(n, len, &blocks, &template, reps).map_err(data)?;
            manifest.transforms.push(format!("n={n} T={len} reps={reps}"));
            manifest.config = Some(template);
            let mut out = String::from("n,T,block,proportion,rho,metric,power\n");
            for r in rows {
                out.push_str(&format!(
                    "{n},{len},{},{},{},{},{}\n",
                    r.block, r.proportion, r.rho, r.metric, r.power
                ));
            }
            out
        }
        Figure::Fig4 => {
            let settings = MultipleCpSettings {
                n: args.first_n(10),
                len: args.len.unwrap_or(400),
                rho: args.rho.unwrap_or(DEFAULT_RHO),
                ..MultipleCpSettings::default()
            };
            let reps = args.reps(DESK_REPS);
            let template = args.template(settings.n);
            template.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let mut out = String::from("order,bin_start,bin_end,probability\n");
            for reversed in [false, true] {
                let res = multiple_cp_experiment(&MultipleCpSettings { reversed, ..settings.clone() }, &template, reps)
                    .map_err(data)?;
                for (start, p) in &res.detection_histogram {
                    let end = (*start as usize + BIN_WIDTH - 1).min(settings.len);
                    out.push_str(&format!("{},{start},{end},{p}\n", res.label));
                }
            }
            manifest.transforms.push(format!("n={} T={} rho={} reps={reps}", settings.n, settings.len, settings.rho));
            manifest.config = Some(template);
            out
        }
    };
    if args.record_timing {
        manifest.wall_time_secs = Some(started.elapsed().as_secs_f64());
    }
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    let name = args.figure.name();
    let io = |e: std::io::Error| CliError::Data(format!("{}: {e}", args.out.display()));
    write_atomic(&args.out, &format!("{name}.csv"), csv.as_bytes()).map_err(io)?;
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest is serializable");
    json.push('\n');
    write_atomic(&args.out, &format!("{name}.manifest.json"), json.as_bytes()).map_err(io)?;
    Ok(csv)
}
