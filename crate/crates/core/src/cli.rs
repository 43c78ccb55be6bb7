//! The `spdchar` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimation::{fit_power_law, fwhm_counts, DEFAULT_REFERENCE_TIME_US};
use crate::experiments::{
    app_vs_holdoff, dcr_scan, jitter_surface, sweep_gate_delay, DelayCurve, JitterSurface,
};
use crate::io;
use crate::sim::{run_experiment, SourceConfig};

#[derive(Debug, Parser)]
#[command(name = "spdchar", version, about = "Gated single-photon detector simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` config file; missing keys take preset values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed (overrides `master_seed`)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (overrides `output`)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one gate train and write the click log
    Simulate {
        #[arg(long)]
        gates: Option<u64>,
    },
    /// Count rate against gate delay
    SweepDelay {
        /// Total delay range scanned, from 0
        #[arg(long, default_value_t = 42.0)]
        span_ns: f64,
        /// Delay step (defaults to `delay_step_ps`)
        #[arg(long)]
        step_ps: Option<f64>,
        #[arg(long)]
        gates: Option<u64>,
        /// Hardware timestamp logs, one per delay in --log-delay-ns
        #[arg(long = "timestamps", value_name = "FILE")]
        timestamps: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        log_delay_ns: Vec<f64>,
        /// Acquisition time of each hardware log
        #[arg(long)]
        duration_s: Option<f64>,
    },
    /// Two-delay afterpulse probability against hold-off; --out is a directory
    AppHoldoff {
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0])]
        holdoff_us: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [4.0, 2.0])]
        gate_width_ns: Vec<f64>,
        #[arg(long)]
        gates: Option<u64>,
    },
    /// Dark count rate over gate period and hold-off, source blocked
    DcrScan {
        #[arg(long, value_delimiter = ',', default_values_t = [20.0, 42.0, 100.0])]
        period_ns: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0])]
        holdoff_us: Vec<f64>,
        #[arg(long)]
        gates: Option<u64>,
    },
    /// TDC histograms per gate delay, simulated or from hardware logs
    Jitter {
        #[arg(long, value_delimiter = ',')]
        delay_ns: Vec<f64>,
        #[arg(long)]
        gates: Option<u64>,
        #[arg(long = "timestamps", value_name = "FILE")]
        timestamps: Vec<PathBuf>,
    },
    /// Shared-slope power-law fit of APP series CSVs
    Fit {
        #[arg(long = "in", value_name = "FILE", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_REFERENCE_TIME_US)]
        reference_time_us: f64,
    },
}

/// Runs the tool; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("spdchar: error: {e}");
            1
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => parse_config(&io::read_text(p)?)?,
        None => ExperimentConfig::reference_preset(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn out_path(cfg: &ExperimentConfig) -> Result<&Path> {
    cfg.output
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("no output path: pass --out or set `output`".into()))
}

fn read_logs(files: &[PathBuf], delays: &[f64]) -> Result<Vec<(f64, Vec<u64>)>> {
    if files.len() != delays.len() {
        return Err(Error::InvalidArgument(format!(
            "{} timestamp files but {} delays",
            files.len(),
            delays.len()
        )));
    }
    files
        .iter()
        .zip(delays)
        .map(|(f, &d)| {
            let stamps = io::read_timestamp_log(&io::read_text(f)?).map_err(|e| match e {
                Error::Parse { line, reason } => Error::Parse {
                    line,
                    reason: format!("{}: {reason}", f.display()),
                },
                e => e,
            })?;
            Ok((d, stamps))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    let seed = cfg.master_seed;
    match cli.command {
        Command::Simulate { gates } => {
            let n = gates.unwrap_or(cfg.gates_per_point);
            let (clicks, summary) = run_experiment(
                &cfg.detector,
                &cfg.source,
                &cfg.gates,
                cfg.tdc_resolution_ps,
                n,
                seed,
            )?;
            io::atomic_write(out_path(&cfg)?, io::render_click_log(&clicks).as_bytes())?;
            println!(
                "gates={} photon={} dark={} afterpulse={} cps={}",
                summary.total_gates,
                summary.photon_clicks,
                summary.dark_clicks,
                summary.afterpulse_clicks,
                summary.counts_per_second
            );
        }
        Command::SweepDelay {
            span_ns,
            step_ps,
            gates,
            timestamps,
            log_delay_ns,
            duration_s,
        } => {
            let curve = if timestamps.is_empty() {
                let step_ns = step_ps.unwrap_or(cfg.delay_step_ps) / 1000.0;
                sweep_gate_delay(&cfg, span_ns, step_ns, gates.unwrap_or(cfg.gates_per_point), seed)?
            } else {
                let duration = duration_s.ok_or_else(|| {
                    Error::InvalidArgument("--duration-s is required with --timestamps".into())
                })?;
                DelayCurve::from_timestamp_logs(&read_logs(&timestamps, &log_delay_ns)?, duration)?
            };
            io::atomic_write(out_path(&cfg)?, io::render_delay_curve(&curve).as_bytes())?;
        }
        Command::AppHoldoff {
            holdoff_us,
            gate_width_ns,
            gates,
        } => {
            let series = app_vs_holdoff(
                &cfg,
                &holdoff_us,
                &gate_width_ns,
                gates.unwrap_or(cfg.gates_per_point),
                seed,
            )?;
            let dir = out_path(&cfg)?;
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            for s in &series {
                let path = dir.join(format!("app_{}.csv", s.label));
                io::atomic_write(&path, io::render_app_series(s).as_bytes())?;
            }
        }
        Command::DcrScan {
            period_ns,
            holdoff_us,
            gates,
        } => {
            let mut dark = cfg.clone();
            dark.source = SourceConfig {
                mean_photon_number: 0.0,
                ..cfg.source
            };
            let table = dcr_scan(
                &dark,
                &period_ns,
                &holdoff_us,
                gates.unwrap_or(cfg.gates_per_point),
                seed,
            )?;
            io::atomic_write(out_path(&cfg)?, io::render_dcr_table(&table).as_bytes())?;
        }
        Command::Jitter {
            delay_ns,
            gates,
            timestamps,
        } => {
            let delays = if delay_ns.is_empty() {
                vec![cfg.gates.delay_ns]
            } else {
                delay_ns
            };
            let surface = if timestamps.is_empty() {
                jitter_surface(&cfg, &delays, gates.unwrap_or(cfg.gates_per_point), seed)?
            } else {
                JitterSurface::from_timestamp_logs(
                    &read_logs(&timestamps, &delays)?,
                    cfg.gates.period_ns,
                    cfg.gates.width_ns,
                    cfg.tdc_resolution_ps,
                )?
            };
            io::atomic_write(out_path(&cfg)?, io::render_jitter_surface(&surface).as_bytes())?;
            for row in &surface.rows {
                match fwhm_counts(&row.counts, surface.bin_width_ps) {
                    Ok(f) => println!("delay_ns={} fwhm_ps={}", row.delay_ns, f.fwhm_ps),
                    Err(e) => println!("delay_ns={} fwhm_ps=NA ({e})", row.delay_ns),
                }
            }
        }
        Command::Fit {
            inputs,
            reference_time_us,
        } => {
            let series = inputs
                .iter()
                .map(|p| io::parse_app_series(&io::read_text(p)?, &io::series_label(p)))
                .collect::<Result<Vec<_>>>()?;
            let fit = fit_power_law(&series, reference_time_us)?;
            let report = io::render_fit_report(&fit)?;
            io::atomic_write(out_path(&cfg)?, report.as_bytes())?;
            print!("{report}");
        }
    }
    Ok(())
}
