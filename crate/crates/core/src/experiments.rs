//! Measurement procedures run against the simulator: gate-delay sweeps,
//! the two-delay afterpulse protocol, dark-count scans and TDC histograms.
//!
//! Every point of a procedure is an independent run. Its seed is derived
//! from the master seed and a key built from the point's own coordinates
//! (delay, gate width, hold-off, period), so results do not depend on list
//! order and points can run in parallel.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::sim::{run_experiment, ClickRecord, Outcome, RunSummary};

/// Derives an independent seed for sweep point `key`.
pub fn derive_seed(master: u64, key: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(key);
    rng.next_u64()
}

fn ps_key(value_ns: f64) -> u64 {
    (value_ns * 1000.0).round() as u64
}

fn pair_key(a_ns: f64, b_ns: f64) -> u64 {
    (ps_key(a_ns) << 32) ^ ps_key(b_ns)
}

fn at_delay(delay_ns: f64) -> impl Fn(Error) -> Error {
    move |e| Error::AtDelay {
        delay_ns,
        source: Box::new(e),
    }
}

fn run_point(
    cfg: &ExperimentConfig,
    n_gates: u64,
    seed: u64,
) -> Result<(Vec<ClickRecord>, RunSummary)> {
    run_experiment(
        &cfg.detector,
        &cfg.source,
        &cfg.gates,
        cfg.tdc_resolution_ps,
        n_gates,
        seed,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayPoint {
    pub delay_ns: f64,
    pub counts_hz: f64,
    pub photon_hz: f64,
    pub dark_hz: f64,
    pub afterpulse_hz: f64,
}

/// Count rate against gate delay.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DelayCurve {
    pub points: Vec<DelayPoint>,
}

impl DelayCurve {
    pub fn validate(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if !(w[1].delay_ns > w[0].delay_ns) {
                return Err(Error::InvalidArgument(format!(
                    "delays not strictly increasing at {} ns",
                    w[1].delay_ns
                )));
            }
        }
        if self.points.iter().any(|p| !(p.counts_hz >= 0.0)) {
            return Err(Error::InvalidArgument("negative count rate".into()));
        }
        Ok(())
    }

    /// One point per hardware timestamp log; the logs carry no event class.
    pub fn from_timestamp_logs(logs: &[(f64, Vec<u64>)], duration_s: f64) -> Result<Self> {
        if !(duration_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "acquisition time {duration_s} s must be > 0"
            )));
        }
        let mut points: Vec<DelayPoint> = logs
            .iter()
            .map(|(delay_ns, ts)| DelayPoint {
                delay_ns: *delay_ns,
                counts_hz: ts.len() as f64 / duration_s,
                photon_hz: 0.0,
                dark_hz: 0.0,
                afterpulse_hz: 0.0,
            })
            .collect();
        points.sort_by(|a, b| a.delay_ns.total_cmp(&b.delay_ns));
        let curve = Self { points };
        curve.validate()?;
        Ok(curve)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppPoint {
    pub holdoff_us: f64,
    pub app: f64,
    /// First-order Poisson error on `app`.
    pub app_sigma: f64,
}

/// Afterpulse probability against hold-off for one gate width.
#[derive(Debug, Clone, PartialEq)]
pub struct AppSeries {
    pub label: String,
    pub points: Vec<AppPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcrCell {
    pub period_ns: f64,
    pub holdoff_us: f64,
    pub dcr_hz: f64,
}

/// Dark count rate by gate period and hold-off.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DcrTable {
    pub cells: Vec<DcrCell>,
}

impl DcrTable {
    pub fn get(&self, period_ns: f64, holdoff_us: f64) -> Option<&DcrCell> {
        self.cells
            .iter()
            .find(|c| c.period_ns == period_ns && c.holdoff_us == holdoff_us)
    }
}

impl DcrCell {
    /// Poisson standard error of the rate for a run of `n_gates` gates.
    pub fn sigma_hz(&self, n_gates: u64) -> f64 {
        let duration_s = n_gates as f64 * self.period_ns * 1e-9;
        (self.dcr_hz * duration_s).sqrt() / duration_s
    }
}

/// Dark count rate of an afterpulse-free detector with negligible dead time.
pub fn analytic_dcr_hz(dark_rate_per_ns: f64, gate_width_ns: f64, period_ns: f64) -> f64 {
    dark_rate_per_ns * gate_width_ns / (period_ns * 1e-9)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JitterRow {
    pub delay_ns: f64,
    /// Click count per TDC bin, bin 0 at the gate rising edge.
    pub counts: Vec<u64>,
}

/// TDC histograms of click times, one per gate delay.
#[derive(Debug, Clone, PartialEq)]
pub struct JitterSurface {
    pub bin_width_ps: f64,
    pub rows: Vec<JitterRow>,
}

impl JitterSurface {
    /// Histograms of hardware timestamps (ps on the gate clock, TDC start
    /// synchronous with the gate). Each timestamp is folded onto the gate
    /// period relative to its log's delay; stamps outside the gate are
    /// discarded.
    pub fn from_timestamp_logs(
        logs: &[(f64, Vec<u64>)],
        gate_period_ns: f64,
        gate_width_ns: f64,
        tdc_resolution_ps: f64,
    ) -> Result<Self> {
        if !(tdc_resolution_ps > 0.0) || !(gate_width_ns > 0.0) || !(gate_period_ns > gate_width_ns)
        {
            return Err(Error::InvalidArgument(
                "need 0 < width < period and a positive TDC resolution".into(),
            ));
        }
        let period_ps = gate_period_ns * 1000.0;
        let width_ps = gate_width_ns * 1000.0;
        let bins = histogram_len(width_ps, tdc_resolution_ps);
        let rows = logs
            .iter()
            .map(|(delay_ns, stamps)| {
                let mut counts = vec![0u64; bins];
                for &ts in stamps {
                    let phase = (ts as f64 - delay_ns * 1000.0).rem_euclid(period_ps);
                    if phase <= width_ps {
                        counts[(phase / tdc_resolution_ps).floor() as usize] += 1;
                    }
                }
                JitterRow {
                    delay_ns: *delay_ns,
                    counts,
                }
            })
            .collect();
        Ok(Self {
            bin_width_ps: tdc_resolution_ps,
            rows,
        })
    }
}

fn histogram_len(width_ps: f64, resolution_ps: f64) -> usize {
    (width_ps / resolution_ps).floor() as usize + 1
}

/// Count rate at every gate delay `k * step` for `k` in `0..span/step`.
pub fn sweep_gate_delay(
    cfg: &ExperimentConfig,
    span_ns: f64,
    step_ns: f64,
    gates_per_point: u64,
    seed: u64,
) -> Result<DelayCurve> {
    if !(step_ns > 0.0) {
        return Err(Error::InvalidArgument(format!("delay step {step_ns} ns must be > 0")));
    }
    if !(span_ns >= step_ns) {
        return Err(Error::InvalidArgument(format!(
            "span {span_ns} ns is shorter than one step"
        )));
    }
    let n = (span_ns / step_ns).round() as u64;
    let points = (0..n)
        .into_par_iter()
        .map(|k| {
            let delay = k as f64 * step_ns;
            let mut point_cfg = cfg.clone();
            point_cfg.gates.delay_ns = delay;
            let (_, s) = run_point(&point_cfg, gates_per_point, derive_seed(seed, k))
                .map_err(at_delay(delay))?;
            let rate = |o: Outcome| s.clicks(o) as f64 / s.duration_s;
            Ok(DelayPoint {
                delay_ns: delay,
                counts_hz: s.counts_per_second,
                photon_hz: rate(Outcome::Photon),
                dark_hz: rate(Outcome::Dark),
                afterpulse_hz: rate(Outcome::Afterpulse),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DelayCurve { points })
}

/// Relative count excess of the long-quench delay over the short-quench one.
pub fn afterpulse_probability(counts_long_quench: f64, counts_short_quench: f64) -> Result<f64> {
    if !(counts_short_quench > 0.0) {
        return Err(Error::UndefinedEstimate);
    }
    Ok((counts_long_quench - counts_short_quench) / counts_short_quench)
}

/// First-order Poisson error of [`afterpulse_probability`] from raw click counts.
pub fn afterpulse_probability_sigma(clicks_long: u64, clicks_short: u64) -> Result<f64> {
    if clicks_short == 0 {
        return Err(Error::UndefinedEstimate);
    }
    let (l, s) = (clicks_long as f64, clicks_short as f64);
    Ok((l + l * l / s).sqrt() / s)
}

/// Runs of the two-delay protocol: the photon one TDC bin after the rising
/// edge (long quench) and one TDC bin before the falling edge (short
/// quench). Both runs share `seed`, so they see the same photon, dark and
/// jitter draws and differ only through the trapped charge.
pub fn two_delay_runs(
    cfg: &ExperimentConfig,
    gates_per_point: u64,
    seed: u64,
) -> Result<(RunSummary, RunSummary)> {
    let margin_ns = cfg.tdc_resolution_ps / 1000.0;
    let width = cfg.detector.gate_width_ns;
    if 2.0 * margin_ns >= width {
        return Err(Error::InvalidArgument(format!(
            "gate of {width} ns is too short for a {margin_ns} ns edge margin"
        )));
    }
    let offset = cfg.source.pulse_offset_ns;
    let long_delay = offset - margin_ns;
    let short_delay = offset - (width - margin_ns);
    let long_cfg = cfg.with_delay(long_delay);
    let short_cfg = cfg.with_delay(short_delay);
    let (_, long) = run_point(&long_cfg, gates_per_point, seed).map_err(at_delay(long_cfg.gates.delay_ns))?;
    let (_, short) = run_point(&short_cfg, gates_per_point, seed).map_err(at_delay(short_cfg.gates.delay_ns))?;
    Ok((long, short))
}

/// One APP point of the two-delay protocol at the configuration's gate
/// width and hold-off.
pub fn app_point(cfg: &ExperimentConfig, gates_per_point: u64, seed: u64) -> Result<AppPoint> {
    let (long, short) = two_delay_runs(cfg, gates_per_point, seed)?;
    Ok(AppPoint {
        holdoff_us: cfg.detector.holdoff_us,
        app: afterpulse_probability(long.counts_per_second, short.counts_per_second)?,
        app_sigma: afterpulse_probability_sigma(long.total_clicks(), short.total_clicks())?,
    })
}

/// APP against hold-off, one series per gate width, labelled `"<w>ns"`.
pub fn app_vs_holdoff(
    cfg: &ExperimentConfig,
    holdoffs_us: &[f64],
    gate_widths_ns: &[f64],
    gates_per_point: u64,
    seed: u64,
) -> Result<Vec<AppSeries>> {
    if holdoffs_us.is_empty() || gate_widths_ns.is_empty() {
        return Err(Error::InsufficientData(
            "hold-off and gate-width lists must be non-empty".into(),
        ));
    }
    let jobs: Vec<(usize, f64, f64)> = gate_widths_ns
        .iter()
        .enumerate()
        .flat_map(|(i, &w)| holdoffs_us.iter().map(move |&h| (i, w, h)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(_, w, h)| {
            let point_cfg = cfg.with_gate_width(w).with_holdoff(h);
            app_point(&point_cfg, gates_per_point, derive_seed(seed, pair_key(w, h * 1000.0)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut series: Vec<AppSeries> = gate_widths_ns
        .iter()
        .map(|w| AppSeries {
            label: format!("{w}ns"),
            points: Vec::with_capacity(holdoffs_us.len()),
        })
        .collect();
    for (&(i, _, _), p) in jobs.iter().zip(results) {
        series[i].points.push(p);
    }
    Ok(series)
}

/// Dark count rate for every (period, hold-off) pair with the source blocked.
pub fn dcr_scan(
    cfg: &ExperimentConfig,
    periods_ns: &[f64],
    holdoffs_us: &[f64],
    gates_per_point: u64,
    seed: u64,
) -> Result<DcrTable> {
    if cfg.source.mean_photon_number > 0.0 {
        return Err(Error::invariant(
            "mean_photon_number",
            "dark-count scans need the source blocked (mean photon number 0)",
        ));
    }
    if periods_ns.is_empty() || holdoffs_us.is_empty() {
        return Err(Error::InsufficientData(
            "period and hold-off lists must be non-empty".into(),
        ));
    }
    let jobs: Vec<(f64, f64)> = periods_ns
        .iter()
        .flat_map(|&p| holdoffs_us.iter().map(move |&h| (p, h)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(p, h)| {
            let point_cfg = cfg.with_gate_period(p).with_holdoff(h);
            let (_, s) = run_point(
                &point_cfg,
                gates_per_point,
                derive_seed(seed, pair_key(p, h * 1000.0)),
            )
            .map_err(at_delay(point_cfg.gates.delay_ns))?;
            Ok(DcrCell {
                period_ns: p,
                holdoff_us: h,
                dcr_hz: s.counts_per_second,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DcrTable { cells })
}

/// TDC histogram of all clicks at one gate delay.
pub fn jitter_histogram(
    cfg: &ExperimentConfig,
    delay_ns: f64,
    gates_per_point: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    if !(cfg.tdc_resolution_ps > 0.0) {
        return Err(Error::invariant("tdc_resolution_ps", "must be > 0"));
    }
    let point_cfg = cfg.with_delay(delay_ns);
    let (clicks, _) = run_point(&point_cfg, gates_per_point, seed).map_err(at_delay(delay_ns))?;
    let mut counts = vec![
        0u64;
        histogram_len(cfg.detector.gate_width_ns * 1000.0, cfg.tdc_resolution_ps)
    ];
    for c in &clicks {
        counts[c.tdc_bin as usize] += 1;
    }
    Ok(counts)
}

/// TDC histograms for each delay in `delays_ns`.
pub fn jitter_surface(
    cfg: &ExperimentConfig,
    delays_ns: &[f64],
    gates_per_point: u64,
    seed: u64,
) -> Result<JitterSurface> {
    let rows = delays_ns
        .par_iter()
        .map(|&d| {
            Ok(JitterRow {
                delay_ns: d,
                counts: jitter_histogram(cfg, d, gates_per_point, derive_seed(seed, ps_key(d)))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JitterSurface {
        bin_width_ps: cfg.tdc_resolution_ps,
        rows,
    })
}
