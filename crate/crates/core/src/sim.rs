//! Seeded Monte Carlo executor for a gated detector facing a pulsed
//! weak-coherent source.
//!
//! Every gate draws from its own ChaCha substream keyed by
//! `(seed, gate_index)`, and always consumes the same draws regardless of
//! which events fire. Two runs sharing a seed therefore see identical
//! photon, dark and jitter randomness gate by gate, which is what the
//! two-delay afterpulse protocol relies on.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{self, avalanche_charge, DetectorParams, TrapState};

const PS_PER_NS: f64 = 1_000.0;

/// Weak-coherent pulse train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    /// Mean photon number per pulse (Poissonian).
    pub mean_photon_number: f64,
    pub pulse_period_ns: f64,
    /// Arrival of pulse 0 on the gate-train clock.
    pub pulse_offset_ns: f64,
}

impl SourceConfig {
    pub fn reference_preset() -> Self {
        Self {
            mean_photon_number: 0.1,
            pulse_period_ns: 42.0,
            pulse_offset_ns: 20.0,
        }
    }

    /// A blocked source: no photons ever arrive.
    pub fn dark() -> Self {
        Self {
            mean_photon_number: 0.0,
            ..Self::reference_preset()
        }
    }

    pub fn validate(&self) -> Result<()> {
        model::non_negative("mean_photon_number", self.mean_photon_number)?;
        model::positive("pulse_period_ns", self.pulse_period_ns)?;
        model::finite("pulse_offset_ns", self.pulse_offset_ns)
    }
}

/// Gate train as programmed on the delay generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateTrain {
    pub period_ns: f64,
    pub width_ns: f64,
    /// Programmable offset of every rising edge; the swept quantity.
    pub delay_ns: f64,
    /// Phase noise of the gate clock, Gaussian per gate.
    pub delay_jitter_ps: f64,
}

impl GateTrain {
    /// Gate train matching the detector's gate geometry.
    pub fn for_detector(detector: &DetectorParams, delay_ns: f64, delay_jitter_ps: f64) -> Self {
        Self {
            period_ns: detector.gate_period_ns,
            width_ns: detector.gate_width_ns,
            delay_ns,
            delay_jitter_ps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        model::positive("gate_period_ns", self.period_ns)?;
        model::positive("gate_width_ns", self.width_ns)?;
        if self.width_ns >= self.period_ns {
            return Err(Error::invariant(
                "gate_width_ns",
                "gate width must be shorter than the gate period",
            ));
        }
        if !(self.delay_ns >= 0.0 && self.delay_ns < self.period_ns) {
            return Err(Error::invariant(
                "gate_delay_ns",
                format!(
                    "delay {} ns outside [0, {}) ns",
                    self.delay_ns, self.period_ns
                ),
            ));
        }
        model::non_negative("gate_delay_jitter_ps", self.delay_jitter_ps)
    }

    pub fn nominal_start_ns(&self, gate_index: u64) -> f64 {
        gate_index as f64 * self.period_ns + self.delay_ns
    }
}

/// Which process produced a click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Photon,
    Dark,
    Afterpulse,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Photon => "photon",
            Outcome::Dark => "dark",
            Outcome::Afterpulse => "afterpulse",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "photon" => Ok(Outcome::Photon),
            "dark" => Ok(Outcome::Dark),
            "afterpulse" => Ok(Outcome::Afterpulse),
            other => Err(format!("unknown outcome `{other}`")),
        }
    }
}

/// One detector output event.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickRecord {
    pub gate_index: u64,
    /// Jittered arrival, measured from the gate rising edge, clamped to the gate.
    pub raw_timestamp_ps: f64,
    pub tdc_bin: u64,
    pub outcome: Outcome,
    /// Time from the (unjittered) event to the gate falling edge.
    pub quench_ps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub total_gates: u64,
    pub photon_clicks: u64,
    pub dark_clicks: u64,
    pub afterpulse_clicks: u64,
    /// Wall-clock span of the gate train, hold-off dead time included.
    pub duration_s: f64,
    pub counts_per_second: f64,
    pub seed: u64,
}

impl RunSummary {
    pub fn total_clicks(&self) -> u64 {
        self.photon_clicks + self.dark_clicks + self.afterpulse_clicks
    }

    pub fn clicks(&self, outcome: Outcome) -> u64 {
        match outcome {
            Outcome::Photon => self.photon_clicks,
            Outcome::Dark => self.dark_clicks,
            Outcome::Afterpulse => self.afterpulse_clicks,
        }
    }
}

/// Bin index of a timestamp for a TDC of the given resolution.
pub fn tdc_quantize(timestamp_ps: f64, resolution_ps: f64) -> Result<u64> {
    if !(resolution_ps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "TDC resolution {resolution_ps} ps must be > 0"
        )));
    }
    if !(timestamp_ps >= 0.0) || !timestamp_ps.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "timestamp {timestamp_ps} ps is negative"
        )));
    }
    Ok((timestamp_ps / resolution_ps).floor() as u64)
}

/// Everything a single gate needs to know, fixed before any draw.
#[derive(Debug, Clone, Copy)]
pub struct GateContext<'a> {
    pub gate_index: u64,
    pub detector: &'a DetectorParams,
    /// Arrivals of source pulses inside this gate, ps from the rising edge.
    pub photon_arrivals_ps: &'a [f64],
    /// Click probability per pulse, `1 - exp(-mu * eta)`.
    pub photon_click_probability: f64,
    pub tdc_resolution_ps: f64,
}

/// Random draws consumed by one gate.
#[derive(Debug, Clone, Copy)]
pub struct GateDraws<'a> {
    /// One uniform in [0, 1) per in-gate pulse.
    pub photon: &'a [f64],
    /// Unit-rate exponential variates; the first event of a Poisson process
    /// of mean `m` over the gate falls at fraction `e / m` of the width.
    pub dark: f64,
    pub afterpulse: f64,
    /// Standard normal used for detection jitter.
    pub jitter: f64,
}

/// Fills `photon` with one uniform per pulse and returns the dark,
/// afterpulse and jitter draws, always in that order.
fn sample_draws<R: Rng>(rng: &mut R, pulses: usize, photon: &mut Vec<f64>) -> (f64, f64, f64) {
    photon.clear();
    photon.extend((0..pulses).map(|_| rng.random::<f64>()));
    let dark = -(1.0 - rng.random::<f64>()).ln();
    let afterpulse = -(1.0 - rng.random::<f64>()).ln();
    let jitter: f64 = rng.sample(StandardNormal);
    (dark, afterpulse, jitter)
}

/// Per-gate kernel: afterpulse, photon and dark candidates compete and the
/// earliest one becomes the gate's click.
///
/// `traps` must be current at the gate rising edge. The returned state is
/// current at the falling edge, with the click's trapped charge added.
pub fn gate_outcome(
    ctx: &GateContext<'_>,
    traps: &TrapState,
    draws: &GateDraws<'_>,
) -> (Option<ClickRecord>, TrapState) {
    let det = ctx.detector;
    let width_ns = det.gate_width_ns;
    let width_ps = width_ns * PS_PER_NS;

    let mut best: Option<(f64, Outcome)> = None;
    let mut offer = |t_ps: f64, outcome: Outcome| {
        if best.is_none_or(|(b, _)| t_ps < b) {
            best = Some((t_ps, outcome));
        }
    };

    if det.afterpulsing_enabled() {
        let mean = det.trigger_efficiency * traps.release_over(&det.trap_species, width_ns);
        if draws.afterpulse < mean {
            offer(width_ps * draws.afterpulse / mean, Outcome::Afterpulse);
        }
    }
    for (&t, &u) in ctx.photon_arrivals_ps.iter().zip(draws.photon) {
        if u < ctx.photon_click_probability {
            offer(t, Outcome::Photon);
        }
    }
    let dark_mean = det.dark_rate_per_ns * width_ns;
    if draws.dark < dark_mean {
        offer(width_ps * draws.dark / dark_mean, Outcome::Dark);
    }

    let mut next = traps.clone();
    next.advance(&det.trap_species, width_ns, 0.0);

    let click = best.map(|(t_ps, outcome)| {
        let quench_ps = width_ps - t_ps;
        next.advance(
            &det.trap_species,
            0.0,
            det.trap_coefficient * avalanche_charge(quench_ps, det),
        );
        let raw = (t_ps + det.jitter_sigma_ps * draws.jitter).clamp(0.0, width_ps);
        ClickRecord {
            gate_index: ctx.gate_index,
            raw_timestamp_ps: raw,
            tdc_bin: (raw / ctx.tdc_resolution_ps).floor() as u64,
            outcome,
            quench_ps,
        }
    });
    (click, next)
}

fn validate_run(
    detector: &DetectorParams,
    source: &SourceConfig,
    gates: &GateTrain,
    tdc_resolution_ps: f64,
    n_gates: u64,
) -> Result<()> {
    detector.validate()?;
    source.validate()?;
    gates.validate()?;
    model::positive("tdc_resolution_ps", tdc_resolution_ps)?;
    if gates.period_ns != detector.gate_period_ns {
        return Err(Error::invariant(
            "gate_period_ns",
            "gate train period differs from the detector gate period",
        ));
    }
    if gates.width_ns != detector.gate_width_ns {
        return Err(Error::invariant(
            "gate_width_ns",
            "gate train width differs from the detector gate width",
        ));
    }
    if n_gates == 0 {
        return Err(Error::InvalidArgument("n_gates must be >= 1".into()));
    }
    Ok(())
}

/// Walks `n_gates` gates and returns every click with a run summary.
///
/// Gates whose nominal rising edge falls within the hold-off of the last
/// click are skipped; their time still counts toward the run duration.
pub fn run_experiment(
    detector: &DetectorParams,
    source: &SourceConfig,
    gates: &GateTrain,
    tdc_resolution_ps: f64,
    n_gates: u64,
    seed: u64,
) -> Result<(Vec<ClickRecord>, RunSummary)> {
    validate_run(detector, source, gates, tdc_resolution_ps, n_gates)?;

    let base = ChaCha8Rng::seed_from_u64(seed);
    let holdoff_ns = detector.holdoff_ns();
    let width_ns = detector.gate_width_ns;
    let photon_p = -(-source.mean_photon_number * detector.efficiency()).exp_m1();

    let mut traps = TrapState::empty(&detector.trap_species);
    let mut clicks = Vec::new();
    let mut last_click_ns: Option<f64> = None;
    let mut arrivals: Vec<f64> = Vec::with_capacity(2);
    let mut photon_buf: Vec<f64> = Vec::with_capacity(2);

    let mut i = 0u64;
    while i < n_gates {
        if let Some(c) = last_click_ns {
            let armed_at = c + holdoff_ns;
            if gates.nominal_start_ns(i) < armed_at {
                let first = ((armed_at - gates.delay_ns) / gates.period_ns).ceil();
                i = (first as u64).max(i + 1);
                continue;
            }
        }

        let mut rng = base.clone();
        rng.set_stream(i);
        rng.set_word_pos(0);

        let shift_ps = gates.delay_jitter_ps * rng.sample::<f64, _>(StandardNormal);
        let start_ns = gates.nominal_start_ns(i) + shift_ps / PS_PER_NS;
        in_gate_arrivals(source, gates, i, shift_ps, &mut arrivals);
        let (dark, afterpulse, jitter) = sample_draws(&mut rng, arrivals.len(), &mut photon_buf);
        let draws = GateDraws {
            photon: &photon_buf,
            dark,
            afterpulse,
            jitter,
        };

        let idle = (start_ns - traps.last_update_ns).max(0.0);
        traps.advance(&detector.trap_species, idle, 0.0);
        traps.last_update_ns = start_ns;

        let ctx = GateContext {
            gate_index: i,
            detector,
            photon_arrivals_ps: &arrivals,
            photon_click_probability: photon_p,
            tdc_resolution_ps,
        };
        let (click, next) = gate_outcome(&ctx, &traps, &draws);
        traps = next;
        debug_assert!((traps.last_update_ns - (start_ns + width_ns)).abs() < 1e-3);
        if let Some(c) = click {
            last_click_ns = Some(start_ns + (width_ns - c.quench_ps / PS_PER_NS));
            clicks.push(c);
        }
        i += 1;
    }

    let mut summary = RunSummary {
        total_gates: n_gates,
        photon_clicks: 0,
        dark_clicks: 0,
        afterpulse_clicks: 0,
        duration_s: n_gates as f64 * gates.period_ns * 1e-9,
        counts_per_second: 0.0,
        seed,
    };
    for c in &clicks {
        match c.outcome {
            Outcome::Photon => summary.photon_clicks += 1,
            Outcome::Dark => summary.dark_clicks += 1,
            Outcome::Afterpulse => summary.afterpulse_clicks += 1,
        }
    }
    summary.counts_per_second = summary.total_clicks() as f64 / summary.duration_s;
    Ok((clicks, summary))
}

/// Arrival times (ps from the jittered rising edge) of source pulses that
/// fall inside gate `i`.
fn in_gate_arrivals(
    source: &SourceConfig,
    gates: &GateTrain,
    i: u64,
    shift_ps: f64,
    out: &mut Vec<f64>,
) {
    out.clear();
    if source.mean_photon_number == 0.0 {
        return;
    }
    let width_ps = gates.width_ns * PS_PER_NS;
    let start = gates.nominal_start_ns(i);
    let base_ns = source.pulse_offset_ns - gates.delay_ns;
    let mut j = ((start - source.pulse_offset_ns) / source.pulse_period_ns).floor() as i64 - 1;
    loop {
        // Written so that equal pulse and gate periods cancel exactly.
        let rel_ns = base_ns + (j as f64 * source.pulse_period_ns - i as f64 * gates.period_ns);
        let rel_ps = rel_ns * PS_PER_NS - shift_ps;
        if rel_ps > width_ps {
            break;
        }
        if rel_ps >= 0.0 {
            out.push(rel_ps);
        }
        j += 1;
    }
}
