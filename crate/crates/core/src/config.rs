//! Flat `key = value` experiment configuration.
//!
//! Every key carries its unit as a suffix. Missing keys take the values of
//! the reference preset, unknown or repeated keys are errors, and `#` starts
//! a comment. Lists are comma-separated.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::{self, DetectorParams, TrapSpecies};
use crate::sim::{GateTrain, SourceConfig};

/// Every recognised key, in rendering order.
pub const KEYS: &[&str] = &[
    "reverse_bias_v",
    "breakdown_voltage_v",
    "gate_width_ns",
    "gate_period_ns",
    "holdoff_us",
    "trap_lifetimes_us",
    "trap_weights",
    "trap_coefficient",
    "avalanche_rate_per_ns",
    "buildup_time_ps",
    "min_avalanche_charge",
    "trigger_efficiency",
    "dark_rate_per_ns",
    "jitter_sigma_ps",
    "efficiency_scale",
    "efficiency_knee_v",
    "temperature_c",
    "mean_photon_number",
    "pulse_period_ns",
    "pulse_offset_ns",
    "gate_delay_ns",
    "gate_delay_jitter_ps",
    "tdc_resolution_ps",
    "delay_step_ps",
    "gates_per_point",
    "master_seed",
    "output",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub detector: DetectorParams,
    pub source: SourceConfig,
    /// Period and width always mirror `detector`.
    pub gates: GateTrain,
    pub tdc_resolution_ps: f64,
    pub delay_step_ps: f64,
    pub gates_per_point: u64,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::reference_preset()
    }
}

impl ExperimentConfig {
    /// 4 ns gates at a 42 ns period, mu = 0.1, 2.5 V excess bias, 10 us
    /// hold-off, 55 ps TDC, 100 ps delay steps. The pulse sits mid-gate.
    pub fn reference_preset() -> Self {
        let detector = DetectorParams::reference_preset();
        let source = SourceConfig::reference_preset();
        let delay = source.pulse_offset_ns - detector.gate_width_ns / 2.0;
        Self {
            gates: GateTrain::for_detector(&detector, delay, 20.0),
            detector,
            source,
            tdc_resolution_ps: 55.0,
            delay_step_ps: 100.0,
            gates_per_point: 1_000_000,
            master_seed: 1,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.source.validate()?;
        self.gates.validate()?;
        if self.gates.period_ns != self.detector.gate_period_ns
            || self.gates.width_ns != self.detector.gate_width_ns
        {
            return Err(Error::invariant(
                "gate_width_ns",
                "gate train geometry differs from the detector",
            ));
        }
        model::positive("tdc_resolution_ps", self.tdc_resolution_ps)?;
        model::positive("delay_step_ps", self.delay_step_ps)?;
        if self.gates_per_point == 0 {
            return Err(Error::invariant("gates_per_point", "must be >= 1"));
        }
        Ok(())
    }

    /// Same configuration with a different gate width.
    pub fn with_gate_width(&self, width_ns: f64) -> Self {
        let mut c = self.clone();
        c.detector.gate_width_ns = width_ns;
        c.gates.width_ns = width_ns;
        c
    }

    /// Same configuration with a different gate period; the delay is
    /// wrapped into the new period.
    pub fn with_gate_period(&self, period_ns: f64) -> Self {
        let mut c = self.clone();
        c.detector.gate_period_ns = period_ns;
        c.gates.period_ns = period_ns;
        c.gates.delay_ns = c.gates.delay_ns.rem_euclid(period_ns);
        c
    }

    pub fn with_holdoff(&self, holdoff_us: f64) -> Self {
        let mut c = self.clone();
        c.detector.holdoff_us = holdoff_us;
        c
    }

    /// Same configuration with the gate delay wrapped into `[0, period)`.
    pub fn with_delay(&self, delay_ns: f64) -> Self {
        let mut c = self.clone();
        c.gates.delay_ns = delay_ns.rem_euclid(c.gates.period_ns);
        c
    }

    /// Afterpulsing switched off (no trap species).
    pub fn without_afterpulsing(&self) -> Self {
        let mut c = self.clone();
        c.detector.trap_species.clear();
        c
    }
}

fn parse_f64(key: &str, value: &str, line: usize) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("`{key}`: `{value}` is not a number")))
}

fn parse_u64(key: &str, value: &str, line: usize) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| Error::parse(line, format!("`{key}`: `{value}` is not a non-negative integer")))
}

fn parse_list(key: &str, value: &str, line: usize) -> Result<Vec<f64>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_f64(key, v.trim(), line))
        .collect()
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Parses configuration text over the reference preset.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::reference_preset();
    let mut lifetimes: Vec<f64> = c.detector.trap_species.iter().map(|s| s.lifetime_us).collect();
    let mut weights: Vec<f64> = c.detector.trap_species.iter().map(|s| s.weight).collect();
    let mut seen: Vec<&str> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let known = KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| Error::parse(line, format!("unknown key `{key}`")))?;
        if seen.contains(&known) {
            return Err(Error::parse(line, format!("duplicate key `{key}`")));
        }
        seen.push(known);

        let d = &mut c.detector;
        let f = || parse_f64(key, value, line);
        match key {
            "reverse_bias_v" => d.bias.reverse_bias_v = f()?,
            "breakdown_voltage_v" => d.bias.breakdown_voltage_v = f()?,
            "gate_width_ns" => {
                d.gate_width_ns = f()?;
                c.gates.width_ns = d.gate_width_ns;
            }
            "gate_period_ns" => {
                d.gate_period_ns = f()?;
                c.gates.period_ns = d.gate_period_ns;
            }
            "holdoff_us" => d.holdoff_us = f()?,
            "trap_lifetimes_us" => lifetimes = parse_list(key, value, line)?,
            "trap_weights" => weights = parse_list(key, value, line)?,
            "trap_coefficient" => d.trap_coefficient = f()?,
            "avalanche_rate_per_ns" => d.avalanche_rate_per_ns = f()?,
            "buildup_time_ps" => d.buildup_time_ps = f()?,
            "min_avalanche_charge" => d.min_avalanche_charge = f()?,
            "trigger_efficiency" => d.trigger_efficiency = f()?,
            "dark_rate_per_ns" => d.dark_rate_per_ns = f()?,
            "jitter_sigma_ps" => d.jitter_sigma_ps = f()?,
            "efficiency_scale" => d.efficiency_scale = f()?,
            "efficiency_knee_v" => d.efficiency_knee_v = f()?,
            "temperature_c" => d.temperature_c = f()?,
            "mean_photon_number" => c.source.mean_photon_number = f()?,
            "pulse_period_ns" => c.source.pulse_period_ns = f()?,
            "pulse_offset_ns" => c.source.pulse_offset_ns = f()?,
            "gate_delay_ns" => c.gates.delay_ns = f()?,
            "gate_delay_jitter_ps" => c.gates.delay_jitter_ps = f()?,
            "tdc_resolution_ps" => c.tdc_resolution_ps = f()?,
            "delay_step_ps" => c.delay_step_ps = f()?,
            "gates_per_point" => c.gates_per_point = parse_u64(key, value, line)?,
            "master_seed" => c.master_seed = parse_u64(key, value, line)?,
            "output" => c.output = (!value.is_empty()).then(|| PathBuf::from(value)),
            _ => unreachable!("key list and match arms disagree on `{key}`"),
        }
    }

    if lifetimes.len() != weights.len() {
        return Err(Error::invariant(
            "trap_weights",
            format!(
                "{} weights for {} trap lifetimes",
                weights.len(),
                lifetimes.len()
            ),
        ));
    }
    c.detector.trap_species = lifetimes
        .into_iter()
        .zip(weights)
        .map(|(t, w)| TrapSpecies::new(t, w))
        .collect();
    c.validate()?;
    Ok(c)
}

/// Renders every key; `parse_config(&render_config(c))` reproduces `c`.
pub fn render_config(c: &ExperimentConfig) -> String {
    let d = &c.detector;
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    put("reverse_bias_v", d.bias.reverse_bias_v.to_string());
    put("breakdown_voltage_v", d.bias.breakdown_voltage_v.to_string());
    put("gate_width_ns", d.gate_width_ns.to_string());
    put("gate_period_ns", d.gate_period_ns.to_string());
    put("holdoff_us", d.holdoff_us.to_string());
    put("trap_lifetimes_us", join(d.trap_species.iter().map(|s| s.lifetime_us)));
    put("trap_weights", join(d.trap_species.iter().map(|s| s.weight)));
    put("trap_coefficient", d.trap_coefficient.to_string());
    put("avalanche_rate_per_ns", d.avalanche_rate_per_ns.to_string());
    put("buildup_time_ps", d.buildup_time_ps.to_string());
    put("min_avalanche_charge", d.min_avalanche_charge.to_string());
    put("trigger_efficiency", d.trigger_efficiency.to_string());
    put("dark_rate_per_ns", d.dark_rate_per_ns.to_string());
    put("jitter_sigma_ps", d.jitter_sigma_ps.to_string());
    put("efficiency_scale", d.efficiency_scale.to_string());
    put("efficiency_knee_v", d.efficiency_knee_v.to_string());
    put("temperature_c", d.temperature_c.to_string());
    put("mean_photon_number", c.source.mean_photon_number.to_string());
    put("pulse_period_ns", c.source.pulse_period_ns.to_string());
    put("pulse_offset_ns", c.source.pulse_offset_ns.to_string());
    put("gate_delay_ns", c.gates.delay_ns.to_string());
    put("gate_delay_jitter_ps", c.gates.delay_jitter_ps.to_string());
    put("tdc_resolution_ps", c.tdc_resolution_ps.to_string());
    put("delay_step_ps", c.delay_step_ps.to_string());
    put("gates_per_point", c.gates_per_point.to_string());
    put("master_seed", c.master_seed.to_string());
    if let Some(p) = &c.output {
        put("output", p.display().to_string());
    }
    out
}
