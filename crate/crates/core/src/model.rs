//! Deterministic detector physics: trapped-carrier populations, avalanche
//! charge and the bias-dependent efficiency map.
//!
//! Trap populations are mean-field expectations (real-valued carrier
//! counts). Each species `k` obeys `dN_k/dt = w_k * capture(t) - N_k / tau_k`;
//! between avalanches only the decay term acts, and an avalanche adds its
//! trapped charge instantaneously, split across species by weight.
//!
//! Time units are carried in field names: `_ps`, `_ns`, `_us`.

use crate::error::{Error, Result};

const NS_PER_US: f64 = 1_000.0;
const PS_PER_NS: f64 = 1_000.0;

/// Lifetimes of the default trap mixture, log-spaced by a factor of four.
pub const DEFAULT_TRAP_LIFETIMES_US: [f64; 5] = [0.5, 2.0, 8.0, 32.0, 128.0];

/// Weights of the default trap mixture.
///
/// Least-squares fit (in log space, free overall scale) of the release rate
/// `sum_k (w_k / tau_k) exp(-t / tau_k)` of a unit capture to `t^-0.916` on
/// 40 log-spaced points over 1..=100 us. RMS log deviation is below 0.01.
pub const DEFAULT_TRAP_WEIGHTS: [f64; 5] =
    [0.13674761, 0.14965239, 0.17826802, 0.15878999, 0.37654199];

/// Bias point of the diode. Excess bias is derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasConfig {
    pub reverse_bias_v: f64,
    pub breakdown_voltage_v: f64,
}

impl BiasConfig {
    pub fn new(reverse_bias_v: f64, breakdown_voltage_v: f64) -> Self {
        Self {
            reverse_bias_v,
            breakdown_voltage_v,
        }
    }

    /// Bias configured `excess_bias_v` above breakdown.
    pub fn with_excess(breakdown_voltage_v: f64, excess_bias_v: f64) -> Self {
        Self::new(breakdown_voltage_v + excess_bias_v, breakdown_voltage_v)
    }

    pub fn excess_bias_v(&self) -> f64 {
        self.reverse_bias_v - self.breakdown_voltage_v
    }
}

/// One trap species of the carrier-trapping mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSpecies {
    pub lifetime_us: f64,
    pub weight: f64,
}

impl TrapSpecies {
    pub fn new(lifetime_us: f64, weight: f64) -> Self {
        Self {
            lifetime_us,
            weight,
        }
    }

    fn lifetime_ns(&self) -> f64 {
        self.lifetime_us * NS_PER_US
    }
}

/// The default mixture, whose release rate tracks `t^-0.916`.
pub fn power_law_trap_mixture() -> Vec<TrapSpecies> {
    DEFAULT_TRAP_LIFETIMES_US
        .iter()
        .zip(DEFAULT_TRAP_WEIGHTS)
        .map(|(&tau, w)| TrapSpecies::new(tau, w))
        .collect()
}

/// Full physical configuration of a gated detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub bias: BiasConfig,
    pub gate_width_ns: f64,
    pub gate_period_ns: f64,
    /// Hold-off after a click (T_H).
    pub holdoff_us: f64,
    /// Empty list disables afterpulsing entirely.
    pub trap_species: Vec<TrapSpecies>,
    /// Carriers trapped per avalanche electron.
    pub trap_coefficient: f64,
    /// Steady-state avalanche current, in electrons per ns.
    pub avalanche_rate_per_ns: f64,
    pub buildup_time_ps: f64,
    /// Charge of an avalanche quenched immediately, in electrons.
    pub min_avalanche_charge: f64,
    /// Probability that one released carrier triggers an avalanche.
    pub trigger_efficiency: f64,
    /// Dark events per ns of open gate at the configured bias.
    pub dark_rate_per_ns: f64,
    pub jitter_sigma_ps: f64,
    pub efficiency_scale: f64,
    pub efficiency_knee_v: f64,
    /// Recorded for provenance only; nothing depends on it.
    pub temperature_c: f64,
}

impl DetectorParams {
    /// Operating point of the reference measurements: 4 ns gates every
    /// 42 ns, 2.5 V excess bias, 10 us hold-off, -40 C.
    pub fn reference_preset() -> Self {
        Self {
            bias: BiasConfig::with_excess(62.0, 2.5),
            gate_width_ns: 4.0,
            gate_period_ns: 42.0,
            holdoff_us: 10.0,
            trap_species: power_law_trap_mixture(),
            trap_coefficient: 1.0e-4,
            avalanche_rate_per_ns: 1.0e6,
            buildup_time_ps: 300.0,
            min_avalanche_charge: 1.0e5,
            trigger_efficiency: 0.12,
            dark_rate_per_ns: 2.5e-5,
            jitter_sigma_ps: 127.0,
            efficiency_scale: 0.25,
            efficiency_knee_v: 2.0,
            temperature_c: -40.0,
        }
    }

    pub fn excess_bias_v(&self) -> f64 {
        self.bias.excess_bias_v()
    }

    pub fn holdoff_ns(&self) -> f64 {
        self.holdoff_us * NS_PER_US
    }

    /// Photon detection efficiency at the configured bias.
    pub fn efficiency(&self) -> f64 {
        detection_efficiency(self.excess_bias_v().max(0.0), self)
    }

    pub fn afterpulsing_enabled(&self) -> bool {
        !self.trap_species.is_empty() && self.trigger_efficiency > 0.0 && self.trap_coefficient > 0.0
    }

    /// Checks every invariant, naming the offending config key on failure.
    pub fn validate(&self) -> Result<()> {
        positive("gate_width_ns", self.gate_width_ns)?;
        positive("gate_period_ns", self.gate_period_ns)?;
        positive("holdoff_us", self.holdoff_us)?;
        if self.gate_width_ns >= self.gate_period_ns {
            return Err(Error::invariant(
                "gate_width_ns",
                format!(
                    "gate width {} ns must be shorter than the gate period {} ns",
                    self.gate_width_ns, self.gate_period_ns
                ),
            ));
        }
        if self.holdoff_ns() < self.gate_period_ns {
            return Err(Error::invariant(
                "holdoff_us",
                format!(
                    "hold-off {} us is shorter than one gate period",
                    self.holdoff_us
                ),
            ));
        }
        finite("reverse_bias_v", self.bias.reverse_bias_v)?;
        finite("breakdown_voltage_v", self.bias.breakdown_voltage_v)?;
        if self.excess_bias_v() < 0.0 {
            return Err(Error::invariant(
                "reverse_bias_v",
                "reverse bias below breakdown leaves the detector unarmed",
            ));
        }
        for s in &self.trap_species {
            positive("trap_lifetimes_us", s.lifetime_us)?;
            if !(s.weight >= 0.0 && s.weight.is_finite()) {
                return Err(Error::invariant("trap_weights", "weights must be >= 0"));
            }
        }
        if !self.trap_species.is_empty() {
            let sum: f64 = self.trap_species.iter().map(|s| s.weight).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invariant(
                    "trap_weights",
                    format!("weights sum to {sum}, expected 1"),
                ));
            }
        }
        non_negative("trap_coefficient", self.trap_coefficient)?;
        non_negative("avalanche_rate_per_ns", self.avalanche_rate_per_ns)?;
        non_negative("buildup_time_ps", self.buildup_time_ps)?;
        non_negative("min_avalanche_charge", self.min_avalanche_charge)?;
        probability("trigger_efficiency", self.trigger_efficiency)?;
        non_negative("dark_rate_per_ns", self.dark_rate_per_ns)?;
        non_negative("jitter_sigma_ps", self.jitter_sigma_ps)?;
        probability("efficiency_scale", self.efficiency_scale)?;
        positive("efficiency_knee_v", self.efficiency_knee_v)?;
        finite("temperature_c", self.temperature_c)?;
        Ok(())
    }
}

pub(crate) fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invariant(key, format!("{v} must be > 0")))
    }
}

pub(crate) fn non_negative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invariant(key, format!("{v} must be >= 0")))
    }
}

pub(crate) fn probability(key: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invariant(key, format!("{v} is not a probability")))
    }
}

pub(crate) fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invariant(key, format!("{v} is not finite")))
    }
}

/// Per-species trapped-carrier populations on the global clock.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapState {
    pub populations: Vec<f64>,
    pub last_update_ns: f64,
}

impl TrapState {
    /// All traps empty at time zero.
    pub fn empty(species: &[TrapSpecies]) -> Self {
        Self {
            populations: vec![0.0; species.len()],
            last_update_ns: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.populations.iter().sum()
    }

    /// In-place form of [`trap_step`]; arguments are assumed valid.
    pub(crate) fn advance(&mut self, species: &[TrapSpecies], elapsed_ns: f64, captured: f64) {
        for (n, s) in self.populations.iter_mut().zip(species) {
            *n = *n * (-elapsed_ns / s.lifetime_ns()).exp() + s.weight * captured;
        }
        self.last_update_ns += elapsed_ns;
    }

    pub(crate) fn release_over(&self, species: &[TrapSpecies], window_ns: f64) -> f64 {
        self.populations
            .iter()
            .zip(species)
            .map(|(n, s)| n * -(-window_ns / s.lifetime_ns()).exp_m1())
            .sum()
    }
}

fn check_state(state: &TrapState, species: &[TrapSpecies]) -> Result<()> {
    if state.populations.len() != species.len() {
        return Err(Error::InvalidArgument(format!(
            "trap state has {} populations for {} species",
            state.populations.len(),
            species.len()
        )));
    }
    Ok(())
}

/// Integrates the trap rate equation over `elapsed_ns`, then adds
/// `captured` carriers split by species weight.
pub fn trap_step(
    state: &TrapState,
    species: &[TrapSpecies],
    elapsed_ns: f64,
    captured: f64,
) -> Result<TrapState> {
    check_state(state, species)?;
    if !(elapsed_ns >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "elapsed time {elapsed_ns} ns is negative"
        )));
    }
    if !(captured >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "captured carriers {captured} is negative"
        )));
    }
    let mut next = state.clone();
    next.advance(species, elapsed_ns, captured);
    Ok(next)
}

/// Expected number of carriers released during the next `window_ns`.
///
/// Does not mutate the state; apply the matching decay with [`trap_step`].
pub fn expected_release(state: &TrapState, species: &[TrapSpecies], window_ns: f64) -> Result<f64> {
    check_state(state, species)?;
    if !(window_ns > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "release window {window_ns} ns must be > 0"
        )));
    }
    Ok(state.release_over(species, window_ns))
}

/// Electrons flowing before the gate falling edge quenches the avalanche.
///
/// The current is zero-order during build-up and then steady, so the charge
/// is piecewise linear in `quench_ps`.
pub fn avalanche_charge(quench_ps: f64, params: &DetectorParams) -> f64 {
    let steady_ns = (quench_ps - params.buildup_time_ps).max(0.0) / PS_PER_NS;
    params.min_avalanche_charge + params.avalanche_rate_per_ns * steady_ns
}

/// Saturating map from excess bias to photon detection efficiency.
pub fn detection_efficiency(excess_bias_v: f64, params: &DetectorParams) -> f64 {
    params.efficiency_scale * -(-excess_bias_v / params.efficiency_knee_v).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one(tau_us: f64) -> Vec<TrapSpecies> {
        vec![TrapSpecies::new(tau_us, 1.0)]
    }

    fn state(pops: &[f64]) -> TrapState {
        TrapState {
            populations: pops.to_vec(),
            last_update_ns: 0.0,
        }
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn trap_step_identity() {
        let s = trap_step(&state(&[10.0]), &one(1.0), 0.0, 0.0).unwrap();
        assert_eq!(s.populations, vec![10.0]);
        assert_eq!(s.last_update_ns, 0.0);
    }

    #[test]
    fn trap_step_decay_matches_numerical_integration() {
        // RK4 on dN/dt = -N / tau over 1 us, 10^4 steps.
        let tau = 1000.0;
        let steps = 10_000;
        let h = 1000.0 / steps as f64;
        let mut n = 10.0f64;
        for _ in 0..steps {
            let k1 = -n / tau;
            let k2 = -(n + 0.5 * h * k1) / tau;
            let k3 = -(n + 0.5 * h * k2) / tau;
            let k4 = -(n + h * k3) / tau;
            n += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let s = trap_step(&state(&[10.0]), &one(1.0), 1000.0, 0.0).unwrap();
        assert!(rel_close(s.populations[0], n, 1e-10));
        assert!((s.populations[0] - 3.6788).abs() < 1e-4);
        assert_eq!(s.last_update_ns, 1000.0);
    }

    #[test]
    fn capture_splits_by_weight() {
        let sp = vec![TrapSpecies::new(1.0, 0.7), TrapSpecies::new(5.0, 0.3)];
        let s = trap_step(&state(&[0.0, 0.0]), &sp, 0.0, 100.0).unwrap();
        assert!((s.populations[0] - 70.0).abs() < 1e-12);
        assert!((s.populations[1] - 30.0).abs() < 1e-12);
    }

    #[test]
    fn trap_step_rejects_negative_arguments() {
        assert!(matches!(
            trap_step(&state(&[1.0]), &one(1.0), -1.0, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            trap_step(&state(&[1.0]), &one(1.0), 1.0, -0.5),
            Err(Error::InvalidArgument(_))
        ));
        assert!(trap_step(&state(&[1.0, 2.0]), &one(1.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn release_from_empty_traps_is_zero() {
        for w in [1.0, 1e3, 1e9] {
            assert_eq!(expected_release(&state(&[0.0]), &one(1.0), w).unwrap(), 0.0);
        }
    }

    #[test]
    fn release_matches_sampled_escape_times() {
        let closed = expected_release(&state(&[100.0]), &one(1.0), 1000.0).unwrap();
        assert!((closed - 63.21).abs() < 5e-3);

        // Independent route: sample exponential escape times per carrier.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 20_000;
        let mut released = 0u64;
        for _ in 0..trials {
            for _ in 0..100 {
                let u: f64 = rng.random();
                if -(1.0 - u).ln() * 1000.0 < 1000.0 {
                    released += 1;
                }
            }
        }
        let mc = released as f64 / trials as f64;
        // sd of the mean: sqrt(100 p (1 - p) / trials) ~ 0.034
        assert!((mc - closed).abs() < 0.15, "mc {mc} vs {closed}");
    }

    #[test]
    fn release_over_long_window_empties_traps() {
        let sp = power_law_trap_mixture();
        let s = state(&[3.0, 1.0, 4.0, 1.0, 5.0]);
        let r = expected_release(&s, &sp, 1e12).unwrap();
        assert!(rel_close(r, s.total(), 1e-6));
    }

    #[test]
    fn release_rejects_empty_window() {
        assert!(expected_release(&state(&[1.0]), &one(1.0), 0.0).is_err());
    }

    fn charge_params() -> DetectorParams {
        DetectorParams {
            buildup_time_ps: 300.0,
            avalanche_rate_per_ns: 10.0,
            min_avalanche_charge: 50.0,
            ..DetectorParams::reference_preset()
        }
    }

    #[test]
    fn avalanche_charge_examples() {
        let p = charge_params();
        assert_eq!(avalanche_charge(0.0, &p), 50.0);
        assert!((avalanche_charge(1300.0, &p) - 60.0).abs() < 1e-12);
        assert!(avalanche_charge(200.0, &p) <= avalanche_charge(2000.0, &p));
    }

    #[test]
    fn efficiency_examples() {
        let p = DetectorParams {
            efficiency_scale: 0.25,
            efficiency_knee_v: 2.0,
            ..DetectorParams::reference_preset()
        };
        assert_eq!(detection_efficiency(0.0, &p), 0.0);
        let eta = detection_efficiency(2.5, &p);
        assert!((eta - 0.25 * (1.0 - (-1.25f64).exp())).abs() < 1e-15);
        assert!((eta - 0.1784).abs() < 1e-4);
        assert!((detection_efficiency(1e6, &p) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn preset_is_valid() {
        let p = DetectorParams::reference_preset();
        p.validate().unwrap();
        assert!((p.excess_bias_v() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn validation_names_the_key() {
        let p = DetectorParams {
            gate_width_ns: 50.0,
            ..DetectorParams::reference_preset()
        };
        match p.validate() {
            Err(Error::Invariant { key, .. }) => assert_eq!(key, "gate_width_ns"),
            other => panic!("unexpected {other:?}"),
        }
        let p = DetectorParams {
            trap_species: vec![TrapSpecies::new(1.0, 0.5)],
            ..DetectorParams::reference_preset()
        };
        assert!(p.validate().is_err());
    }

    fn release_rate(species: &[TrapSpecies], t_us: f64) -> f64 {
        species
            .iter()
            .map(|s| s.weight / s.lifetime_us * (-t_us / s.lifetime_us).exp())
            .sum()
    }

    fn log_misfit(weights: &[f64]) -> f64 {
        let species: Vec<_> = DEFAULT_TRAP_LIFETIMES_US
            .iter()
            .zip(weights)
            .map(|(&t, &w)| TrapSpecies::new(t, w))
            .collect();
        let r: Vec<f64> = (0..40)
            .map(|i| {
                let t = 10f64.powf(2.0 * i as f64 / 39.0);
                release_rate(&species, t).ln() + 0.916 * t.ln()
            })
            .collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        r.iter().map(|x| (x - mean).powi(2)).sum()
    }

    #[test]
    fn default_mixture_tracks_power_law() {
        let w = DEFAULT_TRAP_WEIGHTS;
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let misfit = log_misfit(&w);
        assert!((misfit / 40.0).sqrt() < 0.01, "rms log misfit {misfit}");

        // Local optimality: moving weight between any two species, while
        // staying on the simplex, cannot improve the fit noticeably.
        for i in 0..w.len() {
            for j in 0..w.len() {
                if i == j {
                    continue;
                }
                let mut p = w;
                let step = 0.002f64.min(p[j]);
                p[i] += step;
                p[j] -= step;
                assert!(log_misfit(&p) > misfit, "move {j}->{i} improves");
            }
        }
    }

    #[test]
    fn gate_release_after_capture_follows_power_law() {
        let sp = power_law_trap_mixture();
        let captured = trap_step(&TrapState::empty(&sp), &sp, 0.0, 1e6).unwrap();
        let at = |t_us: f64| {
            let s = trap_step(&captured, &sp, t_us * 1000.0, 0.0).unwrap();
            expected_release(&s, &sp, 4.0).unwrap()
        };
        for (t1, t2) in [(1.0, 10.0), (3.0, 30.0), (10.0, 100.0)] {
            let ratio = at(t1) / at(t2);
            let expected = 10f64.powf(0.916);
            assert!((ratio / expected - 1.0).abs() < 0.05, "{t1}->{t2}: {ratio}");
        }
    }

    proptest! {
        #[test]
        fn populations_stay_non_negative(
            init in prop::collection::vec(0.0f64..1e6, 5),
            steps in prop::collection::vec((0.0f64..1e5, 0.0f64..1e4), 1..40),
        ) {
            let sp = power_law_trap_mixture();
            let mut s = state(&init);
            for (dt, cap) in steps {
                s = trap_step(&s, &sp, dt, cap).unwrap();
                prop_assert!(s.populations.iter().all(|&n| n >= 0.0));
            }
        }

        #[test]
        fn decay_without_capture_is_non_increasing(
            init in prop::collection::vec(0.0f64..1e6, 5),
            dt in 0.0f64..1e6,
        ) {
            let sp = power_law_trap_mixture();
            let s0 = state(&init);
            let s1 = trap_step(&s0, &sp, dt, 0.0).unwrap();
            prop_assert!(s1.total() <= s0.total());
        }

        #[test]
        fn single_species_halves_after_tau_ln2(tau_us in 0.01f64..1e3, n0 in 1e-3f64..1e9) {
            let sp = one(tau_us);
            let half = tau_us * 1000.0 * std::f64::consts::LN_2;
            let s = trap_step(&state(&[n0]), &sp, half, 0.0).unwrap();
            prop_assert!(rel_close(s.populations[0], n0 / 2.0, 1e-9));
        }

        #[test]
        fn release_is_additive_over_adjacent_windows(
            init in prop::collection::vec(0.0f64..1e6, 5),
            w1 in 1e-3f64..1e5,
            w2 in 1e-3f64..1e5,
        ) {
            let sp = power_law_trap_mixture();
            let s = state(&init);
            let first = expected_release(&s, &sp, w1).unwrap();
            let later = trap_step(&s, &sp, w1, 0.0).unwrap();
            let second = expected_release(&later, &sp, w2).unwrap();
            let whole = expected_release(&s, &sp, w1 + w2).unwrap();
            prop_assert!((first + second - whole).abs() <= 1e-9 * whole.max(1e-300));
        }

        #[test]
        fn charge_and_efficiency_are_monotone(a in 0.0f64..1e5, b in 0.0f64..1e5) {
            let p = DetectorParams::reference_preset();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(avalanche_charge(lo, &p) <= avalanche_charge(hi, &p));
            let (lo, hi) = (lo / 1e4, hi / 1e4);
            prop_assert!(detection_efficiency(lo, &p) <= detection_efficiency(hi, &p));
        }
    }
}
