//! Discrete-time closed-loop engine: drift scenario + modulator + monitor
//! chain + controller on a fixed control-period grid, with trace recording
//! and stability metrics.
//!
//! Each engine step spans one control period. The step first evaluates the
//! plant (drift phase, output power, monitor read) at the current applied
//! bias, then advances the controller by one action. Actions therefore take
//! effect one control period after they are emitted, which stands in for
//! bias-settling time. A controller fault is latched into the trace and the
//! run degrades to open loop from that point.
//!
//! All randomness (drift random walks, detector noise) derives from the run
//! seed through independent ChaCha8 streams, so a run is reproducible
//! bit-for-bit.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::controller::{ActionTag, ControlAction, ControllerConfig, ControllerState, FaultReason};
use crate::device::{dbm_to_mw, mw_to_dbm, MzmParams};
use crate::drift::{DriftScenario, ScenarioSampler};
use crate::error::{Error, Result};
use crate::signal::SignalChainConfig;

/// Phase tolerance used by the settling-time metric, radians.
pub const SETTLING_PHASE_TOLERANCE: f64 = 0.05;

/// Run-level configuration.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Simulated duration, seconds.
    pub duration: f64,
    /// Time between controller actions (and bias settling time), seconds.
    pub control_period: f64,
    /// Trace recording interval, seconds.
    pub sample_period: f64,
    /// Seed for all random streams of the run.
    pub seed: u64,
    /// Bypass the controller and hold the initial bias.
    #[serde(default)]
    pub open_loop: bool,
    /// Initial commanded bias voltage, volts.
    pub initial_bias: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::invalid("duration", "must be > 0"));
        }
        if !(self.control_period > 0.0) {
            return Err(Error::invalid("control_period", "must be > 0"));
        }
        if !(self.sample_period >= self.control_period) {
            return Err(Error::invalid("sample_period", "must be >= control_period"));
        }
        if !(self.sample_period <= self.duration) {
            return Err(Error::invalid("sample_period", "must be <= duration"));
        }
        if !self.initial_bias.is_finite() {
            return Err(Error::invalid("initial_bias", "must be finite"));
        }
        Ok(())
    }
}

/// One recorded point of a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Time, seconds.
    pub t: f64,
    /// Injected drift phase, radians.
    pub drift_phase: f64,
    /// Applied (post-DAC) bias voltage, volts.
    pub bias_voltage: f64,
    /// Modulator output power, dBm.
    pub output_power_dbm: f64,
    /// Digitized monitor voltage, volts.
    pub monitor_voltage: f64,
    /// Operating-point phase deviation from the initial point, radians.
    /// NaN when the trace was loaded without phase information.
    pub phase_error: f64,
    /// Latest first-slope estimate, when the controller has produced one.
    pub d11: Option<f64>,
    /// Latest second-difference estimate.
    pub d2: Option<f64>,
    /// Latest cotangent ratio.
    pub r: Option<f64>,
    /// Tag of the controller action emitted most recently before this record.
    pub last_action: Option<ActionTag>,
}

/// Full result of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub records: Vec<TraceRecord>,
    pub faulted: bool,
    pub fault_reason: Option<FaultReason>,
    /// Time at which the controller faulted, if it did.
    pub fault_time: Option<f64>,
}

/// Stability statistics over one trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Max − min of the recorded output power, dB.
    pub fluctuation_db: f64,
    /// Max |P − P_ref|/P_ref over the trace in linear power, percent;
    /// P_ref is the first recorded power.
    pub max_percent_deviation: f64,
    /// Earliest time from which the phase error stays within
    /// [`SETTLING_PHASE_TOLERANCE`]; 0 when it never leaves, infinite when
    /// the final record is still outside, NaN without phase data.
    pub settling_time: f64,
    /// RMS of the recorded phase error, radians; NaN without phase data.
    pub residual_phase_rms: f64,
}

/// Run the loop. With `sim.open_loop` the controller is bypassed entirely
/// and the bias holds its initial value.
pub fn run(
    scenario: &DriftScenario,
    mzm: &MzmParams,
    chain: &SignalChainConfig,
    ctrl: &ControllerConfig,
    sim: &SimConfig,
) -> Result<SimTrace> {
    scenario.validate()?;
    mzm.validate()?;
    chain.validate()?;
    ctrl.validate()?;
    sim.validate()?;
    if sim.duration > scenario.duration {
        return Err(Error::invalid(
            "duration",
            format!(
                "simulation duration {} s exceeds scenario duration {} s",
                sim.duration, scenario.duration
            ),
        ));
    }
    engine(scenario, mzm, chain, ctrl, sim)
}

fn engine(
    scenario: &DriftScenario,
    mzm: &MzmParams,
    chain: &SignalChainConfig,
    ctrl: &ControllerConfig,
    sim: &SimConfig,
) -> Result<SimTrace> {
    let dt = sim.control_period;
    let steps = ((sim.duration / dt) - 1e-9).ceil() as u64;

    let mut sampler = ScenarioSampler::new(scenario, sim.seed);
    // stream 0 is reserved for detector noise; drift walks use 1.. per index
    let mut noise_rng = ChaCha8Rng::seed_from_u64(sim.seed);
    noise_rng.set_stream(0);

    let mut controller = ControllerState::new(sim.initial_bias);
    let mut commanded = sim.initial_bias;
    let mut applied = chain.dac_write(commanded);
    let mut awaiting_read = false;
    let mut last_action: Option<ActionTag> = None;

    let mut trace = SimTrace::default();
    let mut theta_ref = 0.0;
    let mut next_sample_t = 0.0;

    for k in 0..=steps {
        let t = (k as f64 * dt).min(sim.duration);
        let phi = sampler.phase(t)?;
        let output_mw = mzm.transmission(applied, phi);
        let (_through, monitor_mw) = chain.tap(output_mw);
        let monitor_v = chain.adc_read(chain.detect(monitor_mw, &mut noise_rng));

        let theta = PI * applied / mzm.v_pi + mzm.intrinsic_phase + phi;
        if k == 0 {
            theta_ref = theta;
        }

        if t + 1e-9 >= next_sample_t {
            trace.records.push(TraceRecord {
                t,
                drift_phase: phi,
                bias_voltage: applied,
                output_power_dbm: mw_to_dbm(output_mw).unwrap_or(f64::NEG_INFINITY),
                monitor_voltage: monitor_v,
                phase_error: theta - theta_ref,
                d11: controller.d11(),
                d2: controller.d2(),
                r: controller.ratio(),
                last_action,
            });
            next_sample_t += sim.sample_period;
        }

        if !sim.open_loop && !trace.faulted {
            let input = if awaiting_read { Some(monitor_v) } else { None };
            awaiting_read = false;
            let (next, action) = controller.step(ctrl, input);
            controller = next;
            match action {
                ControlAction::SetBias(v) => {
                    commanded = v;
                    applied = chain.dac_write(commanded);
                }
                ControlAction::ReadMonitor => awaiting_read = true,
                ControlAction::ApplyCompensation(dv) => {
                    commanded += dv;
                    applied = chain.dac_write(commanded);
                }
                ControlAction::Done { .. } => {}
                ControlAction::Fault(reason) => {
                    trace.faulted = true;
                    trace.fault_reason = Some(reason);
                    trace.fault_time = Some(t);
                }
            }
            last_action = Some(action.tag());
        }
    }

    Ok(trace)
}

/// Compute stability metrics over a trace.
pub fn metrics(trace: &SimTrace) -> Result<Metrics> {
    if trace.records.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut min_dbm = f64::INFINITY;
    let mut max_dbm = f64::NEG_INFINITY;
    for r in &trace.records {
        min_dbm = min_dbm.min(r.output_power_dbm);
        max_dbm = max_dbm.max(r.output_power_dbm);
    }

    let p_ref = dbm_to_mw(trace.records[0].output_power_dbm);
    let mut max_dev = 0.0f64;
    for r in &trace.records {
        let p = dbm_to_mw(r.output_power_dbm);
        max_dev = max_dev.max((p - p_ref).abs() / p_ref);
    }

    let has_phase = trace.records.iter().all(|r| !r.phase_error.is_nan());
    let (settling_time, residual_phase_rms) = if has_phase {
        let sum_sq: f64 = trace
            .records
            .iter()
            .map(|r| r.phase_error * r.phase_error)
            .sum();
        let rms = (sum_sq / trace.records.len() as f64).sqrt();
        let last_outside = trace
            .records
            .iter()
            .rposition(|r| r.phase_error.abs() > SETTLING_PHASE_TOLERANCE);
        let settling = match last_outside {
            None => 0.0,
            Some(idx) if idx + 1 < trace.records.len() => trace.records[idx + 1].t,
            Some(_) => f64::INFINITY,
        };
        (settling, rms)
    } else {
        (f64::NAN, f64::NAN)
    };

    Ok(Metrics {
        fluctuation_db: max_dbm - min_dbm,
        max_percent_deviation: 100.0 * max_dev,
        settling_time,
        residual_phase_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{ControllerMode, ExtremumKind, ScheduleEntry};
    use crate::drift::DriftComponent;

    fn mzm() -> MzmParams {
        MzmParams {
            v_pi: 3.8,
            input_power: 8.0,
            insertion_loss: 0.5,
            extinction_ratio: 100.0,
            intrinsic_phase: 0.0,
        }
    }

    fn chain() -> SignalChainConfig {
        SignalChainConfig {
            tap_monitor_fraction: 0.1,
            detector_gain: 2.0,
            detector_noise_sigma: 0.0,
            adc_bits: 24,
            adc_full_scale: 1.0,
            dac_bits: 17,
            dac_min: 0.0,
            dac_max: 13.1071,
        }
    }

    fn ctrl() -> ControllerConfig {
        ControllerConfig {
            probe_step_dv: 0.015,
            mode: ControllerMode::CotangentTracking,
            ratio_tolerance: 0.012,
            slope_tolerance: 0.004,
            min_slope_guard: 0.02,
            compensation_schedule: vec![
                ScheduleEntry {
                    threshold: 0.05,
                    step: 0.01,
                },
                ScheduleEntry {
                    threshold: 0.2,
                    step: 0.025,
                },
                ScheduleEntry {
                    threshold: 1.0,
                    step: 0.05,
                },
            ],
            max_iterations: 1000,
            settle_reads: 0,
            convergence_cycles: 2,
            extremum_kind: ExtremumKind::Minimum,
        }
    }

    fn sim(open_loop: bool) -> SimConfig {
        SimConfig {
            duration: 120.0,
            control_period: 0.1,
            sample_period: 1.0,
            seed: 7,
            open_loop,
            initial_bias: 1.9,
        }
    }

    #[test]
    fn zero_drift_open_loop_is_exactly_constant() {
        let scenario = DriftScenario::quiet(120.0);
        let trace = run(&scenario, &mzm(), &chain(), &ctrl(), &sim(true)).unwrap();
        assert_eq!(trace.records.len(), 121);
        let first = trace.records[0].output_power_dbm;
        for r in &trace.records {
            assert_eq!(r.output_power_dbm, first);
            assert!(r.d11.is_none() && r.r.is_none() && r.last_action.is_none());
        }
        let m = metrics(&trace).unwrap();
        assert_eq!(m.fluctuation_db, 0.0);
        assert_eq!(m.max_percent_deviation, 0.0);
    }

    #[test]
    fn zero_drift_closed_loop_holds_the_initial_bias() {
        let scenario = DriftScenario::quiet(120.0);
        let trace = run(&scenario, &mzm(), &chain(), &ctrl(), &sim(false)).unwrap();
        assert!(!trace.faulted);
        // the controller converges and never compensates, so the bias never
        // leaves the probe pattern around the initial value
        let initial = trace.records[0].bias_voltage;
        for r in &trace.records {
            assert!(
                r.bias_voltage >= initial - 1e-9
                    && r.bias_voltage <= initial + 2.0 * ctrl().probe_step_dv + 1e-9,
                "bias {} escaped probe band",
                r.bias_voltage
            );
        }
        assert!(trace
            .records
            .iter()
            .any(|r| r.last_action == Some(ActionTag::Done)));
    }

    #[test]
    fn runs_are_bit_identical_for_equal_seeds() {
        let scenario = DriftScenario {
            duration: 60.0,
            components: vec![
                DriftComponent::RandomWalk { sigma: 0.002 },
                DriftComponent::IonLag {
                    target_phase: 0.3,
                    time_constant: 40.0,
                },
            ],
        };
        let noisy_chain = SignalChainConfig {
            detector_noise_sigma: 1e-6,
            ..chain()
        };
        let cfg = SimConfig {
            duration: 60.0,
            ..sim(false)
        };
        let a = run(&scenario, &mzm(), &noisy_chain, &ctrl(), &cfg).unwrap();
        let b = run(&scenario, &mzm(), &noisy_chain, &ctrl(), &cfg).unwrap();
        assert_eq!(a, b);
        let different_seed = SimConfig { seed: 8, ..cfg };
        let c = run(&scenario, &mzm(), &noisy_chain, &ctrl(), &different_seed).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_step_schedule_matches_open_loop_away_from_probes() {
        let scenario = DriftScenario {
            duration: 120.0,
            components: vec![DriftComponent::IonLag {
                target_phase: 0.2,
                time_constant: 60.0,
            }],
        };
        // diagnostic configuration: compensations are applied but have zero
        // amplitude, so the closed loop must shadow the open loop except for
        // the probe excursions (this bypasses validate(), which requires
        // positive steps)
        let mut neutered = ctrl();
        for entry in &mut neutered.compensation_schedule {
            entry.step = 0.0;
        }
        let open = run(&scenario, &mzm(), &chain(), &ctrl(), &sim(true)).unwrap();
        let closed = engine(&scenario, &mzm(), &chain(), &neutered, &sim(false)).unwrap();
        let base = open.records[0].bias_voltage;
        let mut compared = 0;
        for (o, c) in open.records.iter().zip(closed.records.iter()) {
            if (c.bias_voltage - base).abs() < 1e-12 {
                assert_eq!(o.output_power_dbm, c.output_power_dbm);
                compared += 1;
            }
        }
        assert!(compared > 10, "expected many base-bias records");
    }

    #[test]
    fn fault_degrades_to_open_loop_and_run_completes() {
        let scenario = DriftScenario {
            duration: 120.0,
            components: vec![DriftComponent::IonLag {
                target_phase: 1.0,
                time_constant: 30.0,
            }],
        };
        let mut strict = ctrl();
        strict.max_iterations = 1; // faults almost immediately under drift
        let trace = run(&scenario, &mzm(), &chain(), &strict, &sim(false)).unwrap();
        assert!(trace.faulted);
        assert_eq!(trace.fault_reason, Some(FaultReason::MaxIterationsExceeded));
        assert!(trace.fault_time.is_some());
        // trace still spans the whole run
        assert_eq!(trace.records.last().unwrap().t, 120.0);
    }

    #[test]
    fn closed_loop_beats_open_loop_under_drift() {
        let scenario = DriftScenario {
            duration: 120.0,
            components: vec![DriftComponent::IonLag {
                target_phase: 0.35,
                time_constant: 50.0,
            }],
        };
        let open = run(&scenario, &mzm(), &chain(), &ctrl(), &sim(true)).unwrap();
        let closed = run(&scenario, &mzm(), &chain(), &ctrl(), &sim(false)).unwrap();
        let mo = metrics(&open).unwrap();
        let mc = metrics(&closed).unwrap();
        assert!(
            mc.fluctuation_db <= mo.fluctuation_db,
            "closed {} vs open {}",
            mc.fluctuation_db,
            mo.fluctuation_db
        );
    }

    #[test]
    fn monitor_voltage_tracks_unquantized_chain() {
        let scenario = DriftScenario::quiet(30.0);
        let cfg = SimConfig {
            duration: 30.0,
            ..sim(false)
        };
        let c = chain();
        let trace = run(&scenario, &mzm(), &c, &ctrl(), &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for r in &trace.records {
            let p = mzm().transmission(r.bias_voltage, r.drift_phase);
            let (_t, mon) = c.tap(p);
            let ideal = c.detect(mon, &mut rng); // sigma = 0: no draw
            assert!(
                (r.monitor_voltage - ideal).abs() <= c.adc_lsb() / 2.0 + 1e-15,
                "monitor voltage off by {}",
                (r.monitor_voltage - ideal).abs()
            );
        }
    }

    #[test]
    fn metrics_on_synthetic_traces() {
        let mk = |dbm: f64| TraceRecord {
            t: 0.0,
            drift_phase: 0.0,
            bias_voltage: 1.9,
            output_power_dbm: dbm,
            monitor_voltage: 0.0,
            phase_error: 0.0,
            d11: None,
            d2: None,
            r: None,
            last_action: None,
        };
        let constant = SimTrace {
            records: vec![mk(4.5); 10],
            ..Default::default()
        };
        let m = metrics(&constant).unwrap();
        assert_eq!(m.fluctuation_db, 0.0);
        assert_eq!(m.max_percent_deviation, 0.0);
        assert_eq!(m.settling_time, 0.0);

        let alternating = SimTrace {
            records: vec![mk(0.0), mk(3.010299956639812), mk(0.0)],
            ..Default::default()
        };
        let m = metrics(&alternating).unwrap();
        assert!((m.fluctuation_db - 3.010299956639812).abs() < 1e-12);
        assert!((m.max_percent_deviation - 100.0).abs() < 1e-9);

        let span = SimTrace {
            records: vec![mk(3.44), mk(5.14)],
            ..Default::default()
        };
        assert!((metrics(&span).unwrap().fluctuation_db - 1.70).abs() < 1e-12);

        assert!(matches!(
            metrics(&SimTrace::default()),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn settling_time_finds_the_last_excursion() {
        let mk = |t: f64, pe: f64| TraceRecord {
            t,
            drift_phase: 0.0,
            bias_voltage: 1.9,
            output_power_dbm: 4.5,
            monitor_voltage: 0.0,
            phase_error: pe,
            d11: None,
            d2: None,
            r: None,
            last_action: None,
        };
        let trace = SimTrace {
            records: vec![
                mk(0.0, 0.0),
                mk(1.0, 0.2),
                mk(2.0, 0.1),
                mk(3.0, 0.01),
                mk(4.0, 0.0),
            ],
            ..Default::default()
        };
        assert_eq!(metrics(&trace).unwrap().settling_time, 3.0);
        let never = SimTrace {
            records: vec![mk(0.0, 0.0), mk(1.0, 0.2)],
            ..Default::default()
        };
        assert!(metrics(&never).unwrap().settling_time.is_infinite());
    }

    #[test]
    fn rejects_simulation_longer_than_scenario() {
        let scenario = DriftScenario::quiet(10.0);
        let cfg = SimConfig {
            duration: 20.0,
            sample_period: 1.0,
            ..sim(true)
        };
        assert!(run(&scenario, &mzm(), &chain(), &ctrl(), &cfg).is_err());
    }
}
