//! Closed-loop laboratory for Mach-Zehnder modulator bias-point
//! stabilization.
//!
//! The crate is organized along the physical signal path:
//!
//! * [`device`] — electro-optic phase shift and the MZM intensity transfer
//!   curve (half-wave voltage, extinction ratio, dBm conversions);
//! * [`drift`] — time-dependent bias-phase drift: buffer-layer circuit
//!   relaxation, mobile-ion and photorefractive lags, thermo-optic
//!   trajectories, step events and seeded random walks, plus the diffused
//!   waveguide descriptors (index profile, normalized frequency and
//!   propagation constant);
//! * [`signal`] — the monitoring path: tap coupler, photodetector and the
//!   AD/DA converters;
//! * [`controller`] — the composite slope + cotangent bias controller as a
//!   pure finite state machine;
//! * [`sim`] — the discrete-time loop tying everything together, with trace
//!   recording and stability metrics.
//!
//! # Example
//!
//! Ten minutes of mobile-ion drift, open loop against closed loop on the
//! same seed:
//!
//! ```
//! use mzm_core::{
//!     metrics, run, ControllerConfig, ControllerMode, DriftComponent, DriftScenario,
//!     ExtremumKind, MzmParams, ScheduleEntry, SignalChainConfig, SimConfig,
//! };
//!
//! let mzm = MzmParams {
//!     v_pi: 3.8,
//!     input_power: 8.0,
//!     insertion_loss: 0.5,
//!     extinction_ratio: 100.0,
//!     intrinsic_phase: 0.0,
//! };
//! let drift = DriftScenario {
//!     duration: 600.0,
//!     components: vec![DriftComponent::IonLag {
//!         target_phase: 0.3,
//!         time_constant: 300.0,
//!     }],
//! };
//! let chain = SignalChainConfig {
//!     tap_monitor_fraction: 0.1,
//!     detector_gain: 2.0,
//!     detector_noise_sigma: 0.0,
//!     adc_bits: 24,
//!     adc_full_scale: 1.0,
//!     // 100 uV grid; probe and compensation steps sit on it exactly
//!     dac_bits: 17,
//!     dac_min: 0.0,
//!     dac_max: 13.1071,
//! };
//! let ctrl = ControllerConfig {
//!     probe_step_dv: 0.015,
//!     mode: ControllerMode::CotangentTracking,
//!     ratio_tolerance: 0.012,
//!     slope_tolerance: 0.004,
//!     min_slope_guard: 0.02,
//!     compensation_schedule: vec![
//!         ScheduleEntry { threshold: 0.05, step: 0.01 },
//!         ScheduleEntry { threshold: 0.2, step: 0.025 },
//!         ScheduleEntry { threshold: 1.0, step: 0.05 },
//!     ],
//!     max_iterations: 5000,
//!     settle_reads: 0,
//!     convergence_cycles: 2,
//!     extremum_kind: ExtremumKind::Minimum,
//! };
//! let sim = SimConfig {
//!     duration: 600.0,
//!     control_period: 0.1,
//!     sample_period: 10.0,
//!     seed: 7,
//!     open_loop: false,
//!     initial_bias: 1.9, // quadrature for v_pi = 3.8
//! };
//!
//! let open = run(&drift, &mzm, &chain, &ctrl, &SimConfig { open_loop: true, ..sim })?;
//! let closed = run(&drift, &mzm, &chain, &ctrl, &sim)?;
//! let (mo, mc) = (metrics(&open)?, metrics(&closed)?);
//! assert!(mc.fluctuation_db < 0.3);
//! assert!(mc.fluctuation_db < mo.fluctuation_db);
//! # Ok::<(), mzm_core::Error>(())
//! ```

// validation predicates use `!(x > 0.0)` so NaN fails the check too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod device;
pub mod drift;
pub mod error;
pub mod signal;
pub mod sim;

pub use controller::{
    classify_drift, compensation_voltage, cotangent_ratio, second_derivative, slope, ActionTag,
    ControlAction, ControllerConfig, ControllerMode, ControllerState, DriftDirection, ExtremumKind,
    FaultReason, ScheduleEntry,
};
pub use device::{dbm_to_mw, mw_to_dbm, ElectroOpticParams, MzmParams};
pub use drift::{
    CircuitParams, DriftComponent, DriftScenario, OpticalAxis, ScenarioSampler, ThermalModel,
    WaveguideProfile,
};
pub use error::{Error, Result};
pub use signal::SignalChainConfig;
pub use sim::{metrics, run, Metrics, SimConfig, SimTrace, TraceRecord};
