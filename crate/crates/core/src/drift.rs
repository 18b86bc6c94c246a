//! Bias-point drift mechanisms and their composition into a time-dependent
//! phase error injected into the modulator.
//!
//! Four physical mechanisms are modeled:
//!
//! * **Equivalent-circuit relaxation** — the buffer layer and waveguide form
//!   an RC network, so the voltage actually reaching the waveguide after a
//!   step `V0` is
//!
//!   ```text
//!   V(t) = V0·[ R4/(2R2+R4) + 2(C2·R2 − C3·R4)/((2R2+R4)(C2+2C3)) · e^(−t/τ) ]
//!   R4 = R1·R3/(R1+R3),   τ = R2·R4·(C2+2C3)/(2R2+R4)
//!   ```
//!
//!   The drift contribution is the deficit between the steady-state and
//!   instantaneous effective voltage, mapped to phase by a per-scenario
//!   coupling in rad/V.
//! * **Mobile-ion lag** — free ions (H⁺, K⁺, Na⁺) screen the applied field
//!   with a first-order lag toward a target phase.
//! * **Photorefractive relaxation** — light-excited carriers trapped at
//!   impurity levels build an internal field on a seconds-to-minutes scale;
//!   modeled as a first-order lag as well.
//! * **Thermal index change** — the relative index/temperature coefficients
//!   are `17.1e-6 /K` (extraordinary) and `1.9e-6 /K` (ordinary); a scripted
//!   piecewise-linear temperature trajectory converts to phase through the
//!   interaction length.
//!
//! Scripted step events and a seeded Gaussian random walk complete the
//! scenario vocabulary. Random components use a per-component ChaCha8 stream
//! derived from the run seed, so traces are reproducible bit-for-bit on any
//! platform and deterministic components stay additive.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Equivalent-circuit elements of the buffer layer (R1/C1 transverse,
/// R2/C2 longitudinal) and the waveguide (R3/C3), plus the applied step.
///
/// `c1` is carried for completeness with the circuit topology but does not
/// enter the step response.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    #[serde(default)]
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Applied step amplitude, volts.
    pub v0: f64,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 0.0 && self.r2 > 0.0 && self.r3 > 0.0) {
            return Err(Error::invalid("r1/r2/r3", "resistances must be > 0"));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.c3 >= 0.0) {
            return Err(Error::invalid("c1/c2/c3", "capacitances must be >= 0"));
        }
        if self.c2 == 0.0 && self.c3 == 0.0 {
            return Err(Error::invalid("c2/c3", "must not both be zero"));
        }
        if !self.v0.is_finite() {
            return Err(Error::invalid("v0", "must be finite"));
        }
        Ok(())
    }

    /// Effective lateral impedance `R4 = R1·R3/(R1+R3)`.
    pub fn effective_lateral_impedance(&self) -> f64 {
        self.r1 * self.r3 / (self.r1 + self.r3)
    }

    /// Relaxation time `τ = R2·R4·(C2+2C3)/(2R2+R4)`.
    pub fn relaxation_time(&self) -> f64 {
        let r4 = self.effective_lateral_impedance();
        self.r2 * r4 * (self.c2 + 2.0 * self.c3) / (2.0 * self.r2 + r4)
    }

    /// Dimensionless amplitude of the transient term,
    /// `2(C2·R2 − C3·R4)/((2R2+R4)(C2+2C3))`; zero when `C2+2C3 = 0`.
    pub fn transient_coefficient(&self) -> f64 {
        let cap = self.c2 + 2.0 * self.c3;
        if cap == 0.0 {
            return 0.0;
        }
        let r4 = self.effective_lateral_impedance();
        2.0 * (self.c2 * self.r2 - self.c3 * r4) / ((2.0 * self.r2 + r4) * cap)
    }

    /// Voltage reaching the waveguide at time `t` after the step.
    ///
    /// With zero total capacitance the relaxation time is zero and the
    /// response is the pure steady state for all `t`.
    pub fn waveguide_voltage(&self, t: f64) -> f64 {
        let steady = self.steady_state_voltage();
        let tau = self.relaxation_time();
        if tau == 0.0 {
            return steady;
        }
        steady + self.v0 * self.transient_coefficient() * (-t / tau).exp()
    }

    /// Long-time effective voltage `V0·R4/(2R2+R4)`.
    pub fn steady_state_voltage(&self) -> f64 {
        let r4 = self.effective_lateral_impedance();
        self.v0 * r4 / (2.0 * self.r2 + r4)
    }
}

/// Diffused-waveguide index profile parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideProfile {
    /// Cladding index.
    pub cladding_index: f64,
    /// Substrate index.
    pub substrate_index: f64,
    /// Peak surface index; must exceed the substrate index for guiding.
    pub surface_index: f64,
    /// Lateral 1/e depth, meters.
    pub depth_x: f64,
    /// Vertical 1/e depth, meters.
    pub depth_y: f64,
    /// Vacuum wavenumber, 1/meters.
    pub wavenumber: f64,
}

impl WaveguideProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.surface_index > self.substrate_index) {
            return Err(Error::invalid(
                "surface_index",
                "must exceed substrate_index for a guided mode",
            ));
        }
        if !(self.depth_x > 0.0 && self.depth_y > 0.0) {
            return Err(Error::invalid("depth_x/depth_y", "must be > 0"));
        }
        if !(self.wavenumber > 0.0) {
            return Err(Error::invalid("wavenumber", "must be > 0"));
        }
        Ok(())
    }

    /// Squared-index distribution: Gaussian-graded in the substrate half
    /// space (`y >= 0`, where the guided branch applies at `y = 0` exactly),
    /// cladding below.
    pub fn index_profile(&self, x: f64, y: f64) -> f64 {
        if y >= 0.0 {
            let nb2 = self.substrate_index * self.substrate_index;
            let ns2 = self.surface_index * self.surface_index;
            nb2 + (ns2 - nb2) * (-(x / self.depth_x).powi(2) - (y / self.depth_y).powi(2)).exp()
        } else {
            self.cladding_index * self.cladding_index
        }
    }

    /// Normalized frequencies `(vx, vy) = k0·d·sqrt(ns² − nb²)`.
    pub fn normalized_frequency(&self) -> (f64, f64) {
        let contrast = (self.surface_index * self.surface_index
            - self.substrate_index * self.substrate_index)
            .sqrt();
        (
            self.wavenumber * self.depth_x * contrast,
            self.wavenumber * self.depth_y * contrast,
        )
    }

    /// Normalized propagation constant `(n_eff² − nb²)/(ns² − nb²)`.
    pub fn normalized_propagation_constant(&self, n_eff: f64) -> f64 {
        let nb2 = self.substrate_index * self.substrate_index;
        let ns2 = self.surface_index * self.surface_index;
        (n_eff * n_eff - nb2) / (ns2 - nb2)
    }
}

/// Crystal axis selecting which relative thermo-optic coefficient applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpticalAxis {
    Extraordinary,
    Ordinary,
}

/// Thermo-optic model converting a temperature offset to an index and phase
/// change over the interaction length.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalModel {
    /// Relative coefficient (1/n_e)(dn_e/dT), 1/K.
    #[serde(default = "default_rel_dne_dt")]
    pub rel_dne_dt: f64,
    /// Relative coefficient (1/n_o)(dn_o/dT), 1/K.
    #[serde(default = "default_rel_dno_dt")]
    pub rel_dno_dt: f64,
    /// Unperturbed index on the selected axis.
    pub base_index: f64,
    pub axis: OpticalAxis,
    /// Interaction length, meters.
    pub length: f64,
    /// Vacuum wavelength, meters.
    pub wavelength: f64,
}

fn default_rel_dne_dt() -> f64 {
    17.1e-6
}

fn default_rel_dno_dt() -> f64 {
    1.9e-6
}

impl ThermalModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_dne_dt > 0.0 && self.rel_dno_dt > 0.0) {
            return Err(Error::invalid("rel_dne_dt/rel_dno_dt", "must be > 0"));
        }
        if !(self.base_index > 0.0) {
            return Err(Error::invalid("base_index", "must be > 0"));
        }
        if !(self.length > 0.0) {
            return Err(Error::invalid("length", "must be > 0"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength", "must be > 0"));
        }
        Ok(())
    }

    /// Index change `Δn = n·(1/n)(dn/dT)·ΔT` on the selected axis.
    pub fn thermal_index_shift(&self, delta_t: f64) -> f64 {
        let coeff = match self.axis {
            OpticalAxis::Extraordinary => self.rel_dne_dt,
            OpticalAxis::Ordinary => self.rel_dno_dt,
        };
        self.base_index * coeff * delta_t
    }

    /// Phase drift `(2π/λ0)·Δn·L` for a temperature offset.
    pub fn thermal_phase_drift(&self, delta_t: f64) -> f64 {
        2.0 * PI / self.wavelength * self.thermal_index_shift(delta_t) * self.length
    }
}

/// One source of bias-phase drift within a scenario.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftComponent {
    /// Deficit between steady-state and instantaneous waveguide voltage,
    /// mapped to phase by `coupling` (rad/V).
    CircuitRelaxation {
        params: CircuitParams,
        coupling: f64,
    },
    /// First-order lag toward `target_phase` with the given time constant.
    IonLag {
        target_phase: f64,
        time_constant: f64,
    },
    /// First-order relaxation of amplitude `amplitude` (radians).
    Photorefractive { amplitude: f64, time_constant: f64 },
    /// Piecewise-linear temperature trajectory converted to phase.
    ThermalTrajectory {
        model: ThermalModel,
        /// `(time_s, delta_kelvin)` breakpoints, strictly increasing in time.
        temperature_offsets: Vec<(f64, f64)>,
    },
    /// Instantaneous phase jump at time `at` (applies for `t >= at`).
    StepEvent { at: f64, jump: f64 },
    /// Cumulative Gaussian random walk with increment std `sigma·sqrt(Δt)`.
    RandomWalk { sigma: f64 },
}

impl DriftComponent {
    fn validate(&self, duration: f64) -> Result<()> {
        match self {
            DriftComponent::CircuitRelaxation { params, coupling } => {
                params.validate()?;
                if !coupling.is_finite() {
                    return Err(Error::invalid("coupling", "must be finite"));
                }
            }
            DriftComponent::IonLag { time_constant, .. }
            | DriftComponent::Photorefractive { time_constant, .. } => {
                if !(*time_constant > 0.0) {
                    return Err(Error::invalid("time_constant", "must be > 0"));
                }
            }
            DriftComponent::ThermalTrajectory {
                model,
                temperature_offsets,
            } => {
                model.validate()?;
                if temperature_offsets.is_empty() {
                    return Err(Error::invalid(
                        "temperature_offsets",
                        "must contain at least one breakpoint",
                    ));
                }
                let mut prev = f64::NEG_INFINITY;
                for &(t, _) in temperature_offsets {
                    if !(t >= 0.0 && t <= duration) {
                        return Err(Error::invalid(
                            "temperature_offsets",
                            format!("breakpoint time {t} outside [0, {duration}]"),
                        ));
                    }
                    if t <= prev {
                        return Err(Error::invalid(
                            "temperature_offsets",
                            "breakpoint times must be strictly increasing",
                        ));
                    }
                    prev = t;
                }
            }
            DriftComponent::StepEvent { at, .. } => {
                if !(*at >= 0.0 && *at <= duration) {
                    return Err(Error::invalid("at", format!("must lie in [0, {duration}]")));
                }
            }
            DriftComponent::RandomWalk { sigma } => {
                if !(*sigma >= 0.0) {
                    return Err(Error::invalid("sigma", "must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Phase contribution of a deterministic component at time `t`.
    /// `RandomWalk` is stateful and handled by [`ScenarioSampler`].
    fn deterministic_phase(&self, t: f64) -> f64 {
        match self {
            DriftComponent::CircuitRelaxation { params, coupling } => {
                coupling * (params.steady_state_voltage() - params.waveguide_voltage(t))
            }
            DriftComponent::IonLag {
                target_phase,
                time_constant,
            } => target_phase * (1.0 - (-t / time_constant).exp()),
            DriftComponent::Photorefractive {
                amplitude,
                time_constant,
            } => amplitude * (1.0 - (-t / time_constant).exp()),
            DriftComponent::ThermalTrajectory {
                model,
                temperature_offsets,
            } => model.thermal_phase_drift(interpolate(temperature_offsets, t)),
            DriftComponent::StepEvent { at, jump } => {
                if t >= *at {
                    *jump
                } else {
                    0.0
                }
            }
            DriftComponent::RandomWalk { .. } => 0.0,
        }
    }
}

/// Piecewise-linear interpolation with constant extrapolation beyond the
/// first and last breakpoints.
fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    match points {
        [] => 0.0,
        [single] => single.1,
        _ => {
            if t <= points[0].0 {
                return points[0].1;
            }
            let last = points[points.len() - 1];
            if t >= last.0 {
                return last.1;
            }
            let idx = points.partition_point(|&(pt, _)| pt <= t);
            let (t0, v0) = points[idx - 1];
            let (t1, v1) = points[idx];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}

/// A complete drift scenario: a duration and an ordered list of components
/// whose phase contributions add.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftScenario {
    /// Scenario duration, seconds.
    pub duration: f64,
    pub components: Vec<DriftComponent>,
}

impl DriftScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::invalid("duration", "must be > 0"));
        }
        for c in &self.components {
            c.validate(self.duration)?;
        }
        Ok(())
    }

    /// A scenario with no drift at all.
    pub fn quiet(duration: f64) -> Self {
        DriftScenario {
            duration,
            components: Vec::new(),
        }
    }

    /// True if any component draws random numbers.
    pub fn has_random_component(&self) -> bool {
        self.components
            .iter()
            .any(|c| matches!(c, DriftComponent::RandomWalk { .. }))
    }
}

struct WalkState {
    rng: ChaCha8Rng,
    sigma: f64,
    value: f64,
}

/// Stateful evaluator for a drift scenario within one simulation run.
///
/// Random-walk components are advanced on each query, so queries must have
/// non-decreasing `t`. Each random component owns an independent ChaCha8
/// stream (`set_stream(index + 1)` on the run seed; stream 0 is reserved for
/// detector noise), which keeps deterministic components additive across
/// scenario compositions.
pub struct ScenarioSampler<'a> {
    scenario: &'a DriftScenario,
    walks: Vec<(usize, WalkState)>,
    last_t: Option<f64>,
}

impl<'a> ScenarioSampler<'a> {
    pub fn new(scenario: &'a DriftScenario, seed: u64) -> Self {
        let walks = scenario
            .components
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c {
                DriftComponent::RandomWalk { sigma } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64 + 1);
                    Some((
                        i,
                        WalkState {
                            rng,
                            sigma: *sigma,
                            value: 0.0,
                        },
                    ))
                }
                _ => None,
            })
            .collect();
        ScenarioSampler {
            scenario,
            walks,
            last_t: None,
        }
    }

    /// Total drift phase at time `t` (seconds), advancing any random walks.
    pub fn phase(&mut self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.scenario.duration * (1.0 + 1e-12)) {
            return Err(Error::TimeOutOfRange {
                t,
                duration: self.scenario.duration,
            });
        }
        if let Some(last) = self.last_t {
            if t < last {
                return Err(Error::NonMonotonicSample { t, last });
            }
        }
        let dt = t - self.last_t.unwrap_or(t);
        self.last_t = Some(t);

        for (_, walk) in &mut self.walks {
            if dt > 0.0 && walk.sigma > 0.0 {
                let std = walk.sigma * dt.sqrt();
                let normal = Normal::new(0.0, std).expect("std is finite and nonnegative");
                walk.value += normal.sample(&mut walk.rng);
            }
        }

        let mut total = 0.0;
        for (i, c) in self.scenario.components.iter().enumerate() {
            total += match c {
                DriftComponent::RandomWalk { .. } => self
                    .walks
                    .iter()
                    .find(|(wi, _)| *wi == i)
                    .map(|(_, w)| w.value)
                    .unwrap_or(0.0),
                other => other.deterministic_phase(t),
            };
        }
        Ok(total)
    }
}
