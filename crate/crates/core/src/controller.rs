//! Composite bias-point controller: slope and cotangent tracking expressed
//! as an explicit finite state machine over monitor reads.
//!
//! The controller never touches the plant directly. Each [`ControllerState::step`]
//! consumes at most one monitor read and emits exactly one [`ControlAction`];
//! the surrounding loop (simulation engine or hardware driver) executes the
//! action and feeds back reads. This keeps the decision logic identical
//! between simulation and a hardware deployment.
//!
//! # Cotangent tracking
//!
//! Away from transfer-curve extrema the controller probes the curve at
//! `base`, `base+ΔV` and `base+2ΔV`, forming two forward slopes `d11`, `d13`
//! and the second difference `d2 = (d13 − d11)/ΔV`. The tracked quantity is
//! the quotient
//!
//! ```text
//! R = d2 / d11
//! ```
//!
//! which on the raised-cosine plant equals `(π/Vπ)·cot θ` at the probe
//! point — strictly decreasing in the operating phase θ on one transfer
//! branch and independent of optical power and detector gain (both cancel in
//! the quotient). The first completed probe cycle freezes the reference
//! ratio `R1` at the operating point to be held; every later cycle measures
//! `R2` and compares:
//!
//! * `R2 − R1 > εR` → drift classified `Left`, compensation **raises** the
//!   bias;
//! * `R1 − R2 > εR` → drift classified `Right`, compensation **lowers** it;
//! * otherwise the cycle counts toward convergence, and `Done` is emitted
//!   after a configured number of consecutive in-tolerance cycles.
//!
//! Compensation magnitudes come from a bucket schedule keyed by `|R2 − R1|`.
//! After `Done` the controller keeps probing and comparing against the same
//! stored reference, so slow drift is rejected indefinitely.
//!
//! # Extremum nulling
//!
//! At a transmission extremum the first derivative vanishes and the ratio is
//! singular, so the controller instead probes once (`base`, `base+ΔV`),
//! forms the slope `d12` and steps the bias against the slope sign until
//! `|d12|` falls below tolerance.

use serde::Deserialize;

use crate::error::{Error, Result};

/// Consecutive ratio-singularity failures tolerated before faulting.
const GUARD_TRIP_LIMIT: u32 = 3;

/// Operating mode of the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    /// Hold an arbitrary point on the transfer curve via the cotangent ratio.
    CotangentTracking,
    /// Hold a transmission extremum by nulling the probe slope.
    ExtremumNulling,
}

/// Which kind of extremum the nulling mode locks to; sets the sign relating
/// slope to correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Minimum,
    Maximum,
}

/// One compensation bucket: applies `step` volts when the drift magnitude
/// falls at or below `threshold` (the last entry catches all larger values).
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub threshold: f64,
    pub step: f64,
}

/// Static controller configuration.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// Probe step ΔV, volts.
    pub probe_step_dv: f64,
    pub mode: ControllerMode,
    /// Tolerance εR on |R2 − R1| below which a cycle counts as in-tolerance.
    pub ratio_tolerance: f64,
    /// Tolerance εD on |d12| for the extremum mode, volts/volt.
    pub slope_tolerance: f64,
    /// Minimum |d11| accepted before forming the ratio, volts/volt.
    pub min_slope_guard: f64,
    /// Monotone bucket schedule mapping drift magnitude to step size.
    pub compensation_schedule: Vec<ScheduleEntry>,
    /// Compensation cycles allowed between convergences before faulting.
    pub max_iterations: u32,
    /// Reads discarded after each bias change before the retained read.
    #[serde(default)]
    pub settle_reads: u32,
    /// Consecutive in-tolerance cycles required to declare convergence.
    #[serde(default = "default_convergence_cycles")]
    pub convergence_cycles: u32,
    /// Extremum parity for the nulling mode.
    #[serde(default = "default_extremum_kind")]
    pub extremum_kind: ExtremumKind,
}

fn default_convergence_cycles() -> u32 {
    2
}

fn default_extremum_kind() -> ExtremumKind {
    ExtremumKind::Minimum
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.probe_step_dv > 0.0) {
            return Err(Error::invalid("probe_step_dv", "must be > 0"));
        }
        if !(self.ratio_tolerance > 0.0) {
            return Err(Error::invalid("ratio_tolerance", "must be > 0"));
        }
        if !(self.slope_tolerance > 0.0) {
            return Err(Error::invalid("slope_tolerance", "must be > 0"));
        }
        if !(self.min_slope_guard > 0.0) {
            return Err(Error::invalid("min_slope_guard", "must be > 0"));
        }
        if self.compensation_schedule.is_empty() {
            return Err(Error::invalid("compensation_schedule", "must not be empty"));
        }
        let mut prev = f64::NEG_INFINITY;
        for entry in &self.compensation_schedule {
            if !(entry.threshold > prev) {
                return Err(Error::invalid(
                    "compensation_schedule",
                    "thresholds must be strictly increasing",
                ));
            }
            if !(entry.step > 0.0) {
                return Err(Error::invalid("compensation_schedule", "steps must be > 0"));
            }
            prev = entry.threshold;
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations", "must be >= 1"));
        }
        if self.convergence_cycles == 0 {
            return Err(Error::invalid("convergence_cycles", "must be >= 1"));
        }
        Ok(())
    }
}

/// Direction of the classified operating-point drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftDirection {
    Left,
    Right,
    None,
}

/// Reason the controller gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultReason {
    /// Compensation cycles exceeded `max_iterations` without converging.
    MaxIterationsExceeded,
    /// The slope guard tripped on several consecutive probe cycles; the
    /// operating point sits too close to an extremum for cotangent tracking.
    PersistentSlopeGuard,
    /// A read was supplied or withheld at the wrong machine position.
    ProtocolViolation,
    /// The compensation schedule was empty at decision time.
    EmptySchedule,
}

impl FaultReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            FaultReason::MaxIterationsExceeded => "max_iterations_exceeded",
            FaultReason::PersistentSlopeGuard => "persistent_slope_guard",
            FaultReason::ProtocolViolation => "protocol_violation",
            FaultReason::EmptySchedule => "empty_schedule",
        }
    }
}

/// Output alphabet of the controller state machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlAction {
    /// Command the bias voltage (absolute volts).
    SetBias(f64),
    /// Request one monitor read; the next `step` must supply it.
    ReadMonitor,
    /// Add the given signed voltage to the bias (already folded into
    /// `base_bias`).
    ApplyCompensation(f64),
    /// The hold criterion is satisfied; probing continues afterwards.
    Done { converged: bool },
    /// The controller has latched a fault and will not recover.
    Fault(FaultReason),
}

impl ControlAction {
    /// Short tag for trace/CSV output.
    pub fn tag(&self) -> ActionTag {
        match self {
            ControlAction::SetBias(_) => ActionTag::SetBias,
            ControlAction::ReadMonitor => ActionTag::Read,
            ControlAction::ApplyCompensation(_) => ActionTag::Compensate,
            ControlAction::Done { .. } => ActionTag::Done,
            ControlAction::Fault(_) => ActionTag::Fault,
        }
    }
}

/// Compact action label carried in traces and CSV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionTag {
    SetBias,
    Read,
    Compensate,
    Done,
    Fault,
}

impl ActionTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionTag::SetBias => "set_bias",
            ActionTag::Read => "read",
            ActionTag::Compensate => "compensate",
            ActionTag::Done => "done",
            ActionTag::Fault => "fault",
        }
    }

    pub fn parse(s: &str) -> Option<ActionTag> {
        match s {
            "set_bias" => Some(ActionTag::SetBias),
            "read" => Some(ActionTag::Read),
            "compensate" => Some(ActionTag::Compensate),
            "done" => Some(ActionTag::Done),
            "fault" => Some(ActionTag::Fault),
            _ => None,
        }
    }
}

/// Which probe cycle the machine is executing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleKind {
    /// First cotangent cycle; freezes the reference ratio R1.
    Reference,
    /// Subsequent cotangent cycles; measure R2 and compare.
    Live,
    /// Two-point slope cycle of the extremum mode.
    Extremum,
}

/// Flowchart position of the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsmPosition {
    /// Fresh controller; no action emitted yet.
    Start,
    /// Between cycles (after a compensation, convergence or fault recovery
    /// decision); the next step re-commands the base bias.
    Begin { cycle: CycleKind },
    /// The bias for probe point `point` has been commanded; a read request
    /// follows.
    PointSet { cycle: CycleKind, point: u8 },
    /// A read has been requested for probe point `point`; `discards_left`
    /// settle reads will be thrown away first.
    AwaitRead {
        cycle: CycleKind,
        point: u8,
        discards_left: u32,
    },
    /// Latched fault.
    Faulted,
}

/// Complete controller state; a value advanced by [`ControllerState::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    position: FsmPosition,
    base_bias: f64,
    ref_reads: [Option<f64>; 3],
    live_reads: [Option<f64>; 3],
    ext_reads: [Option<f64>; 2],
    d11: Option<f64>,
    d12: Option<f64>,
    d13: Option<f64>,
    d2: Option<f64>,
    r1: Option<f64>,
    r2: Option<f64>,
    iteration_count: u32,
    in_tolerance_streak: u32,
    guard_trips: u32,
    fault: Option<FaultReason>,
}

impl ControllerState {
    /// Fresh controller holding the given base bias.
    pub fn new(base_bias: f64) -> Self {
        ControllerState {
            position: FsmPosition::Start,
            base_bias,
            ref_reads: [None; 3],
            live_reads: [None; 3],
            ext_reads: [None; 2],
            d11: None,
            d12: None,
            d13: None,
            d2: None,
            r1: None,
            r2: None,
            iteration_count: 0,
            in_tolerance_streak: 0,
            guard_trips: 0,
            fault: None,
        }
    }

    pub fn position(&self) -> FsmPosition {
        self.position
    }

    pub fn base_bias(&self) -> f64 {
        self.base_bias
    }

    /// Latest first-slope estimate (reference or live cycle).
    pub fn d11(&self) -> Option<f64> {
        self.d11
    }

    /// Latest extremum-mode slope.
    pub fn d12(&self) -> Option<f64> {
        self.d12
    }

    pub fn d13(&self) -> Option<f64> {
        self.d13
    }

    /// Latest second-difference estimate.
    pub fn d2(&self) -> Option<f64> {
        self.d2
    }

    /// Reference cotangent ratio frozen by the first probe cycle.
    pub fn r1(&self) -> Option<f64> {
        self.r1
    }

    /// Most recent live cotangent ratio.
    pub fn r2(&self) -> Option<f64> {
        self.r2
    }

    /// Latest ratio for display: the live value once present.
    pub fn ratio(&self) -> Option<f64> {
        self.r2.or(self.r1)
    }

    pub fn iteration_count(&self) -> u32 {
        self.iteration_count
    }

    pub fn fault_reason(&self) -> Option<FaultReason> {
        self.fault
    }

    pub fn vg1(&self) -> Option<f64> {
        self.ref_reads[0].or(self.ext_reads[0])
    }

    pub fn vg2(&self) -> Option<f64> {
        self.ref_reads[1].or(self.ext_reads[1])
    }

    pub fn vg4(&self) -> Option<f64> {
        self.ref_reads[2]
    }

    pub fn vg5(&self) -> Option<f64> {
        self.live_reads[0]
    }

    pub fn vg6(&self) -> Option<f64> {
        self.live_reads[1]
    }

    fn fault(mut self, reason: FaultReason) -> (Self, ControlAction) {
        self.position = FsmPosition::Faulted;
        self.fault = Some(reason);
        (self, ControlAction::Fault(reason))
    }

    /// Clear the read slots of a cycle and command its first probe point.
    fn enter_cycle(mut self, cycle: CycleKind) -> (Self, ControlAction) {
        match cycle {
            CycleKind::Reference => self.ref_reads = [None; 3],
            CycleKind::Live => self.live_reads = [None; 3],
            CycleKind::Extremum => self.ext_reads = [None; 2],
        }
        self.position = FsmPosition::PointSet { cycle, point: 0 };
        let bias = self.base_bias;
        (self, ControlAction::SetBias(bias))
    }

    fn points_in(cycle: CycleKind) -> u8 {
        match cycle {
            CycleKind::Reference | CycleKind::Live => 3,
            CycleKind::Extremum => 2,
        }
    }

    fn store_read(&mut self, cycle: CycleKind, point: u8, value: f64) {
        match cycle {
            CycleKind::Reference => self.ref_reads[point as usize] = Some(value),
            CycleKind::Live => self.live_reads[point as usize] = Some(value),
            CycleKind::Extremum => self.ext_reads[point as usize] = Some(value),
        }
    }

    /// Advance the machine by one step.
    ///
    /// `latest_read` must be `Some` exactly when the previous action was
    /// `ReadMonitor`; anything else latches a protocol fault.
    pub fn step(
        mut self,
        cfg: &ControllerConfig,
        latest_read: Option<f64>,
    ) -> (Self, ControlAction) {
        match (self.position, latest_read) {
            (FsmPosition::Faulted, _) => {
                let reason = self.fault.unwrap_or(FaultReason::ProtocolViolation);
                (self, ControlAction::Fault(reason))
            }
            (FsmPosition::AwaitRead { .. }, None) => self.fault(FaultReason::ProtocolViolation),
            (FsmPosition::Start, None) => {
                let cycle = match cfg.mode {
                    ControllerMode::CotangentTracking => CycleKind::Reference,
                    ControllerMode::ExtremumNulling => CycleKind::Extremum,
                };
                self.enter_cycle(cycle)
            }
            (FsmPosition::Begin { cycle }, None) => self.enter_cycle(cycle),
            (FsmPosition::PointSet { cycle, point }, None) => {
                self.position = FsmPosition::AwaitRead {
                    cycle,
                    point,
                    discards_left: cfg.settle_reads,
                };
                (self, ControlAction::ReadMonitor)
            }
            (
                FsmPosition::AwaitRead {
                    cycle,
                    point,
                    discards_left,
                },
                Some(value),
            ) => {
                if discards_left > 0 {
                    self.position = FsmPosition::AwaitRead {
                        cycle,
                        point,
                        discards_left: discards_left - 1,
                    };
                    return (self, ControlAction::ReadMonitor);
                }
                self.store_read(cycle, point, value);
                let next_point = point + 1;
                if next_point < Self::points_in(cycle) {
                    self.position = FsmPosition::PointSet {
                        cycle,
                        point: next_point,
                    };
                    let bias = self.base_bias + next_point as f64 * cfg.probe_step_dv;
                    (self, ControlAction::SetBias(bias))
                } else {
                    self.decide(cycle, cfg)
                }
            }
            // a read arrived while none was requested
            (_, Some(_)) => self.fault(FaultReason::ProtocolViolation),
        }
    }

    /// End-of-cycle computation and decision.
    fn decide(mut self, cycle: CycleKind, cfg: &ControllerConfig) -> (Self, ControlAction) {
        let dv = cfg.probe_step_dv;
        match cycle {
            CycleKind::Reference | CycleKind::Live => {
                let reads = match cycle {
                    CycleKind::Reference => &self.ref_reads,
                    _ => &self.live_reads,
                };
                let (v0, v1, v2) = match (reads[0], reads[1], reads[2]) {
                    (Some(a), Some(b), Some(c)) => (a, b, c),
                    _ => return self.fault(FaultReason::ProtocolViolation),
                };
                let d11 = match slope(v1, v0, dv) {
                    Ok(s) => s,
                    Err(_) => return self.fault(FaultReason::ProtocolViolation),
                };
                let d13 = slope(v2, v1, dv).expect("dv validated nonzero");
                let d2 = second_derivative(d11, d13, dv).expect("dv validated nonzero");
                self.d11 = Some(d11);
                self.d13 = Some(d13);
                self.d2 = Some(d2);
                let ratio = match cotangent_ratio(d11, d2, cfg.min_slope_guard) {
                    Ok(r) => r,
                    Err(_) => {
                        self.guard_trips += 1;
                        if self.guard_trips >= GUARD_TRIP_LIMIT {
                            return self.fault(FaultReason::PersistentSlopeGuard);
                        }
                        return self.enter_cycle(cycle);
                    }
                };
                self.guard_trips = 0;
                match cycle {
                    CycleKind::Reference => {
                        self.r1 = Some(ratio);
                        self.enter_cycle(CycleKind::Live)
                    }
                    _ => {
                        self.r2 = Some(ratio);
                        let r1 = self.r1.expect("reference cycle ran first");
                        match classify_drift(r1, ratio, cfg.ratio_tolerance) {
                            DriftDirection::None => {
                                self.in_tolerance_streak += 1;
                                if self.in_tolerance_streak >= cfg.convergence_cycles {
                                    self.in_tolerance_streak = 0;
                                    self.iteration_count = 0;
                                    self.position = FsmPosition::Begin {
                                        cycle: CycleKind::Live,
                                    };
                                    (self, ControlAction::Done { converged: true })
                                } else {
                                    self.enter_cycle(CycleKind::Live)
                                }
                            }
                            direction => {
                                self.in_tolerance_streak = 0;
                                if self.iteration_count >= cfg.max_iterations {
                                    return self.fault(FaultReason::MaxIterationsExceeded);
                                }
                                self.iteration_count += 1;
                                let magnitude = (ratio - r1).abs();
                                let comp = match compensation_voltage(
                                    &cfg.compensation_schedule,
                                    magnitude,
                                    direction,
                                ) {
                                    Ok(c) => c,
                                    Err(_) => return self.fault(FaultReason::EmptySchedule),
                                };
                                self.base_bias += comp;
                                self.position = FsmPosition::Begin {
                                    cycle: CycleKind::Live,
                                };
                                (self, ControlAction::ApplyCompensation(comp))
                            }
                        }
                    }
                }
            }
            CycleKind::Extremum => {
                let (v0, v1) = match (self.ext_reads[0], self.ext_reads[1]) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return self.fault(FaultReason::ProtocolViolation),
                };
                let d12 = slope(v1, v0, dv).expect("dv validated nonzero");
                self.d12 = Some(d12);
                if d12.abs() <= cfg.slope_tolerance {
                    self.iteration_count = 0;
                    self.position = FsmPosition::Begin {
                        cycle: CycleKind::Extremum,
                    };
                    (self, ControlAction::Done { converged: true })
                } else {
                    if self.iteration_count >= cfg.max_iterations {
                        return self.fault(FaultReason::MaxIterationsExceeded);
                    }
                    self.iteration_count += 1;
                    let curvature_sign = match cfg.extremum_kind {
                        ExtremumKind::Minimum => 1.0,
                        ExtremumKind::Maximum => -1.0,
                    };
                    let magnitude = d12.abs();
                    let step = match lookup_step(&cfg.compensation_schedule, magnitude) {
                        Ok(s) => s,
                        Err(_) => return self.fault(FaultReason::EmptySchedule),
                    };
                    let comp = -d12.signum() * curvature_sign * step;
                    self.base_bias += comp;
                    self.position = FsmPosition::Begin {
                        cycle: CycleKind::Extremum,
                    };
                    (self, ControlAction::ApplyCompensation(comp))
                }
            }
        }
    }
}

/// Forward-difference slope `(v_later − v_earlier)/dV`.
pub fn slope(v_later: f64, v_earlier: f64, dv: f64) -> Result<f64> {
    if dv == 0.0 {
        return Err(Error::ZeroProbeStep);
    }
    Ok((v_later - v_earlier) / dv)
}

/// Second difference `(d13 − d11)/dV`; equals the three-point stencil
/// `(Vg4 − 2·Vg2 + Vg1)/dV²` centered on the middle probe point.
pub fn second_derivative(d11: f64, d13: f64, dv: f64) -> Result<f64> {
    if dv == 0.0 {
        return Err(Error::ZeroProbeStep);
    }
    Ok((d13 - d11) / dv)
}

/// Cotangent ratio `R = d2/d1`; proportional to `cot θ` on the cosine plant
/// and invariant to common scaling of both derivatives.
pub fn cotangent_ratio(d1: f64, d2: f64, guard: f64) -> Result<f64> {
    if d1.abs() < guard {
        return Err(Error::SlopeBelowGuard { slope: d1, guard });
    }
    Ok(d2 / d1)
}

/// Compare the live ratio against the reference with tolerance `eps`.
pub fn classify_drift(r1: f64, r2: f64, eps: f64) -> DriftDirection {
    if r2 - r1 > eps {
        DriftDirection::Left
    } else if r1 - r2 > eps {
        DriftDirection::Right
    } else {
        DriftDirection::None
    }
}

fn lookup_step(schedule: &[ScheduleEntry], magnitude: f64) -> Result<f64> {
    let last = schedule.last().ok_or(Error::EmptySchedule)?;
    Ok(schedule
        .iter()
        .find(|e| e.threshold >= magnitude)
        .unwrap_or(last)
        .step)
}

/// Signed compensation voltage for a classified drift: `Left` raises the
/// bias, `Right` lowers it, `None` applies nothing.
pub fn compensation_voltage(
    schedule: &[ScheduleEntry],
    magnitude: f64,
    direction: DriftDirection,
) -> Result<f64> {
    if schedule.is_empty() {
        return Err(Error::EmptySchedule);
    }
    match direction {
        DriftDirection::None => Ok(0.0),
        DriftDirection::Left => lookup_step(schedule, magnitude),
        DriftDirection::Right => Ok(-lookup_step(schedule, magnitude)?),
    }
}
