//! Electro-optic device model: phase modulation in a lithium niobate
//! waveguide and the Mach-Zehnder intensity transfer curve.
//!
//! The linear electro-optic effect shifts the local refractive index by
//! `-(1/2) n^3 r E`, which integrates over the mode/electrode overlap to an
//! effective-index change `-(1/2) n^3 r (Γ/g) V` and a phase shift
//! `-(π/λ0) n^3 r (Γ/g) V L`. The half-wave voltage follows by setting the
//! phase magnitude to π.
//!
//! The interferometer output is the raised-cosine law
//!
//! ```text
//! P_out = P_in · IL · (1 + m·cos θ) / 2,   θ = π·V/Vπ + θ0 + φ_drift
//! ```
//!
//! with modulation depth `m = (ER − 1)/(ER + 1)` so the max/min power ratio
//! over one period equals the extinction ratio `ER` exactly.

use std::f64::consts::PI;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Physical constants of the electro-optic phase shifter section.
///
/// All lengths in meters, the electro-optic coefficient in m/V; the overlap
/// factor is the dimensionless field/mode overlap integral in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectroOpticParams {
    /// Vacuum wavelength, meters.
    pub wavelength: f64,
    /// Bulk refractive index.
    pub bulk_index: f64,
    /// Electro-optic coefficient, meters per volt.
    pub eo_coefficient: f64,
    /// Electrode/mode overlap factor, dimensionless in (0, 1].
    pub overlap_factor: f64,
    /// Electrode gap, meters.
    pub electrode_gap: f64,
    /// Interaction length, meters.
    pub interaction_length: f64,
}

impl ElectroOpticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength", "must be > 0"));
        }
        if !(self.bulk_index > 0.0) {
            return Err(Error::invalid("bulk_index", "must be > 0"));
        }
        if !(self.eo_coefficient > 0.0) {
            return Err(Error::invalid("eo_coefficient", "must be > 0"));
        }
        if !(self.overlap_factor > 0.0 && self.overlap_factor <= 1.0) {
            return Err(Error::invalid("overlap_factor", "must lie in (0, 1]"));
        }
        if !(self.electrode_gap > 0.0) {
            return Err(Error::invalid("electrode_gap", "must be > 0"));
        }
        if !(self.interaction_length > 0.0) {
            return Err(Error::invalid("interaction_length", "must be > 0"));
        }
        Ok(())
    }

    /// Local index change under an applied field (V/m): `-(1/2) n³ r E`.
    pub fn local_index_shift(&self, applied_field: f64) -> f64 {
        -0.5 * self.bulk_index.powi(3) * self.eo_coefficient * applied_field
    }

    /// Effective-index change for a drive voltage: `-(1/2) n³ r (Γ/g) V`.
    pub fn effective_index_shift(&self, voltage: f64) -> f64 {
        -0.5 * self.bulk_index.powi(3)
            * self.eo_coefficient
            * (self.overlap_factor / self.electrode_gap)
            * voltage
    }

    /// Accumulated phase shift in radians: `(2π/λ0)·Δn_eff·L`.
    pub fn phase_shift(&self, voltage: f64) -> f64 {
        2.0 * PI / self.wavelength * self.effective_index_shift(voltage) * self.interaction_length
    }

    /// Half-wave voltage `Vπ = λ0·g / (n³·r·Γ·L)`; the drive that produces a
    /// phase shift of magnitude π.
    pub fn half_wave_voltage(&self) -> f64 {
        self.wavelength * self.electrode_gap
            / (self.bulk_index.powi(3)
                * self.eo_coefficient
                * self.overlap_factor
                * self.interaction_length)
    }
}

/// Lumped Mach-Zehnder modulator plant parameters.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MzmParams {
    /// Half-wave voltage, volts.
    pub v_pi: f64,
    /// Optical input power, milliwatts.
    pub input_power: f64,
    /// Insertion loss as a linear power ratio in (0, 1].
    #[serde(default = "default_insertion_loss")]
    pub insertion_loss: f64,
    /// Linear extinction ratio (max/min power over one period), >= 1.
    #[serde(default = "default_extinction_ratio")]
    pub extinction_ratio: f64,
    /// Fabrication phase offset, radians.
    #[serde(default)]
    pub intrinsic_phase: f64,
}

fn default_insertion_loss() -> f64 {
    0.5
}

fn default_extinction_ratio() -> f64 {
    100.0
}

impl MzmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_pi > 0.0) {
            return Err(Error::invalid("v_pi", "must be > 0"));
        }
        if !(self.input_power >= 0.0) {
            return Err(Error::invalid("input_power", "must be >= 0"));
        }
        if !(self.insertion_loss > 0.0 && self.insertion_loss <= 1.0) {
            return Err(Error::invalid("insertion_loss", "must lie in (0, 1]"));
        }
        if !(self.extinction_ratio >= 1.0) {
            return Err(Error::invalid("extinction_ratio", "must be >= 1"));
        }
        if !self.intrinsic_phase.is_finite() {
            return Err(Error::invalid("intrinsic_phase", "must be finite"));
        }
        Ok(())
    }

    /// Interference modulation depth `m = (ER − 1)/(ER + 1)`.
    pub fn modulation_depth(&self) -> f64 {
        if self.extinction_ratio.is_infinite() {
            1.0
        } else {
            (self.extinction_ratio - 1.0) / (self.extinction_ratio + 1.0)
        }
    }

    /// Total interferometer phase at a bias voltage plus external drift.
    pub fn phase(&self, bias_voltage: f64, drift_phase: f64) -> f64 {
        PI * bias_voltage / self.v_pi + self.intrinsic_phase + drift_phase
    }

    /// Output optical power in milliwatts at the given bias and drift phase.
    ///
    /// Periodic in the bias voltage with period `2·v_pi`; the max/min ratio
    /// over one period equals `extinction_ratio`.
    pub fn transmission(&self, bias_voltage: f64, drift_phase: f64) -> f64 {
        let theta = self.phase(bias_voltage, drift_phase);
        let m = self.modulation_depth();
        self.input_power * self.insertion_loss * (1.0 + m * theta.cos()) / 2.0
    }

    /// The bias voltage of the first quadrature point (`θ = π/2`) above zero
    /// bias, ignoring drift.
    pub fn quadrature_bias(&self) -> f64 {
        (PI / 2.0 - self.intrinsic_phase) * self.v_pi / PI
    }
}

/// Convert milliwatts to dBm. Errors on nonpositive power.
pub fn mw_to_dbm(power_mw: f64) -> Result<f64> {
    if power_mw > 0.0 {
        Ok(10.0 * power_mw.log10())
    } else {
        Err(Error::NonPositivePower(power_mw))
    }
}

/// Convert a dBm level to milliwatts.
pub fn dbm_to_mw(level_dbm: f64) -> f64 {
    10f64.powf(level_dbm / 10.0)
}
