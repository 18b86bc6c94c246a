//! Monitoring path between the modulator output and the controller: output
//! tap coupler, photodetector with additive Gaussian read noise, and the
//! AD/DA converters.
//!
//! Both converters are mid-tread (nearest-level) quantizers over
//! `2^bits` uniform levels spanning their range; out-of-range values clamp.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Configuration of the monitor/actuation chain.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalChainConfig {
    /// Fraction of the output power diverted to the monitor port, in (0, 1).
    #[serde(default = "default_tap_fraction")]
    pub tap_monitor_fraction: f64,
    /// Photodetector + amplifier gain, volts per milliwatt.
    pub detector_gain: f64,
    /// Gaussian read-noise standard deviation per read, volts. This is the
    /// effective noise after the acquisition hardware's averaging.
    #[serde(default)]
    pub detector_noise_sigma: f64,
    /// ADC resolution in bits (>= 1).
    pub adc_bits: u32,
    /// ADC input range is [0, adc_full_scale] volts.
    pub adc_full_scale: f64,
    /// DAC resolution in bits (>= 1).
    pub dac_bits: u32,
    /// DAC output range, volts.
    pub dac_min: f64,
    pub dac_max: f64,
}

fn default_tap_fraction() -> f64 {
    0.1
}

impl SignalChainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tap_monitor_fraction > 0.0 && self.tap_monitor_fraction < 1.0) {
            return Err(Error::invalid("tap_monitor_fraction", "must lie in (0, 1)"));
        }
        if !(self.detector_gain > 0.0) {
            return Err(Error::invalid("detector_gain", "must be > 0"));
        }
        if !(self.detector_noise_sigma >= 0.0) {
            return Err(Error::invalid("detector_noise_sigma", "must be >= 0"));
        }
        if !(1..=52).contains(&self.adc_bits) {
            return Err(Error::invalid("adc_bits", "must lie in [1, 52]"));
        }
        if !(self.adc_full_scale > 0.0) {
            return Err(Error::invalid("adc_full_scale", "must be > 0"));
        }
        if !(1..=52).contains(&self.dac_bits) {
            return Err(Error::invalid("dac_bits", "must lie in [1, 52]"));
        }
        if !(self.dac_min < self.dac_max) {
            return Err(Error::invalid(
                "dac_min/dac_max",
                "must satisfy dac_min < dac_max",
            ));
        }
        Ok(())
    }

    /// Split power at the tap coupler: `(through, monitor)` in milliwatts.
    ///
    /// The through port is defined as `power - monitor` so the two ports sum
    /// back to the input; tap loss belongs to the modulator insertion loss.
    pub fn tap(&self, power_mw: f64) -> (f64, f64) {
        let monitor = self.tap_monitor_fraction * power_mw;
        (power_mw - monitor, monitor)
    }

    /// Photodetector read: `gain·P + N(0, sigma)`. Draws one sample from the
    /// stream iff `detector_noise_sigma > 0`.
    pub fn detect<R: Rng + ?Sized>(&self, power_mw: f64, rng: &mut R) -> f64 {
        let mut v = self.detector_gain * power_mw;
        if self.detector_noise_sigma > 0.0 {
            let normal =
                Normal::new(0.0, self.detector_noise_sigma).expect("sigma validated nonnegative");
            v += normal.sample(rng);
        }
        v
    }

    /// ADC least significant bit, volts.
    pub fn adc_lsb(&self) -> f64 {
        self.adc_full_scale / (2f64.powi(self.adc_bits as i32) - 1.0)
    }

    /// DAC least significant bit, volts.
    pub fn dac_lsb(&self) -> f64 {
        (self.dac_max - self.dac_min) / (2f64.powi(self.dac_bits as i32) - 1.0)
    }

    /// Quantized ADC read of a voltage: clamp to [0, full scale], round to
    /// the nearest level.
    pub fn adc_read(&self, v: f64) -> f64 {
        let clamped = v.clamp(0.0, self.adc_full_scale);
        let lsb = self.adc_lsb();
        (clamped / lsb).round() * lsb
    }

    /// Quantized DAC output for a requested voltage: clamp to the output
    /// range, round to the nearest level.
    pub fn dac_write(&self, v: f64) -> f64 {
        let clamped = v.clamp(self.dac_min, self.dac_max);
        let lsb = self.dac_lsb();
        self.dac_min + ((clamped - self.dac_min) / lsb).round() * lsb
    }
}
