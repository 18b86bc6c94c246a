//! Scenario file loading: a UTF-8 JSON document with sections `mzm`,
//! `drift`, `chain`, `controller` and `sim`, each mapping 1:1 onto the
//! corresponding configuration type. Unknown keys are rejected, parse
//! errors carry line/column positions, and validation failures name the
//! offending section and field.
//!
//! All quantities are in base units: meters, volts, seconds, milliwatts,
//! kelvin, radians.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use mzm_core::{ControllerConfig, DriftScenario, MzmParams, SignalChainConfig, SimConfig};

use crate::CliError;

/// A fully parsed scenario.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub mzm: MzmParams,
    pub drift: DriftScenario,
    pub chain: SignalChainConfig,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
}

impl ScenarioFile {
    /// Section-by-section validation plus cross-section consistency checks.
    pub fn validate(&self) -> Result<(), CliError> {
        let section = |name: &str, r: mzm_core::Result<()>| {
            r.map_err(|e| CliError::Validation(format!("section `{name}`: {e}")))
        };
        section("mzm", self.mzm.validate())?;
        section("drift", self.drift.validate())?;
        section("chain", self.chain.validate())?;
        section("controller", self.controller.validate())?;
        section("sim", self.sim.validate())?;

        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the check
        if !(self.mzm.input_power > 0.0) {
            return Err(CliError::Validation(
                "section `mzm`: invalid `input_power`: must be > 0 for a simulation scenario"
                    .into(),
            ));
        }
        if self.mzm.extinction_ratio.is_infinite() {
            return Err(CliError::Validation(
                "section `mzm`: invalid `extinction_ratio`: must be finite".into(),
            ));
        }
        if self.sim.duration > self.drift.duration {
            return Err(CliError::Validation(format!(
                "section `sim`: invalid `duration`: {} s exceeds drift scenario duration {} s",
                self.sim.duration, self.drift.duration
            )));
        }
        Ok(())
    }
}

/// Read and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let scenario: ScenarioFile = serde_json::from_str(&text).map_err(|e| {
        CliError::Validation(format!("{} is not a valid scenario: {e}", path.display()))
    })?;
    scenario.validate()?;
    Ok(scenario)
}
