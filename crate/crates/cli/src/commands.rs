//! Command implementations: simulate, compare, calibrate, metrics.

use std::fmt;
use std::path::Path;

use mzm_core::{metrics, run, Metrics, SimTrace};

use crate::csvio::{read_trace_csv, write_atomic, write_trace_csv};
use crate::scenario::{load_scenario, ScenarioFile};
use crate::CliError;

/// Bias points evaluated by the calibration sweep.
const CALIBRATION_SWEEP_POINTS: usize = 2001;

/// Result of one `simulate` invocation.
#[derive(Debug, Clone, Copy)]
pub struct SimSummary {
    pub metrics: Metrics,
    pub faulted: bool,
}

impl fmt::Display for SimSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fluctuation_db={:.6} max_percent_deviation={:.6} faulted={}",
            self.metrics.fluctuation_db, self.metrics.max_percent_deviation, self.faulted
        )
    }
}

/// Result of one `compare` invocation.
#[derive(Debug, Clone, Copy)]
pub struct CompareSummary {
    pub open: SimSummary,
    pub closed: SimSummary,
}

impl CompareSummary {
    /// Closed-loop to open-loop fluctuation ratio.
    pub fn fluctuation_ratio(&self) -> f64 {
        self.closed.metrics.fluctuation_db / self.open.metrics.fluctuation_db
    }
}

impl fmt::Display for CompareSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "open_loop: {}", self.open)?;
        writeln!(f, "closed_loop: {}", self.closed)?;
        write!(
            f,
            "closed_to_open_fluctuation_ratio={:.6}",
            self.fluctuation_ratio()
        )
    }
}

/// Report of a `calibrate` sweep.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationReport {
    pub v_pi_estimate: f64,
    pub quadrature_bias: f64,
    pub extinction_ratio_estimate: f64,
    pub sweep_step: f64,
    pub dac_lsb: f64,
}

impl fmt::Display for CalibrationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "estimated_v_pi={:.6}", self.v_pi_estimate)?;
        writeln!(f, "quadrature_bias={:.6}", self.quadrature_bias)?;
        writeln!(
            f,
            "extinction_ratio_estimate={:.4}",
            self.extinction_ratio_estimate
        )?;
        writeln!(f, "sweep_step={:.6}", self.sweep_step)?;
        write!(f, "dac_lsb={:.6e}", self.dac_lsb)
    }
}

fn run_scenario(scenario: &ScenarioFile, seed: u64, open_loop: bool) -> Result<SimTrace, CliError> {
    let mut sim = scenario.sim;
    sim.seed = seed;
    sim.open_loop = open_loop;
    run(
        &scenario.drift,
        &scenario.mzm,
        &scenario.chain,
        &scenario.controller,
        &sim,
    )
    .map_err(CliError::from)
}

fn summarize(trace: &SimTrace) -> Result<SimSummary, CliError> {
    Ok(SimSummary {
        metrics: metrics(trace)?,
        faulted: trace.faulted,
    })
}

/// Run one scenario, write the trace CSV, return the summary.
pub fn cmd_simulate(
    scenario_path: &Path,
    out_path: &Path,
    seed_override: Option<u64>,
    open_loop_flag: bool,
) -> Result<SimSummary, CliError> {
    let scenario = load_scenario(scenario_path)?;
    let seed = seed_override.unwrap_or(scenario.sim.seed);
    let open_loop = open_loop_flag || scenario.sim.open_loop;
    let trace = run_scenario(&scenario, seed, open_loop)?;
    write_trace_csv(out_path, &trace)?;
    summarize(&trace)
}

/// Run a scenario open- and closed-loop with the same seed; write both
/// traces and a summary file into `out_dir`.
pub fn cmd_compare(
    scenario_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<CompareSummary, CliError> {
    let scenario = load_scenario(scenario_path)?;
    let seed = seed_override.unwrap_or(scenario.sim.seed);
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let open_trace = run_scenario(&scenario, seed, true)?;
    let closed_trace = run_scenario(&scenario, seed, false)?;
    write_trace_csv(&out_dir.join("open.csv"), &open_trace)?;
    write_trace_csv(&out_dir.join("closed.csv"), &closed_trace)?;
    let summary = CompareSummary {
        open: summarize(&open_trace)?,
        closed: summarize(&closed_trace)?,
    };
    write_atomic(&out_dir.join("summary.txt"), &format!("{summary}\n"))?;
    Ok(summary)
}

/// Sweep the bias over [0, 2·Vπ] with zero drift and locate the transfer
/// extrema. Reads go through the DAC and ADC but use noise-free (averaged)
/// detection; extrema positions are taken as the midpoint of the tied
/// plateau around each extremum, so the estimate lands within half a sweep
/// step plus one DAC step of the true value.
pub fn cmd_calibrate(scenario_path: &Path) -> Result<CalibrationReport, CliError> {
    let scenario = load_scenario(scenario_path)?;
    let mzm = &scenario.mzm;
    let chain = &scenario.chain;
    let hi = 2.0 * mzm.v_pi;
    let n = CALIBRATION_SWEEP_POINTS;
    let sweep_step = hi / (n - 1) as f64;

    let mut biases = Vec::with_capacity(n);
    let mut reads = Vec::with_capacity(n);
    for i in 0..n {
        let commanded = hi * i as f64 / (n - 1) as f64;
        let applied = chain.dac_write(commanded);
        let power = mzm.transmission(applied, 0.0);
        let (_through, monitor) = chain.tap(power);
        let read = chain.adc_read(chain.detector_gain * monitor);
        biases.push(applied);
        reads.push(read);
    }

    let locate = |target: f64| -> f64 {
        let first = reads.iter().position(|&v| v == target).expect("present");
        let mut last = first;
        while last + 1 < reads.len() && reads[last + 1] == target {
            last += 1;
        }
        (biases[first] + biases[last]) / 2.0
    };
    let min_read = reads.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_read = reads.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let v_min = locate(min_read);
    let v_max = locate(max_read);

    Ok(CalibrationReport {
        v_pi_estimate: (v_min - v_max).abs(),
        quadrature_bias: (v_min + v_max) / 2.0,
        extinction_ratio_estimate: max_read / min_read,
        sweep_step,
        dac_lsb: chain.dac_lsb(),
    })
}

/// Recompute power metrics from a trace CSV.
pub fn cmd_metrics(csv_path: &Path) -> Result<Metrics, CliError> {
    let trace = read_trace_csv(csv_path)?;
    metrics(&trace).map_err(CliError::from)
}

/// Metric line printed by the `metrics` command.
pub fn format_metrics(m: &Metrics) -> String {
    let phase = if m.residual_phase_rms.is_nan() {
        "residual_phase_rms=n/a settling_time_s=n/a".to_string()
    } else {
        format!(
            "residual_phase_rms={:.6} settling_time_s={:.3}",
            m.residual_phase_rms, m.settling_time
        )
    };
    format!(
        "fluctuation_db={:.6} max_percent_deviation={:.6} {phase}",
        m.fluctuation_db, m.max_percent_deviation
    )
}
