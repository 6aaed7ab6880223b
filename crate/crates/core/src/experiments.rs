//! Monte Carlo runs over channel realizations, summaries, sweeps and the CSV /
//! gnuplot artifacts written for them.
//!
//! Trial `t` draws its channel from `ChaCha8Rng::seed_from_u64(base_seed + t)`,
//! stream 0. The CSI error uses stream 1 of the same seed and each optimizer
//! stream 2, so every optimizer and every robustness variant sees the same
//! true channels.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{db_to_linear, perturb_csi, sample_channels, ChannelSet};
use crate::error::{Result, RisError};
use crate::numerics::{CMatrix, CVector};
use crate::objective::{channel_rate_bits, PhaseVector};
use crate::optimizer::{OptimizerRegistry, RateOptimizer};
use crate::projections::project_discrete_phases;
use crate::scenario::{elements_per_side, Robustness, Scenario};
use crate::trace::{IterationUnit, OptimizerTrace};

pub const TARGET_FRACTION: f64 = 0.95;

const CHANNEL_STREAM: u64 = 0;
const CSI_STREAM: u64 = 1;
const OPTIMIZER_STREAM: u64 = 2;

fn trial_rng(base_seed: u64, trial: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(trial as u64));
    rng.set_stream(stream);
    rng
}

/// Per-optimizer result of a scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub optimizer: String,
    pub unit: IterationUnit,
    /// RIS elements seen by the optimizer (0 for `direct_only`).
    pub n_ris: usize,
    pub trials: usize,
    /// Mean rate per trace entry, entry 0 being the starting point.
    pub mean_rates: Vec<f64>,
    pub mean_steps: Vec<f64>,
    pub final_mean_rate: f64,
    /// Trace entries needed to reach 95% of the final mean rate.
    pub iterations_to_target: usize,
    /// The same in conventional iterations.
    pub conventional_to_target: usize,
    /// Mean wall-clock seconds per run.
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: String,
    pub summaries: Vec<RunSummary>,
}

impl ScenarioResult {
    pub fn summary(&self, optimizer: &str) -> Option<&RunSummary> {
        self.summaries.iter().find(|s| s.optimizer == optimizer)
    }
}

/// Element-wise mean of traces; shorter traces are held at their last value.
pub fn mean_trace(traces: &[Vec<f64>]) -> Result<Vec<f64>> {
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    if traces.is_empty() || len == 0 {
        return Err(RisError::Empty("trace set"));
    }
    let n = traces.len() as f64;
    Ok((0..len)
        .map(|i| traces.iter().map(|t| t[i.min(t.len() - 1)]).sum::<f64>() / n)
        .collect())
}

/// First index at which the mean trace reaches `fraction` of its final value.
pub fn iterations_to_fraction(traces: &[Vec<f64>], fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(RisError::InvalidParameter(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let mean = mean_trace(traces)?;
    let target = fraction * mean[mean.len() - 1];
    Ok(mean.iter().position(|&r| r >= target).unwrap_or(mean.len() - 1))
}

/// Conventional iterations behind `index` trace entries. An AO run reports
/// its rate only after whole outer iterations, so it is charged at least one.
pub fn conventional_iterations(unit: IterationUnit, index: usize, n_ris: usize) -> usize {
    match unit {
        IterationUnit::Iteration => index,
        IterationUnit::Outer => unit.conventional(index.max(1), n_ris),
    }
}

struct TrialRun {
    trace: OptimizerTrace,
    seconds: f64,
    n_ris: usize,
}

fn quantize(theta: &CVector, bits: Option<u32>) -> Result<CVector> {
    match bits {
        None => Ok(theta.clone()),
        Some(b) => Ok(project_discrete_phases(&PhaseVector::from_raw(theta.clone(), 1.0), b)?.into_vector()),
    }
}

fn run_trial(
    scenario: &Scenario,
    optimizers: &[Box<dyn RateOptimizer>],
    trial: usize,
) -> Result<Vec<TrialRun>> {
    let noise = db_to_linear(scenario.noise_db);
    let pt = db_to_linear(scenario.transmit_power_db);
    let truth = sample_channels(
        &scenario.geometry,
        noise,
        scenario.direct_blocked,
        &mut trial_rng(scenario.base_seed, trial, CHANNEL_STREAM),
    )?;
    let estimate = match scenario.robustness.csi_sigma2 {
        Some(s2) => perturb_csi(&truth, s2, &mut trial_rng(scenario.base_seed, trial, CSI_STREAM))?,
        None => truth.clone(),
    };
    let rob: Robustness = scenario.robustness;
    optimizers
        .iter()
        .map(|opt| {
            let true_ch: ChannelSet = opt.prepare(&truth);
            let est_ch = opt.prepare(&estimate);
            let probe = |theta: &CVector, q: &CMatrix| channel_rate_bits(&true_ch, &quantize(theta, rob.discrete_bits)?, q);
            let mut rng = trial_rng(scenario.base_seed, trial, OPTIMIZER_STREAM);
            let start = Instant::now();
            let trace = if rob.is_ideal() {
                opt.optimize(&est_ch, pt, &mut rng, None)?
            } else {
                opt.optimize(&est_ch, pt, &mut rng, Some(&probe))?
            };
            Ok(TrialRun {
                trace,
                seconds: start.elapsed().as_secs_f64(),
                n_ris: true_ch.n_ris(),
            })
        })
        .collect()
}

/// Runs every optimizer of the scenario over all trials.
pub fn run_scenario(scenario: &Scenario, registry: &OptimizerRegistry) -> Result<ScenarioResult> {
    scenario.validate(registry)?;
    let optimizers = scenario
        .optimizers
        .iter()
        .map(|n| registry.create(n, &scenario.settings))
        .collect::<Result<Vec<_>>>()?;
    let per_trial: Vec<Vec<TrialRun>> = (0..scenario.trials)
        .into_par_iter()
        .map(|t| run_trial(scenario, &optimizers, t))
        .collect::<Result<_>>()?;

    let summaries = optimizers
        .iter()
        .enumerate()
        .map(|(i, opt)| {
            let runs: Vec<&TrialRun> = per_trial.iter().map(|t| &t[i]).collect();
            let rates: Vec<Vec<f64>> = runs.iter().map(|r| r.trace.rates()).collect();
            let steps: Vec<Vec<f64>> = runs
                .iter()
                .map(|r| r.trace.records.iter().map(|x| x.step_size).collect())
                .collect();
            let mean_rates = mean_trace(&rates)?;
            let idx = iterations_to_fraction(&rates, TARGET_FRACTION)?;
            let unit = opt.iteration_unit();
            let n_ris = runs[0].n_ris;
            Ok(RunSummary {
                optimizer: opt.name().to_string(),
                unit,
                n_ris,
                trials: runs.len(),
                final_mean_rate: mean_rates[mean_rates.len() - 1],
                mean_steps: mean_trace(&steps)?,
                mean_rates,
                iterations_to_target: idx,
                conventional_to_target: conventional_iterations(unit, idx, n_ris),
                mean_seconds: runs.iter().map(|r| r.seconds).sum::<f64>() / runs.len() as f64,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScenarioResult {
        scenario: scenario.name.clone(),
        summaries,
    })
}

pub const TRACE_HEADER: &str = "iteration,iteration_unit,mean_rate_bits,step_size";
pub const SUMMARY_HEADER: &str =
    "optimizer,iteration_unit,trials,n_ris,final_mean_rate_bits,iterations_to_95,conventional_iterations_to_95";

pub fn trace_csv(summary: &RunSummary) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for (i, (r, s)) in summary.mean_rates.iter().zip(&summary.mean_steps).enumerate() {
        let _ = writeln!(out, "{i},{},{r},{s}", summary.unit);
    }
    out
}

pub fn summary_csv(result: &ScenarioResult) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in &result.summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.optimizer, s.unit, s.trials, s.n_ris, s.final_mean_rate, s.iterations_to_target, s.conventional_to_target
        );
    }
    out
}

/// Wall-clock figures, kept apart from `summary.csv` so that file stays
/// reproducible byte for byte.
pub fn timing_csv(result: &ScenarioResult) -> String {
    let mut out = String::from("optimizer,mean_seconds_per_run\n");
    for s in &result.summaries {
        let _ = writeln!(out, "{},{}", s.optimizer, s.mean_seconds);
    }
    out
}

/// Gnuplot script overlaying every optimizer's mean trace against
/// conventional iterations.
pub fn plot_script(result: &ScenarioResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "set datafile separator ','");
    let _ = writeln!(out, "set terminal pngcairo size 900,600");
    let _ = writeln!(out, "set output 'rate.png'");
    let _ = writeln!(out, "set title '{}'", result.scenario);
    let _ = writeln!(out, "set xlabel 'iteration'");
    let _ = writeln!(out, "set ylabel 'average achievable rate [bit/s/Hz]'");
    let _ = writeln!(out, "set key bottom right");
    let _ = writeln!(out, "set grid");
    let parts: Vec<String> = result
        .summaries
        .iter()
        .map(|s| {
            let x = match s.unit {
                IterationUnit::Iteration => "1".to_string(),
                IterationUnit::Outer => format!("($1*{})", s.n_ris + 1),
            };
            format!("'{0}/trace.csv' skip 1 using {x}:3 with linespoints title '{0}'", s.optimizer)
        })
        .collect();
    let _ = writeln!(out, "plot {}", parts.join(", \\\n     "));
    out
}

/// Writes `summary.csv`, `timing.csv`, `plot.gp` and `<optimizer>/trace.csv`.
pub fn write_outputs(result: &ScenarioResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.csv"), summary_csv(result))?;
    fs::write(dir.join("timing.csv"), timing_csv(result))?;
    fs::write(dir.join("plot.gp"), plot_script(result))?;
    for s in &result.summaries {
        let sub = dir.join(&s.optimizer);
        fs::create_dir_all(&sub)?;
        fs::write(sub.join("trace.csv"), trace_csv(s))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Frequency in Hz or element count.
    pub value: f64,
    pub n_ris: usize,
    pub direct_blocked: bool,
    pub optimizer: String,
    pub final_mean_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Frequency,
    Elements,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Frequency => "frequency_hz",
            SweepKind::Elements => "n_ris",
        }
    }
}

fn collect_points(out: &mut Vec<SweepPoint>, value: f64, blocked: bool, result: &ScenarioResult) {
    for s in &result.summaries {
        out.push(SweepPoint {
            value,
            n_ris: s.n_ris,
            direct_blocked: blocked,
            optimizer: s.optimizer.clone(),
            final_mean_rate: s.final_mean_rate,
        });
    }
}

/// Runs the base scenario at each frequency with a square RIS of side
/// `aperture` meters at half-wavelength spacing, with the direct link present
/// and blocked.
pub fn frequency_sweep(
    base: &Scenario,
    frequencies: &[f64],
    aperture: f64,
    registry: &OptimizerRegistry,
) -> Result<Vec<SweepPoint>> {
    if !(aperture > 0.0) {
        return Err(RisError::InvalidParameter(format!("aperture must be positive, got {aperture}")));
    }
    let mut out = Vec::new();
    for &f in frequencies {
        if !(f > 0.0) || !f.is_finite() {
            return Err(RisError::InvalidParameter(format!("frequency must be positive, got {f}")));
        }
        let side = elements_per_side(aperture, f);
        if side == 0 {
            return Err(RisError::InvalidParameter(format!(
                "a {aperture} m aperture holds no element at {f} Hz"
            )));
        }
        for blocked in [false, true] {
            let mut s = base.clone();
            s.set_frequency(f);
            s.geometry.ris_rows = side;
            s.geometry.ris_cols = side;
            s.direct_blocked = blocked;
            collect_points(&mut out, f, blocked, &run_scenario(&s, registry)?);
        }
    }
    Ok(out)
}

/// Runs the base scenario for each square element count.
pub fn nris_sweep(base: &Scenario, counts: &[usize], registry: &OptimizerRegistry) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for &n in counts {
        let side = (n as f64).sqrt().round() as usize;
        if side * side != n || n == 0 {
            return Err(RisError::InvalidParameter(format!("element counts must be positive squares, got {n}")));
        }
        let mut s = base.clone();
        s.geometry.ris_rows = side;
        s.geometry.ris_cols = side;
        collect_points(&mut out, n as f64, s.direct_blocked, &run_scenario(&s, registry)?);
    }
    Ok(out)
}

pub fn sweep_csv(kind: SweepKind, points: &[SweepPoint]) -> String {
    let mut out = format!("{},n_ris,direct_link,optimizer,final_mean_rate_bits\n", kind.as_str());
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.value,
            p.n_ris,
            if p.direct_blocked { "blocked" } else { "present" },
            p.optimizer,
            p.final_mean_rate
        );
    }
    out
}

pub fn sweep_plot_script(kind: SweepKind, points: &[SweepPoint]) -> String {
    let mut series: Vec<(String, bool)> = Vec::new();
    for p in points {
        let key = (p.optimizer.clone(), p.direct_blocked);
        if !series.contains(&key) {
            series.push(key);
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "set datafile separator ','");
    let _ = writeln!(out, "set terminal pngcairo size 900,600");
    let _ = writeln!(out, "set output 'sweep.png'");
    let _ = writeln!(out, "set xlabel '{}'", kind.as_str());
    let _ = writeln!(out, "set ylabel 'average achievable rate [bit/s/Hz]'");
    let _ = writeln!(out, "set key bottom right");
    let _ = writeln!(out, "set grid");
    let parts: Vec<String> = series
        .iter()
        .map(|(opt, blocked)| {
            let link = if *blocked { "blocked" } else { "present" };
            format!(
                "'sweep.csv' skip 1 using 1:(strcol(3) eq '{link}' && strcol(4) eq '{opt}' ? $5 : 1/0) \
                 with linespoints title '{opt}, direct {link}'"
            )
        })
        .collect();
    let _ = writeln!(out, "plot {}", parts.join(", \\\n     "));
    out
}

pub fn write_sweep(kind: SweepKind, points: &[SweepPoint], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep.csv"), sweep_csv(kind, points))?;
    fs::write(dir.join("plot.gp"), sweep_plot_script(kind, points))?;
    Ok(())
}
