//! Experiment driver for the `fa-isac` solvers: single runs, parameter sweeps
//! and beampattern export.

pub mod config;
pub mod table;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use fa_isac::{beampattern, bsum_solve, fpa_solve, pso_solve, BsumOptions, Error, PsoOptions, Scenario, Solution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use config::{Method, RunConfig, ScenarioConfig};
use table::{PatternRow, SweepRow};

pub const RUN_SCHEMA: &str = "fa-isac run v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoSummary {
    pub seed: u64,
    pub evaluations: usize,
    /// Global-best fitness after initialization and after every iteration.
    pub history: Vec<f64>,
}

/// Output of `run`: the scenario in SI units plus the full solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub method: Method,
    pub scenario: Scenario,
    /// Probing power sits on its threshold (always false when the threshold is 0).
    pub probing_constraint_active: bool,
    pub solution: Solution,
    pub pso: Option<PsoSummary>,
}

/// Written instead of a [`RunRecord`] when the scenario cannot be solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub schema: String,
    pub method: Method,
    pub kind: String,
    pub message: String,
}

pub fn probing_constraint_active(s: &Scenario, sol: &Solution) -> bool {
    s.probe_threshold > 0.0 && sol.probing <= s.probe_threshold + 1e-6 * s.probe_threshold.max(1.0)
}

/// Solves one scenario with `method`; `seed` only affects PSO.
pub fn solve(
    s: &Scenario,
    method: Method,
    bsum: &BsumOptions,
    pso: &PsoOptions,
    seed: u64,
) -> fa_isac::Result<(Solution, Option<PsoSummary>)> {
    match method {
        Method::Bsum => bsum_solve(s, bsum).map(|sol| (sol, None)),
        Method::Fpa => fpa_solve(s, bsum).map(|sol| (sol, None)),
        Method::Pso => {
            let opts = PsoOptions { seed, ..pso.clone() };
            let report = pso_solve(s, &opts, bsum)?;
            let summary = PsoSummary {
                seed,
                evaluations: report.evaluations,
                history: report.history,
            };
            Ok((report.solution, Some(summary)))
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidScenario { .. } => "invalid_scenario",
        Error::ProbingCeiling { .. } => "probing_ceiling",
        Error::InvalidOptions { .. } => "invalid_options",
        Error::DegenerateProbe => "degenerate_probe",
        Error::NotMmseReceiver { .. } => "not_mmse_receiver",
        Error::SurrogateInfeasible { .. } => "surrogate_infeasible",
        Error::Dimension(_) => "dimension",
    }
}

/// Runs a configuration. Solver failures come back as `Err(ErrorRecord)`;
/// configuration problems as the outer error.
pub fn run_single(cfg: &RunConfig, seed: Option<u64>) -> anyhow::Result<Result<RunRecord, ErrorRecord>> {
    let s = cfg.scenario.to_scenario().context("invalid scenario")?;
    let seed = seed.unwrap_or(cfg.pso.seed);
    Ok(match solve(&s, cfg.method, &cfg.solver, &cfg.pso, seed) {
        Ok((solution, pso)) => Ok(RunRecord {
            schema: RUN_SCHEMA.into(),
            method: cfg.method,
            probing_constraint_active: probing_constraint_active(&s, &solution),
            scenario: s,
            solution,
            pso,
        }),
        Err(e) => Err(ErrorRecord {
            schema: RUN_SCHEMA.into(),
            method: cfg.method,
            kind: error_kind(&e).into(),
            message: e.to_string(),
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    /// Probing threshold in watts.
    Pt,
    /// Number of antennas.
    M,
    /// Power budget in watts.
    Pmax,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Pt => "pt",
            Parameter::M => "m",
            Parameter::Pmax => "pmax",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub scenario: ScenarioConfig,
    pub parameter: Parameter,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub solver: BsumOptions,
    #[serde(default)]
    pub pso: PsoOptions,
    /// Output path; the `--out` flag takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl SweepSpec {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.values.is_empty() {
            bail!("`values` must not be empty");
        }
        if self.methods.is_empty() {
            bail!("`methods` must not be empty");
        }
        if self.repetitions == 0 {
            bail!("`repetitions` must be at least 1");
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            bail!("`values` contains {v}");
        }
        if self.parameter == Parameter::M {
            if let Some(v) = self.values.iter().find(|v| v.fract() != 0.0 || **v < 1.0) {
                bail!("`values`: antenna count {v} is not a positive integer");
            }
        }
        self.scenario_at(self.values[0]).context("invalid scenario")?;
        Ok(())
    }

    /// The base scenario with the swept parameter set to `value`.
    pub fn scenario_at(&self, value: f64) -> anyhow::Result<Scenario> {
        let mut cfg = self.scenario.clone();
        match self.parameter {
            Parameter::Pt => {
                cfg.probe_threshold_w = Some(value);
                cfg.probe_threshold_dbm = None;
            }
            Parameter::M => cfg.antennas = Some(value as usize),
            Parameter::Pmax => {
                cfg.max_power_w = Some(value);
                cfg.max_power_dbm = None;
            }
        }
        cfg.to_scenario()
    }

    /// Sweep points in output order: value, then method, then repetition.
    pub fn points(&self) -> Vec<(f64, Method, usize)> {
        let mut out = Vec::new();
        for &v in &self.values {
            for &m in &self.methods {
                for rep in 0..self.repetitions {
                    out.push((v, m, rep));
                }
            }
        }
        out
    }
}

fn sweep_point(spec: &SweepSpec, value: f64, method: Method, rep: usize) -> SweepRow {
    let seed = spec.seed_base.wrapping_add(rep as u64);
    let mut row = SweepRow {
        method: method.name().into(),
        parameter: spec.parameter.name().into(),
        value,
        rep,
        seed,
        sum_rate: None,
        probing: None,
        power: None,
        wall_ms: 0.0,
        iterations: 0,
        feasible: false,
        error: String::new(),
    };
    let start = Instant::now();
    let outcome = spec
        .scenario_at(value)
        .and_then(|s| solve(&s, method, &spec.solver, &spec.pso, seed).map_err(Into::into));
    row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((sol, pso)) => {
            row.sum_rate = Some(sol.sum_rate);
            row.probing = Some(sol.probing);
            row.power = Some(sol.power);
            row.iterations = pso.map_or(sol.cycles, |p| p.evaluations);
            row.feasible = sol.feasible;
        }
        Err(e) => row.error = format!("{e:#}"),
    }
    row
}

/// Runs every point of the sweep on at most `workers` threads. Rows come back
/// in [`SweepSpec::points`] order; failed points are rows with
/// `feasible = false` and an error message.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> anyhow::Result<Vec<SweepRow>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let points = spec.points();
    Ok(pool.install(|| {
        points
            .par_iter()
            .map(|&(v, m, rep)| sweep_point(spec, v, m, rep))
            .collect()
    }))
}

/// Angles from 0 to 180 degrees inclusive at `step_deg` spacing.
pub fn angle_grid(step_deg: f64) -> anyhow::Result<Vec<f64>> {
    if !(step_deg.is_finite() && step_deg > 0.0) {
        bail!("angle step must be positive, got {step_deg}");
    }
    let n = (180.0 / step_deg + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * step_deg).collect())
}

/// Radiated power of the solution's beamformers over `angles_deg`.
pub fn export_beampattern(record: &RunRecord, angles_deg: &[f64]) -> Vec<PatternRow> {
    let rad: Vec<f64> = angles_deg.iter().map(|a| a.to_radians()).collect();
    let p = beampattern(&record.solution.w, &record.solution.t, record.scenario.wavelength, &rad);
    angles_deg
        .iter()
        .zip(p)
        .map(|(&angle_deg, power_w)| PatternRow { angle_deg, power_w })
        .collect()
}
