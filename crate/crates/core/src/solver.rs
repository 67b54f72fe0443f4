//! Block successive upper-bound minimization over `(u, rho, w, t)`.
//!
//! One outer cycle runs the closed-form `u` and `rho` updates, the PDA
//! beamformer step and (unless positions are fixed) the EPG position step.
//! Every block step is non-increasing in `F`, and after the `(u, rho)` update
//! `F = K - ln(2) * sum_rate`, so the sum rate is non-decreasing per cycle.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::epg::{epg_solve, EpgOptions};
use crate::error::{Error, Result};
use crate::model::{
    build_channels, probing_power_along, steering_vector, sum_rate, Apv, Beamformers, Scenario, C64,
};
use crate::pda::{pda_solve, restore_feasibility, PdaOptions};
use crate::wmmse::{assemble_quadratic, objective, update_aux, AuxState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BsumOptions {
    pub max_outer: usize,
    /// Relative sum-rate change below which a cycle counts as stalled.
    pub outer_tol: f64,
    /// Consecutive stalled cycles before stopping.
    pub patience: usize,
    pub pda: PdaOptions,
    pub epg: EpgOptions,
    /// `false` keeps the positions fixed (conventional array).
    pub enable_apv: bool,
}

impl Default for BsumOptions {
    fn default() -> Self {
        BsumOptions {
            max_outer: 100,
            outer_tol: 1e-5,
            patience: 3,
            pda: PdaOptions::default(),
            epg: EpgOptions::default(),
            enable_apv: true,
        }
    }
}

impl BsumOptions {
    pub fn fixed_positions(mut self) -> Self {
        self.enable_apv = false;
        self
    }
}

/// Metrics after one outer cycle (cycle 0 is the starting point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub cycle: usize,
    /// `F` at the end of the cycle, with that cycle's `(u, rho)`.
    pub objective: f64,
    pub sum_rate: f64,
    pub probing: f64,
    pub power: f64,
    pub elapsed_ms: f64,
    pub pda_iterations: usize,
    pub epg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub w: Beamformers,
    pub t: Apv,
    pub aux: AuxState,
    pub sum_rate: f64,
    pub probing: f64,
    pub power: f64,
    pub feasible: bool,
    pub converged: bool,
    pub cycles: usize,
    pub wall_ms: f64,
    pub trace: Vec<TraceEntry>,
}

/// Slack used when judging a returned solution feasible.
pub const POWER_SLACK: f64 = 1e-6;
pub const SPACING_SLACK: f64 = 1e-9;

pub fn solution_feasible(s: &Scenario, w: &Beamformers, t: &Apv) -> bool {
    let probe = probing_power_along(w, &steering_vector(t, s.probe_angle, s.wavelength));
    w.total_power() <= s.max_power + POWER_SLACK
        && probe >= s.probe_threshold - POWER_SLACK * s.probe_threshold.max(1.0)
        && t.len() == s.antennas
        && t.is_feasible(s.min_spacing, s.aperture, SPACING_SLACK)
}

/// Starting positions: uniform over the whole aperture.
pub fn init_positions(s: &Scenario) -> Apv {
    Apv::uniform(s.antennas, s.aperture)
}

/// Matched filters `h_k / ||h_k||` sharing the budget equally, made feasible
/// for the probing constraint.
pub fn init_beamformers(s: &Scenario, t: &Apv) -> Beamformers {
    let ch = build_channels(s, t);
    let k = s.users();
    let mut w = DMatrix::zeros(s.antennas, k);
    for j in 0..k {
        let h = ch.h.column(j);
        w.set_column(j, &(h / C64::from(h.norm())));
    }
    w *= C64::from((s.max_power / k as f64).sqrt());
    let a = steering_vector(t, s.probe_angle, s.wavelength);
    restore_feasibility(&Beamformers(w), &a, s.max_power, s.probe_threshold)
}

/// The BSUM starting point. It depends on the scenario only.
pub fn init_solution(s: &Scenario) -> (Beamformers, Apv) {
    let t = init_positions(s);
    (init_beamformers(s, &t), t)
}

pub fn bsum_solve(s: &Scenario, opts: &BsumOptions) -> Result<Solution> {
    s.validate_feasible()?;
    let t = init_positions(s);
    bsum_solve_at(s, opts, &t)
}

/// Runs BSUM from explicit starting positions (beamformers from [`init_beamformers`]).
pub fn bsum_solve_at(s: &Scenario, opts: &BsumOptions, t_init: &Apv) -> Result<Solution> {
    s.validate_feasible()?;
    if t_init.len() != s.antennas {
        return Err(Error::Dimension(format!(
            "{} starting positions for {} antennas",
            t_init.len(),
            s.antennas
        )));
    }
    let w_init = init_beamformers(s, t_init);
    bsum_solve_from(s, opts, t_init.clone(), w_init)
}

pub fn bsum_solve_from(s: &Scenario, opts: &BsumOptions, t_init: Apv, w_init: Beamformers) -> Result<Solution> {
    s.validate_feasible()?;
    opts.pda.validate()?;
    opts.epg.validate()?;
    if opts.max_outer == 0 || opts.patience == 0 || !(opts.outer_tol > 0.0) {
        return Err(Error::InvalidOptions {
            field: "max_outer",
            reason: "max_outer, patience and outer_tol must be positive".into(),
        });
    }
    let start = Instant::now();
    let noise = &s.noise_power;
    let mut w = w_init;
    let mut t = t_init;

    let metrics = |w: &Beamformers, t: &Apv| {
        let ch = build_channels(s, t);
        let rate = sum_rate(&ch, w, noise);
        let probe = probing_power_along(w, &steering_vector(t, s.probe_angle, s.wavelength));
        (rate, probe, w.total_power())
    };

    let (rate0, probe0, power0) = metrics(&w, &t);
    let mut trace = vec![TraceEntry {
        cycle: 0,
        objective: s.users() as f64 - std::f64::consts::LN_2 * rate0,
        sum_rate: rate0,
        probing: probe0,
        power: power0,
        elapsed_ms: 0.0,
        pda_iterations: 0,
        epg_iterations: 0,
    }];
    let mut prev_rate = rate0;
    let mut stalled = 0;
    let mut converged = false;
    let mut cycles = 0;

    for cycle in 1..=opts.max_outer {
        cycles = cycle;
        let ch = build_channels(s, &t);
        let aux = update_aux(&ch, &w, noise)?;
        let quad = assemble_quadratic(&ch, &aux);
        let probe_dir = steering_vector(&t, s.probe_angle, s.wavelength);
        let pda = pda_solve(&quad, &probe_dir, s.max_power, s.probe_threshold, &opts.pda, &w)?;
        w = pda.w;

        let mut epg_iterations = 0;
        if opts.enable_apv {
            let epg = epg_solve(&t, &w, &aux, s, &opts.epg)?;
            epg_iterations = epg.iterations;
            t = epg.t;
        }

        let (rate, probe, power) = metrics(&w, &t);
        trace.push(TraceEntry {
            cycle,
            objective: objective(&build_channels(s, &t), &w, &aux, noise),
            sum_rate: rate,
            probing: probe,
            power,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            pda_iterations: pda.iterations,
            epg_iterations,
        });

        let rel = (rate - prev_rate).abs() / prev_rate.abs().max(1e-12);
        prev_rate = rate;
        if rel < opts.outer_tol {
            stalled += 1;
            if stalled >= opts.patience {
                converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    let ch = build_channels(s, &t);
    let aux = update_aux(&ch, &w, noise)?;
    let (rate, probe, power) = metrics(&w, &t);
    Ok(Solution {
        feasible: solution_feasible(s, &w, &t),
        w,
        t,
        aux,
        sum_rate: rate,
        probing: probe,
        power,
        converged,
        cycles,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        trace,
    })
}
