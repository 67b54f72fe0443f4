//! Comparison methods: a conventional half-wavelength array, and particle
//! swarm search over antenna positions.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_channels, probing_power_along, steering_vector, sum_rate, Apv, Scenario};
use crate::pda::pda_solve;
use crate::qcqp::project_chain;
use crate::solver::{bsum_solve_at, init_beamformers, BsumOptions, Solution};
use crate::wmmse::{assemble_quadratic, update_aux};

/// Fixed array positions `(m - 1) lambda / 2`.
pub fn fpa_positions(s: &Scenario) -> Apv {
    Apv::half_wavelength(s.antennas, s.wavelength)
}

/// BSUM with the positions pinned to the half-wavelength array.
pub fn fpa_solve(s: &Scenario, opts: &BsumOptions) -> Result<Solution> {
    bsum_solve_at(s, &opts.clone().fixed_positions(), &fpa_positions(s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoOptions {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
    /// `(u, rho, w)` cycles per fitness evaluation.
    pub inner_cycles: usize,
    /// Velocity clamp as a fraction of the aperture.
    pub max_velocity: f64,
    /// Penalty subtracted from the fitness of probing-infeasible particles.
    pub infeasible_penalty: f64,
    /// Evaluate particles on the rayon pool.
    pub parallel: bool,
}

impl Default for PsoOptions {
    fn default() -> Self {
        PsoOptions {
            particles: 50,
            iterations: 100,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            seed: 0,
            inner_cycles: 10,
            max_velocity: 0.2,
            infeasible_penalty: 1e3,
            parallel: false,
        }
    }
}

impl PsoOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| {
            Err(Error::InvalidOptions {
                field,
                reason: reason.to_string(),
            })
        };
        if self.particles == 0 {
            return bad("particles", "must be >= 1");
        }
        if self.iterations == 0 {
            return bad("iterations", "must be >= 1");
        }
        if self.inner_cycles == 0 {
            return bad("inner_cycles", "must be >= 1");
        }
        if !(self.inertia > 0.0 && self.inertia <= 1.0) {
            return bad("inertia", "must lie in (0, 1]");
        }
        if !(self.cognitive >= 0.0 && self.social >= 0.0) {
            return bad("cognitive", "acceleration weights must be >= 0");
        }
        if !(self.max_velocity > 0.0) {
            return bad("max_velocity", "must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PsoReport {
    /// Best particle refined by a full fixed-position BSUM run.
    pub solution: Solution,
    pub best_positions: Apv,
    /// Global-best fitness after initialization and after every iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub wall_ms: f64,
}

/// Sum rate after a few beamformer cycles at fixed positions.
pub fn fitness(s: &Scenario, t: &Apv, bsum: &BsumOptions, cycles: usize, penalty: f64) -> Result<f64> {
    let mut w = init_beamformers(s, t);
    let ch = build_channels(s, t);
    let probe = steering_vector(t, s.probe_angle, s.wavelength);
    for _ in 0..cycles {
        let aux = update_aux(&ch, &w, &s.noise_power)?;
        let quad = assemble_quadratic(&ch, &aux);
        w = pda_solve(&quad, &probe, s.max_power, s.probe_threshold, &bsum.pda, &w)?.w;
    }
    let rate = sum_rate(&ch, &w, &s.noise_power);
    let feasible = probing_power_along(&w, &probe) >= s.probe_threshold * (1.0 - 1e-9);
    Ok(if feasible { rate } else { rate - penalty })
}

fn random_chain(rng: &mut ChaCha8Rng, s: &Scenario) -> Apv {
    let m = s.antennas;
    let slack = s.aperture - m.saturating_sub(1) as f64 * s.min_spacing;
    let mut x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=slack)).collect();
    x.sort_by(f64::total_cmp);
    Apv(x.iter().enumerate().map(|(i, v)| v + i as f64 * s.min_spacing).collect())
}

/// Particle swarm over positions. Particle 0 starts at the half-wavelength
/// array, the others uniformly over the chain polytope; velocities start at 0.
pub fn pso_solve(s: &Scenario, opts: &PsoOptions, bsum: &BsumOptions) -> Result<PsoReport> {
    s.validate_feasible()?;
    opts.validate()?;
    let start = Instant::now();
    let m = s.antennas;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut pos: Vec<Apv> = Vec::with_capacity(opts.particles);
    pos.push(project_chain(fpa_positions(s).as_slice(), s.min_spacing, s.aperture));
    while pos.len() < opts.particles {
        pos.push(random_chain(&mut rng, s));
    }
    let mut vel = vec![vec![0.0; m]; opts.particles];

    let evaluate = |batch: &[Apv]| -> Result<Vec<f64>> {
        let f = |t: &Apv| fitness(s, t, bsum, opts.inner_cycles, opts.infeasible_penalty);
        if opts.parallel {
            batch.par_iter().map(f).collect()
        } else {
            batch.iter().map(f).collect()
        }
    };

    let mut fit = evaluate(&pos)?;
    let mut evaluations = fit.len();
    let mut pbest = pos.clone();
    let mut pbest_fit = fit.clone();
    let argmax = |v: &[f64]| {
        v.iter()
            .enumerate()
            .fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
    };
    let g = argmax(&pbest_fit);
    let mut gbest = pbest[g].clone();
    let mut gbest_fit = pbest_fit[g];
    let mut history = vec![gbest_fit];
    let vmax = opts.max_velocity * s.aperture;

    for _ in 0..opts.iterations {
        for (p, v) in vel.iter_mut().enumerate() {
            for d in 0..m {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let x = pos[p].0[d];
                v[d] = (opts.inertia * v[d]
                    + opts.cognitive * r1 * (pbest[p].0[d] - x)
                    + opts.social * r2 * (gbest.0[d] - x))
                    .clamp(-vmax, vmax);
            }
            let moved: Vec<f64> = pos[p].0.iter().zip(v.iter()).map(|(x, dv)| x + dv).collect();
            pos[p] = project_chain(&moved, s.min_spacing, s.aperture);
        }
        fit = evaluate(&pos)?;
        evaluations += fit.len();
        for p in 0..opts.particles {
            if fit[p] > pbest_fit[p] {
                pbest_fit[p] = fit[p];
                pbest[p] = pos[p].clone();
            }
        }
        let g = argmax(&pbest_fit);
        if pbest_fit[g] > gbest_fit {
            gbest_fit = pbest_fit[g];
            gbest = pbest[g].clone();
        }
        history.push(gbest_fit);
    }

    let solution = bsum_solve_at(s, &bsum.clone().fixed_positions(), &gbest)?;
    Ok(PsoReport {
        solution,
        best_positions: gbest,
        history,
        evaluations,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
