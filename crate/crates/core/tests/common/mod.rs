//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

pub mod oracles;

use fa_isac::model::presets;
use fa_isac::{Apv, Beamformers, Scenario, C64};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const LAMBDA: f64 = presets::WAVELENGTH;

/// Standard geometry with random users, power budget and probing threshold
/// below the matched-beam ceiling.
pub fn random_scenario(rng: &mut ChaCha8Rng, max_m: usize, max_k: usize) -> Scenario {
    let m = rng.gen_range(2..=max_m);
    let k = rng.gen_range(1..=max_k);
    let angles: Vec<f64> = (0..k).map(|_| rng.gen_range(5.0..175.0)).collect();
    let pmax = rng.gen_range(0.2..2.0);
    let pt = rng.gen_range(0.0..0.9) * pmax * m as f64;
    let mut s = presets::standard(m, &angles, pmax, pt);
    s.probe_angle = rng.gen_range(20f64..160.0).to_radians();
    s.user_distances = (0..k).map(|_| rng.gen_range(50.0..200.0)).collect();
    s
}

pub fn random_w(rng: &mut ChaCha8Rng, m: usize, k: usize, scale: f64) -> Beamformers {
    Beamformers(DMatrix::from_fn(m, k, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
    }))
}

pub fn random_cvec(rng: &mut ChaCha8Rng, m: usize) -> DVector<C64> {
    DVector::from_fn(m, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Uniformly distributed point of the chain polytope.
pub fn random_chain(rng: &mut ChaCha8Rng, m: usize, d0: f64, len: f64) -> Apv {
    let slack = len - (m - 1) as f64 * d0;
    let mut x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=slack)).collect();
    x.sort_by(f64::total_cmp);
    Apv(x.iter().enumerate().map(|(i, v)| v + i as f64 * d0).collect())
}

/// Random Hermitian PSD matrix of the given rank.
pub fn random_cov(rng: &mut ChaCha8Rng, m: usize, rank: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(m, rank, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    &g * g.adjoint()
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
