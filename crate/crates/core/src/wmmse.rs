//! Weighted-MMSE surrogate of the sum rate and its closed-form auxiliary updates.
//!
//! The surrogate is
//!
//! ```text
//! F(w, t, u, rho) = sum_k [rho_k e_k - ln rho_k - 1] + K
//! e_k = |1 - u_k^* h_k^H w_k|^2 + sum_{i != k} |u_k|^2 |h_k^H w_i|^2 + |u_k|^2 sigma_k^2
//! ```
//!
//! With the constants above, minimizing over `u` then `rho` gives exactly
//! `F = K - ln(2) * sum_rate`, so every block step that lowers `F` raises the
//! sum rate by the same amount.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Beamformers, ChannelSet, C64};

/// WMMSE receivers `u` and weights `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxState {
    pub u: Vec<[f64; 2]>,
    pub rho: Vec<f64>,
}

impl AuxState {
    pub fn new(u: &[C64], rho: Vec<f64>) -> Self {
        AuxState {
            u: u.iter().map(|z| [z.re, z.im]).collect(),
            rho,
        }
    }

    pub fn receivers(&self) -> Vec<C64> {
        self.u.iter().map(|&[re, im]| C64::new(re, im)).collect()
    }

    pub fn users(&self) -> usize {
        self.rho.len()
    }
}

/// Data of the `w`-block: `sum_k [w_k^H A w_k - 2 Re(b_k^H w_k)]`.
#[derive(Debug, Clone)]
pub struct QuadraticData {
    /// Hermitian PSD, `M x M`.
    pub a: DMatrix<C64>,
    /// Linear terms `b_k` as columns, `M x K`.
    pub b: DMatrix<C64>,
}

impl QuadraticData {
    pub fn value(&self, w: &Beamformers) -> f64 {
        let aw = &self.a * &w.0;
        let quad: f64 = w.0.iter().zip(aw.iter()).map(|(x, y)| (x.conj() * y).re).sum();
        let lin: f64 = self.b.iter().zip(w.0.iter()).map(|(b, x)| (b.conj() * x).re).sum();
        quad - 2.0 * lin
    }

    /// Wirtinger-style gradient `2 (A w_k - b_k)`, columnwise.
    pub fn gradient(&self, w: &Beamformers) -> DMatrix<C64> {
        (&self.a * &w.0 - &self.b) * C64::from(2.0)
    }
}

/// MMSE receivers `u_k = h_k^H w_k / (sum_i |h_k^H w_i|^2 + sigma_k^2)`.
pub fn update_u(ch: &ChannelSet, w: &Beamformers, noise: &[f64]) -> Vec<C64> {
    let g = ch.gains(w);
    (0..ch.users())
        .map(|k| {
            let total: f64 = g.row(k).iter().map(|z| z.norm_sqr()).sum();
            g[(k, k)] / (total + noise[k])
        })
        .collect()
}

/// `rho_k = 1 / (1 - u_k^* h_k^H w_k)`; equals `1 + SINR_k` for MMSE `u`.
pub fn update_rho(ch: &ChannelSet, w: &Beamformers, u: &[C64]) -> Result<Vec<f64>> {
    let g = ch.gains(w);
    u.iter()
        .enumerate()
        .map(|(k, uk)| {
            let z = C64::new(1.0, 0.0) - uk.conj() * g[(k, k)];
            // For the MMSE receiver the product is real; a stray imaginary part means misuse.
            let tol = 1e-9 * z.norm().max(1.0);
            if z.re <= 0.0 || z.im.abs() > tol {
                return Err(Error::NotMmseReceiver {
                    user: k,
                    denominator: z.re,
                });
            }
            Ok(1.0 / z.re)
        })
        .collect()
}

/// Runs both closed-form updates.
pub fn update_aux(ch: &ChannelSet, w: &Beamformers, noise: &[f64]) -> Result<AuxState> {
    let u = update_u(ch, w, noise);
    let rho = update_rho(ch, w, &u)?;
    Ok(AuxState::new(&u, rho))
}

/// Per-user MSE `e_k`.
pub fn mse(ch: &ChannelSet, w: &Beamformers, u: &[C64], noise: &[f64]) -> Vec<f64> {
    let g = ch.gains(w);
    (0..ch.users())
        .map(|k| {
            let uk = u[k];
            let mut e = (C64::new(1.0, 0.0) - uk.conj() * g[(k, k)]).norm_sqr();
            for i in 0..ch.users() {
                if i != k {
                    e += uk.norm_sqr() * g[(k, i)].norm_sqr();
                }
            }
            e + uk.norm_sqr() * noise[k]
        })
        .collect()
}

/// The full surrogate `F`, natural log, constants included.
pub fn objective(ch: &ChannelSet, w: &Beamformers, aux: &AuxState, noise: &[f64]) -> f64 {
    let u = aux.receivers();
    let e = mse(ch, w, &u, noise);
    let k = aux.users() as f64;
    e.iter()
        .zip(&aux.rho)
        .map(|(ek, rk)| rk * ek - rk.ln() - 1.0)
        .sum::<f64>()
        + k
}

/// The part of `F` that does not depend on `w` (or on `t`).
pub fn objective_constant(aux: &AuxState, noise: &[f64]) -> f64 {
    let u = aux.receivers();
    aux.rho
        .iter()
        .zip(&u)
        .zip(noise)
        .map(|((r, uk), n)| r * (1.0 + uk.norm_sqr() * n) - r.ln() - 1.0)
        .sum::<f64>()
        + aux.users() as f64
}

/// `A = sum_k rho_k |u_k|^2 h_k h_k^H`, `b_k = rho_k u_k h_k`.
///
/// The noise contribution `rho_k |u_k|^2 sigma_k^2` is constant in `w` and is
/// kept in [`objective_constant`] rather than in `A`.
pub fn assemble_quadratic(ch: &ChannelSet, aux: &AuxState) -> QuadraticData {
    let u = aux.receivers();
    let m = ch.h.nrows();
    let k = ch.users();
    let mut scaled = DMatrix::zeros(m, k);
    let mut b = DMatrix::zeros(m, k);
    for j in 0..k {
        let h = ch.h.column(j);
        let weight = (aux.rho[j] * u[j].norm_sqr()).sqrt();
        scaled.set_column(j, &(h * C64::from(weight)));
        b.set_column(j, &(h * (u[j] * aux.rho[j])));
    }
    let mut a = &scaled * scaled.adjoint();
    // Exact Hermitian symmetry for the downstream Cholesky.
    for i in 0..m {
        a[(i, i)].im = 0.0;
        for j in 0..i {
            a[(i, j)] = a[(j, i)].conj();
        }
    }
    QuadraticData { a, b }
}
