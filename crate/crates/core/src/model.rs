//! Line-of-sight downlink model for a linear fluid-antenna array.
//!
//! All quantities are SI: positions and wavelengths in meters, angles in
//! radians, powers in watts. Gains are linear.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A full problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Number of transmit antennas `M`.
    pub antennas: usize,
    /// Carrier wavelength.
    pub wavelength: f64,
    /// Length of the segment the antennas can move along, `D`.
    pub aperture: f64,
    /// Minimum inter-antenna spacing `D0`.
    pub min_spacing: f64,
    /// Angle of departure toward each user.
    pub user_angles: Vec<f64>,
    /// Angle of departure toward the sensing target.
    pub probe_angle: f64,
    /// Receiver noise power per user.
    pub noise_power: Vec<f64>,
    /// Transmit power budget.
    pub max_power: f64,
    /// Minimum probing power toward the target.
    pub probe_threshold: f64,
    /// Path gain at the 1 m reference distance.
    pub ref_gain: f64,
    /// Path-loss exponent.
    pub path_loss_exp: f64,
    /// Distance from the array to each user.
    pub user_distances: Vec<f64>,
}

impl Scenario {
    pub fn users(&self) -> usize {
        self.user_angles.len()
    }

    /// Upper bound on probing power: all of `max_power` in a matched beam.
    pub fn probing_ceiling(&self) -> f64 {
        self.max_power * self.antennas as f64
    }

    pub fn probe_frequency(&self) -> f64 {
        spatial_frequency(self.probe_angle, self.wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, reason: impl Into<String>) -> Error {
            Error::InvalidScenario {
                field,
                reason: reason.into(),
            }
        }
        let positive = |field: &'static str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(bad(field, format!("must be finite and > 0, got {x}")))
            }
        };
        if self.antennas == 0 {
            return Err(bad("antennas", "must be at least 1"));
        }
        let k = self.users();
        if k == 0 {
            return Err(bad("user_angles", "at least one user is required"));
        }
        if self.noise_power.len() != k {
            return Err(bad("noise_power", format!("expected {k} entries, got {}", self.noise_power.len())));
        }
        if self.user_distances.len() != k {
            return Err(bad(
                "user_distances",
                format!("expected {k} entries, got {}", self.user_distances.len()),
            ));
        }
        positive("wavelength", self.wavelength)?;
        positive("aperture", self.aperture)?;
        positive("max_power", self.max_power)?;
        positive("ref_gain", self.ref_gain)?;
        if !(self.min_spacing.is_finite() && self.min_spacing >= 0.0) {
            return Err(bad("min_spacing", "must be finite and >= 0"));
        }
        if !(self.path_loss_exp.is_finite() && self.path_loss_exp >= 0.0) {
            return Err(bad("path_loss_exp", "must be finite and >= 0"));
        }
        if !(self.probe_threshold.is_finite() && self.probe_threshold >= 0.0) {
            return Err(bad("probe_threshold", "must be finite and >= 0"));
        }
        for &n in &self.noise_power {
            positive("noise_power", n)?;
        }
        for &d in &self.user_distances {
            positive("user_distances", d)?;
        }
        let in_range = |x: f64| x.is_finite() && (0.0..=PI).contains(&x);
        if !self.user_angles.iter().all(|&a| in_range(a)) {
            return Err(bad("user_angles", "angles must lie in [0, pi]"));
        }
        if !in_range(self.probe_angle) {
            return Err(bad("probe_angle", "angle must lie in [0, pi]"));
        }
        let span = (self.antennas - 1) as f64 * self.min_spacing;
        if span > self.aperture * (1.0 + 1e-12) {
            return Err(bad(
                "aperture",
                format!("{} m cannot hold {} antennas at spacing {} m", self.aperture, self.antennas, self.min_spacing),
            ));
        }
        Ok(())
    }

    /// Checks validity plus the matched-beam probing ceiling.
    pub fn validate_feasible(&self) -> Result<()> {
        self.validate()?;
        let ceiling = self.probing_ceiling();
        if self.probe_threshold > ceiling {
            return Err(Error::ProbingCeiling {
                threshold: self.probe_threshold,
                ceiling,
            });
        }
        Ok(())
    }
}

/// Ready-made instances matching the standard simulation setup:
/// `lambda = 1 cm`, `D = 10 lambda`, `D0 = lambda / 2`, probe at 60 degrees,
/// noise -80 dBm, `g0 = -40 dB`, `alpha = 2.8`, users at 100 m.
pub mod presets {
    use super::Scenario;

    pub const WAVELENGTH: f64 = 0.01;

    pub fn standard(antennas: usize, user_angles_deg: &[f64], max_power: f64, probe_threshold: f64) -> Scenario {
        let k = user_angles_deg.len();
        Scenario {
            antennas,
            wavelength: WAVELENGTH,
            aperture: 10.0 * WAVELENGTH,
            min_spacing: WAVELENGTH / 2.0,
            user_angles: user_angles_deg.iter().map(|a| a.to_radians()).collect(),
            probe_angle: 60f64.to_radians(),
            noise_power: vec![1e-11; k],
            max_power,
            probe_threshold,
            ref_gain: 1e-4,
            path_loss_exp: 2.8,
            user_distances: vec![100.0; k],
        }
    }

    /// Underloaded case, users at 90 and 120 degrees.
    pub fn two_user(antennas: usize, max_power: f64, probe_threshold: f64) -> Scenario {
        standard(antennas, &[90.0, 120.0], max_power, probe_threshold)
    }

    /// Overloaded case with eight users.
    pub fn eight_user(antennas: usize, max_power: f64, probe_threshold: f64) -> Scenario {
        standard(
            antennas,
            &[10.0, 30.0, 80.0, 90.0, 120.0, 130.0, 150.0, 170.0],
            max_power,
            probe_threshold,
        )
    }
}

/// Antenna position vector, ascending positions in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Apv(pub Vec<f64>);

impl Apv {
    pub fn new(positions: Vec<f64>) -> Self {
        Apv(positions)
    }

    /// `m` antennas evenly spread over `[0, aperture]`.
    pub fn uniform(m: usize, aperture: f64) -> Self {
        if m == 1 {
            return Apv(vec![0.0]);
        }
        let step = aperture / (m - 1) as f64;
        Apv((0..m).map(|i| i as f64 * step).collect())
    }

    /// Conventional fixed array: `t_m = (m - 1) * lambda / 2`.
    pub fn half_wavelength(m: usize, wavelength: f64) -> Self {
        Apv((0..m).map(|i| i as f64 * wavelength / 2.0).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        Apv(v.iter().copied().collect())
    }

    /// Smallest gap between neighbours (`inf` for a single antenna).
    pub fn min_gap(&self) -> f64 {
        self.0
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Box and spacing feasibility with absolute slack `tol`.
    pub fn is_feasible(&self, min_spacing: f64, aperture: f64, tol: f64) -> bool {
        let (Some(&first), Some(&last)) = (self.0.first(), self.0.last()) else {
            return false;
        };
        first >= -tol && last <= aperture + tol && self.min_gap() >= min_spacing - tol
    }
}

/// `v = (2 pi / lambda) cos(theta)`.
pub fn spatial_frequency(theta: f64, wavelength: f64) -> f64 {
    2.0 * PI / wavelength * theta.cos()
}

/// `a(t, theta)[m] = exp(j v t_m)`.
pub fn steering_vector(t: &Apv, theta: f64, wavelength: f64) -> DVector<C64> {
    steering_from_frequency(t, spatial_frequency(theta, wavelength))
}

pub fn steering_from_frequency(t: &Apv, v: f64) -> DVector<C64> {
    DVector::from_iterator(t.len(), t.0.iter().map(|&x| C64::from_polar(1.0, v * x)))
}

/// Per-user transmit beamformers, stored as the columns of an `M x K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers(pub DMatrix<C64>);

impl Beamformers {
    pub fn zeros(antennas: usize, users: usize) -> Self {
        Beamformers(DMatrix::zeros(antennas, users))
    }

    pub fn antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn users(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    /// `sum_k ||w_k||^2`.
    pub fn total_power(&self) -> f64 {
        self.0.norm_squared()
    }

    /// Transmit covariance `R_w = sum_k w_k w_k^H`.
    pub fn covariance(&self) -> DMatrix<C64> {
        &self.0 * self.0.adjoint()
    }

    /// Stacked `MK` vector `[w_1; ...; w_K]`.
    pub fn stacked(&self) -> DVector<C64> {
        DVector::from_column_slice(self.0.as_slice())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

// Serialized as `[user][antenna] -> [re, im]`.
impl Serialize for Beamformers {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let cols: Vec<Vec<[f64; 2]>> = self
            .0
            .column_iter()
            .map(|c| c.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        cols.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Beamformers {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let cols: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let users = cols.len();
        let antennas = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != antennas) {
            return Err(serde::de::Error::custom("beamformer columns differ in length"));
        }
        let data: Vec<C64> = cols.into_iter().flatten().map(|[re, im]| C64::new(re, im)).collect();
        Ok(Beamformers(DMatrix::from_vec(antennas, users, data)))
    }
}

/// LoS channels `h_k = delta_k a(t, theta_k)` as columns of `M x K`.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub h: DMatrix<C64>,
    /// Amplitude gain per user.
    pub delta: Vec<f64>,
    /// Spatial frequency per user.
    pub freq: Vec<f64>,
}

impl ChannelSet {
    pub fn users(&self) -> usize {
        self.h.ncols()
    }

    /// `G[k, i] = h_k^H w_i`.
    pub fn gains(&self, w: &Beamformers) -> DMatrix<C64> {
        self.h.adjoint() * &w.0
    }
}

/// Amplitude gain `sqrt(g0 d^-alpha)`; the path-loss product is a power gain.
pub fn propagation_amplitude(ref_gain: f64, distance: f64, path_loss_exp: f64) -> f64 {
    (ref_gain * distance.powf(-path_loss_exp)).sqrt()
}

pub fn build_channels(s: &Scenario, t: &Apv) -> ChannelSet {
    let k = s.users();
    let delta: Vec<f64> = s
        .user_distances
        .iter()
        .map(|&d| propagation_amplitude(s.ref_gain, d, s.path_loss_exp))
        .collect();
    let freq: Vec<f64> = s
        .user_angles
        .iter()
        .map(|&th| spatial_frequency(th, s.wavelength))
        .collect();
    let mut h = DMatrix::zeros(t.len(), k);
    for (j, (&dl, &v)) in delta.iter().zip(&freq).enumerate() {
        h.set_column(j, &(steering_from_frequency(t, v) * C64::from(dl)));
    }
    ChannelSet { h, delta, freq }
}

/// SINR of every user.
pub fn sinr(ch: &ChannelSet, w: &Beamformers, noise: &[f64]) -> Vec<f64> {
    let g = ch.gains(w);
    (0..ch.users())
        .map(|k| {
            let signal = g[(k, k)].norm_sqr();
            let total: f64 = g.row(k).iter().map(|z| z.norm_sqr()).sum();
            signal / (total - signal + noise[k])
        })
        .collect()
}

/// `sum_k log2(1 + gamma_k)` in bits/s/Hz.
pub fn sum_rate(ch: &ChannelSet, w: &Beamformers, noise: &[f64]) -> f64 {
    rate_from_sinr(&sinr(ch, w, noise))
}

pub fn rate_from_sinr(gamma: &[f64]) -> f64 {
    gamma.iter().map(|g| g.ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

/// Power radiated toward the direction with steering vector `a`: `sum_k |a^H w_k|^2`.
pub fn probing_power_along(w: &Beamformers, a: &DVector<C64>) -> f64 {
    (w.0.adjoint() * a).norm_squared()
}

pub fn probing_power(w: &Beamformers, t: &Apv, theta: f64, wavelength: f64) -> f64 {
    probing_power_along(w, &steering_vector(t, theta, wavelength))
}

/// Radiated power at each angle of `grid`.
pub fn beampattern(w: &Beamformers, t: &Apv, wavelength: f64, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&theta| probing_power(w, t, theta, wavelength))
        .collect()
}
