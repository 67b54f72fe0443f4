//! Beamformer block: proximal distance algorithm over the power ball and the
//! (non-convex) probing-power constraint.
//!
//! Each iteration majorizes the squared distances to both sets by the
//! distances to their projections, which leaves an unconstrained quadratic
//! with the closed-form minimizer
//! `w_k = (A + 2 rho I)^{-1} (rho (P_bs(z)_k + P_t(z)_k) + b_k)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{probing_power_along, Beamformers, C64};
use crate::wmmse::QuadraticData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdaOptions {
    /// Initial penalty weight.
    pub initial_penalty: f64,
    /// Multiplicative penalty growth, > 1.
    pub growth: f64,
    /// Iterations between penalty increases.
    pub growth_period: usize,
    pub max_iter: usize,
    /// Relative iterate change that counts as converged.
    pub tol: f64,
    /// Constraint slack accepted at convergence, relative to `max(1, bound)`.
    pub feas_tol: f64,
}

impl Default for PdaOptions {
    fn default() -> Self {
        PdaOptions {
            initial_penalty: 1.0,
            growth: 1.5,
            growth_period: 10,
            max_iter: 500,
            tol: 1e-8,
            feas_tol: 1e-6,
        }
    }
}

impl PdaOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| {
            Err(Error::InvalidOptions {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.initial_penalty > 0.0) {
            return bad("initial_penalty", "must be > 0");
        }
        if !(self.growth > 1.0) {
            return bad("growth", "must be > 1");
        }
        if self.growth_period == 0 {
            return bad("growth_period", "must be >= 1");
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be >= 1");
        }
        if !(self.tol > 0.0) || !(self.feas_tol > 0.0) {
            return bad("tol", "tolerances must be > 0");
        }
        Ok(())
    }
}

/// Euclidean projection onto `{w : sum_k ||w_k||^2 <= pmax}`.
pub fn project_power(w: &Beamformers, pmax: f64) -> Beamformers {
    let p = w.total_power();
    if p <= pmax {
        return w.clone();
    }
    Beamformers(&w.0 * C64::from((pmax / p).sqrt()))
}

/// Euclidean projection onto `{w : sum_k |a^H w_k|^2 >= pt}`.
///
/// Infeasible inputs map to `(I - mu a a^H)^{-1} w_k`, applied through the
/// rank-one Woodbury form `w_k + mu / (1 - mu ||a||^2) a (a^H w_k)`.
pub fn project_probe(w: &Beamformers, a: &DVector<C64>, pt: f64) -> Result<Beamformers> {
    let s = probing_power_along(w, a);
    if s >= pt {
        return Ok(w.clone());
    }
    if s == 0.0 {
        return Err(Error::DegenerateProbe);
    }
    let norm2 = a.norm_squared();
    let mu = 1.0 / norm2 - (s / (norm2 * norm2 * pt)).sqrt();
    // 1 - mu ||a||^2 = sqrt(s / pt), strictly in (0, 1) here.
    let gain = mu / (1.0 - mu * norm2);
    let ahw = w.0.adjoint() * a; // K x 1, entries conj(a^H w_k)
    let mut out = w.0.clone();
    for (k, c) in ahw.iter().enumerate() {
        out.column_mut(k).axpy(C64::from(gain) * c.conj(), a, C64::new(1.0, 0.0));
    }
    Ok(Beamformers(out))
}

/// Probe projection with the measure-zero `w ⟂ a` case nudged along `a`.
fn project_probe_nudged(w: &Beamformers, a: &DVector<C64>, pt: f64) -> Beamformers {
    match project_probe(w, a, pt) {
        Ok(p) => p,
        Err(_) => {
            let mut nudged = w.0.clone();
            for mut col in nudged.column_iter_mut() {
                col.axpy(C64::from(1e-8), a, C64::new(1.0, 0.0));
            }
            project_probe(&Beamformers(nudged), a, pt).expect("nudged input has a component along a")
        }
    }
}

/// Maps `w` to a point satisfying both constraints exactly.
///
/// The probing component (along `a`) is set first, then whatever power is
/// left over goes to the orthogonal component. Small violations produce small
/// corrections. Requires `pt <= pmax ||a||^2`.
pub fn restore_feasibility(w: &Beamformers, a: &DVector<C64>, pmax: f64, pt: f64) -> Beamformers {
    let scaled = project_power(w, pmax);
    if probing_power_along(&scaled, a) >= pt {
        return scaled;
    }
    let norm2 = a.norm_squared();
    let lifted = project_probe_nudged(w, a, pt);
    let along_power = pt / norm2;
    let total = lifted.total_power();
    if total <= pmax {
        return lifted;
    }
    // Split each column into a-part and orthogonal part, shrink the latter.
    let coeffs = lifted.0.adjoint() * a; // conj(a^H w_k)
    let mut along = DMatrix::zeros(lifted.antennas(), lifted.users());
    for (k, c) in coeffs.iter().enumerate() {
        along.set_column(k, &(a * (c.conj() / norm2)));
    }
    let ortho = &lifted.0 - &along;
    let ortho_power = ortho.norm_squared();
    let budget = (pmax - along_power).max(0.0);
    let factor = if ortho_power > 0.0 {
        (budget / ortho_power).sqrt().min(1.0)
    } else {
        0.0
    };
    let mut out = along + ortho * C64::from(factor);
    // Guard the last ulp on the power side.
    let p = out.norm_squared();
    if p > pmax {
        out *= C64::from((pmax / p).sqrt());
    }
    Beamformers(out)
}

pub fn is_feasible(w: &Beamformers, a: &DVector<C64>, pmax: f64, pt: f64, tol: f64) -> bool {
    w.total_power() <= pmax + tol * pmax.max(1.0) && probing_power_along(w, a) >= pt - tol * pt.max(1.0)
}

#[derive(Debug, Clone)]
pub struct PdaOutcome {
    pub w: Beamformers,
    /// Value of `sum_k [w_k^H A w_k - 2 Re(b_k^H w_k)]` at `w`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The initial point was kept because the iterates did not improve on it.
    pub kept_initial: bool,
    pub final_penalty: f64,
}

fn factor(a: &DMatrix<C64>, penalty: f64) -> Cholesky<C64, Dyn> {
    let mut shifted = a.clone();
    for i in 0..shifted.nrows() {
        shifted[(i, i)] += C64::from(2.0 * penalty);
    }
    Cholesky::new(shifted).expect("A + 2 rho I is Hermitian positive definite")
}

/// Runs the proximal distance iteration from `w_init`.
///
/// `probe` is the steering vector toward the sensing target. The result is
/// always feasible (the scenario must satisfy `pt <= pmax ||probe||^2`), and
/// never worse than `w_init` when `w_init` is itself feasible.
pub fn pda_solve(
    quad: &QuadraticData,
    probe: &DVector<C64>,
    pmax: f64,
    pt: f64,
    opts: &PdaOptions,
    w_init: &Beamformers,
) -> Result<PdaOutcome> {
    opts.validate()?;
    let m = quad.a.nrows();
    if w_init.antennas() != m || probe.len() != m || quad.b.shape() != w_init.0.shape() {
        return Err(Error::Dimension(format!(
            "A is {m}x{m}, b is {:?}, w is {:?}, probe has {}",
            quad.b.shape(),
            w_init.0.shape(),
            probe.len()
        )));
    }

    let mut penalty = opts.initial_penalty;
    let mut chol = factor(&quad.a, penalty);
    let mut prev = w_init.0.clone();
    let mut cur = w_init.0.clone();
    let mut converged = false;
    let mut iterations = 0;

    for i in 1..=opts.max_iter {
        iterations = i;
        let beta = (i as f64 - 1.0) / (i as f64 + 2.0);
        let z = Beamformers(&cur + (&cur - &prev) * C64::from(beta));
        let y = project_power(&z, pmax).0 + project_probe_nudged(&z, probe, pt).0;
        let rhs = y * C64::from(penalty) + &quad.b;
        let next = chol.solve(&rhs);

        let change = (&next - &cur).norm() / cur.norm().max(f64::MIN_POSITIVE);
        prev = std::mem::replace(&mut cur, next);

        if i % opts.growth_period == 0 {
            penalty *= opts.growth;
            chol = factor(&quad.a, penalty);
        }
        if change < opts.tol && is_feasible(&Beamformers(cur.clone()), probe, pmax, pt, opts.feas_tol) {
            converged = true;
            break;
        }
    }

    let candidate = restore_feasibility(&Beamformers(cur), probe, pmax, pt);
    let cand_value = quad.value(&candidate);
    let init_feasible = is_feasible(w_init, probe, pmax, pt, 0.0);
    let init_value = quad.value(w_init);
    let (w, objective, kept_initial) = if init_feasible && init_value <= cand_value {
        (w_init.clone(), init_value, true)
    } else {
        (candidate, cand_value, false)
    };
    Ok(PdaOutcome {
        w,
        objective,
        iterations,
        converged,
        kept_initial,
        final_penalty: penalty,
    })
}
