//! Antenna-position block: extrapolated projected gradient on `F(t)` at fixed
//! beamformers and WMMSE auxiliaries.
//!
//! Writing `w_k = a_k + j b_k`, `g_k = cos(v_k t)`, `q_k = sin(v_k t)`,
//!
//! ```text
//! |a^H(t, theta_k) w_i|^2  = g_k^T C_i g_k + q_k^T C_i q_k + 2 g_k^T D_i q_k
//! a^H(t, theta_k) w_k      = (g_k^T a_k + q_k^T b_k) + j (g_k^T b_k - q_k^T a_k)
//! ```
//!
//! with `C_i = a_i a_i^T + b_i b_i^T` and `D_i = a_i b_i^T - b_i a_i^T`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_channels, steering_vector, Apv, Beamformers, Scenario};
use crate::qcqp::{build_surrogate, project_feasible};
use crate::wmmse::{objective, AuxState};

/// Real and imaginary parts of each beamformer with their outer-product forms.
#[derive(Debug, Clone)]
pub struct WSplit {
    pub re: Vec<DVector<f64>>,
    pub im: Vec<DVector<f64>>,
    /// `C_k`, symmetric PSD.
    pub c: Vec<DMatrix<f64>>,
    /// `D_k`, antisymmetric.
    pub d: Vec<DMatrix<f64>>,
}

impl WSplit {
    pub fn new(w: &Beamformers) -> Self {
        let mut out = WSplit {
            re: vec![],
            im: vec![],
            c: vec![],
            d: vec![],
        };
        for col in w.0.column_iter() {
            let a = col.map(|z| z.re);
            let b = col.map(|z| z.im);
            out.c.push(&a * a.transpose() + &b * b.transpose());
            out.d.push(&a * b.transpose() - &b * a.transpose());
            out.re.push(a);
            out.im.push(b);
        }
        out
    }
}

/// `cos(v_k t_m)` and `sin(v_k t_m)` per user.
#[derive(Debug, Clone)]
pub struct TrigState {
    pub cos: Vec<DVector<f64>>,
    pub sin: Vec<DVector<f64>>,
}

impl TrigState {
    pub fn new(t: &Apv, freq: &[f64]) -> Self {
        let (cos, sin) = freq
            .iter()
            .map(|&v| {
                let c = DVector::from_iterator(t.len(), t.0.iter().map(|x| (v * x).cos()));
                let s = DVector::from_iterator(t.len(), t.0.iter().map(|x| (v * x).sin()));
                (c, s)
            })
            .unzip();
        TrigState { cos, sin }
    }
}

/// `f[k, i] = |a^H(t, theta_k) w_i|^2` and `h[k] = Re(a^H(t, theta_k) w_k)`.
pub fn quadratic_forms(split: &WSplit, trig: &TrigState) -> (DMatrix<f64>, DVector<f64>) {
    let k = split.c.len();
    let mut f = DMatrix::zeros(k, k);
    let mut h = DVector::zeros(k);
    for kk in 0..k {
        let (g, q) = (&trig.cos[kk], &trig.sin[kk]);
        for i in 0..k {
            let c = &split.c[i];
            f[(kk, i)] = g.dot(&(c * g)) + q.dot(&(c * q)) + 2.0 * g.dot(&(&split.d[i] * q));
        }
        h[kk] = g.dot(&split.re[kk]) + q.dot(&split.im[kk]);
    }
    (f, h)
}

/// Gradient of `F` with respect to the positions.
///
/// The receiver `u_k` is complex in general, so the linear term
/// `-2 rho_k delta_k Re(u_k^* a^H w_k)` contributes through both the real part
/// `h_kk` and the imaginary part of `a^H w_k`.
pub fn grad_t(t: &Apv, w: &Beamformers, aux: &AuxState, delta: &[f64], freq: &[f64]) -> DVector<f64> {
    let split = WSplit::new(w);
    let trig = TrigState::new(t, freq);
    let u = aux.receivers();
    let m = t.len();
    let mut grad = DVector::zeros(m);
    for k in 0..aux.users() {
        let v = freq[k];
        if v == 0.0 {
            continue;
        }
        let (g, q) = (&trig.cos[k], &trig.sin[k]);
        let quad_weight = aux.rho[k] * u[k].norm_sqr() * delta[k] * delta[k];
        if quad_weight != 0.0 {
            for i in 0..split.c.len() {
                let c = &split.c[i];
                let d = &split.d[i];
                let left = c * q - d * g;
                let right = c * g + d * q;
                let df = (g.component_mul(&left) - q.component_mul(&right)) * (2.0 * v);
                grad.axpy(quad_weight, &df, 1.0);
            }
        }
        let (a, b) = (&split.re[k], &split.im[k]);
        // d Re(a^H w_k) / dt and d Im(a^H w_k) / dt
        let dh_re = (g.component_mul(b) - q.component_mul(a)) * v;
        let dh_im = (g.component_mul(a) + q.component_mul(b)) * (-v);
        let scale = -2.0 * aux.rho[k] * delta[k];
        grad.axpy(scale * u[k].re, &dh_re, 1.0);
        grad.axpy(scale * u[k].im, &dh_im, 1.0);
    }
    grad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpgOptions {
    pub max_iter: usize,
    /// First trial step length; `None` means one wavelength.
    pub initial_step: Option<f64>,
    /// Sufficient-decrease constant, in (0, 1).
    pub armijo: f64,
    /// Step shrink factor per backtrack, in (0, 1).
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Stop when `||t_{i+1} - t_i|| <= tol * ||t_i||`.
    pub tol: f64,
}

impl Default for EpgOptions {
    fn default() -> Self {
        EpgOptions {
            max_iter: 50,
            initial_step: None,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 30,
            tol: 1e-9,
        }
    }
}

impl EpgOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| {
            Err(Error::InvalidOptions {
                field,
                reason: reason.to_string(),
            })
        };
        if self.max_iter == 0 {
            return bad("max_iter", "must be >= 1");
        }
        if let Some(s) = self.initial_step {
            if !(s > 0.0) {
                return bad("initial_step", "must be > 0");
            }
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo", "must lie in (0, 1)");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink", "must lie in (0, 1)");
        }
        if !(self.tol > 0.0) {
            return bad("tol", "must be > 0");
        }
        Ok(())
    }
}

/// Nesterov momentum sequence: `alpha_1 = 0`, `alpha_{i+1} = (1 + sqrt(1 + 4 alpha_i^2)) / 2`.
#[derive(Debug, Clone, Copy)]
pub struct Momentum {
    alpha: f64,
}

impl Momentum {
    pub fn new() -> Self {
        Momentum { alpha: 0.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Advances the sequence and returns `zeta_{i+1} = (alpha_{i+1} - 1) / alpha_{i+1}`.
    pub fn advance(&mut self) -> f64 {
        self.alpha = 0.5 * (1.0 + (1.0 + 4.0 * self.alpha * self.alpha).sqrt());
        (self.alpha - 1.0) / self.alpha
    }

    pub fn restart(&mut self) {
        self.alpha = 0.0;
    }
}

impl Default for Momentum {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone)]
pub struct EpgOutcome {
    pub t: Apv,
    /// `F` at the returned positions.
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best-so-far objective after every iteration.
    pub history: Vec<f64>,
}

/// `F` as a function of the positions only.
pub fn position_objective(s: &Scenario, t: &Apv, w: &Beamformers, aux: &AuxState) -> f64 {
    objective(&build_channels(s, t), w, aux, &s.noise_power)
}

/// Extrapolated projected gradient from a feasible `t_init`.
///
/// Each accepted iterate lies in the chain polytope and satisfies
/// `g(t | t_i) >= Pt` for the surrogate built at the previous accepted
/// iterate, hence has true probing power `>= Pt`.
pub fn epg_solve(t_init: &Apv, w: &Beamformers, aux: &AuxState, s: &Scenario, opts: &EpgOptions) -> Result<EpgOutcome> {
    opts.validate()?;
    let ch = build_channels(s, t_init);
    let (delta, freq) = (ch.delta.clone(), ch.freq.clone());
    let rw = w.covariance();
    let f = |t: &Apv| position_objective(s, t, w, aux);
    let pt = s.probe_threshold;

    let f0 = f(t_init);
    let mut best = (t_init.clone(), f0);
    let mut t_cur = t_init.clone();
    let mut f_cur = f0;
    let mut z = t_init.clone();
    let mut momentum = Momentum::new();
    let base_step = opts.initial_step.unwrap_or(s.wavelength);
    let mut step = base_step;
    let mut increases = 0;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        let sur = build_surrogate(&t_cur, &rw, s.probe_angle, s.wavelength);
        // W may sit a rounding error below the threshold; keep t_cur inside the set.
        let pt_here = pt.min(sur.value(&t_cur.to_vector()));
        let fz = f(&z);
        let gz = grad_t(&z, w, aux, &delta, &freq);
        if gz.norm() == 0.0 && z == t_cur {
            converged = true;
            history.push(best.1);
            break;
        }
        let zv = z.to_vector();

        let mut accepted = None;
        let mut trial = step;
        for _ in 0..=opts.max_backtracks {
            let kappa = &zv - &gz * trial;
            match project_feasible(kappa.as_slice(), &sur, s.min_spacing, s.aperture, pt_here) {
                Ok(cand) => {
                    let fc = f(&cand);
                    let dir = cand.to_vector() - &zv;
                    if fc <= fz + opts.armijo * gz.dot(&dir) {
                        accepted = Some((cand, fc, trial));
                        break;
                    }
                }
                // The surrogate set always contains t_cur; a failure here is numerical.
                Err(Error::SurrogateInfeasible { .. }) => {}
                Err(e) => return Err(e),
            }
            trial *= opts.shrink;
        }

        let Some((t_next, f_next, used)) = accepted else {
            if z != t_cur {
                // Extrapolated point failed; retry from the iterate itself.
                z = t_cur.clone();
                momentum.restart();
                history.push(best.1);
                continue;
            }
            converged = true;
            history.push(best.1);
            break;
        };
        step = (used * 2.0).min(base_step);

        if f_next > f_cur {
            increases += 1;
        } else {
            increases = 0;
        }
        let moved = (t_next.to_vector() - t_cur.to_vector()).norm();
        let scale = t_cur.to_vector().norm().max(s.wavelength);
        let t_prev = std::mem::replace(&mut t_cur, t_next);
        f_cur = f_next;
        if f_cur < best.1 {
            best = (t_cur.clone(), f_cur);
        }
        history.push(best.1);

        if increases >= 2 {
            momentum.restart();
            increases = 0;
        }
        let zeta = momentum.advance();
        let extrapolated: Vec<f64> = t_cur
            .0
            .iter()
            .zip(&t_prev.0)
            .map(|(a, b)| a + zeta * (a - b))
            .collect();
        z = Apv(extrapolated);

        if moved <= opts.tol * scale {
            converged = true;
            break;
        }
    }

    Ok(EpgOutcome {
        t: best.0,
        objective: best.1,
        initial_objective: f0,
        iterations,
        converged,
        history,
    })
}

/// Probing power of `w` at positions `t` toward the scenario's target.
pub fn probing_at(s: &Scenario, t: &Apv, w: &Beamformers) -> f64 {
    crate::model::probing_power_along(w, &steering_vector(t, s.probe_angle, s.wavelength))
}
