//! Projection onto `{t : g(t | t~) >= Pt} ∩ chain polytope`.
//!
//! `g` is a concave quadratic lower bound of the probing power
//! `a^H(t) R_w a(t) = sum_{m,n} |R_mn| cos(v (t_n - t_m) + arg R_mn)`, obtained
//! from `cos(y) >= cos(y0) - sin(y0) (y - y0) - (y - y0)^2 / 2`. The chain
//! polytope is `t_1 >= 0`, `t_M <= L`, `t_m - t_{m-1} >= D0`.
//!
//! The projection is a convex QCQP with a single quadratic constraint, so it
//! is solved through its Lagrangian: for a multiplier `mu >= 0` the inner
//! problem `min ||t - kappa||^2 + mu (Pt - g(t))` is a strongly convex QP over
//! the chain polytope (primal active-set), and `g(t(mu))` is nondecreasing in
//! `mu`, so `mu` is found by bracketing and bisection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{spatial_frequency, Apv, C64};

/// `g(t) = t^T D t - 2 d^T t + c`, a global minorizer of the probing power
/// that is tight at `expansion`.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub dmat: DMatrix<f64>,
    pub d: DVector<f64>,
    pub c: f64,
    pub expansion: Apv,
    /// Probe spatial frequency.
    pub freq: f64,
}

impl Surrogate {
    pub fn value(&self, t: &DVector<f64>) -> f64 {
        t.dot(&(&self.dmat * t)) - 2.0 * self.d.dot(t) + self.c
    }

    pub fn gradient(&self, t: &DVector<f64>) -> DVector<f64> {
        (&self.dmat * t - &self.d) * 2.0
    }
}

/// Builds the surrogate at `expansion` for transmit covariance `rw`.
pub fn build_surrogate(expansion: &Apv, rw: &DMatrix<C64>, theta: f64, wavelength: f64) -> Surrogate {
    let v = spatial_frequency(theta, wavelength);
    let m = expansion.len();
    let tt = expansion.as_slice();
    let mag = DMatrix::from_fn(m, m, |i, j| rw[(i, j)].norm());
    let phase = |i: usize, j: usize| {
        let z = rw[(i, j)];
        if z.norm() == 0.0 {
            0.0
        } else {
            z.arg()
        }
    };
    let r: Vec<f64> = (0..m).map(|n| mag.column(n).sum()).collect();

    let mut dmat = -&mag;
    for n in 0..m {
        dmat[(n, n)] += r[n];
    }
    dmat *= -v * v;

    let mut d = DVector::zeros(m);
    let mut c = 0.0;
    for n in 0..m {
        for mm in 0..m {
            let w = mag[(mm, n)];
            if w == 0.0 {
                continue;
            }
            let gap = tt[n] - tt[mm];
            let f = v * gap + phase(mm, n);
            let (sin, cos) = f.sin_cos();
            d[n] += w * (v * sin - v * v * gap);
            c += w * (cos + v * sin * gap - 0.5 * v * v * gap * gap);
        }
    }
    Surrogate {
        dmat,
        d,
        c,
        expansion: expansion.clone(),
        freq: v,
    }
}

/// Nondecreasing least-squares fit clipped to `[lo, hi]` (pool adjacent violators).
pub fn bounded_isotonic(y: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    // (sum, count) per pooled block
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 > s1 / n1 as f64 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s0 + s1, n0 + n1);
            } else {
                break;
            }
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, n)| std::iter::repeat_n((s / n as f64).clamp(lo, hi), n))
        .collect()
}

/// Euclidean projection onto the chain polytope.
///
/// The substitution `s_m = t_m - (m - 1) D0` turns the spacing constraints
/// into `s` nondecreasing on `[0, L - (M - 1) D0]`.
pub fn project_chain(kappa: &[f64], min_spacing: f64, aperture: f64) -> Apv {
    let shifted: Vec<f64> = kappa
        .iter()
        .enumerate()
        .map(|(i, k)| k - i as f64 * min_spacing)
        .collect();
    let hi = (aperture - (kappa.len().saturating_sub(1)) as f64 * min_spacing).max(0.0);
    let fit = bounded_isotonic(&shifted, 0.0, hi);
    let mut t: Vec<f64> = fit
        .iter()
        .enumerate()
        .map(|(i, s)| s + i as f64 * min_spacing)
        .collect();
    // Rounding in the back-shift can leave the last element a hair past the aperture.
    if let Some(last) = t.last_mut() {
        *last = last.min(aperture);
    }
    Apv(t)
}

/// Rows of `G t >= h` for the chain polytope: `t_1 >= 0`, spacing, `-t_M >= -L`.
struct Chain {
    m: usize,
    min_spacing: f64,
    aperture: f64,
}

impl Chain {
    fn count(&self) -> usize {
        self.m + 1
    }

    fn row(&self, i: usize) -> DVector<f64> {
        let mut g = DVector::zeros(self.m);
        if i == 0 {
            g[0] = 1.0;
        } else if i == self.m {
            g[self.m - 1] = -1.0;
        } else {
            g[i] = 1.0;
            g[i - 1] = -1.0;
        }
        g
    }

    fn rhs(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else if i == self.m {
            -self.aperture
        } else {
            self.min_spacing
        }
    }

    fn slack(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.row(i).dot(x) - self.rhs(i)
    }
}

/// Primal active-set solve of `min 1/2 x^T H x + c^T x` over the chain polytope,
/// from a feasible `start`. `H` must be positive definite.
fn chain_qp(h: &DMatrix<f64>, c: &DVector<f64>, chain: &Chain, start: &DVector<f64>) -> DVector<f64> {
    let m = chain.m;
    let scale = chain.aperture.max(start.norm());
    let active_tol = 1e-13 * scale;
    let mut x = start.clone();
    let mut working: Vec<usize> = (0..chain.count())
        .filter(|&i| chain.slack(i, &x).abs() <= active_tol)
        .collect();
    // Any m of the m + 1 rows are independent; all m + 1 only happens when the
    // polytope is a single point, which the callers handle up front.
    working.truncate(m);

    for _ in 0..(20 * (m + 1) + 100) {
        let grad = h * &x + c;
        let nw = working.len();
        let mut kkt = DMatrix::zeros(m + nw, m + nw);
        kkt.view_mut((0, 0), (m, m)).copy_from(h);
        for (j, &i) in working.iter().enumerate() {
            let row = chain.row(i);
            for r in 0..m {
                kkt[(r, m + j)] = -row[r];
                kkt[(m + j, r)] = row[r];
            }
        }
        let mut rhs = DVector::zeros(m + nw);
        rhs.rows_mut(0, m).copy_from(&(-&grad));
        // Only fails when H is numerically singular (huge multipliers); keep the
        // feasible iterate.
        let Some(sol) = kkt.lu().solve(&rhs) else {
            return x;
        };
        let p = sol.rows(0, m).into_owned();
        let lambda = sol.rows(m, nw).into_owned();

        if p.norm() <= 1e-14 * scale {
            let lam_scale = grad.norm().max(1e-300);
            match lambda.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
                Some((j, &l)) if l < -1e-12 * lam_scale => {
                    working.remove(j);
                }
                _ => return x,
            }
            continue;
        }

        let mut step = 1.0;
        let mut blocking = None;
        for i in 0..chain.count() {
            if working.contains(&i) {
                continue;
            }
            let gp = chain.row(i).dot(&p);
            if gp < -1e-15 * p.norm() {
                let s = (-chain.slack(i, &x) / gp).max(0.0);
                if s < step {
                    step = s;
                    blocking = Some(i);
                }
            }
        }
        x += &p * step;
        if let Some(i) = blocking {
            if working.len() < m {
                working.push(i);
            }
        }
    }
    x
}

fn clean(x: &DVector<f64>, min_spacing: f64, aperture: f64) -> DVector<f64> {
    project_chain(x.as_slice(), min_spacing, aperture).to_vector()
}

/// Diagnostics for a [`project_feasible`] solve.
#[derive(Debug, Clone)]
pub struct FeasibleProjection {
    pub t: Apv,
    /// Multiplier of the surrogate constraint.
    pub multiplier: f64,
    pub bisections: usize,
}

/// `argmin ||t - kappa||^2` s.t. `g(t) >= pt` and the chain constraints.
pub fn project_feasible(kappa: &[f64], sur: &Surrogate, min_spacing: f64, aperture: f64, pt: f64) -> Result<Apv> {
    project_feasible_detailed(kappa, sur, min_spacing, aperture, pt).map(|p| p.t)
}

pub fn project_feasible_detailed(
    kappa: &[f64],
    sur: &Surrogate,
    min_spacing: f64,
    aperture: f64,
    pt: f64,
) -> Result<FeasibleProjection> {
    let m = kappa.len();
    if sur.d.len() != m {
        return Err(Error::Dimension(format!("surrogate has {} positions, target has {m}", sur.d.len())));
    }
    let t0 = project_chain(kappa, min_spacing, aperture).to_vector();
    let g0 = sur.value(&t0);
    let done = |t: DVector<f64>, multiplier: f64, bisections: usize| FeasibleProjection {
        t: Apv::from_vector(&t),
        multiplier,
        bisections,
    };
    if g0 >= pt {
        return Ok(done(t0, 0.0, 0));
    }
    let span = m.saturating_sub(1) as f64 * min_spacing;
    if aperture - span <= 1e-15 * aperture.max(1.0) {
        // Single-point polytope.
        return Err(Error::SurrogateInfeasible { achieved: g0, threshold: pt });
    }

    let chain = Chain {
        m,
        min_spacing,
        aperture,
    };
    let target = DVector::from_column_slice(kappa);
    let identity = DMatrix::<f64>::identity(m, m);
    let solve = |mu: f64, start: &DVector<f64>| -> DVector<f64> {
        let h = (&identity - &sur.dmat * mu) * 2.0;
        let c = (&sur.d * mu - &target) * 2.0;
        clean(&chain_qp(&h, &c, &chain, start), min_spacing, aperture)
    };

    // Bracket: grow mu until the constraint is met.
    let grad_norm = sur.gradient(&t0).norm();
    let dist = (&t0 - &target).norm().max(1e-6 * aperture);
    let mut hi = if grad_norm > 0.0 { dist / grad_norm } else { 1.0 };
    let mut lo = 0.0;
    let mut t_lo = t0.clone();
    let mut t_hi = solve(hi, &t0);
    let mut g_hi = sur.value(&t_hi);
    let mut growths = 0;
    while g_hi < pt {
        growths += 1;
        let next_mu = hi * 4.0;
        let t_next = solve(next_mu, &t_hi);
        let moved = (&t_next - &t_hi).norm();
        lo = hi;
        t_lo = std::mem::replace(&mut t_hi, t_next);
        hi = next_mu;
        g_hi = sur.value(&t_hi);
        if g_hi >= pt {
            break;
        }
        if growths > 40 || (growths > 5 && moved <= 1e-14 * aperture) {
            return Err(Error::SurrogateInfeasible {
                achieved: g_hi,
                threshold: pt,
            });
        }
    }

    let tol_g = 1e-12 * pt.max(1.0);
    let mut bisections = 0;
    while bisections < 200 && hi - lo > 1e-10 * hi {
        if g_hi - pt <= tol_g {
            break;
        }
        bisections += 1;
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        let t_mid = solve(mid, &t_hi);
        let g_mid = sur.value(&t_mid);
        if g_mid >= pt {
            hi = mid;
            t_hi = t_mid;
            g_hi = g_mid;
        } else {
            lo = mid;
            t_lo = t_mid;
        }
    }
    let _ = t_lo;
    Ok(done(t_hi, hi, bisections))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{probing_power_along, steering_vector, Beamformers};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 0.01;

    fn random_cov(rng: &mut ChaCha8Rng, m: usize, k: usize) -> DMatrix<C64> {
        let w = DMatrix::from_fn(m, k, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        &w * w.adjoint()
    }

    fn random_chain_point(rng: &mut ChaCha8Rng, m: usize, d0: f64, len: f64) -> Vec<f64> {
        let slack = len - (m - 1) as f64 * d0;
        let mut s: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..slack)).collect();
        s.sort_by(f64::total_cmp);
        s.iter().enumerate().map(|(i, x)| x + i as f64 * d0).collect()
    }

    fn probe_of(rw: &DMatrix<C64>, t: &[f64], theta: f64) -> f64 {
        let a = steering_vector(&Apv(t.to_vec()), theta, LAMBDA);
        (a.adjoint() * rw * &a)[(0, 0)].re
    }

    #[test]
    fn identity_covariance_gives_constant_surrogate() {
        let t = Apv(vec![0.0, 0.01, 0.03, 0.035]);
        let sur = build_surrogate(&t, &DMatrix::identity(4, 4), 1.0, LAMBDA);
        assert!(sur.dmat.iter().all(|&x| x == 0.0));
        assert!(sur.d.iter().all(|&x| x.abs() < 1e-15));
        assert!((sur.c - 4.0).abs() < 1e-15);
    }

    #[test]
    fn surrogate_is_tight_tangent_and_minorizing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let m = rng.gen_range(2..=8);
            let rank = rng.gen_range(1..=4);
            let rw = random_cov(&mut rng, m, rank);
            let theta = rng.gen_range(0.0..std::f64::consts::PI);
            let tt = random_chain_point(&mut rng, m, LAMBDA / 2.0, 0.1);
            let sur = build_surrogate(&Apv(tt.clone()), &rw, theta, LAMBDA);
            let tv = DVector::from_column_slice(&tt);
            let p = probe_of(&rw, &tt, theta);
            assert!((sur.value(&tv) - p).abs() <= 1e-9 * p.max(1.0));

            let grad = sur.gradient(&tv);
            let h = 1e-7 * LAMBDA;
            for n in 0..m {
                let mut up = tt.clone();
                let mut dn = tt.clone();
                up[n] += h;
                dn[n] -= h;
                let fd = (probe_of(&rw, &up, theta) - probe_of(&rw, &dn, theta)) / (2.0 * h);
                assert!((fd - grad[n]).abs() <= 1e-5 * grad.norm().max(1e-3), "{fd} vs {}", grad[n]);
            }
            for _ in 0..200 {
                let t = random_chain_point(&mut rng, m, LAMBDA / 2.0, 0.1);
                let tv = DVector::from_column_slice(&t);
                assert!(sur.value(&tv) <= probe_of(&rw, &t, theta) + 1e-9 * p.max(1.0));
            }
            let eig = sur.dmat.clone().symmetric_eigenvalues();
            assert!(eig.max() <= 1e-10 * sur.dmat.norm().max(1e-300));
        }
    }

    #[test]
    fn surrogate_consistent_with_beamformer_probing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = Beamformers(DMatrix::from_fn(5, 2, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
        let t = Apv(random_chain_point(&mut rng, 5, 0.005, 0.1));
        let sur = build_surrogate(&t, &w.covariance(), 1.047, LAMBDA);
        let p = probing_power_along(&w, &steering_vector(&t, 1.047, LAMBDA));
        assert!((sur.value(&t.to_vector()) - p).abs() < 1e-9 * p);
    }

    #[test]
    fn pav_examples() {
        assert_eq!(bounded_isotonic(&[1.0, 2.0, 3.0], 0.0, 10.0), vec![1.0, 2.0, 3.0]);
        assert_eq!(bounded_isotonic(&[3.0, 1.0], 0.0, 10.0), vec![2.0, 2.0]);
        assert_eq!(bounded_isotonic(&[3.0, 1.0, -5.0], 0.0, 10.0), vec![0.0, 0.0, 0.0]);
        assert_eq!(bounded_isotonic(&[12.0, 1.0, 20.0], 0.0, 10.0), vec![6.5, 6.5, 10.0]);
    }

    #[test]
    fn chain_projection_two_points() {
        // shifted targets (0.6, -0.6) pool to 0, clip at 0 -> t = (0, 1)
        let t = project_chain(&[0.6, 0.4], 1.0, 100.0);
        assert_eq!(t.0, vec![0.0, 1.0]);
        let feasible = [0.001, 0.02, 0.05];
        assert_eq!(project_chain(&feasible, 0.005, 0.1).0, feasible.to_vec());
    }

    #[test]
    fn chain_qp_with_identity_matches_pav() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let m = rng.gen_range(1..=6);
            let kappa: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.05..0.15)).collect();
            let chain = Chain {
                m,
                min_spacing: 0.005,
                aperture: 0.1,
            };
            let start = DVector::from_column_slice(&random_chain_point(&mut rng, m, 0.005, 0.1));
            let h = DMatrix::identity(m, m) * 2.0;
            let c = DVector::from_column_slice(&kappa) * -2.0;
            let x = chain_qp(&h, &c, &chain, &start);
            let pav = project_chain(&kappa, 0.005, 0.1);
            for (a, b) in x.iter().zip(pav.as_slice()) {
                assert!((a - b).abs() < 1e-12, "{x} vs {pav:?}");
            }
        }
    }

    #[test]
    fn feasible_target_is_returned_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rw = random_cov(&mut rng, 4, 2);
        let tt = random_chain_point(&mut rng, 4, 0.005, 0.1);
        let sur = build_surrogate(&Apv(tt.clone()), &rw, 1.0, LAMBDA);
        let pt = sur.value(&DVector::from_column_slice(&tt));
        assert_eq!(project_feasible(&tt, &sur, 0.005, 0.1, pt).unwrap().0, tt);
        // Inactive constraint: reduces to the chain projection.
        let kappa = vec![0.03, 0.02, 0.2, -0.1];
        let out = project_feasible(&kappa, &sur, 0.005, 0.1, -1e9).unwrap();
        assert_eq!(out, project_chain(&kappa, 0.005, 0.1));
    }

    #[test]
    fn active_constraint_is_met_and_kkt_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut active = 0;
        for _ in 0..50 {
            let m = rng.gen_range(2..=6);
            let rw = random_cov(&mut rng, m, 2);
            let tt = random_chain_point(&mut rng, m, 0.005, 0.1);
            let sur = build_surrogate(&Apv(tt.clone()), &rw, 1.0, LAMBDA);
            let pt = sur.value(&DVector::from_column_slice(&tt));
            let kappa: Vec<f64> = tt.iter().map(|x| x + rng.gen_range(-0.01..0.01)).collect();
            let res = project_feasible_detailed(&kappa, &sur, 0.005, 0.1, pt).unwrap();
            let t = res.t.to_vector();
            assert!(res.t.is_feasible(0.005, 0.1, 1e-12));
            assert!(sur.value(&t) >= pt - 1e-9 * pt.max(1.0));
            if res.multiplier > 0.0 {
                active += 1;
                assert!((sur.value(&t) - pt).abs() <= 1e-6 * pt.max(1.0));
            }
            // Stationarity: 2(t - kappa) - mu grad g = G^T lambda, lambda >= 0 on active rows.
            let resid = (&t - DVector::from_column_slice(&kappa)) * 2.0 - sur.gradient(&t) * res.multiplier;
            check_normal_cone(&resid, &res.t, 0.005, 0.1);
        }
        assert!(active > 10);
    }

    /// `resid = G^T lambda` with `lambda >= 0` supported on active rows.
    fn check_normal_cone(resid: &DVector<f64>, t: &Apv, d0: f64, len: f64) {
        // Recover lambda by cumulative sums: resid_j = l_j - l_{j+1} with l_0 for t_1 >= 0
        // and l_M for t_M <= L. Pick l_M from activity of the upper bound.
        let m = t.len();
        let x = t.as_slice();
        let slack_tol = 1e-9;
        let upper_active = (len - x[m - 1]).abs() < slack_tol;
        let lower_active = x[0].abs() < slack_tol;
        // Rounding floor: positions are O(0.1), so residual noise is O(1e-17).
        let tol = 1e-6 * resid.norm() + 1e-14;
        let total: f64 = resid.sum();
        // sum resid = l_0 - l_M
        let l_m = if upper_active && !lower_active { -total } else { 0.0 };
        let mut lambdas = vec![0.0; m + 1];
        lambdas[m] = l_m;
        for j in (0..m).rev() {
            lambdas[j] = resid[j] + lambdas[j + 1];
        }
        for (i, l) in lambdas.iter().enumerate() {
            let active = match i {
                0 => lower_active,
                i if i == m => upper_active,
                i => (x[i] - x[i - 1] - d0).abs() < slack_tol,
            };
            assert!(*l >= -tol, "negative multiplier {l} at {i}");
            if !active {
                assert!(l.abs() <= tol, "multiplier {l} on inactive row {i}");
            }
        }
    }

    #[test]
    fn infeasible_threshold_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rw = random_cov(&mut rng, 3, 1);
        let tt = random_chain_point(&mut rng, 3, 0.005, 0.1);
        let sur = build_surrogate(&Apv(tt.clone()), &rw, 1.0, LAMBDA);
        let total: f64 = rw.iter().map(|z| z.norm()).sum();
        let err = project_feasible(&tt, &sur, 0.005, 0.1, 10.0 * total).unwrap_err();
        assert!(matches!(err, Error::SurrogateInfeasible { .. }));
    }
}
