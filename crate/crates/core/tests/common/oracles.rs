//! Independent reference solvers. They are slow and only meant for small
//! instances.
#![allow(dead_code)]

use fa_isac::qcqp::Surrogate;
use fa_isac::wmmse::QuadraticData;
use fa_isac::{Apv, C64};
use nalgebra::{DMatrix, DVector};

/// Optimal value of the beamformer block
/// `min sum_k w_k^H A w_k - 2 Re(b_k^H w_k)` s.t. `sum ||w_k||^2 <= pmax`,
/// `sum |a^H w_k|^2 >= pt`, through its two-multiplier Lagrange dual.
///
/// A complex QCQP with two quadratic constraints has zero duality gap, so the
/// dual optimum is the global primal optimum.
pub fn beamformer_dual_value(quad: &QuadraticData, a: &DVector<C64>, pmax: f64, pt: f64) -> f64 {
    let phi = |mu: f64| dual_in_power_multiplier(quad, a, pmax, pt, mu);
    if pt <= 0.0 {
        return phi(0.0);
    }
    // phi is concave in mu; bracket its maximum.
    let mut hi = 1.0;
    let mut f_hi = phi(hi);
    let f0 = phi(0.0);
    while f_hi >= f0 || f_hi >= phi(hi / 2.0) {
        hi *= 2.0;
        f_hi = phi(hi);
        assert!(hi < 1e12, "probing multiplier did not bracket");
    }
    golden_max(phi, 0.0, hi, 300)
}

/// `max_{lambda >= 0} d(lambda, mu)` for fixed `mu`.
fn dual_in_power_multiplier(quad: &QuadraticData, a: &DVector<C64>, pmax: f64, pt: f64, mu: f64) -> f64 {
    let g = &quad.a - a * a.adjoint() * C64::from(mu);
    let eig = g.symmetric_eigen();
    let c = eig.eigenvectors.adjoint() * &quad.b;
    let weights: Vec<f64> = (0..c.nrows()).map(|i| c.row(i).iter().map(|z| z.norm_sqr()).sum()).collect();
    let e: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let lo = e.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let lam_lo = (-lo).max(0.0);
    let slope = |lam: f64| -> f64 { weights.iter().zip(&e).map(|(w, x)| w / (x + lam).powi(2)).sum::<f64>() - pmax };
    let value = |lam: f64| -> f64 {
        -weights.iter().zip(&e).map(|(w, x)| w / (x + lam)).sum::<f64>() - lam * pmax + mu * pt
    };
    let tiny = 1e-14 * (1.0 + lam_lo);
    if lam_lo == 0.0 && lo > 0.0 && slope(0.0) <= 0.0 {
        return value(0.0);
    }
    let mut left = lam_lo + tiny;
    if slope(left) <= 0.0 {
        return value(left);
    }
    let mut right = lam_lo + 1.0;
    while slope(right) > 0.0 {
        right = lam_lo + 2.0 * (right - lam_lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (left + right);
        if slope(mid) > 0.0 {
            left = mid;
        } else {
            right = mid;
        }
    }
    value(0.5 * (left + right))
}

pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    f(lo).max(f(hi)).max(f1).max(f2)
}

/// Projection onto the chain polytope by enumerating active sets: the unique
/// KKT point of a strictly convex QP is found among the `2^(M+1)` candidates.
pub fn chain_projection_by_enumeration(kappa: &[f64], d0: f64, len: f64) -> Vec<f64> {
    let m = kappa.len();
    let rows = m + 1;
    let row = |i: usize| -> (DVector<f64>, f64) {
        let mut g = DVector::zeros(m);
        if i == 0 {
            g[0] = 1.0;
            (g, 0.0)
        } else if i == m {
            g[m - 1] = -1.0;
            (g, -len)
        } else {
            g[i] = 1.0;
            g[i - 1] = -1.0;
            (g, d0)
        }
    };
    let target = DVector::from_column_slice(kappa);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << rows) {
        let active: Vec<usize> = (0..rows).filter(|i| mask & (1 << i) != 0).collect();
        if active.len() > m {
            continue;
        }
        let na = active.len();
        // [I  -G^T; G 0] [t; l] = [kappa; h]
        let mut kkt = DMatrix::zeros(m + na, m + na);
        let mut rhs = DVector::zeros(m + na);
        for i in 0..m {
            kkt[(i, i)] = 1.0;
            rhs[i] = target[i];
        }
        for (j, &i) in active.iter().enumerate() {
            let (g, h) = row(i);
            for r in 0..m {
                kkt[(r, m + j)] = -g[r];
                kkt[(m + j, r)] = g[r];
            }
            rhs[m + j] = h;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let t = sol.rows(0, m).into_owned();
        let feasible = (0..rows).all(|i| {
            let (g, h) = row(i);
            g.dot(&t) >= h - 1e-12
        });
        let dual_ok = (0..na).all(|j| sol[m + j] >= -1e-12);
        if feasible && dual_ok {
            let obj = (&t - &target).norm_squared();
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, t));
            }
        }
    }
    best.expect("a KKT point exists").1.iter().copied().collect()
}

/// Best grid point of `{t : chain constraints, g(t) >= pt}` for `M` in {2, 3},
/// scanning every spacing-feasible grid point at resolution `step`.
pub fn grid_feasible_projection(kappa: &[f64], sur: &Surrogate, d0: f64, len: f64, pt: f64, step: f64) -> Option<(f64, Vec<f64>)> {
    let m = kappa.len();
    assert!(m == 2 || m == 3);
    let n = (len / step).round() as usize;
    let pos = |i: usize| i as f64 * step;
    let gap = (d0 / step).ceil() as usize;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |t: Vec<f64>| {
        let v = DVector::from_column_slice(&t);
        if sur.value(&v) < pt {
            return;
        }
        let obj: f64 = t.iter().zip(kappa).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, t));
        }
    };
    for i in 0..=n {
        for j in (i + gap)..=n {
            if m == 2 {
                consider(vec![pos(i), pos(j)]);
            } else {
                for k in (j + gap)..=n {
                    consider(vec![pos(i), pos(j), pos(k)]);
                }
            }
        }
    }
    best
}

pub fn squared_distance(a: &Apv, b: &[f64]) -> f64 {
    a.0.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}
