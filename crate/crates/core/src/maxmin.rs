//! Maximization of `psi(s) = min_i (<s, g_i> + e_i) - |s|^2 / (2 mu)` over
//! `s in R^d`, optionally restricted to a ball `|s| <= K`.
//!
//! The unconstrained problem is solved through its dual
//! `min_{lambda in simplex} (mu/2) |G lambda|^2 + <e, lambda>`, `s = mu G lambda`,
//! by an active-set method in the style of Wolfe's minimum-norm-point
//! algorithm: a corral of indices is kept, the affine minimizer over its hull
//! is computed exactly, and indices with non-positive weight are dropped by a
//! ratio test. The Frank–Wolfe quantity `<lambda, a> - min_i a_i`, with
//! `a_i = <s, g_i> + e_i`, is the exact duality gap.
//!
//! The ball problem equals the unconstrained one for a smaller `mu` (the
//! multiplier of the ball constraint adds to `1/mu`), so it is solved by a
//! safeguarded search on `mu` in which each corral yields `|s(mu)|` in closed
//! form.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::Vector;

/// Relative gap at which the active-set loop stops.
const STOP_GAP: f64 = 1e-14;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub max_iterations: usize,
    /// Relative duality gap accepted when the iteration budget runs out.
    pub accept_gap: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub s: Vector,
    /// `psi(s)`, a lower bound on the optimum within `gap`.
    pub value: f64,
    pub gap: f64,
    pub lambda: Vec<(usize, f64)>,
}

/// Columns of `g` are the `g_i`.
pub(crate) struct Problem<'a> {
    pub g: &'a DMatrix<f64>,
    pub e: &'a [f64],
}

impl Problem<'_> {
    fn len(&self) -> usize {
        self.e.len()
    }

    fn dim(&self) -> usize {
        self.g.nrows()
    }

    fn combination(&self, lambda: &[(usize, f64)]) -> Vector {
        let mut out = Vector::zeros(self.dim());
        for &(i, w) in lambda {
            out.axpy(w, &self.g.column(i), 1.0);
        }
        out
    }

    fn affine_values(&self, s: &Vector) -> Vec<f64> {
        (0..self.len()).map(|i| self.g.column(i).dot(s) + self.e[i]).collect()
    }

    /// `psi(s)` for regularization `mu`.
    pub fn psi(&self, s: &Vector, mu: f64) -> f64 {
        let lo = self.affine_values(s).into_iter().fold(f64::INFINITY, f64::min);
        lo - s.norm_squared() / (2.0 * mu)
    }

    fn scale(&self, a: &[f64], s: &Vector, mu: f64) -> f64 {
        let amax = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        1.0 + amax + s.norm_squared() / mu
    }
}

enum AffineStep {
    /// Weights of the affine minimizer (same order as the corral).
    Minimizer(Vec<f64>),
    /// Direction in weight space leaving `G lambda` fixed and not increasing
    /// the objective.
    Ray(Vec<f64>),
}

/// Affine minimizer of the dual objective over the corral, or a descent ray
/// when the corral is affinely dependent.
fn affine_step(p: &Problem, lambda: &[(usize, f64)], mu: f64) -> AffineStep {
    let k = lambda.len() - 1;
    if k == 0 {
        return AffineStep::Minimizer(vec![1.0]);
    }
    let b = lambda[0].0;
    let gb = p.g.column(b);
    let d = DMatrix::from_fn(p.dim(), k, |r, c| p.g[(r, lambda[c + 1].0)] - gb[r]);
    let delta = Vector::from_fn(k, |c, _| p.e[lambda[c + 1].0] - p.e[b]);
    let dtd = d.transpose() * &d;
    let rhs = -(d.transpose() * gb) - &delta / mu;
    let eig = SymmetricEigen::new(dtd);
    let gscale = (0..p.len()).map(|i| p.g.column(i).norm_squared()).fold(0.0, f64::max);
    let emax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let threshold = 1e-14 * emax.max(gscale);

    let null = (0..k).find(|&c| eig.eigenvalues[c] <= threshold);
    if let Some(c) = null {
        let alpha = eig.eigenvectors.column(c);
        let mut dir: Vec<f64> = Vec::with_capacity(k + 1);
        dir.push(-alpha.sum());
        dir.extend(alpha.iter().cloned());
        let slope: f64 = alpha.dot(&delta);
        if slope > 0.0 {
            dir.iter_mut().for_each(|x| *x = -*x);
        }
        return AffineStep::Ray(dir);
    }
    let mut alpha = Vector::zeros(k);
    for c in 0..k {
        let vc = eig.eigenvectors.column(c);
        alpha.axpy(vc.dot(&rhs) / eig.eigenvalues[c], &vc, 1.0);
    }
    let mut w = Vec::with_capacity(k + 1);
    w.push(1.0 - alpha.sum());
    w.extend(alpha.iter().cloned());
    AffineStep::Minimizer(w)
}

/// Moves `lambda` by `t * dir`, with `t` the largest step keeping weights
/// non-negative (capped at `t_max`), and drops the indices that hit zero.
fn ratio_step(lambda: &mut Vec<(usize, f64)>, dir: &[f64], t_max: f64) {
    let mut t = t_max;
    let mut blocking = None;
    for (c, &dc) in dir.iter().enumerate() {
        if dc < 0.0 {
            let tc = lambda[c].1 / -dc;
            if tc < t {
                t = tc;
                blocking = Some(c);
            }
        }
    }
    if !t.is_finite() {
        return;
    }
    for (c, &dc) in dir.iter().enumerate() {
        lambda[c].1 += t * dc;
    }
    if let Some(c) = blocking {
        lambda[c].1 = 0.0;
    }
    lambda.retain(|&(_, w)| w > 0.0);
    let total: f64 = lambda.iter().map(|&(_, w)| w).sum();
    lambda.iter_mut().for_each(|(_, w)| *w /= total);
}

/// Minor cycle: replace the corral weights by the affine minimizer, dropping
/// indices until that minimizer has positive weights.
fn polish(p: &Problem, lambda: &mut Vec<(usize, f64)>, mu: f64) {
    for _ in 0..(2 * lambda.len() + 4) {
        match affine_step(p, lambda, mu) {
            AffineStep::Minimizer(w) => {
                if w.iter().all(|&x| x > 0.0) {
                    for (c, x) in w.into_iter().enumerate() {
                        lambda[c].1 = x;
                    }
                    return;
                }
                let dir: Vec<f64> = w.iter().zip(lambda.iter()).map(|(x, &(_, l))| x - l).collect();
                let before = lambda.len();
                ratio_step(lambda, &dir, 1.0);
                if lambda.len() == before {
                    return;
                }
            }
            AffineStep::Ray(dir) => {
                let before = lambda.len();
                ratio_step(lambda, &dir, f64::INFINITY);
                if lambda.len() == before {
                    return;
                }
            }
        }
    }
}

pub(crate) fn solve(
    p: &Problem,
    mu: f64,
    warm: Option<&[(usize, f64)]>,
    settings: Settings,
) -> Result<Solution> {
    let n = p.len();
    if n == 0 {
        return Err(Error::Internal("empty max-min problem".into()));
    }
    let mut lambda: Vec<(usize, f64)> = match warm {
        Some(w) if !w.is_empty() => w.to_vec(),
        _ => {
            let start = (0..n)
                .map(|i| (i, 0.5 * mu * p.g.column(i).norm_squared() + p.e[i]))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
                .0;
            vec![(start, 1.0)]
        }
    };

    if lambda.len() > 1 {
        polish(p, &mut lambda, mu);
    }
    let mut last_q = f64::INFINITY;
    for _ in 0..settings.max_iterations {
        let s = p.combination(&lambda) * mu;
        let a = p.affine_values(&s);
        let theta: f64 = lambda.iter().map(|&(i, w)| w * a[i]).sum();
        let (j, amin) = a
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &x)| if x < best.1 { (i, x) } else { best });
        let gap = (theta - amin).max(0.0);
        let scale = p.scale(&a, &s, mu);
        // dual objective; a corral change that fails to lower it is a rounding stall
        let q = theta - s.norm_squared() / (2.0 * mu);
        if gap <= STOP_GAP * scale || lambda.iter().any(|&(i, _)| i == j) || q >= last_q {
            return finish(mu, lambda, s, a, gap, scale, settings);
        }
        last_q = q;
        lambda.push((j, 0.0));
        polish(p, &mut lambda, mu);
    }
    let s = p.combination(&lambda) * mu;
    let a = p.affine_values(&s);
    let theta: f64 = lambda.iter().map(|&(i, w)| w * a[i]).sum();
    let amin = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = p.scale(&a, &s, mu);
    finish(mu, lambda, s, a, (theta - amin).max(0.0), scale, settings)
}

fn finish(
    mu: f64,
    lambda: Vec<(usize, f64)>,
    s: Vector,
    a: Vec<f64>,
    gap: f64,
    scale: f64,
    settings: Settings,
) -> Result<Solution> {
    if gap > settings.accept_gap * scale {
        return Err(Error::SolverNonConvergence { gap, iterations: settings.max_iterations });
    }
    let amin = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let value = amin - s.norm_squared() / (2.0 * mu);
    Ok(Solution { s, value, gap, lambda })
}

/// `|s(mu)|^2 = mu^2 |a_S|^2 + |r|^2` along the corral's affine solution;
/// returns `(|a_S|, |r|)`.
fn corral_path(p: &Problem, lambda: &[(usize, f64)]) -> Option<(f64, f64)> {
    let k = lambda.len() - 1;
    let b = lambda[0].0;
    let gb = p.g.column(b).into_owned();
    if k == 0 {
        return Some((gb.norm(), 0.0));
    }
    let d = DMatrix::from_fn(p.dim(), k, |r, c| p.g[(r, lambda[c + 1].0)] - gb[r]);
    let delta = Vector::from_fn(k, |c, _| p.e[lambda[c + 1].0] - p.e[b]);
    let dtd = d.transpose() * &d;
    let chol = dtd.cholesky()?;
    let a_s = &gb - &d * chol.solve(&(d.transpose() * &gb));
    let r = &d * chol.solve(&delta);
    Some((a_s.norm(), r.norm()))
}

#[derive(Debug, Clone)]
pub(crate) struct BallSolution {
    pub s: Vector,
    /// `psi_M(s)`.
    pub value: f64,
    /// Effective regularization; equals `M` when the ball is inactive.
    pub mu: f64,
    pub active: bool,
    pub gap: f64,
}

/// `max_{|s| <= k} psi_M(s)`.
pub(crate) fn solve_ball(p: &Problem, m: f64, k: f64, settings: Settings) -> Result<BallSolution> {
    if k <= 0.0 || p.dim() == 0 {
        let s = Vector::zeros(p.dim());
        return Ok(BallSolution { value: p.psi(&s, m), s, mu: 0.0, active: p.dim() > 0, gap: 0.0 });
    }
    let full = solve(p, m, None, settings)?;
    let norm = full.s.norm();
    if norm <= k * (1.0 + 1e-13) {
        return Ok(BallSolution { s: full.s, value: full.value, mu: m, active: false, gap: full.gap });
    }

    let (mut lo, mut hi) = (0.0, m);
    let mut best = full;
    let mut best_mu = m;
    for _ in 0..200 {
        let candidate = corral_path(p, &best.lambda).and_then(|(a_norm, r_norm)| {
            (a_norm > 0.0 && r_norm < k).then(|| (k * k - r_norm * r_norm).sqrt() / a_norm)
        });
        let mu = match candidate {
            Some(c) if c > lo && c < hi => c,
            _ => 0.5 * (lo + hi),
        };
        let sol = solve(p, mu, Some(&best.lambda), settings)?;
        let norm = sol.s.norm();
        best = sol;
        best_mu = mu;
        if (norm - k).abs() <= 1e-13 * (1.0 + k) {
            break;
        }
        if norm > k {
            hi = mu;
        } else {
            lo = mu;
        }
        if hi - lo <= 1e-15 * m {
            break;
        }
    }
    let norm = best.s.norm();
    let s = if norm > 0.0 { &best.s * (k / norm) } else { best.s.clone() };
    let value = p.psi(&s, m);
    Ok(BallSolution { s, value, mu: best_mu, active: true, gap: best.gap })
}
