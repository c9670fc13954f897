#![allow(dead_code)]

use rand::Rng;
use sharpjet_core::{Jet, JetPoint, Vector};

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

/// `E = {-1, 1}`, `f = 1`, `G = ∓1`: the envelope is `x²/2 + 1/2` on
/// `[-1, 1]` and `|x|` outside.
pub fn huber() -> Jet {
    Jet::new(
        1,
        vec![JetPoint::new(v(&[-1.0]), 1.0, v(&[-1.0])), JetPoint::new(v(&[1.0]), 1.0, v(&[1.0]))],
    )
    .unwrap()
}

pub fn huber_closed_form(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        0.5 * x * x + 0.5
    } else {
        x.abs()
    }
}

/// `E = {(±1, 0)}`, `f = 1`, `G = (±1, 0)`, to be extended with `X = R²`.
pub fn planar() -> Jet {
    Jet::new(
        2,
        vec![
            JetPoint::new(v(&[-1.0, 0.0]), 1.0, v(&[-1.0, 0.0])),
            JetPoint::new(v(&[1.0, 0.0]), 1.0, v(&[1.0, 0.0])),
        ],
    )
    .unwrap()
}

pub fn full_span(n: usize) -> Vec<Vector> {
    (0..n)
        .map(|k| {
            let mut e = Vector::zeros(n);
            e[k] = 1.0;
            e
        })
        .collect()
}

/// Jet of `log sum_k exp(<a_k, x> + b_k)` at `sites` random points of `[-2, 2]^n`.
pub fn lse_jet<R: Rng>(rng: &mut R, n: usize, terms: usize, sites: usize) -> Jet {
    let a: Vec<Vector> = (0..terms).map(|_| Vector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5))).collect();
    let b: Vec<f64> = (0..terms).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let points = (0..sites)
        .map(|_| {
            let x = Vector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let w: Vec<f64> = a.iter().zip(&b).map(|(ak, bk)| ak.dot(&x) + bk).collect();
            let top = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = w.iter().map(|t| (t - top).exp()).collect();
            let total: f64 = e.iter().sum();
            let mut g = Vector::zeros(n);
            for (ak, ek) in a.iter().zip(&e) {
                g += ak * (ek / total);
            }
            JetPoint::new(x, top + total.ln(), g)
        })
        .collect();
    Jet::new(n, points).unwrap()
}

/// Random jet with nonconstant gradients and a subspace `X ⊇ Y`, sometimes
/// strictly larger than `Y` and sometimes a proper subspace of `R^n`.
pub fn random_instance<R: Rng>(rng: &mut R, index: usize) -> (Jet, Option<Vec<Vector>>) {
    let n = 1 + index % 3;
    let terms = 2 + rng.gen_range(0..n);
    let sites = rng.gen_range(2..7);
    let jet = lse_jet(rng, n, terms, sites);
    let y = sharpjet_core::jet::compute_y(&jet, sharpjet_core::geometry::DEFAULT_RANK_TOL).unwrap();
    let mut span = y.basis_vectors();
    if index % 2 == 1 && y.dim() < n {
        span.push(Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)));
    }
    (jet, Some(span))
}
