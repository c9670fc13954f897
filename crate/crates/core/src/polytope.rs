//! Inradius about the origin of the convex hull of finitely many points.
//!
//! For a polytope `P = conv{u_i}` containing the origin in its interior, the
//! largest ball centred at the origin inside `P` has radius
//! `min_w max_i <u_i, w>` over unit `w`, attained at a facet normal. Facets
//! are enumerated by brute force over `d`-subsets of points: a subset spans a
//! candidate hyperplane, which is kept when every point lies on one side.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr_free::unit_direction;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vector;

/// Above this many `d`-subsets the sampled under-approximation is used.
pub const MAX_EXACT_SUBSETS: u128 = 2_000_000;

/// Safety factor applied to the sampled directional minimum.
pub const SAMPLED_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inradius {
    pub radius: f64,
    /// `false` when the sampled fallback produced the value.
    pub exact: bool,
}

pub fn inradius_about_origin(points: &[Vector]) -> Result<Inradius> {
    let Some(first) = points.first() else {
        return Err(Error::NotCoercive("no slopes".into()));
    };
    let d = first.len();
    if d == 0 {
        return Err(Error::NotCoercive("zero-dimensional subspace".into()));
    }
    let scale = points.iter().map(|p| p.amax()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::NotCoercive("all slopes vanish".into()));
    }
    let pts = dedupe(points, 1e-12 * scale);

    let diffs: Vec<Vector> = pts[1..].iter().map(|p| p - &pts[0]).collect();
    let rank = if diffs.is_empty() {
        0
    } else {
        DMatrix::from_columns(&diffs).rank(1e-9 * scale)
    };
    if rank < d {
        return Err(Error::NotCoercive(format!(
            "slopes span an affine set of dimension {rank} < {d}"
        )));
    }

    let result = if d == 1 {
        let hi = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        Inradius { radius: hi.min(-lo), exact: true }
    } else if binomial(pts.len(), d) <= MAX_EXACT_SUBSETS {
        Inradius { radius: facet_minimum(&pts, scale)?, exact: true }
    } else {
        Inradius { radius: SAMPLED_SAFETY * sampled_minimum(&pts), exact: false }
    };
    if !(result.radius > 1e-12 * scale) {
        return Err(Error::NotCoercive(format!(
            "origin is not interior to the slope hull (inradius {:.3e})",
            result.radius
        )));
    }
    Ok(result)
}

fn dedupe(points: &[Vector], tol: f64) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(points.len());
    for p in points {
        if out.iter().all(|q| (p - q).amax() > tol) {
            out.push(p.clone());
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > MAX_EXACT_SUBSETS * 1000 {
            return acc;
        }
    }
    acc
}

/// Minimum signed distance from the origin to the supporting hyperplanes
/// spanned by `d`-subsets.
fn facet_minimum(pts: &[Vector], scale: f64) -> Result<f64> {
    let d = pts[0].len();
    let side_tol = 1e-10 * scale;
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        if let Some(normal) = hyperplane_normal(pts, &idx) {
            let h = normal.dot(&pts[idx[0]]);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in pts {
                let s = normal.dot(p) - h;
                lo = lo.min(s);
                hi = hi.max(s);
            }
            if hi <= side_tol {
                best = best.min(h);
            } else if lo >= -side_tol {
                best = best.min(-h);
            }
        }
        if !next_combination(&mut idx, pts.len()) {
            break;
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Internal("no supporting hyperplane found for a full-dimensional hull".into()))
    }
}

/// Unit normal to the affine hull of `pts[idx]` via the generalized cross
/// product of the edge vectors; `None` when the points are degenerate.
fn hyperplane_normal(pts: &[Vector], idx: &[usize]) -> Option<Vector> {
    let d = pts[0].len();
    let base = &pts[idx[0]];
    let edges: Vec<Vector> = idx[1..].iter().map(|&i| &pts[i] - base).collect();
    let edge_scale: f64 = edges.iter().map(|e| e.norm()).product();
    if edge_scale == 0.0 {
        return None;
    }
    // rows = edges, d-1 x d
    let m = DMatrix::from_fn(d - 1, d, |r, c| edges[r][c]);
    let mut normal = Vector::zeros(d);
    for k in 0..d {
        let minor = m.clone().remove_column(k);
        let det = if d == 1 { 1.0 } else { minor.determinant() };
        normal[k] = if k % 2 == 0 { det } else { -det };
    }
    let norm = normal.norm();
    if norm <= 1e-10 * edge_scale {
        return None;
    }
    Some(normal / norm)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Minimum of the support function over deterministic sampled directions
/// (an over-estimate of the inradius before the safety factor).
fn sampled_minimum(pts: &[Vector]) -> f64 {
    let d = pts[0].len();
    let support = |w: &Vector| pts.iter().map(|p| p.dot(w)).fold(f64::NEG_INFINITY, f64::max);
    let mut best = f64::INFINITY;
    for k in 0..d {
        for sign in [1.0, -1.0] {
            let mut w = Vector::zeros(d);
            w[k] = sign;
            best = best.min(support(&w));
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..4000 * d {
        best = best.min(support(&unit_direction(&mut rng, d)));
    }
    best
}

/// Uniform directions on the sphere without pulling in `rand_distr`.
mod rand_distr_free {
    use rand::Rng;

    use crate::geometry::Vector;

    pub fn unit_direction<R: Rng>(rng: &mut R, d: usize) -> Vector {
        loop {
            let v = Vector::from_fn(d, |_, _| gaussian(rng));
            let n = v.norm();
            if n > 1e-12 {
                return v / n;
            }
        }
    }

    fn gaussian<R: Rng>(rng: &mut R) -> f64 {
        // Box–Muller
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(raw: &[&[f64]]) -> Vec<Vector> {
        raw.iter().map(|p| Vector::from_row_slice(p)).collect()
    }

    #[test]
    fn interval_inradius() {
        assert_eq!(inradius_about_origin(&pts(&[&[-1.0], &[1.0]])).unwrap().radius, 1.0);
        assert_eq!(inradius_about_origin(&pts(&[&[2.0], &[-1.0]])).unwrap().radius, 1.0);
        assert!(matches!(
            inradius_about_origin(&pts(&[&[1.0], &[2.0]])),
            Err(Error::NotCoercive(_))
        ));
    }

    #[test]
    fn square_and_triangle() {
        let sq = pts(&[&[1.0, 1.0], &[-1.0, 1.0], &[-1.0, -1.0], &[1.0, -1.0], &[0.2, 0.1]]);
        let r = inradius_about_origin(&sq).unwrap();
        assert!(r.exact);
        assert!((r.radius - 1.0).abs() < 1e-14);

        // Triangle (1,-1/12), (-1,-1/12), (0,1/6): bottom edge at distance 1/12,
        // slanted edges on 0.25|x| + y = 1/6, distance (1/6)/sqrt(1.0625).
        let tri = pts(&[&[1.0, -1.0 / 12.0], &[-1.0, -1.0 / 12.0], &[0.0, 1.0 / 6.0]]);
        let r = inradius_about_origin(&tri).unwrap();
        assert!((r.radius - 1.0 / 12.0).abs() < 1e-14);

        let boundary = pts(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 0.25]]);
        assert!(inradius_about_origin(&boundary).is_err());
        let flat = pts(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.5, 0.0]]);
        assert!(inradius_about_origin(&flat).is_err());
    }

    #[test]
    fn octahedron_in_three_dimensions() {
        // conv{±e_i}: facets x+y+z = 1 at distance 1/sqrt(3).
        let o = pts(&[
            &[1.0, 0.0, 0.0],
            &[-1.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.0, -1.0, 0.0],
            &[0.0, 0.0, 1.0],
            &[0.0, 0.0, -1.0],
        ]);
        let r = inradius_about_origin(&o).unwrap();
        assert!((r.radius - 1.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sampled_fallback_underestimates() {
        let o = pts(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]);
        let s = SAMPLED_SAFETY * sampled_minimum(&o);
        let exact = 1.0 / 2f64.sqrt();
        assert!(s <= exact && s > 0.85 * exact);
    }
}
