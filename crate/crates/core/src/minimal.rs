//! Corner functions, the minimal convex extension of a jet, and the splitting
//! of a corner function into a coercive part on a subspace plus a linear term.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Subspace, Vector};
use crate::jet::Jet;
use crate::polytope::inradius_about_origin;

/// Tolerance for slopes lying in the ambient subspace of a corner function.
pub const AMBIENT_TOL: f64 = 1e-10;

/// Projector distance accepted when comparing a declared subspace with the
/// span of slope differences.
pub const SPAN_MATCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    #[serde(with = "crate::serde_vec")]
    pub slope: Vector,
    pub offset: f64,
}

/// `x -> max_i <u_i, x> + beta_i`. Slopes are stored as ambient vectors lying
/// in `ambient`; evaluation takes ambient vectors (callers project first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerFunction {
    pieces: Vec<Piece>,
    ambient: Subspace,
}

impl CornerFunction {
    pub fn new(pieces: Vec<Piece>, ambient: Subspace) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Internal("corner function needs at least one piece".into()));
        }
        for p in &pieces {
            if p.slope.len() != ambient.ambient_dim() {
                return Err(Error::DimensionMismatch {
                    expected: ambient.ambient_dim(),
                    found: p.slope.len(),
                });
            }
            if !p.offset.is_finite() || p.slope.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("corner piece"));
            }
            let off = ambient.reject(&p.slope).norm();
            if off > AMBIENT_TOL * (1.0 + p.slope.norm()) {
                return Err(Error::Internal(format!(
                    "slope leaves the ambient subspace by {off:.3e}"
                )));
            }
        }
        Ok(Self { pieces, ambient })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn ambient(&self) -> &Subspace {
        &self.ambient
    }

    pub fn dim(&self) -> usize {
        self.ambient.ambient_dim()
    }

    /// Value and index of the active piece (lowest index on ties).
    pub fn eval(&self, x: &Vector) -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (i, p) in self.pieces.iter().enumerate() {
            let v = p.slope.dot(x) + p.offset;
            if v > best {
                best = v;
                arg = i;
            }
        }
        (best, arg)
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.eval(x).0
    }

    /// Largest slope norm.
    pub fn lipschitz(&self) -> f64 {
        self.pieces.iter().map(|p| p.slope.norm()).fold(0.0, f64::max)
    }

    /// Slopes with near-duplicates removed, in first-occurrence order.
    pub fn distinct_slopes(&self) -> Vec<Vector> {
        let scale = 1.0 + self.lipschitz();
        let mut out: Vec<Vector> = Vec::new();
        for p in &self.pieces {
            if out.iter().all(|q| (&p.slope - q).amax() > 1e-12 * scale) {
                out.push(p.slope.clone());
            }
        }
        out
    }

    /// Span of slope differences.
    pub fn slope_span(&self, rank_tol: f64) -> Result<Subspace> {
        let slopes = self.distinct_slopes();
        let diffs: Vec<Vector> = slopes[1..].iter().map(|u| u - &slopes[0]).collect();
        Subspace::span_with_scale(self.dim(), &diffs, rank_tol, self.lipschitz())
    }
}

/// `m(x) = max_i f_i + <G_i, x - x_i>`, the smallest convex function matching the jet.
pub fn build_minimal(jet: &Jet) -> CornerFunction {
    let pieces = jet
        .points()
        .iter()
        .map(|p| Piece {
            slope: p.gradient.clone(),
            offset: p.value - p.gradient.dot(&p.site),
        })
        .collect();
    CornerFunction::new(pieces, Subspace::full(jet.ambient_dim()))
        .expect("validated jet gives finite full-space pieces")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityConstants {
    /// Inradius about the origin of the slope hull: `c(y) >= a|y| + b`.
    pub a: f64,
    pub b: f64,
    /// `false` when `a` comes from the sampled under-approximation.
    pub exact: bool,
}

/// `m = c o P_S + <v, .>` with `c` coercive on `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub subspace: Subspace,
    #[serde(with = "crate::serde_vec")]
    pub v: Vector,
    pub coercive_part: CornerFunction,
    pub a: f64,
    pub b: f64,
    pub a_exact: bool,
    /// Lipschitz constant the strict bound `|v| < L` was checked against.
    pub lipschitz: f64,
}

impl Decomposition {
    /// `c(P_S x) + <v, x>`.
    pub fn reconstruct(&self, x: &Vector) -> f64 {
        self.coercive_part.value(&self.subspace.project(x)) + self.v.dot(x)
    }
}

/// Splits `m` along `s`, which must equal the span of slope differences.
///
/// `v` is the mean of the distinct slopes: it lies in the relative interior
/// of their hull, so the origin is interior to the hull of the shifted slopes
/// (coercivity of `c`) and `|v| < max |u_i|` unless the slopes coincide.
pub fn decompose(m: &CornerFunction, s: &Subspace, lipschitz: f64) -> Result<Decomposition> {
    if s.ambient_dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), found: s.ambient_dim() });
    }
    let slopes = m.distinct_slopes();
    if slopes.len() < 2 {
        return Err(Error::AffineCorner);
    }
    let span = m.slope_span(s.rank_tol())?;
    let gap = span.projector_distance(s);
    if gap > SPAN_MATCH_TOL {
        return Err(Error::SubspaceMismatch { gap });
    }

    let mut v = Vector::zeros(m.dim());
    for u in &slopes {
        v += u;
    }
    v /= slopes.len() as f64;

    let v_perp = s.reject(&v);
    let spread = m
        .pieces()
        .iter()
        .map(|p| (s.reject(&p.slope) - &v_perp).norm())
        .fold(0.0, f64::max);
    if spread > 1e-9 * (1.0 + m.lipschitz()) {
        return Err(Error::NonConstantOrthogonalPart { spread });
    }
    let v_norm = v.norm();
    if !(v_norm < lipschitz * (1.0 - 1e-12)) {
        return Err(Error::LinearPartTooLarge { v_norm, lipschitz });
    }

    let v_s = s.project(&v);
    let pieces = m
        .pieces()
        .iter()
        .map(|p| Piece { slope: s.project(&p.slope) - &v_s, offset: p.offset })
        .collect();
    let c = CornerFunction::new(pieces, s.clone())?;
    let k = coercivity_constants(&c)?;
    if !k.exact {
        audit_minorant(&c, k.a, k.b)?;
    }
    Ok(Decomposition {
        subspace: s.clone(),
        v,
        coercive_part: c,
        a: k.a,
        b: k.b,
        a_exact: k.exact,
        lipschitz,
    })
}

/// `a` = inradius about the origin of the slope hull (in the ambient subspace
/// of `c`), `b = min(min_i beta_i, 0)`: the support function of the hull
/// dominates `a|y|`, so `c(y) >= a|y| + min_i beta_i`.
pub fn coercivity_constants(c: &CornerFunction) -> Result<CoercivityConstants> {
    let s = c.ambient();
    let pts: Vec<Vector> = c.pieces().iter().map(|p| s.coords(&p.slope)).collect();
    let r = inradius_about_origin(&pts)?;
    let min_beta = c.pieces().iter().map(|p| p.offset).fold(f64::INFINITY, f64::min);
    Ok(CoercivityConstants { a: r.radius, b: min_beta.min(0.0), exact: r.exact })
}

/// Deterministic sampled check of `c(y) >= a|y| + b` on the ambient subspace.
pub fn audit_minorant(c: &CornerFunction, a: f64, b: f64) -> Result<()> {
    let worst = minorant_worst_slack(c, a, b, 4096, 1e3, 0);
    let tol = 1e-9 * (1.0 + c.lipschitz() * 1e3 + b.abs());
    if worst < -tol {
        return Err(Error::MinorantAudit { worst });
    }
    Ok(())
}

/// `min (c(y) - a|y| - b)` over `samples` points of the subspace with radii up
/// to `radius` (directions uniform, radius log-spread), plus the slope
/// directions themselves.
pub fn minorant_worst_slack(
    c: &CornerFunction,
    a: f64,
    b: f64,
    samples: usize,
    radius: f64,
    seed: u64,
) -> f64 {
    let s = c.ambient();
    let d = s.dim();
    let mut worst = f64::INFINITY;
    let mut check = |y: &Vector| {
        let slack = c.value(y) - a * y.norm() - b;
        worst = worst.min(slack);
    };
    check(&Vector::zeros(s.ambient_dim()));
    if d == 0 {
        return worst;
    }
    for p in c.pieces() {
        let n = p.slope.norm();
        if n > 0.0 {
            for t in [1.0, radius] {
                check(&(-&p.slope * (t / n)));
            }
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let dir = Vector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let n = dir.norm();
        if n < 1e-12 {
            continue;
        }
        let t = radius.powf(rng.gen_range(0.0..1.0)) * rng.gen_range(0.0..1.0f64).max(1e-3);
        check(&s.embed(&(dir * (t / n))));
    }
    worst
}

/// Decomposition of `max_j <v_j, x> + beta_j` with `v` the plain mean of the
/// slopes, for slope sets whose differences `v_j - v_1` are independent.
pub fn decompose_by_mean_slope(vs: &[Vector], betas: &[f64]) -> Result<Decomposition> {
    if vs.is_empty() || vs.len() != betas.len() {
        return Err(Error::Internal("need one offset per slope".into()));
    }
    let n = vs[0].len();
    let k = vs.len() - 1;
    let diffs: Vec<Vector> = vs[1..].iter().map(|u| u - &vs[0]).collect();
    let lipschitz = vs.iter().map(|u| u.norm()).fold(0.0, f64::max);
    let x = Subspace::span_with_scale(n, &diffs, crate::geometry::DEFAULT_RANK_TOL, lipschitz)?;
    if x.dim() < k {
        return Err(Error::DependentSlopes { rank: x.dim(), expected: k });
    }
    if k == 0 {
        return Err(Error::AffineCorner);
    }
    let mut v = Vector::zeros(n);
    for u in vs {
        v += u;
    }
    v /= vs.len() as f64;
    let v_norm = v.norm();
    if !(v_norm < lipschitz) {
        return Err(Error::LinearPartTooLarge { v_norm, lipschitz });
    }
    let pieces = vs
        .iter()
        .zip(betas)
        .map(|(u, &beta)| Piece { slope: x.project(&(u - &v)), offset: beta })
        .collect();
    let c = CornerFunction::new(pieces, x.clone())?;
    let k = coercivity_constants(&c)?;
    Ok(Decomposition {
        subspace: x,
        v,
        coercive_part: c,
        a: k.a,
        b: k.b,
        a_exact: k.exact,
        lipschitz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetPoint;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn huber() -> Jet {
        Jet::new(
            1,
            vec![
                JetPoint::new(v(&[-1.0]), 1.0, v(&[-1.0])),
                JetPoint::new(v(&[1.0]), 1.0, v(&[1.0])),
            ],
        )
        .unwrap()
    }

    fn corner(raw: &[(&[f64], f64)]) -> CornerFunction {
        let n = raw[0].0.len();
        CornerFunction::new(
            raw.iter().map(|(u, b)| Piece { slope: v(u), offset: *b }).collect(),
            Subspace::full(n),
        )
        .unwrap()
    }

    #[test]
    fn huber_minimal_is_abs() {
        let m = build_minimal(&huber());
        for x in [-3.0, -0.5, 0.0, 0.25, 2.0] {
            assert_eq!(m.value(&v(&[x])), f64::abs(x));
        }
        assert_eq!(m.eval(&v(&[2.0])), (2.0, 1));
        assert_eq!(m.eval(&v(&[0.0])), (0.0, 0));
    }

    #[test]
    fn single_point_is_affine() {
        let j = Jet::new(2, vec![JetPoint::new(v(&[0.0, 0.0]), 5.0, v(&[1.0, -2.0]))]).unwrap();
        let m = build_minimal(&j);
        assert_eq!(m.value(&v(&[3.0, 1.0])), 5.0 + 3.0 - 2.0);
        assert!(matches!(decompose(&m, &Subspace::zero(2), 5f64.sqrt()), Err(Error::AffineCorner)));
    }

    #[test]
    fn abs_decomposition() {
        let m = corner(&[(&[1.0], 0.0), (&[-1.0], 0.0)]);
        let d = decompose(&m, &Subspace::full(1), 1.0).unwrap();
        assert_eq!(d.v, v(&[0.0]));
        assert_eq!((d.a, d.b), (1.0, 0.0));
        assert_eq!(d.coercive_part.value(&v(&[-3.0])), 3.0);
    }

    #[test]
    fn shifted_abs_decomposition() {
        let m = corner(&[(&[1.0, 0.5], 0.0), (&[-1.0, 0.5], 0.0)]);
        let s = Subspace::span(2, &[v(&[1.0, 0.0])], 1e-9).unwrap();
        let l = 1.25f64.sqrt();
        let d = decompose(&m, &s, l).unwrap();
        assert!((&d.v - v(&[0.0, 0.5])).amax() < 1e-15);
        assert!(d.v.norm() < l);
        assert!((d.coercive_part.value(&v(&[-2.0, 0.0])) - 2.0).abs() < 1e-15);
        assert!((d.a - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_subspace_is_rejected() {
        let m = corner(&[(&[1.0, 0.5], 0.0), (&[-1.0, 0.5], 0.0)]);
        let s = Subspace::span(2, &[v(&[0.0, 1.0])], 1e-9).unwrap();
        assert!(matches!(decompose(&m, &s, 2.0), Err(Error::SubspaceMismatch { .. })));
    }

    #[test]
    fn mean_slope_gives_coercive_part_for_one_sided_slopes() {
        // Slopes {1, 2}: v = 1.5, c = max(-y/2, y/2) + offsets.
        let m = corner(&[(&[1.0], 0.0), (&[2.0], -1.0)]);
        let d = decompose(&m, &Subspace::full(1), 2.0).unwrap();
        assert_eq!(d.v, v(&[1.5]));
        assert_eq!((d.a, d.b), (0.5, -1.0));
    }

    #[test]
    fn coercivity_examples() {
        let k = coercivity_constants(&corner(&[(&[1.0], 0.0), (&[-1.0], 0.0)])).unwrap();
        assert_eq!((k.a, k.b), (1.0, 0.0));
        let k = coercivity_constants(&corner(&[(&[2.0], 0.0), (&[-1.0], 0.0)])).unwrap();
        assert_eq!((k.a, k.b), (1.0, 0.0));
        assert!(matches!(
            coercivity_constants(&corner(&[(&[1.0], 0.0), (&[2.0], 0.0)])),
            Err(Error::NotCoercive(_))
        ));
    }

    #[test]
    fn mean_slope_examples() {
        let d = decompose_by_mean_slope(&[v(&[-1.0]), v(&[1.0])], &[0.0, 0.0]).unwrap();
        assert_eq!(d.v, v(&[0.0]));
        assert_eq!(d.subspace.dim(), 1);
        assert_eq!(d.coercive_part.value(&v(&[-0.5])), 0.5);

        let d = decompose_by_mean_slope(&[v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0])], &[0.0; 3])
            .unwrap();
        assert!((&d.v - v(&[1.0 / 3.0, 1.0 / 3.0])).amax() < 1e-15);
        assert_eq!(d.subspace.dim(), 2);

        assert!(matches!(
            decompose_by_mean_slope(&[v(&[0.0]), v(&[1.0]), v(&[2.0])], &[0.0; 3]),
            Err(Error::DependentSlopes { rank: 1, expected: 2 })
        ));
    }

    fn corner_strategy() -> impl Strategy<Value = (usize, Vec<(Vec<f64>, f64)>)> {
        (1usize..=4).prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(
                    (prop::collection::vec(-3.0..3.0f64, n), -2.0..2.0f64),
                    2..7,
                ),
            )
        })
    }

    proptest! {
        #[test]
        fn decomposition_reconstructs((n, raw) in corner_strategy(),
                                      xs in prop::collection::vec(prop::collection::vec(-50.0..50.0f64, 4), 20)) {
            let m = CornerFunction::new(
                raw.iter().map(|(u, b)| Piece { slope: Vector::from_vec(u.clone()), offset: *b }).collect(),
                Subspace::full(n),
            ).unwrap();
            let s = m.slope_span(1e-9).unwrap();
            let d = decompose(&m, &s, m.lipschitz()).unwrap();
            prop_assert!(d.v.norm() < m.lipschitz());
            prop_assert!(d.a > 0.0 && d.a <= m.lipschitz() + d.v.norm() + 1e-12);
            for x in &xs {
                let x = Vector::from_row_slice(&x[..n]);
                let lhs = m.value(&x);
                let rhs = d.reconstruct(&x);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
            }
            let worst = minorant_worst_slack(&d.coercive_part, d.a, d.b, 2000, 1e3, 1);
            prop_assert!(worst >= -1e-9 * 1e3 * (1.0 + m.lipschitz()));
        }

        #[test]
        fn active_piece_is_a_subgradient((n, raw) in corner_strategy(),
                                         x in prop::collection::vec(-5.0..5.0f64, 4),
                                         z in prop::collection::vec(-5.0..5.0f64, 4)) {
            let m = CornerFunction::new(
                raw.iter().map(|(u, b)| Piece { slope: Vector::from_vec(u.clone()), offset: *b }).collect(),
                Subspace::full(n),
            ).unwrap();
            let x = Vector::from_row_slice(&x[..n]);
            let z = Vector::from_row_slice(&z[..n]);
            let (mx, i) = m.eval(&x);
            let u = &m.pieces()[i].slope;
            prop_assert!(m.value(&z) >= mx + u.dot(&(&z - &x)) - 1e-10);
        }
    }
}
