//! 1-jet data `(f, G)` on a finite set and the necessary conditions for a
//! convex C^1 extension.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Subspace, Vector, DEFAULT_RANK_TOL};

/// Sites closer than this are considered the same point.
pub const SITE_SEPARATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetPoint {
    #[serde(with = "crate::serde_vec")]
    pub site: Vector,
    pub value: f64,
    #[serde(with = "crate::serde_vec")]
    pub gradient: Vector,
}

impl JetPoint {
    pub fn new(site: Vector, value: f64, gradient: Vector) -> Self {
        Self { site, value, gradient }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JetFile", into = "JetFile")]
pub struct Jet {
    points: Vec<JetPoint>,
    ambient_dim: usize,
}

impl Jet {
    pub fn new(ambient_dim: usize, points: Vec<JetPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidJet("a jet needs at least one point".into()));
        }
        for p in &points {
            for len in [p.site.len(), p.gradient.len()] {
                if len != ambient_dim {
                    return Err(Error::DimensionMismatch { expected: ambient_dim, found: len });
                }
            }
            if !p.value.is_finite()
                || p.site.iter().chain(p.gradient.iter()).any(|c| !c.is_finite())
            {
                return Err(Error::NonFinite("jet point"));
            }
        }
        for i in 0..points.len() {
            for j in 0..i {
                if (&points[i].site - &points[j].site).norm() <= SITE_SEPARATION {
                    return Err(Error::InvalidJet(format!("sites {j} and {i} coincide")));
                }
            }
        }
        Ok(Self { points, ambient_dim })
    }

    pub fn points(&self) -> &[JetPoint] {
        &self.points
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_abs_value(&self) -> f64 {
        self.points.iter().map(|p| p.value.abs()).fold(0.0, f64::max)
    }

    /// Convexity residual `f(x_i) - f(x_j) - <G(x_j), x_i - x_j>`.
    pub fn residual(&self, i: usize, j: usize) -> f64 {
        let (pi, pj) = (&self.points[i], &self.points[j]);
        pi.value - pj.value - pj.gradient.dot(&(&pi.site - &pj.site))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("jet serializes")
    }
}

/// On-disk jet schema: `{ "n": int, "points": [ { "x": [..], "f": real, "g": [..] } ] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetFile {
    pub n: usize,
    pub points: Vec<JetFilePoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetFilePoint {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
}

impl TryFrom<JetFile> for Jet {
    type Error = Error;

    fn try_from(file: JetFile) -> Result<Self> {
        let points = file
            .points
            .into_iter()
            .map(|p| JetPoint::new(Vector::from_vec(p.x), p.f, Vector::from_vec(p.g)))
            .collect();
        Jet::new(file.n, points)
    }
}

impl From<Jet> for JetFile {
    fn from(jet: Jet) -> Self {
        JetFile {
            n: jet.ambient_dim,
            points: jet
                .points
                .into_iter()
                .map(|p| JetFilePoint {
                    x: p.site.iter().cloned().collect(),
                    f: p.value,
                    g: p.gradient.iter().cloned().collect(),
                })
                .collect(),
        }
    }
}

/// `L = max |G|` over the data.
pub fn lipschitz_bound(jet: &Jet) -> f64 {
    jet.points.iter().map(|p| p.gradient.norm()).fold(0.0, f64::max)
}

/// Span of `G(x_i) - G(x_0)`, with rank decided relative to the gradient scale.
pub fn compute_y(jet: &Jet, rank_tol: f64) -> Result<Subspace> {
    let g0 = &jet.points[0].gradient;
    let diffs: Vec<Vector> = jet.points[1..].iter().map(|p| &p.gradient - g0).collect();
    Subspace::span_with_scale(jet.ambient_dim, &diffs, rank_tol, lipschitz_bound(jet))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_eq: f64,
    pub tol_grad: f64,
    pub rank_tol: f64,
}

impl Tolerances {
    /// `tol_eq = 1e-9 (1 + max|f|)`, `tol_grad = 1e-7 (1 + L)`, `rank_tol = 1e-9`.
    pub fn for_jet(jet: &Jet) -> Self {
        Self {
            tol_eq: 1e-9 * (1.0 + jet.max_abs_value()),
            tol_grad: 1e-7 * (1.0 + lipschitz_bound(jet)),
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cw1Violation {
    /// Ordered pair `(i, j)` of the residual `r(x_i, x_j)`.
    pub pair: (usize, usize),
    pub residual: f64,
    pub gradient_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub lipschitz: f64,
    /// `None` for single-point jets (no pairs).
    pub min_convexity_residual: Option<f64>,
    pub convexity_violations: Vec<(usize, usize)>,
    pub cw1_violations: Vec<Cw1Violation>,
    /// `max |f(x) - f(z)| / |x - z|` over pairs; bounded by `L` when convexity holds.
    pub max_difference_quotient: f64,
    pub y: Subspace,
    pub tol_eq: f64,
    pub tol_grad: f64,
    pub notes: Vec<String>,
    pub passed: bool,
}

/// Checks `f(x) >= f(y) + <G(y), x - y>` and the flatness implication
/// `r(x, y) = 0 => G(x) = G(y)`, the latter on the band `r <= tol_eq`.
pub fn validate(jet: &Jet, tol_eq: f64, tol_grad: f64) -> ValidationReport {
    validate_with_rank_tol(jet, tol_eq, tol_grad, DEFAULT_RANK_TOL)
}

pub fn validate_with_rank_tol(
    jet: &Jet,
    tol_eq: f64,
    tol_grad: f64,
    rank_tol: f64,
) -> ValidationReport {
    let n = jet.len();
    let mut min_residual: Option<f64> = None;
    let mut convexity_violations = Vec::new();
    let mut cw1_violations = Vec::new();
    let mut max_quotient = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let r = jet.residual(i, j);
            min_residual = Some(min_residual.map_or(r, |m| m.min(r)));
            if r < -tol_eq {
                convexity_violations.push((i, j));
            }
            if r <= tol_eq {
                let gap = (&jet.points[i].gradient - &jet.points[j].gradient).norm();
                if gap > tol_grad {
                    cw1_violations.push(Cw1Violation { pair: (i, j), residual: r, gradient_gap: gap });
                }
            }
            if i < j {
                let dist = (&jet.points[i].site - &jet.points[j].site).norm();
                let q = (jet.points[i].value - jet.points[j].value).abs() / dist;
                max_quotient = max_quotient.max(q);
            }
        }
    }
    let y = compute_y(jet, rank_tol).unwrap_or_else(|_| Subspace::zero(jet.ambient_dim));
    let notes = vec![
        "G is continuous and bounded on a finite set".to_string(),
        "flatness along unbounded sequences reduces to the pairwise condition on a finite set".to_string(),
    ];
    ValidationReport {
        lipschitz: lipschitz_bound(jet),
        min_convexity_residual: min_residual,
        passed: convexity_violations.is_empty() && cw1_violations.is_empty(),
        convexity_violations,
        cw1_violations,
        max_difference_quotient: max_quotient,
        y,
        tol_eq,
        tol_grad,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet1(points: &[(f64, f64, f64)]) -> Jet {
        Jet::new(
            1,
            points
                .iter()
                .map(|&(x, f, g)| JetPoint::new(Vector::from_element(1, x), f, Vector::from_element(1, g)))
                .collect(),
        )
        .unwrap()
    }

    fn huber() -> Jet {
        jet1(&[(-1.0, 1.0, -1.0), (1.0, 1.0, 1.0)])
    }

    #[test]
    fn lipschitz_bound_examples() {
        assert_eq!(lipschitz_bound(&huber()), 1.0);
        assert_eq!(lipschitz_bound(&jet1(&[(0.0, 3.0, 0.0)])), 0.0);
        let j = Jet::new(
            2,
            vec![
                JetPoint::new(Vector::from_row_slice(&[0.0, 0.0]), 0.0, Vector::from_row_slice(&[3.0, 4.0])),
                JetPoint::new(Vector::from_row_slice(&[1.0, 0.0]), 3.0, Vector::from_row_slice(&[0.0, 1.0])),
            ],
        )
        .unwrap();
        assert_eq!(lipschitz_bound(&j), 5.0);
    }

    #[test]
    fn huber_jet_passes() {
        let r = validate(&huber(), 1e-9, 1e-9);
        assert!(r.passed);
        // r(1, -1) = 1 - 1 - (-1)(1 - (-1)) = 2, and symmetrically.
        assert_eq!(r.min_convexity_residual, Some(2.0));
        assert_eq!(r.y.dim(), 1);
    }

    #[test]
    fn affine_segment_passes_with_zero_residual() {
        let r = validate(&jet1(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]), 1e-9, 1e-9);
        assert!(r.passed);
        assert_eq!(r.min_convexity_residual, Some(0.0));
        assert!(r.cw1_violations.is_empty());
        assert_eq!(r.y.dim(), 0);
    }

    #[test]
    fn decreasing_value_with_positive_slope_fails() {
        let r = validate(&jet1(&[(0.0, 0.0, 1.0), (1.0, 0.0, 0.0)]), 1e-9, 1e-9);
        assert!(!r.passed);
        assert_eq!(r.min_convexity_residual, Some(-1.0));
        assert_eq!(r.convexity_violations, vec![(1, 0)]);
    }

    #[test]
    fn flat_pair_with_different_gradients_violates_cw1() {
        // f(x) = max(0, x) data at 0 with gradient 0 and at 1 with gradient 1:
        // r(1, 0) = 1 - 0 - 0 = 1, r(0, 1) = 0 - 1 - 1 * (-1) = 0 while G differs.
        let r = validate(&jet1(&[(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)]), 1e-9, 1e-9);
        assert!(!r.passed);
        assert_eq!(r.cw1_violations.len(), 1);
        assert_eq!(r.cw1_violations[0].pair, (0, 1));
    }

    #[test]
    fn compute_y_examples() {
        let constant = jet1(&[(0.0, 0.0, 2.0), (1.0, 2.0, 2.0)]);
        assert_eq!(compute_y(&constant, 1e-9).unwrap().dim(), 0);
        assert_eq!(compute_y(&huber(), 1e-9).unwrap().dim(), 1);
        let j = Jet::new(
            2,
            vec![
                JetPoint::new(Vector::from_row_slice(&[1.0, 0.0]), 1.0, Vector::from_row_slice(&[1.0, 0.0])),
                JetPoint::new(Vector::from_row_slice(&[-1.0, 0.0]), 1.0, Vector::from_row_slice(&[-1.0, 0.0])),
                JetPoint::new(Vector::from_row_slice(&[0.0, 0.0]), 0.5, Vector::from_row_slice(&[0.0, 0.0])),
            ],
        )
        .unwrap();
        let y = compute_y(&j, 1e-9).unwrap();
        assert_eq!(y.dim(), 1);
        assert!((y.basis_vectors()[0].clone() - Vector::from_row_slice(&[1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn rounding_level_gradient_noise_has_no_span() {
        let j = jet1(&[(0.0, 0.0, 0.1 + 0.2), (1.0, 0.3, 0.3)]);
        assert_eq!(compute_y(&j, 1e-9).unwrap().dim(), 0);
    }

    #[test]
    fn json_schema_is_strict() {
        let ok = r#"{"n":1,"points":[{"x":[-1],"f":1,"g":[-1]},{"x":[1],"f":1,"g":[1]}]}"#;
        assert_eq!(Jet::from_json_str(ok).unwrap(), huber());
        let bad_dim = r#"{"n":2,"points":[{"x":[-1],"f":1,"g":[-1]}]}"#;
        assert!(Jet::from_json_str(bad_dim).is_err());
        let bad_field = r#"{"n":1,"points":[{"x":[-1],"f":1,"grad":[-1]}]}"#;
        assert!(Jet::from_json_str(bad_field).is_err());
        let dup = r#"{"n":1,"points":[{"x":[1],"f":1,"g":[1]},{"x":[1],"f":1,"g":[1]}]}"#;
        assert!(Jet::from_json_str(dup).is_err());
        let back = Jet::from_json_str(&huber().to_json_string()).unwrap();
        assert_eq!(back, huber());
    }
}
