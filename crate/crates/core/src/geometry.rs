//! Spans, orthonormal bases and orthogonal projections in low dimension.
//!
//! Every [`Subspace`] carries a canonical orthonormal basis: the basis is
//! extracted from the orthogonal projector by Gram–Schmidt with column
//! pivoting, so two descriptions of the same subspace give the same basis
//! (up to rounding) and the basis does not depend on the order or scaling of
//! the spanning vectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Orthonormality tolerance enforced on every stored basis.
const ORTHO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    /// `ambient_dim x dim`, orthonormal columns.
    basis: DMatrix<f64>,
    rank_tol: f64,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: DMatrix::zeros(ambient_dim, 0),
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: DMatrix::identity(ambient_dim, ambient_dim),
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    /// Span of `vs`, discarding singular directions below `rank_tol * sigma_max`.
    pub fn span(ambient_dim: usize, vs: &[Vector], rank_tol: f64) -> Result<Self> {
        Self::span_with_scale(ambient_dim, vs, rank_tol, 0.0)
    }

    /// Like [`Subspace::span`], but the threshold is `rank_tol * max(sigma_max, scale)`.
    ///
    /// `scale` lets callers declare the magnitude of the quantities the vectors
    /// were computed from, so that a set of rounding-level differences has rank 0.
    pub fn span_with_scale(
        ambient_dim: usize,
        vs: &[Vector],
        rank_tol: f64,
        scale: f64,
    ) -> Result<Self> {
        if !(rank_tol > 0.0) {
            return Err(Error::Internal(format!("rank_tol must be positive, got {rank_tol}")));
        }
        for v in vs {
            if v.len() != ambient_dim {
                return Err(Error::DimensionMismatch { expected: ambient_dim, found: v.len() });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("spanning vector"));
            }
        }
        if vs.is_empty() || ambient_dim == 0 {
            return Ok(Self { rank_tol, ..Self::zero(ambient_dim) });
        }
        let q = pivoted_orthonormalize(vs, rank_tol, scale);
        if q.is_empty() {
            return Ok(Self { rank_tol, ..Self::zero(ambient_dim) });
        }
        let qm = DMatrix::from_columns(&q);
        let projector = &qm * qm.transpose();
        Ok(Self {
            ambient_dim,
            basis: canonical_basis(&projector, q.len()),
            rank_tol,
        })
    }

    /// Builds a subspace from vectors that are already orthonormal.
    pub fn from_orthonormal(ambient_dim: usize, basis: Vec<Vector>, rank_tol: f64) -> Result<Self> {
        for b in &basis {
            if b.len() != ambient_dim {
                return Err(Error::DimensionMismatch { expected: ambient_dim, found: b.len() });
            }
        }
        let basis = if basis.is_empty() {
            DMatrix::zeros(ambient_dim, 0)
        } else {
            DMatrix::from_columns(&basis)
        };
        let gram = basis.transpose() * &basis;
        let k = basis.ncols();
        let dev = (gram - DMatrix::identity(k, k)).amax();
        if dev > ORTHO_TOL {
            return Err(Error::Parse(format!("basis is not orthonormal (deviation {dev:.3e})")));
        }
        Ok(Self { ambient_dim, basis, rank_tol })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// `ambient_dim x dim` matrix of basis columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<Vector> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient_dim
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Orthogonal projection `sum_i <b_i, x> b_i`.
    ///
    /// Panics if `x` has the wrong length; see [`Subspace::checked_project`].
    pub fn project(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.ambient_dim, "projection dimension mismatch");
        &self.basis * (self.basis.transpose() * x)
    }

    pub fn checked_project(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, found: x.len() });
        }
        Ok(self.project(x))
    }

    /// Component of `x` orthogonal to the subspace.
    pub fn reject(&self, x: &Vector) -> Vector {
        x - self.project(x)
    }

    /// Coordinates of the projection of `x` in the stored basis.
    pub fn coords(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.ambient_dim, "coordinate dimension mismatch");
        self.basis.transpose() * x
    }

    /// Inverse of [`Subspace::coords`] on the subspace.
    pub fn embed(&self, c: &Vector) -> Vector {
        assert_eq!(c.len(), self.dim(), "embedding dimension mismatch");
        &self.basis * c
    }

    pub fn complement(&self) -> Self {
        let n = self.ambient_dim;
        let p = DMatrix::identity(n, n) - self.projector();
        Self {
            ambient_dim: n,
            basis: canonical_basis(&p, n - self.dim()),
            rank_tol: self.rank_tol,
        }
    }

    /// `self ∩ inner^⊥` for `inner ⊆ self`, with a canonical basis.
    pub fn orthogonal_difference(&self, inner: &Subspace) -> Result<Self> {
        let residual = self.containment_residual(inner);
        if residual > 1e-10 {
            return Err(Error::YNotInX { residual });
        }
        let p = self.projector() - inner.projector();
        Ok(Self {
            ambient_dim: self.ambient_dim,
            basis: canonical_basis(&p, self.dim() - inner.dim()),
            rank_tol: self.rank_tol,
        })
    }

    /// Largest distance from a basis vector of `other` to `self`
    /// (zero iff `other ⊆ self`).
    pub fn containment_residual(&self, other: &Subspace) -> f64 {
        other
            .basis
            .column_iter()
            .map(|b| {
                let b = b.into_owned();
                (&b - self.project(&b)).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, other: &Subspace, tol: f64) -> bool {
        self.containment_residual(other) <= tol
    }

    /// Max-entry distance between the two orthogonal projectors.
    pub fn projector_distance(&self, other: &Subspace) -> f64 {
        if self.ambient_dim != other.ambient_dim {
            return f64::INFINITY;
        }
        (self.projector() - other.projector()).amax()
    }

    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.dim() == other.dim() && self.projector_distance(other) <= tol
    }
}

/// Pivoted Gram–Schmidt on the columns of a rank-`k` orthogonal projector.
///
/// Picks the column with the largest residual (lowest index on near-ties),
/// so the i-th basis vector has a positive entry at its pivot index.
/// Column-pivoted Gram-Schmidt with one reorthogonalization pass. Stops when
/// the largest remaining residual is at most `rank_tol * max(max |v|, scale)`.
///
/// This replaces an SVD: the one in nalgebra 0.33 can return wrong singular
/// vectors for exactly rank-deficient inputs.
fn pivoted_orthonormalize(vs: &[Vector], rank_tol: f64, scale: f64) -> Vec<Vector> {
    let mut resid: Vec<Vector> = vs.to_vec();
    let largest = vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let threshold = rank_tol * largest.max(scale);
    let mut q: Vec<Vector> = Vec::new();
    let dim = vs.first().map_or(0, |v| v.len());
    while q.len() < dim {
        let (pivot, norm) = resid
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.norm()))
            .fold((0, -1.0), |b, c| if c.1 > b.1 * (1.0 + 1e-12) { c } else { b });
        if norm <= threshold {
            break;
        }
        let mut u = resid[pivot].clone();
        for _ in 0..2 {
            for b in &q {
                let d = b.dot(&u);
                u.axpy(-d, b, 1.0);
            }
        }
        let un = u.norm();
        if un <= threshold {
            break;
        }
        u /= un;
        for r in resid.iter_mut() {
            let d = u.dot(r);
            r.axpy(-d, &u, 1.0);
        }
        resid[pivot].fill(0.0);
        q.push(u);
    }
    q
}

fn canonical_basis(projector: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = projector.nrows();
    let mut resid = projector.clone();
    let mut basis = DMatrix::zeros(n, k);
    for c in 0..k {
        let mut pivot = 0;
        let mut pivot_norm = -1.0;
        for j in 0..n {
            let nn = resid.column(j).norm();
            if nn > pivot_norm * (1.0 + 1e-10) {
                pivot = j;
                pivot_norm = nn;
            }
        }
        let mut q: Vector = resid.column(pivot).into_owned();
        for prev in 0..c {
            let b = basis.column(prev).into_owned();
            let d = b.dot(&q);
            q -= b * d;
        }
        let norm = q.norm();
        if norm == 0.0 {
            break;
        }
        q /= norm;
        for j in 0..n {
            let d = q.dot(&resid.column(j));
            let mut col = resid.column_mut(j);
            col.axpy(-d, &q, 1.0);
        }
        basis.set_column(c, &q);
    }
    basis
}

#[derive(Serialize, Deserialize)]
struct SubspaceRepr {
    ambient_dim: usize,
    basis: Vec<Vec<f64>>,
    rank_tol: f64,
}

impl Serialize for Subspace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SubspaceRepr {
            ambient_dim: self.ambient_dim,
            basis: self.basis.column_iter().map(|c| c.iter().cloned().collect()).collect(),
            rank_tol: self.rank_tol,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SubspaceRepr::deserialize(d)?;
        let basis = repr.basis.into_iter().map(DVector::from_vec).collect();
        Subspace::from_orthonormal(repr.ambient_dim, basis, repr.rank_tol)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn rank_deficient_columns_keep_their_direction() {
        // an input on which nalgebra's SVD returns a wrong left singular vector
        let a = v(&[-0.1708416869504028, -0.05555699598053643, -0.10375223043584453]);
        let b = v(&[0.5303020282161025, 0.17245198274485207, 0.32205265128320715]);
        let s = Subspace::span_with_scale(3, &[a.clone(), b], 1e-9, 1.9).unwrap();
        assert_eq!(s.dim(), 1);
        assert!(s.reject(&a).norm() < 1e-15);
    }

    #[test]
    fn collinear_vectors_span_a_line() {
        let s = Subspace::span(2, &[v(&[1.0, 0.0]), v(&[2.0, 0.0])], 1e-9).unwrap();
        assert_eq!(s.dim(), 1);
        assert!((s.basis_vectors()[0].clone() - v(&[1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn empty_span_is_zero() {
        let s = Subspace::span(3, &[], 1e-9).unwrap();
        assert_eq!(s.dim(), 0);
        assert_eq!(s.project(&v(&[1.0, 2.0, 3.0])), v(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn tiny_second_component_is_kept_in_direction() {
        // 2x1 SVD by hand: sigma = sqrt(1 + 1e-24), u = (1, 1e-12)/sigma.
        let s = Subspace::span(2, &[v(&[1.0, 1e-12])], 1e-9).unwrap();
        assert_eq!(s.dim(), 1);
        let b = &s.basis_vectors()[0];
        let sigma = (1.0f64 + 1e-24).sqrt();
        assert!((b[0] - 1.0 / sigma).abs() < 1e-15);
        assert!((b[1] - 1e-12 / sigma).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let err = Subspace::span(2, &[v(&[1.0, 0.0]), v(&[1.0])], 1e-9).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn projections_by_hand() {
        let line = Subspace::span(2, &[v(&[1.0, 0.0])], 1e-9).unwrap();
        assert_eq!(line.project(&v(&[3.0, 4.0])), v(&[3.0, 0.0]));
        let full = Subspace::full(2);
        assert_eq!(full.project(&v(&[3.0, 4.0])), v(&[3.0, 4.0]));
        let diag = Subspace::span(2, &[v(&[1.0, 1.0])], 1e-9).unwrap();
        let p = diag.project(&v(&[1.0, 0.0]));
        assert!((p - v(&[0.5, 0.5])).norm() < 1e-15);
    }

    #[test]
    fn complements_by_hand() {
        let e1 = Subspace::span(2, &[v(&[1.0, 0.0])], 1e-9).unwrap();
        let c = e1.complement();
        assert_eq!(c.dim(), 1);
        assert!((c.basis_vectors()[0].clone() - v(&[0.0, 1.0])).norm() < 1e-15);

        assert_eq!(Subspace::full(3).complement().dim(), 0);

        let diag = Subspace::span(2, &[v(&[1.0, 1.0])], 1e-9).unwrap();
        let c = diag.complement();
        let b = c.basis_vectors()[0].clone();
        let expected = v(&[1.0, -1.0]) / 2f64.sqrt();
        assert!((b.clone() - &expected).norm() < 1e-12 || (b + expected).norm() < 1e-12);
    }

    #[test]
    fn orthogonal_difference_of_plane_and_axis() {
        let x = Subspace::full(2);
        let y = Subspace::span(2, &[v(&[1.0, 0.0])], 1e-9).unwrap();
        let w = x.orthogonal_difference(&y).unwrap();
        assert_eq!(w.dim(), 1);
        assert!((w.basis_vectors()[0].clone() - v(&[0.0, 1.0])).norm() < 1e-15);
        assert!(y.orthogonal_difference(&x).is_err());
    }

    #[test]
    fn serde_round_trip_keeps_projector() {
        let s = Subspace::span(3, &[v(&[1.0, 2.0, 0.0]), v(&[0.0, 1.0, 1.0])], 1e-9).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: Subspace = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vector> {
        prop::collection::vec(-10.0f64..10.0, n).prop_map(DVector::from_vec)
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_splits(
            vs in prop::collection::vec(vec_strategy(4), 0..4),
            x in vec_strategy(4),
        ) {
            let s = Subspace::span(4, &vs, 1e-9).unwrap();
            let p = s.project(&x);
            prop_assert!((s.project(&p) - &p).norm() <= 1e-12 * (1.0 + x.norm()));
            let q = s.complement().project(&x);
            prop_assert!((p + q - &x).norm() <= 1e-10 * (1.0 + x.norm()));
            let gram = s.basis().transpose() * s.basis();
            prop_assert!((gram - DMatrix::identity(s.dim(), s.dim())).amax() <= 1e-10);
        }

        #[test]
        fn recombined_basis_gives_same_projector(
            a in vec_strategy(3),
            b in vec_strategy(3),
            mix in prop::collection::vec(-3.0f64..3.0, 4),
        ) {
            let s1 = Subspace::span(3, &[a.clone(), b.clone()], 1e-9).unwrap();
            prop_assume!(s1.dim() == 2);
            let det = mix[0] * mix[3] - mix[1] * mix[2];
            prop_assume!(det.abs() > 0.1);
            let c = &a * mix[0] + &b * mix[1];
            let d = &a * mix[2] + &b * mix[3];
            let s2 = Subspace::span(3, &[c, d], 1e-9).unwrap();
            prop_assert_eq!(s2.dim(), 2);
            prop_assert!(s1.projector_distance(&s2) <= 1e-9);
        }
    }
}
