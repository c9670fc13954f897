//! Sharp-constant C^1 convex extensions of finite 1-jets.
//!
//! Given data `(f, G)` on a finite set `E ⊂ R^n` that is compatible with a
//! convex function, and a subspace `X` containing the span of the gradient
//! differences, [`pipeline::extend`] builds a convex `F ∈ C^1(R^n)` with
//! `F = f`, `∇F = G` on `E`, `Lip(F) = max_E |G|` and coercivity directions
//! exactly `X`. Every intermediate object (minimal extensions, decompositions,
//! augmented data, the smooth interpolant) is kept so that [`verify::certify`]
//! can check each stage numerically.

// `!(a < b)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod bundle;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod lft;
pub mod minimal;
pub mod pipeline;
pub mod polytope;
pub mod sampling;
pub mod serde_vec;
pub mod smooth;
pub mod verify;

mod maxmin;

pub use error::{Error, Result};
pub use geometry::{Subspace, Vector};
pub use jet::{Jet, JetPoint};
