//! The extension `F(x) = inf_y F~(y) + L|x - y|` of `F~ = H o P_X + <v*, .>`.
//!
//! Writing `y = (ζ, η)` along `X ⊕ X⊥` and `v* = v_X + v⊥`, the `η`-part of the
//! infimum has the closed form `K |ξ - ζ|` with `K = sqrt(L² - |v⊥|²)`, so
//!
//! `F(x) = <v⊥, x> + min_ζ H~(ζ) + K |ξ - ζ|`,  `ξ = P_X x`, `H~ = H + <v_X, .>`.
//!
//! The remaining inf-convolution is the conjugate problem of `H~` restricted to
//! slopes `|s| <= K`; its maximizer `s*` gives `∇F(x) = s* + v⊥`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Subspace, Vector};
use crate::maxmin::{self, Problem};
use crate::minimal::CornerFunction;
use crate::smooth::SmoothInterpolant;

/// Default relative distance `|x - y*| / (1 + |x|)` above which the envelope
/// is reported as active.
pub const DEFAULT_GRAD_SWITCH_REL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExtensionRepr", into = "ExtensionRepr")]
pub struct Extension {
    x: Subspace,
    v_star: Vector,
    lipschitz: f64,
    interpolant: SmoothInterpolant,
    m_star: CornerFunction,
    grad_switch_rel: f64,
    tilted: SmoothInterpolant,
    v_perp: Vector,
    k: f64,
}

#[derive(Serialize, Deserialize)]
struct ExtensionRepr {
    x: Subspace,
    #[serde(with = "crate::serde_vec")]
    v_star: Vector,
    lipschitz: f64,
    interpolant: SmoothInterpolant,
    m_star: CornerFunction,
    grad_switch_rel: f64,
}

impl TryFrom<ExtensionRepr> for Extension {
    type Error = Error;

    fn try_from(r: ExtensionRepr) -> Result<Self> {
        Extension::new(r.x, r.v_star, r.lipschitz, r.interpolant, r.m_star, r.grad_switch_rel)
    }
}

impl From<Extension> for ExtensionRepr {
    fn from(e: Extension) -> Self {
        Self {
            x: e.x,
            v_star: e.v_star,
            lipschitz: e.lipschitz,
            interpolant: e.interpolant,
            m_star: e.m_star,
            grad_switch_rel: e.grad_switch_rel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FEval {
    pub value: f64,
    #[serde(with = "crate::serde_vec")]
    pub gradient: Vector,
    #[serde(with = "crate::serde_vec")]
    pub minimizer: Vector,
    /// `|x - y*|` exceeds the switch tolerance.
    pub active: bool,
    pub gap: f64,
}

impl Extension {
    pub fn new(
        x: Subspace,
        v_star: Vector,
        lipschitz: f64,
        interpolant: SmoothInterpolant,
        m_star: CornerFunction,
        grad_switch_rel: f64,
    ) -> Result<Self> {
        let n = x.ambient_dim();
        if v_star.len() != n || m_star.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v_star.len() });
        }
        if interpolant.dim() != x.dim() {
            return Err(Error::DimensionMismatch { expected: x.dim(), found: interpolant.dim() });
        }
        let v_perp = x.reject(&v_star);
        let k = (lipschitz * lipschitz - v_perp.norm_squared()).max(0.0).sqrt();
        let tilted = interpolant.tilted(&x.coords(&v_star));
        Ok(Self { x, v_star, lipschitz, interpolant, m_star, grad_switch_rel, tilted, v_perp, k })
    }

    pub fn x(&self) -> &Subspace {
        &self.x
    }

    pub fn v_star(&self) -> &Vector {
        &self.v_star
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn interpolant(&self) -> &SmoothInterpolant {
        &self.interpolant
    }

    pub fn m_star(&self) -> &CornerFunction {
        &self.m_star
    }

    pub fn ambient_dim(&self) -> usize {
        self.x.ambient_dim()
    }

    /// Slope bound `K` of the inf-convolution on `X`.
    pub fn slope_radius(&self) -> f64 {
        self.k
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim(), found: x.len() });
        }
        Ok(())
    }

    /// `F~(x) = H(P_X x) + <v*, x>` and its gradient.
    pub fn eval_ftilde(&self, x: &Vector) -> Result<(f64, Vector)> {
        self.check_dim(x)?;
        let (h, gh) = self.interpolant.eval_h(&self.x.coords(x))?;
        Ok((h + self.v_star.dot(x), self.x.embed(&gh) + &self.v_star))
    }

    pub fn eval_f(&self, x: &Vector) -> Result<FEval> {
        self.check_dim(x)?;
        let xi = self.x.coords(x);
        let (g, e) = self.tilted.problem_at(&xi);
        let m = self.tilted.m;
        let sol = maxmin::solve_ball(&Problem { g: &g, e: &e }, m, self.k, self.tilted.solver.settings())?;
        let value = self.v_perp.dot(x) + sol.value;
        let gradient = self.x.embed(&sol.s) + &self.v_perp;

        let mut minimizer = x.clone();
        if sol.active && sol.mu > 0.0 {
            let nu = 1.0 / sol.mu - 1.0 / m;
            let zeta = &xi - &sol.s * nu;
            let delta = (&xi - &zeta).norm();
            minimizer = self.x.embed(&zeta) + self.x.reject(x);
            if self.k > 0.0 {
                minimizer -= &self.v_perp * (delta / self.k);
            }
        }
        let active = (x - &minimizer).norm() > self.grad_switch_rel * (1.0 + x.norm());
        Ok(FEval { value, gradient, minimizer, active, gap: sol.gap })
    }

    /// Order-preserving parallel evaluation.
    pub fn eval_f_many(&self, xs: &[Vector]) -> Vec<Result<FEval>> {
        xs.par_iter().map(|x| self.eval_f(x)).collect()
    }

    /// `F(x + t w) - F(x) - t <v*, w>`.
    pub fn global_behavior_probe(&self, x: &Vector, w: &Vector, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let shifted = x + w * t;
        Ok(self.eval_f(&shifted)?.value - self.eval_f(x)?.value - t * self.v_star.dot(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimal::Piece;
    use crate::smooth::{DataPoint, SolverConfig};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn huber_extension() -> Extension {
        let data = vec![
            DataPoint { z: v(&[-1.0]), value: 1.0, slope: v(&[-1.0]) },
            DataPoint { z: v(&[1.0]), value: 1.0, slope: v(&[1.0]) },
        ];
        let h = SmoothInterpolant::new(data, 1.0, 1e-7, 3.0, SolverConfig::default()).unwrap();
        let m = CornerFunction::new(
            vec![Piece { slope: v(&[-1.0]), offset: 0.0 }, Piece { slope: v(&[1.0]), offset: 0.0 }],
            Subspace::full(1),
        )
        .unwrap();
        Extension::new(Subspace::full(1), v(&[0.0]), 1.0, h, m, DEFAULT_GRAD_SWITCH_REL).unwrap()
    }

    #[test]
    fn huber_closed_form() {
        let e = huber_extension();
        let closed = |x: f64| if x.abs() <= 1.0 { 0.5 * x * x + 0.5 } else { x.abs() };
        for x in [-5.0, -2.0, -1.0, -0.4, 0.0, 0.3, 1.0, 1.5, 2.0, 5.0] {
            let r = e.eval_f(&v(&[x])).unwrap();
            assert!((r.value - closed(x)).abs() < 1e-12, "F({x}) = {}", r.value);
            let slope = x.clamp(-1.0, 1.0);
            assert!((r.gradient[0] - slope).abs() < 1e-9);
            assert!(r.gradient.norm() <= 1.0 + 1e-12);
        }
        let r = e.eval_f(&v(&[2.0])).unwrap();
        assert!(r.active);
        assert!((r.minimizer[0] - 1.0).abs() < 1e-9);
        let r = e.eval_f(&v(&[0.0])).unwrap();
        assert!(!r.active);
        assert_eq!(r.minimizer, v(&[0.0]));
        assert_eq!(e.eval_ftilde(&v(&[0.0])).unwrap().0, 0.5);
        assert_eq!(e.global_behavior_probe(&v(&[0.3]), &v(&[1.0]), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_directions_are_affine() {
        // H on X = span{e1} in R^2 with v* = (0, 0.5): F(x) = F_1(x1) + 0.5 x2 with
        // F_1 the inf-convolution with slope radius K = sqrt(1 - 0.25).
        let data = vec![
            DataPoint { z: v(&[-1.0]), value: 1.0, slope: v(&[-0.8]) },
            DataPoint { z: v(&[1.0]), value: 1.0, slope: v(&[0.8]) },
        ];
        let h = SmoothInterpolant::new(data, 1.0, 1e-7, 3.0, SolverConfig::default()).unwrap();
        let x = Subspace::span(2, &[v(&[1.0, 0.0])], 1e-9).unwrap();
        let m = CornerFunction::new(
            vec![Piece { slope: v(&[-0.8, 0.5]), offset: 0.2 }, Piece { slope: v(&[0.8, 0.5]), offset: 0.2 }],
            Subspace::full(2),
        )
        .unwrap();
        let e = Extension::new(x, v(&[0.0, 0.5]), 1.0, h, m, DEFAULT_GRAD_SWITCH_REL).unwrap();
        assert!((e.slope_radius() - 0.75f64.sqrt()).abs() < 1e-15);
        let base = v(&[3.0, -1.0]);
        for t in [0.5, 10.0, -7.0] {
            let p = e.global_behavior_probe(&base, &v(&[0.0, 1.0]), t).unwrap();
            assert!(p.abs() < 1e-12);
        }
        let r = e.eval_f(&base).unwrap();
        assert!((r.gradient.norm() - 1.0).abs() < 1e-9);
        // The minimizer attains the infimum.
        let (ft, _) = e.eval_ftilde(&r.minimizer).unwrap();
        let total = ft + (&base - &r.minimizer).norm();
        assert!((total - r.value).abs() < 1e-9, "{total} vs {}", r.value);
    }
}
